//! Finite-difference stencils on uniform grids.
//!
//! All derivatives use five-point windows.  In the interior the window is
//! centered (fourth-order); within two cells of a face it shifts to stay
//! inside the grid, which keeps every window exact on polynomials of degree
//! at most four while degrading the formal order near the boundary shell.
//! Supported fields never reach the shell, so the interior accuracy is the
//! one that matters.
//!
//! Weights come from Fornberg's recurrence rather than hard-coded tables,
//! which removes transcription risk and generalizes to the one-sided
//! windows for free.

use crate::grid::ScalarField;

/// Width of the difference window.
pub const STENCIL_WIDTH: usize = 5;

/// Fornberg's algorithm: weights of the `m`-th derivative at `x0` for nodes
/// at `xs`, exact on polynomials of degree `xs.len() - 1`.
pub fn fornberg_weights(xs: &[f64], x0: f64, m: usize) -> Vec<f64> {
    let nn = xs.len();
    // c[k][j]: weight of node j for the k-th derivative.
    let mut c = vec![vec![0.0; nn]; m + 1];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for i in 1..nn {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c[m].clone()
}

/// Precomputed window weights for one grid spacing: `w[offset][tap]` where
/// `offset` is the position of the evaluation node inside its window.
#[derive(Debug, Clone)]
pub struct WindowWeights {
    pub d1: [[f64; STENCIL_WIDTH]; STENCIL_WIDTH],
    pub d2: [[f64; STENCIL_WIDTH]; STENCIL_WIDTH],
}

impl WindowWeights {
    pub fn for_spacing(h: f64) -> WindowWeights {
        let xs: Vec<f64> = (0..STENCIL_WIDTH).map(|i| i as f64 * h).collect();
        let mut d1 = [[0.0; STENCIL_WIDTH]; STENCIL_WIDTH];
        let mut d2 = [[0.0; STENCIL_WIDTH]; STENCIL_WIDTH];
        for offset in 0..STENCIL_WIDTH {
            let w1 = fornberg_weights(&xs, xs[offset], 1);
            let w2 = fornberg_weights(&xs, xs[offset], 2);
            for tap in 0..STENCIL_WIDTH {
                d1[offset][tap] = w1[tap];
                d2[offset][tap] = w2[tap];
            }
        }
        WindowWeights { d1, d2 }
    }
}

/// Window start for evaluation node `j` on an axis of `n` nodes.
#[inline]
fn window_start(j: usize, n: usize) -> usize {
    if j < 2 {
        0
    } else if j + 2 >= n {
        n - STENCIL_WIDTH
    } else {
        j - 2
    }
}

fn derivative_impl(f: &ScalarField, axis: usize, order: usize) -> ScalarField {
    let mut out = ScalarField::zeros(f.grid());
    accumulate_derivative(f, axis, order, &mut out, true);
    out
}

/// Writes (or adds) the derivative of `f` along `axis` into `out`.  The
/// loops are arranged so every inner pass runs over a contiguous `iz` row:
/// along axes 0 and 1 the window index is constant per row and the five
/// taps become five shifted rows; along axis 2 the centered interior is a
/// sliding window with the four boundary nodes patched separately.
fn accumulate_derivative(
    f: &ScalarField,
    axis: usize,
    order: usize,
    out: &mut ScalarField,
    overwrite: bool,
) {
    let grid = f.grid();
    let n = grid.n();
    let ww = WindowWeights::for_spacing(grid.h());
    let table = if order == 1 { &ww.d1 } else { &ww.d2 };
    let src = f.data();
    let dst = out.data_mut();
    match axis {
        0 | 1 => {
            let stride = if axis == 0 { n * n } else { n };
            for ix in 0..n {
                for iy in 0..n {
                    let j = if axis == 0 { ix } else { iy };
                    let ws = window_start(j, n);
                    let w = &table[j - ws];
                    let row = (ix * n + iy) * n;
                    let base =
                        (row as isize + (ws as isize - j as isize) * stride as isize) as usize;
                    let r0 = &src[base..base + n];
                    let r1 = &src[base + stride..base + stride + n];
                    let r2 = &src[base + 2 * stride..base + 2 * stride + n];
                    let r3 = &src[base + 3 * stride..base + 3 * stride + n];
                    let r4 = &src[base + 4 * stride..base + 4 * stride + n];
                    let drow = &mut dst[row..row + n];
                    if overwrite {
                        for i in 0..n {
                            drow[i] = w[0] * r0[i]
                                + w[1] * r1[i]
                                + w[2] * r2[i]
                                + w[3] * r3[i]
                                + w[4] * r4[i];
                        }
                    } else {
                        for i in 0..n {
                            drow[i] += w[0] * r0[i]
                                + w[1] * r1[i]
                                + w[2] * r2[i]
                                + w[3] * r3[i]
                                + w[4] * r4[i];
                        }
                    }
                }
            }
        }
        2 => {
            let wc = &table[2];
            for row_idx in 0..n * n {
                let row = row_idx * n;
                let srow = &src[row..row + n];
                let drow = &mut dst[row..row + n];
                for (i, win) in srow.windows(STENCIL_WIDTH).enumerate() {
                    let v = wc[0] * win[0]
                        + wc[1] * win[1]
                        + wc[2] * win[2]
                        + wc[3] * win[3]
                        + wc[4] * win[4];
                    if overwrite {
                        drow[i + 2] = v;
                    } else {
                        drow[i + 2] += v;
                    }
                }
                for j in [0, 1, n - 2, n - 1] {
                    let ws = window_start(j, n);
                    let w = &table[j - ws];
                    let mut acc = 0.0;
                    for (tap, wk) in w.iter().enumerate() {
                        acc += wk * srow[ws + tap];
                    }
                    if overwrite {
                        drow[j] = acc;
                    } else {
                        drow[j] += acc;
                    }
                }
            }
        }
        _ => panic!("axis out of range"),
    }
}

/// First derivative along `axis` (0, 1 or 2).
pub fn derivative(f: &ScalarField, axis: usize) -> ScalarField {
    derivative_impl(f, axis, 1)
}

/// Second derivative along `axis`.
pub fn second_derivative(f: &ScalarField, axis: usize) -> ScalarField {
    derivative_impl(f, axis, 2)
}

/// Gradient as three fields.
pub fn gradient(f: &ScalarField) -> [ScalarField; 3] {
    [derivative(f, 0), derivative(f, 1), derivative(f, 2)]
}

/// Laplacian as the sum of the three second derivatives, accumulated in
/// one output field.
pub fn laplacian(f: &ScalarField) -> ScalarField {
    let mut out = ScalarField::zeros(f.grid());
    accumulate_derivative(f, 0, 2, &mut out, true);
    accumulate_derivative(f, 1, 2, &mut out, false);
    accumulate_derivative(f, 2, 2, &mut out, false);
    out
}
