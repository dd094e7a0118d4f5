//! Cell-centered uniform grids on the cube `[-L, L]^3` and scalar fields
//! sampled on them.
//!
//! Nodes sit at cell centers, `x_i = -L + (i + 1/2) h` with `h = 2L / n`,
//! so no node lies on a coordinate plane and in particular none sits at
//! `r = 0`.  That keeps every `1/r`-weighted quantity finite without
//! special-casing the origin.  The outermost four layers of cells form the
//! boundary shell: supported fields are expected to stay numerically zero
//! there, and derivative stencils degrade to one-sided windows inside it.

use crate::error::{Error, Result};

/// Number of boundary cell layers reserved as the "shell" on each face.
pub const BOUNDARY_SHELL: usize = 4;

/// A cell-centered uniform grid on `[-L, L]^3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid3 {
    n: usize,
    half_width: f64,
    h: f64,
}

impl Grid3 {
    /// Builds an `n^3` grid on `[-half_width, half_width]^3`.
    ///
    /// Requires `n >= 8` and `half_width > 0`; the spacing satisfies
    /// `n * h = 2 * half_width` exactly (up to one rounding in the division).
    pub fn new(n: usize, half_width: f64) -> Result<Grid3> {
        if n < 8 {
            return Err(Error::Grid(format!("grid size n = {n} is below the minimum of 8")));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::Grid(format!("half width {half_width} must be positive and finite")));
        }
        Ok(Grid3 { n, half_width, h: 2.0 * half_width / n as f64 })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn node_count(&self) -> usize {
        self.n * self.n * self.n
    }

    /// Cell volume `h^3`, the weight of one node in midpoint quadrature.
    pub fn cell_volume(&self) -> f64 {
        self.h * self.h * self.h
    }

    /// Coordinate of node `i` along any axis: `-L + (i + 1/2) h`.
    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + (i as f64 + 0.5) * self.h
    }

    /// Linear index of node `(ix, iy, iz)`; `iz` varies fastest.
    pub fn idx(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (ix * self.n + iy) * self.n + iz
    }

    /// True when any axis index lies within the boundary shell.
    pub fn in_shell(&self, ix: usize, iy: usize, iz: usize) -> bool {
        let lo = BOUNDARY_SHELL;
        let hi = self.n - BOUNDARY_SHELL;
        ix < lo || ix >= hi || iy < lo || iy >= hi || iz < lo || iz >= hi
    }

    /// Largest radius safely inside the grid for sphere sampling with a
    /// trilinear (one-cell) interpolation margin.
    pub fn max_safe_radius(&self) -> f64 {
        self.half_width - 2.0 * self.h
    }
}

/// A scalar field sampled at the nodes of a [`Grid3`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid3,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid3) -> ScalarField {
        ScalarField { grid, data: vec![0.0; grid.node_count()] }
    }

    /// Samples `f(x, y, z)` at every node.
    pub fn from_fn(grid: Grid3, f: impl Fn(f64, f64, f64) -> f64) -> ScalarField {
        let n = grid.n();
        let mut data = Vec::with_capacity(grid.node_count());
        for ix in 0..n {
            let x = grid.coord(ix);
            for iy in 0..n {
                let y = grid.coord(iy);
                for iz in 0..n {
                    data.push(f(x, y, grid.coord(iz)));
                }
            }
        }
        ScalarField { grid, data }
    }

    pub fn grid(&self) -> Grid3 {
        self.grid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn at(&self, ix: usize, iy: usize, iz: usize) -> f64 {
        self.data[self.grid.idx(ix, iy, iz)]
    }

    /// Asserts that two fields live on the same grid; all binary operations
    /// require it.
    fn check_same_grid(&self, other: &ScalarField) {
        assert!(self.grid == other.grid, "fields live on different grids");
    }

    pub fn scale(&mut self, a: f64) {
        for v in &mut self.data {
            *v *= a;
        }
    }

    pub fn scaled(&self, a: f64) -> ScalarField {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &ScalarField) {
        self.check_same_grid(other);
        for (v, w) in self.data.iter_mut().zip(&other.data) {
            *v += a * w;
        }
    }

    /// `self = base + a * other` in one pass, the fused form of a clone
    /// followed by `axpy` that the steppers lean on.
    pub fn assign_add_scaled(&mut self, base: &ScalarField, a: f64, other: &ScalarField) {
        self.check_same_grid(base);
        self.check_same_grid(other);
        for ((v, b), w) in self.data.iter_mut().zip(&base.data).zip(&other.data) {
            *v = b + a * w;
        }
    }

    /// `self + a * other` as a fresh field without an intermediate copy.
    pub fn add_scaled(&self, a: f64, other: &ScalarField) -> ScalarField {
        self.check_same_grid(other);
        let data = self.data.iter().zip(&other.data).map(|(b, w)| b + a * w).collect();
        ScalarField { grid: self.grid, data }
    }

    pub fn add(&self, other: &ScalarField) -> ScalarField {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// Pointwise product.
    pub fn mul(&self, other: &ScalarField) -> ScalarField {
        self.check_same_grid(other);
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect();
        ScalarField { grid: self.grid, data }
    }

    /// `self += a * f * g` pointwise.
    pub fn axpy_mul(&mut self, a: f64, f: &ScalarField, g: &ScalarField) {
        self.check_same_grid(f);
        self.check_same_grid(g);
        for ((v, p), q) in self.data.iter_mut().zip(&f.data).zip(&g.data) {
            *v += a * p * q;
        }
    }

    /// `self += a * f * g * w` pointwise.
    pub fn axpy_mul3(&mut self, a: f64, f: &ScalarField, g: &ScalarField, w: &ScalarField) {
        self.check_same_grid(f);
        self.check_same_grid(g);
        self.check_same_grid(w);
        for (i, v) in self.data.iter_mut().enumerate() {
            *v += a * f.data[i] * g.data[i] * w.data[i];
        }
    }

    /// Multiplies pointwise by the coordinate along `axis` (0, 1 or 2).
    pub fn mul_coord(&self, axis: usize) -> ScalarField {
        let n = self.grid.n();
        let mut out = self.clone();
        for ix in 0..n {
            for iy in 0..n {
                for iz in 0..n {
                    let c = self.grid.coord([ix, iy, iz][axis]);
                    out.data[self.grid.idx(ix, iy, iz)] *= c;
                }
            }
        }
        out
    }

    /// `x . grad` contraction: `sum_k x_k g_k` for a gradient triple `g`.
    pub fn x_dot(grad: &[ScalarField; 3]) -> ScalarField {
        let grid = grad[0].grid;
        let n = grid.n();
        let mut out = ScalarField::zeros(grid);
        for ix in 0..n {
            let x = grid.coord(ix);
            for iy in 0..n {
                let y = grid.coord(iy);
                let row = grid.idx(ix, iy, 0);
                for iz in 0..n {
                    let z = grid.coord(iz);
                    let k = row + iz;
                    out.data[k] =
                        x * grad[0].data[k] + y * grad[1].data[k] + z * grad[2].data[k];
                }
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// True when every value is finite.
    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Maximum of `|field|` over the boundary shell, used by the support
    /// containment check.
    pub fn shell_max_abs(&self) -> f64 {
        let n = self.grid.n();
        let mut m = 0.0_f64;
        for ix in 0..n {
            for iy in 0..n {
                for iz in 0..n {
                    if self.grid.in_shell(ix, iy, iz) {
                        m = m.max(self.data[self.grid.idx(ix, iy, iz)].abs());
                    }
                }
            }
        }
        m
    }

    /// Radius of the farthest node where `|field|` exceeds
    /// `threshold * max|field|`; zero for a vanishing field.
    pub fn support_radius(&self, threshold: f64) -> f64 {
        let cut = threshold * self.max_abs();
        if cut == 0.0 {
            return 0.0;
        }
        let n = self.grid.n();
        let mut r2max = 0.0_f64;
        for ix in 0..n {
            let x = self.grid.coord(ix);
            for iy in 0..n {
                let y = self.grid.coord(iy);
                let row = self.grid.idx(ix, iy, 0);
                for iz in 0..n {
                    if self.data[row + iz].abs() > cut {
                        let z = self.grid.coord(iz);
                        let r2 = x * x + y * y + z * z;
                        if r2 > r2max {
                            r2max = r2;
                        }
                    }
                }
            }
        }
        r2max.sqrt()
    }
}

/// Deterministic chunked sum: fixed-size partial sums combined in index
/// order, independent of call site and platform thread count.
pub fn sum_chunked(values: impl Iterator<Item = f64>) -> f64 {
    const CHUNK: usize = 4096;
    let mut total = 0.0;
    let mut partial = 0.0;
    let mut count = 0;
    for v in values {
        partial += v;
        count += 1;
        if count == CHUNK {
            total += partial;
            partial = 0.0;
            count = 0;
        }
    }
    total + partial
}
