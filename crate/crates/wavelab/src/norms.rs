//! Weighted Lebesgue norms by midpoint quadrature.
//!
//! Midpoint quadrature on the cell-centered grid integrates smooth,
//! effectively supported fields to superalgebraic accuracy, so all the
//! quadrature error budgets in this crate are dominated by the stencil
//! error of whatever derivatives enter the integrand, not by the
//! quadrature itself.

use crate::grid::{sum_chunked, Grid3, ScalarField};

/// Integration region: the whole box, a centered ball, or its complement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    All,
    Ball(f64),
    Shell(f64),
}

impl Region {
    #[inline]
    pub fn contains(&self, r: f64) -> bool {
        match *self {
            Region::All => true,
            Region::Ball(rad) => r < rad,
            Region::Shell(rad) => r >= rad,
        }
    }
}

/// Lebesgue exponent for the norm operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lp {
    P2,
    P3,
    P4,
    P6,
    Inf,
}

impl Lp {
    pub fn exponent(&self) -> Option<f64> {
        match self {
            Lp::P2 => Some(2.0),
            Lp::P3 => Some(3.0),
            Lp::P4 => Some(4.0),
            Lp::P6 => Some(6.0),
            Lp::Inf => None,
        }
    }
}

/// Result of a norm evaluation; `empty_region` warns that no node fell in
/// the requested region (the value is then zero).
#[derive(Debug, Clone, Copy)]
pub struct NormValue {
    pub value: f64,
    pub empty_region: bool,
}

/// Weighted L^p norm `|| w(x) f(x) ||_p` over `region`, with `w` an
/// arbitrary pointwise weight of the node position.
pub fn weighted_lp_norm(
    f: &ScalarField,
    p: Lp,
    region: Region,
    weight: Option<&dyn Fn([f64; 3]) -> f64>,
) -> NormValue {
    let grid = f.grid();
    let n = grid.n();
    let mut any = false;
    match p.exponent() {
        None => {
            let mut m = 0.0_f64;
            for ix in 0..n {
                let x = grid.coord(ix);
                for iy in 0..n {
                    let y = grid.coord(iy);
                    let row = grid.idx(ix, iy, 0);
                    for iz in 0..n {
                        let z = grid.coord(iz);
                        let r = (x * x + y * y + z * z).sqrt();
                        if !region.contains(r) {
                            continue;
                        }
                        any = true;
                        let mut v = f.data()[row + iz];
                        if let Some(w) = weight {
                            v *= w([x, y, z]);
                        }
                        m = m.max(v.abs());
                    }
                }
            }
            NormValue { value: m, empty_region: !any }
        }
        Some(pe) => {
            let vol = grid.cell_volume();
            let mut terms: Vec<f64> = Vec::new();
            // Accumulate per-x-slab partial sums deterministically.
            let mut total = 0.0;
            for ix in 0..n {
                let x = grid.coord(ix);
                let mut slab = 0.0;
                for iy in 0..n {
                    let y = grid.coord(iy);
                    let row = grid.idx(ix, iy, 0);
                    for iz in 0..n {
                        let z = grid.coord(iz);
                        let r = (x * x + y * y + z * z).sqrt();
                        if !region.contains(r) {
                            continue;
                        }
                        any = true;
                        let mut v = f.data()[row + iz].abs();
                        if let Some(w) = weight {
                            v *= w([x, y, z]).abs();
                        }
                        slab += if pe == 2.0 {
                            v * v
                        } else if pe == 4.0 {
                            let v2 = v * v;
                            v2 * v2
                        } else if pe == 6.0 {
                            let v2 = v * v;
                            v2 * v2 * v2
                        } else {
                            v.powf(pe)
                        };
                    }
                }
                terms.push(slab);
                total += slab;
            }
            let _ = &terms;
            NormValue { value: (total * vol).powf(1.0 / pe), empty_region: !any }
        }
    }
}

/// Unweighted L^p norm over the whole box.
pub fn lp_norm(f: &ScalarField, p: Lp) -> f64 {
    weighted_lp_norm(f, p, Region::All, None).value
}

/// L^2 norm of a precomputed nonnegative density (already |.|^2 pointwise):
/// `sqrt(sum density * h^3)`.  Used by fused diagnostic passes.
pub fn l2_of_density(density_sum: f64, grid: Grid3) -> f64 {
    (density_sum * grid.cell_volume()).sqrt()
}

/// Japanese bracket `<s> = sqrt(1 + s^2)`.
#[inline]
pub fn bracket(s: f64) -> f64 {
    (1.0 + s * s).sqrt()
}

/// Deterministic sum helper re-exported for fused quadratures.
pub fn sum_all(values: &[f64]) -> f64 {
    sum_chunked(values.iter().copied())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid3;

    #[test]
    fn constant_field_l2_is_box_measure() {
        // ||1||_2 over [-1,1]^3 = (2L)^{3/2}; midpoint quadrature is exact
        // for constants.
        let g = Grid3::new(8, 1.0).unwrap();
        let f = ScalarField::from_fn(g, |_, _, _| 1.0);
        let v = lp_norm(&f, Lp::P2);
        let expect = 8.0_f64.sqrt();
        assert!((v - expect).abs() < 1e-12, "{v} vs {expect}");
    }

    #[test]
    fn zero_field_all_norms_zero() {
        let g = Grid3::new(8, 1.0).unwrap();
        let f = ScalarField::zeros(g);
        for p in [Lp::P2, Lp::P3, Lp::P4, Lp::P6, Lp::Inf] {
            assert_eq!(weighted_lp_norm(&f, p, Region::All, None).value, 0.0);
        }
    }

    #[test]
    fn empty_region_flags_warning() {
        let g = Grid3::new(8, 1.0).unwrap();
        let f = ScalarField::from_fn(g, |_, _, _| 1.0);
        let v = weighted_lp_norm(&f, Lp::P2, Region::Ball(1e-6), None);
        assert!(v.empty_region);
        assert_eq!(v.value, 0.0);
    }

    #[test]
    fn homogeneity_under_scaling() {
        let g = Grid3::new(16, 2.0).unwrap();
        let f = ScalarField::from_fn(g, |x, y, z| (x + 0.3 * y * z).sin());
        for p in [Lp::P2, Lp::P3, Lp::P4, Lp::P6, Lp::Inf] {
            let a = weighted_lp_norm(&f, p, Region::All, None).value;
            let b = weighted_lp_norm(&f.scaled(-2.5), p, Region::All, None).value;
            assert!((b - 2.5 * a).abs() < 1e-12 * b.max(1.0), "p {p:?}");
        }
    }

    #[test]
    fn ball_shell_partition_additivity() {
        let g = Grid3::new(16, 2.0).unwrap();
        let f = ScalarField::from_fn(g, |x, y, z| x * x + y - z);
        let all = weighted_lp_norm(&f, Lp::P2, Region::All, None).value;
        let ball = weighted_lp_norm(&f, Lp::P2, Region::Ball(1.0), None).value;
        let shell = weighted_lp_norm(&f, Lp::P2, Region::Shell(1.0), None).value;
        let combined = (ball * ball + shell * shell).sqrt();
        assert!((all - combined).abs() < 1e-12 * all, "{all} vs {combined}");
    }

    #[test]
    fn weighted_bump_matches_radial_quadrature_oracle() {
        // || <r> f ||_2 for f = exp(-r^2) against the 1D radial integral
        // 4 pi \int (1+r^2) exp(-2 r^2) r^2 dr computed by fine Simpson.
        let g = Grid3::new(64, 6.0).unwrap();
        let f = ScalarField::from_fn(g, |x, y, z| (-(x * x + y * y + z * z)).exp());
        let w = |p: [f64; 3]| bracket((p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt());
        let v = weighted_lp_norm(&f, Lp::P2, Region::All, Some(&w)).value;

        let integrand = |r: f64| (1.0 + r * r) * (-2.0 * r * r).exp() * r * r;
        let m = 20_000;
        let hh = 6.0 / m as f64;
        let mut s = 0.0;
        for k in 0..m {
            let a = k as f64 * hh;
            s += hh / 6.0 * (integrand(a) + 4.0 * integrand(a + 0.5 * hh) + integrand(a + hh));
        }
        let oracle = (4.0 * std::f64::consts::PI * s).sqrt();
        assert!((v - oracle).abs() < 1e-3 * oracle, "{v} vs {oracle}");
    }
}
