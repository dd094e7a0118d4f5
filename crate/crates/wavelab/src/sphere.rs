//! Restriction of grid fields to spheres and mixed radial-angular norms.
//!
//! Sphere values are obtained by trilinear interpolation of the grid field
//! at quadrature nodes of a product rule: Gauss-Legendre in `cos(theta)`
//! times a uniform periodic rule in `phi`.  The product rule integrates
//! smooth functions on the sphere to high order; the trilinear step limits
//! the overall accuracy to second order in `h`, which is enough for the
//! measured-constant studies these norms feed.

use crate::error::{Error, Result};
use crate::grid::ScalarField;

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration on the
/// Legendre recurrence.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 2);
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for k in 0..m {
        // Tricomi initial guess.
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (m as f64 + 0.5)).cos();
        for _ in 0..100 {
            // Evaluate P_m and P_m' by recurrence.
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=m {
                let jj = j as f64;
                let p2 = ((2.0 * jj - 1.0) * x * p1 - (jj - 1.0) * p0) / jj;
                p0 = p1;
                p1 = p2;
            }
            let dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0, x);
        for j in 2..=m {
            let jj = j as f64;
            let p2 = ((2.0 * jj - 1.0) * x * p1 - (jj - 1.0) * p0) / jj;
            p0 = p1;
            p1 = p2;
        }
        let dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
        nodes[m - 1 - k] = x;
        weights[m - 1 - k] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Quadrature nodes on the unit sphere: direction vectors and weights
/// summing to `4 pi`.
#[derive(Debug, Clone)]
pub struct SphereRule {
    pub dirs: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub n_theta: usize,
    pub n_phi: usize,
}

impl SphereRule {
    /// Product rule with `n_theta` Gauss-Legendre colatitudes and `n_phi`
    /// uniform azimuths.  The default resolution used by the diagnostics is
    /// 16 x 32.
    pub fn product(n_theta: usize, n_phi: usize) -> SphereRule {
        let (ct, wt) = gauss_legendre(n_theta);
        let dphi = 2.0 * std::f64::consts::PI / n_phi as f64;
        let mut dirs = Vec::with_capacity(n_theta * n_phi);
        let mut weights = Vec::with_capacity(n_theta * n_phi);
        for (c, w) in ct.iter().zip(&wt) {
            let s = (1.0 - c * c).sqrt();
            for q in 0..n_phi {
                let phi = (q as f64 + 0.5) * dphi;
                dirs.push([s * phi.cos(), s * phi.sin(), *c]);
                weights.push(w * dphi);
            }
        }
        SphereRule { dirs, weights, n_theta, n_phi }
    }

    pub fn default_rule() -> SphereRule {
        SphereRule::product(16, 32)
    }
}

/// Trilinear interpolation of `f` at an arbitrary interior point.
pub fn trilinear(f: &ScalarField, p: [f64; 3]) -> f64 {
    let grid = f.grid();
    let n = grid.n();
    let h = grid.h();
    let l = grid.half_width();
    let mut idx = [0usize; 3];
    let mut frac = [0.0f64; 3];
    for a in 0..3 {
        // Fractional node coordinate: node i sits at -L + (i + 1/2) h.
        let s = (p[a] + l) / h - 0.5;
        let i0 = s.floor();
        let i = (i0 as isize).clamp(0, n as isize - 2) as usize;
        idx[a] = i;
        frac[a] = (s - i as f64).clamp(0.0, 1.0);
    }
    let mut acc = 0.0;
    for dx in 0..2 {
        let wx = if dx == 0 { 1.0 - frac[0] } else { frac[0] };
        for dy in 0..2 {
            let wy = if dy == 0 { 1.0 - frac[1] } else { frac[1] };
            for dz in 0..2 {
                let wz = if dz == 0 { 1.0 - frac[2] } else { frac[2] };
                acc += wx * wy * wz * f.at(idx[0] + dx, idx[1] + dy, idx[2] + dz);
            }
        }
    }
    acc
}

/// Result of a sphere restriction; `under_resolved` warns that the radius
/// is below one grid spacing.
#[derive(Debug, Clone, Copy)]
pub struct SphereNorm {
    pub value: f64,
    pub under_resolved: bool,
}

/// `L^p(S^2)` norm of `f` restricted to the sphere of given `radius`
/// (surface measure, so a unit field returns `(4 pi)^{1/p}`).
pub fn sphere_lp(f: &ScalarField, radius: f64, p: f64, rule: &SphereRule) -> Result<SphereNorm> {
    let grid = f.grid();
    if radius <= 0.0 {
        return Err(Error::Diagnostics(format!("sphere radius {radius} must be positive")));
    }
    if radius > grid.max_safe_radius() {
        return Err(Error::Diagnostics(format!(
            "sphere radius {radius} exceeds safe interpolation radius {}",
            grid.max_safe_radius()
        )));
    }
    let mut acc = 0.0;
    for (d, w) in rule.dirs.iter().zip(&rule.weights) {
        let v = trilinear(f, [radius * d[0], radius * d[1], radius * d[2]]).abs();
        acc += w * v.powf(p);
    }
    Ok(SphereNorm { value: acc.powf(1.0 / p), under_resolved: radius < grid.h() })
}

/// Discrete radius ladder `(k + 1/2) h` up to the safe interpolation
/// radius.
pub fn radius_ladder(f: &ScalarField) -> Vec<f64> {
    let grid = f.grid();
    let h = grid.h();
    let rmax = grid.max_safe_radius();
    let mut out = Vec::new();
    let mut k = 0usize;
    loop {
        let r = (k as f64 + 0.5) * h;
        if r > rmax {
            break;
        }
        out.push(r);
        k += 1;
    }
    out
}

/// `sup_r w(r) || f(r .) ||_{L^p(S^2)}` over the discrete radius ladder.
pub fn lr_inf_lomega(
    f: &ScalarField,
    p: f64,
    rule: &SphereRule,
    weight: impl Fn(f64) -> f64,
) -> f64 {
    let mut best = 0.0_f64;
    for r in radius_ladder(f) {
        if let Ok(s) = sphere_lp(f, r, p, rule) {
            best = best.max(weight(r) * s.value);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid3;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(8);
        // Rule with 8 nodes is exact through degree 15.
        for k in [0usize, 2, 4, 8, 14] {
            let s: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(k as i32)).sum();
            let exact = 2.0 / (k as f64 + 1.0);
            assert!((s - exact).abs() < 1e-13, "degree {k}: {s} vs {exact}");
        }
        for k in [1usize, 3, 7] {
            let s: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(k as i32)).sum();
            assert!(s.abs() < 1e-14, "odd degree {k}: {s}");
        }
    }

    #[test]
    fn sphere_weights_sum_to_full_solid_angle() {
        let rule = SphereRule::default_rule();
        let s: f64 = rule.weights.iter().sum();
        assert!((s - 4.0 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn unit_field_l4_is_fourth_root_of_4pi() {
        let g = Grid3::new(48, 2.0).unwrap();
        let f = ScalarField::from_fn(g, |_, _, _| 1.0);
        let rule = SphereRule::default_rule();
        let v = sphere_lp(&f, 1.0, 4.0, &rule).unwrap().value;
        let expect = (4.0 * std::f64::consts::PI).powf(0.25);
        assert!((v - expect).abs() < 1e-10, "{v} vs {expect}");
    }

    #[test]
    fn degree_one_harmonic_l4_value() {
        // f = x3 / r restricted to any sphere is cos(theta);
        // || cos ||_{L^4(S^2)} = (4 pi / 5)^{1/4}.
        let g = Grid3::new(96, 1.5) .unwrap();
        let f = ScalarField::from_fn(g, |x, y, z| {
            let r = (x * x + y * y + z * z).sqrt();
            z / r
        });
        let rule = SphereRule::default_rule();
        let v = sphere_lp(&f, 1.0, 4.0, &rule).unwrap().value;
        let expect = (4.0 * std::f64::consts::PI / 5.0).powf(0.25);
        assert!((v - expect).abs() < 3e-3 * expect, "{v} vs {expect}");
    }

    #[test]
    fn rule_refinement_agrees_on_smooth_field() {
        let g = Grid3::new(64, 2.0).unwrap();
        let f = ScalarField::from_fn(g, |x, y, z| (x + 0.5 * y).sin() + z * z);
        let coarse = SphereRule::product(16, 32);
        let fine = SphereRule::product(32, 64);
        let a = sphere_lp(&f, 1.2, 4.0, &coarse).unwrap().value;
        let b = sphere_lp(&f, 1.2, 4.0, &fine).unwrap().value;
        assert!((a - b).abs() < 1e-3 * b.abs().max(1.0), "{a} vs {b}");
    }

    #[test]
    fn radius_beyond_margin_rejected() {
        let g = Grid3::new(32, 1.0).unwrap();
        let f = ScalarField::zeros(g);
        let rule = SphereRule::default_rule();
        assert!(sphere_lp(&f, 0.99, 4.0, &rule).is_err());
        assert!(sphere_lp(&f, -0.1, 4.0, &rule).is_err());
    }

    #[test]
    fn trilinear_reproduces_linear_functions() {
        let g = Grid3::new(16, 1.0).unwrap();
        let f = ScalarField::from_fn(g, |x, y, z| 1.0 + 2.0 * x - y + 0.5 * z);
        for p in [[0.1, 0.2, -0.3], [0.55, -0.71, 0.0], [-0.8, 0.8, 0.8]] {
            let v = trilinear(&f, p);
            let exact = 1.0 + 2.0 * p[0] - p[1] + 0.5 * p[2];
            assert!((v - exact).abs() < 1e-12, "{v} vs {exact}");
        }
    }
}
