//! Multi-speed semilinear wave system specifications.
//!
//! A system couples three scalar fields `u_1, u_2, u_3` with propagation
//! speeds `(1, 1, c_0)`:
//!
//! ```text
//! d_tt u_i - c_i^2 lap u_i = F_i,
//! F_i = sum_{j <= k} H_{i,jk}^{ab} (d_a u_j)(d_b u_k) + cubic terms,
//! ```
//!
//! where `a, b` range over the four space-time derivatives `(d_t, d_1,
//! d_2, d_3)` and each `H` is a constant 4x4 coefficient tensor.  A tensor
//! is *null at speed c* when its quadratic form vanishes identically on the
//! characteristic cone `{X0^2 = c^2 |X'|^2}`; algebraically this happens
//! exactly when the time-space part is antisymmetric and the symmetric
//! spatial part is `-c^2 H^{00} I`.  The structural checker encodes which
//! couplings must be null (or absent) for small data to evolve globally
//! despite the system as a whole violating the classical null condition.

use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::stencil::{derivative, laplacian};
use serde::{Deserialize, Serialize};

/// Labels for the four space-time derivative slots.
pub const DERIV_LABELS: [&str; 4] = ["t", "x1", "x2", "x3"];

/// A constant coefficient tensor `H^{ab}` for a quadratic coupling
/// `H^{ab} (d_a v)(d_b w)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QuadraticForm(pub [[f64; 4]; 4]);

impl QuadraticForm {
    pub fn zero() -> QuadraticForm {
        QuadraticForm([[0.0; 4]; 4])
    }

    /// The form `(d_t v)(d_t w)`.
    pub fn time_time() -> QuadraticForm {
        let mut h = QuadraticForm::zero();
        h.0[0][0] = 1.0;
        h
    }

    /// The speed-`c` null form `(d_t v)(d_t w) - c^2 grad v . grad w`.
    pub fn characteristic(c: f64) -> QuadraticForm {
        let mut h = QuadraticForm::zero();
        h.0[0][0] = 1.0;
        for j in 1..4 {
            h.0[j][j] = -c * c;
        }
        h
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|row| row.iter().all(|v| *v == 0.0))
    }

    pub fn max_abs(&self) -> f64 {
        self.0
            .iter()
            .flat_map(|row| row.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, a: f64) -> QuadraticForm {
        let mut out = *self;
        for row in &mut out.0 {
            for v in row.iter_mut() {
                *v *= a;
            }
        }
        out
    }

    pub fn add(&self, other: &QuadraticForm) -> QuadraticForm {
        let mut out = *self;
        for (r, row) in out.0.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v += other.0[r][c];
            }
        }
        out
    }

    /// Evaluates the quadratic form on two derivative 4-vectors.
    pub fn eval(&self, dv: [f64; 4], dw: [f64; 4]) -> f64 {
        let mut acc = 0.0;
        for a in 0..4 {
            if dv[a] == 0.0 {
                continue;
            }
            for b in 0..4 {
                acc += self.0[a][b] * dv[a] * dw[b];
            }
        }
        acc
    }
}

/// Failure witness for a null-condition test: a direction on the
/// characteristic cone where the form does not vanish.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NullWitness {
    /// Unit spatial direction.
    pub omega: [f64; 3],
    /// Sign of the time slot, `X = (sign * c, omega)`.
    pub sign: f64,
    /// Value of the quadratic form at the witness, exactly the residual.
    pub residual: f64,
}

/// Outcome of the exact null-condition test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NullCertificate {
    pub is_null: bool,
    pub speed: f64,
    pub witness: Option<NullWitness>,
}

fn form_on_cone(h: &QuadraticForm, c: f64, omega: [f64; 3], sign: f64) -> f64 {
    let x = [sign * c, omega[0], omega[1], omega[2]];
    h.eval(x, x)
}

/// Exact algebraic null test of `H` at speed `c`.
///
/// `H` is null at `c` iff `H^{0j} + H^{j0} = 0` for `j = 1..3` and the
/// symmetric spatial part equals `-c^2 H^{00} I`.  Comparisons use a
/// tolerance proportional to the largest entry so the test is invariant
/// under scaling of `H`.  On failure the certificate carries a cone
/// direction with a nonzero residual, drawn from a small exact candidate
/// set (axes, diagonal directions and the time-space mismatch vector).
pub fn is_null(h: &QuadraticForm, c: f64) -> NullCertificate {
    assert!(c > 0.0, "speed must be positive");
    let scale = h.max_abs().max(1e-300);
    let tol = 1e-12 * scale * (1.0 + c * c);

    let b = [h.0[0][1] + h.0[1][0], h.0[0][2] + h.0[2][0], h.0[0][3] + h.0[3][0]];
    // m = sym(spatial) + c^2 H^{00} I must vanish.
    let mut m = [[0.0; 3]; 3];
    for j in 0..3 {
        for k in 0..3 {
            m[j][k] = 0.5 * (h.0[j + 1][k + 1] + h.0[k + 1][j + 1]);
        }
        m[j][j] += c * c * h.0[0][0];
    }
    let b_ok = b.iter().all(|v| v.abs() <= tol);
    let m_ok = m.iter().all(|row| row.iter().all(|v| v.abs() <= tol));
    if b_ok && m_ok {
        return NullCertificate { is_null: true, speed: c, witness: None };
    }

    // Candidate directions guaranteed to expose any nonzero (b, m) pair.
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let mut candidates: Vec<[f64; 3]> = vec![
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
        [inv_sqrt2, inv_sqrt2, 0.0],
        [inv_sqrt2, -inv_sqrt2, 0.0],
        [0.0, inv_sqrt2, inv_sqrt2],
        [0.0, inv_sqrt2, -inv_sqrt2],
        [inv_sqrt2, 0.0, inv_sqrt2],
        [inv_sqrt2, 0.0, -inv_sqrt2],
    ];
    let bn = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
    if bn > tol {
        candidates.push([b[0] / bn, b[1] / bn, b[2] / bn]);
    }
    let mut best: Option<NullWitness> = None;
    for omega in candidates {
        for sign in [1.0, -1.0] {
            let residual = form_on_cone(h, c, omega, sign);
            if best.map_or(true, |w| residual.abs() > w.residual.abs()) {
                best = Some(NullWitness { omega, sign, residual });
            }
        }
    }
    NullCertificate { is_null: false, speed: c, witness: best }
}

/// Commutation coefficients `[Z_i, d_gamma] = d_{i,gamma}^{beta} d_beta`
/// for the seven vector fields; `gamma, beta` run over the four
/// derivative slots.
pub fn deriv_commutator_table(i: usize) -> [[f64; 4]; 4] {
    let mut d = [[0.0; 4]; 4];
    match i {
        // Translations commute with all derivative slots.
        1..=3 => {}
        // Rotations x_j d_k - x_k d_j: [Z, d_j] = -d_k, [Z, d_k] = +d_j.
        4..=6 => {
            let (j, k) = rotation_pair(i);
            d[j][k] = -1.0;
            d[k][j] = 1.0;
        }
        // Scaling t d_t + x . grad: [Z, d_gamma] = -d_gamma.
        7 => {
            for g in 0..4 {
                d[g][g] = -1.0;
            }
        }
        _ => panic!("vector field index {i} out of range 1..=7"),
    }
    d
}

/// The spatial index pair `(j, k)` (1-based slots within 1..3, returned as
/// derivative slots 1..=3) of rotation field `Z_i`, `i` in `4..=6`:
/// `Z_4 = O_{12}`, `Z_5 = O_{23}`, `Z_6 = O_{13}`.
pub fn rotation_pair(i: usize) -> (usize, usize) {
    match i {
        4 => (1, 2),
        5 => (2, 3),
        6 => (1, 3),
        _ => panic!("index {i} is not a rotation field"),
    }
}

/// Coefficient transport of a quadratic form under vector field `Z_i`:
/// the tensor `H~` with `Z(H(dv, dw)) = H(d Zv, dw) + H(dv, d Zw) +
/// H~(dv, dw)`, namely `H~^{ab} = H^{gb} d_{ig}^a + H^{ag} d_{ig}^b`.
pub fn z_transform_coeffs(h: &QuadraticForm, i: usize) -> QuadraticForm {
    let d = deriv_commutator_table(i);
    let mut out = QuadraticForm::zero();
    for a in 0..4 {
        for b in 0..4 {
            let mut acc = 0.0;
            for g in 0..4 {
                acc += h.0[g][b] * d[g][a] + h.0[a][g] * d[g][b];
            }
            out.0[a][b] = acc;
        }
    }
    out
}

/// One cubic monomial `coeff * prod_m (d_{alpha_m} u_{j_m})`; components
/// and derivative slots are zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubicTerm {
    pub coeff: f64,
    /// Three factors `(component, derivative slot)`.
    pub factors: [(usize, usize); 3],
}

/// Full specification of a three-component system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    /// Propagation speeds `(c_1, c_2, c_3) = (1, 1, c_0)`.
    pub speeds: [f64; 3],
    /// `quad[i][p]` is the tensor for equation `i` and ordered pair `p`
    /// indexing `(j, k)` with `j <= k` via [`pair_index`].
    pub quad: [[QuadraticForm; 6]; 3],
    /// Cubic monomials per equation.
    pub cubic: [Vec<CubicTerm>; 3],
}

/// Index of the ordered component pair `(j, k)`, `j <= k`, zero-based.
pub fn pair_index(j: usize, k: usize) -> usize {
    debug_assert!(j <= k && k < 3);
    match (j, k) {
        (0, 0) => 0,
        (0, 1) => 1,
        (0, 2) => 2,
        (1, 1) => 3,
        (1, 2) => 4,
        (2, 2) => 5,
        _ => unreachable!(),
    }
}

/// The component pair of a pair index.
pub fn pair_components(p: usize) -> (usize, usize) {
    [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)][p]
}

impl SystemSpec {
    /// A purely linear system at the given third speed.
    pub fn linear(c0: f64) -> SystemSpec {
        SystemSpec {
            speeds: [1.0, 1.0, c0],
            quad: [[QuadraticForm::zero(); 6]; 3],
            cubic: [Vec::new(), Vec::new(), Vec::new()],
        }
    }

    pub fn set_quad(&mut self, i: usize, j: usize, k: usize, h: QuadraticForm) {
        self.quad[i][pair_index(j, k)] = h;
    }

    pub fn quad_form(&self, i: usize, j: usize, k: usize) -> &QuadraticForm {
        &self.quad[i][pair_index(j, k)]
    }

    /// True when every quadratic tensor and cubic list is empty.
    pub fn is_linear(&self) -> bool {
        self.quad.iter().all(|row| row.iter().all(|h| h.is_zero()))
            && self.cubic.iter().all(|c| c.is_empty())
    }

    pub fn max_speed(&self) -> f64 {
        self.speeds.iter().fold(0.0_f64, |m, c| m.max(*c))
    }

    /// Basic well-formedness: positive speeds, equal first two speeds,
    /// finite coefficients.
    pub fn validate(&self) -> Result<()> {
        if !(self.speeds[0] == 1.0 && self.speeds[1] == 1.0) {
            return Err(Error::Config(format!(
                "speeds must be (1, 1, c0); got ({}, {}, {})",
                self.speeds[0], self.speeds[1], self.speeds[2]
            )));
        }
        if !(self.speeds[2] > 0.0) || !self.speeds[2].is_finite() {
            return Err(Error::Config(format!("third speed {} must be positive", self.speeds[2])));
        }
        for row in &self.quad {
            for h in row {
                if !h.0.iter().all(|r| r.iter().all(|v| v.is_finite())) {
                    return Err(Error::Config("non-finite quadratic coefficient".into()));
                }
            }
        }
        for terms in &self.cubic {
            for t in terms {
                if !t.coeff.is_finite() {
                    return Err(Error::Config("non-finite cubic coefficient".into()));
                }
                for (j, a) in t.factors {
                    if j >= 3 || a >= 4 {
                        return Err(Error::Config(format!(
                            "cubic factor indices ({j}, {a}) out of range"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// One structural check with its outcome.
#[derive(Debug, Clone, Serialize)]
pub struct AssumptionCheck {
    pub label: String,
    pub pass: bool,
    /// Cone witness when a required-null form fails the null test.
    pub witness: Option<NullWitness>,
}

/// Report of the structural assumption checker.
#[derive(Debug, Clone, Serialize)]
pub struct AssumptionReport {
    pub checks: Vec<AssumptionCheck>,
    pub pass: bool,
}

/// Checks the structural constraints under which small data evolve
/// globally:
///
/// * distinct third speed `c_0 != 1`;
/// * self-interaction of `u_1` in equation 1 null at speed 1;
/// * all couplings among `u_1, u_2` in equation 2 null at speed 1;
/// * self-interaction of `u_3` in equation 3 null at speed `c_0`;
/// * no `u_1 u_3` coupling in equations 2 and 3;
/// * `u_1`-only couplings in equation 3 null at speed 1.
///
/// Everything else, in particular all couplings involving `u_2 u_3` pairs
/// and every non-self coupling in equation 1, may be arbitrary.
pub fn check_assumptions(spec: &SystemSpec) -> AssumptionReport {
    let c0 = spec.speeds[2];
    let mut checks = Vec::new();

    checks.push(AssumptionCheck {
        label: format!("third speed c0 = {c0} differs from 1"),
        pass: (c0 - 1.0).abs() > 1e-12 && c0 > 0.0,
        witness: None,
    });

    let mut null_check = |label: String, i: usize, j: usize, k: usize, c: f64| {
        let cert = is_null(spec.quad_form(i, j, k), c);
        checks.push(AssumptionCheck { label, pass: cert.is_null, witness: cert.witness });
    };
    null_check("eq 1: u1*u1 coupling null at speed 1".into(), 0, 0, 0, 1.0);
    null_check("eq 2: u1*u1 coupling null at speed 1".into(), 1, 0, 0, 1.0);
    null_check("eq 2: u1*u2 coupling null at speed 1".into(), 1, 0, 1, 1.0);
    null_check("eq 2: u2*u2 coupling null at speed 1".into(), 1, 1, 1, 1.0);
    null_check(format!("eq 3: u3*u3 coupling null at speed {c0}"), 2, 2, 2, c0);
    null_check("eq 3: u1*u1 coupling null at speed 1".into(), 2, 0, 0, 1.0);
    null_check("eq 3: u1*u2 coupling null at speed 1".into(), 2, 0, 1, 1.0);

    let absent = |label: String, i: usize, j: usize, k: usize, checks: &mut Vec<AssumptionCheck>| {
        checks.push(AssumptionCheck {
            label,
            pass: spec.quad_form(i, j, k).is_zero(),
            witness: None,
        });
    };
    absent("eq 2: u1*u3 coupling absent".into(), 1, 0, 2, &mut checks);
    absent("eq 3: u1*u3 coupling absent".into(), 2, 0, 2, &mut checks);

    let pass = checks.iter().all(|c| c.pass);
    AssumptionReport { checks, pass }
}

/// First space-time derivatives of the three components: `table[j][a]`
/// holds `d_a u_j` with slot 0 the time derivative.
pub type DerivTable = [[ScalarField; 4]; 3];

/// Builds the first-derivative table from positions `u` and velocities
/// `v = d_t u`.
pub fn deriv_table(u: &[ScalarField; 3], v: &[ScalarField; 3]) -> DerivTable {
    let mk = |j: usize| {
        [v[j].clone(), derivative(&u[j], 0), derivative(&u[j], 1), derivative(&u[j], 2)]
    };
    [mk(0), mk(1), mk(2)]
}

impl SystemSpec {
    /// Bilinear quadratic part of equation `i`:
    /// `sum_{j <= k} H_{i,jk}^{ab} A[j][a] B[k][b]`.
    pub fn quadratic_eval(&self, i: usize, a: &DerivTable, b: &DerivTable) -> ScalarField {
        let mut out = ScalarField::zeros(a[0][0].grid());
        for p in 0..6 {
            let h = &self.quad[i][p];
            if h.is_zero() {
                continue;
            }
            let (j, k) = pair_components(p);
            for al in 0..4 {
                for be in 0..4 {
                    let c = h.0[al][be];
                    if c != 0.0 {
                        out.axpy_mul(c, &a[j][al], &b[k][be]);
                    }
                }
            }
        }
        out
    }

    /// Trilinear cubic part of equation `i` with independent tables per
    /// factor slot.
    pub fn cubic_eval(&self, i: usize, tables: [&DerivTable; 3]) -> ScalarField {
        let mut out = ScalarField::zeros(tables[0][0][0].grid());
        for term in &self.cubic[i] {
            let [(j1, a1), (j2, a2), (j3, a3)] = term.factors;
            out.axpy_mul3(
                term.coeff,
                &tables[0][j1][a1],
                &tables[1][j2][a2],
                &tables[2][j3][a3],
            );
        }
        out
    }

    /// Right-hand sides `F_i` from the first-derivative table.
    pub fn rhs(&self, d: &DerivTable) -> [ScalarField; 3] {
        [0, 1, 2].map(|i| {
            let mut f = self.quadratic_eval(i, d, d);
            f.axpy(1.0, &self.cubic_eval(i, [d, d, d]));
            f
        })
    }

    /// Time derivatives `d_t F_i` by the Leibniz rule, where `e = d_t d`
    /// entry by entry.
    pub fn rhs_dt(&self, d: &DerivTable, e: &DerivTable) -> [ScalarField; 3] {
        [0, 1, 2].map(|i| {
            let mut f = self.quadratic_eval(i, e, d);
            f.axpy(1.0, &self.quadratic_eval(i, d, e));
            f.axpy(1.0, &self.cubic_eval(i, [e, d, d]));
            f.axpy(1.0, &self.cubic_eval(i, [d, e, d]));
            f.axpy(1.0, &self.cubic_eval(i, [d, d, e]));
            f
        })
    }

    /// Second time derivatives `d_tt F_i`, where `q = d_t e`.
    pub fn rhs_dtt(&self, d: &DerivTable, e: &DerivTable, q: &DerivTable) -> [ScalarField; 3] {
        [0, 1, 2].map(|i| {
            let mut f = self.quadratic_eval(i, q, d);
            f.axpy(1.0, &self.quadratic_eval(i, d, q));
            f.axpy(2.0, &self.quadratic_eval(i, e, e));
            f.axpy(1.0, &self.cubic_eval(i, [q, d, d]));
            f.axpy(1.0, &self.cubic_eval(i, [d, q, d]));
            f.axpy(1.0, &self.cubic_eval(i, [d, d, q]));
            f.axpy(2.0, &self.cubic_eval(i, [e, e, d]));
            f.axpy(2.0, &self.cubic_eval(i, [e, d, e]));
            f.axpy(2.0, &self.cubic_eval(i, [d, e, e]));
            f
        })
    }

    /// Right-hand sides straight from state, for callers that do not need
    /// the table again.
    pub fn rhs_from_state(&self, u: &[ScalarField; 3], v: &[ScalarField; 3]) -> [ScalarField; 3] {
        self.rhs(&deriv_table(u, v))
    }

    /// Source derivative vectors `[F_i, d_t F_i, d_tt F_i]` for each
    /// component, assuming `(u, v)` is a solution state so that
    /// `d_t v_j = c_j^2 lap u_j + F_j`.
    pub fn source_vectors(
        &self,
        u: &[ScalarField; 3],
        v: &[ScalarField; 3],
    ) -> [Vec<ScalarField>; 3] {
        let d = deriv_table(u, v);
        let f = self.rhs(&d);
        // e[j] = d_t d[j]: slot 0 from the equation, spatial slots by
        // differentiating the velocity.
        let e: DerivTable = [0, 1, 2].map(|j| {
            let c2 = self.speeds[j] * self.speeds[j];
            let mut e0 = laplacian(&u[j]);
            e0.scale(c2);
            e0.axpy(1.0, &f[j]);
            [e0, derivative(&v[j], 0), derivative(&v[j], 1), derivative(&v[j], 2)]
        });
        let f_t = self.rhs_dt(&d, &e);
        let q: DerivTable = [0, 1, 2].map(|j| {
            let c2 = self.speeds[j] * self.speeds[j];
            let mut q0 = laplacian(&v[j]);
            q0.scale(c2);
            q0.axpy(1.0, &f_t[j]);
            [q0, derivative(&e[j][0], 0), derivative(&e[j][0], 1), derivative(&e[j][0], 2)]
        });
        let f_tt = self.rhs_dtt(&d, &e, &q);
        let [f0, f1, f2] = f;
        let [t0, t1, t2] = f_t;
        let [s0, s1, s2] = f_tt;
        [vec![f0, t0, s0], vec![f1, t1, s1], vec![f2, t2, s2]]
    }
}

/// Named example systems.
pub fn preset(name: &str) -> Result<SystemSpec> {
    let null1 = QuadraticForm::characteristic(1.0);
    let tt = QuadraticForm::time_time();
    // (d_t v)(d_t w) as cubic factor slots: slot 0 is d_t.
    let dt = |j: usize| (j, 0usize);
    match name {
        // Three speeds (1, 1, 1/2); violates the classical null condition
        // through the u2*u2 coupling in equation 1 and the u2*u3 couplings
        // in equations 2 and 3, yet satisfies every structural constraint.
        "paper_model" => {
            let mut s = SystemSpec::linear(0.5);
            s.set_quad(0, 1, 1, tt); // (d_t u2)^2
            s.set_quad(0, 0, 1, tt); // (d_t u1)(d_t u2)
            s.set_quad(0, 0, 0, null1); // speed-1 null self-coupling
            s.set_quad(1, 1, 2, tt); // (d_t u2)(d_t u3)
            s.set_quad(1, 1, 1, null1); // speed-1 null form in u2
            s.set_quad(2, 1, 2, tt); // (d_t u2)(d_t u3)
            s.cubic[2].push(CubicTerm { coeff: 1.0, factors: [dt(0), dt(1), dt(1)] });
            Ok(s)
        }
        // Quadratic interactions violating the null condition in every
        // equation while keeping the structural constraints.
        "pusateri_shatah" => {
            let mut s = SystemSpec::linear(0.5);
            s.set_quad(0, 1, 1, tt); // (d_t u2)^2
            s.cubic[0].push(CubicTerm { coeff: 1.0, factors: [dt(0), dt(2), dt(2)] });
            s.set_quad(1, 1, 2, tt); // (d_t u2)(d_t u3)
            s.set_quad(1, 1, 1, null1);
            s.set_quad(2, 1, 2, tt);
            s.cubic[2].push(CubicTerm { coeff: 1.0, factors: [dt(0), dt(1), dt(1)] });
            Ok(s)
        }
        // Scalar equation with the classical finite-time-blow-up
        // nonlinearity (d_t u1)^2.
        "john_blowup" => {
            let mut s = SystemSpec::linear(0.5);
            s.set_quad(0, 0, 0, tt);
            Ok(s)
        }
        // Scalar equation with the speed-1 null form; global for small
        // data.
        "null_scalar" => {
            let mut s = SystemSpec::linear(0.5);
            s.set_quad(0, 0, 0, null1);
            Ok(s)
        }
        "linear" => Ok(SystemSpec::linear(0.5)),
        other => Err(Error::Config(format!(
            "unknown preset '{other}'; expected one of paper_model, pusateri_shatah, john_blowup, null_scalar, linear"
        ))),
    }
}

pub const PRESET_NAMES: [&str; 5] =
    ["paper_model", "pusateri_shatah", "john_blowup", "null_scalar", "linear"];
