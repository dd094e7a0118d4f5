//! Numerical verification of the weighted inequalities behind the decay
//! machinery.
//!
//! Each named inequality relates a left-hand functional of a frozen-time
//! field jet to a right-hand combination of energies, cone-weighted second
//! derivatives, and vector-field families.  The laboratory evaluates both
//! sides on a deterministic corpus of test fields, reports the worst
//! constant, and repeats the measurement at half resolution: a genuine
//! inequality shows a finite worst ratio that settles as the grid refines,
//! while a structurally false bound shows a ratio that grows or a
//! right-hand side that vanishes where the left does not.
//!
//! The corpus mixes radial bumps at several widths and centers, angular
//! modulations, and outgoing pulse shells whose good derivatives nearly
//! vanish.  Members too wide for the grid, or with features finer than the
//! stencil can see, are skipped with a note rather than polluting the
//! ratios.

use crate::diagnostics::{
    self, deriv_magnitude, m2_norm, n_norm, radial_sup, radial_weighted, DiagnosticsConfig,
    NormSelection, RunOptions,
};
use crate::error::{Error, Result};
use crate::grid::{Grid3, ScalarField};
use crate::norms::{bracket, lp_norm, Lp};
use crate::solver::{restrict_to_coarse, InitialData, Profile, RadialBump};
use crate::sphere::{lr_inf_lomega, SphereRule};
use crate::stencil::gradient;
use crate::system::{preset, QuadraticForm, SystemSpec};
use crate::vector_fields::{indices_up_to, mul_direction, FieldJet, MultiIndex, SourceRule};

/// Names accepted by [`verify_inequality`].
pub const INEQUALITY_NAMES: [&str; 10] = [
    "ks", "trace", "ell6", "ellinfty", "j2", "j3", "interp", "tdecay", "nullpoint", "kss",
];

/// Half width of the box the default corpus is designed for.
pub const LAB_HALF_WIDTH: f64 = 4.8;

/// Frozen time the default corpus is usually evaluated at; late enough for
/// the pulse shell to sit well away from both the origin and the boundary.
pub const LAB_TIME: f64 = 3.0;

/// A verified report passes when the refinement drift stays below this.
pub const DRIFT_LIMIT: f64 = 0.25;

const STRUCTURE_RATIO_LIMIT: f64 = 1.0e3;

/// One corpus entry: a named field jet plus two length scales driving the
/// resolution skip rules.
#[derive(Debug, Clone)]
pub struct CorpusMember {
    pub name: String,
    pub jet: FieldJet,
    /// Smallest length the member's value varies on.
    pub feature_scale: f64,
    /// Length on which its third derivatives remain resolvable; much
    /// shorter than the feature scale for compactly supported profiles,
    /// whose derivatives steepen toward the support edge.
    pub derivative_scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CorpusKind {
    /// Built by [`default_corpus`]; the half-resolution twin is rebuilt
    /// analytically.
    Default,
    /// Supplied fields; the half-resolution twin is an interpolated
    /// restriction.
    Fixed,
}

/// A deterministic family of test jets living on one grid.
#[derive(Debug, Clone)]
pub struct Corpus {
    grid: Grid3,
    t: f64,
    pub members: Vec<CorpusMember>,
    kind: CorpusKind,
}

impl Corpus {
    /// Wraps caller-supplied members, for example solver snapshots.
    pub fn from_members(members: Vec<CorpusMember>) -> Result<Corpus> {
        let first = members
            .first()
            .ok_or_else(|| Error::Inequality("a corpus needs at least one member".to_string()))?;
        let grid = first.jet.value.grid();
        let t = first.jet.t;
        for m in &members {
            let g = m.jet.value.grid();
            if g.n() != grid.n() || (g.half_width() - grid.half_width()).abs() > 1e-12 {
                return Err(Error::Inequality(format!(
                    "corpus member {:?} lives on a different grid",
                    m.name
                )));
            }
        }
        Ok(Corpus { grid, t, members, kind: CorpusKind::Fixed })
    }

    pub fn grid(&self) -> Grid3 {
        self.grid
    }

    /// Time the member jets are frozen at.
    pub fn time(&self) -> f64 {
        self.t
    }

    /// The same corpus at half resolution on the same box.
    fn coarse(&self) -> Result<Corpus> {
        let n = self.grid.n();
        if n % 2 != 0 || n / 2 < 8 {
            return Err(Error::Inequality(format!(
                "the refinement pair needs an even grid size of at least 16, got n = {n}"
            )));
        }
        let cg = Grid3::new(n / 2, self.grid.half_width())?;
        match self.kind {
            CorpusKind::Default => default_corpus(cg, self.t),
            CorpusKind::Fixed => {
                let mut members = Vec::with_capacity(self.members.len());
                for m in &self.members {
                    let source = match &m.jet.source {
                        SourceRule::Zero => SourceRule::Zero,
                        SourceRule::Fields(v) => {
                            let mut out = Vec::with_capacity(v.len());
                            for f in v {
                                out.push(restrict_to_coarse(f, cg)?);
                            }
                            SourceRule::Fields(out)
                        }
                    };
                    members.push(CorpusMember {
                        name: m.name.clone(),
                        jet: FieldJet {
                            value: restrict_to_coarse(&m.jet.value, cg)?,
                            wt: restrict_to_coarse(&m.jet.wt, cg)?,
                            t: m.jet.t,
                            speed: m.jet.speed,
                            source,
                        },
                        feature_scale: m.feature_scale,
                        derivative_scale: m.derivative_scale,
                    });
                }
                Ok(Corpus { grid: cg, t: self.t, members, kind: CorpusKind::Fixed })
            }
        }
    }
}

fn compact_1d(s: f64, w: f64) -> f64 {
    let q = s / w;
    let d = 1.0 - q * q;
    if d <= 0.0 {
        0.0
    } else {
        (1.0 - 1.0 / d).exp()
    }
}

fn compact_1d_deriv(s: f64, w: f64) -> f64 {
    let q = s / w;
    let d = 1.0 - q * q;
    if d <= 0.0 {
        0.0
    } else {
        compact_1d(s, w) * (-2.0 * s) / (w * w * d * d)
    }
}

/// Quintic ramp vanishing below `r = 0.5` and flat above `r = 1.2`.
fn core_cut(r: f64) -> f64 {
    let u = ((r - 0.5) / 0.7).clamp(0.0, 1.0);
    u * u * u * (10.0 + u * (-15.0 + 6.0 * u))
}

/// Outgoing shell `chi(r) p(t - r)` with a compact radial profile of width
/// `w`, together with its time derivative.
fn pulse_fields(grid: Grid3, t: f64, w: f64) -> (ScalarField, ScalarField) {
    let value = ScalarField::from_fn(grid, |x, y, z| {
        let r = (x * x + y * y + z * z).sqrt();
        core_cut(r) * compact_1d(t - r, w)
    });
    let wt = ScalarField::from_fn(grid, |x, y, z| {
        let r = (x * x + y * y + z * z).sqrt();
        core_cut(r) * compact_1d_deriv(t - r, w)
    });
    (value, wt)
}

fn homogeneous_jet(t: f64, value: ScalarField, wt: ScalarField) -> FieldJet {
    FieldJet { value, wt, t, speed: 1.0, source: SourceRule::Zero }
}

fn gaussian(grid: Grid3, amp: f64, width: f64, center: [f64; 3]) -> ScalarField {
    RadialBump { amplitude: amp, width, center, profile: Profile::Gaussian }.sample(grid)
}

fn compact(grid: Grid3, amp: f64, width: f64, center: [f64; 3]) -> ScalarField {
    RadialBump { amplitude: amp, width, center, profile: Profile::CompactBump }.sample(grid)
}

/// The standard test family: at least ten members spanning widths 0.5, 1,
/// and 2, centered and offset bumps, two angular modulations, an outgoing
/// pulse with a sharpened twin, a composite, and a velocity-only bump.
pub fn default_corpus(grid: Grid3, t: f64) -> Result<Corpus> {
    if !t.is_finite() || t < 0.0 {
        return Err(Error::Inequality(format!(
            "the corpus time must be finite and nonnegative, got {t}"
        )));
    }
    let origin = [0.0; 3];
    let offset = [2.0, 0.0, 0.0];
    let mut members = Vec::new();
    let mut push = |name: &str, value: ScalarField, wt: ScalarField, feature: f64, deriv: f64| {
        members.push(CorpusMember {
            name: name.to_string(),
            jet: homogeneous_jet(t, value, wt),
            feature_scale: feature,
            derivative_scale: deriv,
        });
    };

    push(
        "bump(width 0.5)",
        gaussian(grid, 1.0, 0.5, origin),
        gaussian(grid, -0.3, 0.6, origin),
        0.5,
        0.5,
    );
    push(
        "bump(width 0.7)",
        gaussian(grid, 0.9, 0.7, origin),
        gaussian(grid, -0.25, 0.6, origin),
        0.6,
        0.6,
    );
    push(
        "bump(width 1)",
        compact(grid, 1.0, 1.0, origin),
        compact(grid, 0.25, 0.9, origin),
        1.0 / 2.5,
        0.9 / 6.0,
    );
    push(
        "bump(width 2)",
        compact(grid, 0.8, 2.0, origin),
        compact(grid, -0.2, 1.8, origin),
        2.0 / 2.5,
        1.8 / 6.0,
    );
    push(
        "bump(width 1, offset)",
        compact(grid, 0.9, 1.0, offset),
        compact(grid, 0.3, 0.8, offset),
        0.8 / 2.5,
        0.8 / 6.0,
    );
    push(
        "bump(width 0.5, offset)",
        compact(grid, 1.1, 0.5, offset),
        ScalarField::zeros(grid),
        0.5 / 2.5,
        0.5 / 6.0,
    );
    push(
        "modulated bump(axis 1)",
        compact(grid, 0.7, 1.5, origin).mul_coord(0),
        compact(grid, 0.2, 1.2, origin),
        1.5 / 2.5,
        1.2 / 6.0,
    );
    push(
        "modulated bump(axis 3)",
        compact(grid, 0.4, 2.0, origin).mul_coord(2),
        compact(grid, -0.15, 1.6, origin).mul_coord(2),
        1.6 / 2.5,
        1.6 / 6.0,
    );

    let (pv, pw) = pulse_fields(grid, t, 1.2);
    push("pulse", pv.clone(), pw.clone(), 1.2 / 2.5, 1.2 / 6.0);
    let (sv, sw) = pulse_fields(grid, t, 0.72);
    push("pulse(sharp)", sv, sw, 0.72 / 2.5, 0.72 / 6.0);

    let mut cv = compact(grid, 0.6, 1.5, origin);
    cv.axpy(0.5, &pv);
    let mut cw = compact(grid, 0.1, 1.3, origin);
    cw.axpy(0.5, &pw);
    push("composite", cv, cw, 1.2 / 2.5, 1.2 / 6.0);

    push(
        "velocity bump",
        ScalarField::zeros(grid),
        compact(grid, 1.0, 1.2, origin),
        1.2 / 2.5,
        1.2 / 6.0,
    );

    Ok(Corpus { grid, t, members, kind: CorpusKind::Default })
}

/// Knobs shared by every verification.
#[derive(Debug, Clone)]
pub struct LabParams {
    /// Ghost exponent entering the fractional interpolation step.
    pub eta: f64,
    /// Pointwise checks only look where `|dv|` exceeds this times its peak.
    pub mask_rel: f64,
    /// Quadratic form tested by the pointwise null bound.
    pub null_form: QuadraticForm,
    /// System evolved for the local-decay check.
    pub kss_preset: String,
    pub kss_horizon: f64,
    pub kss_cfl: f64,
}

impl Default for LabParams {
    fn default() -> LabParams {
        LabParams {
            eta: diagnostics::DEFAULT_ETA,
            mask_rel: 1e-8,
            null_form: QuadraticForm::characteristic(1.0),
            kss_preset: "paper_model".to_string(),
            kss_horizon: 2.0,
            kss_cfl: 0.5,
        }
    }
}

impl LabParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta < 0.25) {
            return Err(Error::Inequality(format!(
                "eta must lie in (0, 1/4), got {}",
                self.eta
            )));
        }
        if !(self.mask_rel > 0.0 && self.mask_rel <= 1e-2) {
            return Err(Error::Inequality(format!(
                "the mask threshold must lie in (0, 1e-2], got {}",
                self.mask_rel
            )));
        }
        if !(self.kss_horizon > 0.0) || !self.kss_horizon.is_finite() {
            return Err(Error::Inequality(format!(
                "the kss horizon must be positive and finite, got {}",
                self.kss_horizon
            )));
        }
        if !(self.kss_cfl > 0.0 && self.kss_cfl <= 0.9) {
            return Err(Error::Inequality(format!(
                "the kss cfl number must lie in (0, 0.9], got {}",
                self.kss_cfl
            )));
        }
        Ok(())
    }
}

/// Both sides of one inequality on one member.
#[derive(Debug, Clone, serde::Serialize)]
pub struct MemberRatio {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    /// The right side vanished while the left did not.
    pub violated: bool,
    /// Present when the member was skipped instead of evaluated.
    pub note: Option<String>,
}

/// The verdict for one inequality: per-member ratios at two resolutions,
/// the worst constant, and how much it moved under refinement.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RatioReport {
    pub inequality: String,
    pub fine_n: usize,
    pub coarse_n: usize,
    pub members: Vec<MemberRatio>,
    pub coarse_members: Vec<MemberRatio>,
    pub max_ratio: f64,
    /// Worst relative change of a member ratio between the two grids.
    pub drift: f64,
    pub violated_structure: bool,
    pub pass: bool,
}

fn guarded_ratio(lhs: f64, rhs: f64) -> (f64, bool) {
    if rhs > 0.0 {
        (lhs / rhs, false)
    } else if lhs <= 0.0 {
        (0.0, false)
    } else {
        (f64::INFINITY, true)
    }
}

/// The member scale the named check must resolve: families that
/// differentiate members a third time are gated on the derivative scale.
fn resolvable_scale(name: &str, m: &CorpusMember) -> f64 {
    match name {
        "ellinfty" | "j3" => m.derivative_scale,
        _ => m.feature_scale,
    }
}

fn skip_note(m: &CorpusMember, grid: Grid3, scale: f64) -> Option<String> {
    let mut support = 0.0_f64;
    for f in [&m.jet.value, &m.jet.wt] {
        let peak = f.max_abs();
        if peak > 0.0 {
            support = support.max(f.support_radius(1e-8 * peak));
        }
    }
    let safe = grid.max_safe_radius();
    if support > safe {
        return Some(format!(
            "skipped: support radius {support:.2} reaches past the dependable radius {safe:.2}"
        ));
    }
    let floor = 2.0 * grid.h();
    if scale < floor {
        return Some(format!(
            "skipped: resolvable scale {scale:.3} is finer than two grid spacings {floor:.3}"
        ));
    }
    None
}

fn box_l2(jet: &FieldJet) -> Result<f64> {
    match &jet.source {
        SourceRule::Zero => Ok(0.0),
        SourceRule::Fields(v) => v.first().map(|f| lp_norm(f, Lp::P2)).ok_or_else(|| {
            Error::Inequality("the jet carries an empty source list, so box v is unknown".to_string())
        }),
    }
}

/// `(sum_j ||d_j v||_2^2 + ||v_t||_2^2)^{1/2}` of a word jet.
fn deriv_l2(jet: &FieldJet) -> f64 {
    let grad = gradient(&jet.value);
    let mut acc = lp_norm(&jet.wt, Lp::P2).powi(2);
    for g in &grad {
        acc += lp_norm(g, Lp::P2).powi(2);
    }
    acc.sqrt()
}

/// Applies a scaling-free word, dropping sources along the way.
fn apply_word(jet: &FieldJet, word: &MultiIndex) -> FieldJet {
    let mut out = jet.clone();
    for i in (1..=6).rev() {
        for _ in 0..word.0[i - 1] {
            out = out.apply_dropping_source(i);
        }
    }
    out
}

fn spatial_words(max_order: usize) -> Vec<MultiIndex> {
    indices_up_to(max_order).into_iter().filter(|m| m.0[6] == 0).collect()
}

/// Good-derivative magnitude `(sum_k (c d_k v + (x_k/r) v_t)^2)^{1/2}`
/// from a shared gradient.
fn t_magnitude(jet: &FieldJet, grad: &[ScalarField; 3]) -> ScalarField {
    let grid = jet.value.grid();
    let mut out = ScalarField::zeros(grid);
    for k in 1..=3 {
        let mut tk = grad[k - 1].scaled(jet.speed);
        tk.axpy(1.0, &mul_direction(&jet.wt, k));
        let d = out.data_mut();
        let s = tk.data();
        for i in 0..s.len() {
            d[i] += s[i] * s[i];
        }
    }
    for v in out.data_mut() {
        *v = v.sqrt();
    }
    out
}

fn spatial_magnitude(grad: &[ScalarField; 3]) -> ScalarField {
    let mut out = ScalarField::zeros(grad[0].grid());
    {
        let d = out.data_mut();
        let gx = grad[0].data();
        let gy = grad[1].data();
        let gz = grad[2].data();
        for i in 0..d.len() {
            d[i] = (gx[i] * gx[i] + gy[i] * gy[i] + gz[i] * gz[i]).sqrt();
        }
    }
    out
}

struct PointwiseOutcome {
    lhs_sup: f64,
    rhs_sup: f64,
    max_ratio: f64,
}

/// Supremum of `lhs / (rhs + floor)` over the masked nodes, plus both sups.
fn masked_sup(
    lhs: &ScalarField,
    rhs: &ScalarField,
    mask: &ScalarField,
    threshold: f64,
    floor: f64,
) -> PointwiseOutcome {
    let mut out = PointwiseOutcome { lhs_sup: 0.0, rhs_sup: 0.0, max_ratio: 0.0 };
    let l = lhs.data();
    let r = rhs.data();
    let m = mask.data();
    for i in 0..l.len() {
        if m[i] > threshold {
            out.lhs_sup = out.lhs_sup.max(l[i]);
            out.rhs_sup = out.rhs_sup.max(r[i]);
            let denom = r[i] + floor;
            if denom > 0.0 {
                out.max_ratio = out.max_ratio.max(l[i] / denom);
            } else if l[i] > 0.0 {
                out.max_ratio = f64::INFINITY;
            }
        }
    }
    out
}

fn tdecay_member(m: &CorpusMember, params: &LabParams) -> MemberRatio {
    let jet = &m.jet;
    let grid = jet.value.grid();
    let c = jet.speed;
    let t = jet.t;
    let grad = gradient(&jet.value);
    let mag = deriv_magnitude(&jet.wt, &grad);
    let lhs = t_magnitude(jet, &grad);

    let mut z_abs = ScalarField::zeros(grid);
    for i in 1..=7 {
        let z = jet.applied_value(i);
        let d = z_abs.data_mut();
        let s = z.data();
        for k in 0..s.len() {
            d[k] += s[k].abs();
        }
    }
    let gmag = spatial_magnitude(&grad);
    let cone = ScalarField::from_fn(grid, |x, y, z| {
        bracket(c * t - (x * x + y * y + z * z).sqrt())
    });
    let inv_bt = 1.0 / bracket(t);
    let mut rhs = ScalarField::zeros(grid);
    {
        let d = rhs.data_mut();
        let w = jet.wt.data();
        let za = z_abs.data();
        let co = cone.data();
        let gm = gmag.data();
        for k in 0..d.len() {
            d[k] = inv_bt * (w[k].abs() + za[k] + co[k] * gm[k]);
        }
    }
    let out = masked_sup(&lhs, &rhs, &mag, params.mask_rel * mag.max_abs(), 0.0);
    let violated = out.rhs_sup == 0.0 && out.lhs_sup > 0.0;
    MemberRatio {
        name: m.name.clone(),
        lhs: out.lhs_sup,
        rhs: out.rhs_sup,
        ratio: out.max_ratio,
        violated,
        note: None,
    }
}

fn nullpoint_member(m: &CorpusMember, params: &LabParams) -> MemberRatio {
    let jet = &m.jet;
    let grad = gradient(&jet.value);
    let mag = deriv_magnitude(&jet.wt, &grad);
    let tmag = t_magnitude(jet, &grad);
    let grid = jet.value.grid();
    let h = &params.null_form;

    let mut lhs = ScalarField::zeros(grid);
    let mut rhs = ScalarField::zeros(grid);
    {
        let ld = lhs.data_mut();
        let rd = rhs.data_mut();
        let w = jet.wt.data();
        let gx = grad[0].data();
        let gy = grad[1].data();
        let gz = grad[2].data();
        let tm = tmag.data();
        let mg = mag.data();
        for k in 0..ld.len() {
            let dv = [w[k], gx[k], gy[k], gz[k]];
            ld[k] = h.eval(dv, dv).abs();
            rd[k] = 2.0 * tm[k] * mg[k];
        }
    }
    let peak = mag.max_abs();
    let out = masked_sup(&lhs, &rhs, &mag, params.mask_rel * peak, 1e-14 * peak * peak);
    let violated = out.max_ratio > STRUCTURE_RATIO_LIMIT
        || (out.rhs_sup == 0.0 && out.lhs_sup > 0.0);
    MemberRatio {
        name: m.name.clone(),
        lhs: out.lhs_sup,
        rhs: out.rhs_sup,
        ratio: out.max_ratio,
        violated,
        note: None,
    }
}

fn eval_member(
    name: &str,
    m: &CorpusMember,
    params: &LabParams,
    rule: &SphereRule,
) -> Result<Vec<MemberRatio>> {
    let jet = &m.jet;
    let c = jet.speed;
    let t = jet.t;
    let single = |lhs: f64, rhs: f64| {
        let (ratio, violated) = guarded_ratio(lhs, rhs);
        vec![MemberRatio { name: m.name.clone(), lhs, rhs, ratio, violated, note: None }]
    };
    match name {
        "ks" => {
            let lhs = m2_norm(jet);
            let rhs = n_norm(jet, 2)? + t * box_l2(jet)?;
            Ok(single(lhs, rhs))
        }
        "trace" => {
            let grad = gradient(&jet.value);
            let mut rhs = 0.0;
            for g in &grad {
                rhs += lp_norm(g, Lp::P2).powi(2);
            }
            let lhs = lr_inf_lomega(&jet.value, 4.0, rule, |r| r.sqrt());
            Ok(single(lhs, rhs.sqrt()))
        }
        "ell6" => {
            let grad = gradient(&jet.value);
            let mag = deriv_magnitude(&jet.wt, &grad);
            let lhs = radial_weighted(&mag, Lp::P6, &|r| bracket(c * t - r));
            let rhs = n_norm(jet, 1)? + m2_norm(jet);
            Ok(single(lhs, rhs))
        }
        "ellinfty" => {
            let grad = gradient(&jet.value);
            let mag = deriv_magnitude(&jet.wt, &grad);
            let lhs = radial_sup(&mag, |r| bracket(c * t - r));
            let mut rhs = n_norm(jet, 1)? + m2_norm(jet);
            for i in 1..=3 {
                let sub = jet.apply_dropping_source(i);
                rhs += n_norm(&sub, 1)? + m2_norm(&sub);
            }
            Ok(single(lhs, rhs))
        }
        "j2" => {
            let grad = gradient(&jet.value);
            let mag = deriv_magnitude(&jet.wt, &grad);
            let lhs = lr_inf_lomega(&mag, 4.0, rule, |r| r);
            let mut rhs = 0.0;
            for word in spatial_words(1) {
                rhs += deriv_l2(&apply_word(jet, &word));
            }
            Ok(single(lhs, rhs))
        }
        "j3" => {
            let grad = gradient(&jet.value);
            let mag = deriv_magnitude(&jet.wt, &grad);
            let lhs = radial_sup(&mag, bracket);
            let mut rhs = 0.0;
            for word in spatial_words(2) {
                rhs += deriv_l2(&apply_word(jet, &word));
            }
            Ok(single(lhs, rhs))
        }
        "interp" => {
            let grad = gradient(&jet.value);
            let mag = deriv_magnitude(&jet.wt, &grad);
            let mut rhs = m2_norm(jet);
            rhs += n_norm(jet, 1)?;
            for i in 4..=6 {
                rhs += n_norm(&jet.apply_dropping_source(i), 1)?;
            }
            let thetas =
                [("theta=0", 0.0), ("theta=1/2-eta", 0.5 - params.eta), ("theta=1/2", 0.5)];
            let mut out = Vec::with_capacity(3);
            for (label, theta) in thetas {
                let lhs = lr_inf_lomega(&mag, 4.0, rule, |r| {
                    r.powf(0.5 + theta) * bracket(c * t - r).powf(1.0 - theta)
                });
                let (ratio, violated) = guarded_ratio(lhs, rhs);
                out.push(MemberRatio {
                    name: format!("{} [{label}]", m.name),
                    lhs,
                    rhs,
                    ratio,
                    violated,
                    note: None,
                });
            }
            Ok(out)
        }
        "tdecay" => Ok(vec![tdecay_member(m, params)]),
        "nullpoint" => Ok(vec![nullpoint_member(m, params)]),
        other => Err(Error::Inequality(format!("inequality {other:?} has no member evaluator"))),
    }
}

fn eval_corpus(
    name: &str,
    corpus: &Corpus,
    params: &LabParams,
    rule: &SphereRule,
) -> Result<Vec<MemberRatio>> {
    let mut out = Vec::new();
    for m in &corpus.members {
        if let Some(note) = skip_note(m, corpus.grid, resolvable_scale(name, m)) {
            out.push(MemberRatio {
                name: m.name.clone(),
                lhs: f64::NAN,
                rhs: f64::NAN,
                ratio: f64::NAN,
                violated: false,
                note: Some(note),
            });
        } else {
            out.extend(eval_member(name, m, params, rule)?);
        }
    }
    Ok(out)
}

/// Runs the configured system and reports the local-decay ratio per
/// component plus the aggregate, all at one horizon.
fn kss_members(grid: Grid3, params: &LabParams) -> Result<Vec<MemberRatio>> {
    let spec: SystemSpec = preset(&params.kss_preset)?;
    let bump = |amp: f64| RadialBump {
        amplitude: amp,
        width: 1.2,
        center: [0.0; 3],
        profile: Profile::CompactBump,
    };
    let data = InitialData::velocity_bumps([Some(bump(0.3)), Some(bump(0.3)), Some(bump(0.3))]);
    let opts = RunOptions {
        cfl: params.kss_cfl,
        horizon: params.kss_horizon,
        cadence: params.kss_horizon,
        diagnostics: DiagnosticsConfig {
            selection: NormSelection {
                n_norms: false,
                m_norms: false,
                ghost_l: false,
                bracket: false,
            },
            ..DiagnosticsConfig::default()
        },
        ghost: None,
        kss: true,
    };
    let report = diagnostics::run_with_diagnostics(&spec, &data, grid, &opts)?;
    if let Some(tb) = report.blow_up {
        return Err(Error::Inequality(format!(
            "the local-decay verification run blew up at t = {tb:.3}"
        )));
    }
    let acc = report
        .kss
        .ok_or_else(|| Error::Inequality("the run did not accumulate a history".to_string()))?;
    let horizon = params.kss_horizon;
    let mut out = Vec::new();
    let mut lhs_sum = 0.0;
    let mut rhs_sum = 0.0;
    for i in 0..3 {
        let (lhs, rhs) = acc.component_parts(i, horizon)?;
        lhs_sum += lhs;
        rhs_sum += rhs;
        let (ratio, violated) = guarded_ratio(lhs, rhs);
        out.push(MemberRatio {
            name: format!("component {} over [0,{horizon}]", i + 1),
            lhs,
            rhs,
            ratio,
            violated,
            note: None,
        });
    }
    let (ratio, violated) = guarded_ratio(lhs_sum, rhs_sum);
    out.push(MemberRatio {
        name: format!("all components over [0,{horizon}]"),
        lhs: lhs_sum,
        rhs: rhs_sum,
        ratio,
        violated,
        note: None,
    });
    Ok(out)
}

fn paired_drift(fine: &[MemberRatio], coarse: &[MemberRatio]) -> f64 {
    let mut worst: Option<f64> = None;
    for f in fine {
        if f.note.is_some() || !f.ratio.is_finite() {
            continue;
        }
        let twin = coarse
            .iter()
            .find(|cm| cm.note.is_none() && cm.ratio.is_finite() && cm.name == f.name);
        if let Some(cm) = twin {
            let d = if f.ratio == 0.0 && cm.ratio == 0.0 {
                0.0
            } else {
                (f.ratio - cm.ratio).abs() / f.ratio.abs().max(1e-300)
            };
            worst = Some(worst.map_or(d, |w: f64| w.max(d)));
        }
    }
    worst.unwrap_or(f64::INFINITY)
}

/// Evaluates one named inequality over the corpus at full and half
/// resolution and applies the pass rule: finite worst ratio, no structural
/// violation, and drift below [`DRIFT_LIMIT`].
pub fn verify_inequality(name: &str, corpus: &Corpus, params: &LabParams) -> Result<RatioReport> {
    if !INEQUALITY_NAMES.contains(&name) {
        return Err(Error::Inequality(format!(
            "unknown inequality {name:?}; known names: {}",
            INEQUALITY_NAMES.join(", ")
        )));
    }
    params.validate()?;
    let n = corpus.grid.n();
    if n % 2 != 0 || n / 2 < 8 {
        return Err(Error::Inequality(format!(
            "the refinement pair needs an even grid size of at least 16, got n = {n}"
        )));
    }
    let rule = SphereRule::default_rule();
    let (fine, coarse, coarse_n) = if name == "kss" {
        let cg = Grid3::new(n / 2, corpus.grid.half_width())?;
        (kss_members(corpus.grid, params)?, kss_members(cg, params)?, cg.n())
    } else {
        let cc = corpus.coarse()?;
        (
            eval_corpus(name, corpus, params, &rule)?,
            eval_corpus(name, &cc, params, &rule)?,
            cc.grid.n(),
        )
    };
    if fine.iter().all(|m| m.note.is_some()) {
        return Err(Error::Inequality(format!(
            "every corpus member was skipped on the n = {n} grid; refine the grid or widen the members"
        )));
    }
    let mut max_ratio = 0.0_f64;
    let mut violated = false;
    for m in &fine {
        if m.note.is_none() {
            max_ratio = max_ratio.max(m.ratio);
            violated |= m.violated;
        }
    }
    let drift = paired_drift(&fine, &coarse);
    let pass = max_ratio.is_finite() && !violated && drift < DRIFT_LIMIT;
    Ok(RatioReport {
        inequality: name.to_string(),
        fine_n: n,
        coarse_n,
        members: fine,
        coarse_members: coarse,
        max_ratio,
        drift,
        violated_structure: violated,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::n_norm;
    use crate::solver::{cfl_dt, evolve, steps_to, SystemState};
    use crate::stencil::derivative;
    use crate::system::preset;

    fn lab_grid(n: usize) -> Grid3 {
        Grid3::new(n, LAB_HALF_WIDTH).unwrap()
    }

    #[test]
    fn corpus_members_are_deterministic_and_cover_the_required_shapes() {
        let grid = lab_grid(96);
        let corpus = default_corpus(grid, LAB_TIME).unwrap();
        assert!(corpus.members.len() >= 10, "only {} members", corpus.members.len());
        for required in [
            "bump(width 0.5)",
            "bump(width 1)",
            "bump(width 2)",
            "bump(width 1, offset)",
            "modulated bump(axis 1)",
            "modulated bump(axis 3)",
            "pulse",
            "pulse(sharp)",
            "velocity bump",
        ] {
            assert!(
                corpus.members.iter().any(|m| m.name == required),
                "missing member {required}"
            );
        }
        for m in &corpus.members {
            let note = skip_note(m, grid, m.feature_scale);
            println!("{:28} note {:?}", m.name, note);
            assert!(note.is_none(), "member {} skipped on the design grid", m.name);
        }

        let twin = default_corpus(grid, LAB_TIME).unwrap();
        for (a, b) in corpus.members.iter().zip(&twin.members) {
            assert_eq!(a.jet.value.data(), b.jet.value.data(), "{} value differs", a.name);
            assert_eq!(a.jet.wt.data(), b.jet.wt.data(), "{} wt differs", a.name);
        }

        let pulse = corpus.members.iter().find(|m| m.name == "pulse").unwrap();
        let grad = gradient(&pulse.jet.value);
        let good = lp_norm(&t_magnitude(&pulse.jet, &grad), Lp::P2);
        let full = lp_norm(&deriv_magnitude(&pulse.jet.wt, &grad), Lp::P2);
        println!("pulse good/full derivative ratio = {:.3e}", good / full);
        assert!(good / full < 0.1, "pulse is not outgoing enough: {}", good / full);

        let bump = corpus.members.iter().find(|m| m.name == "bump(width 1)").unwrap();
        let n1 = n_norm(&bump.jet, 1).unwrap();
        println!("bump(width 1) N_1 = {n1:.6}");
        assert!(n1 > 0.0);

        let vb = corpus.members.iter().find(|m| m.name == "velocity bump").unwrap();
        assert_eq!(vb.jet.value.max_abs(), 0.0);
        assert!(vb.jet.wt.max_abs() > 0.0);
    }

    #[test]
    fn reports_are_scale_invariant_under_member_scaling() {
        let grid = Grid3::new(32, LAB_HALF_WIDTH).unwrap();
        let member = CorpusMember {
            name: "probe".to_string(),
            jet: homogeneous_jet(
                LAB_TIME,
                gaussian(grid, 1.0, 0.65, [0.0; 3]),
                gaussian(grid, -0.4, 0.55, [0.0; 3]),
            ),
            feature_scale: 0.65,
            derivative_scale: 0.65,
        };
        let mut scaled = member.clone();
        scaled.jet.value.scale(4.0);
        scaled.jet.wt.scale(4.0);
        let base = Corpus::from_members(vec![member]).unwrap();
        let big = Corpus::from_members(vec![scaled]).unwrap();
        let params = LabParams::default();
        for name in ["ks", "trace", "ell6", "ellinfty", "j2", "j3", "interp", "tdecay", "nullpoint"]
        {
            let a = verify_inequality(name, &base, &params).unwrap();
            let b = verify_inequality(name, &big, &params).unwrap();
            for (ma, mb) in a.members.iter().zip(&b.members) {
                let rel = (ma.ratio - mb.ratio).abs() / ma.ratio.abs().max(1e-300);
                println!("{name:10} {:24} ratio {:.6e} scaled {:.6e}", ma.name, ma.ratio, mb.ratio);
                assert!(rel < 1e-11, "{name} ratio moved under scaling: {rel:.3e}");
            }
        }
    }

    #[test]
    fn norm_level_inequalities_pass_on_the_default_corpus() {
        let corpus = default_corpus(lab_grid(64), LAB_TIME).unwrap();
        let params = LabParams::default();
        for name in ["ks", "trace", "ell6", "j2"] {
            let report = verify_inequality(name, &corpus, &params).unwrap();
            println!(
                "{name:8} max ratio {:10.4} drift {:6.3} pass {}",
                report.max_ratio, report.drift, report.pass
            );
            for m in &report.members {
                println!("    {:36} lhs {:10.4e} rhs {:10.4e} ratio {:8.4} {:?}",
                    m.name, m.lhs, m.rhs, m.ratio, m.note);
            }
            assert!(report.max_ratio.is_finite());
            assert!(!report.violated_structure);
            assert!(report.pass, "{name} failed: drift {:.3}", report.drift);
        }
        let trace = verify_inequality("trace", &corpus, &params).unwrap();
        let vb = trace.members.iter().find(|m| m.name == "velocity bump").unwrap();
        assert_eq!(vb.ratio, 0.0);
        assert!(!vb.violated, "zero rhs with zero lhs must not flag");
    }

    #[test]
    fn derivative_family_inequalities_pass_on_the_default_corpus() {
        let corpus = default_corpus(lab_grid(96), LAB_TIME).unwrap();
        let params = LabParams::default();
        for name in ["ellinfty", "j3", "interp"] {
            let report = verify_inequality(name, &corpus, &params).unwrap();
            println!(
                "{name:8} max ratio {:10.4} drift {:6.3} pass {}",
                report.max_ratio, report.drift, report.pass
            );
            for (m, c) in report.members.iter().zip(&report.coarse_members) {
                println!(
                    "    {:36} ratio {:10.4e} coarse {:10.4e} {:?}",
                    m.name, m.ratio, c.ratio, m.note
                );
            }
            assert!(report.pass, "{name} failed: drift {:.3}", report.drift);
        }
    }

    #[test]
    fn tdecay_is_a_discrete_identity_with_an_order_one_constant() {
        let grid = lab_grid(64);
        let corpus = default_corpus(grid, LAB_TIME).unwrap();
        let pulse = corpus.members.iter().find(|m| m.name == "pulse").unwrap();
        let jet = &pulse.jet;
        let t = jet.t;

        let mut combo = mul_direction(&jet.applied_value(7), 1);
        combo.axpy(-1.0, &mul_direction(&jet.applied_value(4), 2));
        combo.axpy(-1.0, &mul_direction(&jet.applied_value(6), 3));
        let cone = ScalarField::from_fn(grid, |x, y, z| {
            jet.speed * t - (x * x + y * y + z * z).sqrt()
        });
        let mut d1 = derivative(&jet.value, 0);
        d1 = d1.mul(&cone);
        combo.axpy(1.0, &d1);
        combo.scale(1.0 / t);
        let direct = jet.good_derivative(1);
        let resid = combo.sub(&direct).max_abs();
        let scale = direct.max_abs().max(jet.wt.max_abs());
        println!("t-derivative identity residual {:.3e} against scale {:.3e}", resid, scale);
        assert!(resid < 1e-12 * scale.max(1e-300), "identity residual too large");

        let report = verify_inequality("tdecay", &corpus, &LabParams::default()).unwrap();
        println!("tdecay max ratio {:.4} drift {:.3}", report.max_ratio, report.drift);
        assert!(report.pass);
        assert!(report.max_ratio < 1.2, "constant should be near one: {}", report.max_ratio);
    }

    #[test]
    fn nullpoint_separates_null_from_nonnull_forms() {
        let corpus = default_corpus(lab_grid(96), LAB_TIME).unwrap();
        let null_params = LabParams::default();
        let null_report = verify_inequality("nullpoint", &corpus, &null_params).unwrap();
        println!(
            "null form: max ratio {:.4} drift {:.3} violated {}",
            null_report.max_ratio, null_report.drift, null_report.violated_structure
        );
        assert!(null_report.pass);
        assert!(!null_report.violated_structure);

        let mut bad_params = LabParams::default();
        bad_params.null_form = QuadraticForm::time_time();
        let bad_report = verify_inequality("nullpoint", &corpus, &bad_params).unwrap();
        println!(
            "d_t^2 form: max ratio {:.4e} violated {}",
            bad_report.max_ratio, bad_report.violated_structure
        );
        assert!(bad_report.violated_structure, "a non-null form must be flagged");
        assert!(!bad_report.pass);

        let find = |members: &[MemberRatio], name: &str| {
            members.iter().find(|m| m.name == name).map(|m| m.ratio).unwrap()
        };
        let fine_bad = find(&bad_report.members, "pulse");
        let sharp_bad = find(&bad_report.members, "pulse(sharp)");
        let coarse_bad = find(&bad_report.coarse_members, "pulse");
        println!(
            "non-null pulse ratio {fine_bad:.4e} (coarse {coarse_bad:.4e}), sharp {sharp_bad:.4e}"
        );
        assert!(fine_bad > STRUCTURE_RATIO_LIMIT && sharp_bad > STRUCTURE_RATIO_LIMIT);
        assert!(
            fine_bad > 2.0 * coarse_bad,
            "a genuine violation must grow under refinement: {coarse_bad:.3e} -> {fine_bad:.3e}"
        );
        let base_null = find(&null_report.members, "pulse");
        let sharp_null = find(&null_report.members, "pulse(sharp)");
        println!("null pulse ratio {base_null:.4}, sharpened {sharp_null:.4}");
        assert!(base_null < 5.0 && sharp_null < 5.0, "null ratios must stay order one");
    }

    #[test]
    fn local_decay_verification_is_finite_and_stable() {
        let corpus = default_corpus(lab_grid(48), LAB_TIME).unwrap();
        let report = verify_inequality("kss", &corpus, &LabParams::default()).unwrap();
        for m in &report.members {
            println!("{:28} lhs {:.4e} rhs {:.4e} ratio {:.4}", m.name, m.lhs, m.rhs, m.ratio);
        }
        println!("kss max ratio {:.4} drift {:.3}", report.max_ratio, report.drift);
        assert_eq!(report.members.len(), 4);
        assert!(report.max_ratio.is_finite());
        assert!(report.max_ratio > 0.0);
        assert!(report.pass, "kss drifted {:.3}", report.drift);
    }

    #[test]
    fn ks_holds_on_evolved_linear_snapshots() {
        let grid = lab_grid(64);
        let spec = preset("linear").unwrap();
        let bump = RadialBump {
            amplitude: 0.4,
            width: 1.6,
            center: [0.0; 3],
            profile: Profile::CompactBump,
        };
        let data = InitialData::velocity_bumps([Some(bump.clone()), Some(bump), None]);
        let mut state = SystemState::from_data(grid, &data).unwrap();
        let dt_max = cfl_dt(0.5, grid.h(), spec.max_speed()).unwrap();
        let (_, _) = steps_to(0.0, 0.75, dt_max);
        let outcome = evolve(&spec, &mut state, 0.75, 0.5, |_, _| Ok(())).unwrap();
        assert!(outcome.blow_up.is_none());

        let members = (0..2)
            .map(|i| CorpusMember {
                name: format!("linear snapshot u{}", i + 1),
                jet: diagnostics::component_jet(&spec, &state, i),
                feature_scale: 1.6 / 2.5,
                derivative_scale: 1.6 / 6.0,
            })
            .collect();
        let corpus = Corpus::from_members(members).unwrap();
        let report = verify_inequality("ks", &corpus, &LabParams::default()).unwrap();
        for m in &report.members {
            println!("{:24} ratio {:.4}", m.name, m.ratio);
        }
        println!("snapshot ks max ratio {:.4} drift {:.3}", report.max_ratio, report.drift);
        assert!(report.pass, "drift {:.3}", report.drift);
    }

    #[test]
    fn errors_cover_unknown_names_bad_params_and_exhausted_corpora() {
        let corpus = default_corpus(lab_grid(48), LAB_TIME).unwrap();
        let err = verify_inequality("bogus", &corpus, &LabParams::default()).unwrap_err();
        assert!(format!("{err}").contains("unknown inequality"), "{err}");

        let mut bad = LabParams::default();
        bad.eta = 0.3;
        let err = verify_inequality("ks", &corpus, &bad).unwrap_err();
        assert!(format!("{err}").contains("eta"), "{err}");

        let tiny = default_corpus(Grid3::new(16, LAB_HALF_WIDTH).unwrap(), LAB_TIME).unwrap();
        let err = verify_inequality("trace", &tiny, &LabParams::default()).unwrap_err();
        assert!(format!("{err}").contains("skipped"), "{err}");

        assert!(Corpus::from_members(Vec::new()).is_err());

        assert_eq!(guarded_ratio(0.0, 0.0), (0.0, false));
        let (r, v) = guarded_ratio(1.0, 0.0);
        assert!(r.is_infinite() && v);
        assert_eq!(guarded_ratio(1.0, 2.0), (0.5, false));
    }
}
