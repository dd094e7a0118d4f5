//! Norm catalog over solver states and the instrumented run loop.
//!
//! The quantities here come in three tiers.  Pointwise ones (`energy`,
//! `m2_norm`) read a single jet.  Vector-field sums (`n_norm`, `m_norm`,
//! `ghost_integral`, `l_norm`, the sup-norm bracket) walk the `Z^a` tree
//! depth first, holding one jet per tree level, so a full order-three
//! sweep stays affordable in memory even on large grids.  Run-scoped
//! ones (`GhostAccumulator`, `KssAccumulator`) need per-step history and
//! are fed by [`run_with_diagnostics`].
//!
//! Weights that depend only on the radius are evaluated on the fly; the
//! few fractional powers that would otherwise dominate the walk
//! (`r^{-5/4}`, `r^{-1/4}`, the ghost weight) are tabulated once per
//! record into scratch fields.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::grid::{sum_chunked, Grid3, ScalarField};
use crate::norms::{bracket, lp_norm, weighted_lp_norm, Lp, Region};
use crate::solver::{cfl_dt, evolve, steps_to, InitialData, SystemState};
use crate::sphere::{lr_inf_lomega, SphereRule};
use crate::stencil::{derivative, gradient, laplacian, WindowWeights};
use crate::system::SystemSpec;
use crate::vector_fields::{mul_direction, FieldJet, MultiIndex, SourceRule, FIELD_COUNT};

/// Default time-weight exponent for the first component's script norms.
pub const DEFAULT_DELTA: f64 = 1.0 / 48.0;

/// Default ghost-weight exponent.
pub const DEFAULT_ETA: f64 = 0.125;

fn radius(p: [f64; 3]) -> f64 {
    (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
}

pub(crate) fn radial_weighted(f: &ScalarField, p: Lp, w: &dyn Fn(f64) -> f64) -> f64 {
    let wrapped = |q: [f64; 3]| w(radius(q));
    let wref: &dyn Fn([f64; 3]) -> f64 = &wrapped;
    weighted_lp_norm(f, p, Region::All, Some(wref)).value
}

pub(crate) fn radial_l2(f: &ScalarField, w: impl Fn(f64) -> f64) -> f64 {
    radial_weighted(f, Lp::P2, &w)
}

pub(crate) fn radial_sup(f: &ScalarField, w: impl Fn(f64) -> f64) -> f64 {
    radial_weighted(f, Lp::Inf, &w)
}

/// `h^3 sum (w f)^2` for a tabulated weight field.
fn weighted_l2_sq(f: &ScalarField, w: &ScalarField) -> f64 {
    let s = sum_chunked(f.data().iter().zip(w.data()).map(|(a, b)| {
        let v = a * b;
        v * v
    }));
    s * f.grid().cell_volume()
}

/// Pointwise `sqrt(w_t^2 + |grad w|^2)`.
pub(crate) fn deriv_magnitude(wt: &ScalarField, grad: &[ScalarField; 3]) -> ScalarField {
    let mut out = ScalarField::zeros(wt.grid());
    {
        let d = out.data_mut();
        let w = wt.data();
        let gx = grad[0].data();
        let gy = grad[1].data();
        let gz = grad[2].data();
        for k in 0..w.len() {
            d[k] = (w[k] * w[k] + gx[k] * gx[k] + gy[k] * gy[k] + gz[k] * gz[k]).sqrt();
        }
    }
    out
}

/// Tabulated interior weights `r^{-5/4}` and `r^{-1/4}`; the grid is
/// cell-centered, so no node sits at the origin.
struct InteriorWeights {
    r_val: ScalarField,
    r_deriv: ScalarField,
}

impl InteriorWeights {
    fn build(grid: Grid3) -> InteriorWeights {
        InteriorWeights {
            r_val: ScalarField::from_fn(grid, |x, y, z| radius([x, y, z]).powf(-1.25)),
            r_deriv: ScalarField::from_fn(grid, |x, y, z| radius([x, y, z]).powf(-0.25)),
        }
    }
}

/// `sum_j || <ct-r>^{-(1+2 eta)/2} (c d_j + (x_j/r) d_t) w ||_2^2`, the
/// squared good-derivative flux, with the weight already tabulated.
fn ghost_square(c: f64, wt: &ScalarField, grad: &[ScalarField; 3], g_half: &ScalarField) -> f64 {
    let mut total = 0.0;
    for j in 0..3 {
        let mut tj = grad[j].scaled(c);
        tj.axpy(1.0, &mul_direction(wt, j + 1));
        total += weighted_l2_sq(&tj, g_half);
    }
    total
}

/// `||r^{-5/4} w||_2^2 + ||r^{-1/4} d w||_2^2` for one jet.
fn interior_square(
    value: &ScalarField,
    wt: &ScalarField,
    grad: &[ScalarField; 3],
    w: &InteriorWeights,
) -> f64 {
    let mut total = weighted_l2_sq(value, &w.r_val) + weighted_l2_sq(wt, &w.r_deriv);
    for g in grad {
        total += weighted_l2_sq(g, &w.r_deriv);
    }
    total
}

fn cone_weight_field(grid: Grid3, c: f64, t: f64, exponent: f64) -> ScalarField {
    ScalarField::from_fn(grid, |x, y, z| bracket(c * t - radius([x, y, z])).powf(exponent))
}

/// Energy `E(w; c) = 1/2 int (w_t^2 + c^2 |grad w|^2)` of one jet.
///
/// The gradient term is evaluated through the pairing
/// `int w (-lap_h w)`, which agrees with the quadrature of `|grad w|^2`
/// after summation by parts and is the quantity the semi-discrete
/// update conserves; measured drift then isolates the time integrator.
pub fn energy(jet: &FieldJet) -> f64 {
    let lap = laplacian(&jet.value);
    let c2 = jet.speed * jet.speed;
    let wt = jet.wt.data();
    let val = jet.value.data();
    let lp = lap.data();
    let s = sum_chunked((0..wt.len()).map(|k| wt[k] * wt[k] - c2 * val[k] * lp[k]));
    (0.5 * jet.value.grid().cell_volume() * s).max(0.0)
}

/// Cone-weighted second-derivative norm
/// `M_2(w; c) = sum_{d, j} || <ct-r> d d_j w ||_2` over the twelve pairs
/// of one time-or-space derivative `d` and one spatial derivative
/// `d_j`.  Mixed time derivatives come from the jet's `w_t` slot, so no
/// equation is needed.
pub fn m2_norm(jet: &FieldJet) -> f64 {
    let c = jet.speed;
    let t = jet.t;
    let w = |r: f64| bracket(c * t - r);
    let mut total = 0.0;
    for j in 0..3 {
        let d = derivative(&jet.wt, j);
        total += radial_l2(&d, w);
    }
    let first = [
        derivative(&jet.value, 0),
        derivative(&jet.value, 1),
        derivative(&jet.value, 2),
    ];
    for i in 0..3 {
        for j in i..3 {
            let d = derivative(&first[i], j);
            let norm = radial_l2(&d, w);
            total += if i == j { norm } else { 2.0 * norm };
        }
    }
    total
}

/// Depth-first walk over all `Z^a` jets with `|a| <= max_order`.
///
/// Children apply successively smaller field indices, so the scaling
/// field only ever acts along the leading spine of the tree; spatial
/// edges therefore drop the source rule instead of transporting it.
fn walk_jets<F>(root: &FieldJet, max_order: usize, visit: &mut F) -> Result<()>
where
    F: FnMut(&MultiIndex, &FieldJet) -> Result<()>,
{
    fn rec<F>(index: MultiIndex, jet: &FieldJet, max_order: usize, visit: &mut F) -> Result<()>
    where
        F: FnMut(&MultiIndex, &FieldJet) -> Result<()>,
    {
        visit(&index, jet)?;
        if index.order() == max_order {
            return Ok(());
        }
        for i in 1..=index.children_limit() {
            let child = if i == FIELD_COUNT {
                jet.apply(i)?
            } else {
                jet.apply_dropping_source(i)
            };
            rec(index.plus(i), &child, max_order, visit)?;
        }
        Ok(())
    }
    rec(MultiIndex::zero(), root, max_order, visit)
}

/// The jet of one component of a state, with enough time derivatives of
/// its forcing attached to support three scaling applications.
pub fn component_jet(spec: &SystemSpec, state: &SystemState, i: usize) -> FieldJet {
    assert!(i < 3, "component index out of range");
    let source = if spec.is_linear() {
        SourceRule::Zero
    } else {
        let mut sources = spec.source_vectors(&state.u, &state.v);
        SourceRule::Fields(std::mem::take(&mut sources[i]))
    };
    FieldJet {
        value: state.u[i].clone(),
        wt: state.v[i].clone(),
        t: state.t,
        speed: spec.speeds[i],
        source,
    }
}

/// `N_kappa(w) = (sum_{|a| <= kappa-1} E(Z^a w))^{1/2}`.
pub fn n_norm(root: &FieldJet, kappa: usize) -> Result<f64> {
    if !(1..=4).contains(&kappa) {
        return Err(Error::Diagnostics(format!(
            "n_norm order must lie in 1..=4, got {kappa}"
        )));
    }
    let mut total = 0.0;
    walk_jets(root, kappa - 1, &mut |_, jet| {
        total += energy(jet);
        Ok(())
    })?;
    Ok(total.sqrt())
}

/// `M_mu(w; c) = sum_{|a| <= mu-2} M_2(Z^a w; c)`.
pub fn m_norm(root: &FieldJet, mu: usize) -> Result<f64> {
    if !(2..=4).contains(&mu) {
        return Err(Error::Diagnostics(format!(
            "m_norm order must lie in 2..=4, got {mu}"
        )));
    }
    let mut total = 0.0;
    walk_jets(root, mu - 2, &mut |_, jet| {
        total += m2_norm(jet);
        Ok(())
    })?;
    Ok(total)
}

/// Ghost-weighted good-derivative norm
/// `G(w) = (sum_{|a| <= 3} sum_j || <ct-r>^{-(1+2 eta)/2} T_j Z^a w ||_2^2)^{1/2}`.
pub fn ghost_integral(root: &FieldJet, eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta < 0.25) {
        return Err(Error::Diagnostics(format!(
            "ghost exponent must lie in (0, 1/4), got {eta}"
        )));
    }
    let g_half = cone_weight_field(root.value.grid(), root.speed, root.t, -0.5 - eta);
    let c = root.speed;
    let mut total = 0.0;
    walk_jets(root, 3, &mut |_, jet| {
        let grad = gradient(&jet.value);
        total += ghost_square(c, &jet.wt, &grad, &g_half);
        Ok(())
    })?;
    Ok(total.sqrt())
}

/// Interior norm
/// `L(w) = (sum_{|a| <= 3} ||r^{-5/4} Z^a w||_2^2 + ||r^{-1/4} d Z^a w||_2^2)^{1/2}`.
pub fn l_norm(root: &FieldJet) -> Result<f64> {
    let weights = InteriorWeights::build(root.value.grid());
    let mut total = 0.0;
    walk_jets(root, 3, &mut |_, jet| {
        let grad = gradient(&jet.value);
        total += interior_square(&jet.value, &jet.wt, &grad, &weights);
        Ok(())
    })?;
    Ok(total.sqrt())
}

/// Which norm families a record computes; the energy and plain sup
/// norms are always included.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NormSelection {
    pub n_norms: bool,
    pub m_norms: bool,
    pub ghost_l: bool,
    pub bracket: bool,
}

impl Default for NormSelection {
    fn default() -> NormSelection {
        NormSelection { n_norms: true, m_norms: true, ghost_l: true, bracket: true }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DiagnosticsConfig {
    /// Time-weight exponent applied to the first component.
    pub delta: f64,
    /// Ghost-weight exponent.
    pub eta: f64,
    pub selection: NormSelection,
}

impl Default for DiagnosticsConfig {
    fn default() -> DiagnosticsConfig {
        DiagnosticsConfig {
            delta: DEFAULT_DELTA,
            eta: DEFAULT_ETA,
            selection: NormSelection::default(),
        }
    }
}

impl DiagnosticsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Diagnostics(format!(
                "time-weight exponent must lie in (0, 1), got {}",
                self.delta
            )));
        }
        if !(self.eta > 0.0 && self.eta < 0.25) {
            return Err(Error::Diagnostics(format!(
                "ghost exponent must lie in (0, 1/4), got {}",
                self.eta
            )));
        }
        Ok(())
    }
}

/// Norms of one component at one time; families that were not selected
/// are NaN.
#[derive(Debug, Clone, Copy)]
pub struct ComponentDiagnostics {
    pub energy: f64,
    pub n3: f64,
    pub n4: f64,
    pub m3: f64,
    pub m4: f64,
    pub ghost: f64,
    pub interior: f64,
    /// `sup r <ct-r>^{1/2} |d w|`.
    pub sup_r_cone_deriv: f64,
    /// `sup <ct-r> |d w|`.
    pub sup_cone_deriv: f64,
    /// `sup |d w|`.
    pub sup_deriv: f64,
}

impl ComponentDiagnostics {
    fn nan() -> ComponentDiagnostics {
        ComponentDiagnostics {
            energy: f64::NAN,
            n3: f64::NAN,
            n4: f64::NAN,
            m3: f64::NAN,
            m4: f64::NAN,
            ghost: f64::NAN,
            interior: f64::NAN,
            sup_r_cone_deriv: f64::NAN,
            sup_cone_deriv: f64::NAN,
            sup_deriv: f64::NAN,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BracketTerm {
    pub label: &'static str,
    pub value: f64,
}

/// The composite sup-norm bracket, kept itemized so runs can report
/// which contribution dominates.
#[derive(Debug, Clone)]
pub struct BracketNorm {
    pub total: f64,
    pub terms: Vec<BracketTerm>,
}

/// Per-component raw pieces the bracket is assembled from, bucketed by
/// the order of the applied multi-index.
#[derive(Debug, Clone, Default)]
struct BracketPieces {
    /// `sup r <ct-r>^{1/2} |d Z^a w|`, orders 0..=1.
    sup_rc: [f64; 2],
    /// `sup <ct-r> |d Z^a w|`, orders 0..=1.
    sup_cone: [f64; 2],
    /// `|| <ct-r> d Z^a w ||_{L^6}`, orders 0..=1.
    l6_cone: [f64; 2],
    /// `sup_r r^{1/2} <ct-r> || d Z^a w ||_{L^4(sphere)}`, orders 0..=2.
    sph_cone: [f64; 3],
    /// `sup_r r^{1/2} || Z_i Z^a w ||_{L^4(sphere)}` summed over `i`, orders 0..=2.
    sph_z: [f64; 3],
    /// `sup_r r || d Z^a w ||_{L^4(sphere)}`, orders 0..=1.
    sph_r: [f64; 2],
}

#[derive(Debug, Clone, Default)]
struct ComponentWalk {
    e_by_order: [f64; 4],
    m2_by_order: [f64; 3],
    g_sq: f64,
    l_sq: f64,
    sup_r_cone: f64,
    sup_cone: f64,
    sup_deriv: f64,
    pieces: BracketPieces,
}

/// One fused pass over the `Z^a` tree of a component, filling every
/// selected accumulator.
fn walk_component(
    root: &FieldJet,
    sel: NormSelection,
    eta: f64,
    interior: Option<&InteriorWeights>,
    rule: &SphereRule,
    max_order: usize,
) -> Result<ComponentWalk> {
    let c = root.speed;
    let t = root.t;
    let g_half = interior.map(|_| cone_weight_field(root.value.grid(), c, t, -0.5 - eta));
    let mut out = ComponentWalk::default();
    walk_jets(root, max_order, &mut |index, jet| {
        let o = index.order();
        out.e_by_order[o] += energy(jet);
        if sel.m_norms && o <= 2 {
            out.m2_by_order[o] += m2_norm(jet);
        }
        let want_bracket = sel.bracket && o <= 2;
        if interior.is_none() && o > 0 && !want_bracket {
            return Ok(());
        }
        let grad = gradient(&jet.value);
        if let (Some(iw), Some(gh)) = (interior, g_half.as_ref()) {
            out.g_sq += ghost_square(c, &jet.wt, &grad, gh);
            out.l_sq += interior_square(&jet.value, &jet.wt, &grad, iw);
        }
        if o == 0 || want_bracket {
            let mag = deriv_magnitude(&jet.wt, &grad);
            if o == 0 {
                out.sup_r_cone = radial_sup(&mag, |r| r * bracket(c * t - r).sqrt());
                out.sup_cone = radial_sup(&mag, |r| bracket(c * t - r));
                out.sup_deriv = lp_norm(&mag, Lp::Inf);
            }
            if want_bracket {
                out.pieces.sph_cone[o] +=
                    lr_inf_lomega(&mag, 4.0, rule, |r| r.sqrt() * bracket(c * t - r));
                for i in 1..=FIELD_COUNT {
                    let zv = jet.applied_value(i);
                    out.pieces.sph_z[o] += lr_inf_lomega(&zv, 4.0, rule, |r| r.sqrt());
                }
                if o <= 1 {
                    out.pieces.sph_r[o] += lr_inf_lomega(&mag, 4.0, rule, |r| r);
                    out.pieces.sup_rc[o] += radial_sup(&mag, |r| r * bracket(c * t - r).sqrt());
                    out.pieces.sup_cone[o] += radial_sup(&mag, |r| bracket(c * t - r));
                    out.pieces.l6_cone[o] +=
                        radial_weighted(&mag, Lp::P6, &|r| bracket(c * t - r));
                }
            }
        }
        Ok(())
    })?;
    Ok(out)
}

fn component_from_walk(
    walk: &ComponentWalk,
    sel: NormSelection,
    max_order: usize,
) -> ComponentDiagnostics {
    let e = walk.e_by_order;
    let (n3, n4) = if max_order >= 3 {
        ((e[0] + e[1] + e[2]).sqrt(), (e[0] + e[1] + e[2] + e[3]).sqrt())
    } else {
        (f64::NAN, f64::NAN)
    };
    let (m3, m4) = if sel.m_norms {
        let m = walk.m2_by_order;
        (m[0] + m[1], m[0] + m[1] + m[2])
    } else {
        (f64::NAN, f64::NAN)
    };
    let (ghost, interior) = if sel.ghost_l {
        (walk.g_sq.sqrt(), walk.l_sq.sqrt())
    } else {
        (f64::NAN, f64::NAN)
    };
    ComponentDiagnostics {
        energy: e[0],
        n3,
        n4,
        m3,
        m4,
        ghost,
        interior,
        sup_r_cone_deriv: walk.sup_r_cone,
        sup_cone_deriv: walk.sup_cone,
        sup_deriv: walk.sup_deriv,
    }
}

/// Combine the per-component pieces into the sixteen weighted terms of
/// the bracket.  `td` is the decaying time weight applied to the first
/// component.
fn assemble_bracket(pieces: &[BracketPieces; 3], td: f64) -> BracketNorm {
    let td2 = td * td;
    let family = |p: &BracketPieces, hi: usize| -> f64 {
        (0..=hi).map(|o| p.sph_cone[o] + p.sph_z[o]).sum()
    };
    let terms = vec![
        BracketTerm { label: "comp1 sup r sqrt-cone, base", value: td * pieces[0].sup_rc[0] },
        BracketTerm {
            label: "comp1 sup r sqrt-cone, order<=1",
            value: td2 * (pieces[0].sup_rc[0] + pieces[0].sup_rc[1]),
        },
        BracketTerm { label: "comp2 sup r sqrt-cone, base", value: pieces[1].sup_rc[0] },
        BracketTerm {
            label: "comp2 sup r sqrt-cone, order<=1",
            value: td * (pieces[1].sup_rc[0] + pieces[1].sup_rc[1]),
        },
        BracketTerm { label: "comp3 sup r sqrt-cone, base", value: pieces[2].sup_rc[0] },
        BracketTerm {
            label: "comp3 sup r sqrt-cone, order<=1",
            value: td * (pieces[2].sup_rc[0] + pieces[2].sup_rc[1]),
        },
        BracketTerm { label: "comp1 sphere family, order<=1", value: td * family(&pieces[0], 1) },
        BracketTerm { label: "comp1 sphere family, order<=2", value: td2 * family(&pieces[0], 2) },
        BracketTerm { label: "comp2 sphere family, order<=1", value: family(&pieces[1], 1) },
        BracketTerm { label: "comp2 sphere family, order<=2", value: td * family(&pieces[1], 2) },
        BracketTerm { label: "comp3 sphere family, order<=1", value: family(&pieces[2], 1) },
        BracketTerm { label: "comp3 sphere family, order<=2", value: td * family(&pieces[2], 2) },
        BracketTerm {
            label: "r-weighted sphere family, order<=1",
            value: (0..=1)
                .map(|o| td * pieces[0].sph_r[o] + pieces[1].sph_r[o] + pieces[2].sph_r[o])
                .sum(),
        },
        BracketTerm {
            label: "cone sup, base",
            value: td * pieces[0].sup_cone[0] + pieces[1].sup_cone[0] + pieces[2].sup_cone[0],
        },
        BracketTerm {
            label: "cone sup, order<=1",
            value: td
                * (0..=1)
                    .map(|o| td * pieces[0].sup_cone[o] + pieces[1].sup_cone[o] + pieces[2].sup_cone[o])
                    .sum::<f64>(),
        },
        BracketTerm {
            label: "cone L6, order<=1",
            value: (0..=1)
                .map(|o| td * pieces[0].l6_cone[o] + pieces[1].l6_cone[o] + pieces[2].l6_cone[o])
                .sum(),
        },
    ];
    let total = terms.iter().map(|t| t.value).sum();
    BracketNorm { total, terms }
}

/// Snapshot of every selected norm at one time.
#[derive(Debug, Clone)]
pub struct DiagnosticRecord {
    pub t: f64,
    pub components: [ComponentDiagnostics; 3],
    pub script_n3: f64,
    pub script_n4: f64,
    pub script_m3: f64,
    pub script_m4: f64,
    pub bracket: Option<BracketNorm>,
    pub support_radius: f64,
    pub blown_up: bool,
}

impl DiagnosticRecord {
    /// Placeholder record for a state past the blow-up threshold.
    pub fn non_finite(t: f64) -> DiagnosticRecord {
        DiagnosticRecord {
            t,
            components: [ComponentDiagnostics::nan(); 3],
            script_n3: f64::NAN,
            script_n4: f64::NAN,
            script_m3: f64::NAN,
            script_m4: f64::NAN,
            bracket: None,
            support_radius: f64::NAN,
            blown_up: true,
        }
    }
}

fn support_radius_of(state: &SystemState) -> f64 {
    let m = state.max_abs();
    if m == 0.0 {
        return 0.0;
    }
    let threshold = 1e-8 * m;
    state
        .u
        .iter()
        .chain(state.v.iter())
        .map(|f| f.support_radius(threshold))
        .fold(0.0, f64::max)
}

/// Evaluate every norm selected in `cfg` on one state.
pub fn record(
    spec: &SystemSpec,
    state: &SystemState,
    cfg: &DiagnosticsConfig,
) -> Result<DiagnosticRecord> {
    cfg.validate()?;
    spec.validate()?;
    if state.blown_up() || !state.all_finite() {
        return Ok(DiagnosticRecord::non_finite(state.t));
    }
    let sel = cfg.selection;
    let max_order = if sel.n_norms || sel.ghost_l {
        3
    } else if sel.m_norms || sel.bracket {
        2
    } else {
        0
    };
    let grid = state.grid();
    let rule = SphereRule::default_rule();
    let interior = if sel.ghost_l { Some(InteriorWeights::build(grid)) } else { None };
    let sources = if max_order >= 1 && !spec.is_linear() {
        let [s1, s2, s3] = spec.source_vectors(&state.u, &state.v);
        [SourceRule::Fields(s1), SourceRule::Fields(s2), SourceRule::Fields(s3)]
    } else {
        [SourceRule::Zero, SourceRule::Zero, SourceRule::Zero]
    };
    let mut components = [ComponentDiagnostics::nan(); 3];
    let mut pieces: [BracketPieces; 3] = Default::default();
    for (i, source) in sources.into_iter().enumerate() {
        let root = FieldJet {
            value: state.u[i].clone(),
            wt: state.v[i].clone(),
            t: state.t,
            speed: spec.speeds[i],
            source,
        };
        let walk = walk_component(&root, sel, cfg.eta, interior.as_ref(), &rule, max_order)?;
        components[i] = component_from_walk(&walk, sel, max_order);
        pieces[i] = walk.pieces;
    }
    let td = bracket(state.t).powf(-cfg.delta);
    let script =
        |f: fn(&ComponentDiagnostics) -> f64| td * f(&components[0]) + f(&components[1]) + f(&components[2]);
    let bracket_norm = if sel.bracket { Some(assemble_bracket(&pieces, td)) } else { None };
    Ok(DiagnosticRecord {
        t: state.t,
        script_n3: script(|c| c.n3),
        script_n4: script(|c| c.n4),
        script_m3: script(|c| c.m3),
        script_m4: script(|c| c.m4),
        components,
        bracket: bracket_norm,
        support_radius: support_radius_of(state),
        blown_up: false,
    })
}

/// The composite sup-norm bracket of a state on its own.
pub fn bracket_norm(spec: &SystemSpec, state: &SystemState, delta: f64) -> Result<BracketNorm> {
    if state.blown_up() || !state.all_finite() {
        return Err(Error::Diagnostics(
            "sup norms are not defined on a blown-up state".to_string(),
        ));
    }
    let cfg = DiagnosticsConfig {
        delta,
        eta: DEFAULT_ETA,
        selection: NormSelection { n_norms: false, m_norms: false, ghost_l: false, bracket: true },
    };
    let rec = record(spec, state, &cfg)?;
    rec.bracket
        .ok_or_else(|| Error::Diagnostics("bracket assembly produced no value".to_string()))
}

/// Visit all spatial derivative words `d^a f` with `|a| <= max_order`,
/// taking axes in non-decreasing order so each word appears once.
fn spatial_tree(
    f: &ScalarField,
    max_order: usize,
    visit: &mut dyn FnMut(usize, &ScalarField),
) {
    fn rec(
        field: &ScalarField,
        order: usize,
        min_axis: usize,
        max_order: usize,
        visit: &mut dyn FnMut(usize, &ScalarField),
    ) {
        visit(order, field);
        if order == max_order {
            return;
        }
        for axis in min_axis..3 {
            let d = derivative(field, axis);
            rec(&d, order + 1, axis, max_order, visit);
        }
    }
    rec(f, 0, 0, max_order, visit);
}

/// Weighted Sobolev size of initial data:
/// `sum_{1 <= |a| <= 4} || <x>^{|a|-1} d^a f ||_2 + sum_{|a| <= 3} || <x>^{|a|} d^a g ||_2`,
/// optionally including the `|| <x>^{-1} f ||_2` zeroth term.
pub fn data_norm(data: &InitialData, grid: Grid3, include_position_l2: bool) -> Result<f64> {
    data.validate()?;
    let reach = data.support_radius();
    if reach > grid.max_safe_radius() {
        return Err(Error::Grid(format!(
            "initial data reaches r = {reach:.3} but the grid only resolves r <= {:.3}; enlarge the box",
            grid.max_safe_radius()
        )));
    }
    let state = SystemState::from_data(grid, data)?;
    let mut total = 0.0;
    for i in 0..3 {
        spatial_tree(&state.u[i], 4, &mut |order, field| {
            if order == 0 && !include_position_l2 {
                return;
            }
            let p = order as i32 - 1;
            total += radial_l2(field, |r| bracket(r).powi(p));
        });
        spatial_tree(&state.v[i], 3, &mut |order, field| {
            total += radial_l2(field, |r| bracket(r).powi(order as i32));
        });
    }
    Ok(total)
}

/// Least-squares slope of `log y` against `log t` over samples with
/// `t` inside `window`; the estimate of `p` in `y ~ t^p`.
pub fn fit_decay(ts: &[f64], ys: &[f64], window: (f64, f64)) -> Result<f64> {
    if ts.len() != ys.len() {
        return Err(Error::Diagnostics(format!(
            "decay fit needs matching series, got {} times and {} values",
            ts.len(),
            ys.len()
        )));
    }
    if !(window.0 < window.1) {
        return Err(Error::Diagnostics(format!(
            "decay fit window [{}, {}] is empty",
            window.0, window.1
        )));
    }
    let mut pts = Vec::new();
    for (&t, &y) in ts.iter().zip(ys) {
        if t < window.0 - 1e-12 || t > window.1 + 1e-12 {
            continue;
        }
        if !(t > 0.0) || !(y > 0.0) || !y.is_finite() {
            return Err(Error::Diagnostics(format!(
                "decay fit needs positive finite samples, got ({t}, {y})"
            )));
        }
        pts.push((t.ln(), y.ln()));
    }
    if pts.len() < 5 {
        return Err(Error::Diagnostics(format!(
            "decay fit needs at least 5 samples in the window, found {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mean_x = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in pts {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
    }
    Ok(sxy / sxx)
}

/// Tabulated ghost weight `g(rho) = -int_0^rho <s>^{-1-2 eta} ds`, an
/// odd, bounded, strictly decreasing profile.  Values come from a
/// cumulative Simpson table refined by cubic Hermite interpolation with
/// the analytic integrand as slope, so `g` is smooth enough to
/// differentiate through.
#[derive(Debug, Clone)]
pub struct GhostParams {
    eta: f64,
    step: f64,
    table: Vec<f64>,
}

impl GhostParams {
    pub fn new(eta: f64) -> Result<GhostParams> {
        if !(eta > 0.0 && eta < 0.25) {
            return Err(Error::Diagnostics(format!(
                "ghost exponent must lie in (0, 1/4), got {eta}"
            )));
        }
        let step = 0.01;
        let cells = 102_400;
        let integrand = |s: f64| (1.0 + s * s).powf(-0.5 - eta);
        let mut table = Vec::with_capacity(cells + 1);
        table.push(0.0);
        let mut acc = 0.0;
        for k in 0..cells {
            let a = k as f64 * step;
            acc += step / 6.0
                * (integrand(a) + 4.0 * integrand(a + 0.5 * step) + integrand(a + step));
            table.push(acc);
        }
        Ok(GhostParams { eta, step, table })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn g(&self, rho: f64) -> f64 {
        let s = rho.abs();
        let last = self.table.len() - 1;
        let pos = s / self.step;
        if pos >= last as f64 {
            return -rho.signum() * self.table[last];
        }
        let k = pos as usize;
        let theta = pos - k as f64;
        let slope = |j: usize| {
            let x = j as f64 * self.step;
            (1.0 + x * x).powf(-0.5 - self.eta) * self.step
        };
        let t2 = theta * theta;
        let t3 = t2 * theta;
        let value = self.table[k] * (2.0 * t3 - 3.0 * t2 + 1.0)
            + slope(k) * (t3 - 2.0 * t2 + theta)
            + self.table[k + 1] * (-2.0 * t3 + 3.0 * t2)
            + slope(k + 1) * (t3 - t2);
        -rho.signum() * value
    }

    pub fn g_prime(&self, rho: f64) -> f64 {
        -(1.0 + rho * rho).powf(-0.5 - self.eta)
    }
}

#[derive(Debug, Clone, Default)]
struct GhostHistory {
    times: Vec<f64>,
    weighted: Vec<f64>,
    flux: Vec<f64>,
    energy: Vec<f64>,
}

/// Residual series of the discrete ghost-energy balance for one
/// component.
#[derive(Debug, Clone)]
pub struct GhostBalance {
    pub times: Vec<f64>,
    pub residual: Vec<f64>,
}

impl GhostBalance {
    pub fn max_residual(&self) -> f64 {
        self.residual.iter().cloned().fold(0.0, f64::max)
    }
}

/// Per-step history of the ghost-weighted energy
/// `W_i(t) = int e^{g(c_i t - r)} (v_i^2 + c_i^2 |grad u_i|^2) / 2` and
/// of its predicted rate, the weighted good-derivative flux plus the
/// forcing power.  Feed it every solver step; the balance check
/// differentiates `W_i` in time with the same five-point stencil the
/// solver uses in space.
#[derive(Debug, Clone)]
pub struct GhostAccumulator {
    params: GhostParams,
    histories: [GhostHistory; 3],
}

impl GhostAccumulator {
    pub fn new(params: GhostParams) -> GhostAccumulator {
        GhostAccumulator { params, histories: Default::default() }
    }

    pub fn params(&self) -> &GhostParams {
        &self.params
    }

    pub fn sample_count(&self) -> usize {
        self.histories[0].times.len()
    }

    pub fn push(&mut self, spec: &SystemSpec, state: &SystemState) -> Result<()> {
        if state.blown_up() || !state.all_finite() {
            return Err(Error::Diagnostics(
                "ghost balance cannot accumulate a blown-up state".to_string(),
            ));
        }
        let forcing = if spec.is_linear() {
            None
        } else {
            Some(spec.rhs_from_state(&state.u, &state.v))
        };
        let grid = state.grid();
        let n = grid.n();
        let volume = grid.cell_volume();
        for i in 0..3 {
            let c = spec.speeds[i];
            let grad = gradient(&state.u[i]);
            let vt = state.v[i].data();
            let gx = grad[0].data();
            let gy = grad[1].data();
            let gz = grad[2].data();
            let f_data = forcing.as_ref().map(|f| f[i].data());
            let mut weighted = 0.0;
            let mut flux = 0.0;
            let mut raw = 0.0;
            for ix in 0..n {
                let x = grid.coord(ix);
                let mut w_slab = 0.0;
                let mut f_slab = 0.0;
                let mut r_slab = 0.0;
                for iy in 0..n {
                    let y = grid.coord(iy);
                    let row = grid.idx(ix, iy, 0);
                    for iz in 0..n {
                        let z = grid.coord(iz);
                        let k = row + iz;
                        let r = (x * x + y * y + z * z).sqrt();
                        let rho = c * state.t - r;
                        let e_g = self.params.g(rho).exp();
                        let gp = self.params.g_prime(rho);
                        let v_t = vt[k];
                        let density =
                            0.5 * (v_t * v_t + c * c * (gx[k] * gx[k] + gy[k] * gy[k] + gz[k] * gz[k]));
                        let t1 = c * gx[k] + x / r * v_t;
                        let t2 = c * gy[k] + y / r * v_t;
                        let t3 = c * gz[k] + z / r * v_t;
                        let good = t1 * t1 + t2 * t2 + t3 * t3;
                        let f_val = f_data.map_or(0.0, |d| d[k]);
                        w_slab += e_g * density;
                        f_slab += e_g * (0.5 * c * gp * good + v_t * f_val);
                        r_slab += density;
                    }
                }
                weighted += w_slab;
                flux += f_slab;
                raw += r_slab;
            }
            let h = &mut self.histories[i];
            h.times.push(state.t);
            h.weighted.push(weighted * volume);
            h.flux.push(flux * volume);
            h.energy.push(raw * volume);
        }
        Ok(())
    }

    /// Pointwise residual `|dW_i/dt - flux_i| / E_i` along the pushed
    /// history; needs at least five uniformly spaced samples.
    pub fn balance(&self, i: usize) -> Result<GhostBalance> {
        assert!(i < 3, "component index out of range");
        let h = &self.histories[i];
        let m = h.times.len();
        if m < 5 {
            return Err(Error::Diagnostics(format!(
                "ghost balance needs at least 5 per-step samples, found {m}; push every step"
            )));
        }
        let dt = h.times[1] - h.times[0];
        if !(dt > 0.0) {
            return Err(Error::Diagnostics(format!(
                "ghost balance needs a positive time step, got {dt}"
            )));
        }
        for k in 1..m {
            let d = h.times[k] - h.times[k - 1];
            if (d - dt).abs() > 1e-9 * dt.abs().max(1e-12) {
                return Err(Error::Diagnostics(
                    "ghost balance needs a uniform step; push once per solver step".to_string(),
                ));
            }
        }
        let weights = WindowWeights::for_spacing(dt);
        let mut residual = Vec::with_capacity(m);
        for j in 0..m {
            let start = j.saturating_sub(2).min(m - 5);
            let mut rate = 0.0;
            for k in 0..5 {
                rate += weights.d1[j - start][k] * h.weighted[start + k];
            }
            residual.push((rate - h.flux[j]).abs() / h.energy[j].max(f64::MIN_POSITIVE));
        }
        Ok(GhostBalance { times: h.times.clone(), residual })
    }

    /// Largest balance residual over all components and times.
    pub fn worst_residual(&self) -> Result<f64> {
        let mut worst = 0.0_f64;
        for i in 0..3 {
            worst = worst.max(self.balance(i)?.max_residual());
        }
        Ok(worst)
    }
}

/// Per-step history behind the local-energy-decay ratio: the cumulative
/// interior integral against its data-plus-forcing majorant.
#[derive(Debug, Clone, Default)]
pub struct KssAccumulator {
    times: Vec<f64>,
    lhs_integrand: [Vec<f64>; 3],
    rhs_integrand: [Vec<f64>; 3],
    data_term: [f64; 3],
    weights: Option<InteriorWeightsHolder>,
}

#[derive(Debug, Clone)]
struct InteriorWeightsHolder {
    r_val: ScalarField,
    r_deriv: ScalarField,
}

impl KssAccumulator {
    pub fn new() -> KssAccumulator {
        KssAccumulator::default()
    }

    pub fn sample_count(&self) -> usize {
        self.times.len()
    }

    pub fn push(&mut self, spec: &SystemSpec, state: &SystemState) -> Result<()> {
        if state.blown_up() || !state.all_finite() {
            return Err(Error::Diagnostics(
                "the kss ratio cannot accumulate a blown-up state".to_string(),
            ));
        }
        let grid = state.grid();
        if self.weights.is_none() {
            let w = InteriorWeights::build(grid);
            self.weights = Some(InteriorWeightsHolder { r_val: w.r_val, r_deriv: w.r_deriv });
        }
        let holder = self.weights.as_ref().unwrap();
        let weights = InteriorWeights { r_val: holder.r_val.clone(), r_deriv: holder.r_deriv.clone() };
        let forcing = if spec.is_linear() {
            None
        } else {
            Some(spec.rhs_from_state(&state.u, &state.v))
        };
        let first = self.times.is_empty();
        for i in 0..3 {
            let grad = gradient(&state.u[i]);
            if first {
                let mut d = lp_norm(&state.v[i], Lp::P2).powi(2);
                for g in &grad {
                    d += lp_norm(g, Lp::P2).powi(2);
                }
                self.data_term[i] = d;
            }
            self.lhs_integrand[i].push(interior_square(&state.u[i], &state.v[i], &grad, &weights));
            let rhs = match &forcing {
                None => 0.0,
                Some(f) => {
                    let mag = deriv_magnitude(&state.v[i], &grad);
                    abs_product_integral(&mag, &f[i], |_| 1.0)
                        + abs_product_integral(&state.u[i], &f[i], |r| {
                            1.0 / (r.sqrt() * bracket(r).sqrt())
                        })
                }
            };
            self.rhs_integrand[i].push(rhs);
        }
        self.times.push(state.t);
        Ok(())
    }

    fn check(&self, horizon: f64) -> Result<()> {
        if self.times.len() < 2 {
            return Err(Error::Diagnostics(
                "the kss ratio needs a run history of at least two samples".to_string(),
            ));
        }
        let last = *self.times.last().unwrap();
        if horizon > last + 1e-9 * (1.0 + last.abs()) {
            return Err(Error::Diagnostics(format!(
                "kss horizon {horizon} exceeds the recorded history, which ends at {last}"
            )));
        }
        if !(horizon > 0.0) {
            return Err(Error::Diagnostics(format!(
                "kss horizon must be positive, got {horizon}"
            )));
        }
        Ok(())
    }

    fn cumulative(&self, series: &[f64], horizon: f64) -> f64 {
        let mut acc = 0.0;
        for k in 1..self.times.len() {
            if self.times[k] > horizon + 1e-9 * (1.0 + horizon) {
                break;
            }
            acc += 0.5 * (series[k - 1] + series[k]) * (self.times[k] - self.times[k - 1]);
        }
        acc
    }

    /// `(1+T)^{-1/2} int_0^T lhs_i dt` over
    /// `||d w_i(0)||_2^2 + int_0^T rhs_i dt` for one component.
    pub fn component_ratio(&self, i: usize, horizon: f64) -> Result<f64> {
        assert!(i < 3, "component index out of range");
        self.check(horizon)?;
        let lhs = self.cumulative(&self.lhs_integrand[i], horizon);
        let rhs = self.data_term[i] + self.cumulative(&self.rhs_integrand[i], horizon);
        Ok((1.0 + horizon).powf(-0.5) * lhs / rhs.max(f64::MIN_POSITIVE))
    }

    /// The two sides of the component ratio: the time-weighted interior
    /// integral and the data-plus-forcing majorant it is divided by.
    pub fn component_parts(&self, i: usize, horizon: f64) -> Result<(f64, f64)> {
        assert!(i < 3, "component index out of range");
        self.check(horizon)?;
        let lhs = (1.0 + horizon).powf(-0.5) * self.cumulative(&self.lhs_integrand[i], horizon);
        let rhs = self.data_term[i] + self.cumulative(&self.rhs_integrand[i], horizon);
        Ok((lhs, rhs))
    }

    /// The aggregate ratio with numerator and denominator summed over
    /// components before dividing.
    pub fn ratio(&self, horizon: f64) -> Result<f64> {
        self.check(horizon)?;
        let mut lhs = 0.0;
        let mut rhs = 0.0;
        for i in 0..3 {
            lhs += self.cumulative(&self.lhs_integrand[i], horizon);
            rhs += self.data_term[i] + self.cumulative(&self.rhs_integrand[i], horizon);
        }
        Ok((1.0 + horizon).powf(-0.5) * lhs / rhs.max(f64::MIN_POSITIVE))
    }
}

/// `int w(r) |a| |b|` with an on-the-fly radial weight.
fn abs_product_integral(a: &ScalarField, b: &ScalarField, w: impl Fn(f64) -> f64) -> f64 {
    let grid = a.grid();
    let n = grid.n();
    let ad = a.data();
    let bd = b.data();
    let mut total = 0.0;
    for ix in 0..n {
        let x = grid.coord(ix);
        let mut slab = 0.0;
        for iy in 0..n {
            let y = grid.coord(iy);
            let row = grid.idx(ix, iy, 0);
            for iz in 0..n {
                let z = grid.coord(iz);
                let k = row + iz;
                slab += w((x * x + y * y + z * z).sqrt()) * ad[k].abs() * bd[k].abs();
            }
        }
        total += slab;
    }
    total * grid.cell_volume()
}

/// Options for an instrumented run.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub cfl: f64,
    pub horizon: f64,
    /// Time between full diagnostic records.
    pub cadence: f64,
    pub diagnostics: DiagnosticsConfig,
    /// Accumulate the per-step ghost balance when set.
    pub ghost: Option<GhostParams>,
    /// Accumulate the per-step local-decay history.
    pub kss: bool,
}

impl Default for RunOptions {
    fn default() -> RunOptions {
        RunOptions {
            cfl: 0.4,
            horizon: 1.0,
            cadence: 0.25,
            diagnostics: DiagnosticsConfig::default(),
            ghost: None,
            kss: false,
        }
    }
}

/// Everything an instrumented run produced.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub dt: f64,
    pub steps: usize,
    pub blow_up: Option<f64>,
    pub records: Vec<DiagnosticRecord>,
    pub ghost: Option<GhostAccumulator>,
    pub kss: Option<KssAccumulator>,
    /// Weighted Sobolev norm of the initial data.
    pub data_norm: f64,
}

impl RunReport {
    /// The record times paired with one extracted column.
    pub fn series(&self, f: impl Fn(&DiagnosticRecord) -> f64) -> (Vec<f64>, Vec<f64>) {
        (
            self.records.iter().map(|r| r.t).collect(),
            self.records.iter().map(f).collect(),
        )
    }
}

/// Evolve initial data to the horizon, recording diagnostics on the
/// requested cadence (plus the initial and final states) and feeding
/// the per-step accumulators every step.  A blow-up ends the run early
/// with a placeholder final record.
pub fn run_with_diagnostics(
    spec: &SystemSpec,
    data: &InitialData,
    grid: Grid3,
    opts: &RunOptions,
) -> Result<RunReport> {
    spec.validate()?;
    opts.diagnostics.validate()?;
    if !(opts.horizon > 0.0 && opts.horizon.is_finite()) {
        return Err(Error::Run(format!(
            "run horizon must be positive and finite, got {}",
            opts.horizon
        )));
    }
    if !(opts.cadence > 0.0 && opts.cadence.is_finite()) {
        return Err(Error::Run(format!(
            "record cadence must be positive and finite, got {}",
            opts.cadence
        )));
    }
    let data_norm_value = data_norm(data, grid, false)?;
    let mut state = SystemState::from_data(grid, data)?;
    let dt_max = cfl_dt(opts.cfl, grid.h(), spec.max_speed())?;
    let (total_steps, dt) = steps_to(0.0, opts.horizon, dt_max);
    let mut marks = BTreeSet::new();
    let mut k = 1_usize;
    loop {
        let target = k as f64 * opts.cadence;
        if target > opts.horizon * (1.0 + 1e-12) {
            break;
        }
        marks.insert(((target / dt).round() as usize).clamp(1, total_steps));
        k += 1;
    }
    marks.insert(total_steps);
    let mut ghost = opts.ghost.clone().map(GhostAccumulator::new);
    let mut kss = if opts.kss { Some(KssAccumulator::new()) } else { None };
    let mut records = Vec::with_capacity(marks.len() + 2);
    records.push(record(spec, &state, &opts.diagnostics)?);
    if let Some(g) = ghost.as_mut() {
        g.push(spec, &state)?;
    }
    if let Some(q) = kss.as_mut() {
        q.push(spec, &state)?;
    }
    let outcome = evolve(spec, &mut state, opts.horizon, opts.cfl, |s, step| {
        if let Some(g) = ghost.as_mut() {
            g.push(spec, s)?;
        }
        if let Some(q) = kss.as_mut() {
            q.push(spec, s)?;
        }
        if marks.contains(&step) {
            records.push(record(spec, s, &opts.diagnostics)?);
        }
        Ok(())
    })?;
    if outcome.blow_up.is_some() {
        records.push(DiagnosticRecord::non_finite(state.t));
    }
    Ok(RunReport {
        dt: outcome.dt,
        steps: outcome.steps,
        blow_up: outcome.blow_up,
        records,
        ghost,
        kss,
        data_norm: data_norm_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{InitialData, Profile, RadialBump, SystemState};
    use crate::system::preset;
    use crate::vector_fields::indices_up_to;

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
        let h = (b - a) / panels as f64;
        let mut acc = 0.0;
        for k in 0..panels {
            let x = a + k as f64 * h;
            acc += h / 6.0 * (f(x) + 4.0 * f(x + 0.5 * h) + f(x + h));
        }
        acc
    }

    fn gaussian_field(grid: Grid3, amp: f64, width: f64, center: [f64; 3]) -> ScalarField {
        ScalarField::from_fn(grid, |x, y, z| {
            let dx = x - center[0];
            let dy = y - center[1];
            let dz = z - center[2];
            amp * (-(dx * dx + dy * dy + dz * dz) / (2.0 * width * width)).exp()
        })
    }

    #[test]
    fn ghost_weight_matches_an_independent_quadrature() {
        assert!(GhostParams::new(0.0).is_err());
        assert!(GhostParams::new(0.3).is_err());
        let params = GhostParams::new(0.125).unwrap();
        assert_eq!(params.g(0.0), 0.0);
        for rho in [0.05, 0.3, 1.7, 9.4, 310.0] {
            let direct = -simpson(
                |s| (1.0 + s * s).powf(-0.625),
                0.0,
                rho,
                (rho * 1000.0).ceil() as usize,
            );
            let got = params.g(rho);
            assert!(
                (got - direct).abs() <= 1e-9 * direct.abs().max(1.0),
                "g({rho}) = {got} vs quadrature {direct}"
            );
            assert!((params.g(-rho) + got).abs() < 1e-15);
            let diff = (params.g(rho + 1e-4) - params.g(rho - 1e-4)) / 2e-4;
            assert!(
                (diff - params.g_prime(rho)).abs() < 1e-5,
                "interpolated slope {diff} vs analytic {}",
                params.g_prime(rho)
            );
        }
        assert!(params.g(2.0) < params.g(1.0));
        assert!(params.g(2000.0) > -20.0);
        assert!(params.g(2000.0) == params.g(5000.0));
    }

    #[test]
    fn energy_matches_gaussian_closed_forms() {
        let grid = Grid3::new(64, 6.0).unwrap();
        let amp = 1.3;
        let width = 0.8;
        let bump = gaussian_field(grid, amp, width, [0.0; 3]);

        let velocity_jet = FieldJet {
            value: ScalarField::zeros(grid),
            wt: bump.clone(),
            t: 0.0,
            speed: 0.5,
            source: SourceRule::Zero,
        };
        let direct = 0.5 * lp_norm(&bump, Lp::P2).powi(2);
        let got = energy(&velocity_jet);
        assert!((got - direct).abs() <= 1e-13 * direct);

        let c = 0.7;
        let value_jet = FieldJet {
            value: bump,
            wt: ScalarField::zeros(grid),
            t: 0.0,
            speed: c,
            source: SourceRule::Zero,
        };
        let exact = 0.75 * std::f64::consts::PI.powf(1.5) * c * c * amp * amp * width;
        let got = energy(&value_jet);
        let rel = (got - exact).abs() / exact;
        println!("value-only energy {got} vs closed form {exact}, rel {rel:.2e}");
        assert!(rel < 1e-3);
    }

    #[test]
    fn norm_orders_are_validated_and_nested() {
        let grid = Grid3::new(24, 3.0).unwrap();
        let jet = FieldJet {
            value: gaussian_field(grid, 0.9, 0.8, [0.3, -0.2, 0.1]),
            wt: gaussian_field(grid, 0.4, 1.1, [0.0, 0.5, 0.0]),
            t: 0.6,
            speed: 1.0,
            source: SourceRule::Zero,
        };
        assert!(n_norm(&jet, 0).is_err());
        assert!(n_norm(&jet, 5).is_err());
        assert!(m_norm(&jet, 1).is_err());
        assert!(m_norm(&jet, 5).is_err());
        assert!(ghost_integral(&jet, 0.25).is_err());
        let n: Vec<f64> = (1..=4).map(|k| n_norm(&jet, k).unwrap()).collect();
        for k in 1..4 {
            assert!(n[k] > n[k - 1], "N_{} = {} should exceed N_{}", k + 1, n[k], k);
        }
        assert!(m_norm(&jet, 4).unwrap() > m_norm(&jet, 3).unwrap());
        assert!(m_norm(&jet, 3).unwrap() > m_norm(&jet, 2).unwrap());
        assert!(l_norm(&jet).unwrap() > 0.0);
    }

    #[test]
    fn walker_matches_direct_multi_index_sums() {
        let spec = preset("paper_model").unwrap();
        let grid = Grid3::new(16, 3.0).unwrap();
        let g = |w: f64| move |x: f64, y: f64, z: f64| (-(x * x + y * y + z * z) / (2.0 * w * w)).exp();
        let state = SystemState {
            t: 0.7,
            u: [
                ScalarField::from_fn(grid, |x, y, z| 0.8 * x * g(0.9)(x, y, z)),
                ScalarField::from_fn(grid, |x, y, z| 0.5 * (y * y - z) * g(1.1)(x, y, z)),
                ScalarField::from_fn(grid, |x, y, z| 0.7 * g(0.8)(x, y, z)),
            ],
            v: [
                ScalarField::from_fn(grid, |x, y, z| 0.3 * y * g(1.0)(x, y, z)),
                ScalarField::from_fn(grid, |x, y, z| -0.6 * g(0.7)(x, y, z)),
                ScalarField::from_fn(grid, |x, y, z| 0.4 * (x + z) * g(0.9)(x, y, z)),
            ],
        };
        let cfg = DiagnosticsConfig::default();
        let rec = record(&spec, &state, &cfg).unwrap();
        let eta = cfg.eta;
        let weights = InteriorWeights::build(grid);
        for i in 0..3 {
            let root = component_jet(&spec, &state, i);
            let g_half = cone_weight_field(grid, root.speed, root.t, -0.5 - eta);
            let mut e_sum3 = 0.0;
            let mut e_sum4 = 0.0;
            let mut m_sum = 0.0;
            let mut g_sq = 0.0;
            let mut l_sq = 0.0;
            for index in indices_up_to(3) {
                let jet = root.apply_multi(&index).unwrap();
                let e = energy(&jet);
                if index.order() <= 2 {
                    e_sum3 += e;
                    m_sum += m2_norm(&jet);
                }
                e_sum4 += e;
                let grad = gradient(&jet.value);
                g_sq += ghost_square(root.speed, &jet.wt, &grad, &g_half);
                l_sq += interior_square(&jet.value, &jet.wt, &grad, &weights);
            }
            let comp = &rec.components[i];
            let close = |a: f64, b: f64, label: &str| {
                assert!(
                    (a - b).abs() <= 1e-12 * b.abs().max(1e-300),
                    "component {i} {label}: walker {a} vs direct {b}"
                );
            };
            close(comp.n3, e_sum3.sqrt(), "n3");
            close(comp.n4, e_sum4.sqrt(), "n4");
            close(comp.m4, m_sum, "m4");
            close(comp.ghost, g_sq.sqrt(), "ghost");
            close(comp.interior, l_sq.sqrt(), "interior");
            assert!(comp.n4 >= comp.n3);
            assert!(comp.m4 >= comp.m3);
        }
    }

    #[test]
    fn m2_matches_a_radial_oracle() {
        let grid = Grid3::new(64, 6.0).unwrap();
        let amp = 0.7;
        let w = 1.1;
        let jet = FieldJet {
            value: gaussian_field(grid, amp, w, [0.0; 3]),
            wt: ScalarField::zeros(grid),
            t: 0.0,
            speed: 1.0,
            source: SourceRule::Zero,
        };
        let got = m2_norm(&jet);
        // Second derivatives of a radial Gaussian have the angular
        // moments <x_i^4> = r^4/5 and <x_i^2 x_j^2> = r^4/15 on the
        // sphere of radius r, which reduces every norm to a radial
        // quadrature.
        let w2 = w * w;
        let v_sq = |r: f64| {
            let v = amp * (-r * r / (2.0 * w2)).exp();
            v * v
        };
        let diag = |r: f64| {
            (1.0 + r * r)
                * v_sq(r)
                * (r.powi(4) / (5.0 * w2 * w2 * w2 * w2) - 2.0 * r * r / (3.0 * w2 * w2 * w2)
                    + 1.0 / (w2 * w2))
        };
        let off = |r: f64| (1.0 + r * r) * v_sq(r) * r.powi(4) / (15.0 * w2 * w2 * w2 * w2);
        let four_pi = 4.0 * std::f64::consts::PI;
        let norm_diag = (four_pi * simpson(|r| diag(r) * r * r, 0.0, 6.0, 6000)).sqrt();
        let norm_off = (four_pi * simpson(|r| off(r) * r * r, 0.0, 6.0, 6000)).sqrt();
        let oracle = 3.0 * norm_diag + 6.0 * norm_off;
        let rel = (got - oracle).abs() / oracle;
        println!("m2 {got} vs radial oracle {oracle}, rel {rel:.2e}");
        assert!(rel < 1e-3);
    }

    #[test]
    fn ghost_square_is_small_for_an_outgoing_pulse() {
        let grid = Grid3::new(96, 7.5).unwrap();
        let t = 5.8;
        let sigma = 0.3;
        let pulse = |s: f64| (-s * s / (2.0 * sigma * sigma)).exp();
        let dpulse = |s: f64| -s / (sigma * sigma) * pulse(s);
        let value = ScalarField::from_fn(grid, |x, y, z| {
            let r = radius([x, y, z]);
            pulse(t - r) / r
        });
        let wt = ScalarField::from_fn(grid, |x, y, z| {
            let r = radius([x, y, z]);
            dpulse(t - r) / r
        });
        let eta = 0.125;
        let g_half = cone_weight_field(grid, 1.0, t, -0.5 - eta);
        let grad = gradient(&value);
        let got = ghost_square(1.0, &wt, &grad, &g_half);
        // For v = p(t-r)/r the good derivatives collapse to
        // T_j v = -x_j p / r^3, so the squared norm is a radial
        // integral of p^2/r^2 against the ghost weight.
        let oracle = 4.0
            * std::f64::consts::PI
            * simpson(
                |r| {
                    let s = t - r;
                    (1.0 + s * s).powf(-0.5 - eta) * pulse(s) * pulse(s) / (r * r)
                },
                0.05,
                7.4,
                8000,
            );
        let rel = (got - oracle).abs() / oracle;
        println!("ghost square {got} vs quadrature {oracle}, rel {rel:.2e}");
        assert!(rel < 2e-2);

        let jet = FieldJet { value, wt, t, speed: 1.0, source: SourceRule::Zero };
        let e = energy(&jet);
        let ratio = got / e;
        println!("outgoing pulse: ghost square / energy = {ratio:.3e}");
        assert!(ratio < 1e-2);

        let tighter = cone_weight_field(grid, 1.0, t, -0.5 - 0.2);
        let grad2 = gradient(&jet.value);
        assert!(ghost_square(1.0, &jet.wt, &grad2, &tighter) < got);
    }

    #[test]
    fn interior_square_matches_an_independent_quadrature() {
        let grid = Grid3::new(96, 4.5).unwrap();
        let x0 = 2.0;
        let w = 0.4;
        let b_amp = 0.6;
        let value = gaussian_field(grid, 1.0, w, [x0, 0.0, 0.0]);
        let wt = gaussian_field(grid, b_amp, w, [x0, 0.0, 0.0]);
        let grad = gradient(&value);
        let weights = InteriorWeights::build(grid);
        let got = interior_square(&value, &wt, &grad, &weights);
        // Around the off-center bump, integrate in spherical shells of
        // radius rho about the center; |x| = sqrt(x0^2 + rho^2 + 2 x0 rho s)
        // with s the cosine of the polar angle.  The Gaussian factor
        // cuts everything off well before the shell through the origin.
        let two_pi = 2.0 * std::f64::consts::PI;
        let shell = |rho: f64, power: f64| {
            simpson(
                |s| (x0 * x0 + rho * rho + 2.0 * x0 * rho * s).powf(0.5 * power),
                -1.0,
                1.0,
                400,
            )
        };
        let e = |rho: f64| (-rho * rho / (w * w)).exp();
        let oracle = simpson(
            |rho| two_pi * rho * rho * e(rho) * shell(rho, -2.5),
            0.0,
            1.9,
            600,
        ) + simpson(
            |rho| {
                let deriv_density = b_amp * b_amp + rho * rho / (w * w * w * w);
                two_pi * rho * rho * e(rho) * deriv_density * shell(rho, -0.5)
            },
            0.0,
            1.9,
            600,
        );
        let rel = (got - oracle).abs() / oracle;
        println!("interior square {got} vs quadrature {oracle}, rel {rel:.2e}");
        assert!(rel < 3e-3);
    }

    #[test]
    fn bracket_norm_is_homogeneous_and_itemized() {
        let spec = preset("linear").unwrap();
        let grid = Grid3::new(20, 2.5).unwrap();
        let state = SystemState {
            t: 1.2,
            u: [
                gaussian_field(grid, 0.8, 0.7, [0.2, 0.0, -0.1]),
                gaussian_field(grid, -0.5, 0.9, [0.0, 0.3, 0.0]),
                gaussian_field(grid, 0.6, 0.8, [0.0, 0.0, 0.0]),
            ],
            v: [
                gaussian_field(grid, 0.3, 0.8, [0.0, -0.2, 0.0]),
                gaussian_field(grid, 0.7, 0.6, [0.1, 0.0, 0.2]),
                gaussian_field(grid, -0.4, 1.0, [0.0, 0.0, 0.1]),
            ],
        };
        let base = bracket_norm(&spec, &state, DEFAULT_DELTA).unwrap();
        assert_eq!(base.terms.len(), 16);
        let sum: f64 = base.terms.iter().map(|t| t.value).sum();
        assert!((base.total - sum).abs() <= 1e-12 * base.total);
        assert!(base.total > 0.0);
        let mut labels: Vec<&str> = base.terms.iter().map(|t| t.label).collect();
        labels.sort_unstable();
        labels.dedup();
        assert_eq!(labels.len(), 16, "term labels must be distinct");

        let mut scaled = state.clone();
        for f in scaled.u.iter_mut().chain(scaled.v.iter_mut()) {
            f.scale(3.0);
        }
        let tripled = bracket_norm(&spec, &scaled, DEFAULT_DELTA).unwrap();
        let rel = (tripled.total - 3.0 * base.total).abs() / (3.0 * base.total);
        assert!(rel < 1e-12, "bracket should be 1-homogeneous, rel err {rel}");

        let zero = SystemState {
            t: 1.2,
            u: [ScalarField::zeros(grid), ScalarField::zeros(grid), ScalarField::zeros(grid)],
            v: [ScalarField::zeros(grid), ScalarField::zeros(grid), ScalarField::zeros(grid)],
        };
        assert_eq!(bracket_norm(&spec, &zero, DEFAULT_DELTA).unwrap().total, 0.0);
    }

    #[test]
    fn record_reports_consistent_norms() {
        let spec = preset("paper_model").unwrap();
        let grid = Grid3::new(20, 2.5).unwrap();
        let state = SystemState {
            t: 0.9,
            u: [
                gaussian_field(grid, 0.4, 0.8, [0.1, 0.0, 0.0]),
                gaussian_field(grid, 0.5, 0.7, [0.0, -0.2, 0.1]),
                gaussian_field(grid, -0.3, 0.9, [0.0, 0.0, 0.0]),
            ],
            v: [
                gaussian_field(grid, 0.2, 0.9, [0.0, 0.1, 0.0]),
                gaussian_field(grid, -0.4, 0.8, [0.2, 0.0, 0.0]),
                gaussian_field(grid, 0.3, 0.7, [0.0, 0.0, -0.1]),
            ],
        };
        let cfg = DiagnosticsConfig::default();
        let rec = record(&spec, &state, &cfg).unwrap();
        assert!(!rec.blown_up);
        for comp in &rec.components {
            for value in [
                comp.energy,
                comp.n3,
                comp.n4,
                comp.m3,
                comp.m4,
                comp.ghost,
                comp.interior,
                comp.sup_r_cone_deriv,
                comp.sup_cone_deriv,
                comp.sup_deriv,
            ] {
                assert!(value.is_finite() && value > 0.0, "expected positive norm, got {value}");
            }
            assert!(comp.n4 >= comp.n3);
            assert!(comp.m4 >= comp.m3);
        }
        let td = bracket(state.t).powf(-cfg.delta);
        let expect = td * rec.components[0].n3 + rec.components[1].n3 + rec.components[2].n3;
        assert!((rec.script_n3 - expect).abs() <= 1e-15 * expect);
        assert!(rec.bracket.is_some());
        assert!(rec.support_radius > 0.0);

        let again = record(&spec, &state, &cfg).unwrap();
        assert_eq!(rec.script_n4.to_bits(), again.script_n4.to_bits());
        assert_eq!(
            rec.bracket.as_ref().unwrap().total.to_bits(),
            again.bracket.as_ref().unwrap().total.to_bits()
        );

        let minimal = DiagnosticsConfig {
            selection: NormSelection { n_norms: false, m_norms: false, ghost_l: false, bracket: false },
            ..cfg
        };
        let fast = record(&spec, &state, &minimal).unwrap();
        assert!(fast.components[0].energy.is_finite());
        assert!(fast.components[0].n3.is_nan());
        assert!(fast.components[0].m3.is_nan());
        assert!(fast.components[0].ghost.is_nan());
        assert!(fast.bracket.is_none());

        let mut boom = state.clone();
        boom.u[0].scale(1e300);
        boom.v[0].scale(1e300);
        let guarded = record(&spec, &boom, &cfg).unwrap();
        assert!(guarded.blown_up);
        assert!(guarded.components[0].energy.is_nan());
    }

    #[test]
    fn data_norm_matches_symbolic_gaussian_derivatives() {
        let grid = Grid3::new(96, 9.0).unwrap();
        let amp = 0.9;
        let data = InitialData::velocity_bumps([Some(RadialBump::centered(amp, 1.0)), None, None]);
        let got = data_norm(&data, grid, false).unwrap();
        // Derivatives of exp(-r^2/2) are polynomials times the same
        // Gaussian; push the polynomial through each derivative and
        // evaluate the weighted norms of the exact fields.
        use std::collections::BTreeMap;
        type Poly = BTreeMap<[u8; 3], f64>;
        let diff = |p: &Poly, axis: usize| {
            let mut out: Poly = BTreeMap::new();
            for (&mono, &coeff) in p {
                if mono[axis] > 0 {
                    let mut m = mono;
                    m[axis] -= 1;
                    *out.entry(m).or_insert(0.0) += coeff * mono[axis] as f64;
                }
                let mut m = mono;
                m[axis] += 1;
                *out.entry(m).or_insert(0.0) -= coeff;
            }
            out
        };
        let eval = |p: &Poly, x: f64, y: f64, z: f64| {
            p.iter()
                .map(|(m, c)| c * x.powi(m[0] as i32) * y.powi(m[1] as i32) * z.powi(m[2] as i32))
                .sum::<f64>()
        };
        let mut oracle = 0.0;
        fn tree(
            p: &Poly,
            order: usize,
            min_axis: usize,
            visit: &mut dyn FnMut(usize, &Poly),
            diff: &dyn Fn(&Poly, usize) -> Poly,
        ) {
            visit(order, p);
            if order == 3 {
                return;
            }
            for axis in min_axis..3 {
                tree(&diff(p, axis), order + 1, axis, visit, diff);
            }
        }
        let base: Poly = BTreeMap::from([([0, 0, 0], 1.0)]);
        tree(
            &base,
            0,
            0,
            &mut |order, poly| {
                let field = ScalarField::from_fn(grid, |x, y, z| {
                    amp * eval(poly, x, y, z) * (-(x * x + y * y + z * z) / 2.0).exp()
                });
                oracle += radial_l2(&field, |r| bracket(r).powi(order as i32));
            },
            &diff,
        );
        let rel = (got - oracle).abs() / oracle;
        println!("data norm {got} vs symbolic oracle {oracle}, rel {rel:.2e}");
        assert!(rel < 1e-3);

        let half = data_norm(&data.scaled(0.5), grid, false).unwrap();
        assert!((half - 0.5 * got).abs() <= 1e-12 * got);

        let with_position = InitialData {
            components: [
                crate::solver::ComponentData {
                    position: vec![RadialBump {
                        amplitude: 0.8,
                        width: 2.0,
                        center: [0.0; 3],
                        profile: Profile::CompactBump,
                    }],
                    velocity: Vec::new(),
                },
                Default::default(),
                Default::default(),
            ],
        };
        let without = data_norm(&with_position, grid, false).unwrap();
        let with = data_norm(&with_position, grid, true).unwrap();
        let state = SystemState::from_data(grid, &with_position).unwrap();
        let zeroth = radial_l2(&state.u[0], |r| 1.0 / bracket(r));
        assert!((with - without - zeroth).abs() <= 1e-12 * with);

        let tight = Grid3::new(24, 6.0).unwrap();
        assert!(data_norm(&data, tight, false).is_err());
    }

    #[test]
    fn decay_fit_recovers_exact_power_laws() {
        let ts: Vec<f64> = (1..=12).map(|k| k as f64).collect();
        let inverse: Vec<f64> = ts.iter().map(|t| 5.0 / t).collect();
        let slope = fit_decay(&ts, &inverse, (0.5, 12.5)).unwrap();
        assert!((slope + 1.0).abs() < 1e-12);
        let constant: Vec<f64> = ts.iter().map(|_| 2.4).collect();
        assert!(fit_decay(&ts, &constant, (3.0, 10.0)).unwrap().abs() < 1e-12);
        let power: Vec<f64> = ts.iter().map(|t| 0.3 * t.powf(-0.75)).collect();
        assert!((fit_decay(&ts, &power, (1.0, 12.0)).unwrap() + 0.75).abs() < 1e-12);

        assert!(fit_decay(&ts, &inverse[1..], (0.5, 12.5)).is_err());
        assert!(fit_decay(&ts[..4], &inverse[..4], (0.5, 12.5)).is_err());
        assert!(fit_decay(&ts, &inverse, (3.0, 6.0)).is_err());
        let with_zero: Vec<f64> = ts.iter().map(|t| if *t > 6.0 { 0.0 } else { 1.0 }).collect();
        assert!(fit_decay(&ts, &with_zero, (1.0, 12.0)).is_err());
    }

    #[test]
    fn ghost_balance_residual_shrinks_under_refinement() {
        let spec = preset("linear").unwrap();
        let data = InitialData::velocity_bumps([
            Some(RadialBump::centered(1.0, 0.9)),
            Some(RadialBump::centered(0.8, 0.9)),
            Some(RadialBump::centered(1.2, 0.9)),
        ]);
        let mut worst = Vec::new();
        for n in [40, 80] {
            let grid = Grid3::new(n, 8.0).unwrap();
            let mut state = SystemState::from_data(grid, &data).unwrap();
            let mut acc = GhostAccumulator::new(GhostParams::new(0.125).unwrap());
            acc.push(&spec, &state).unwrap();
            evolve(&spec, &mut state, 0.75, 0.4, |s, _| acc.push(&spec, s)).unwrap();
            worst.push(acc.worst_residual().unwrap());
        }
        let ratio = worst[0] / worst[1];
        println!(
            "ghost balance residuals: coarse {:.3e}, fine {:.3e}, ratio {ratio:.1}",
            worst[0], worst[1]
        );
        assert!(worst[0] < 0.05, "coarse residual too large: {}", worst[0]);
        assert!(ratio > 4.0, "residual should shrink at least 4x, got {ratio:.2}");

        let grid = Grid3::new(16, 4.0).unwrap();
        let zero = SystemState::from_data(grid, &InitialData::default()).unwrap();
        let mut acc = GhostAccumulator::new(GhostParams::new(0.125).unwrap());
        for _ in 0..6 {
            acc.push(&spec, &zero).unwrap();
        }
        assert!(acc.balance(0).is_err(), "constant times are not a uniform positive step");

        let mut short = GhostAccumulator::new(GhostParams::new(0.125).unwrap());
        let mut state = SystemState::from_data(grid, &InitialData::default()).unwrap();
        short.push(&spec, &state).unwrap();
        evolve(&spec, &mut state, 0.05, 0.4, |s, _| short.push(&spec, s)).unwrap();
        match short.balance(0) {
            Err(Error::Diagnostics(msg)) => assert!(msg.contains("at least 5")),
            other => panic!("expected a cadence error, got {other:?}"),
        }
    }

    #[test]
    fn linear_run_conserves_energy_and_vector_field_norms() {
        let spec = preset("linear").unwrap();
        let data = InitialData::velocity_bumps([
            Some(RadialBump::centered(1.0, 0.9)),
            Some(RadialBump::centered(0.7, 0.9)),
            Some(RadialBump::centered(1.3, 0.9)),
        ]);
        let grid = Grid3::new(48, 9.0).unwrap();
        let opts = RunOptions {
            cfl: 0.4,
            horizon: 1.5,
            cadence: 0.75,
            diagnostics: DiagnosticsConfig {
                selection: NormSelection {
                    n_norms: true,
                    m_norms: false,
                    ghost_l: false,
                    bracket: false,
                },
                ..DiagnosticsConfig::default()
            },
            ghost: None,
            kss: false,
        };
        let report = run_with_diagnostics(&spec, &data, grid, &opts).unwrap();
        assert!(report.blow_up.is_none());
        assert_eq!(report.records.len(), 3);
        assert_eq!(report.records[0].t, 0.0);
        assert!((report.records[2].t - 1.5).abs() < 1e-12);
        assert!(report.records[1].t > 0.0 && report.records[1].t < 1.5);
        assert!(report.data_norm > 0.0);
        for i in 0..3 {
            let e0 = report.records[0].components[i].energy;
            let n0 = report.records[0].components[i].n3;
            for rec in &report.records[1..] {
                let e_drift = (rec.components[i].energy - e0).abs() / e0;
                let n_drift = (rec.components[i].n3 - n0).abs() / n0;
                println!(
                    "component {i} at t = {:.2}: energy drift {e_drift:.2e}, n3 drift {n_drift:.2e}",
                    rec.t
                );
                assert!(e_drift < 1e-5, "energy drifted by {e_drift:.2e}");
                assert!(n_drift < 0.05, "n3 drifted by {n_drift:.2e}");
            }
        }
        let times: Vec<f64> = report.records.iter().map(|r| r.t).collect();
        let mut sorted = times.clone();
        sorted.sort_by(f64::total_cmp);
        assert_eq!(times, sorted);
    }

    #[test]
    fn kss_ratio_is_finite_and_scale_invariant() {
        let spec = preset("linear").unwrap();
        let data = InitialData::velocity_bumps([
            Some(RadialBump::centered(1.0, 0.75)),
            Some(RadialBump::centered(0.5, 0.75)),
            Some(RadialBump::centered(0.8, 0.75)),
        ]);
        let grid = Grid3::new(32, 7.0).unwrap();
        let run = |d: &InitialData| {
            let opts = RunOptions {
                cfl: 0.4,
                horizon: 1.0,
                cadence: 1.0,
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
            run_with_diagnostics(&spec, d, grid, &opts).unwrap()
        };
        let report = run(&data);
        let kss = report.kss.as_ref().unwrap();
        let ratio = kss.ratio(1.0).unwrap();
        assert!(ratio.is_finite() && ratio > 0.0);
        for i in 0..3 {
            let r = kss.component_ratio(i, 1.0).unwrap();
            assert!(r.is_finite() && r > 0.0);
        }
        assert!(kss.ratio(5.0).is_err());
        assert!(KssAccumulator::new().ratio(1.0).is_err());

        let doubled = run(&data.scaled(2.0));
        let ratio2 = doubled.kss.as_ref().unwrap().ratio(1.0).unwrap();
        let rel = (ratio2 - ratio).abs() / ratio;
        println!("kss ratio {ratio:.6e} vs doubled-data ratio {ratio2:.6e}, rel {rel:.2e}");
        assert!(rel < 1e-13, "the ratio should be scale-invariant, rel err {rel}");
    }

    #[test]
    fn runs_flag_blow_up_and_guard_records() {
        let spec = preset("john_blowup").unwrap();
        let data =
            InitialData::velocity_bumps([Some(RadialBump::centered(60.0, 0.5)), None, None]);
        let grid = Grid3::new(32, 6.0).unwrap();
        let opts = RunOptions {
            cfl: 0.4,
            horizon: 3.0,
            cadence: 0.25,
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
            kss: false,
        };
        let report = run_with_diagnostics(&spec, &data, grid, &opts).unwrap();
        let when = report.blow_up.expect("large data should blow up");
        assert!(when > 0.0 && when < 3.0);
        let last = report.records.last().unwrap();
        assert!(last.blown_up);
        assert!(last.components[0].energy.is_nan());
        let previous = &report.records[report.records.len() - 2];
        assert!(!previous.blown_up);
        assert!(previous.components[0].energy.is_finite());
        assert_eq!(report.records[0].t, 0.0);
    }
}
