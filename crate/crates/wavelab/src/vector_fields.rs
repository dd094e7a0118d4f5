//! Translation, rotation and scaling vector fields acting on evolving
//! fields.
//!
//! The seven fields are the spatial translations `Z_1..Z_3 = d_m`, the
//! rotations `Z_4 = O_12`, `Z_5 = O_23`, `Z_6 = O_13` with `O_jk = x_j d_k
//! - x_k d_j`, and the scaling `Z_7 = S = t d_t + x . grad`.  A field that
//! evolves in time is represented at a frozen instant by a [`FieldJet`]:
//! its value, its time derivative, and (when known) the time derivatives
//! of its d'Alembertian.  That is exactly the information needed to apply
//! any `Z_i` and obtain the jet of the transformed field at the same
//! instant, because `S` trades time derivatives for the wave operator:
//!
//! ```text
//! (S w)      = t w_t + x . grad w
//! (S w)_t    = w_t + t (c^2 lap w + s_0) + x . grad w_t
//! box(S w)   = t s_1 + x . grad s_0 + 2 s_0,     s_k = d_t^k (box w).
//! ```
//!
//! Compositions `Z^a = Z_1^{a_1} ... Z_7^{a_7}` are indexed by a
//! [`MultiIndex`]; the rightmost factor acts first, so building `Z^a`
//! incrementally means applying the *smallest* nonzero field index last.
//! Each application through `S` consumes one stored source derivative,
//! which is why base jets carry a short vector of them.

use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::stencil::{derivative, gradient, laplacian};

/// Number of vector fields.
pub const FIELD_COUNT: usize = 7;

/// Short name of field `i` (1-based).
pub fn field_name(i: usize) -> &'static str {
    match i {
        1 => "d1",
        2 => "d2",
        3 => "d3",
        4 => "O12",
        5 => "O23",
        6 => "O13",
        7 => "S",
        _ => panic!("vector field index {i} out of range 1..=7"),
    }
}

/// The spatial index pair `(j, k)` of rotation `Z_i = O_jk`, 1-based.
pub fn rotation_axes(i: usize) -> (usize, usize) {
    match i {
        4 => (1, 2),
        5 => (2, 3),
        6 => (1, 3),
        _ => panic!("index {i} is not a rotation field"),
    }
}

/// Exponent vector of a composition `Z^a = Z_1^{a_1} ... Z_7^{a_7}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(pub [u8; FIELD_COUNT]);

impl MultiIndex {
    pub fn zero() -> MultiIndex {
        MultiIndex([0; FIELD_COUNT])
    }

    /// The unit index `e_i`, 1-based.
    pub fn unit(i: usize) -> MultiIndex {
        MultiIndex::zero().plus(i)
    }

    /// Total order `|a|`.
    pub fn order(&self) -> usize {
        self.0.iter().map(|v| *v as usize).sum()
    }

    /// `a + e_i`, 1-based.
    pub fn plus(&self, i: usize) -> MultiIndex {
        assert!((1..=FIELD_COUNT).contains(&i));
        let mut out = *self;
        out.0[i - 1] += 1;
        out
    }

    /// Smallest field index with a nonzero exponent, 1-based.
    pub fn min_field(&self) -> Option<usize> {
        self.0.iter().position(|v| *v > 0).map(|p| p + 1)
    }

    /// The tree parent `(a - e_i, i)` where `i` is the smallest nonzero
    /// index; `None` for the root.
    pub fn parent(&self) -> Option<(MultiIndex, usize)> {
        let i = self.min_field()?;
        let mut p = *self;
        p.0[i - 1] -= 1;
        Some((p, i))
    }

    /// Children of this node are `a + e_i` for `i <= children_limit()`;
    /// the rule gives every index a unique parent.
    pub fn children_limit(&self) -> usize {
        self.min_field().unwrap_or(FIELD_COUNT)
    }

    /// Human-readable form like `d1^2 O23 S`; the identity is `I`.
    pub fn label(&self) -> String {
        if self.order() == 0 {
            return "I".to_string();
        }
        let mut parts = Vec::new();
        for i in 1..=FIELD_COUNT {
            match self.0[i - 1] {
                0 => {}
                1 => parts.push(field_name(i).to_string()),
                p => parts.push(format!("{}^{}", field_name(i), p)),
            }
        }
        parts.join(" ")
    }
}

/// All multi-indices with `|a| <= max_order` in depth-first preorder of
/// the incremental tree; the root comes first and every node appears
/// after its parent.
pub fn indices_up_to(max_order: usize) -> Vec<MultiIndex> {
    fn rec(a: MultiIndex, max_order: usize, out: &mut Vec<MultiIndex>) {
        out.push(a);
        if a.order() < max_order {
            for i in 1..=a.children_limit() {
                rec(a.plus(i), max_order, out);
            }
        }
    }
    let mut out = Vec::new();
    rec(MultiIndex::zero(), max_order, &mut out);
    out
}

/// What is known about the d'Alembertian of a jet's field.
#[derive(Debug, Clone)]
pub enum SourceRule {
    /// The field solves the homogeneous equation `box_c w = 0`.
    Zero,
    /// `fields[k] = d_t^k (box_c w)` at the jet's time, for `k` up to the
    /// stored depth.  An empty vector means the source is unknown.
    Fields(Vec<ScalarField>),
}

impl SourceRule {
    /// Remaining scaling applications this rule supports; `None` is
    /// unlimited.
    pub fn depth(&self) -> Option<usize> {
        match self {
            SourceRule::Zero => None,
            SourceRule::Fields(v) => Some(v.len()),
        }
    }
}

/// A field at a frozen time: value, time derivative, and source rule.
#[derive(Debug, Clone)]
pub struct FieldJet {
    pub value: ScalarField,
    /// Time derivative of the value.
    pub wt: ScalarField,
    /// The frozen time.
    pub t: f64,
    /// Propagation speed `c` in `box_c = d_tt - c^2 lap`.
    pub speed: f64,
    pub source: SourceRule,
}

/// Applies the purely spatial field `Z_i`, `i` in `1..=6`, to a field.
pub fn apply_spatial(f: &ScalarField, i: usize) -> ScalarField {
    match i {
        1..=3 => derivative(f, i - 1),
        4..=6 => {
            let (j, k) = rotation_axes(i);
            let mut out = derivative(f, k - 1).mul_coord(j - 1);
            out.axpy(-1.0, &derivative(f, j - 1).mul_coord(k - 1));
            out
        }
        _ => panic!("field {i} is not spatial"),
    }
}

/// Multiplies pointwise by the unit-direction component `x_k / r`,
/// `k` in `1..=3`; cell-centered grids keep `r` bounded away from zero.
pub fn mul_direction(f: &ScalarField, k: usize) -> ScalarField {
    let grid = f.grid();
    let n = grid.n();
    let mut out = f.clone();
    let data = out.data_mut();
    for ix in 0..n {
        let x = grid.coord(ix);
        for iy in 0..n {
            let y = grid.coord(iy);
            let row = grid.idx(ix, iy, 0);
            for iz in 0..n {
                let z = grid.coord(iz);
                let r = (x * x + y * y + z * z).sqrt();
                let c = [x, y, z][k - 1] / r;
                data[row + iz] *= c;
            }
        }
    }
    out
}

impl FieldJet {
    /// A jet of the zero field.
    pub fn zero(grid: crate::grid::Grid3, t: f64, speed: f64) -> FieldJet {
        FieldJet {
            value: ScalarField::zeros(grid),
            wt: ScalarField::zeros(grid),
            t,
            speed,
            source: SourceRule::Zero,
        }
    }

    /// `d_t^k (box_c w)` as a field; `None` when the rule is `Zero`, in
    /// which case every source derivative vanishes.
    fn source_field(&self, k: usize) -> Result<Option<&ScalarField>> {
        match &self.source {
            SourceRule::Zero => Ok(None),
            SourceRule::Fields(v) => v.get(k).map(Some).ok_or_else(|| {
                Error::MissingSourceRule(format!(
                    "need source derivative {k} but only {} stored; deepen the base jet",
                    v.len()
                ))
            }),
        }
    }

    /// Second time derivative `c^2 lap w + s_0`.
    pub fn d_tt(&self) -> Result<ScalarField> {
        let mut out = laplacian(&self.value);
        out.scale(self.speed * self.speed);
        if let Some(s0) = self.source_field(0)? {
            out.axpy(1.0, s0);
        }
        Ok(out)
    }

    /// The value of `Z_i w` alone, cheaper than a full [`apply`] when the
    /// transformed jet is not needed.
    ///
    /// [`apply`]: FieldJet::apply
    pub fn applied_value(&self, i: usize) -> ScalarField {
        match i {
            1..=6 => apply_spatial(&self.value, i),
            7 => {
                let mut out = ScalarField::x_dot(&gradient(&self.value));
                out.axpy(self.t, &self.wt);
                out
            }
            _ => panic!("vector field index {i} out of range 1..=7"),
        }
    }

    /// Like [`apply`](Self::apply) for a spatial field, but the child jet
    /// forgets its source rule. Valid whenever no scaling field is applied
    /// afterwards; the walkers that enumerate `Z^a` in descending field
    /// order use this to skip transporting sources below the `S` prefix.
    pub fn apply_dropping_source(&self, i: usize) -> FieldJet {
        assert!((1..=6).contains(&i), "only spatial fields may drop the source");
        FieldJet {
            value: apply_spatial(&self.value, i),
            wt: apply_spatial(&self.wt, i),
            t: self.t,
            speed: self.speed,
            source: SourceRule::Zero,
        }
    }

    /// Applies `Z_i` and returns the jet of `Z_i w` at the same time.
    pub fn apply(&self, i: usize) -> Result<FieldJet> {
        match i {
            1..=6 => {
                let source = match &self.source {
                    SourceRule::Zero => SourceRule::Zero,
                    SourceRule::Fields(v) => {
                        SourceRule::Fields(v.iter().map(|s| apply_spatial(s, i)).collect())
                    }
                };
                Ok(FieldJet {
                    value: apply_spatial(&self.value, i),
                    wt: apply_spatial(&self.wt, i),
                    t: self.t,
                    speed: self.speed,
                    source,
                })
            }
            7 => {
                let mut value = ScalarField::x_dot(&gradient(&self.value));
                value.axpy(self.t, &self.wt);

                // (S w)_t = w_t + t d_tt w + x . grad w_t; computing d_tt
                // needs the zeroth source derivative.
                let mut wt = ScalarField::x_dot(&gradient(&self.wt));
                wt.axpy(1.0, &self.wt);
                wt.axpy(self.t, &self.d_tt()?);

                let source = match &self.source {
                    SourceRule::Zero => SourceRule::Zero,
                    SourceRule::Fields(v) => {
                        let mut out = Vec::with_capacity(v.len().saturating_sub(1));
                        for k in 0..v.len().saturating_sub(1) {
                            let mut s = ScalarField::x_dot(&gradient(&v[k]));
                            s.axpy(self.t, &v[k + 1]);
                            s.axpy((k + 2) as f64, &v[k]);
                            out.push(s);
                        }
                        SourceRule::Fields(out)
                    }
                };
                Ok(FieldJet { value, wt, t: self.t, speed: self.speed, source })
            }
            _ => panic!("vector field index {i} out of range 1..=7"),
        }
    }

    /// Applies the composition `Z^a`; the highest field index acts first.
    pub fn apply_multi(&self, a: &MultiIndex) -> Result<FieldJet> {
        let mut jet = self.clone();
        for i in (1..=FIELD_COUNT).rev() {
            for _ in 0..a.0[i - 1] {
                jet = jet.apply(i)?;
            }
        }
        Ok(jet)
    }

    /// Good derivative `T_k w = c d_k w + (x_k / r) w_t`, tangent to the
    /// outgoing speed-`c` cones; `k` in `1..=3`.
    pub fn good_derivative(&self, k: usize) -> ScalarField {
        assert!((1..=3).contains(&k));
        let mut out = derivative(&self.value, k - 1);
        out.scale(self.speed);
        out.axpy(1.0, &mul_direction(&self.wt, k));
        out
    }
}

/// Structure constants: `[Z_j, Z_k] = sum_i c_i Z_i`, returned as sparse
/// `(i, c_i)` pairs.
pub fn commutator_coeffs(j: usize, k: usize) -> Vec<(usize, f64)> {
    assert!((1..=FIELD_COUNT).contains(&j) && (1..=FIELD_COUNT).contains(&k));
    if j == k {
        return Vec::new();
    }
    if j > k {
        return commutator_coeffs(k, j).into_iter().map(|(i, c)| (i, -c)).collect();
    }
    match (j, k) {
        // Translations commute among themselves.
        (1..=3, 1..=3) => Vec::new(),
        // [d_m, O_ab] = delta_ma d_b - delta_mb d_a.
        (m @ 1..=3, rot @ 4..=6) => {
            let (a, b) = rotation_axes(rot);
            let mut out = Vec::new();
            if m == a {
                out.push((b, 1.0));
            }
            if m == b {
                out.push((a, -1.0));
            }
            out
        }
        // [d_m, S] = d_m.
        (m @ 1..=3, 7) => vec![(m, 1.0)],
        // Rotation algebra in the O12, O23, O13 basis.
        (4, 5) => vec![(6, 1.0)],
        (4, 6) => vec![(5, -1.0)],
        (5, 6) => vec![(4, 1.0)],
        // Rotations commute with scaling.
        (4..=6, 7) => Vec::new(),
        _ => unreachable!(),
    }
}

/// Sup-norm of `(Z_j Z_k - Z_k Z_j - [Z_j, Z_k]) w` over value and time
/// derivative, a measure of how faithfully the discrete fields realize
/// the algebra on this jet.
pub fn commutator_residual(jet: &FieldJet, j: usize, k: usize) -> Result<f64> {
    let jk = jet.apply(k)?.apply(j)?;
    let kj = jet.apply(j)?.apply(k)?;
    let mut rv = jk.value.sub(&kj.value);
    let mut rt = jk.wt.sub(&kj.wt);
    for (i, c) in commutator_coeffs(j, k) {
        let zi = jet.apply(i)?;
        rv.axpy(-c, &zi.value);
        rt.axpy(-c, &zi.wt);
    }
    Ok(rv.max_abs().max(rt.max_abs()))
}

/// Sup-norm mismatch between two discrete routes to `d_tt (Z_i w)`.
///
/// Route one differentiates in time first, using only the jet's own data:
/// for spatial fields `d_tt (Z_i w) = Z_i (d_tt w)`, and for the scaling
/// field
///
/// ```text
/// d_tt (S w) = 2 d_tt w + t d_t(d_tt w) + x . grad (d_tt w),
/// ```
///
/// with `d_tt w = c^2 lap w + s_0` and `d_t(d_tt w) = c^2 lap w_t + s_1`.
/// Route two applies `Z_i` first and reads `d_tt` off the transformed
/// jet.  The routes agree exactly in the continuum, so the residual
/// isolates the discrete commutator of `Z_i` with the stencil Laplacian;
/// it vanishes on low-degree polynomial data and shrinks at fourth order
/// on smooth data.
pub fn box_commutator_residual(jet: &FieldJet, i: usize) -> Result<f64> {
    let zjet = jet.apply(i)?;
    let route_two = zjet.d_tt()?;
    let route_one = match i {
        1..=6 => apply_spatial(&jet.d_tt()?, i),
        7 => {
            let dtt = jet.d_tt()?;
            // d_t (d_tt w) = c^2 lap w_t + s_1.
            let mut dttt = laplacian(&jet.wt);
            dttt.scale(jet.speed * jet.speed);
            if let Some(s1) = jet.source_field(1)? {
                dttt.axpy(1.0, s1);
            }
            let mut out = ScalarField::x_dot(&gradient(&dtt));
            out.axpy(2.0, &dtt);
            out.axpy(jet.t, &dttt);
            out
        }
        _ => panic!("vector field index {i} out of range 1..=7"),
    };
    Ok(route_one.sub(&route_two).max_abs())
}
