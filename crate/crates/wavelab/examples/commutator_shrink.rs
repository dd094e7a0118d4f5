//! Discrete commutator residuals shrink at the stencil order.
//!
//! On evolving solutions the Lorentz-adapted fields are applied through
//! jets that carry the time derivative alongside the value.  The algebra
//! says that applying a field commutes with the wave operator up to known
//! lower-order terms; discretely the identity picks up truncation error,
//! so the residual measured on smooth data must fall by about `2^4` per
//! halving of the spacing.  The jet below declares a homogeneous source,
//! which fixes both discrete routes to the second time derivative.

use wavelab::grid::{Grid3, ScalarField};
use wavelab::vector_fields::{box_commutator_residual, field_name, FieldJet, SourceRule};

fn probe(grid: Grid3, w: f64) -> ScalarField {
    ScalarField::from_fn(grid, |x, y, z| {
        let r2 = x * x + y * y + z * z;
        (-0.5 * r2 / (w * w)).exp() * (1.0 + 0.6 * x - 0.4 * y + 0.25 * z + 0.3 * x * z)
    })
}

fn residuals(n: usize) -> wavelab::Result<Vec<(usize, f64)>> {
    let grid = Grid3::new(n, 4.0)?;
    let jet = FieldJet {
        value: probe(grid, 0.7),
        wt: probe(grid, 0.9),
        t: 0.6,
        speed: 1.0,
        source: SourceRule::Zero,
    };
    (1..=7).map(|i| Ok((i, box_commutator_residual(&jet, i)?))).collect()
}

fn main() -> wavelab::Result<()> {
    let coarse = residuals(48)?;
    let fine = residuals(96)?;
    println!("{:<8} {:>12} {:>12} {:>8}", "field", "n = 48", "n = 96", "factor");
    for ((i, rc), (_, rf)) in coarse.iter().zip(&fine) {
        let factor = if *rf > 0.0 { rc / rf } else { f64::INFINITY };
        println!("{:<8} {:12.3e} {:12.3e} {:8.1}", field_name(*i), rc, rf, factor);
    }
    Ok(())
}
