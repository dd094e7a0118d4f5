//! Certify quadratic forms against characteristic cones and run the
//! structural checker over the built-in systems.
//!
//! A constant form `H` is null for speed `c` when it annihilates every
//! characteristic covector `(c|xi|, xi)`.  The certificate below is exact
//! algebra on the coefficients, no sampling involved, and the same algebra
//! drives the per-equation assumption report that decides whether a system
//! qualifies for the small-data global theory.

use wavelab::system::{check_assumptions, is_null, preset, z_transform_coeffs, QuadraticForm};

fn describe(label: &str, h: &QuadraticForm, c: f64) {
    let cert = is_null(h, c);
    match cert.witness {
        None => println!("  {label} at speed {c}: null"),
        Some(w) => println!(
            "  {label} at speed {c}: NOT null, cone direction {:?} leaves residual {:.3e}",
            w.omega, w.residual
        ),
    }
}

fn main() -> wavelab::Result<()> {
    println!("== single forms ==");
    let mink = QuadraticForm::characteristic(1.0);
    describe("minkowski", &mink, 1.0);
    describe("minkowski", &mink, 2.0);
    describe("dt x dt", &QuadraticForm::time_time(), 1.0);

    // Null forms stay null under the Lorentz-adapted vector fields: every
    // commutator coefficient table maps the null cone for `c` into itself.
    println!();
    println!("== closure under the field algebra ==");
    for c in [1.0, 0.5] {
        let h = QuadraticForm::characteristic(c);
        let closed = (1..=7).all(|i| is_null(&z_transform_coeffs(&h, i), c).is_null);
        println!("  speed {c}: all seven transformed forms null = {closed}");
    }

    println!();
    println!("== structural reports ==");
    for name in ["paper_model", "pusateri_shatah", "john_blowup", "null_scalar", "linear"] {
        let spec = preset(name)?;
        let report = check_assumptions(&spec);
        println!("  {name}: pass = {}", report.pass);
        for check in &report.checks {
            if !check.pass {
                println!("    fails {}", check.label);
            }
        }
    }
    Ok(())
}
