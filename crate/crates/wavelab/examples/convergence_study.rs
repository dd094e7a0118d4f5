//! Fourth-order convergence of the discretization against a closed form.
//!
//! Radial velocity data `A exp(-r^2 / 2w^2)` under the constant-speed
//! linear wave equation has an exact spherical-means solution, so evolving
//! it on a ladder of grids and diffing at the final time isolates the
//! combined spatial-stencil plus RK4 error.  The observed order is the
//! log-log slope of the sup error against the spacing.

use wavelab::solver::{linear_reference_study, RadialReference};

fn main() -> wavelab::Result<()> {
    for speed in [1.0, 0.5] {
        let reference = RadialReference { amplitude: 1.0, width: 0.75, speed };
        let study = linear_reference_study(reference, 6.0, 1.5, 0.4, &[32, 64, 128])?;
        println!("speed {speed}:");
        for p in &study.points {
            println!("  n = {:3}  h = {:.4}  sup error = {:.3e}", p.n, p.h, p.error);
        }
        println!("  observed order {:.2}", study.observed_order);
        println!();
    }
    Ok(())
}
