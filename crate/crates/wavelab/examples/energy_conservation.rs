//! Energy drift of the linear evolution over a long run.
//!
//! With no coupling the discrete energy of each component should be
//! conserved up to the truncation error of the interior stencil and the
//! one-sided closures, which only ever see numerically-zero field values
//! while the support stays contained.  The drift printed here is the
//! largest relative change of any component energy over the whole run.

use wavelab::diagnostics::{run_with_diagnostics, DiagnosticsConfig, NormSelection, RunOptions};
use wavelab::grid::Grid3;
use wavelab::solver::{InitialData, RadialBump};
use wavelab::system::preset;

fn main() -> wavelab::Result<()> {
    let spec = preset("linear")?;
    let data = InitialData::velocity_bumps([
        Some(RadialBump::centered(1.0, 0.6)),
        Some(RadialBump::centered(0.8, 0.5)),
        Some(RadialBump::centered(1.2, 0.7)),
    ]);
    let grid = Grid3::new(96, 13.0)?;
    let opts = RunOptions {
        cfl: 0.4,
        horizon: 5.0,
        cadence: 0.5,
        diagnostics: DiagnosticsConfig {
            selection: NormSelection {
                n_norms: false,
                m_norms: false,
                ghost_l: false,
                bracket: false,
            },
            ..Default::default()
        },
        ghost: None,
        kss: false,
    };
    let report = run_with_diagnostics(&spec, &data, grid, &opts)?;

    println!("n = {}, dt = {:.4}, {} steps to t = 5", grid.n(), report.dt, report.steps);
    println!("{:>6} {:>14} {:>14} {:>14}", "t", "E_1", "E_2", "E_3");
    for rec in &report.records {
        println!(
            "{:6.2} {:14.10} {:14.10} {:14.10}",
            rec.t, rec.components[0].energy, rec.components[1].energy, rec.components[2].energy
        );
    }

    let mut drift: f64 = 0.0;
    for i in 0..3 {
        let e0 = report.records[0].components[i].energy;
        for rec in &report.records {
            drift = drift.max((rec.components[i].energy - e0).abs() / e0);
        }
    }
    println!();
    println!("worst relative energy drift {drift:.3e}");
    Ok(())
}
