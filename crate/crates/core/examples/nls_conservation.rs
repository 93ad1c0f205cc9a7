//! Split-step integration of the cubic equation with mass and energy drift,
//! and the Strang/Lie comparison at a fixed step count.

use wavefront_nls::corpus::Signal;
use wavefront_nls::schrodinger::{conservation_report, nls_solve, SolverParams, StepScheme};
use wavefront_nls::windows::NonlinearityPowers;
use wavefront_nls::{Grid, Result};

fn main() -> Result<()> {
    let grid = Grid::new(1, 1024, 20.0)?;
    let u0 = Signal::WideBump.field(grid, 0.0)?;
    let cubic = NonlinearityPowers::new(2, 1)?;
    for scheme in [StepScheme::Strang, StepScheme::Lie] {
        for steps in [64, 256, 1024] {
            let params = SolverParams::new(Some(cubic), 1.0, steps).with_scheme(scheme);
            let rep = conservation_report(&nls_solve(&u0, params)?)?;
            println!(
                "{scheme:<7} steps {steps:>5}  mass drift {:.2e}  energy drift {:.2e}",
                rep.mass_drift,
                rep.energy_drift.unwrap_or(f64::NAN)
            );
        }
    }
    Ok(())
}
