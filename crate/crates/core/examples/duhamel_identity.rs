//! The transformed Duhamel formula evaluated on a stored trajectory. The
//! residual shrinks like the square of the step because the time integral is
//! a trapezoid rule over the stored states.

use wavefront_nls::corpus::Signal;
use wavefront_nls::schrodinger::{duhamel_residual, nls_solve, SolverParams};
use wavefront_nls::windows::{NonlinearityPowers, WindowSpec};
use wavefront_nls::{Grid, Result};

fn main() -> Result<()> {
    let grid = Grid::new(1, 512, 20.0)?;
    let u0 = Signal::ModulatedGaussian.field(grid, 0.0)?;
    let spec = WindowSpec::new(0.25, 2.0, 0.0, 1)?;
    let xs = [-1.0, 0.0, 0.5, 1.5];
    let xis = [-1.0, 0.5, 2.0, 3.0];
    for steps in [64, 128, 256, 512] {
        let traj = nls_solve(&u0, SolverParams::new(Some(NonlinearityPowers::new(2, 1)?), 0.5, steps))?;
        let rep = duhamel_residual(&traj, spec, &xs, &xis)?;
        println!(
            "steps {steps:>4}  max residual {:.3e}{}",
            rep.max_residual,
            if rep.under_resolved { "  (under-resolved)" } else { "" }
        );
    }
    Ok(())
}
