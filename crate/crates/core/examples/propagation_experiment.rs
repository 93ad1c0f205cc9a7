//! End-to-end propagation experiment: evaluate both transported hypotheses
//! on the initial datum, evolve the nonlinear equation, and scan the
//! conclusion detector over the support of `u(t0)`.

use wavefront_nls::corpus::Signal;
use wavefront_nls::microlocal::{theorem2_experiment, Theorem2Config};
use wavefront_nls::windows::NonlinearityPowers;
use wavefront_nls::{Grid, Result};

fn main() -> Result<()> {
    let grid = Grid::new(1, 4096, 40.0)?;
    let u0 = Signal::Gaussian.field(grid, 0.0)?;
    for (p, q) in [(2, 1), (2, 0)] {
        let cfg = Theorem2Config::new(NonlinearityPowers::new(p, q)?, 0.5, 1.0, 0.9, 0.75);
        let report = theorem2_experiment(&u0, &cfg)?;
        println!("--- p = {p}, q = {q}");
        report.write_summary(std::io::stdout().lock())?;
    }
    Ok(())
}
