//! The transported criterion for the free flow, in both time directions. A
//! Gaussian is regular everywhere; the step carries a singularity that the
//! flow moves along `x + t xi`.

use wavefront_nls::corpus::Signal;
use wavefront_nls::microlocal::{transported_criterion, CriterionParams, DirectionSign};
use wavefront_nls::{Grid, Result};

fn main() -> Result<()> {
    let grid = Grid::new(1, 4096, 16.0)?;
    let base = CriterionParams { b: 0.25, t0: 0.5, ..CriterionParams::default() };
    for signal in [Signal::Gaussian, Signal::StepGaussian] {
        let u0 = signal.field(grid, 0.0)?;
        for direction in [DirectionSign::Forward, DirectionSign::Backward] {
            for r in [0.5, 1.5] {
                let params = CriterionParams { direction, ..base.with_s(r) };
                let c = transported_criterion(&u0, 1.0, &params)?;
                println!(
                    "{:<14} {direction:?} r={r}: {} (tail slope {:.2})",
                    signal.name(),
                    c.verdict,
                    c.tail_slope.unwrap_or(f64::NAN)
                );
            }
        }
    }
    Ok(())
}
