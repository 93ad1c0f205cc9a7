//! Both static detectors on the truth corpus at one phase-space point,
//! compared against the known `H^s` thresholds.

use wavefront_nls::corpus::Signal;
use wavefront_nls::microlocal::{cone_fourier_detect, wavepacket_detect, CriterionParams, PhasePoint, WindowFamily};
use wavefront_nls::{Grid, Result};

fn main() -> Result<()> {
    let grid = Grid::new(1, 8192, 16.0)?;
    let pt = PhasePoint::line(0.0, 1.0)?;
    println!("{:<18} {:>5} {:>8} {:>13} {:>13}", "signal", "s", "truth", "wave packet", "cone");
    for signal in Signal::TRUTH {
        let f = signal.field(grid, 0.0)?;
        for s in [0.25, 1.0, 1.75] {
            let params = CriterionParams::default().with_s(s);
            let wp = wavepacket_detect(&f, &pt, &params, &WindowFamily::Gaussian)?;
            let cone = cone_fourier_detect(&f, &pt, s, 1.0, 0.26)?;
            let truth = if signal.singular_at_level(s) { "in WF" } else { "smooth" };
            println!("{:<18} {s:>5} {truth:>8} {:>13} {:>13}", signal.name(), wp.verdict.to_string(), cone.verdict.to_string());
        }
    }
    Ok(())
}
