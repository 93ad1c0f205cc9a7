//! Sample a field, take its unitary Fourier transform and measure weighted
//! Sobolev norms. The step profile sits in `H^s` only for `s < 1/2`, which
//! shows up as norms that keep growing when the lattice is refined.

use wavefront_nls::corpus::Signal;
use wavefront_nls::field::{fourier, weighted_sobolev_norm};
use wavefront_nls::{Grid, Result, SobolevParams};

fn main() -> Result<()> {
    let grid = Grid::new(1, 1024, 16.0)?;
    let g = Signal::Gaussian.field(grid, 0.0)?;
    let spectrum = fourier(&g)?;
    println!("||g|| = {:.12}, ||F g|| = {:.12}", g.l2_norm()?, spectrum.l2_norm()?);

    println!("{:>6} {:>12} {:>12} {:>12}", "N", "s=0.25", "s=0.5", "s=0.75");
    for n in [512, 2048, 8192] {
        let grid = Grid::new(1, n, 16.0)?;
        let step = Signal::StepGaussian.field(grid, 0.0)?;
        let norms: Vec<f64> = [0.25, 0.5, 0.75]
            .iter()
            .map(|&s| weighted_sobolev_norm(&step, SobolevParams { s, m: 0.0 }))
            .collect::<Result<_>>()?;
        println!("{n:>6} {:>12.5} {:>12.5} {:>12.5}", norms[0], norms[1], norms[2]);
    }
    Ok(())
}
