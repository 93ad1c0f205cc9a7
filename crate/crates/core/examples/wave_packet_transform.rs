//! Wave packet transform of a step profile: Plancherel, two-window inversion,
//! and a phase-space slice written as CSV for `wfnls plotdata`.

use std::fs::File;
use std::io::BufWriter;

use wavefront_nls::corpus::Signal;
use wavefront_nls::wavepacket::{plancherel_ratio, reconstruct, wpt, Window, WindowShape};
use wavefront_nls::{Grid, Result};

fn main() -> Result<()> {
    let grid = Grid::new(1, 1024, 20.0)?;
    let f = Signal::StepGaussian.field(grid, 0.0)?;
    let phi = Window::gaussian(0.25, 1.0, 1)?.sample(grid)?;
    let psi = Window::Dilated { shape: WindowShape::Bump { radius: 4.0 }, b: 0.25, lambda: 1.0 }.sample(grid)?;

    println!("Plancherel ratio        {:.15}", plancherel_ratio(&f, &phi)?);
    println!("inversion rel. error    {:.2e}", reconstruct(&f, &phi, &psi)?.relative_l2_distance(&f)?);

    let xs: Vec<Vec<f64>> = (-40..=40).map(|i| vec![i as f64 * 0.05]).collect();
    let ks: Vec<Vec<f64>> = (0..=60).map(|j| vec![j as f64]).collect();
    let slice = wpt(&f, &Window::gaussian(0.25, 16.0, 1)?, &xs, &ks)?;
    let path = std::env::temp_dir().join("step_slice.csv");
    slice.write_csv(BufWriter::new(File::create(&path)?))?;
    println!("slice {:?} written to {}", slice.shape(), path.display());

    // away from the jump the transform decays fast in xi; at the jump it does not
    for x in [0.0, 1.0] {
        let i = xs.iter().position(|v| (v[0] - x).abs() < 1e-9).expect("sample present");
        println!("|W f({x}, 60)| = {:.3e}", slice.value(i, 60).norm());
    }
    Ok(())
}
