//! The dilated Gaussian window under the free flow: its closed form against
//! spectral propagation, and the nonlinear pairing constants.

use wavefront_nls::schrodinger::free_propagate;
use wavefront_nls::windows::{evaluate_window, nonlinear_pairing, NonlinearityPowers, WindowSpec};
use wavefront_nls::{Grid, Result};

fn main() -> Result<()> {
    let grid = Grid::new(1, 2048, 40.0)?;
    let spec = WindowSpec::new(0.25, 4.0, 0.0, 1)?;
    let start = evaluate_window(spec, grid)?;
    for t in [0.0, 0.3, 1.0, 3.0] {
        let closed = evaluate_window(spec.with_time(t), grid)?;
        let spectral = free_propagate(&start, t)?;
        println!("t = {t:<4} max |closed - spectral| = {:.2e}", closed.max_distance(&spectral)?);
    }

    println!("\n|(N[phi^(t)], phi^(t))| for lambda = 1");
    let powers = [(2, 0), (2, 1), (3, 0), (1, 1)];
    for t in [0.0, 0.5, 2.0, 8.0] {
        print!("t = {t:<4}");
        for (p, q) in powers {
            let v = nonlinear_pairing(WindowSpec::new(0.25, 1.0, t, 1)?, NonlinearityPowers::new(p, q)?)?;
            print!("  ({p},{q}): {:.6}", v.norm());
        }
        println!();
    }
    Ok(())
}
