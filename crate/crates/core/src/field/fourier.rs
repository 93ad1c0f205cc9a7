use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{Domain, Field, Grid};
use crate::error::{Error, Result};

/// Unnormalized row-major FFT over every axis of a 1-d or 2-d lattice.
pub struct FftNd {
    points: usize,
    dim: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl FftNd {
    pub fn new(grid: &Grid) -> Self {
        Self::with_size(grid.points_per_axis(), grid.dim())
    }

    pub fn with_size(points: usize, dim: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            points,
            dim,
            forward: planner.plan_fft_forward(points),
            inverse: planner.plan_fft_inverse(points),
        }
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.forward);
    }

    /// Inverse transform without the `1/N` factor.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inverse);
    }

    fn run(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.points;
        debug_assert_eq!(data.len(), n.pow(self.dim as u32));
        // rows are contiguous; rustfft processes consecutive chunks of length n
        plan.process(data);
        if self.dim == 2 {
            let mut column = vec![Complex64::new(0.0, 0.0); n];
            for c in 0..n {
                for r in 0..n {
                    column[r] = data[r * n + c];
                }
                plan.process(&mut column);
                for r in 0..n {
                    data[r * n + c] = column[r];
                }
            }
        }
    }
}

/// Sign `(-1)^k` for centered index `i`, with `k = i - N/2`.
fn parity(i: usize, n: usize) -> f64 {
    if (i + n / 2).is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Permutes between centered order and FFT order along every axis,
/// multiplying by the `e^{i L xi}` phase (`(-1)^k`) per axis.
fn recenter(data: &[Complex64], grid: &Grid, to_fft_order: bool) -> Vec<Complex64> {
    let n = grid.points_per_axis();
    let h = n / 2;
    let mut out = vec![Complex64::new(0.0, 0.0); data.len()];
    // centered i <-> fft index (i + N/2) mod N
    let map = |i: usize| (i + h) % n;
    match grid.dim() {
        1 => {
            for i in 0..n {
                let (src, dst) = if to_fft_order { (i, map(i)) } else { (map(i), i) };
                out[dst] = data[src] * parity(i, n);
            }
        }
        _ => {
            for i in 0..n {
                for j in 0..n {
                    let sign = parity(i, n) * parity(j, n);
                    let c = i * n + j;
                    let f = map(i) * n + map(j);
                    if to_fft_order {
                        out[f] = data[c] * sign;
                    } else {
                        out[c] = data[f] * sign;
                    }
                }
            }
        }
    }
    out
}

/// `sum_j h_j e^{-i y_j . xi_k}` over the dual lattice, centered order.
pub(crate) fn lattice_dft(samples: &[Complex64], grid: &Grid, fft: &FftNd) -> Vec<Complex64> {
    let mut buf = samples.to_vec();
    fft.forward(&mut buf);
    recenter(&buf, grid, false)
}

/// `sum_k F_k e^{i y_j . xi_k}` back onto the spatial lattice.
pub(crate) fn lattice_idft(spectrum: &[Complex64], grid: &Grid, fft: &FftNd) -> Vec<Complex64> {
    let mut buf = recenter(spectrum, grid, true);
    fft.inverse(&mut buf);
    buf
}

/// `(2 pi)^{-n/2} int f(x) e^{-i x xi} dx` on the dual lattice, centered order.
pub fn fourier(f: &Field) -> Result<Field> {
    let grid = *f.grid();
    let samples = match f.domain() {
        Domain::Space => f.samples()?,
        Domain::Frequency => return Err(Error::WrongDomain { expected: "space" }),
    };
    let mut out = lattice_dft(samples, &grid, &FftNd::new(&grid));
    let scale = (grid.spacing() / (2.0 * PI).sqrt()).powi(grid.dim() as i32);
    out.iter_mut().for_each(|z| *z *= scale);
    Ok(Field::spectrum(grid, out))
}

/// Inverse of [`fourier`]: `(2 pi)^{-n/2} int F(xi) e^{i x xi} dxi`.
pub fn inverse_fourier(f: &Field) -> Result<Field> {
    let grid = *f.grid();
    let samples = match f.domain() {
        Domain::Frequency => f.samples()?,
        Domain::Space => return Err(Error::WrongDomain { expected: "frequency" }),
    };
    let mut buf = lattice_idft(samples, &grid, &FftNd::new(&grid));
    let scale = (grid.dual_spacing() / (2.0 * PI).sqrt()).powi(grid.dim() as i32);
    buf.iter_mut().for_each(|z| *z *= scale);
    Field::from_samples(grid, buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn gaussian_pair() {
        let grid = Grid::new(1, 1024, 20.0).unwrap();
        let f = Field::from_real_fn(grid, |x| (-x * x / 2.0).exp());
        let spec = fourier(&f).unwrap();
        let err = spec
            .samples()
            .unwrap()
            .iter()
            .enumerate()
            .map(|(i, z)| (z - (-grid.frequency(i).powi(2) / 2.0).exp()).norm())
            .fold(0.0, f64::max);
        assert!(err <= 1e-10, "{err}");

        let back = inverse_fourier(&spec).unwrap();
        assert!(back.max_distance(&f).unwrap() < 1e-13);
    }

    #[test]
    fn inverse_of_gaussian_spectrum() {
        let grid = Grid::new(1, 1024, 20.0).unwrap();
        let spec = Field::spectrum(
            grid,
            (0..1024).map(|i| c((-grid.frequency(i).powi(2) / 2.0).exp(), 0.0)).collect(),
        );
        let f = inverse_fourier(&spec).unwrap();
        let expect = Field::from_real_fn(grid, |x| (-x * x / 2.0).exp());
        assert!(f.max_distance(&expect).unwrap() < 1e-10);
    }

    #[test]
    fn zero_maps_to_zero() {
        let grid = Grid::new(1, 64, 5.0).unwrap();
        let z = fourier(&Field::zeros(grid)).unwrap();
        assert!(z.samples().unwrap().iter().all(|v| v.norm() == 0.0));
        let back = inverse_fourier(&z).unwrap();
        assert!(back.samples().unwrap().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn translation_phase() {
        let grid = Grid::new(1, 512, 16.0).unwrap();
        let a = 7.0 * grid.spacing();
        let f = Field::from_real_fn(grid, |x| (-x * x).exp() * (1.0 + x));
        let g = Field::from_real_fn(grid, |x| (-(x - a).powi(2)).exp() * (1.0 + x - a));
        let (fs, gs) = (fourier(&f).unwrap(), fourier(&g).unwrap());
        for (i, (u, v)) in fs.samples().unwrap().iter().zip(gs.samples().unwrap()).enumerate() {
            let phase = Complex64::from_polar(1.0, -a * grid.frequency(i));
            assert!((v - phase * u).norm() < 1e-13);
        }
    }

    #[test]
    fn two_dimensional_gaussian() {
        let grid = Grid::new(2, 64, 8.0).unwrap();
        let f = Field::from_fn(grid, |x| c((-(x[0] * x[0] + x[1] * x[1]) / 2.0).exp(), 0.0));
        let spec = fourier(&f).unwrap();
        for (i, z) in spec.samples().unwrap().iter().enumerate() {
            let k = grid.wavevector(i);
            let expect = (-(k[0] * k[0] + k[1] * k[1]) / 2.0).exp();
            assert!((z - expect).norm() < 1e-10);
        }
        let back = inverse_fourier(&spec).unwrap();
        assert!(back.max_distance(&f).unwrap() < 1e-12);
    }

    #[test]
    fn domain_tags_are_enforced() {
        let grid = Grid::new(1, 16, 2.0).unwrap();
        let f = Field::zeros(grid);
        assert!(inverse_fourier(&f).is_err());
        let s = fourier(&f).unwrap();
        assert!(fourier(&s).is_err());
    }

    fn band_limited(grid: Grid, coeffs: &[(f64, f64)]) -> Field {
        Field::from_real_fn(grid, |_| 0.0)
            .map_with_position(|x, _| {
                let env = (-x[0] * x[0] / 8.0).exp();
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, &(re, im))| c(re, im) * Complex64::from_polar(env, k as f64 * x[0]))
                    .sum()
            })
            .unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn parseval_and_round_trip(coeffs in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..6)) {
            let grid = Grid::new(1, 512, 24.0).unwrap();
            let f = band_limited(grid, &coeffs);
            let spec = fourier(&f).unwrap();
            let nf = f.l2_norm().unwrap();
            prop_assume!(nf > 1e-3);
            prop_assert!((spec.l2_norm().unwrap() - nf).abs() <= 1e-12 * nf);
            let back = inverse_fourier(&spec).unwrap();
            prop_assert!(back.relative_l2_distance(&f).unwrap() <= 1e-12);
        }

        #[test]
        fn linearity(
            a in (-2.0f64..2.0, -2.0f64..2.0),
            b in (-2.0f64..2.0, -2.0f64..2.0),
            shift in -3.0f64..3.0,
        ) {
            let grid = Grid::new(1, 256, 16.0).unwrap();
            let f = Field::from_real_fn(grid, |x| (-(x - shift).powi(2)).exp());
            let g = Field::from_real_fn(grid, |x| x.sin() * (-x * x / 3.0).exp());
            let (a, b) = (c(a.0, a.1), c(b.0, b.1));
            let lhs = fourier(&f.combine(a, &g, b).unwrap()).unwrap();
            let rhs = fourier(&f).unwrap().combine(a, &fourier(&g).unwrap(), b).unwrap();
            prop_assert!(lhs.max_distance(&rhs).unwrap() < 1e-12);
            let h = Field::from_real_fn(grid, |x| (-x * x).exp());
            let ip_lhs = crate::field::inner_product(&f.combine(a, &g, b).unwrap(), &h).unwrap();
            let ip_rhs = a * crate::field::inner_product(&f, &h).unwrap()
                + b * crate::field::inner_product(&g, &h).unwrap();
            prop_assert!((ip_lhs - ip_rhs).norm() < 1e-12);
        }
    }
}
