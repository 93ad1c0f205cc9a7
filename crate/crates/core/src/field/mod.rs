//! Sampled complex fields on a uniform periodic lattice.
//!
//! A [`Grid`] covers `[-L, L)` along each axis with `N` points. Its dual
//! frequency lattice is `k * pi / L` for `k = -N/2 .. N/2 - 1`, stored in
//! centered order (most negative frequency first). Fields carry a
//! [`Domain`] tag so that spatial samples and spectra cannot be mixed up.

mod fourier;
mod io;

pub use fourier::{fourier, inverse_fourier, FftNd};
pub(crate) use fourier::{lattice_dft, lattice_idft};
pub use io::{read_field, write_field};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Uniform periodic sampling lattice in one or two dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    points: usize,
    half_width: f64,
}

impl Grid {
    pub fn new(dim: usize, points_per_axis: usize, half_width: f64) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::Sizing(format!("dimension must be 1 or 2, got {dim}")));
        }
        if points_per_axis < 8 || !points_per_axis.is_power_of_two() {
            return Err(Error::Sizing(format!(
                "points per axis must be a power of two >= 8, got {points_per_axis}"
            )));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::Sizing(format!("half width must be positive, got {half_width}")));
        }
        Ok(Self { dim, points: points_per_axis, half_width })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.points
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Total number of lattice sites.
    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    /// Spacing of the dual frequency lattice, `pi / L`.
    pub fn dual_spacing(&self) -> f64 {
        std::f64::consts::PI / self.half_width
    }

    pub fn nyquist(&self) -> f64 {
        std::f64::consts::PI / self.spacing()
    }

    /// Coordinate of lattice index `i` along one axis. Indices outside
    /// `0..N` extend the lattice linearly (no wrapping).
    pub fn coord(&self, i: i64) -> f64 {
        -self.half_width + i as f64 * self.spacing()
    }

    /// Centered frequency of dual index `i` in `0..N`.
    pub fn frequency(&self, i: usize) -> f64 {
        (i as f64 - (self.points / 2) as f64) * self.dual_spacing()
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.points as i64).map(|i| self.coord(i)).collect()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.frequency(i)).collect()
    }

    /// Volume element of the spatial lattice, `dx^n`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Volume element of the dual lattice, `(pi/L)^n`.
    pub fn dual_cell_volume(&self) -> f64 {
        self.dual_spacing().powi(self.dim as i32)
    }

    /// Splits a flat row-major index into per-axis indices.
    pub fn unflatten(&self, flat: usize) -> [usize; 2] {
        match self.dim {
            1 => [flat, 0],
            _ => [flat / self.points, flat % self.points],
        }
    }

    /// Spatial position of a flat index.
    pub fn position(&self, flat: usize) -> Vec<f64> {
        let idx = self.unflatten(flat);
        (0..self.dim).map(|a| self.coord(idx[a] as i64)).collect()
    }

    /// Frequency vector of a flat index on the dual lattice.
    pub fn wavevector(&self, flat: usize) -> Vec<f64> {
        let idx = self.unflatten(flat);
        (0..self.dim).map(|a| self.frequency(idx[a])).collect()
    }

    pub(crate) fn check_same(&self, other: &Grid) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!("{self:?} vs {other:?}")));
        }
        Ok(())
    }
}

/// Whether samples live on the spatial lattice or the dual lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Space,
    Frequency,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldData {
    Sampled(Vec<Complex64>),
    /// Symbolic point mass at `center`; never sampled.
    DiracDelta(Vec<f64>),
}

/// Complex function on a [`Grid`], or a symbolic Dirac delta.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    domain: Domain,
    data: FieldData,
}

impl Field {
    pub fn from_samples(grid: Grid, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::Sizing(format!(
                "{} samples for a grid of {} sites",
                samples.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, domain: Domain::Space, data: FieldData::Sampled(samples) })
    }

    pub(crate) fn spectrum(grid: Grid, samples: Vec<Complex64>) -> Self {
        debug_assert_eq!(samples.len(), grid.len());
        Self { grid, domain: Domain::Frequency, data: FieldData::Sampled(samples) }
    }

    /// Samples `f` at every lattice position.
    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let samples = (0..grid.len()).map(|i| f(&grid.position(i))).collect();
        Self { grid, domain: Domain::Space, data: FieldData::Sampled(samples) }
    }

    /// Real-valued convenience for one-dimensional grids.
    pub fn from_real_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(grid, |x| Complex64::new(f(x[0]), 0.0))
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            domain: Domain::Space,
            data: FieldData::Sampled(vec![Complex64::new(0.0, 0.0); grid.len()]),
        }
    }

    pub fn dirac(grid: Grid, center: Vec<f64>) -> Result<Self> {
        if center.len() != grid.dim() {
            return Err(Error::Sizing(format!(
                "delta center has {} coordinates on a {}-d grid",
                center.len(),
                grid.dim()
            )));
        }
        Ok(Self { grid, domain: Domain::Space, data: FieldData::DiracDelta(center) })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn data(&self) -> &FieldData {
        &self.data
    }

    pub fn is_delta(&self) -> bool {
        matches!(self.data, FieldData::DiracDelta(_))
    }

    pub fn delta_center(&self) -> Option<&[f64]> {
        match &self.data {
            FieldData::DiracDelta(c) => Some(c),
            FieldData::Sampled(_) => None,
        }
    }

    pub fn samples(&self) -> Result<&[Complex64]> {
        match &self.data {
            FieldData::Sampled(s) => Ok(s),
            FieldData::DiracDelta(_) => Err(Error::DeltaUnsupported("samples")),
        }
    }

    pub fn samples_mut(&mut self) -> Result<&mut [Complex64]> {
        match &mut self.data {
            FieldData::Sampled(s) => Ok(s),
            FieldData::DiracDelta(_) => Err(Error::DeltaUnsupported("samples")),
        }
    }

    pub fn into_samples(self) -> Result<Vec<Complex64>> {
        match self.data {
            FieldData::Sampled(s) => Ok(s),
            FieldData::DiracDelta(_) => Err(Error::DeltaUnsupported("samples")),
        }
    }

    pub(crate) fn space_samples(&self) -> Result<&[Complex64]> {
        if self.domain != Domain::Space {
            return Err(Error::WrongDomain { expected: "space" });
        }
        self.samples()
    }

    fn cell(&self) -> f64 {
        match self.domain {
            Domain::Space => self.grid.cell_volume(),
            Domain::Frequency => self.grid.dual_cell_volume(),
        }
    }

    /// Quadrature L2 norm on whichever lattice the field lives on.
    pub fn l2_norm(&self) -> Result<f64> {
        let s = self.samples()?;
        Ok((s.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.cell()).sqrt())
    }

    pub fn max_abs(&self) -> Result<f64> {
        Ok(self.samples()?.iter().map(|z| z.norm()).fold(0.0, f64::max))
    }

    /// Pointwise map, keeping grid and domain.
    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Result<Self> {
        let s = self.samples()?.iter().map(|&z| f(z)).collect();
        Ok(Self { grid: self.grid, domain: self.domain, data: FieldData::Sampled(s) })
    }

    /// Pointwise map that also sees the lattice position (spatial fields only).
    pub fn map_with_position(&self, f: impl Fn(&[f64], Complex64) -> Complex64) -> Result<Self> {
        let s = self
            .space_samples()?
            .iter()
            .enumerate()
            .map(|(i, &z)| f(&self.grid.position(i), z))
            .collect();
        Ok(Self { grid: self.grid, domain: Domain::Space, data: FieldData::Sampled(s) })
    }

    /// `alpha * self + beta * other`.
    pub fn combine(&self, alpha: Complex64, other: &Field, beta: Complex64) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        if self.domain != other.domain {
            return Err(Error::WrongDomain { expected: "matching domains" });
        }
        let s = self
            .samples()?
            .iter()
            .zip(other.samples()?)
            .map(|(&a, &b)| alpha * a + beta * b)
            .collect();
        Ok(Self { grid: self.grid, domain: self.domain, data: FieldData::Sampled(s) })
    }

    pub fn conj(&self) -> Result<Self> {
        self.map(|z| z.conj())
    }

    /// Maximum pointwise distance to another sampled field.
    pub fn max_distance(&self, other: &Field) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        Ok(self
            .samples()?
            .iter()
            .zip(other.samples()?)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Relative L2 distance `||self - other|| / ||other||`.
    pub fn relative_l2_distance(&self, other: &Field) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        let (num, den) = self
            .samples()?
            .iter()
            .zip(other.samples()?)
            .fold((0.0, 0.0), |(n, d), (a, b)| (n + (a - b).norm_sqr(), d + b.norm_sqr()));
        Ok((num / den).sqrt())
    }
}

/// Exponents of the weighted Sobolev space `H^{s,m}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SobolevParams {
    pub s: f64,
    pub m: f64,
}

/// Quadrature of `int f conj(g) dx`; conjugate-linear in the second slot.
pub fn inner_product(f: &Field, g: &Field) -> Result<Complex64> {
    f.grid.check_same(&g.grid)?;
    if f.domain != g.domain {
        return Err(Error::WrongDomain { expected: "matching domains" });
    }
    let sum: Complex64 = f.samples()?.iter().zip(g.samples()?).map(|(a, b)| a * b.conj()).sum();
    Ok(sum * f.cell())
}

/// `<x> = (1 + |x|^2)^{1/2}`.
pub fn japanese_bracket(v: &[f64]) -> f64 {
    (1.0 + v.iter().map(|c| c * c).sum::<f64>()).sqrt()
}

/// `|| <xi>^s F[<x>^m f] ||_{L2}` by spectral multiplier.
pub fn weighted_sobolev_norm(f: &Field, params: SobolevParams) -> Result<f64> {
    if !(params.s.is_finite() && params.m.is_finite()) {
        return Err(Error::Parameter("Sobolev exponents must be finite".into()));
    }
    let weighted = f.map_with_position(|x, z| z * japanese_bracket(x).powf(params.m))?;
    let spec = fourier(&weighted)?;
    let grid = *f.grid();
    let s = spec.samples()?;
    let sum: f64 = s
        .iter()
        .enumerate()
        .map(|(i, z)| japanese_bracket(&grid.wavevector(i)).powf(2.0 * params.s) * z.norm_sqr())
        .sum();
    Ok((sum * grid.dual_cell_volume()).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn gauss(grid: Grid) -> Field {
        Field::from_real_fn(grid, |x| (-x * x / 2.0).exp())
    }

    #[test]
    fn grid_arithmetic() {
        let g = Grid::new(1, 8, 4.0).unwrap();
        assert_eq!(g.spacing(), 1.0);
        assert!((g.nyquist() - PI).abs() < 1e-15);
        let g = Grid::new(1, 1024, 20.0).unwrap();
        assert_eq!(g.spacing(), 0.0390625);
        assert_eq!(g.spacing() * 1024.0, 40.0);
        assert!((g.frequency(0) + 512.0 * PI / 20.0).abs() < 1e-12);
        assert!((g.frequency(1023) - 511.0 * PI / 20.0).abs() < 1e-12);
    }

    #[test]
    fn grid_rejects_bad_sizes() {
        assert!(matches!(Grid::new(1, 7, 4.0), Err(Error::Sizing(_))));
        assert!(matches!(Grid::new(1, 4, 4.0), Err(Error::Sizing(_))));
        assert!(matches!(Grid::new(1, 8, 0.0), Err(Error::Sizing(_))));
        assert!(matches!(Grid::new(1, 8, -1.0), Err(Error::Sizing(_))));
        assert!(matches!(Grid::new(3, 8, 1.0), Err(Error::Sizing(_))));
    }

    #[test]
    fn gaussian_pairings() {
        let grid = Grid::new(1, 1024, 20.0).unwrap();
        let phi = gauss(grid);
        let ip = inner_product(&phi, &phi).unwrap();
        assert!((ip.re - PI.sqrt()).abs() < 1e-12 && ip.im.abs() < 1e-15);
        let cube = phi.map(|z| z * z * z).unwrap();
        let ip = inner_product(&phi, &cube).unwrap();
        assert!((ip.re - (PI / 2.0).sqrt()).abs() < 1e-12);
        let zero = Field::zeros(grid);
        assert_eq!(inner_product(&phi, &zero).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn inner_product_conjugates_second_slot() {
        let grid = Grid::new(1, 256, 10.0).unwrap();
        let phi = gauss(grid);
        let i_phi = phi.map(|z| z * Complex64::i()).unwrap();
        let ip = inner_product(&phi, &i_phi).unwrap();
        assert!((ip - Complex64::new(0.0, -PI.sqrt())).norm() < 1e-12);
    }

    #[test]
    fn inner_product_grid_mismatch() {
        let a = gauss(Grid::new(1, 64, 10.0).unwrap());
        let b = gauss(Grid::new(1, 128, 10.0).unwrap());
        assert!(matches!(inner_product(&a, &b), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn sobolev_norms() {
        let grid = Grid::new(1, 1024, 20.0).unwrap();
        let phi = gauss(grid);
        let n0 = weighted_sobolev_norm(&phi, SobolevParams { s: 0.0, m: 0.0 }).unwrap();
        assert!((n0 - phi.l2_norm().unwrap()).abs() < 1e-12);
        // int (1 + xi^2) e^{-xi^2} dxi = sqrt(pi) * 3/2
        let n1 = weighted_sobolev_norm(&phi, SobolevParams { s: 1.0, m: 0.0 }).unwrap();
        assert!((n1 - (PI.sqrt() * 1.5).sqrt()).abs() < 1e-10, "{n1}");
        let zero = Field::zeros(grid);
        assert_eq!(weighted_sobolev_norm(&zero, SobolevParams { s: 2.0, m: 1.0 }).unwrap(), 0.0);
    }

    #[test]
    fn sobolev_norm_monotone_in_s() {
        let grid = Grid::new(1, 512, 16.0).unwrap();
        let f = Field::from_real_fn(grid, |x| (x - 1.0).tanh() * (-x * x / 4.0).exp());
        let mut last = 0.0;
        for k in 0..12 {
            let s = -1.0 + 0.4 * k as f64;
            let n = weighted_sobolev_norm(&f, SobolevParams { s, m: 0.5 }).unwrap();
            assert!(n >= last);
            last = n;
        }
    }

    #[test]
    fn delta_has_no_samples() {
        let grid = Grid::new(1, 64, 4.0).unwrap();
        let d = Field::dirac(grid, vec![0.5]).unwrap();
        assert!(d.samples().is_err());
        assert!(matches!(fourier(&d), Err(Error::DeltaUnsupported(_))));
        assert!(Field::dirac(grid, vec![0.0, 1.0]).is_err());
    }
}
