use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{Field, Grid};
use crate::windows::WindowSpec;

/// Relative amplitude below which window tails are dropped from sums.
pub(crate) const TAIL: f64 = 1e-17;

/// Base profiles used to test window independence of the detectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WindowShape {
    /// `e^{-x^2/2}`
    Gaussian,
    /// `x e^{-x^2/2}`, orthogonal to the Gaussian.
    OddGaussian,
    /// `(2x^2 - 1) e^{-x^2/2}`
    Hermite2,
    /// `exp(1 - 1/(1 - (x/R)^2))` on `|x| < R`, zero outside.
    Bump { radius: f64 },
    /// `e^{i c x^2/2} e^{-x^2/2}`
    ChirpedGaussian { chirp: f64 },
}

impl WindowShape {
    /// The five profiles used throughout the test corpus.
    pub fn corpus() -> [WindowShape; 5] {
        [
            WindowShape::Gaussian,
            WindowShape::OddGaussian,
            WindowShape::Hermite2,
            WindowShape::Bump { radius: 4.0 },
            WindowShape::ChirpedGaussian { chirp: 1.0 },
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            WindowShape::Gaussian => "gaussian",
            WindowShape::OddGaussian => "odd_gaussian",
            WindowShape::Hermite2 => "hermite2",
            WindowShape::Bump { .. } => "bump",
            WindowShape::ChirpedGaussian { .. } => "chirped_gaussian",
        }
    }

    pub fn from_name(name: &str) -> Option<WindowShape> {
        WindowShape::corpus().into_iter().find(|w| w.name() == name)
    }

    pub fn value(&self, x: f64) -> Complex64 {
        let g = (-x * x / 2.0).exp();
        match *self {
            WindowShape::Gaussian => Complex64::new(g, 0.0),
            WindowShape::OddGaussian => Complex64::new(x * g, 0.0),
            WindowShape::Hermite2 => Complex64::new((2.0 * x * x - 1.0) * g, 0.0),
            WindowShape::Bump { radius } => {
                let r = x / radius;
                if r.abs() < 1.0 {
                    Complex64::new((1.0 - 1.0 / (1.0 - r * r)).exp(), 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
            WindowShape::ChirpedGaussian { chirp } => Complex64::from_polar(g, chirp * x * x / 2.0),
        }
    }

    /// Radius beyond which `|value| < TAIL` (generous for the polynomial factors).
    fn radius(&self) -> f64 {
        match *self {
            WindowShape::Bump { radius } => radius,
            _ => (2.0 * (1.0 / TAIL).ln()).sqrt() + 2.0,
        }
    }
}

/// An analysing window for the wave packet transform.
#[derive(Debug, Clone, PartialEq)]
pub enum Window {
    /// `phi_lambda^(t)` in closed form.
    Evolved(WindowSpec),
    /// `lambda^{nb/2} psi(lambda^b x)` for a base profile `psi` (product over axes in 2-d).
    Dilated { shape: WindowShape, b: f64, lambda: f64 },
    /// Samples on a grid, centred so that lattice index `N/2` is the origin.
    Sampled(Field),
}

impl Window {
    pub fn gaussian(b: f64, lambda: f64, dim: usize) -> Result<Window> {
        Ok(Window::Evolved(WindowSpec::new(b, lambda, 0.0, dim)?))
    }

    pub fn label(&self) -> String {
        match self {
            Window::Evolved(s) => format!("evolved_gaussian b={} lambda={} t={}", s.b, s.lambda, s.t),
            Window::Dilated { shape, b, lambda } => format!("{} b={b} lambda={lambda}", shape.name()),
            Window::Sampled(_) => "sampled".to_string(),
        }
    }

    pub fn lambda(&self) -> Option<f64> {
        match self {
            Window::Evolved(s) => Some(s.lambda),
            Window::Dilated { lambda, .. } => Some(*lambda),
            Window::Sampled(_) => None,
        }
    }

    /// Value at an arbitrary offset `y - x`. Sampled windows only answer on
    /// their lattice.
    pub fn value(&self, offset: &[f64]) -> Result<Complex64> {
        match self {
            Window::Evolved(spec) => Ok(spec.value(offset)),
            Window::Dilated { shape, b, lambda } => {
                let s = lambda.powf(*b);
                let amp = s.powf(offset.len() as f64 / 2.0);
                Ok(offset.iter().fold(Complex64::new(amp, 0.0), |acc, &o| acc * shape.value(s * o)))
            }
            Window::Sampled(w) => {
                let g = w.grid();
                let n = g.points_per_axis() as i64;
                let mut flat = 0usize;
                for &o in offset {
                    let d = lattice_index(o, g.spacing())
                        .ok_or_else(|| Error::InvalidSpec("sampled window queried off its lattice".into()))?;
                    let i = d + n / 2;
                    if !(0..n).contains(&i) {
                        return Ok(Complex64::new(0.0, 0.0));
                    }
                    flat = flat * n as usize + i as usize;
                }
                Ok(w.samples()?[flat])
            }
        }
    }

    /// Value at lattice offset `d` of a 1-d grid with spacing `dx`.
    pub(crate) fn offset_value(&self, d: i64, dx: f64) -> Complex64 {
        match self {
            Window::Sampled(w) => {
                let n = w.grid().points_per_axis() as i64;
                let i = d + n / 2;
                if (0..n).contains(&i) {
                    w.samples().expect("sampled window")[i as usize]
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
            _ => self.value(&[d as f64 * dx]).expect("analytic window"),
        }
    }

    /// Spatial radius outside which the window is negligible.
    pub fn radius(&self) -> f64 {
        match self {
            Window::Evolved(spec) => spec.radius(TAIL),
            Window::Dilated { shape, b, lambda } => shape.radius() / lambda.powf(*b),
            Window::Sampled(w) => w.grid().half_width(),
        }
    }

    /// Lattice offsets `-R..=R` that can carry non-negligible values.
    pub(crate) fn lattice_radius(&self, grid: &Grid) -> i64 {
        match self {
            Window::Sampled(w) => w.grid().points_per_axis() as i64 / 2,
            _ => (self.radius() / grid.spacing()).ceil() as i64,
        }
    }

    /// Rejects windows that the grid cannot resolve.
    pub fn check(&self, grid: &Grid) -> Result<()> {
        match self {
            Window::Evolved(spec) => {
                spec.validate()?;
                if spec.dim != grid.dim() {
                    return Err(Error::InvalidSpec("window and grid dimensions differ".into()));
                }
                spec.check_resolved(grid)
            }
            Window::Dilated { b, lambda, .. } => {
                WindowSpec::new(*b, *lambda, 0.0, grid.dim())?.check_resolved(grid)
            }
            Window::Sampled(w) => {
                if w.grid().spacing() != grid.spacing() || w.grid().dim() != grid.dim() {
                    return Err(Error::GridMismatch("window lattice differs from field lattice".into()));
                }
                w.space_samples().map(|_| ())
            }
        }
    }

    /// Samples the window on `grid`, centred at the origin.
    pub fn sample(&self, grid: Grid) -> Result<Field> {
        self.check(&grid)?;
        match self {
            Window::Sampled(w) => {
                grid.check_same(w.grid())?;
                Ok(w.clone())
            }
            _ => {
                let samples = (0..grid.len())
                    .map(|i| self.value(&grid.position(i)))
                    .collect::<Result<Vec<_>>>()?;
                Field::from_samples(grid, samples)
            }
        }
    }

    /// `‖window‖_{L2}`: exact for the Gaussian family, quadrature otherwise.
    pub fn l2_norm(&self, grid: &Grid) -> f64 {
        match self {
            Window::Evolved(spec) => PI.powf(spec.dim as f64 / 4.0),
            Window::Sampled(w) => w.l2_norm().unwrap_or(0.0),
            Window::Dilated { shape, .. } => {
                // dilation preserves the L2 norm; integrate the base profile finely
                let r = shape.radius();
                let h = (grid.spacing()).min(1e-3);
                let steps = (2.0 * r / h).ceil() as i64;
                let s: f64 = (0..=steps).map(|k| shape.value(-r + k as f64 * h).norm_sqr()).sum();
                (s * h).powf(grid.dim() as f64 / 2.0)
            }
        }
    }
}

/// Integer `k` with `value = k * spacing`, if there is one.
pub(crate) fn lattice_index(value: f64, spacing: f64) -> Option<i64> {
    let k = (value / spacing).round();
    ((value / spacing - k).abs() < 1e-9).then_some(k as i64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_vanish_beyond_radius() {
        for shape in WindowShape::corpus() {
            let r = shape.radius();
            assert!(shape.value(r).norm() < TAIL, "{}", shape.name());
            assert!(shape.value(0.3).norm() > 0.0 || shape.value(1.0).norm() > 0.0);
        }
    }

    #[test]
    fn dilated_gaussian_matches_closed_form() {
        let d = Window::Dilated { shape: WindowShape::Gaussian, b: 0.25, lambda: 16.0 };
        let e = Window::gaussian(0.25, 16.0, 1).unwrap();
        for &x in &[0.0, 0.3, -1.2] {
            assert!((d.value(&[x]).unwrap() - e.value(&[x]).unwrap()).norm() < 1e-15);
        }
        let grid = Grid::new(1, 1024, 20.0).unwrap();
        assert!((d.l2_norm(&grid) - PI.powf(0.25)).abs() < 1e-9);
    }

    #[test]
    fn sampled_window_lookup() {
        let grid = Grid::new(1, 64, 8.0).unwrap();
        let field = Field::from_real_fn(grid, |x| x);
        let w = Window::Sampled(field);
        assert!((w.value(&[0.5]).unwrap().re - 0.5).abs() < 1e-15);
        assert!(w.value(&[0.1]).is_err());
        assert_eq!(w.value(&[100.0]).unwrap(), Complex64::new(0.0, 0.0));
        assert_eq!(w.offset_value(2, 0.25), Complex64::new(0.5, 0.0));
    }
}
