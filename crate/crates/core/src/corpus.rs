//! Named test signals with known `H^s` wave front sets.
//!
//! Each singular profile is singular at a single point `c` (the `center`) in
//! both frequency directions, and the Fourier transform of its singular part
//! decays like `|xi|^{-a}`. Then `(c, ±1)` lies in `WF_{H^s}` exactly when
//! `s >= a - 1/2`, which is the `threshold` recorded here. In two dimensions
//! a profile `p` becomes `p(x1 - c) e^{-x2^2}`, whose wave front set points in
//! the `±e1` directions only.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::{Field, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Signal {
    /// `e^{-x^2}`
    Gaussian,
    /// `sign(x) e^{-x^2}`, with `sign(0) = 0`.
    StepGaussian,
    /// `|x| e^{-x^2}`
    AbsGaussian,
    /// `x_+^{3/2}` times the bump `exp(1 - 1/(1 - (x/2)^2))`.
    KinkBump,
    /// Unit point mass.
    Dirac,
    /// `e^{i x^2/2} e^{-x^2/9}`
    ChirpedGaussian,
    /// `e^{2 i x} e^{-x^2/2}`
    ModulatedGaussian,
    /// `sech^2(x/2)`, a soliton-like profile with exponential tails.
    WideBump,
}

impl Signal {
    pub const ALL: [Signal; 8] = [
        Signal::Gaussian,
        Signal::StepGaussian,
        Signal::AbsGaussian,
        Signal::KinkBump,
        Signal::Dirac,
        Signal::ChirpedGaussian,
        Signal::ModulatedGaussian,
        Signal::WideBump,
    ];

    /// The six signals whose detector verdicts are compared against truth.
    pub const TRUTH: [Signal; 6] = [
        Signal::Gaussian,
        Signal::StepGaussian,
        Signal::AbsGaussian,
        Signal::KinkBump,
        Signal::Dirac,
        Signal::ChirpedGaussian,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Signal::Gaussian => "gaussian",
            Signal::StepGaussian => "step_gaussian",
            Signal::AbsGaussian => "abs_gaussian",
            Signal::KinkBump => "kink_bump",
            Signal::Dirac => "dirac",
            Signal::ChirpedGaussian => "chirped_gaussian",
            Signal::ModulatedGaussian => "modulated_gaussian",
            Signal::WideBump => "wide_bump",
        }
    }

    pub fn from_name(name: &str) -> Result<Signal> {
        Signal::ALL
            .into_iter()
            .find(|s| s.name() == name)
            .ok_or_else(|| Error::Parse(format!("unknown corpus signal `{name}`")))
    }

    /// Smallest `s` with `(center, ±1)` in `WF_{H^s}`; `None` for smooth signals.
    pub fn threshold(self) -> Option<f64> {
        match self {
            Signal::StepGaussian => Some(0.5),
            Signal::AbsGaussian => Some(1.5),
            Signal::KinkBump => Some(2.0),
            Signal::Dirac => Some(-0.5),
            _ => None,
        }
    }

    /// Whether `(center, ±1)` lies in `WF_{H^s}`.
    pub fn singular_at_level(self, s: f64) -> bool {
        self.threshold().is_some_and(|t| s >= t)
    }

    /// One-dimensional profile at `x` (ignored for the Dirac mass).
    pub fn profile(self, x: f64) -> Complex64 {
        let g = (-x * x).exp();
        let re = |v: f64| Complex64::new(v, 0.0);
        match self {
            Signal::Gaussian => re(g),
            Signal::StepGaussian => {
                let sign = if x > 0.0 {
                    1.0
                } else if x < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                re(sign * g)
            }
            Signal::AbsGaussian => re(x.abs() * g),
            Signal::KinkBump => {
                let r = x / 2.0;
                if x > 0.0 && r < 1.0 {
                    re(x.powf(1.5) * (1.0 - 1.0 / (1.0 - r * r)).exp())
                } else {
                    re(0.0)
                }
            }
            Signal::Dirac => re(0.0),
            Signal::ChirpedGaussian => Complex64::from_polar((-x * x / 9.0).exp(), x * x / 2.0),
            Signal::ModulatedGaussian => Complex64::from_polar((-x * x / 2.0).exp(), 2.0 * x),
            Signal::WideBump => re(1.0 / (x / 2.0).cosh().powi(2)),
        }
    }

    /// The signal translated to `center` along the first axis.
    pub fn field(self, grid: Grid, center: f64) -> Result<Field> {
        if self == Signal::Dirac {
            let mut c = vec![0.0; grid.dim()];
            c[0] = center;
            return Field::dirac(grid, c);
        }
        Ok(Field::from_fn(grid, |x| {
            let tail: f64 = x[1..].iter().map(|v| v * v).sum();
            self.profile(x[0] - center) * (-tail).exp()
        }))
    }
}

/// Random smooth signal: a sum of three modulated, shifted Gaussians.
pub fn random_smooth(grid: Grid, rng: &mut impl Rng) -> Field {
    let terms: Vec<(f64, f64, f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-0.3 * grid.half_width()..0.3 * grid.half_width()),
                rng.gen_range(0.5..2.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(0.0..2.0 * PI),
            )
        })
        .collect();
    Field::from_fn(grid, |x| {
        terms
            .iter()
            .map(|&(amp, shift, width, freq, phase)| {
                let r2: f64 = x.iter().map(|v| (v - shift) * (v - shift)).sum();
                Complex64::from_polar(amp * (-r2 / (2.0 * width * width)).exp(), freq * x[0] + phase)
            })
            .sum()
    })
}

/// Twenty sampled signals: every sampled corpus entry plus seeded random ones.
pub fn identity_corpus(grid: Grid, seed: u64) -> Result<Vec<(String, Field)>> {
    let mut out = Vec::new();
    for s in Signal::ALL.into_iter().filter(|&s| s != Signal::Dirac) {
        out.push((s.name().to_string(), s.field(grid, 0.0)?));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut k = 0;
    while out.len() < 20 {
        out.push((format!("random_{k}"), random_smooth(grid, &mut rng)));
        k += 1;
    }
    Ok(out)
}
