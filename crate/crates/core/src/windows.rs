//! The dilated Gaussian window `phi_lambda(x) = lambda^{nb/2} phi(lambda^b x)`
//! with `phi(x) = e^{-|x|^2/2}`, its free Schrödinger evolution, and closed
//! forms built on top of it.
//!
//! Writing `a = lambda^{2b}`, the evolved window is
//!
//! ```text
//! phi_lambda^(t)(x) = lambda^{nb/2} (1 + i a t)^{-n/2} exp(-a |x|^2 / (2 (1 + i a t)))
//! ```
//!
//! with the principal branch of the power. Every closed form below is
//! derived from that expression by completing the square.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{Field, Grid};

/// Parameters of `phi_lambda^(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSpec {
    pub b: f64,
    pub lambda: f64,
    pub t: f64,
    pub dim: usize,
}

impl WindowSpec {
    pub fn new(b: f64, lambda: f64, t: f64, dim: usize) -> Result<Self> {
        let spec = Self { b, lambda, t, dim };
        spec.validate()?;
        Ok(spec)
    }

    /// The undilated, unevolved Gaussian `e^{-|x|^2/2}`.
    pub fn base(dim: usize) -> Self {
        Self { b: 0.25, lambda: 1.0, t: 0.0, dim }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b > 0.0 && self.b < 1.0) {
            return Err(Error::InvalidSpec(format!("b must lie in (0, 1), got {}", self.b)));
        }
        if !(self.lambda.is_finite() && self.lambda >= 1.0) {
            return Err(Error::InvalidSpec(format!("lambda must be >= 1, got {}", self.lambda)));
        }
        if !self.t.is_finite() {
            return Err(Error::InvalidSpec("t must be finite".into()));
        }
        if self.dim != 1 && self.dim != 2 {
            return Err(Error::InvalidSpec(format!("dim must be 1 or 2, got {}", self.dim)));
        }
        Ok(())
    }

    pub fn with_time(self, t: f64) -> Self {
        Self { t, ..self }
    }

    pub fn with_lambda(self, lambda: f64) -> Self {
        Self { lambda, ..self }
    }

    /// `a = lambda^{2b}`, the inverse squared width at `t = 0`.
    pub fn a(&self) -> f64 {
        self.lambda.powf(2.0 * self.b)
    }

    /// `lambda^{nb/2} (1 + i a t)^{-n/2}`.
    fn amplitude(&self) -> Complex64 {
        let n = self.dim as f64;
        let z = Complex64::new(1.0, self.a() * self.t);
        self.lambda.powf(n * self.b / 2.0) * z.powf(-n / 2.0)
    }

    /// `a / (1 + i a t)`: the complex Gaussian coefficient.
    fn alpha(&self) -> Complex64 {
        self.a() / Complex64::new(1.0, self.a() * self.t)
    }

    /// Closed-form value at a point.
    pub fn value(&self, x: &[f64]) -> Complex64 {
        let r2: f64 = x.iter().map(|c| c * c).sum();
        self.amplitude() * (-self.alpha() * r2 / 2.0).exp()
    }

    /// Largest `|x|` at which `|phi_lambda^(t)|` still exceeds `tol` times its peak.
    pub fn radius(&self, tol: f64) -> f64 {
        // |phi| ~ exp(-a |x|^2 / (2 (1 + a^2 t^2)))
        let a = self.a();
        ((1.0 + a * a * self.t * self.t) / a * 2.0 * (1.0 / tol).ln()).sqrt()
    }

    /// Errors when the window oscillates or decays faster than the lattice resolves.
    pub fn check_resolved(&self, grid: &Grid) -> Result<()> {
        let r = self.lambda.powf(self.b) * grid.spacing();
        if r > 0.5 {
            return Err(Error::Resolution(format!(
                "lambda^b * dx = {r:.3} exceeds 0.5 (lambda = {}, b = {}, dx = {})",
                self.lambda,
                self.b,
                grid.spacing()
            )));
        }
        Ok(())
    }
}

/// Powers of the nonlinearity `N[u] = u^p conj(u)^q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NonlinearityPowers {
    pub p: u32,
    pub q: u32,
}

impl NonlinearityPowers {
    pub fn new(p: u32, q: u32) -> Result<Self> {
        if p + q == 0 {
            return Err(Error::Parameter("p + q must be at least 1".into()));
        }
        Ok(Self { p, q })
    }

    pub fn apply(&self, z: Complex64) -> Complex64 {
        z.powu(self.p) * z.conj().powu(self.q)
    }

    /// `p = q + 1`: the flow `i u_t = N[u]` preserves `|u|` pointwise.
    pub fn is_gauge_invariant(&self) -> bool {
        self.p == self.q + 1
    }

    pub fn degree(&self) -> u32 {
        self.p + self.q
    }
}

impl std::fmt::Display for NonlinearityPowers {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "p={},q={}", self.p, self.q)
    }
}

/// Samples `phi_lambda^(t)` on `grid`.
pub fn evaluate_window(spec: WindowSpec, grid: Grid) -> Result<Field> {
    spec.validate()?;
    if spec.dim != grid.dim() {
        return Err(Error::InvalidSpec(format!(
            "window dim {} on a {}-d grid",
            spec.dim,
            grid.dim()
        )));
    }
    spec.check_resolved(&grid)?;
    Ok(Field::from_fn(grid, |x| spec.value(x)))
}

/// `W_phi[phi](x, xi) = pi^{n/2} e^{-|x|^2/4 - |xi|^2/4 - i x.xi/2}` for `phi = e^{-|x|^2/2}`.
pub fn gaussian_self_wpt(x: &[f64], xi: &[f64]) -> Complex64 {
    let n = x.len() as f64;
    let x2: f64 = x.iter().map(|v| v * v).sum();
    let k2: f64 = xi.iter().map(|v| v * v).sum();
    let dot: f64 = x.iter().zip(xi).map(|(a, b)| a * b).sum();
    PI.powf(n / 2.0) * Complex64::new(-(x2 + k2) / 4.0, -dot / 2.0).exp()
}

/// `W_{phi_lambda^(t)}[phi_lambda^(t)](x, xi)` in closed form, from the scaling
/// identity `W_{phi_l}[phi_l](x, xi) = W_phi[phi](l^b x, l^{-b} xi)` and the
/// evolution covariance `W_{U g}[U f](x, xi) = e^{-i|xi|^2 t/2} W_g f(x - t xi, xi)`.
pub fn window_self_wpt(spec: WindowSpec, x: &[f64], xi: &[f64]) -> Complex64 {
    let s = spec.lambda.powf(spec.b);
    let k2: f64 = xi.iter().map(|v| v * v).sum();
    let shifted: Vec<f64> = x.iter().zip(xi).map(|(x, k)| s * (x - spec.t * k)).collect();
    let scaled: Vec<f64> = xi.iter().map(|k| k / s).collect();
    Complex64::from_polar(1.0, -k2 * spec.t / 2.0) * gaussian_self_wpt(&shifted, &scaled)
}

/// `(phi_lambda^(t), N[phi_lambda^(t)]) = int phi^{1+q} conj(phi)^p dx`, exactly.
///
/// The integrand is `A^{1+q} conj(A)^p exp(-kappa |x|^2 / 2)` with
/// `kappa = (1+q) alpha + p conj(alpha)`, whose real part
/// `(p+q+1) a / (1 + a^2 t^2)` is positive, so the integral is `(2 pi / kappa)^{n/2}`.
pub fn nonlinear_pairing(spec: WindowSpec, powers: NonlinearityPowers) -> Result<Complex64> {
    spec.validate()?;
    let amp = spec.amplitude();
    let alpha = spec.alpha();
    let kappa = (1 + powers.q) as f64 * alpha + powers.p as f64 * alpha.conj();
    let n = spec.dim as f64;
    let gauss = (2.0 * PI / kappa).powf(n / 2.0);
    Ok(amp.powu(1 + powers.q) * amp.conj().powu(powers.p) * gauss)
}

/// Which lower-bound regime a `(lambda, t)` sample belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundRegime {
    /// `|t| <= lambda^{-(p+q) n b}`, bound `lambda^{nb(p+q-1)/2}`.
    Inner,
    /// `lambda^{-(p+q) n b} <= |t| <= t_max`, bound `lambda^{-nb(p+q+1)/2}`.
    Outer,
}

impl BoundRegime {
    pub fn label(&self) -> &'static str {
        match self {
            BoundRegime::Inner => "inner",
            BoundRegime::Outer => "outer",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairingSample {
    pub lambda: f64,
    pub t: f64,
    pub abs_pairing: f64,
    pub regime: BoundRegime,
    pub bound: f64,
    pub ratio: f64,
}

/// Sweep of `|(phi, N[phi])|` against the two regime bounds.
#[derive(Debug, Clone)]
pub struct PairingBoundReport {
    pub powers: NonlinearityPowers,
    pub b: f64,
    pub dim: usize,
    pub t_max: f64,
    pub samples: Vec<PairingSample>,
}

impl PairingBoundReport {
    /// Empirical constant: smallest ratio over all samples in a regime.
    pub fn constant(&self, regime: BoundRegime) -> f64 {
        self.constant_up_to(regime, f64::INFINITY)
    }

    /// Smallest ratio over samples with `lambda <= lambda_max`.
    pub fn constant_up_to(&self, regime: BoundRegime, lambda_max: f64) -> f64 {
        self.samples
            .iter()
            .filter(|s| s.regime == regime && s.lambda <= lambda_max * (1.0 + 1e-12))
            .map(|s| s.ratio)
            .fold(f64::INFINITY, f64::min)
    }

    /// Per-lambda minimum ratio in a regime, in lambda order.
    pub fn per_lambda(&self, regime: BoundRegime) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for s in self.samples.iter().filter(|s| s.regime == regime) {
            match out.last_mut() {
                Some((l, r)) if *l == s.lambda => *r = r.min(s.ratio),
                _ => out.push((s.lambda, s.ratio)),
            }
        }
        out
    }

    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "lambda,t,abs_pairing,bound_regime,ratio")?;
        for s in &self.samples {
            writeln!(
                out,
                "{:.17e},{:.17e},{:.17e},{},{:.17e}",
                s.lambda,
                s.t,
                s.abs_pairing,
                s.regime.label(),
                s.ratio
            )?;
        }
        Ok(())
    }
}

/// Evaluates the pairing on a `(lambda, t)` grid and divides by the regime
/// bound. Each regime gets `t_points` times including both of its endpoints:
/// uniform on the inner interval, geometric on the outer one.
pub fn pairing_lower_bound_check(
    b: f64,
    dim: usize,
    lambdas: &[f64],
    t_max: f64,
    t_points: usize,
    powers: NonlinearityPowers,
) -> Result<PairingBoundReport> {
    if !(t_max > 0.0) || t_points < 2 {
        return Err(Error::Parameter("need t_max > 0 and at least two t points".into()));
    }
    for &l in lambdas {
        WindowSpec::new(b, l, 0.0, dim)?;
    }
    let n = dim as f64;
    let deg = powers.degree() as f64;
    let per_lambda: Vec<Vec<PairingSample>> = lambdas
        .par_iter()
        .map(|&lambda| {
            let spec = WindowSpec { b, lambda, t: 0.0, dim };
            let tau = lambda.powf(-deg * n * b).min(t_max);
            let inner_bound = lambda.powf(n * b * (deg - 1.0) / 2.0);
            let outer_bound = lambda.powf(-n * b * (deg + 1.0) / 2.0);
            let mut rows = Vec::with_capacity(2 * t_points);
            let last = (t_points - 1) as f64;
            for k in 0..t_points {
                let t = tau * k as f64 / last;
                rows.push((t, BoundRegime::Inner, inner_bound));
            }
            for k in 0..t_points {
                let t = tau * (t_max / tau).powf(k as f64 / last);
                rows.push((t, BoundRegime::Outer, outer_bound));
            }
            rows.into_iter()
                .map(|(t, regime, bound)| {
                    let abs_pairing = nonlinear_pairing(spec.with_time(t), powers)
                        .expect("validated spec")
                        .norm();
                    PairingSample { lambda, t, abs_pairing, regime, bound, ratio: abs_pairing / bound }
                })
                .collect()
        })
        .collect();
    Ok(PairingBoundReport { powers, b, dim, t_max, samples: per_lambda.into_iter().flatten().collect() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::inner_product;

    fn spec(b: f64, lambda: f64, t: f64) -> WindowSpec {
        WindowSpec::new(b, lambda, t, 1).unwrap()
    }

    #[test]
    fn window_values() {
        assert!((spec(0.25, 1.0, 0.0).value(&[0.0]) - 1.0).norm() < 1e-15);
        let v = spec(0.25, 1.0, 1.0).value(&[0.0]);
        assert!((v.norm() - 2f64.powf(-0.25)).abs() < 1e-15);
        assert!((spec(0.5, 16.0, 0.0).value(&[0.0]) - 2.0).norm() < 1e-14);
    }

    #[test]
    fn spec_validation() {
        assert!(WindowSpec::new(0.0, 1.0, 0.0, 1).is_err());
        assert!(WindowSpec::new(1.0, 1.0, 0.0, 1).is_err());
        assert!(WindowSpec::new(0.25, 0.5, 0.0, 1).is_err());
        assert!(WindowSpec::new(0.25, 1.0, f64::NAN, 1).is_err());
        assert!(WindowSpec::new(0.25, 1.0, 0.0, 3).is_err());
        assert!(NonlinearityPowers::new(0, 0).is_err());
    }

    #[test]
    fn resolution_guard() {
        let grid = Grid::new(1, 64, 20.0).unwrap();
        let err = evaluate_window(spec(0.5, 16.0, 0.0), grid).unwrap_err();
        assert!(matches!(err, Error::Resolution(_)));
        let grid = Grid::new(1, 1024, 20.0).unwrap();
        assert!(evaluate_window(spec(0.5, 16.0, 0.0), grid).is_ok());
    }

    #[test]
    fn windows_are_l2_normalised() {
        let grid = Grid::new(1, 2048, 30.0).unwrap();
        for &(b, l, t) in &[(0.25, 1.0, 0.0), (0.5, 16.0, 0.3), (0.25, 4.0, -1.0), (0.5, 4.0, 1.0)] {
            let w = evaluate_window(spec(b, l, t), grid).unwrap();
            let n = w.l2_norm().unwrap();
            assert!((n - PI.powf(0.25)).abs() < 1e-12, "{b} {l} {t}: {n}");
        }
        let grid = Grid::new(2, 128, 10.0).unwrap();
        let w = evaluate_window(WindowSpec::new(0.25, 4.0, 0.5, 2).unwrap(), grid).unwrap();
        assert!((w.l2_norm().unwrap() - PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn self_wpt_closed_form() {
        let v = window_self_wpt(spec(0.25, 1.0, 0.0), &[0.0], &[0.0]);
        assert!((v - PI.sqrt()).norm() < 1e-15);
        let s = spec(0.5, 16.0, 0.0);
        for &(x, k) in &[(0.3, 1.0), (-1.0, 5.0), (0.05, -2.0)] {
            let lhs = window_self_wpt(s, &[x], &[k]);
            let rhs = gaussian_self_wpt(&[4.0 * x], &[k / 4.0]);
            assert!((lhs - rhs).norm() < 1e-15);
        }
        let s = spec(0.25, 1.0, 1.0);
        for &(x, k) in &[(0.3, 1.0), (-1.0, 0.5), (2.0, 2.0)] {
            let lhs = window_self_wpt(s, &[x], &[k]).norm();
            let rhs = gaussian_self_wpt(&[x - k], &[k]).norm();
            assert!((lhs - rhs).abs() < 1e-15);
        }
    }

    #[test]
    fn pairing_oracles() {
        let two = NonlinearityPowers::new(2, 0).unwrap();
        let one = NonlinearityPowers::new(1, 0).unwrap();
        let v = nonlinear_pairing(spec(0.25, 1.0, 0.0), two).unwrap();
        assert!((v.norm() - (2.0 * PI / 3.0).sqrt()).abs() < 1e-14);
        let v = nonlinear_pairing(spec(0.25, 1.0, 0.0), one).unwrap();
        assert!((v - PI.sqrt()).norm() < 1e-14);
    }

    #[test]
    fn pairing_matches_quadrature() {
        let grid = Grid::new(1, 4096, 40.0).unwrap();
        for &(p, q) in &[(2, 1), (2, 0), (3, 0), (1, 1), (0, 2), (1, 0)] {
            let powers = NonlinearityPowers::new(p, q).unwrap();
            for &(b, l, t) in &[(0.5, 4.0, 2.0), (0.25, 16.0, 0.3), (0.25, 1.0, -1.0)] {
                let s = spec(b, l, t);
                let w = evaluate_window(s, grid).unwrap();
                let nw = w.map(|z| powers.apply(z)).unwrap();
                let quad = inner_product(&w, &nw).unwrap();
                let exact = nonlinear_pairing(s, powers).unwrap();
                assert!((quad - exact).norm() < 1e-8 * exact.norm().max(1.0), "{p} {q} {b} {l} {t}");
            }
        }
    }

    #[test]
    fn pairing_modulus_even_and_monotone_in_t() {
        let powers = NonlinearityPowers::new(2, 1).unwrap();
        let mut last = f64::INFINITY;
        for k in 0..40 {
            let t = 0.05 * k as f64;
            let plus = nonlinear_pairing(spec(0.25, 9.0, t), powers).unwrap().norm();
            let minus = nonlinear_pairing(spec(0.25, 9.0, -t), powers).unwrap().norm();
            assert!((plus - minus).abs() < 1e-14 * plus);
            assert!(plus <= last * (1.0 + 1e-14));
            last = plus;
        }
    }

    #[test]
    fn lower_bound_sweep() {
        let powers = NonlinearityPowers::new(2, 0).unwrap();
        let lambdas: Vec<f64> = (0..=16).map(|k| 10f64.powf(k as f64 / 4.0)).collect();
        let rep = pairing_lower_bound_check(0.25, 1, &lambdas, 1.0, 9, powers).unwrap();
        assert!(rep.constant(BoundRegime::Inner) > 0.0);
        assert!(rep.constant(BoundRegime::Outer) > 0.0);
        // at t = 0 the inner ratio is exactly (2 pi / (p+q+1))^{1/2}
        for s in rep.samples.iter().filter(|s| s.t == 0.0) {
            assert!((s.ratio - (2.0 * PI / 3.0).sqrt()).abs() < 1e-12);
        }
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("lambda,t,abs_pairing,bound_regime,ratio\n"));
        assert_eq!(text.lines().count(), 1 + rep.samples.len());

        let single = pairing_lower_bound_check(0.25, 1, &[1.0], 1.0, 2, powers).unwrap();
        assert_eq!(single.samples.len(), 4);
        assert!(single.samples.iter().all(|s| s.t == 0.0 || s.t == 1.0));
    }
}
