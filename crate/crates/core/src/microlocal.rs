//! `H^s` wave front set detectors and the propagation experiment.
//!
//! Every detector reduces a phase-space question to a curve `g(lambda)` whose
//! integral over `[1, inf)` is finite exactly when the point is microlocally
//! `H^s`. The curve is classified by the slope of `log g` against
//! `log lambda` over its top decade, compared with the critical slope `-1`.

use std::f64::consts::PI;
use std::fmt;
use std::io::{BufRead, Write};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{fourier, Field, FieldData, Grid};
use crate::schrodinger::{nls_solve, SolverParams, StepScheme, Trajectory};
use crate::wavepacket::{ColumnEngine, Window, WindowShape};
use crate::windows::{NonlinearityPowers, WindowSpec};

/// Relative roundoff level assumed when deciding that a curve has sunk into noise.
const ROUNDOFF: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Convergent,
    Divergent,
    Inconclusive,
}

impl Verdict {
    pub fn is_decisive(self) -> bool {
        self != Verdict::Inconclusive
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Convergent => "convergent",
            Verdict::Divergent => "divergent",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

impl std::str::FromStr for Verdict {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "convergent" => Ok(Verdict::Convergent),
            "divergent" => Ok(Verdict::Divergent),
            "inconclusive" => Ok(Verdict::Inconclusive),
            _ => Err(Error::Parse(format!("unknown verdict `{s}`"))),
        }
    }
}

/// A point `(x0, xi0)` of phase space with `xi0 != 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub x0: Vec<f64>,
    pub xi0: Vec<f64>,
}

impl PhasePoint {
    pub fn new(x0: Vec<f64>, xi0: Vec<f64>) -> Result<Self> {
        if x0.len() != xi0.len() || x0.is_empty() {
            return Err(Error::Sizing("x0 and xi0 must have the same positive dimension".into()));
        }
        if xi0.iter().all(|v| *v == 0.0) {
            return Err(Error::Parameter("xi0 must be nonzero".into()));
        }
        Ok(Self { x0, xi0 })
    }

    pub fn line(x0: f64, xi0: f64) -> Result<Self> {
        Self::new(vec![x0], vec![xi0])
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    fn xi_norm(&self) -> f64 {
        self.xi0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Which transported hypothesis to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectionSign {
    /// Window `phi^(-t0)`, shift `x - t0 lambda xi`, frequencies in `V`.
    Forward,
    /// Window `phi^(+t0)`, shift `x + t0 lambda xi`, frequencies in `-V`.
    Backward,
}

impl DirectionSign {
    fn sigma(self) -> f64 {
        match self {
            DirectionSign::Forward => 1.0,
            DirectionSign::Backward => -1.0,
        }
    }
}

/// Shared knobs of the detectors.
#[derive(Debug, Clone, PartialEq)]
pub struct CriterionParams {
    /// Sobolev index `s` (or `r` for the transported criterion).
    pub s: f64,
    pub b: f64,
    /// Ratio of the geometric `lambda` grid.
    pub lambda_ratio: f64,
    /// `lambda_max * sup|V|` is capped at this fraction of the Nyquist frequency.
    pub band_fraction: f64,
    /// Optional extra cap on `lambda_max`.
    pub lambda_max: Option<f64>,
    /// Half-width `delta` of `K = [x0 - delta, x0 + delta]` (or of the balls `B(z, delta)`).
    pub k_halfwidth: f64,
    /// Half-width of `V` around `xi0`; defaults to `|xi0| / 4`.
    pub v_halfwidth: Option<f64>,
    /// Angular half-width of the frequency sector in two dimensions (radians).
    pub sector_halfangle: f64,
    /// Pitch of the `z` lattice; defaults to `delta / 2`.
    pub z_pitch: Option<f64>,
    /// Explicit `z` range; by default the lattice covers the whole support.
    pub z_range: Option<(f64, f64)>,
    pub t0: f64,
    pub direction: DirectionSign,
    pub margin: f64,
    pub window_len: usize,
}

impl Default for CriterionParams {
    fn default() -> Self {
        Self {
            s: 1.0,
            b: 0.375,
            lambda_ratio: 2f64.powf(0.125),
            band_fraction: 0.4,
            lambda_max: None,
            k_halfwidth: 0.5,
            v_halfwidth: None,
            sector_halfangle: 15f64.to_radians(),
            z_pitch: None,
            z_range: None,
            t0: 0.0,
            direction: DirectionSign::Forward,
            margin: 0.3,
            window_len: 3,
        }
    }
}

impl CriterionParams {
    pub fn with_s(&self, s: f64) -> Self {
        Self { s, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Parameter(m.to_string()));
        if !(self.b > 0.0 && self.b < 1.0) {
            return bad("b must lie in (0, 1)");
        }
        if !(self.lambda_ratio > 1.0) {
            return bad("lambda_ratio must exceed 1");
        }
        if !(self.band_fraction > 0.0 && self.band_fraction <= 0.8) {
            return bad("band_fraction must lie in (0, 0.8]");
        }
        if !(self.k_halfwidth > 0.0) {
            return bad("K half-width must be positive");
        }
        if !(self.margin > 0.0 && self.margin < 1.0) {
            return bad("margin must lie in (0, 1)");
        }
        if self.window_len < 2 {
            return bad("window_len must be at least 2");
        }
        if !self.t0.is_finite() || !self.s.is_finite() {
            return bad("s and t0 must be finite");
        }
        Ok(())
    }

    /// `V = [xi0 - w, xi0 + w]`, which must stay away from the origin.
    pub fn v_interval(&self, xi0: f64) -> Result<(f64, f64)> {
        let w = self.v_halfwidth.unwrap_or(xi0.abs() / 4.0);
        if !(w > 0.0 && w < xi0.abs()) {
            return Err(Error::Parameter(format!("V half-width {w} must lie in (0, |xi0|)")));
        }
        Ok((xi0 - w, xi0 + w))
    }

    /// Largest admissible `lambda` on `grid` when `sup|V| = sup_v`.
    pub fn lambda_ceiling(&self, grid: &Grid, sup_v: f64) -> f64 {
        let band = self.band_fraction * grid.nyquist() / sup_v;
        // windows need lambda^b dx <= 0.5
        let resolved = (0.5 / grid.spacing()).powf(1.0 / self.b);
        let mut top = band.min(resolved);
        if let Some(m) = self.lambda_max {
            top = top.min(m);
        }
        top
    }

    /// Geometric grid `1, r, r^2, ...` up to the ceiling.
    pub fn lambda_grid(&self, grid: &Grid, sup_v: f64) -> Vec<f64> {
        let top = self.lambda_ceiling(grid, sup_v);
        let mut out = Vec::new();
        let mut k = 0;
        loop {
            let l = self.lambda_ratio.powi(k);
            if l > top * (1.0 + 1e-12) {
                break;
            }
            out.push(l);
            k += 1;
        }
        out
    }
}

/// Outcome of fitting the tail of a curve.
#[derive(Debug, Clone, PartialEq)]
pub struct VerdictFit {
    pub tail_slope: Option<f64>,
    /// Intercept of the fitted line `log g = slope log lambda + intercept`.
    pub intercept: Option<f64>,
    pub verdict: Verdict,
    pub partial_integral: f64,
    pub diagnostics: Vec<String>,
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

fn classify(slope: f64, margin: f64) -> Verdict {
    if slope < -1.0 - margin {
        Verdict::Convergent
    } else if slope > -1.0 + margin {
        Verdict::Divergent
    } else {
        Verdict::Inconclusive
    }
}

fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2).zip(ys.windows(2)).map(|(x, y)| (x[1] - x[0]) * (y[0] + y[1]) / 2.0).sum()
}

/// Classifies `(lambda_j, g_j)` by the least-squares slope of `log g` over
/// the top decade `[lambda_max / 10, lambda_max]`.
///
/// Convergent below `-1 - margin`, Divergent above `-1 + margin`. The curve
/// is also Inconclusive when the slope over the upper half of the decade
/// disagrees with the full-decade verdict (the tail has not settled).
pub fn verdict_fit(lambdas: &[f64], g: &[f64], margin: f64, window_len: usize) -> VerdictFit {
    verdict_fit_with_floor(lambdas, g, None, margin, window_len)
}

fn verdict_fit_with_floor(
    lambdas: &[f64],
    g: &[f64],
    floor: Option<&[f64]>,
    margin: f64,
    window_len: usize,
) -> VerdictFit {
    let partial_integral = trapezoid(lambdas, g);
    let mut out = VerdictFit {
        tail_slope: None,
        intercept: None,
        verdict: Verdict::Inconclusive,
        partial_integral,
        diagnostics: Vec::new(),
    };
    let Some(&top) = lambdas.last() else {
        out.diagnostics.push("empty curve".into());
        return out;
    };
    if top < 10.0 * (1.0 - 1e-9) {
        out.diagnostics.push(format!("lambda range ends at {top:.3}, short of a full decade"));
        return out;
    }
    let last = g.len() - 1;
    let in_noise = |j: usize| g[j] <= 0.0 || floor.is_some_and(|f| g[j] <= f[j]);
    let decade: Vec<usize> = (0..lambdas.len()).filter(|&j| lambdas[j] >= top / 10.0 * (1.0 - 1e-9)).collect();
    let resolved: Vec<usize> = decade.iter().copied().filter(|&j| !in_noise(j)).collect();
    let fit = |idx: &[usize]| {
        let xs: Vec<f64> = idx.iter().map(|&j| lambdas[j].ln()).collect();
        let ys: Vec<f64> = idx.iter().map(|&j| g[j].ln()).collect();
        least_squares(&xs, &ys)
    };
    if in_noise(last) {
        if resolved.len() >= 2 {
            let (m, c) = fit(&resolved);
            out.tail_slope = Some(m);
            out.intercept = Some(c);
        }
        let at = (0..g.len()).find(|&j| in_noise(j)).map_or(top, |j| lambdas[j]);
        out.diagnostics.push(format!("integrand below the roundoff floor from lambda = {at:.4}"));
        out.verdict = Verdict::Convergent;
        return out;
    }
    if decade.len() < window_len {
        out.diagnostics.push(format!("{} points in the top decade, need {window_len}", decade.len()));
        return out;
    }
    if resolved.len() < window_len {
        out.diagnostics.push("too few resolved points in the top decade".into());
        return out;
    }
    let (m, c) = fit(&resolved);
    out.tail_slope = Some(m);
    out.intercept = Some(c);
    out.verdict = classify(m, margin);
    let upper: Vec<usize> =
        resolved.iter().copied().filter(|&j| lambdas[j] >= top / 10f64.sqrt() * (1.0 - 1e-9)).collect();
    if upper.len() >= window_len {
        let (mu, _) = fit(&upper);
        if classify(mu, margin) != out.verdict {
            out.diagnostics.push(format!(
                "slope not stabilised before the Nyquist ceiling: {m:.3} over the decade, {mu:.3} over its upper half"
            ));
            out.verdict = Verdict::Inconclusive;
        }
    }
    out
}

/// A classified criterion curve `g(lambda_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CriterionCurve {
    pub label: String,
    pub s: f64,
    pub lambdas: Vec<f64>,
    pub integrand: Vec<f64>,
    /// Level below which `integrand` is indistinguishable from roundoff.
    pub noise_floor: Vec<f64>,
    pub tail_slope: Option<f64>,
    pub intercept: Option<f64>,
    pub verdict: Verdict,
    pub partial_integral: f64,
    pub margin: f64,
    pub diagnostics: Vec<String>,
    pub coverage_warning: Option<String>,
}

impl CriterionCurve {
    fn from_parts(
        label: String,
        s: f64,
        lambdas: Vec<f64>,
        integrand: Vec<f64>,
        noise_floor: Vec<f64>,
        margin: f64,
        window_len: usize,
    ) -> Self {
        let fit = verdict_fit_with_floor(&lambdas, &integrand, Some(&noise_floor), margin, window_len);
        Self {
            label,
            s,
            lambdas,
            integrand,
            noise_floor,
            tail_slope: fit.tail_slope,
            intercept: fit.intercept,
            verdict: fit.verdict,
            partial_integral: fit.partial_integral,
            margin,
            diagnostics: fit.diagnostics,
            coverage_warning: None,
        }
    }

    /// Running trapezoid integral of `g d lambda`.
    pub fn cum_integral(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out = vec![0.0];
        for j in 1..self.lambdas.len() {
            acc += (self.lambdas[j] - self.lambdas[j - 1]) * (self.integrand[j] + self.integrand[j - 1]) / 2.0;
            out.push(acc);
        }
        out.truncate(self.lambdas.len());
        out
    }

    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "lambda,integrand,cum_integral")?;
        for ((l, g), c) in self.lambdas.iter().zip(&self.integrand).zip(self.cum_integral()) {
            writeln!(out, "{l:.17e},{g:.17e},{c:.17e}")?;
        }
        Ok(())
    }

    /// Reads `(lambda, integrand)` pairs written by [`CriterionCurve::write_csv`].
    pub fn read_csv(input: impl BufRead) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut lambdas = Vec::new();
        let mut g = Vec::new();
        for (n, line) in input.lines().enumerate() {
            let line = line?;
            if n == 0 {
                if !line.starts_with("lambda,integrand") {
                    return Err(Error::Parse("curve CSV must start with `lambda,integrand`".into()));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let mut cols = line.split(',').map(|c| c.trim().parse::<f64>());
            match (cols.next(), cols.next()) {
                (Some(Ok(l)), Some(Ok(v))) => {
                    lambdas.push(l);
                    g.push(v);
                }
                _ => return Err(Error::Parse(format!("bad curve row {}: `{line}`", n + 1))),
            }
        }
        Ok((lambdas, g))
    }

    /// Sidecar `key = value` summary.
    pub fn write_summary(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "label = {}", self.label)?;
        writeln!(out, "s = {}", self.s)?;
        writeln!(out, "verdict = {}", self.verdict)?;
        match self.tail_slope {
            Some(m) => writeln!(out, "tail_slope = {m:.6}")?,
            None => writeln!(out, "tail_slope = none")?,
        }
        writeln!(out, "margin = {}", self.margin)?;
        writeln!(out, "convergent_below = {}", -1.0 - self.margin)?;
        writeln!(out, "divergent_above = {}", -1.0 + self.margin)?;
        writeln!(out, "partial_integral = {:.10e}", self.partial_integral)?;
        writeln!(out, "lambda_max = {}", self.lambdas.last().copied().unwrap_or(f64::NAN))?;
        writeln!(out, "points = {}", self.lambdas.len())?;
        writeln!(out, "coverage_warning = {}", self.coverage_warning.as_deref().unwrap_or("none"))?;
        for d in &self.diagnostics {
            writeln!(out, "diagnostic = {d}")?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// cone-Fourier detector

/// The smooth cutoff `exp(1 - 1/(1 - r^2))`, equal to 1 at the origin.
fn bump(r: f64) -> f64 {
    if r.abs() < 1.0 {
        (1.0 - 1.0 / (1.0 - r * r)).exp()
    } else {
        0.0
    }
}

/// `|F[chi f]|^2 dxi^n` at every lattice frequency inside the cone, with `|xi|`.
struct ConeSpectrum {
    points: Vec<(f64, f64)>,
    /// `||chi f||^2 / N^n`, the spectral roundoff density scale.
    noise_scale: f64,
}

fn cone_spectrum(f: &Field, pt: &PhasePoint, cutoff_width: f64, halfangle: f64) -> Result<ConeSpectrum> {
    let grid = *f.grid();
    if pt.dim() != grid.dim() {
        return Err(Error::Sizing("phase point and grid dimensions differ".into()));
    }
    if !(cutoff_width > 0.0) {
        return Err(Error::Parameter("cutoff width must be positive".into()));
    }
    let chi = |x: &[f64]| {
        let r2: f64 = x.iter().zip(&pt.x0).map(|(a, b)| (a - b) * (a - b)).sum();
        bump(r2.sqrt() / cutoff_width)
    };
    let xi_norm = pt.xi_norm();
    let cos_min = halfangle.cos();
    let in_cone = |k: &[f64]| {
        let kn = k.iter().map(|v| v * v).sum::<f64>().sqrt();
        if kn == 0.0 {
            return false;
        }
        let dot: f64 = k.iter().zip(&pt.xi0).map(|(a, b)| a * b).sum();
        if grid.dim() == 1 {
            dot > 0.0
        } else {
            dot / (kn * xi_norm) >= cos_min
        }
    };
    let dv = grid.dual_cell_volume();
    let n = grid.dim() as i32;
    let (weights, noise_scale): (Vec<f64>, f64) = match f.data() {
        FieldData::DiracDelta(c) => {
            let w = chi(c).powi(2) / (2.0 * PI).powi(n);
            (vec![w; grid.len()], 0.0)
        }
        FieldData::Sampled(_) => {
            let h = f.map_with_position(|x, z| z * chi(x))?;
            let norm2 = h.l2_norm()?.powi(2);
            let spec = fourier(&h)?;
            (spec.samples()?.iter().map(|z| z.norm_sqr()).collect(), norm2 / grid.len() as f64)
        }
    };
    let points = (0..grid.len())
        .filter_map(|i| {
            let k = grid.wavevector(i);
            in_cone(&k).then(|| (k.iter().map(|v| v * v).sum::<f64>().sqrt(), weights[i] * dv))
        })
        .collect();
    Ok(ConeSpectrum { points, noise_scale })
}

/// Dyadic shell masses `m_k = int_{Gamma, 2^k <= |xi| < 2^{k+1}} <xi>^{2s} |F[chi f]|^2`,
/// reported as the curve `g(2^k) = m_k / 2^k`.
///
/// `chi` is a smooth bump of radius `cutoff_width` centred at `x0`; in two
/// dimensions `Gamma` is the sector of half-angle `cone_halfangle` around `xi0`
/// (in one dimension it is the half-line containing `xi0`).
pub fn cone_fourier_detect(f: &Field, pt: &PhasePoint, s: f64, cutoff_width: f64, cone_halfangle: f64) -> Result<CriterionCurve> {
    cone_fourier_detect_with(f, pt, cutoff_width, cone_halfangle, &CriterionParams::default().with_s(s))
}

/// [`cone_fourier_detect`] with the fit options and band limit of `params`.
pub fn cone_fourier_detect_with(
    f: &Field,
    pt: &PhasePoint,
    cutoff_width: f64,
    cone_halfangle: f64,
    params: &CriterionParams,
) -> Result<CriterionCurve> {
    Ok(cone_fourier_levels(f, pt, cutoff_width, cone_halfangle, params, &[params.s])?.remove(0))
}

/// Cone curves for several Sobolev levels from a single transform.
pub fn cone_fourier_levels(
    f: &Field,
    pt: &PhasePoint,
    cutoff_width: f64,
    cone_halfangle: f64,
    params: &CriterionParams,
    levels: &[f64],
) -> Result<Vec<CriterionCurve>> {
    params.validate()?;
    let grid = *f.grid();
    let top = params.band_fraction * grid.nyquist();
    let shells: Vec<i32> = (0..).take_while(|&k| 2f64.powi(k + 1) <= top).collect();
    if shells.is_empty() {
        return Err(Error::FrequencyRange(format!(
            "no dyadic shell fits below {:.3} (Nyquist {:.3})",
            top,
            grid.nyquist()
        )));
    }
    let spec = cone_spectrum(f, pt, cutoff_width, cone_halfangle)?;
    Ok(levels
        .iter()
        .map(|&s| {
            let mut mass = vec![0.0; shells.len()];
            let mut count = vec![0usize; shells.len()];
            for &(kn, w) in &spec.points {
                if kn < 1.0 {
                    continue;
                }
                let k = kn.log2().floor() as usize;
                if k < shells.len() {
                    mass[k] += (1.0 + kn * kn).powf(s) * w;
                    count[k] += 1;
                }
            }
            let lambdas: Vec<f64> = shells.iter().map(|&k| 2f64.powi(k)).collect();
            let g: Vec<f64> = mass.iter().zip(&lambdas).map(|(m, l)| m / l).collect();
            let floor: Vec<f64> = lambdas
                .iter()
                .zip(&count)
                .map(|(l, &c)| {
                    let top = 2.0 * l;
                    (1.0 + top * top).powf(s) * c as f64 * ROUNDOFF * ROUNDOFF * spec.noise_scale / l
                })
                .collect();
            CriterionCurve::from_parts(
                format!("cone x0={:?} xi0={:?}", pt.x0, pt.xi0),
                s,
                lambdas,
                g,
                floor,
                params.margin,
                params.window_len,
            )
        })
        .collect())
}

// ---------------------------------------------------------------------------
// wave packet detector

/// A family of windows indexed by `lambda`.
#[derive(Debug, Clone, PartialEq)]
pub enum WindowFamily {
    /// The dilated Gaussian `phi_lambda`.
    Gaussian,
    /// `lambda^{nb/2} psi(lambda^b x)` for a base profile `psi`.
    Shape(WindowShape),
    /// The same window for every `lambda`.
    Fixed(Window),
}

impl WindowFamily {
    fn at(&self, b: f64, lambda: f64, t: f64, dim: usize) -> Result<Window> {
        Ok(match self {
            WindowFamily::Gaussian => Window::Evolved(WindowSpec::new(b, lambda, t, dim)?),
            WindowFamily::Shape(shape) => Window::Dilated { shape: *shape, b, lambda },
            WindowFamily::Fixed(w) => w.clone(),
        })
    }

    pub fn label(&self) -> String {
        match self {
            WindowFamily::Gaussian => "gaussian".into(),
            WindowFamily::Shape(s) => s.name().into(),
            WindowFamily::Fixed(w) => w.label(),
        }
    }
}

/// `int |W(x, eta_i)|^2 dx` over arbitrary intervals, from lattice columns.
struct ColumnIntegrals {
    x_first: f64,
    dx: f64,
    /// `|W|^2` per column.
    values: Vec<Vec<f64>>,
    /// Trapezoid prefix sums per column.
    prefix: Vec<Vec<f64>>,
}

impl ColumnIntegrals {
    fn new(grid: &Grid, m0: i64, columns: Vec<Vec<Complex64>>) -> Self {
        let dx = grid.spacing();
        let values: Vec<Vec<f64>> = columns.into_iter().map(|c| c.into_iter().map(|z| z.norm_sqr()).collect()).collect();
        let prefix = values
            .iter()
            .map(|v| {
                let mut acc = 0.0;
                let mut p = Vec::with_capacity(v.len());
                p.push(0.0);
                for w in v.windows(2) {
                    acc += (w[0] + w[1]) * dx / 2.0;
                    p.push(acc);
                }
                p
            })
            .collect();
        Self { x_first: grid.coord(m0), dx, values, prefix }
    }

    /// Antiderivative of the piecewise-linear interpolant of column `i`.
    fn antiderivative(&self, i: usize, x: f64) -> f64 {
        let v = &self.values[i];
        let n = v.len();
        if n == 0 {
            return 0.0;
        }
        let u = ((x - self.x_first) / self.dx).clamp(0.0, (n - 1) as f64);
        let m = (u.floor() as usize).min(n.saturating_sub(2));
        if n == 1 {
            return 0.0;
        }
        let h = (u - m as f64) * self.dx;
        self.prefix[i][m] + h * v[m] + h * h / (2.0 * self.dx) * (v[m + 1] - v[m])
    }

    fn integral(&self, i: usize, a: f64, b: f64) -> f64 {
        self.antiderivative(i, b) - self.antiderivative(i, a)
    }

    fn x_last(&self) -> f64 {
        self.x_first + (self.values.first().map_or(1, |v| v.len()) as f64 - 1.0) * self.dx
    }
}

/// Midpoint nodes of `[lo, hi]` fine enough to resolve `W(x, lambda xi)` in `xi`.
fn xi_nodes(lo: f64, hi: f64, lambda: f64, b: f64) -> (Vec<f64>, f64) {
    let width = hi - lo;
    let m = ((width * lambda / (lambda.powf(b) / 6.0)).ceil() as usize).clamp(16, 1024);
    let h = width / m as f64;
    ((0..m).map(|i| lo + (i as f64 + 0.5) * h).collect(), h)
}

/// `||W_{phi_lambda} f(x, lambda xi)||^2` over `K x V` before the
/// `lambda^{2s+n-1}` weight, so that one transform serves every level `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawCurve {
    pub label: String,
    pub lambdas: Vec<f64>,
    pub norms: Vec<f64>,
    pub floors: Vec<f64>,
    pub dim: usize,
    pub coverage_warning: Option<String>,
}

impl RawCurve {
    pub fn weighted(&self, s: f64, margin: f64, window_len: usize) -> CriterionCurve {
        let e = 2.0 * s + self.dim as f64 - 1.0;
        let w: Vec<f64> = self.lambdas.iter().map(|l| l.powf(e)).collect();
        let g = self.norms.iter().zip(&w).map(|(a, b)| a * b).collect();
        let floor = self.floors.iter().zip(&w).map(|(a, b)| a * b).collect();
        let mut c = CriterionCurve::from_parts(self.label.clone(), s, self.lambdas.clone(), g, floor, margin, window_len);
        c.coverage_warning = self.coverage_warning.clone();
        if let Some(w) = &self.coverage_warning {
            c.diagnostics.push(w.clone());
        }
        c
    }
}

fn one_dimensional(f: &Field) -> Result<Grid> {
    let grid = *f.grid();
    if grid.dim() != 1 {
        return Err(Error::UnsupportedDimension(grid.dim()));
    }
    Ok(grid)
}

fn field_norm(f: &Field) -> f64 {
    f.l2_norm().unwrap_or(0.0)
}

/// Unweighted wave packet norms over `K = [x0 - delta, x0 + delta]` and `V`.
pub fn wavepacket_raw(f: &Field, pt: &PhasePoint, params: &CriterionParams, window: &WindowFamily) -> Result<RawCurve> {
    params.validate()?;
    let grid = one_dimensional(f)?;
    if pt.dim() != 1 {
        return Err(Error::Sizing("phase point must be one-dimensional".into()));
    }
    let (v_lo, v_hi) = params.v_interval(pt.xi0[0])?;
    let sup_v = v_lo.abs().max(v_hi.abs());
    let lambdas = params.lambda_grid(&grid, sup_v);
    let (a, b) = (pt.x0[0] - params.k_halfwidth, pt.x0[0] + params.k_halfwidth);
    let dx = grid.spacing();
    let m_lo = ((a + grid.half_width()) / dx).floor() as i64;
    let m_hi = ((b + grid.half_width()) / dx).ceil() as i64;
    let len = (m_hi - m_lo + 1) as usize;
    let f_norm = if f.is_delta() { 0.0 } else { field_norm(f) };
    let rows = lambdas
        .par_iter()
        .map(|&lambda| {
            let w = window.at(params.b, lambda, 0.0, 1)?;
            let engine = ColumnEngine::new(f, &w, m_lo, len)?;
            let (xis, h) = xi_nodes(v_lo, v_hi, lambda, params.b);
            let etas: Vec<f64> = xis.iter().map(|x| lambda * x).collect();
            let cols = ColumnIntegrals::new(&grid, m_lo, engine.columns(&etas));
            let norm: f64 = (0..xis.len()).map(|i| cols.integral(i, a, b) * h).sum();
            let floor = (ROUNDOFF * w.l2_norm(&grid) * f_norm).powi(2) * (b - a) * (v_hi - v_lo);
            Ok((norm, floor))
        })
        .collect::<Result<Vec<_>>>()?;
    let (norms, floors) = rows.into_iter().unzip();
    Ok(RawCurve {
        label: format!("wavepacket window={} x0={} xi0={} K=[{a},{b}]", window.label(), pt.x0[0], pt.xi0[0]),
        lambdas,
        norms,
        floors,
        dim: 1,
        coverage_warning: None,
    })
}

/// `g(lambda) = lambda^{2s+n-1} ||W_{phi_lambda} f(x, lambda xi)||^2_{L^2(K x V)}`
/// classified by [`verdict_fit`], with `s = params.s`.
pub fn wavepacket_detect(f: &Field, pt: &PhasePoint, params: &CriterionParams, window: &WindowFamily) -> Result<CriterionCurve> {
    Ok(wavepacket_raw(f, pt, params, window)?.weighted(params.s, params.margin, params.window_len))
}

// ---------------------------------------------------------------------------
// transported criterion

/// Lattice index range where `f` is nonzero (delta: its nearest index).
fn support_indices(f: &Field) -> Option<(i64, i64)> {
    let grid = f.grid();
    match f.data() {
        FieldData::DiracDelta(c) => {
            let i = ((c[0] + grid.half_width()) / grid.spacing()).round() as i64;
            Some((i, i))
        }
        FieldData::Sampled(s) => {
            let nz = |z: &Complex64| z.norm() > 0.0;
            Some((s.iter().position(nz)? as i64, s.iter().rposition(nz)? as i64))
        }
    }
}

/// Raw transported norms: `max_z ||W_{phi_lambda^(-sigma t0)} u0(x - sigma t0 lambda xi, lambda xi)||^2`
/// over `B(z, delta) x sigma V`, before the `lambda^{2r+n-1}` weight.
pub fn transported_raw(u0: &Field, xi0: f64, params: &CriterionParams) -> Result<RawCurve> {
    params.validate()?;
    let grid = one_dimensional(u0)?;
    let sigma = params.direction.sigma();
    let (v_lo, v_hi) = params.v_interval(xi0)?;
    let (v_lo, v_hi) = if sigma > 0.0 { (v_lo, v_hi) } else { (-v_hi, -v_lo) };
    let sup_v = v_lo.abs().max(v_hi.abs());
    let lambdas = params.lambda_grid(&grid, sup_v);
    let delta = params.k_halfwidth;
    let pitch = params.z_pitch.unwrap_or(delta / 2.0);
    if !(pitch > 0.0) {
        return Err(Error::Parameter("z pitch must be positive".into()));
    }
    let dx = grid.spacing();
    let f_norm = if u0.is_delta() { 0.0 } else { field_norm(u0) };
    let support = support_indices(u0);
    let rows = lambdas
        .par_iter()
        .map(|&lambda| -> Result<(f64, f64, Option<String>)> {
            let w = Window::Evolved(WindowSpec::new(params.b, lambda, -sigma * params.t0, 1)?);
            let floor = (ROUNDOFF * w.l2_norm(&grid) * f_norm).powi(2) * 2.0 * delta * (v_hi - v_lo);
            let Some((j0, j1)) = support else {
                return Ok((0.0, floor, None));
            };
            let r = (w.radius() / dx).ceil() as i64;
            let (m_lo, m_hi) = (j0 - r - 1, j1 + r + 1);
            let engine = ColumnEngine::new(u0, &w, m_lo, (m_hi - m_lo + 1) as usize)?;
            let (xis, h) = xi_nodes(v_lo, v_hi, lambda, params.b);
            let etas: Vec<f64> = xis.iter().map(|x| lambda * x).collect();
            let cols = ColumnIntegrals::new(&grid, m_lo, engine.columns(&etas));
            let shifts: Vec<f64> = xis.iter().map(|x| sigma * params.t0 * lambda * x).collect();
            let ball = |z: f64| -> f64 {
                (0..xis.len()).map(|i| cols.integral(i, z - delta - shifts[i], z + delta - shifts[i]) * h).sum()
            };
            let smin = shifts.iter().copied().fold(f64::INFINITY, f64::min);
            let smax = shifts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let (z_lo, z_hi) = params
                .z_range
                .unwrap_or((cols.x_first + smin - delta, cols.x_last() + smax + delta));
            let count = ((z_hi - z_lo) / pitch).floor() as usize + 1;
            // fixed lattice order keeps the reduction deterministic
            let values: Vec<f64> = (0..count).map(|k| ball(z_lo + k as f64 * pitch)).collect();
            let peak = values.iter().copied().fold(0.0, f64::max);
            let mut warning = None;
            if params.z_range.is_some() && peak > 0.0 {
                let outside = ball(z_lo - pitch).max(ball(z_lo + count as f64 * pitch));
                if outside > 1e-12 * peak {
                    warning = Some(format!(
                        "z lattice [{z_lo}, {z_hi}] misses transform mass at lambda = {lambda:.3} ({:.2e} of peak)",
                        outside / peak
                    ));
                }
            }
            Ok((peak, floor, warning))
        })
        .collect::<Result<Vec<_>>>()?;
    let coverage_warning = rows.iter().find_map(|r| r.2.clone());
    let label = format!(
        "transported {} t0={} xi0={xi0} delta={delta}",
        match params.direction {
            DirectionSign::Forward => "forward",
            DirectionSign::Backward => "backward",
        },
        params.t0
    );
    Ok(RawCurve {
        label,
        lambdas,
        norms: rows.iter().map(|r| r.0).collect(),
        floors: rows.iter().map(|r| r.1).collect(),
        dim: 1,
        coverage_warning,
    })
}

/// The transported hypothesis curve at level `r = params.s`:
/// `g(lambda) = lambda^{2r+n-1} max_z ||W_{phi_lambda^(-sigma t0)} u0(x - sigma t0 lambda xi, lambda xi)||^2`
/// over `B(z, delta) x sigma V`, with `sigma = +1` for [`DirectionSign::Forward`].
pub fn transported_criterion(u0: &Field, xi0: f64, params: &CriterionParams) -> Result<CriterionCurve> {
    Ok(transported_raw(u0, xi0, params)?.weighted(params.s, params.margin, params.window_len))
}

// ---------------------------------------------------------------------------
// propagation experiment

/// Inputs of the end-to-end propagation experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Theorem2Config {
    pub powers: NonlinearityPowers,
    pub t0: f64,
    pub xi0: f64,
    pub r: f64,
    pub s: f64,
    pub b: f64,
    pub n_steps: usize,
    pub scheme: StepScheme,
    /// Shared detector knobs (`delta`, `V`, band, margin); `s`, `t0` and
    /// `direction` are overwritten per stage.
    pub detector: CriterionParams,
}

impl Theorem2Config {
    pub fn new(powers: NonlinearityPowers, t0: f64, xi0: f64, r: f64, s: f64) -> Self {
        Self {
            powers,
            t0,
            xi0,
            r,
            s,
            b: 0.25,
            n_steps: 256,
            scheme: StepScheme::Strang,
            detector: CriterionParams::default(),
        }
    }

    /// `s > n/2`, `s < r < 2s - n/2` and `0 < b <= 1/2`.
    pub fn validate(&self, dim: usize) -> Result<()> {
        let n = dim as f64;
        if !(self.s > n / 2.0) {
            return Err(Error::Parameter(format!("s = {} must exceed n/2 = {}", self.s, n / 2.0)));
        }
        if !(self.r > self.s && self.r < 2.0 * self.s - n / 2.0) {
            return Err(Error::Parameter(format!(
                "r = {} must lie in (s, 2s - n/2) = ({}, {})",
                self.r,
                self.s,
                2.0 * self.s - n / 2.0
            )));
        }
        if !(self.b > 0.0 && self.b <= 0.5) {
            return Err(Error::Parameter(format!("b = {} must lie in (0, 1/2]", self.b)));
        }
        if !(self.t0 > 0.0 && self.t0.is_finite()) {
            return Err(Error::Parameter("t0 must be positive".into()));
        }
        if self.xi0 == 0.0 {
            return Err(Error::Parameter("xi0 must be nonzero".into()));
        }
        self.detector.validate()
    }

    /// `2 rho + n - 1 - 4 s + b (4 s + n)` with `rho = r`; the smallness
    /// condition on `b` asks for a value below `-1`.
    pub fn b_inequality(&self, dim: usize) -> f64 {
        let n = dim as f64;
        2.0 * self.r + n - 1.0 - 4.0 * self.s + self.b * (4.0 * self.s + n)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Hypothesis {
    Evaluated(CriterionCurve),
    /// Not required for this nonlinearity.
    Skipped(&'static str),
}

impl Hypothesis {
    pub fn verdict(&self) -> Option<Verdict> {
        match self {
            Hypothesis::Evaluated(c) => Some(c.verdict),
            Hypothesis::Skipped(_) => None,
        }
    }
}

/// Conclusion curve on `u(t0)` for the window `K(z) = [z - delta, z + delta]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conclusion {
    pub z: f64,
    pub curve: CriterionCurve,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Theorem2Report {
    pub config: Theorem2Config,
    pub forward: Hypothesis,
    pub backward: Hypothesis,
    pub trajectory: Trajectory,
    pub conclusions: Vec<Conclusion>,
    pub b_inequality: f64,
    pub hypotheses_convergent: bool,
    pub any_conclusion_divergent: bool,
    /// False only when every evaluated hypothesis is Convergent and some
    /// conclusion curve is Divergent.
    pub implication_held: bool,
}

impl Theorem2Report {
    pub fn write_summary(&self, mut out: impl Write) -> Result<()> {
        let c = &self.config;
        writeln!(out, "p = {}\nq = {}", c.powers.p, c.powers.q)?;
        writeln!(out, "t0 = {}\nxi0 = {}\nr = {}\ns = {}\nb = {}", c.t0, c.xi0, c.r, c.s, c.b)?;
        writeln!(out, "n_steps = {}\nscheme = {}", c.n_steps, c.scheme)?;
        writeln!(out, "b_inequality = {:.6}", self.b_inequality)?;
        writeln!(out, "b_inequality_holds = {}", self.b_inequality < -1.0)?;
        for (key, h) in [("condition_forward", &self.forward), ("condition_backward", &self.backward)] {
            match h {
                Hypothesis::Evaluated(curve) => writeln!(out, "{key} = {}", curve.verdict)?,
                Hypothesis::Skipped(why) => writeln!(out, "{key} = skipped ({why})")?,
            }
        }
        for con in &self.conclusions {
            writeln!(out, "conclusion_z{:+.3} = {}", con.z, con.curve.verdict)?;
        }
        writeln!(out, "hypotheses_convergent = {}", self.hypotheses_convergent)?;
        writeln!(out, "any_conclusion_divergent = {}", self.any_conclusion_divergent)?;
        writeln!(out, "implication_held = {}", self.implication_held)?;
        Ok(())
    }

    pub fn write_table(&self, mut out: impl Write) -> Result<()> {
        let slope = |c: &CriterionCurve| c.tail_slope.map_or("-".to_string(), |m| format!("{m:.3}"));
        writeln!(out, "{:<24} {:>14} {:>10}", "stage", "verdict", "slope")?;
        for (name, h) in [("hypothesis (forward)", &self.forward), ("hypothesis (backward)", &self.backward)] {
            match h {
                Hypothesis::Evaluated(c) => writeln!(out, "{name:<24} {:>14} {:>10}", c.verdict.to_string(), slope(c))?,
                Hypothesis::Skipped(_) => writeln!(out, "{name:<24} {:>14} {:>10}", "skipped", "-")?,
            }
        }
        for con in &self.conclusions {
            let name = format!("conclusion z={:+.2}", con.z);
            writeln!(out, "{name:<24} {:>14} {:>10}", con.curve.verdict.to_string(), slope(&con.curve))?;
        }
        writeln!(out, "implication held: {}", self.implication_held)?;
        Ok(())
    }
}

/// Runs hypotheses, solver and conclusion detectors for one configuration.
///
/// When `q = 0` the backward hypothesis is not needed, and when `p = 0` the
/// forward one is not; both are then recorded as skipped.
pub fn theorem2_experiment(u0: &Field, config: &Theorem2Config) -> Result<Theorem2Report> {
    let grid = one_dimensional(u0)?;
    config.validate(grid.dim())?;
    let base = CriterionParams { s: config.r, b: config.b, t0: config.t0, ..config.detector.clone() };
    let hypothesis = |direction: DirectionSign, skip: bool, why: &'static str| -> Result<Hypothesis> {
        if skip {
            return Ok(Hypothesis::Skipped(why));
        }
        let p = CriterionParams { direction, ..base.clone() };
        Ok(Hypothesis::Evaluated(transported_criterion(u0, config.xi0, &p)?))
    };
    let forward = hypothesis(DirectionSign::Forward, config.powers.p == 0, "not needed when p = 0")?;
    let backward = hypothesis(DirectionSign::Backward, config.powers.q == 0, "not needed when q = 0")?;

    let mut solver = SolverParams::new(Some(config.powers), config.t0, config.n_steps).with_scheme(config.scheme);
    solver.store_every = (config.n_steps / 16).max(1);
    let trajectory = nls_solve(u0, solver)?;
    let ut = trajectory.final_state();

    let delta = base.k_halfwidth;
    let samples = ut.samples()?;
    let peak = samples.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let live = |z: &Complex64| z.norm() >= 1e-8 * peak;
    let (i0, i1) = match (samples.iter().position(live), samples.iter().rposition(live)) {
        (Some(a), Some(b)) => (a as i64, b as i64),
        _ => return Err(Error::DegenerateInput("u(t0) vanishes".into())),
    };
    let (x_lo, x_hi) = (grid.coord(i0), grid.coord(i1));
    let tiles = (((x_hi - x_lo) / (2.0 * delta)).ceil() as usize).max(1);
    let static_params = CriterionParams { s: config.r, b: config.b, t0: 0.0, ..config.detector.clone() };
    let conclusions = (0..tiles)
        .map(|k| {
            let z = x_lo + delta + 2.0 * delta * k as f64;
            let pt = PhasePoint::line(z, config.xi0)?;
            Ok(Conclusion { z, curve: wavepacket_detect(ut, &pt, &static_params, &WindowFamily::Gaussian)? })
        })
        .collect::<Result<Vec<_>>>()?;

    let hypotheses_convergent = [&forward, &backward]
        .iter()
        .all(|h| h.verdict().is_none_or(|v| v == Verdict::Convergent));
    let any_conclusion_divergent = conclusions.iter().any(|c| c.curve.verdict == Verdict::Divergent);
    Ok(Theorem2Report {
        config: config.clone(),
        forward,
        backward,
        trajectory,
        conclusions,
        b_inequality: config.b_inequality(grid.dim()),
        hypotheses_convergent,
        any_conclusion_divergent,
        implication_held: !(hypotheses_convergent && any_conclusion_divergent),
    })
}
