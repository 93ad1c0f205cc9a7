//! Run configuration, the identity suite and the command runners behind `wfnls`.
//!
//! Configuration is a TOML file with one table per section. Keys are
//! addressed as `section.key` in `--set` overrides.
//! Every command writes its artifacts plus a `manifest.txt` under
//! `<output>/<command>/`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use num_complex::Complex64;

use crate::corpus::{identity_corpus, Signal};
use crate::error::{Error, Result};
use crate::field::{inner_product, Field, Grid};
use crate::microlocal::{
    cone_fourier_detect_with, transported_criterion, theorem2_experiment, wavepacket_detect, CriterionCurve,
    CriterionParams, DirectionSign, Hypothesis, PhasePoint, Theorem2Config, Theorem2Report, Verdict, WindowFamily,
};
use crate::schrodinger::{
    conservation_report, duhamel_residual, free_propagate, nls_solve, ConservationReport, SolverParams, StepScheme,
    Trajectory,
};
use crate::wavepacket::{
    conjugation_identity_check, plancherel_ratio, reconstruct, window_change_bound_check, wpt, wpt_full, Window,
    WindowShape, WptSlice,
};
use crate::windows::{
    evaluate_window, gaussian_self_wpt, nonlinear_pairing, pairing_lower_bound_check, window_self_wpt, BoundRegime,
    NonlinearityPowers, WindowSpec,
};

/// Environment variable overriding `run.output`.
pub const OUTPUT_ENV: &str = "WFNLS_OUTPUT_DIR";
/// Environment variable setting the worker count.
pub const WORKERS_ENV: &str = "WFNLS_WORKERS";

/// The `wfnls` subcommands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    VerifyIdentities,
    Detect,
    Transported,
    Solve,
    Theorem2,
    Plotdata,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::VerifyIdentities => "verify-identities",
            Command::Detect => "detect",
            Command::Transported => "transported",
            Command::Solve => "solve",
            Command::Theorem2 => "theorem2",
            Command::Plotdata => "plotdata",
        }
    }
}

/// Every setting of a run, with per-command defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

const KEYS: &[(&str, &str)] = &[
    ("grid.dim", "1"),
    ("grid.points", "4096"),
    ("grid.half_width", "16"),
    ("signal.name", "step_gaussian"),
    ("signal.center", "0"),
    ("window.name", "gaussian"),
    ("window.b", "0.375"),
    ("window.lambda", "1"),
    ("detector.method", "wavepacket"),
    ("detector.s", "1"),
    ("detector.r", "0.9"),
    ("detector.x0", "0"),
    ("detector.xi0", "1"),
    ("detector.k_halfwidth", "0.5"),
    ("detector.v_halfwidth", "auto"),
    ("detector.lambda_ratio", "1.0905077326652577"),
    ("detector.band_fraction", "0.4"),
    ("detector.lambda_max", "auto"),
    ("detector.margin", "0.3"),
    ("detector.window_len", "3"),
    ("detector.cutoff_width", "1"),
    ("detector.cone_halfangle_deg", "15"),
    ("detector.z_pitch", "auto"),
    ("detector.direction", "forward"),
    ("solver.p", "2"),
    ("solver.q", "1"),
    ("solver.s", "0.75"),
    ("solver.t0", "0.5"),
    ("solver.steps", "256"),
    ("solver.scheme", "strang"),
    ("run.output", "wfnls-out"),
    ("run.seed", "20240601"),
    ("run.checks", "all"),
];

impl RunConfig {
    /// Defaults tuned for `cmd`.
    pub fn defaults(cmd: Command) -> Self {
        let mut values: BTreeMap<String, String> = KEYS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        let mut put = |k: &str, v: &str| {
            values.insert(k.into(), v.into());
        };
        match cmd {
            Command::VerifyIdentities => {
                put("grid.points", "2048");
                put("grid.half_width", "40");
                put("window.b", "0.25");
            }
            Command::Detect | Command::Plotdata => {
                put("grid.points", "8192");
            }
            Command::Transported => {
                put("window.b", "0.25");
                put("signal.name", "gaussian");
                put("detector.s", "1.2");
            }
            Command::Solve => {
                put("grid.points", "1024");
                put("grid.half_width", "20");
                put("signal.name", "gaussian");
            }
            Command::Theorem2 => {
                put("grid.half_width", "40");
                put("window.b", "0.25");
                put("signal.name", "gaussian");
            }
        }
        Self { values }
    }

    /// Parses TOML text with one table per section on top of `defaults`.
    /// Scalars of any type are accepted and kept in their textual form.
    pub fn parse(text: &str, defaults: RunConfig) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse(e.message().to_string()))?;
        let mut cfg = defaults;
        for (section, body) in &table {
            let toml::Value::Table(body) = body else {
                return Err(Error::Parse(format!("top-level key `{section}` is not a section")));
            };
            for (key, value) in body {
                let text = match value {
                    toml::Value::String(s) => s.clone(),
                    toml::Value::Integer(i) => i.to_string(),
                    toml::Value::Float(f) => f.to_string(),
                    toml::Value::Boolean(b) => b.to_string(),
                    _ => return Err(Error::Parse(format!("`{section}.{key}` must be a scalar"))),
                };
                cfg.set(&format!("{section}.{key}"), &text)?;
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path, defaults: RunConfig) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?, defaults)
    }

    /// Sets `section.key`; unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = value.to_string();
                Ok(())
            }
            None => Err(Error::Parse(format!("unknown config key `{key}`"))),
        }
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair.split_once('=').ok_or_else(|| Error::Parse(format!("override `{pair}` lacks `=`")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn get(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    fn num<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.get(key).parse().map_err(|_| Error::Parse(format!("`{key}` = `{}` is not a valid number", self.get(key))))
    }

    fn opt_num(&self, key: &str) -> Result<Option<f64>> {
        match self.get(key) {
            "auto" | "" => Ok(None),
            _ => self.num(key).map(Some),
        }
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.num("grid.dim")?, self.num("grid.points")?, self.num("grid.half_width")?)
    }

    pub fn signal(&self) -> Result<Field> {
        Signal::from_name(self.get("signal.name"))?.field(self.grid()?, self.num("signal.center")?)
    }

    pub fn window_family(&self) -> Result<WindowFamily> {
        match self.get("window.name") {
            "gaussian" => Ok(WindowFamily::Gaussian),
            other => WindowShape::from_name(other)
                .map(WindowFamily::Shape)
                .ok_or_else(|| Error::Parse(format!("unknown window `{other}`"))),
        }
    }

    pub fn powers(&self) -> Result<NonlinearityPowers> {
        NonlinearityPowers::new(self.num("solver.p")?, self.num("solver.q")?)
    }

    pub fn scheme(&self) -> Result<StepScheme> {
        self.get("solver.scheme").parse()
    }

    pub fn phase_point(&self) -> Result<PhasePoint> {
        let dim: usize = self.num("grid.dim")?;
        let mut x0 = vec![0.0; dim];
        let mut xi0 = vec![0.0; dim];
        x0[0] = self.num("detector.x0")?;
        xi0[0] = self.num("detector.xi0")?;
        PhasePoint::new(x0, xi0)
    }

    /// Detector knobs with `s` taken from `detector.s`.
    pub fn criterion(&self) -> Result<CriterionParams> {
        let direction = match self.get("detector.direction") {
            "forward" => DirectionSign::Forward,
            "backward" => DirectionSign::Backward,
            other => return Err(Error::Parse(format!("unknown direction `{other}`"))),
        };
        let p = CriterionParams {
            s: self.num("detector.s")?,
            b: self.num("window.b")?,
            lambda_ratio: self.num("detector.lambda_ratio")?,
            band_fraction: self.num("detector.band_fraction")?,
            lambda_max: self.opt_num("detector.lambda_max")?,
            k_halfwidth: self.num("detector.k_halfwidth")?,
            v_halfwidth: self.opt_num("detector.v_halfwidth")?,
            sector_halfangle: self.num::<f64>("detector.cone_halfangle_deg")?.to_radians(),
            z_pitch: self.opt_num("detector.z_pitch")?,
            z_range: None,
            t0: self.num("solver.t0")?,
            direction,
            margin: self.num("detector.margin")?,
            window_len: self.num("detector.window_len")?,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn theorem2(&self) -> Result<Theorem2Config> {
        let mut cfg = Theorem2Config::new(
            self.powers()?,
            self.num("solver.t0")?,
            self.num("detector.xi0")?,
            self.num("detector.r")?,
            self.num("solver.s")?,
        );
        cfg.b = self.num("window.b")?;
        cfg.n_steps = self.num("solver.steps")?;
        cfg.scheme = self.scheme()?;
        cfg.detector = self.criterion()?;
        Ok(cfg)
    }

    /// `run.output`, unless overridden by the environment.
    pub fn output_dir(&self) -> PathBuf {
        std::env::var_os(OUTPUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(self.get("run.output")))
    }

    pub fn seed(&self) -> Result<u64> {
        self.num("run.seed")
    }

    /// Check names selected for the identity suite.
    pub fn checks(&self) -> Vec<String> {
        match self.get("run.checks").trim() {
            "all" => SUITE.iter().map(|s| s.to_string()).collect(),
            "" | "none" => Vec::new(),
            list => list.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
        }
    }

    /// The configuration as TOML that [`RunConfig::parse`] reads back.
    pub fn to_toml(&self) -> String {
        let mut out = String::new();
        let mut section = "";
        for (k, v) in &self.values {
            let (s, key) = k.split_once('.').unwrap_or(("", k));
            if s != section {
                out.push_str(&format!("\n[{s}]\n"));
                section = s;
            }
            if v.parse::<f64>().is_ok() {
                out.push_str(&format!("{key} = {v}\n"));
            } else {
                out.push_str(&format!("{key} = \"{v}\"\n"));
            }
        }
        out
    }
}

fn write_manifest(dir: &Path, cmd: Command, cfg: &RunConfig, tolerances: &[(&str, f64)]) -> Result<()> {
    let mut m = BufWriter::new(fs::File::create(dir.join("manifest.txt"))?);
    writeln!(m, "command = {}", cmd.name())?;
    writeln!(m, "version = {}", env!("CARGO_PKG_VERSION"))?;
    for (k, v) in tolerances {
        writeln!(m, "tolerance.{k} = {v:e}")?;
    }
    writeln!(m, "{}", cfg.to_toml())?;
    Ok(())
}

fn command_dir(cfg: &RunConfig, cmd: Command) -> Result<PathBuf> {
    let dir = cfg.output_dir().join(cmd.name());
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

// ---------------------------------------------------------------------------
// identity suite

#[derive(Debug, Clone, PartialEq)]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped(String),
    Errored(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRecord {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub status: CheckStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuiteStatus {
    Pass,
    Fail,
    /// No failures, but some checks were skipped.
    Incomplete,
    /// Some check hit an infrastructure error.
    Errored,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub name: String,
    pub records: Vec<CheckRecord>,
    pub wall_clock: Duration,
}

impl SuiteReport {
    pub fn status(&self) -> SuiteStatus {
        let has = |f: fn(&CheckStatus) -> bool| self.records.iter().any(|r| f(&r.status));
        if has(|s| matches!(s, CheckStatus::Errored(_))) {
            SuiteStatus::Errored
        } else if has(|s| matches!(s, CheckStatus::Fail)) {
            SuiteStatus::Fail
        } else if has(|s| matches!(s, CheckStatus::Skipped(_))) {
            SuiteStatus::Incomplete
        } else {
            SuiteStatus::Pass
        }
    }

    pub fn passed(&self) -> bool {
        self.status() == SuiteStatus::Pass
    }

    /// `name,measured,tolerance,status` rows (no timing, so reruns are byte-identical).
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "name,measured,tolerance,status")?;
        for r in &self.records {
            let status = match &r.status {
                CheckStatus::Pass => "pass".to_string(),
                CheckStatus::Fail => "fail".to_string(),
                CheckStatus::Skipped(why) => format!("skipped: {}", why.replace(',', ";")),
                CheckStatus::Errored(why) => format!("errored: {}", why.replace(',', ";")),
            };
            writeln!(out, "{},{:.6e},{:.1e},{status}", r.name, r.measured, r.tolerance)?;
        }
        Ok(())
    }

    pub fn write_text(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "suite {}: {:?} in {:.2?}", self.name, self.status(), self.wall_clock)?;
        for r in &self.records {
            let tag = match &r.status {
                CheckStatus::Pass => "PASS".to_string(),
                CheckStatus::Fail => "FAIL".to_string(),
                CheckStatus::Skipped(why) => format!("SKIP ({why})"),
                CheckStatus::Errored(why) => format!("ERROR ({why})"),
            };
            writeln!(out, "  {:<28} {:>12.3e} <= {:<8.1e} {tag}", r.name, r.measured, r.tolerance)?;
        }
        Ok(())
    }
}

/// Names accepted by `run.checks`, in execution order.
pub const SUITE: &[&str] = &[
    "plancherel",
    "plancherel_gaussian",
    "inversion",
    "translation_covariance",
    "modulation_covariance",
    "window_closed_form",
    "scaling_identity",
    "evolved_covariance",
    "conjugation_identity",
    "pairing_t0_value",
    "pairing_bounds",
    "window_change_bound",
    "free_duhamel",
];

fn record(name: &str, tolerance: f64, run: impl FnOnce() -> Result<f64>) -> CheckRecord {
    let (measured, status) = match run() {
        Ok(m) if m <= tolerance => (m, CheckStatus::Pass),
        Ok(m) => (m, CheckStatus::Fail),
        Err(e @ (Error::Resolution(_) | Error::FrequencyRange(_) | Error::Sizing(_))) => {
            (f64::NAN, CheckStatus::Skipped(e.to_string()))
        }
        Err(e) => (f64::NAN, CheckStatus::Errored(e.to_string())),
    };
    CheckRecord { name: name.to_string(), measured, tolerance, status }
}

fn sampled_window(shape: WindowShape, b: f64, grid: Grid) -> Result<Field> {
    Window::Dilated { shape, b, lambda: 1.0 }.sample(grid)
}

fn wpt_points(grid: &Grid) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let dim = grid.dim();
    let xs = [-1.0, -0.3, 0.0, 0.55, 1.2].iter().map(|&x| vec![x; dim]).collect();
    let ks = [-2.0, -0.7, 0.0, 0.4, 1.5].iter().map(|&k| vec![k; dim]).collect();
    (xs, ks)
}

/// Runs the selected identity checks on the configured grid.
pub fn verify_identities(cfg: &RunConfig) -> Result<SuiteReport> {
    let start = Instant::now();
    let grid = cfg.grid()?;
    let b: f64 = cfg.num("window.b")?;
    let powers = cfg.powers()?;
    let seed = cfg.seed()?;
    let mut records = Vec::new();
    for name in cfg.checks() {
        let r = match name.as_str() {
            "plancherel" => record(&name, 1e-6, || {
                let w = sampled_window(WindowShape::Gaussian, b, grid)?;
                let mut worst: f64 = 0.0;
                for (_, f) in identity_corpus(grid, seed)? {
                    worst = worst.max((plancherel_ratio(&f, &w)? - 1.0).abs());
                }
                Ok(worst)
            }),
            "plancherel_gaussian" => record(&name, 1e-6, || {
                let phi = sampled_window(WindowShape::Gaussian, b, grid)?;
                let n = wpt_full(&phi, &phi)?.l2_norm()?;
                let exact = (2.0 * PI).powf(grid.dim() as f64 / 2.0) * PI.powf(grid.dim() as f64 / 2.0);
                Ok((n - exact).abs() / exact)
            }),
            "inversion" => record(&name, 1e-6, || {
                let windows = WindowShape::corpus()
                    .into_iter()
                    .map(|s| sampled_window(s, b, grid))
                    .collect::<Result<Vec<_>>>()?;
                let signals = [Signal::StepGaussian.field(grid, 0.3)?, identity_corpus(grid, seed)?.remove(8).1];
                let mut worst: f64 = 0.0;
                for phi in &windows {
                    for psi in &windows {
                        if inner_product(psi, phi)?.norm() <= 1e-6 {
                            continue;
                        }
                        for f in &signals {
                            worst = worst.max(reconstruct(f, phi, psi)?.relative_l2_distance(f)?);
                        }
                    }
                }
                Ok(worst)
            }),
            "translation_covariance" => record(&name, 1e-10, || {
                let f = identity_corpus(grid, seed)?.remove(9).1;
                let shift = 8;
                let a = shift as f64 * grid.spacing();
                let n = grid.points_per_axis();
                let mut moved = Field::zeros(grid);
                {
                    let src = f.samples()?;
                    let dst = moved.samples_mut()?;
                    let stride = if grid.dim() == 1 { 1 } else { n };
                    for (flat, z) in src.iter().enumerate() {
                        if grid.unflatten(flat)[0] + shift < n {
                            dst[flat + shift * stride] = *z;
                        }
                    }
                }
                let w = Window::gaussian(b, 2.0, grid.dim())?;
                let (xs, ks) = wpt_points(&grid);
                let shifted: Vec<Vec<f64>> =
                    xs.iter().map(|x| x.iter().enumerate().map(|(i, v)| if i == 0 { v - a } else { *v }).collect()).collect();
                let lhs = wpt(&moved, &w, &xs, &ks)?;
                let rhs = wpt(&f, &w, &shifted, &ks)?;
                let mut worst: f64 = 0.0;
                for i in 0..xs.len() {
                    for (j, k) in ks.iter().enumerate() {
                        let phase = Complex64::from_polar(1.0, -a * k[0]);
                        worst = worst.max((lhs.value(i, j) - phase * rhs.value(i, j)).norm());
                    }
                }
                Ok(worst / f.l2_norm()?)
            }),
            "modulation_covariance" => record(&name, 1e-10, || {
                let f = identity_corpus(grid, seed)?.remove(10).1;
                let eta = 5.0 * grid.dual_spacing();
                let g = f.map_with_position(|x, z| z * Complex64::from_polar(1.0, eta * x[0]))?;
                let w = Window::gaussian(b, 2.0, grid.dim())?;
                let (xs, ks) = wpt_points(&grid);
                let moved: Vec<Vec<f64>> =
                    ks.iter().map(|k| k.iter().enumerate().map(|(i, v)| if i == 0 { v - eta } else { *v }).collect()).collect();
                let lhs = wpt(&g, &w, &xs, &ks)?;
                let rhs = wpt(&f, &w, &xs, &moved)?;
                let worst = lhs.values.iter().zip(&rhs.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
                Ok(worst / f.l2_norm()?)
            }),
            "window_closed_form" => record(&name, 1e-8, || {
                let mut worst: f64 = 0.0;
                for bb in [0.25, 0.5] {
                    for lambda in [1.0, 4.0, 16.0] {
                        let spec = WindowSpec::new(bb, lambda, 0.0, grid.dim())?;
                        let base = evaluate_window(spec, grid)?;
                        for t in [0.0, 0.3, 1.0] {
                            let closed = evaluate_window(spec.with_time(t), grid)?;
                            worst = worst.max(closed.max_distance(&free_propagate(&base, t)?)?);
                        }
                    }
                }
                Ok(worst)
            }),
            "scaling_identity" => record(&name, 1e-8, || {
                let mut worst: f64 = 0.0;
                let (xs, ks) = wpt_points(&grid);
                for lambda in [1.0, 4.0, 16.0] {
                    let spec = WindowSpec::new(b, lambda, 0.0, grid.dim())?;
                    let phi = evaluate_window(spec, grid)?;
                    let w = wpt(&phi, &Window::Evolved(spec), &xs, &ks)?;
                    let s = lambda.powf(b);
                    for (i, x) in xs.iter().enumerate() {
                        for (j, k) in ks.iter().enumerate() {
                            let xs_: Vec<f64> = x.iter().map(|v| v * s).collect();
                            let ks_: Vec<f64> = k.iter().map(|v| v / s).collect();
                            worst = worst.max((w.value(i, j) - gaussian_self_wpt(&xs_, &ks_)).norm());
                        }
                    }
                }
                Ok(worst)
            }),
            "evolved_covariance" => record(&name, 1e-8, || {
                let mut worst: f64 = 0.0;
                let (xs, ks) = wpt_points(&grid);
                for lambda in [1.0, 4.0] {
                    for t in [0.3, 1.0] {
                        let spec = WindowSpec::new(b, lambda, t, grid.dim())?;
                        let phi = evaluate_window(spec, grid)?;
                        let w = wpt(&phi, &Window::Evolved(spec), &xs, &ks)?;
                        for (i, x) in xs.iter().enumerate() {
                            for (j, k) in ks.iter().enumerate() {
                                worst = worst.max((w.value(i, j) - window_self_wpt(spec, x, k)).norm());
                            }
                        }
                    }
                }
                Ok(worst)
            }),
            "conjugation_identity" => record(&name, 1e-10, || {
                // the full-lattice check is quadratic in the lattice size
                let small = Grid::new(grid.dim(), grid.points_per_axis().min(256), grid.half_width().min(10.0))?;
                let u = identity_corpus(small, seed)?.remove(11).1;
                let rep = conjugation_identity_check(&u, WindowSpec::new(b, 2.0, 0.3, grid.dim())?)?;
                Ok(rep.max_deviation / rep.u_norm)
            }),
            "pairing_t0_value" => record(&name, 1e-8, || {
                let spec = WindowSpec::new(0.25, 1.0, 0.0, 1)?;
                let v = nonlinear_pairing(spec, NonlinearityPowers::new(2, 0)?)?.norm();
                Ok((v - (2.0 * PI / 3.0).sqrt()).abs())
            }),
            "pairing_bounds" => record(&name, 0.2, || pairing_stability(0.25)),
            "window_change_bound" => record(&name, 1e-6, || {
                if grid.dim() != 1 {
                    return Err(Error::UnsupportedDimension(grid.dim()));
                }
                let small = Grid::new(1, grid.points_per_axis().min(512), grid.half_width().min(16.0))?;
                let signals: Vec<Field> = [Signal::Gaussian, Signal::StepGaussian, Signal::ChirpedGaussian, Signal::WideBump]
                    .iter()
                    .map(|s| s.field(small, 0.2))
                    .collect::<Result<_>>()?;
                window_change_worst(&signals, powers, 0.25)
            }),
            "free_duhamel" => record(&name, 1e-8, || {
                if grid.dim() != 1 {
                    return Err(Error::UnsupportedDimension(grid.dim()));
                }
                let u0 = Signal::StepGaussian.field(grid, 0.0)?.map_with_position(|x, z| {
                    z * (-x[0] * x[0]).exp() + Complex64::new((-x[0] * x[0] / 2.0).exp(), 0.0)
                })?;
                let traj = nls_solve(&u0, SolverParams::new(None, 0.5, 4))?;
                let spec = WindowSpec::new(b, 4.0, 0.0, 1)?;
                Ok(duhamel_residual(&traj, spec, &[-1.0, 0.0, 0.7], &[-2.0, 0.5, 3.0])?.max_residual)
            }),
            other => CheckRecord {
                name: other.to_string(),
                measured: f64::NAN,
                tolerance: 0.0,
                status: CheckStatus::Errored(format!("unknown check `{other}`")),
            },
        };
        records.push(r);
    }
    Ok(SuiteReport { name: "identities".into(), records, wall_clock: start.elapsed() })
}

/// Largest relative change of the empirical pairing constants between
/// `lambda <= 100` and `lambda <= 1000`, over both regimes and the powers
/// `(2, 0)` and `(2, 1)`. Non-positive constants count as an infinite change.
pub fn pairing_stability(b: f64) -> Result<f64> {
    let lambdas: Vec<f64> = (0..=24).map(|k| 10f64.powf(k as f64 / 8.0)).collect();
    let mut worst: f64 = 0.0;
    for powers in [NonlinearityPowers::new(2, 0)?, NonlinearityPowers::new(2, 1)?] {
        let rep = pairing_lower_bound_check(b, 1, &lambdas, 10.0, 17, powers)?;
        for regime in [BoundRegime::Inner, BoundRegime::Outer] {
            let c2 = rep.constant_up_to(regime, 100.0);
            let c3 = rep.constant_up_to(regime, 1000.0);
            if !(c2 > 0.0 && c3 > 0.0) {
                return Ok(f64::INFINITY);
            }
            worst = worst.max((c3 - c2).abs() / c2);
        }
    }
    Ok(worst)
}

/// Largest relative violation `max(|W_a f| - rhs) / max|W_a f|` of the
/// window-change bound with `a = phi_lambda^(t)` and `nb = N[a]`, over
/// `lambda in {1, 4, 16}`, `t in {0, 0.3}` and the given signals.
pub fn window_change_worst(signals: &[Field], powers: NonlinearityPowers, b: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for f in signals {
        for lambda in [1.0, 4.0, 16.0] {
            for t in [0.0, 0.3] {
                let a = evaluate_window(WindowSpec::new(b, lambda, t, 1)?, *f.grid())?;
                let nb = a.map(|z| powers.apply(z))?;
                let rep = window_change_bound_check(f, &a, &nb)?;
                worst = worst.max(rep.max_violation / rep.max_lhs.max(f64::MIN_POSITIVE));
            }
        }
    }
    Ok(worst)
}

/// Runs the suite and writes `identities.csv`, `identities.txt` and the manifest.
pub fn cmd_verify_identities(cfg: &RunConfig) -> Result<SuiteReport> {
    let report = verify_identities(cfg)?;
    let dir = command_dir(cfg, Command::VerifyIdentities)?;
    report.write_csv(BufWriter::new(fs::File::create(dir.join("identities.csv"))?))?;
    report.write_text(BufWriter::new(fs::File::create(dir.join("identities.txt"))?))?;
    let tol: Vec<(&str, f64)> = report.records.iter().map(|r| (r.name.as_str(), r.tolerance)).collect();
    write_manifest(&dir, Command::VerifyIdentities, cfg, &tol)?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// detectors, solver, experiment

fn save_curve(dir: &Path, stem: &str, curve: &CriterionCurve) -> Result<()> {
    curve.write_csv(BufWriter::new(fs::File::create(dir.join(format!("{stem}.csv")))?))?;
    curve.write_summary(BufWriter::new(fs::File::create(dir.join(format!("{stem}_summary.txt")))?))?;
    Ok(())
}

fn verdict_tolerances(p: &CriterionParams) -> [(&'static str, f64); 2] {
    [("convergent_below", -1.0 - p.margin), ("divergent_above", -1.0 + p.margin)]
}

/// Runs the configured detector (`detector.method = wavepacket | cone`).
pub fn cmd_detect(cfg: &RunConfig) -> Result<CriterionCurve> {
    let f = cfg.signal()?;
    let pt = cfg.phase_point()?;
    let params = cfg.criterion()?;
    let curve = match cfg.get("detector.method") {
        "wavepacket" => wavepacket_detect(&f, &pt, &params, &cfg.window_family()?)?,
        "cone" => {
            let width: f64 = cfg.num("detector.cutoff_width")?;
            cone_fourier_detect_with(&f, &pt, width, params.sector_halfangle, &params)?
        }
        other => return Err(Error::Parse(format!("unknown detector method `{other}`"))),
    };
    let dir = command_dir(cfg, Command::Detect)?;
    save_curve(&dir, "curve", &curve)?;
    write_manifest(&dir, Command::Detect, cfg, &verdict_tolerances(&params))?;
    Ok(curve)
}

/// One transported hypothesis at level `detector.s` in `detector.direction`.
pub fn cmd_transported(cfg: &RunConfig) -> Result<CriterionCurve> {
    let f = cfg.signal()?;
    let params = cfg.criterion()?;
    let curve = transported_criterion(&f, cfg.num("detector.xi0")?, &params)?;
    let dir = command_dir(cfg, Command::Transported)?;
    save_curve(&dir, "curve", &curve)?;
    write_manifest(&dir, Command::Transported, cfg, &verdict_tolerances(&params))?;
    Ok(curve)
}

/// Solves to `solver.t0` and writes the trajectory plus `conservation.csv`.
pub fn cmd_solve(cfg: &RunConfig) -> Result<(Trajectory, ConservationReport)> {
    let u0 = cfg.signal()?;
    let steps: usize = cfg.num("solver.steps")?;
    let mut params = SolverParams::new(Some(cfg.powers()?), cfg.num("solver.t0")?, steps).with_scheme(cfg.scheme()?);
    params.store_every = (steps / 16).max(1);
    let traj = nls_solve(&u0, params)?;
    let rep = conservation_report(&traj)?;
    let dir = command_dir(cfg, Command::Solve)?;
    traj.save(&dir.join("trajectory"))?;
    let mut out = BufWriter::new(fs::File::create(dir.join("conservation.csv"))?);
    writeln!(out, "t,mass,energy")?;
    for (i, t) in rep.times.iter().enumerate() {
        let e = rep.energy.as_ref().map_or(f64::NAN, |e| e[i]);
        writeln!(out, "{t:.17e},{:.17e},{e:.17e}", rep.mass[i])?;
    }
    drop(out);
    write_manifest(&dir, Command::Solve, cfg, &[])?;
    Ok((traj, rep))
}

/// Runs the propagation experiment and persists every curve and the trajectory.
pub fn cmd_theorem2(cfg: &RunConfig) -> Result<Theorem2Report> {
    let u0 = cfg.signal()?;
    let tc = cfg.theorem2()?;
    let report = theorem2_experiment(&u0, &tc)?;
    let dir = command_dir(cfg, Command::Theorem2)?;
    for (stem, h) in [("hypothesis_forward", &report.forward), ("hypothesis_backward", &report.backward)] {
        if let Hypothesis::Evaluated(c) = h {
            save_curve(&dir, stem, c)?;
        }
    }
    for (k, c) in report.conclusions.iter().enumerate() {
        save_curve(&dir, &format!("conclusion_{k:03}"), &c.curve)?;
    }
    report.trajectory.save(&dir.join("trajectory"))?;
    report.write_summary(BufWriter::new(fs::File::create(dir.join("summary.txt"))?))?;
    report.write_table(BufWriter::new(fs::File::create(dir.join("table.txt"))?))?;
    write_manifest(&dir, Command::Theorem2, cfg, &verdict_tolerances(&tc.detector))?;
    Ok(report)
}

/// Converts stored curves and slices into gnuplot-ready files next to `out_dir`.
///
/// A curve CSV yields `<stem>_loglog.dat` (`log10 lambda, log10 g`) and
/// `<stem>_fit.dat` (the fitted tail line); a slice CSV yields
/// `<stem>_matrix.dat`. Nothing is recomputed beyond the tail fit.
pub fn cmd_plotdata(inputs: &[PathBuf], out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    for input in inputs {
        let text = fs::read_to_string(input)?;
        let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("data").to_string();
        if text.starts_with("lambda,integrand") {
            let (l, g) = CriterionCurve::read_csv(text.as_bytes())?;
            let path = out_dir.join(format!("{stem}_loglog.dat"));
            let mut out = BufWriter::new(fs::File::create(&path)?);
            writeln!(out, "# log10(lambda) log10(integrand)")?;
            for (a, b) in l.iter().zip(&g).filter(|(_, b)| **b > 0.0) {
                writeln!(out, "{:.10e} {:.10e}", a.log10(), b.log10())?;
            }
            written.push(path);
            let fit = crate::microlocal::verdict_fit(&l, &g, 0.3, 3);
            if let (Some(m), Some(c), Some(&top)) = (fit.tail_slope, fit.intercept, l.last()) {
                let path = out_dir.join(format!("{stem}_fit.dat"));
                let mut out = BufWriter::new(fs::File::create(&path)?);
                writeln!(out, "# tail fit slope {m:.6} verdict {}", fit.verdict)?;
                for lam in [top / 10.0, top] {
                    writeln!(out, "{:.10e} {:.10e}", lam.log10(), (m * lam.ln() + c) / 10f64.ln())?;
                }
                written.push(path);
            }
        } else if text.starts_with("# window") {
            let slice = WptSlice::read_csv(BufReader::new(text.as_bytes()))?;
            let path = out_dir.join(format!("{stem}_matrix.dat"));
            slice.write_gnuplot_matrix(BufWriter::new(fs::File::create(&path)?))?;
            written.push(path);
        } else {
            return Err(Error::Parse(format!("{}: neither a curve nor a slice CSV", input.display())));
        }
    }
    Ok(written)
}

/// Process exit status for a detector verdict.
pub fn verdict_exit_code(v: Verdict) -> i32 {
    if v.is_decisive() {
        0
    } else {
        2
    }
}

/// Process exit status for an error.
pub fn error_exit_code(e: &Error) -> i32 {
    match e {
        Error::Parameter(_) | Error::Parse(_) | Error::InvalidSpec(_) | Error::Sizing(_) => 64,
        Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => 66,
        _ => 70,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_sections_and_overrides() {
        let text = "# comment\n[grid]\npoints = 512\nhalf_width = 8.0 # inline\n[solver]\np = 3\nscheme = \"lie\"\n";
        let mut cfg = RunConfig::parse(text, RunConfig::defaults(Command::Solve)).unwrap();
        assert_eq!(cfg.grid().unwrap(), Grid::new(1, 512, 8.0).unwrap());
        assert_eq!(cfg.powers().unwrap(), NonlinearityPowers::new(3, 1).unwrap());
        cfg.apply_override("solver.q=0").unwrap();
        assert_eq!(cfg.powers().unwrap().q, 0);
        assert!(cfg.apply_override("solver.nope=1").is_err());
        assert!(cfg.apply_override("novalue").is_err());
        assert_eq!(cfg.scheme().unwrap(), StepScheme::Lie);
        assert!(RunConfig::parse("[grid]\npoints\n", RunConfig::defaults(Command::Solve)).is_err());
        assert!(RunConfig::parse("points = 3\n", RunConfig::defaults(Command::Solve)).is_err());
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = RunConfig::defaults(Command::Detect);
        cfg.set("detector.s", "1.75").unwrap();
        let back = RunConfig::parse(&cfg.to_toml(), RunConfig::defaults(Command::Solve)).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(error_exit_code(&Error::Parameter("r".into())), 64);
        assert_eq!(error_exit_code(&Error::Io(std::io::Error::from(std::io::ErrorKind::NotFound))), 66);
        assert_eq!(error_exit_code(&Error::Resolution("x".into())), 70);
        assert_eq!(verdict_exit_code(Verdict::Inconclusive), 2);
        assert_eq!(verdict_exit_code(Verdict::Divergent), 0);
    }

    #[test]
    fn empty_suite_passes() {
        let mut cfg = RunConfig::defaults(Command::VerifyIdentities);
        cfg.set("run.checks", "none").unwrap();
        let rep = verify_identities(&cfg).unwrap();
        assert!(rep.records.is_empty());
        assert!(rep.passed());
    }

    #[test]
    fn coarse_grid_skips_with_reason() {
        let mut cfg = RunConfig::defaults(Command::VerifyIdentities);
        cfg.set("grid.points", "64").unwrap();
        cfg.set("run.checks", "plancherel,window_closed_form,scaling_identity").unwrap();
        let rep = verify_identities(&cfg).unwrap();
        assert_eq!(rep.status(), SuiteStatus::Incomplete);
        for r in &rep.records {
            match &r.status {
                CheckStatus::Skipped(why) => assert!(why.contains("under-resolved"), "{why}"),
                other => panic!("{}: {other:?}", r.name),
            }
        }
    }

    #[test]
    fn unknown_check_is_an_error_record() {
        let mut cfg = RunConfig::defaults(Command::VerifyIdentities);
        cfg.set("run.checks", "bogus").unwrap();
        assert_eq!(verify_identities(&cfg).unwrap().status(), SuiteStatus::Errored);
    }
}
