//! Free and nonlinear Schrödinger evolution for `i u_t + Delta u / 2 = u^p conj(u)^q`.
//!
//! The free flow is the Fourier multiplier `e^{-i |xi|^2 t / 2}`. The
//! nonlinear equation is integrated by operator splitting: exact spectral
//! free steps alternate with pointwise steps of `u_t = -i u^p conj(u)^q`.

use std::fmt;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{fourier, inverse_fourier, read_field, write_field, FftNd, Field, Grid};
use crate::wavepacket::{wpt, Window};
use crate::windows::{NonlinearityPowers, WindowSpec};

/// `e^{i t Delta / 2} f`, computed spectrally.
pub fn free_propagate(f: &Field, t: f64) -> Result<Field> {
    let spec = fourier(f)?;
    let grid = *f.grid();
    let s = spec.samples()?;
    let evolved: Vec<Complex64> = s
        .iter()
        .enumerate()
        .map(|(i, z)| {
            let k2: f64 = grid.wavevector(i).iter().map(|k| k * k).sum();
            z * Complex64::from_polar(1.0, -k2 * t / 2.0)
        })
        .collect();
    let spec = spec.map(|_| Complex64::new(0.0, 0.0))?;
    let mut spec = spec;
    spec.samples_mut()?.copy_from_slice(&evolved);
    inverse_fourier(&spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepScheme {
    /// Half free step, full nonlinear step, half free step.
    Strang,
    /// Full nonlinear step followed by a full free step.
    Lie,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Substep {
    /// `u e^{-i |u|^{2q} tau}`, exact when `p = q + 1`.
    ExactPhase,
    /// Classical fourth-order Runge-Kutta per lattice point.
    Rk4,
}

impl fmt::Display for StepScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StepScheme::Strang => "strang",
            StepScheme::Lie => "lie",
        })
    }
}

impl fmt::Display for Substep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Substep::ExactPhase => "exact_phase",
            Substep::Rk4 => "rk4",
        })
    }
}

impl std::str::FromStr for StepScheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strang" => Ok(StepScheme::Strang),
            "lie" => Ok(StepScheme::Lie),
            _ => Err(Error::Parse(format!("unknown step scheme `{s}`"))),
        }
    }
}

impl std::str::FromStr for Substep {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact_phase" => Ok(Substep::ExactPhase),
            "rk4" => Ok(Substep::Rk4),
            _ => Err(Error::Parse(format!("unknown substep `{s}`"))),
        }
    }
}

/// How to integrate: `powers = None` switches the nonlinearity off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverParams {
    pub powers: Option<NonlinearityPowers>,
    pub t_end: f64,
    pub n_steps: usize,
    pub scheme: StepScheme,
    /// `None` picks `ExactPhase` when allowed and `Rk4` otherwise.
    pub substep: Option<Substep>,
    /// Keep every `store_every`-th state (the final state is always kept).
    pub store_every: usize,
}

impl SolverParams {
    pub fn new(powers: Option<NonlinearityPowers>, t_end: f64, n_steps: usize) -> Self {
        Self { powers, t_end, n_steps, scheme: StepScheme::Strang, substep: None, store_every: 1 }
    }

    pub fn with_scheme(self, scheme: StepScheme) -> Self {
        Self { scheme, ..self }
    }

    pub fn with_substep(self, substep: Substep) -> Self {
        Self { substep: Some(substep), ..self }
    }

    fn resolved_substep(&self) -> Result<Substep> {
        match (self.substep, self.powers) {
            (Some(Substep::ExactPhase), Some(p)) if !p.is_gauge_invariant() => Err(Error::Parameter(
                format!("exact phase substep needs p = q + 1, got {p}"),
            )),
            (Some(s), _) => Ok(s),
            (None, Some(p)) if !p.is_gauge_invariant() => Ok(Substep::Rk4),
            (None, _) => Ok(Substep::ExactPhase),
        }
    }
}

/// States of one solver run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Field>,
    pub powers: Option<NonlinearityPowers>,
    pub scheme: StepScheme,
    pub substep: Substep,
    pub n_steps: usize,
}

impl Trajectory {
    pub fn grid(&self) -> &Grid {
        self.states[0].grid()
    }

    pub fn final_state(&self) -> &Field {
        self.states.last().expect("trajectory holds at least one state")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory holds at least one time")
    }

    /// Writes `manifest.txt` plus one field file per state into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut m = BufWriter::new(fs::File::create(dir.join("manifest.txt"))?);
        writeln!(m, "count = {}", self.states.len())?;
        match self.powers {
            Some(p) => writeln!(m, "p = {}\nq = {}", p.p, p.q)?,
            None => writeln!(m, "nonlinearity = none")?,
        }
        writeln!(m, "scheme = {}", self.scheme)?;
        writeln!(m, "substep = {}", self.substep)?;
        writeln!(m, "n_steps = {}", self.n_steps)?;
        let times: Vec<String> = self.times.iter().map(|t| format!("{t:.17e}")).collect();
        writeln!(m, "times = {}", times.join(","))?;
        for (i, s) in self.states.iter().enumerate() {
            let f = BufWriter::new(fs::File::create(dir.join(format!("state_{i:05}.field")))?);
            write_field(s, f)?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Trajectory> {
        let text = fs::read_to_string(dir.join("manifest.txt"))?;
        let mut kv = std::collections::HashMap::new();
        for line in text.lines() {
            if let Some((k, v)) = line.split_once('=') {
                kv.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        let get = |k: &str| kv.get(k).ok_or_else(|| Error::Parse(format!("manifest lacks `{k}`")));
        let count: usize = get("count")?.parse().map_err(|_| Error::Parse("bad count".into()))?;
        let powers = match (kv.get("p"), kv.get("q")) {
            (Some(p), Some(q)) => Some(NonlinearityPowers::new(
                p.parse().map_err(|_| Error::Parse("bad p".into()))?,
                q.parse().map_err(|_| Error::Parse("bad q".into()))?,
            )?),
            _ => None,
        };
        let times = get("times")?
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| Error::Parse("bad time".into())))
            .collect::<Result<Vec<_>>>()?;
        let states = (0..count)
            .map(|i| {
                let f = fs::File::open(dir.join(format!("state_{i:05}.field")))?;
                read_field(BufReader::new(f))
            })
            .collect::<Result<Vec<_>>>()?;
        if times.len() != count {
            return Err(Error::Parse("times and states disagree in length".into()));
        }
        Ok(Trajectory {
            times,
            states,
            powers,
            scheme: get("scheme")?.parse()?,
            substep: get("substep")?.parse()?,
            n_steps: get("n_steps")?.parse().map_err(|_| Error::Parse("bad n_steps".into()))?,
        })
    }
}

/// Free flow in FFT order, reused across steps.
struct FreeStep {
    fft: FftNd,
    half: Vec<Complex64>,
    full: Vec<Complex64>,
    norm: f64,
}

impl FreeStep {
    fn new(grid: &Grid, dt: f64) -> Self {
        let n = grid.points_per_axis();
        let dk = grid.dual_spacing();
        let freq = |i: usize| if i < n / 2 { i as f64 * dk } else { (i as f64 - n as f64) * dk };
        let k2: Vec<f64> = (0..grid.len())
            .map(|flat| {
                let idx = grid.unflatten(flat);
                (0..grid.dim()).map(|a| freq(idx[a]).powi(2)).sum()
            })
            .collect();
        let mult = |tau: f64| k2.iter().map(|k| Complex64::from_polar(1.0, -k * tau / 2.0)).collect();
        Self { fft: FftNd::new(grid), half: mult(dt / 2.0), full: mult(dt), norm: 1.0 / grid.len() as f64 }
    }

    fn apply(&self, u: &mut [Complex64], half: bool) {
        let m = if half { &self.half } else { &self.full };
        self.fft.forward(u);
        u.iter_mut().zip(m).for_each(|(z, e)| *z *= e * self.norm);
        self.fft.inverse(u);
    }
}

fn nonlinear_step(u: &mut [Complex64], powers: NonlinearityPowers, tau: f64, substep: Substep) {
    match substep {
        Substep::ExactPhase => {
            let q = powers.q as i32;
            u.par_iter_mut().for_each(|z| {
                let rate = z.norm_sqr().powi(q);
                *z *= Complex64::from_polar(1.0, -rate * tau);
            });
        }
        Substep::Rk4 => {
            let rhs = |z: Complex64| -Complex64::i() * powers.apply(z);
            u.par_iter_mut().for_each(|z| {
                let k1 = rhs(*z);
                let k2 = rhs(*z + k1 * (tau / 2.0));
                let k3 = rhs(*z + k2 * (tau / 2.0));
                let k4 = rhs(*z + k3 * tau);
                *z += (k1 + 2.0 * k2 + 2.0 * k3 + k4) * (tau / 6.0);
            });
        }
    }
}

/// Integrates from `u0` at `t = 0` to `params.t_end` (which may be negative).
pub fn nls_solve(u0: &Field, params: SolverParams) -> Result<Trajectory> {
    let grid = *u0.grid();
    let mut u = u0.space_samples()?.to_vec();
    let substep = params.resolved_substep()?;
    if !params.t_end.is_finite() {
        return Err(Error::Parameter("t_end must be finite".into()));
    }
    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![u0.clone()],
        powers: params.powers,
        scheme: params.scheme,
        substep,
        n_steps: params.n_steps,
    };
    if params.t_end == 0.0 {
        return Ok(traj);
    }
    if params.n_steps == 0 {
        return Err(Error::Parameter("n_steps must be at least 1".into()));
    }
    let dt = params.t_end / params.n_steps as f64;
    let free = FreeStep::new(&grid, dt);
    let every = params.store_every.max(1);
    for step in 1..=params.n_steps {
        match (params.powers, params.scheme) {
            (None, _) => free.apply(&mut u, false),
            (Some(p), StepScheme::Strang) => {
                free.apply(&mut u, true);
                nonlinear_step(&mut u, p, dt, substep);
                free.apply(&mut u, true);
            }
            (Some(p), StepScheme::Lie) => {
                nonlinear_step(&mut u, p, dt, substep);
                free.apply(&mut u, false);
            }
        }
        let t = step as f64 * dt;
        if u.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::BlowUp {
                time: t,
                completed: step - 1,
                requested: params.n_steps,
                trajectory: Box::new(traj),
            });
        }
        if step % every == 0 || step == params.n_steps {
            traj.times.push(t);
            traj.states.push(Field::from_samples(grid, u.clone())?);
        }
    }
    Ok(traj)
}

/// Mass and (when `p = q + 1`) energy along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct ConservationReport {
    pub times: Vec<f64>,
    pub mass: Vec<f64>,
    pub energy: Option<Vec<f64>>,
    /// `max_t |M(t) - M(0)| / M(0)`.
    pub mass_drift: f64,
    pub energy_drift: Option<f64>,
}

fn gradient_norm_sqr(f: &Field) -> Result<f64> {
    let spec = fourier(f)?;
    let grid = *f.grid();
    let s: f64 = spec
        .samples()?
        .iter()
        .enumerate()
        .map(|(i, z)| grid.wavevector(i).iter().map(|k| k * k).sum::<f64>() * z.norm_sqr())
        .sum();
    Ok(s * grid.dual_cell_volume())
}

/// `E = ||grad u||^2 / 2 + (2 / (p+q+1)) int |u|^{p+q+1}` for gauge-invariant powers.
pub fn energy(f: &Field, powers: Option<NonlinearityPowers>) -> Result<f64> {
    let kinetic = 0.5 * gradient_norm_sqr(f)?;
    let potential = match powers {
        None => 0.0,
        Some(p) => {
            let e = (p.p + p.q + 1) as i32;
            let s: f64 = f.samples()?.iter().map(|z| z.norm().powi(e)).sum();
            2.0 / e as f64 * s * f.grid().cell_volume()
        }
    };
    Ok(kinetic + potential)
}

fn relative_drift(v: &[f64]) -> f64 {
    let v0 = v[0];
    let scale = if v0.abs() > 0.0 { v0.abs() } else { 1.0 };
    v.iter().map(|x| (x - v0).abs()).fold(0.0, f64::max) / scale
}

pub fn conservation_report(traj: &Trajectory) -> Result<ConservationReport> {
    let mass = traj
        .states
        .iter()
        .map(|s| s.l2_norm().map(|n| n * n))
        .collect::<Result<Vec<_>>>()?;
    let has_energy = traj.powers.is_none_or(|p| p.is_gauge_invariant());
    let energy = if has_energy {
        Some(traj.states.iter().map(|s| energy(s, traj.powers)).collect::<Result<Vec<_>>>()?)
    } else {
        None
    };
    Ok(ConservationReport {
        times: traj.times.clone(),
        mass_drift: relative_drift(&mass),
        energy_drift: energy.as_deref().map(relative_drift),
        mass,
        energy,
    })
}

/// One `(x, xi)` sample of the transformed Duhamel identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DuhamelSample {
    pub x: f64,
    pub xi: f64,
    pub lhs: Complex64,
    pub free_term: Complex64,
    pub integral: Complex64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DuhamelReport {
    pub t: f64,
    pub samples: Vec<DuhamelSample>,
    pub max_residual: f64,
    /// Largest relative change of the time integral when every other
    /// stored state is dropped; above 0.1 the quadrature is under-resolved.
    pub integral_refinement_change: f64,
    pub under_resolved: bool,
}

/// Evaluates both sides of
///
/// ```text
/// W_{phi^(t)} u(t)(x, xi) = e^{-i|xi|^2 t/2} W_phi u0(x - t xi, xi)
///     - i int_0^t e^{-i|xi|^2 (t - tau)/2} W_{phi^(tau)}[N[u(tau)]](x + (tau - t) xi, xi) dtau
/// ```
///
/// at the final time of `traj`, for every pair in `x_set x xi_set` (1-d grids).
/// The time integral is the composite trapezoid rule on the stored states.
pub fn duhamel_residual(traj: &Trajectory, spec: WindowSpec, x_set: &[f64], xi_set: &[f64]) -> Result<DuhamelReport> {
    let grid = *traj.grid();
    if grid.dim() != 1 {
        return Err(Error::UnsupportedDimension(grid.dim()));
    }
    let t = traj.final_time();
    let u0 = &traj.states[0];
    let window = |tau: f64| Window::Evolved(spec.with_time(tau));
    let xs: Vec<Vec<f64>> = x_set.iter().map(|&x| vec![x]).collect();

    // integrand[i][sample] for every stored time
    let nl_states: Vec<Option<Field>> = traj
        .states
        .iter()
        .map(|s| traj.powers.map(|p| s.map(|z| p.apply(z))).transpose())
        .collect::<Result<_>>()?;
    let integrand: Vec<Vec<Complex64>> = traj
        .times
        .par_iter()
        .zip(&nl_states)
        .map(|(&tau, nl)| {
            let mut row = Vec::with_capacity(x_set.len() * xi_set.len());
            for &xi in xi_set {
                let Some(nl) = nl else {
                    row.extend(std::iter::repeat_n(Complex64::new(0.0, 0.0), x_set.len()));
                    continue;
                };
                let shifted: Vec<Vec<f64>> = x_set.iter().map(|&x| vec![x + (tau - t) * xi]).collect();
                let w = wpt(nl, &window(tau), &shifted, &[vec![xi]])?;
                let phase = Complex64::from_polar(1.0, -xi * xi * (t - tau) / 2.0);
                row.extend(w.values.iter().map(|v| v * phase));
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;

    let trapezoid = |stride: usize| -> Vec<Complex64> {
        let idx: Vec<usize> = (0..traj.times.len()).step_by(stride).collect();
        let mut acc = vec![Complex64::new(0.0, 0.0); x_set.len() * xi_set.len()];
        for w in idx.windows(2) {
            let h = traj.times[w[1]] - traj.times[w[0]];
            for (a, (l, r)) in acc.iter_mut().zip(integrand[w[0]].iter().zip(&integrand[w[1]])) {
                *a += (l + r) * (h / 2.0);
            }
        }
        acc
    };
    let integral = trapezoid(1);
    let coarse_ok = traj.times.len() >= 3 && (traj.times.len() - 1).is_multiple_of(2);
    let coarse = if coarse_ok { Some(trapezoid(2)) } else { None };

    let mut samples = Vec::new();
    let mut change: f64 = 0.0;
    for (j, &xi) in xi_set.iter().enumerate() {
        let lhs = wpt(traj.final_state(), &window(t), &xs, &[vec![xi]])?;
        let shifted: Vec<Vec<f64>> = x_set.iter().map(|&x| vec![x - t * xi]).collect();
        let free = wpt(u0, &window(0.0), &shifted, &[vec![xi]])?;
        let phase = Complex64::from_polar(1.0, -xi * xi * t / 2.0);
        for (i, &x) in x_set.iter().enumerate() {
            let k = j * x_set.len() + i;
            let free_term = free.values[i] * phase;
            let rhs = free_term - Complex64::i() * integral[k];
            if let Some(c) = &coarse {
                let scale = integral[k].norm().max(1e-300);
                if integral[k].norm() > 1e-12 * free_term.norm().max(lhs.values[i].norm()) {
                    change = change.max((c[k] - integral[k]).norm() / scale);
                }
            }
            samples.push(DuhamelSample {
                x,
                xi,
                lhs: lhs.values[i],
                free_term,
                integral: integral[k],
                residual: (lhs.values[i] - rhs).norm(),
            });
        }
    }
    let max_residual = samples.iter().map(|s| s.residual).fold(0.0, f64::max);
    Ok(DuhamelReport { t, samples, max_residual, integral_refinement_change: change, under_resolved: change > 0.1 })
}

/// `(1 + i t)^{-n/2} e^{-|x|^2 / (2 (1 + i t))}`: the free evolution of `e^{-|x|^2/2}`.
pub fn gaussian_free_solution(x: &[f64], t: f64) -> Complex64 {
    let z = Complex64::new(1.0, t);
    let r2: f64 = x.iter().map(|c| c * c).sum();
    z.powf(-(x.len() as f64) / 2.0) * (-r2 / (2.0 * z)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(1, 1024, 20.0).unwrap()
    }

    fn gauss(g: Grid) -> Field {
        Field::from_real_fn(g, |x| (-x * x / 2.0).exp())
    }

    fn cubic() -> Option<NonlinearityPowers> {
        Some(NonlinearityPowers::new(2, 1).unwrap())
    }

    #[test]
    fn free_gaussian_closed_form() {
        let g = grid();
        let f = gauss(g);
        assert!(free_propagate(&f, 0.0).unwrap().max_distance(&f).unwrap() < 1e-15);
        let u = free_propagate(&f, 1.0).unwrap();
        let exact = Field::from_fn(g, |x| gaussian_free_solution(x, 1.0));
        assert!(u.max_distance(&exact).unwrap() < 1e-10);
        let two = free_propagate(&free_propagate(&f, 0.4).unwrap(), 0.7).unwrap();
        assert!(two.max_distance(&free_propagate(&f, 1.1).unwrap()).unwrap() < 1e-12);
    }

    #[test]
    fn free_flow_is_unitary() {
        let g = grid();
        let f = Field::from_fn(g, |x| Complex64::from_polar((x[0] - 1.0).tanh() * (-x[0] * x[0] / 8.0).exp(), x[0]));
        let n = f.l2_norm().unwrap();
        for k in -8..=8 {
            let u = free_propagate(&f, k as f64 * 0.25).unwrap();
            assert!((u.l2_norm().unwrap() - n).abs() < 1e-12 * n);
        }
    }

    #[test]
    fn linear_case_is_exact() {
        let g = grid();
        let u0 = gauss(g);
        let traj = nls_solve(&u0, SolverParams::new(Some(NonlinearityPowers::new(1, 0).unwrap()), 1.0, 256)).unwrap();
        let exact = free_propagate(&u0, 1.0).unwrap().map(|z| z * Complex64::from_polar(1.0, -1.0)).unwrap();
        assert!(traj.final_state().max_distance(&exact).unwrap() < 1e-6);
        assert_eq!(traj.states.len(), 257);
    }

    #[test]
    fn cubic_conservation() {
        let g = grid();
        let traj = nls_solve(&gauss(g), SolverParams::new(cubic(), 0.5, 1024)).unwrap();
        let rep = conservation_report(&traj).unwrap();
        assert!(rep.mass_drift <= 1e-10, "{}", rep.mass_drift);
        assert!(rep.energy_drift.unwrap() <= 1e-6, "{:?}", rep.energy_drift);
    }

    #[test]
    fn zero_time_and_free_trajectories() {
        let g = grid();
        let traj = nls_solve(&gauss(g), SolverParams::new(cubic(), 0.0, 10)).unwrap();
        assert_eq!(traj.states.len(), 1);
        let rep = conservation_report(&traj).unwrap();
        assert_eq!(rep.mass_drift, 0.0);
        let free = nls_solve(&gauss(g), SolverParams::new(None, 2.0, 50)).unwrap();
        assert!(conservation_report(&free).unwrap().mass_drift <= 1e-12);
    }

    #[test]
    fn time_reversal() {
        let g = grid();
        let u0 = Field::from_fn(g, |x| Complex64::from_polar((-x[0] * x[0] / 2.0).exp(), 0.5 * x[0]));
        for powers in [cubic(), Some(NonlinearityPowers::new(2, 0).unwrap())] {
            let fwd = nls_solve(&u0, SolverParams::new(powers, 0.5, 400)).unwrap();
            let back = nls_solve(fwd.final_state(), SolverParams::new(powers, -0.5, 400)).unwrap();
            assert!(back.final_state().relative_l2_distance(&u0).unwrap() <= 1e-6);
        }
    }

    #[test]
    fn strang_is_second_order() {
        let g = Grid::new(1, 512, 16.0).unwrap();
        let u0 = gauss(g);
        for powers in [cubic(), Some(NonlinearityPowers::new(2, 0).unwrap())] {
            let run = |n| nls_solve(&u0, SolverParams::new(powers, 0.5, n)).unwrap().final_state().clone();
            let reference = run(640);
            let e1 = run(40).relative_l2_distance(&reference).unwrap();
            let e2 = run(80).relative_l2_distance(&reference).unwrap();
            let e3 = run(160).relative_l2_distance(&reference).unwrap();
            for (a, b) in [(e1, e2), (e2, e3)] {
                let order = (a / b).log2();
                assert!((order - 2.0).abs() < 0.3, "order {order}");
            }
        }
    }

    #[test]
    fn substep_rules() {
        let g = grid();
        let quad = Some(NonlinearityPowers::new(2, 0).unwrap());
        let p = SolverParams::new(quad, 0.1, 4).with_substep(Substep::ExactPhase);
        assert!(matches!(nls_solve(&gauss(g), p), Err(Error::Parameter(_))));
        let traj = nls_solve(&gauss(g), SolverParams::new(quad, 0.1, 4)).unwrap();
        assert_eq!(traj.substep, Substep::Rk4);
        let lie = nls_solve(&gauss(g), SolverParams::new(cubic(), 0.1, 4).with_scheme(StepScheme::Lie)).unwrap();
        assert_eq!(lie.scheme, StepScheme::Lie);
    }

    #[test]
    fn blow_up_is_reported() {
        let g = Grid::new(1, 64, 4.0).unwrap();
        let big = Field::from_real_fn(g, |x| 3.0 * (-x * x).exp());
        let err = nls_solve(&big, SolverParams::new(Some(NonlinearityPowers::new(5, 0).unwrap()), 1.0, 4)).unwrap_err();
        match err {
            Error::BlowUp { completed, requested, trajectory, .. } => {
                assert_eq!(requested, 4);
                assert_eq!(trajectory.states.len(), completed + 1);
                assert!(trajectory.final_state().samples().unwrap().iter().all(|z| z.re.is_finite()));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn trajectory_persistence() {
        let g = Grid::new(1, 64, 8.0).unwrap();
        let traj = nls_solve(&gauss(g), SolverParams::new(cubic(), 0.2, 5)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        traj.save(dir.path()).unwrap();
        assert_eq!(Trajectory::load(dir.path()).unwrap(), traj);
    }

    #[test]
    fn free_duhamel_is_exact() {
        let g = grid();
        let u0 = Field::from_real_fn(g, |x| (x - 0.5).tanh() * (-x * x / 2.0).exp());
        let traj = nls_solve(&u0, SolverParams::new(None, 0.5, 4)).unwrap();
        let spec = WindowSpec::new(0.25, 4.0, 0.0, 1).unwrap();
        let rep = duhamel_residual(&traj, spec, &[-1.0, 0.0, 0.7], &[-2.0, 0.5, 3.0]).unwrap();
        assert!(rep.max_residual <= 1e-8, "{}", rep.max_residual);
        // sign guard: the opposite free phase breaks the identity
        let s = rep.samples[0];
        let wrong = s.free_term * Complex64::from_polar(1.0, s.xi * s.xi * rep.t);
        assert!((s.lhs - wrong).norm() > 1e-3);
    }

    #[test]
    fn linear_duhamel_converges_at_second_order() {
        let g = grid();
        let u0 = gauss(g);
        let spec = WindowSpec::new(0.25, 1.0, 0.0, 1).unwrap();
        let lin = Some(NonlinearityPowers::new(1, 0).unwrap());
        let res = |n| {
            let traj = nls_solve(&u0, SolverParams::new(lin, 0.5, n)).unwrap();
            duhamel_residual(&traj, spec, &[-0.5, 0.0, 0.5], &[-1.0, 0.5, 1.0]).unwrap().max_residual
        };
        let (r1, r2) = (res(512), res(1024));
        assert!(r1 <= 1e-4 && r2 <= 2.5e-5, "{r1} {r2}");
        let order = (r1 / r2).log2();
        assert!((1.7..=2.3).contains(&order), "{order}");
    }
}
