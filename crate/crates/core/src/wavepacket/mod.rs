//! Discrete wave packet transform
//! `W_g f(x, xi) = int conj(g(y - x)) f(y) e^{-i y.xi} dy`.
//!
//! Three evaluation paths share the same quadrature:
//!
//! * [`wpt`] evaluates arbitrary `(x, xi)` samples by direct summation, so
//!   frequencies off the dual lattice carry no interpolation error.
//! * [`wpt_full`] fills the whole product lattice with one FFT per position.
//!   On that lattice the adjoint, inversion and Plancherel identities are
//!   exact up to roundoff, and window offsets wrap periodically.
//! * [`ColumnEngine`] produces columns `m -> W(x_m, eta)` over a lattice
//!   range for one-dimensional criterion integrals.

mod engine;
mod window;

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use num_complex::Complex64;
use rayon::prelude::*;

pub use engine::ColumnEngine;
pub use window::{Window, WindowShape};

use crate::error::{Error, Result};
use crate::field::{inner_product, lattice_dft, lattice_idft, FftNd, Field, FieldData, Grid};
use crate::windows::{evaluate_window, WindowSpec};
use window::lattice_index;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Sampled values of a wave packet transform over `x_samples x xi_samples`.
#[derive(Debug, Clone, PartialEq)]
pub struct WptSlice {
    pub x_samples: Vec<Vec<f64>>,
    pub xi_samples: Vec<Vec<f64>>,
    /// Row-major: `values[i * xi_samples.len() + j]` is `W(x_i, xi_j)`.
    pub values: Vec<Complex64>,
    pub window: String,
    pub lambda: Option<f64>,
    /// Set when the slice covers the full product lattice of this grid.
    lattice: Option<Grid>,
}

impl WptSlice {
    pub fn value(&self, i: usize, j: usize) -> Complex64 {
        self.values[i * self.xi_samples.len() + j]
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.x_samples.len(), self.xi_samples.len())
    }

    pub fn full_lattice(&self) -> Option<&Grid> {
        self.lattice.as_ref()
    }

    /// `(sum |W|^2 dx^n dxi^n)^{1/2}` over a full-lattice slice.
    pub fn l2_norm(&self) -> Result<f64> {
        let g = self.lattice.ok_or_else(|| Error::PartialSlice("norm needs the full lattice".into()))?;
        let s: f64 = self.values.iter().map(|z| z.norm_sqr()).sum();
        Ok((s * g.cell_volume() * g.dual_cell_volume()).sqrt())
    }

    /// CSV with columns `x,xi,re,im` (per-axis columns in 2-d) after `#` header lines.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        let dim = self.x_samples.first().map_or(1, Vec::len);
        writeln!(out, "# window {}", self.window)?;
        if let Some(l) = self.lambda {
            writeln!(out, "# lambda {l:.17e}")?;
        }
        writeln!(out, "# shape {} {}", self.x_samples.len(), self.xi_samples.len())?;
        if dim == 1 {
            writeln!(out, "x,xi,re,im")?;
        } else {
            writeln!(out, "x1,x2,xi1,xi2,re,im")?;
        }
        for (i, x) in self.x_samples.iter().enumerate() {
            for (j, k) in self.xi_samples.iter().enumerate() {
                let v = self.value(i, j);
                let cols: Vec<String> =
                    x.iter().chain(k).chain([v.re, v.im].iter()).map(|c| format!("{c:.17e}")).collect();
                writeln!(out, "{}", cols.join(","))?;
            }
        }
        Ok(())
    }

    /// Parses the output of [`WptSlice::write_csv`].
    pub fn read_csv(input: impl BufRead) -> Result<WptSlice> {
        let mut window = String::new();
        let mut lambda = None;
        let mut shape = None;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for line in input.lines() {
            let line = line?;
            let line = line.trim();
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                if let Some(w) = rest.strip_prefix("window ") {
                    window = w.to_string();
                } else if let Some(l) = rest.strip_prefix("lambda ") {
                    lambda = Some(l.trim().parse().map_err(|_| Error::Parse("bad lambda".into()))?);
                } else if let Some(s) = rest.strip_prefix("shape ") {
                    let v: Vec<usize> = s.split_whitespace().filter_map(|t| t.parse().ok()).collect();
                    if v.len() != 2 {
                        return Err(Error::Parse("bad shape line".into()));
                    }
                    shape = Some((v[0], v[1]));
                }
                continue;
            }
            if line.is_empty() || line.starts_with('x') {
                continue;
            }
            let r: Vec<f64> = line
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse(format!("slice row: {e}")))?;
            rows.push(r);
        }
        let (nx, nk) = shape.ok_or_else(|| Error::Parse("missing `# shape`".into()))?;
        if rows.len() != nx * nk || rows.is_empty() {
            return Err(Error::Parse(format!("expected {} rows, found {}", nx * nk, rows.len())));
        }
        let dim = (rows[0].len() - 2) / 2;
        if rows.iter().any(|r| r.len() != 2 * dim + 2) || dim == 0 {
            return Err(Error::Parse("inconsistent column count".into()));
        }
        let x_samples = (0..nx).map(|i| rows[i * nk][..dim].to_vec()).collect();
        let xi_samples = (0..nk).map(|j| rows[j][dim..2 * dim].to_vec()).collect();
        let values = rows.iter().map(|r| Complex64::new(r[2 * dim], r[2 * dim + 1])).collect();
        Ok(WptSlice { x_samples, xi_samples, values, window, lambda, lattice: None })
    }

    /// `|W|` as a gnuplot `nonuniform matrix` block: the first row lists the
    /// frequencies, each further row starts with `x` (one-dimensional slices).
    pub fn write_gnuplot_matrix(&self, mut out: impl Write) -> Result<()> {
        if self.x_samples.first().map_or(1, Vec::len) != 1 {
            return Err(Error::UnsupportedDimension(2));
        }
        write!(out, "{}", self.xi_samples.len())?;
        for k in &self.xi_samples {
            write!(out, " {:.9e}", k[0])?;
        }
        writeln!(out)?;
        for (i, x) in self.x_samples.iter().enumerate() {
            write!(out, "{:.9e}", x[0])?;
            for j in 0..self.xi_samples.len() {
                write!(out, " {:.9e}", self.value(i, j).norm())?;
            }
            writeln!(out)?;
        }
        writeln!(out)?;
        Ok(())
    }
}

fn check_frequencies(grid: &Grid, xi_set: &[Vec<f64>]) -> Result<()> {
    let nyq = grid.nyquist() * (1.0 + 1e-12);
    for k in xi_set {
        if k.len() != grid.dim() {
            return Err(Error::FrequencyRange(format!("frequency {k:?} has wrong dimension")));
        }
        if k.iter().any(|c| !c.is_finite() || c.abs() > nyq) {
            return Err(Error::FrequencyRange(format!(
                "frequency {k:?} beyond Nyquist {:.4}",
                grid.nyquist()
            )));
        }
    }
    Ok(())
}

/// Lattice indices `lo..=hi` along one axis whose coordinates lie within `r` of `c`.
fn axis_box(grid: &Grid, c: f64, r: f64) -> (i64, i64) {
    let dx = grid.spacing();
    let n = grid.points_per_axis() as i64;
    let lo = (((c - r) + grid.half_width()) / dx).floor() as i64;
    let hi = (((c + r) + grid.half_width()) / dx).ceil() as i64;
    (lo.max(0), hi.min(n - 1))
}

/// `W_g f` at arbitrary `(x, xi)` pairs by direct quadrature.
///
/// Delta inputs use the closed form `conj(g(y0 - x)) e^{-i y0.xi}`.
pub fn wpt(f: &Field, window: &Window, x_set: &[Vec<f64>], xi_set: &[Vec<f64>]) -> Result<WptSlice> {
    let grid = *f.grid();
    window.check(&grid)?;
    check_frequencies(&grid, xi_set)?;
    if x_set.iter().any(|x| x.len() != grid.dim()) {
        return Err(Error::Sizing("x sample dimension differs from the grid".into()));
    }
    let rows: Vec<Vec<Complex64>> = x_set
        .par_iter()
        .map(|x| match f.data() {
            FieldData::DiracDelta(y0) => {
                let off: Vec<f64> = y0.iter().zip(x).map(|(y, x)| y - x).collect();
                let w = window.value(&off)?.conj();
                Ok(xi_set
                    .iter()
                    .map(|k| {
                        let dot: f64 = y0.iter().zip(k).map(|(a, b)| a * b).sum();
                        w * Complex64::from_polar(1.0, -dot)
                    })
                    .collect())
            }
            FieldData::Sampled(_) => point_row(f, window, x, xi_set),
        })
        .collect::<Result<_>>()?;
    Ok(WptSlice {
        x_samples: x_set.to_vec(),
        xi_samples: xi_set.to_vec(),
        values: rows.into_iter().flatten().collect(),
        window: window.label(),
        lambda: window.lambda(),
        lattice: None,
    })
}

fn point_row(f: &Field, window: &Window, x: &[f64], xi_set: &[Vec<f64>]) -> Result<Vec<Complex64>> {
    let grid = *f.grid();
    let samples = f.space_samples()?;
    let n = grid.points_per_axis();
    let r = window.radius();
    let boxes: Vec<(i64, i64)> = x.iter().map(|&c| axis_box(&grid, c, r)).collect();
    if boxes.iter().any(|(lo, hi)| lo > hi) {
        return Ok(vec![ZERO; xi_set.len()]);
    }
    if let Window::Sampled(_) = window {
        for &c in x {
            lattice_index(c + grid.half_width(), grid.spacing())
                .ok_or_else(|| Error::InvalidSpec("sampled windows need lattice x positions".into()))?;
        }
    }
    let dx = grid.spacing();
    let cell = grid.cell_volume();
    // h = conj(g(y - x)) f(y) over the window box, row-major per axis
    let (a0, a1) = boxes[0];
    let (b0, b1) = if grid.dim() == 2 { boxes[1] } else { (0, 0) };
    let width_b = (b1 - b0 + 1) as usize;
    let mut h = Vec::with_capacity(((a1 - a0 + 1) as usize) * width_b);
    for i in a0..=a1 {
        for j in b0..=b1 {
            let (flat, off) = if grid.dim() == 1 {
                (i as usize, vec![grid.coord(i) - x[0]])
            } else {
                (i as usize * n + j as usize, vec![grid.coord(i) - x[0], grid.coord(j) - x[1]])
            };
            h.push(window.value(&off)?.conj() * samples[flat]);
        }
    }
    let axis_phase = |lo: i64, hi: i64, k: f64| -> Vec<Complex64> {
        let step = Complex64::from_polar(1.0, -dx * k);
        let mut p = ZERO;
        (lo..=hi)
            .enumerate()
            .map(|(c, i)| {
                if c % 64 == 0 {
                    p = Complex64::from_polar(1.0, -grid.coord(i) * k);
                }
                let v = p;
                p *= step;
                v
            })
            .collect()
    };
    Ok(xi_set
        .iter()
        .map(|k| {
            let pa = axis_phase(a0, a1, k[0]);
            let sum: Complex64 = if grid.dim() == 1 {
                h.iter().zip(&pa).map(|(a, b)| a * b).sum()
            } else {
                let pb = axis_phase(b0, b1, k[1]);
                h.chunks(width_b)
                    .zip(&pa)
                    .map(|(row, e)| e * row.iter().zip(&pb).map(|(a, b)| a * b).sum::<Complex64>())
                    .sum()
            };
            sum * cell
        })
        .collect())
}

/// Flat index of the periodic lattice offset `j - m` in a centred window.
fn periodic_offset(grid: &Grid, j: usize, m: usize) -> usize {
    let n = grid.points_per_axis();
    let (ji, mi) = (grid.unflatten(j), grid.unflatten(m));
    let axis = |a: usize| (ji[a] + n + n / 2 - mi[a]) % n;
    match grid.dim() {
        1 => axis(0),
        _ => axis(0) * n + axis(1),
    }
}

fn check_pair(f: &Field, window: &Field) -> Result<Grid> {
    f.grid().check_same(window.grid())?;
    f.space_samples()?;
    window.space_samples()?;
    Ok(*f.grid())
}

/// `W_g f` on the full product of the spatial and dual lattices, with
/// periodic window offsets.
pub fn wpt_full(f: &Field, window: &Field) -> Result<WptSlice> {
    let grid = check_pair(f, window)?;
    let fs = f.space_samples()?;
    let ws = window.space_samples()?;
    let fft = FftNd::new(&grid);
    let cell = grid.cell_volume();
    let rows: Vec<Vec<Complex64>> = (0..grid.len())
        .into_par_iter()
        .map(|m| {
            let h: Vec<Complex64> =
                (0..grid.len()).map(|j| ws[periodic_offset(&grid, j, m)].conj() * fs[j]).collect();
            let mut row = lattice_dft(&h, &grid, &fft);
            row.iter_mut().for_each(|v| *v *= cell);
            row
        })
        .collect();
    Ok(WptSlice {
        x_samples: (0..grid.len()).map(|i| grid.position(i)).collect(),
        xi_samples: (0..grid.len()).map(|i| grid.wavevector(i)).collect(),
        values: rows.into_iter().flatten().collect(),
        window: "sampled".into(),
        lambda: None,
        lattice: Some(grid),
    })
}

/// `W_g^* F(y) = (2 pi)^{-n} sum_x sum_xi g(y - x) F(x, xi) e^{i y.xi} dx^n dxi^n`.
pub fn adjoint_wpt(slice: &WptSlice, window: &Field) -> Result<Field> {
    let grid = *slice
        .full_lattice()
        .ok_or_else(|| Error::PartialSlice("adjoint needs the full phase-space lattice".into()))?;
    grid.check_same(window.grid())?;
    let ws = window.space_samples()?;
    let fft = FftNd::new(&grid);
    let len = grid.len();
    let scale = grid.cell_volume() * grid.dual_cell_volume() / (2.0 * PI).powi(grid.dim() as i32);
    // fixed-size chunks summed in order keep the result independent of scheduling
    let partials: Vec<Vec<Complex64>> = (0..len)
        .collect::<Vec<_>>()
        .par_chunks(64)
        .map(|ms| {
            let mut acc = vec![ZERO; len];
            for &m in ms {
                let v = lattice_idft(&slice.values[m * len..(m + 1) * len], &grid, &fft);
                for (j, a) in acc.iter_mut().enumerate() {
                    *a += ws[periodic_offset(&grid, j, m)] * v[j];
                }
            }
            acc
        })
        .collect();
    let mut out = vec![ZERO; len];
    for p in partials {
        out.iter_mut().zip(p).for_each(|(o, v)| *o += v);
    }
    out.iter_mut().for_each(|v| *v *= scale);
    Field::from_samples(grid, out)
}

/// Two-window inversion `f = (psi, phi)^{-1} W_psi^* W_phi f`.
pub fn reconstruct(f: &Field, phi: &Field, psi: &Field) -> Result<Field> {
    check_pair(f, phi)?;
    check_pair(f, psi)?;
    let pairing = inner_product(psi, phi)?;
    if pairing.norm() < 1e-12 {
        return Err(Error::DegeneratePairing(pairing.norm()));
    }
    let w = wpt_full(f, phi)?;
    adjoint_wpt(&w, psi)?.map(|z| z / pairing)
}

/// `‖W_g f‖ / ((2 pi)^{n/2} ‖g‖ ‖f‖)`, which equals one exactly.
pub fn plancherel_ratio(f: &Field, window: &Field) -> Result<f64> {
    check_pair(f, window)?;
    let (nf, nw) = (f.l2_norm()?, window.l2_norm()?);
    if nf == 0.0 || nw == 0.0 {
        return Err(Error::DegenerateInput("zero norm in Plancherel ratio".into()));
    }
    let n = wpt_full(f, window)?.l2_norm()?;
    Ok(n / ((2.0 * PI).powf(f.grid().dim() as f64 / 2.0) * nw * nf))
}

/// Result of the pointwise window-change inequality
/// `|W_a f| <= (2 pi)^{-n} |(a, nb)|^{-1} (|W_a a| * |W_nb f|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowChangeReport {
    /// `max(|W_a f| - rhs, 0)` over the product lattice.
    pub max_violation: f64,
    /// Largest `|W_a f| / rhs` where `rhs > 0`.
    pub max_ratio: f64,
    pub max_lhs: f64,
    pub pairing: Complex64,
}

/// Circular 2-d convolution of two `N x N` real arrays (row-major).
fn circular_convolve(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let fft = FftNd::with_size(n, 2);
    let mut fa: Vec<Complex64> = a.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut fb: Vec<Complex64> = b.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft.forward(&mut fa);
    fft.forward(&mut fb);
    fa.iter_mut().zip(&fb).for_each(|(x, y)| *x *= y);
    fft.inverse(&mut fa);
    let norm = 1.0 / (n * n) as f64;
    fa.iter().map(|z| z.re * norm).collect()
}

/// Checks the window-change inequality on every lattice point (1-d grids).
pub fn window_change_bound_check(f: &Field, a: &Field, nb: &Field) -> Result<WindowChangeReport> {
    let grid = check_pair(f, a)?;
    check_pair(f, nb)?;
    if grid.dim() != 1 {
        return Err(Error::UnsupportedDimension(grid.dim()));
    }
    let pairing = inner_product(a, nb)?;
    if pairing.norm() < 1e-12 {
        return Err(Error::DegeneratePairing(pairing.norm()));
    }
    let n = grid.points_per_axis();
    let h = n / 2;
    let waf = wpt_full(f, a)?;
    let waa = wpt_full(a, a)?;
    let wnbf = wpt_full(f, nb)?;
    // kernel indexed by periodic offsets (dm, dk); offset 0 sits at centred index N/2
    let mut kernel = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            kernel[i * n + j] = waa.values[((i + h) % n) * n + (j + h) % n].norm();
        }
    }
    let b: Vec<f64> = wnbf.values.iter().map(|z| z.norm()).collect();
    let conv = circular_convolve(&kernel, &b, n);
    let scale = grid.spacing() * grid.dual_spacing() / (2.0 * PI) / pairing.norm();
    let mut rep = WindowChangeReport { max_violation: 0.0, max_ratio: 0.0, max_lhs: 0.0, pairing };
    for (lhs, c) in waf.values.iter().map(|z| z.norm()).zip(conv) {
        let rhs = c * scale;
        rep.max_lhs = rep.max_lhs.max(lhs);
        rep.max_violation = rep.max_violation.max(lhs - rhs);
        if rhs > 0.0 {
            rep.max_ratio = rep.max_ratio.max(lhs / rhs);
        }
    }
    Ok(rep)
}

/// Deviation in `W_{phi^(t)}[conj u](x, xi) = conj(W_{phi^(-t)} u(x, -xi))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjugationReport {
    pub max_deviation: f64,
    pub u_norm: f64,
}

impl ConjugationReport {
    pub fn passes(&self, rel_tol: f64) -> bool {
        self.max_deviation <= rel_tol * self.u_norm
    }
}

pub fn conjugation_identity_check(u: &Field, spec: WindowSpec) -> Result<ConjugationReport> {
    let grid = *u.grid();
    let plus = evaluate_window(spec, grid)?;
    let minus = evaluate_window(spec.with_time(-spec.t), grid)?;
    let lhs = wpt_full(&u.conj()?, &plus)?;
    let rhs = wpt_full(u, &minus)?;
    let n = grid.points_per_axis();
    let len = grid.len();
    let neg = |k: usize| -> usize {
        let idx = grid.unflatten(k);
        let flip = |i: usize| (n - i) % n;
        match grid.dim() {
            1 => flip(idx[0]),
            _ => flip(idx[0]) * n + flip(idx[1]),
        }
    };
    let mut max_deviation: f64 = 0.0;
    for m in 0..len {
        for k in 0..len {
            let d = lhs.values[m * len + k] - rhs.values[m * len + neg(k)].conj();
            max_deviation = max_deviation.max(d.norm());
        }
    }
    Ok(ConjugationReport { max_deviation, u_norm: u.l2_norm()? })
}

#[cfg(test)]
mod tests;
