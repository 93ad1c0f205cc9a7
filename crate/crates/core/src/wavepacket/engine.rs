//! Column evaluation of `W_g f(x_m, eta)` for one-dimensional fields.
//!
//! For a fixed frequency `eta` the transform over consecutive lattice
//! positions `x_m` is a linear correlation of `f_j e^{-i y_j eta}` with the
//! conjugated window taps. Short correlations are summed directly; long ones
//! go through a zero-padded FFT. Both give the same exact discrete sum.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use super::window::Window;
use crate::error::{Error, Result};
use crate::field::{Field, FieldData, Grid};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

enum Plan {
    /// Every column is identically zero.
    Empty,
    Direct { taps: Vec<Complex64> },
    Fft { size: usize, forward: Arc<dyn Fft<f64>>, inverse: Arc<dyn Fft<f64>>, kernel: Vec<Complex64> },
    Delta { y0: f64, values: Vec<Complex64> },
}

/// Precomputed state for evaluating columns over `x_m`, `m in m0..m0+len`.
pub struct ColumnEngine<'a> {
    grid: Grid,
    samples: &'a [Complex64],
    support: (i64, i64),
    m0: i64,
    len: usize,
    /// Offset range `d_lo..=d_hi` of the taps that can meet the support.
    d_lo: i64,
    d_hi: i64,
    plan: Plan,
}

impl<'a> ColumnEngine<'a> {
    pub fn new(f: &'a Field, window: &Window, m0: i64, len: usize) -> Result<Self> {
        let grid = *f.grid();
        if grid.dim() != 1 {
            return Err(Error::UnsupportedDimension(grid.dim()));
        }
        window.check(&grid)?;
        let dx = grid.spacing();
        let m1 = m0 + len as i64 - 1;
        let empty = |plan| ColumnEngine {
            grid,
            samples: &[],
            support: (0, -1),
            m0,
            len,
            d_lo: 0,
            d_hi: -1,
            plan,
        };
        let samples = match f.data() {
            FieldData::DiracDelta(c) => {
                let y0 = c[0];
                let values = (m0..=m1)
                    .map(|m| window.value(&[y0 - grid.coord(m)]).map(|w| w.conj()))
                    .collect::<Result<Vec<_>>>()?;
                return Ok(empty(Plan::Delta { y0, values }));
            }
            FieldData::Sampled(_) => f.space_samples()?,
        };
        let nonzero = |z: &Complex64| *z != ZERO;
        let (j0, j1) = match (samples.iter().position(nonzero), samples.iter().rposition(nonzero)) {
            (Some(a), Some(b)) => (a as i64, b as i64),
            _ => return Ok(empty(Plan::Empty)),
        };
        let r = window.lattice_radius(&grid);
        let d_lo = (-r).max(j0 - m1);
        let d_hi = r.min(j1 - m0);
        if d_lo > d_hi || len == 0 {
            return Ok(empty(Plan::Empty));
        }
        let taps: Vec<Complex64> = (d_lo..=d_hi).map(|d| window.offset_value(d, dx).conj()).collect();
        let ntaps = taps.len();
        let g_len = len + ntaps - 1;
        let size = g_len.next_power_of_two();
        let direct_cost = (len * ntaps) as f64;
        let fft_cost = 3.0 * size as f64 * (size as f64).log2() + 4.0 * size as f64;
        let plan = if direct_cost <= fft_cost {
            Plan::Direct { taps }
        } else {
            let mut planner = FftPlanner::new();
            let forward = planner.plan_fft_forward(size);
            let inverse = planner.plan_fft_inverse(size);
            let mut kernel = vec![ZERO; size];
            for (e, &c) in taps.iter().rev().enumerate() {
                kernel[e] = c;
            }
            forward.process(&mut kernel);
            let norm = 1.0 / size as f64;
            kernel.iter_mut().for_each(|k| *k *= norm);
            Plan::Fft { size, forward, inverse, kernel }
        };
        Ok(ColumnEngine { grid, samples, support: (j0, j1), m0, len, d_lo, d_hi, plan })
    }

    pub fn first_index(&self) -> i64 {
        self.m0
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// `f_j e^{-i y_j eta}` for `j = m0 + d_lo + i`, zero off the support.
    fn modulated(&self, eta: f64, out: &mut [Complex64]) {
        let dx = self.grid.spacing();
        let start = self.m0 + self.d_lo;
        let (j0, j1) = self.support;
        let lo = (j0 - start).max(0) as usize;
        let total = out.len();
        let hi = ((j1 - start + 1).max(0) as usize).min(total);
        out[..lo.min(total)].fill(ZERO);
        if hi < total {
            out[hi..].fill(ZERO);
        }
        let step = Complex64::from_polar(1.0, -dx * eta);
        let mut phase = ZERO;
        // the phase is re-anchored every 64 samples to stop the recurrence drifting
        for (i, o) in out.iter_mut().enumerate().take(hi).skip(lo) {
            let j = start + i as i64;
            if (i - lo).is_multiple_of(64) {
                phase = Complex64::from_polar(1.0, -self.grid.coord(j) * eta);
            }
            *o = self.samples[j as usize] * phase;
            phase *= step;
        }
    }

    /// `W(x_m, eta)` for every `m` in the engine's range.
    pub fn column(&self, eta: f64) -> Vec<Complex64> {
        let dx = self.grid.spacing();
        match &self.plan {
            Plan::Empty => vec![ZERO; self.len],
            Plan::Delta { y0, values } => {
                let phase = Complex64::from_polar(1.0, -y0 * eta);
                values.iter().map(|v| v * phase).collect()
            }
            Plan::Direct { taps } => {
                let mut g = vec![ZERO; self.len + taps.len() - 1];
                self.modulated(eta, &mut g);
                (0..self.len)
                    .map(|i| {
                        let acc: Complex64 = taps.iter().zip(&g[i..]).map(|(c, v)| c * v).sum();
                        acc * dx
                    })
                    .collect()
            }
            Plan::Fft { size, forward, inverse, kernel } => {
                let ntaps = (self.d_hi - self.d_lo + 1) as usize;
                let mut g = vec![ZERO; *size];
                self.modulated(eta, &mut g[..self.len + ntaps - 1]);
                forward.process(&mut g);
                g.iter_mut().zip(kernel).for_each(|(a, k)| *a *= k);
                inverse.process(&mut g);
                g[ntaps - 1..ntaps - 1 + self.len].iter().map(|v| v * dx).collect()
            }
        }
    }

    /// Columns for several frequencies, in input order.
    pub fn columns(&self, etas: &[f64]) -> Vec<Vec<Complex64>> {
        etas.par_iter().map(|&eta| self.column(eta)).collect()
    }
}
