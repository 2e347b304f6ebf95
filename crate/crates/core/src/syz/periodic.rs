//! Samples on the unit n-torus: FFT, spectral and fourth-order derivatives,
//! and off-grid evaluation of the trigonometric interpolant.

use crate::{Error, Result};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Spectral,
    #[serde(rename = "fd4")]
    FiniteDifference4,
}

/// Uniform grid of `m^n` nodes `k/m`, axis 0 varying fastest.
#[derive(Clone)]
pub struct PeriodicGrid {
    n: usize,
    m: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for PeriodicGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PeriodicGrid({}^{})", self.m, self.n)
    }
}

impl PeriodicGrid {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if !(1..=3).contains(&n) {
            return Err(Error::Dimension(n));
        }
        if m < 4 || m % 2 != 0 {
            return Err(Error::Invalid(format!("grid resolution {m} must be even and at least 4")));
        }
        let mut planner = FftPlanner::new();
        Ok(PeriodicGrid { n, m, forward: planner.plan_fft_forward(m), inverse: planner.plan_fft_inverse(m) })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn resolution(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.m.pow(self.n as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coords(&self, mut idx: usize) -> [usize; 3] {
        let mut k = [0; 3];
        for a in 0..self.n {
            k[a] = idx % self.m;
            idx /= self.m;
        }
        k
    }

    pub fn index(&self, k: &[usize]) -> usize {
        (0..self.n).rev().fold(0, |acc, a| acc * self.m + k[a] % self.m)
    }

    /// Unit-torus coordinates of a node.
    pub fn node(&self, idx: usize) -> Vec<f64> {
        let k = self.coords(idx);
        (0..self.n).map(|a| k[a] as f64 / self.m as f64).collect()
    }

    /// Signed frequency of index `k`; the Nyquist index maps to `+m/2`.
    pub fn frequency(&self, k: usize) -> i64 {
        if k <= self.m / 2 {
            k as i64
        } else {
            k as i64 - self.m as i64
        }
    }

    fn is_nyquist(&self, k: usize) -> bool {
        k == self.m / 2
    }

    fn transform(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let m = self.m;
        let mut line = vec![Complex64::default(); m];
        for a in 0..self.n {
            let stride = m.pow(a as u32);
            for start in 0..data.len() {
                if (start / stride) % m != 0 {
                    continue;
                }
                for (j, v) in line.iter_mut().enumerate() {
                    *v = data[start + j * stride];
                }
                fft.process(&mut line);
                for (j, v) in line.iter().enumerate() {
                    data[start + j * stride] = *v;
                }
            }
        }
    }

    pub fn spectrum(&self, field: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = field.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, &self.forward);
        data
    }

    /// Real part of the inverse transform, normalized.
    pub fn synthesize(&self, mut spec: Vec<Complex64>) -> Vec<f64> {
        self.transform(&mut spec, &self.inverse);
        let s = 1.0 / self.len() as f64;
        spec.iter().map(|c| c.re * s).collect()
    }

    /// Fourier multiplier of `∂_{axes}` at mode `idx`. A Nyquist axis
    /// differentiated an odd number of times gives zero, which makes the
    /// grid derivatives agree with those of [`TrigSeries`] at the nodes.
    pub fn multiplier(&self, idx: usize, axes: &[usize]) -> Complex64 {
        let k = self.coords(idx);
        let mut c = Complex64::new(1.0, 0.0);
        for a in 0..self.n {
            let times = axes.iter().filter(|&&b| b == a).count();
            if times == 0 {
                continue;
            }
            if self.is_nyquist(k[a]) && times % 2 == 1 {
                return Complex64::default();
            }
            c *= Complex64::new(0.0, TAU * self.frequency(k[a]) as f64).powi(times as i32);
        }
        c
    }

    pub fn spectral_partial(&self, spec: &[Complex64], axes: &[usize]) -> Vec<f64> {
        let d = spec.iter().enumerate().map(|(i, c)| c * self.multiplier(i, axes)).collect();
        self.synthesize(d)
    }

    fn shifted(&self, idx: usize, axis: usize, by: isize) -> usize {
        let mut k = self.coords(idx);
        k[axis] = (k[axis] as isize + by).rem_euclid(self.m as isize) as usize;
        self.index(&k)
    }

    /// Fourth-order central differences; mixed partials compose two first
    /// derivatives.
    pub fn fd4_partial(&self, field: &[f64], axes: &[usize]) -> Vec<f64> {
        let h = 1.0 / self.m as f64;
        let first = |f: &[f64], a: usize| -> Vec<f64> {
            (0..f.len())
                .map(|i| {
                    let at = |s| f[self.shifted(i, a, s)];
                    (-at(2) + 8.0 * at(1) - 8.0 * at(-1) + at(-2)) / (12.0 * h)
                })
                .collect()
        };
        match axes {
            [] => field.to_vec(),
            [a] => first(field, *a),
            [a, b] if a == b => (0..field.len())
                .map(|i| {
                    let at = |s| field[self.shifted(i, *a, s)];
                    (-at(2) + 16.0 * at(1) - 30.0 * at(0) + 16.0 * at(-1) - at(-2)) / (12.0 * h * h)
                })
                .collect(),
            [a, b] => first(&first(field, *a), *b),
            _ => unimplemented!("derivatives above second order"),
        }
    }

    /// Gradient and Hessian fields: `grad[a]`, `hess[a][b]`.
    pub fn derivatives(&self, field: &[f64], scheme: Scheme) -> (Vec<Vec<f64>>, Vec<Vec<Vec<f64>>>) {
        let n = self.n;
        let spec = match scheme {
            Scheme::Spectral => Some(self.spectrum(field)),
            Scheme::FiniteDifference4 => None,
        };
        let partial = |axes: &[usize]| match &spec {
            Some(s) => self.spectral_partial(s, axes),
            None => self.fd4_partial(field, axes),
        };
        let grad = (0..n).map(|a| partial(&[a])).collect();
        let mut hess = vec![vec![Vec::new(); n]; n];
        for a in 0..n {
            for b in a..n {
                let h = partial(&[a, b]);
                hess[b][a] = h.clone();
                hess[a][b] = h;
            }
        }
        (grad, hess)
    }

    /// Symbol of the scheme's second derivative `∂_a ∂_b` at mode `idx`.
    pub fn second_symbol(&self, idx: usize, a: usize, b: usize, scheme: Scheme) -> f64 {
        match scheme {
            Scheme::Spectral => self.multiplier(idx, &[a, b]).re,
            Scheme::FiniteDifference4 => {
                let k = self.coords(idx);
                let h = 1.0 / self.m as f64;
                let th = |a: usize| TAU * k[a] as f64 / self.m as f64;
                if a == b {
                    let t = th(a);
                    (-2.0 * (2.0 * t).cos() + 32.0 * t.cos() - 30.0) / (12.0 * h * h)
                } else {
                    let d = |t: f64| (8.0 * t.sin() - (2.0 * t).sin()) / (6.0 * h);
                    -d(th(a)) * d(th(b))
                }
            }
        }
    }
}

/// The trigonometric interpolant of grid samples as an explicit mode list,
/// for evaluation away from the nodes. Modes below `1e-15` of the largest
/// are dropped, so analytic data with few modes evaluates cheaply.
#[derive(Debug, Clone)]
pub struct TrigSeries {
    n: usize,
    modes: Vec<([f64; 3], Complex64)>,
}

impl TrigSeries {
    pub fn from_samples(grid: &PeriodicGrid, field: &[f64]) -> Self {
        let spec = grid.spectrum(field);
        let scale = 1.0 / grid.len() as f64;
        let cut = spec.iter().map(|c| c.norm()).fold(0.0, f64::max) * 1e-15;
        let mut modes = Vec::new();
        for (i, c) in spec.iter().enumerate() {
            if c.norm() <= cut {
                continue;
            }
            let k = grid.coords(i);
            let nyq: Vec<usize> = (0..grid.n).filter(|&a| grid.is_nyquist(k[a])).collect();
            let share = c * scale / (1u32 << nyq.len()) as f64;
            for signs in 0..1usize << nyq.len() {
                let mut freq = [0.0; 3];
                for a in 0..grid.n {
                    freq[a] = grid.frequency(k[a]) as f64;
                }
                for (bit, &a) in nyq.iter().enumerate() {
                    if signs >> bit & 1 == 1 {
                        freq[a] = -freq[a];
                    }
                }
                modes.push((freq, share));
            }
        }
        TrigSeries { n: grid.n, modes }
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    /// Value, gradient and Hessian at unit-torus coordinates `s`.
    pub fn eval(&self, s: &[f64]) -> (f64, Vec<f64>, Vec<Vec<f64>>) {
        let n = self.n;
        let mut v = 0.0;
        let mut g = vec![0.0; n];
        let mut h = vec![vec![0.0; n]; n];
        for (k, c) in &self.modes {
            let phase: f64 = (0..n).map(|a| k[a] * s[a]).sum::<f64>() * TAU;
            let e = c * Complex64::from_polar(1.0, phase);
            v += e.re;
            for a in 0..n {
                // ∂_a e = 2πi k_a e
                g[a] -= TAU * k[a] * e.im;
                for b in 0..n {
                    h[a][b] -= TAU * TAU * k[a] * k[b] * e.re;
                }
            }
        }
        (v, g, h)
    }
}
