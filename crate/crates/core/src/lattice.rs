//! Periodic d-dimensional lattices, FFT plumbing and the sampled fields that
//! live on them.
//!
//! A lattice with `n` points per axis and half-extent `L` has nodes
//! `x_j = -L + j h`, `h = 2L/n`, and dual frequencies `v_k = k π / L` for
//! `k ∈ {-n/2, …, n/2 - 1}`. Fields are treated as one period of a periodic,
//! band-limited function: `f(x) = Σ_k c_k e^{i v_k·x}`.

use crate::error::{Error, Result};
use crate::par;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dim: usize,
    pub n: usize,
    pub half_extent: f64,
}

impl Grid {
    pub fn new(dim: usize, n: usize, half_extent: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Domain(format!(
                "lattice dimension {dim} not in 1..=3"
            )));
        }
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::Domain(format!(
                "points per axis {n} must be a power of two >= 4"
            )));
        }
        if !(half_extent > 0.0 && half_extent.is_finite()) {
            return Err(Error::Domain(format!(
                "half extent {half_extent} must be positive"
            )));
        }
        Ok(Self {
            dim,
            n,
            half_extent,
        })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_extent / self.n as f64
    }

    /// Frequency step `π / L`.
    pub fn freq_step(&self) -> f64 {
        PI / self.half_extent
    }

    /// Largest represented frequency magnitude per axis, `π / h`.
    pub fn max_freq(&self) -> f64 {
        PI / self.spacing()
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn node(&self, j: usize) -> f64 {
        -self.half_extent + j as f64 * self.spacing()
    }

    /// Signed frequency index for FFT slot `k`.
    pub fn signed_index(&self, k: usize) -> i64 {
        if k < self.n / 2 {
            k as i64
        } else {
            k as i64 - self.n as i64
        }
    }

    pub fn freq(&self, k: usize) -> f64 {
        self.signed_index(k) as f64 * self.freq_step()
    }

    /// Multi-index (axis 0 slowest) of a flat index.
    pub fn unflatten(&self, mut idx: usize) -> [usize; 3] {
        let mut out = [0usize; 3];
        for axis in (0..self.dim).rev() {
            out[axis] = idx % self.n;
            idx /= self.n;
        }
        out
    }

    pub fn flatten(&self, multi: &[usize]) -> usize {
        multi[..self.dim].iter().fold(0, |acc, &j| acc * self.n + j)
    }

    pub fn position(&self, idx: usize) -> Vec<f64> {
        let m = self.unflatten(idx);
        (0..self.dim).map(|a| self.node(m[a])).collect()
    }

    pub fn frequency(&self, idx: usize) -> Vec<f64> {
        let m = self.unflatten(idx);
        (0..self.dim).map(|a| self.freq(m[a])).collect()
    }

    /// Sum of signed frequency indices, used for the `(-1)^k` phase.
    pub fn index_parity(&self, idx: usize) -> bool {
        let m = self.unflatten(idx);
        (0..self.dim)
            .map(|a| self.signed_index(m[a]))
            .sum::<i64>()
            .rem_euclid(2)
            == 1
    }

    /// Whether the flat frequency slot touches the Nyquist index on any axis.
    pub fn is_nyquist(&self, idx: usize) -> bool {
        let m = self.unflatten(idx);
        (0..self.dim).any(|a| m[a] == self.n / 2)
    }

    /// Same spacing, extent multiplied by `factor` (a power of two).
    pub fn padded(&self, factor: usize) -> Self {
        Self {
            dim: self.dim,
            n: self.n * factor,
            half_extent: self.half_extent * factor as f64,
        }
    }

    pub fn same_geometry(&self, other: &Grid) -> bool {
        self.dim == other.dim
            && self.n == other.n
            && (self.half_extent - other.half_extent).abs() <= 1e-12 * self.half_extent
    }
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut planner = FftPlanner::new();
    if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    }
}

/// Unnormalised d-dimensional FFT in place (axis 0 slowest).
pub fn fft_nd(grid: &Grid, data: &mut [Complex64], inverse: bool) {
    let n = grid.n;
    let fft = plan(n, inverse);
    let total = grid.len();
    for axis in 0..grid.dim {
        let stride = n.pow((grid.dim - 1 - axis) as u32);
        if stride == 1 {
            par::for_each_chunk_mut(data, n, |_, line| fft.process(line));
            continue;
        }
        let lines = total / n;
        // gather strided lines into contiguous rows
        let line_start = |l: usize| {
            let outer = l / stride;
            let inner = l % stride;
            outer * stride * n + inner
        };
        let mut buf = vec![Complex64::new(0.0, 0.0); total];
        par::for_each_chunk_mut(&mut buf, n, |l, row| {
            let s = line_start(l);
            for (j, v) in row.iter_mut().enumerate() {
                *v = data[s + j * stride];
            }
            fft.process(row);
        });
        for l in 0..lines {
            let s = line_start(l);
            let row = &buf[l * n..(l + 1) * n];
            for (j, v) in row.iter().enumerate() {
                data[s + j * stride] = *v;
            }
        }
    }
}

/// Interpolation rule for off-lattice evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Interp {
    Linear,
    #[default]
    Cubic,
    Spectral,
}

/// Real values on a periodic lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl LatticeField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape(format!(
                "{} values for a lattice of {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn<F: Fn(&[f64]) -> f64 + Sync + Send>(grid: Grid, f: F) -> Self {
        let values = par::map_range(grid.len(), |i| f(&grid.position(i)));
        Self { grid, values }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Riemann-sum `L^r` norm, `(h^d Σ |v|^r)^{1/r}`.
    pub fn lr_norm(&self, r: f64) -> Result<f64> {
        if !(r >= 1.0) {
            return Err(Error::Domain(format!("L^r norm needs r >= 1, got {r}")));
        }
        let hd = self.grid.cell_volume();
        if r.is_infinite() {
            return Ok(self.sup_norm());
        }
        let s: f64 = self.values.iter().map(|v| v.abs().powf(r)).sum();
        Ok((hd * s).powf(1.0 / r))
    }

    pub fn integral(&self) -> f64 {
        self.grid.cell_volume() * self.values.iter().sum::<f64>()
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if !self.grid.same_geometry(&other.grid) {
            return Err(Error::Shape("lattice geometries differ".into()));
        }
        Ok(())
    }

    /// Coefficients `c_k` with `f(x_j) = Σ_k c_k e^{i v_k·x_j}` (FFT slot order).
    pub fn spectrum(&self) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = self
            .values
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        fft_nd(&self.grid, &mut data, false);
        let norm = 1.0 / self.grid.len() as f64;
        let grid = self.grid;
        par::for_each_mut(&mut data, |i, c| {
            let sign = if grid.index_parity(i) { -1.0 } else { 1.0 };
            *c *= sign * norm;
        });
        data
    }

    /// Inverse of [`spectrum`](Self::spectrum); keeps the real part.
    pub fn from_spectrum(grid: Grid, mut coeffs: Vec<Complex64>) -> Self {
        par::for_each_mut(&mut coeffs, |i, c| {
            if grid.index_parity(i) {
                *c = -*c;
            }
        });
        fft_nd(&grid, &mut coeffs, true);
        Self {
            grid,
            values: coeffs.into_iter().map(|c| c.re).collect(),
        }
    }

    /// Applies the Fourier multiplier `m(v)` in the `e^{i v·x}` basis.
    pub fn apply_multiplier<M: Fn(&[f64]) -> Complex64 + Sync>(&self, m: M) -> Self {
        let mut c = self.spectrum();
        let grid = self.grid;
        par::for_each_mut(&mut c, |i, ci| {
            *ci *= m(&grid.frequency(i));
        });
        Self::from_spectrum(grid, c)
    }

    /// `∂_axis f`, spectrally.
    pub fn gradient(&self, axis: usize) -> Self {
        let grid = self.grid;
        let mut c = self.spectrum();
        par::for_each_mut(&mut c, |i, ci| {
            if grid.is_nyquist(i) {
                *ci = Complex64::new(0.0, 0.0);
            } else {
                *ci *= Complex64::new(0.0, grid.frequency(i)[axis]);
            }
        });
        Self::from_spectrum(grid, c)
    }

    /// `x ↦ f(x + z)` on the torus, exact for band-limited fields.
    pub fn shifted(&self, z: &[f64]) -> Self {
        let z = z.to_vec();
        self.apply_multiplier(move |v| {
            let s: f64 = v.iter().zip(&z).map(|(a, b)| a * b).sum();
            Complex64::from_polar(1.0, s)
        })
    }

    /// Lattice convolution `(f ⊛ g)(x_j) = h^d Σ_m f(x_m) g(x_j - x_m)`.
    pub fn convolve(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let grid = self.grid;
        let mut a: Vec<Complex64> = self
            .values
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        let mut b: Vec<Complex64> = other
            .values
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        fft_nd(&grid, &mut a, false);
        fft_nd(&grid, &mut b, false);
        for (x, y) in a.iter_mut().zip(&b) {
            *x *= y;
        }
        fft_nd(&grid, &mut a, true);
        let scale = grid.cell_volume() / grid.len() as f64;
        // index sum s_j = Σ_m f_m g_{j-m}; position x_j - x_m sits at index (j - m + n/2)
        let half = grid.n / 2;
        let values = (0..grid.len())
            .map(|i| {
                let m = grid.unflatten(i);
                let mut src = [0usize; 3];
                for ax in 0..grid.dim {
                    src[ax] = (m[ax] + half) % grid.n;
                }
                a[grid.flatten(&src)].re * scale
            })
            .collect();
        Ok(Self { grid, values })
    }

    fn wrap(&self, j: i64) -> usize {
        j.rem_euclid(self.grid.n as i64) as usize
    }

    /// Evaluates the periodic interpolant at an arbitrary point.
    pub fn eval(&self, x: &[f64], rule: Interp) -> f64 {
        match rule {
            Interp::Linear => self.eval_tensor(x, 2),
            Interp::Cubic => self.eval_tensor(x, 4),
            Interp::Spectral => self.eval_spectral(x),
        }
    }

    fn eval_tensor(&self, x: &[f64], points: usize) -> f64 {
        let g = &self.grid;
        let h = g.spacing();
        let mut base = [0i64; 3];
        let mut weights = [[0.0f64; 4]; 3];
        for ax in 0..g.dim {
            let s = (x[ax] + g.half_extent) / h;
            let fl = s.floor();
            let frac = s - fl;
            if points == 2 {
                base[ax] = fl as i64;
                weights[ax][0] = 1.0 - frac;
                weights[ax][1] = frac;
            } else {
                base[ax] = fl as i64 - 1;
                // Lagrange weights on nodes -1, 0, 1, 2
                let t = frac;
                weights[ax][0] = -t * (t - 1.0) * (t - 2.0) / 6.0;
                weights[ax][1] = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
                weights[ax][2] = -(t + 1.0) * t * (t - 2.0) / 2.0;
                weights[ax][3] = (t + 1.0) * t * (t - 1.0) / 6.0;
            }
        }
        let combos = points.pow(g.dim as u32);
        let mut acc = 0.0;
        for c in 0..combos {
            let mut rem = c;
            let mut w = 1.0;
            let mut idx = [0usize; 3];
            for ax in (0..g.dim).rev() {
                let o = rem % points;
                rem /= points;
                w *= weights[ax][o];
                idx[ax] = self.wrap(base[ax] + o as i64);
            }
            acc += w * self.values[g.flatten(&idx)];
        }
        acc
    }

    /// Direct trigonometric sum; O(N^d) per point.
    pub fn eval_spectral(&self, x: &[f64]) -> f64 {
        let c = self.spectrum();
        eval_coefficients(&self.grid, &c, x)
    }
}

/// Evaluates `Σ_k c_k e^{i v_k·x}` (real part) at one point.
pub fn eval_coefficients(grid: &Grid, coeffs: &[Complex64], x: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (i, c) in coeffs.iter().enumerate() {
        if grid.is_nyquist(i) {
            // the Nyquist mode is cos-only on the lattice
            let v = grid.frequency(i);
            let s: f64 = v.iter().zip(x).map(|(a, b)| a * b).sum();
            acc += c.re * s.cos();
            continue;
        }
        let v = grid.frequency(i);
        let s: f64 = v.iter().zip(x).map(|(a, b)| a * b).sum();
        acc += (c * Complex64::from_polar(1.0, s)).re;
    }
    acc
}
