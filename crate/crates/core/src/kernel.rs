//! Parametric state-dependent jump kernels
//! `M(t,x,dy) = κ(x) ν_s(dy) + η(x) Π(dy)` and the operator
//! `K f(x) = ∫ [f(x+y) - f(x) - 1_{α>1} 1_{|y|≤1} y·∇f(x)] M(x, dy)`.
//!
//! The small-jump law is `ν_s = Σ_θ w_θ δ_θ(dθ) ⊗ χ_δ(r) r^{-1-β'} 1_{r≤1} dr`
//! (rays with radial density), optionally cut off near the origin by `χ_δ`.
//! Because `κ` and `η` factor out of the `y`-integral, `K` is a pointwise
//! modulation of two translation-invariant operators, both applied as exact
//! Fourier multipliers on a lattice.

use crate::error::{Error, Result};
use crate::lattice::{Grid, LatticeField};
use crate::par;
use crate::quad::{integrate_left_singular, integrate_with_limit};
use crate::symbol::{dot, norm};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// One term `a sin(k·x + φ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Wave {
    pub amplitude: f64,
    pub wavevector: Vec<f64>,
    #[serde(default)]
    pub phase: f64,
}

/// A non-negative trigonometric polynomial `x ↦ base + Σ a_j sin(k_j·x + φ_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Modulator {
    pub base: f64,
    #[serde(default)]
    pub waves: Vec<Wave>,
}

impl Modulator {
    pub fn constant(c: f64) -> Self {
        Self {
            base: c,
            waves: Vec::new(),
        }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    /// `base + amp · sin(k x₁)` in any dimension.
    pub fn sine(dim: usize, base: f64, amp: f64, k: f64) -> Self {
        let mut wavevector = vec![0.0; dim];
        wavevector[0] = k;
        Self {
            base,
            waves: vec![Wave {
                amplitude: amp,
                wavevector,
                phase: 0.0,
            }],
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.waves.iter().any(|w| w.wavevector.len() != dim) {
            return Err(Error::InvalidKernel(
                "modulator wavevector has the wrong dimension".into(),
            ));
        }
        if self.inf_bound() < 0.0 {
            return Err(Error::InvalidKernel(format!(
                "modulator can be negative (lower bound {})",
                self.inf_bound()
            )));
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.base
            + self
                .waves
                .iter()
                .map(|w| w.amplitude * (dot(&w.wavevector, x) + w.phase).sin())
                .sum::<f64>()
    }

    pub fn sup_bound(&self) -> f64 {
        self.base.abs() + self.waves.iter().map(|w| w.amplitude.abs()).sum::<f64>()
    }

    pub fn inf_bound(&self) -> f64 {
        self.base - self.waves.iter().map(|w| w.amplitude.abs()).sum::<f64>()
    }

    /// `sup |∇ modulator|`.
    pub fn lipschitz(&self) -> f64 {
        self.waves
            .iter()
            .map(|w| w.amplitude.abs() * norm(&w.wavevector))
            .sum()
    }

    pub fn is_zero(&self) -> bool {
        self.base == 0.0 && self.waves.iter().all(|w| w.amplitude == 0.0)
    }

    pub fn is_constant(&self) -> bool {
        self.waves
            .iter()
            .all(|w| w.amplitude == 0.0 || norm(&w.wavevector) == 0.0)
    }

    /// Convolution with an even probability density whose Fourier transform
    /// is `transform(k)`: each wave is damped by `transform(k)`.
    pub fn convolved<F: Fn(&[f64]) -> f64>(&self, transform: F) -> Self {
        Self {
            base: self.base,
            waves: self
                .waves
                .iter()
                .map(|w| Wave {
                    amplitude: w.amplitude * transform(&w.wavevector),
                    ..w.clone()
                })
                .collect(),
        }
    }
}

/// Smooth radial step: 0 for `s ≤ 1/2`, 1 for `s ≥ 1`, monotone between.
pub fn smooth_step(s: f64) -> f64 {
    let t = 2.0 * s - 1.0;
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / t).exp();
    let b = (-1.0 / (1.0 - t)).exp();
    a / (a + b)
}

/// `χ_δ(y) = χ(|y|/δ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationCutoff {
    pub delta: f64,
}

impl TruncationCutoff {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Domain(format!(
                "cutoff scale {delta} must lie in (0, 1)"
            )));
        }
        Ok(Self { delta })
    }

    pub fn eval(&self, r: f64) -> f64 {
        smooth_step(r / self.delta)
    }
}

/// A ray of the small-jump law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ray {
    #[serde(rename = "dir")]
    pub direction: Vec<f64>,
    #[serde(rename = "w")]
    pub weight: f64,
}

/// `Σ_θ w_θ δ_θ ⊗ r^{-1-β'} dr` on `0 < r ≤ 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallJumpLaw {
    pub beta_prime: f64,
    pub rays: Vec<Ray>,
}

impl SmallJumpLaw {
    /// Rotation-invariant law, discretised into equally weighted rays whose
    /// weights add up to the sphere area.
    pub fn isotropic(dim: usize, beta_prime: f64, rays: usize) -> Result<Self> {
        let dirs = match dim {
            1 => vec![vec![1.0], vec![-1.0]],
            2 => (0..rays.max(2))
                .map(|k| {
                    let a = 2.0 * PI * (k as f64 + 0.5) / rays.max(2) as f64;
                    vec![a.cos(), a.sin()]
                })
                .collect(),
            _ => crate::symbol::unit_sphere_samples(dim, rays.max(4)),
        };
        let area = sphere_area(dim);
        let w = area / dirs.len() as f64;
        Ok(Self {
            beta_prime,
            rays: dirs
                .into_iter()
                .map(|d| Ray {
                    direction: d,
                    weight: w,
                })
                .collect(),
        })
    }

    pub fn one_sided(beta_prime: f64) -> Self {
        Self {
            beta_prime,
            rays: vec![Ray {
                direction: vec![1.0],
                weight: 1.0,
            }],
        }
    }

    pub fn angular_mass(&self) -> f64 {
        self.rays.iter().map(|r| r.weight).sum()
    }

    /// `Σ w_θ θ`.
    pub fn angular_mean(&self, dim: usize) -> Vec<f64> {
        let mut m = vec![0.0; dim];
        for r in &self.rays {
            for (mi, di) in m.iter_mut().zip(&r.direction) {
                *mi += r.weight * di;
            }
        }
        m
    }

    pub fn is_symmetric(&self) -> bool {
        self.angular_mean(self.rays.first().map_or(1, |r| r.direction.len()))
            .iter()
            .all(|v| v.abs() < 1e-14)
    }
}

/// `2 π^{d/2} / Γ(d/2)`.
pub fn sphere_area(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        d => 2.0 * PI.powf(d as f64 / 2.0) / statrs::function::gamma::gamma(d as f64 / 2.0),
    }
}

/// An atom of the big-jump measure `Π`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiAtom {
    pub y: Vec<f64>,
    pub mass: f64,
}

/// `M(x, dy) = κ(x) χ_δ(y) ν_s(dy) + η(x) Π(dy)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpKernelModel {
    pub dim: usize,
    pub beta: f64,
    pub small: SmallJumpLaw,
    pub kappa: Modulator,
    pub eta: Modulator,
    pub pi: Vec<PiAtom>,
    #[serde(default)]
    pub cutoff: Option<TruncationCutoff>,
}

impl JumpKernelModel {
    pub fn new(
        dim: usize,
        beta: f64,
        small: SmallJumpLaw,
        kappa: Modulator,
        eta: Modulator,
        pi: Vec<PiAtom>,
    ) -> Result<Self> {
        let m = Self {
            dim,
            beta,
            small,
            kappa,
            eta,
            pi,
            cutoff: None,
        };
        m.validate()?;
        Ok(m)
    }

    /// The kernel that does nothing.
    pub fn zero(dim: usize, beta: f64) -> Self {
        Self {
            dim,
            beta,
            small: SmallJumpLaw {
                beta_prime: 0.5 * beta,
                rays: Vec::new(),
            },
            kappa: Modulator::zero(),
            eta: Modulator::zero(),
            pi: Vec::new(),
            cutoff: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.small.beta_prime >= 0.0 && self.small.beta_prime < self.beta) {
            return Err(Error::InvalidKernel(format!(
                "need 0 <= beta' < beta, got beta' = {}, beta = {}",
                self.small.beta_prime, self.beta
            )));
        }
        for r in &self.small.rays {
            if r.direction.len() != self.dim
                || (norm(&r.direction) - 1.0).abs() > 1e-12
                || !(r.weight > 0.0)
            {
                return Err(Error::InvalidKernel(
                    "small-jump rays need unit directions and positive weights".into(),
                ));
            }
        }
        for a in &self.pi {
            if a.y.len() != self.dim || norm(&a.y) == 0.0 || !(a.mass >= 0.0) {
                return Err(Error::InvalidKernel(
                    "Pi atoms need non-zero jumps and non-negative mass".into(),
                ));
            }
        }
        self.kappa.validate(self.dim)?;
        self.eta.validate(self.dim)
    }

    /// Checks `β < α`, the order condition relative to the stable part.
    pub fn check_against(&self, alpha: f64) -> Result<()> {
        if !(self.beta < alpha) {
            return Err(Error::InvalidKernel(format!(
                "beta = {} must be below alpha = {alpha}",
                self.beta
            )));
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        (self.kappa.is_zero() || self.small.rays.is_empty())
            && (self.eta.is_zero() || self.pi.iter().all(|a| a.mass == 0.0))
    }

    /// Cut small jumps off near 0 with `χ_δ`.
    pub fn truncated(&self, cutoff: TruncationCutoff) -> Self {
        Self {
            cutoff: Some(cutoff),
            ..self.clone()
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        let scale = |m: &Modulator| Modulator {
            base: c * m.base,
            waves: m
                .waves
                .iter()
                .map(|w| Wave {
                    amplitude: c * w.amplitude,
                    ..w.clone()
                })
                .collect(),
        };
        Self {
            kappa: scale(&self.kappa),
            eta: scale(&self.eta),
            ..self.clone()
        }
    }

    fn cut(&self, r: f64) -> f64 {
        self.cutoff.map_or(1.0, |c| c.eval(r))
    }

    /// `sup_x ∫ 1 ∧ |y|^β M(x, dy)` in closed form (the cutoff is ignored,
    /// which can only increase the value).
    pub fn beta_moment_bound(&self) -> f64 {
        let small = self.kappa.sup_bound() * self.small.angular_mass()
            / (self.beta - self.small.beta_prime);
        let big: f64 = self
            .pi
            .iter()
            .map(|a| a.mass * norm(&a.y).powf(self.beta).min(1.0))
            .sum();
        small + self.eta.sup_bound() * big
    }

    /// `∫ 1 ∧ |y|^β M(x, dy)` by quadrature, cutoff included.
    pub fn beta_moment_at(&self, x: &[f64]) -> Result<f64> {
        let bp = self.small.beta_prime;
        let radial = integrate_left_singular(
            |r| self.cut(r) * r.powf(self.beta - 1.0 - bp),
            0.0,
            1.0,
            1.0 / (self.beta - bp),
            1e-13,
            1e-13,
        )?
        .value;
        let big: f64 = self
            .pi
            .iter()
            .map(|a| a.mass * norm(&a.y).powf(self.beta).min(1.0))
            .sum();
        Ok(self.kappa.eval(x) * self.small.angular_mass() * radial + self.eta.eval(x) * big)
    }

    /// Total mass `M(x, ℝ^d∖{0})`; finite only with a cutoff.
    pub fn total_rate_bound(&self) -> Result<f64> {
        let c = self.cutoff.ok_or_else(|| {
            Error::InvalidKernel("small-jump mass is infinite without a cutoff".into())
        })?;
        let bp = self.small.beta_prime;
        let radial = integrate_with_limit(
            |r| c.eval(r) * r.powf(-1.0 - bp),
            0.5 * c.delta,
            1.0,
            1e-13,
            1e-12,
            2000,
        )?
        .value;
        let pi_mass: f64 = self.pi.iter().map(|a| a.mass).sum();
        Ok(self.kappa.sup_bound() * self.small.angular_mass() * radial
            + self.eta.sup_bound() * pi_mass)
    }

    /// Small-jump radial mass `∫ χ_δ(r) r^{-1-β'} dr` on `(0, 1]`.
    pub fn radial_mass(&self) -> Result<f64> {
        let c = self.cutoff.ok_or_else(|| {
            Error::InvalidKernel("small-jump mass is infinite without a cutoff".into())
        })?;
        let bp = self.small.beta_prime;
        Ok(integrate_with_limit(
            |r| c.eval(r) * r.powf(-1.0 - bp),
            0.5 * c.delta,
            1.0,
            1e-13,
            1e-12,
            2000,
        )?
        .value)
    }

    /// `1_{α>1} ∫_{|y|≤1} y M(x, dy)` (requires a cutoff when small jumps are present).
    pub fn compensator(&self, alpha: f64, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        if alpha <= 1.0 {
            return Ok(out);
        }
        if !self.small.rays.is_empty() && !self.kappa.is_zero() {
            let c = self
                .cutoff
                .ok_or_else(|| Error::InvalidKernel("compensator needs a cutoff".into()))?;
            let bp = self.small.beta_prime;
            let first = integrate_with_limit(
                |r| c.eval(r) * r.powf(-bp),
                0.5 * c.delta,
                1.0,
                1e-14,
                1e-13,
                2000,
            )?
            .value;
            let k = self.kappa.eval(x);
            for (o, m) in out.iter_mut().zip(self.small.angular_mean(self.dim)) {
                *o += k * m * first;
            }
        }
        let e = self.eta.eval(x);
        for a in &self.pi {
            if norm(&a.y) <= 1.0 {
                for (o, yi) in out.iter_mut().zip(&a.y) {
                    *o += e * a.mass * yi;
                }
            }
        }
        Ok(out)
    }

    /// Lipschitz constant of `x ↦ compensator(x)`.
    pub fn compensator_lipschitz(&self, alpha: f64) -> Result<f64> {
        if alpha <= 1.0 {
            return Ok(0.0);
        }
        let mut l = 0.0;
        if !self.small.rays.is_empty() {
            if let Some(c) = self.cutoff {
                let bp = self.small.beta_prime;
                let first = integrate_with_limit(
                    |r| c.eval(r) * r.powf(-bp),
                    0.5 * c.delta,
                    1.0,
                    1e-14,
                    1e-13,
                    2000,
                )?
                .value;
                l += self.kappa.lipschitz() * norm(&self.small.angular_mean(self.dim)) * first;
            }
        }
        let near: f64 = self
            .pi
            .iter()
            .filter(|a| norm(&a.y) <= 1.0)
            .map(|a| a.mass * norm(&a.y))
            .sum();
        Ok(l + self.eta.lipschitz() * near)
    }

    /// `J(s) = ∫₀¹ χ_δ(r) (e^{irs} - 1 - c i r s) r^{-1-β'} dr` with
    /// `c = 1_{α>1}`: the multiplier of one unit-weight ray at `s = v·θ`.
    pub fn ray_multiplier(&self, s: f64, compensated: bool) -> Result<Complex64> {
        if s == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let bp = self.small.beta_prime;
        let c = if compensated { 1.0 } else { 0.0 };
        let pieces = (s.abs() / PI).ceil().max(1.0) as usize;
        let re = |r: f64| self.cut(r) * ((r * s).cos() - 1.0) * r.powf(-1.0 - bp);
        let im = |r: f64| self.cut(r) * ((r * s).sin() - c * r * s) * r.powf(-1.0 - bp);
        // the first period carries the power singularity
        let first = (PI / s.abs()).min(1.0);
        let lim = 400 + 20 * pieces;
        let head_re = integrate_left_singular(re, 0.0, first, 2.0, 1e-15, 1e-13)?.value;
        let head_im = integrate_left_singular(im, 0.0, first, 2.0, 1e-15, 1e-13)?.value;
        let (tail_re, tail_im) = if first < 1.0 {
            (
                integrate_with_limit(re, first, 1.0, 1e-15, 1e-13, lim)?.value,
                integrate_with_limit(im, first, 1.0, 1e-15, 1e-13, lim)?.value,
            )
        } else {
            (0.0, 0.0)
        };
        Ok(Complex64::new(head_re + tail_re, head_im + tail_im))
    }

    /// Multiplier of the big-jump operator at frequency `v`.
    pub fn pi_multiplier(&self, v: &[f64], compensated: bool) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for a in &self.pi {
            let s = dot(v, &a.y);
            acc += a.mass * (Complex64::from_polar(1.0, s) - 1.0);
            if compensated && norm(&a.y) <= 1.0 {
                acc -= a.mass * Complex64::new(0.0, s);
            }
        }
        acc
    }
}

/// `K` discretised on a lattice: `K f = κ · A f + η · B f` with `A`, `B`
/// Fourier multipliers.
pub struct KernelOperator {
    grid: Grid,
    small: Vec<Complex64>,
    big: Vec<Complex64>,
    kappa: Vec<f64>,
    eta: Vec<f64>,
    zero: bool,
}

impl KernelOperator {
    /// `compensated` selects the `1_{α>1}` gradient term.
    pub fn new(model: &JumpKernelModel, grid: Grid, compensated: bool) -> Result<Self> {
        model.validate()?;
        if model.dim != grid.dim {
            return Err(Error::Shape("kernel and lattice dimensions differ".into()));
        }
        let zero = model.is_zero();
        let small = if model.small.rays.is_empty() || model.kappa.is_zero() {
            vec![Complex64::new(0.0, 0.0); grid.len()]
        } else {
            small_multiplier(model, grid, compensated)?
        };
        let big = par::map_range(grid.len(), |i| {
            if grid.is_nyquist(i) {
                Complex64::new(0.0, 0.0)
            } else {
                model.pi_multiplier(&grid.frequency(i), compensated)
            }
        });
        let kappa = par::map_range(grid.len(), |i| model.kappa.eval(&grid.position(i)));
        let eta = par::map_range(grid.len(), |i| model.eta.eval(&grid.position(i)));
        Ok(Self {
            grid,
            small,
            big,
            kappa,
            eta,
            zero,
        })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn apply(&self, f: &LatticeField) -> Result<LatticeField> {
        if !f.grid.same_geometry(&self.grid) {
            return Err(Error::Shape("field and operator lattices differ".into()));
        }
        if self.zero {
            return Ok(LatticeField::zeros(self.grid));
        }
        let c = f.spectrum();
        let a = LatticeField::from_spectrum(
            self.grid,
            c.iter().zip(&self.small).map(|(x, m)| x * m).collect(),
        );
        let b = LatticeField::from_spectrum(
            self.grid,
            c.iter().zip(&self.big).map(|(x, m)| x * m).collect(),
        );
        let values = (0..self.grid.len())
            .map(|i| self.kappa[i] * a.values[i] + self.eta[i] * b.values[i])
            .collect();
        Ok(LatticeField {
            grid: self.grid,
            values,
        })
    }
}

fn small_multiplier(
    model: &JumpKernelModel,
    grid: Grid,
    compensated: bool,
) -> Result<Vec<Complex64>> {
    if grid.dim == 1 {
        // J(-s) = conj J(s): one quadrature per |v|
        let half = grid.n / 2;
        let table = par::map_range(half + 1, |k| {
            model.ray_multiplier(k as f64 * grid.freq_step(), compensated)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let j = |s_index: i64| {
            let v = table[s_index.unsigned_abs() as usize];
            if s_index < 0 {
                v.conj()
            } else {
                v
            }
        };
        return Ok((0..grid.len())
            .map(|i| {
                if grid.is_nyquist(i) {
                    return Complex64::new(0.0, 0.0);
                }
                let k = grid.signed_index(i);
                model
                    .small
                    .rays
                    .iter()
                    .map(|r| r.weight * j(if r.direction[0] > 0.0 { k } else { -k }))
                    .sum()
            })
            .collect());
    }
    // tabulate J on a fine grid in s and interpolate cubically
    let s_max = grid.max_freq() * (grid.dim as f64).sqrt() * 1.01;
    let ds = 0.01;
    let m = (s_max / ds).ceil() as usize + 4;
    let table = par::map_range(m, |k| model.ray_multiplier(k as f64 * ds, compensated))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let interp = |s: f64| {
        let a = s.abs() / ds;
        let j = (a.floor() as usize).clamp(1, m - 3);
        let t = a - j as f64;
        let w = [
            -t * (t - 1.0) * (t - 2.0) / 6.0,
            (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
            -(t + 1.0) * t * (t - 2.0) / 2.0,
            (t + 1.0) * t * (t - 1.0) / 6.0,
        ];
        let v: Complex64 = (0..4).map(|o| table[j - 1 + o] * w[o]).sum();
        if s < 0.0 {
            v.conj()
        } else {
            v
        }
    };
    Ok(par::map_range(grid.len(), |i| {
        if grid.is_nyquist(i) {
            return Complex64::new(0.0, 0.0);
        }
        let v = grid.frequency(i);
        model
            .small
            .rays
            .iter()
            .map(|r| r.weight * interp(dot(&v, &r.direction)))
            .sum()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate;
    use approx::assert_abs_diff_eq;

    fn symmetric_model(beta_prime: f64) -> JumpKernelModel {
        JumpKernelModel::new(
            1,
            0.5,
            SmallJumpLaw::isotropic(1, beta_prime, 2).unwrap(),
            Modulator::constant(1.0),
            Modulator::zero(),
            Vec::new(),
        )
        .unwrap()
    }

    #[test]
    fn smooth_step_shape() {
        assert_eq!(smooth_step(0.4), 0.0);
        assert_eq!(smooth_step(1.2), 1.0);
        let mut prev = 0.0;
        for k in 0..=100 {
            let v = smooth_step(0.5 + 0.005 * k as f64);
            assert!(v >= prev && (0.0..=1.0).contains(&v));
            prev = v;
        }
    }

    #[test]
    fn cosine_oracle() {
        // K cos at 0 for κ ≡ 1, β' = 0.3, uncompensated (α ≤ 1)
        let model = symmetric_model(0.3);
        let oracle = 2.0
            * integrate_left_singular(
                |y| (y.cos() - 1.0) * y.powf(-1.3),
                0.0,
                1.0,
                2.0,
                1e-14,
                1e-13,
            )
            .unwrap()
            .value;
        let grid = Grid::new(1, 64, PI).unwrap();
        let k = KernelOperator::new(&model, grid, false).unwrap();
        let f = LatticeField::from_fn(grid, |x| x[0].cos());
        let kf = k.apply(&f).unwrap();
        assert_abs_diff_eq!(kf.values[32], oracle, epsilon = 1e-10);
    }

    #[test]
    fn zero_kernel_and_linear_symmetry() {
        let grid = Grid::new(1, 64, PI).unwrap();
        let zero = KernelOperator::new(&JumpKernelModel::zero(1, 0.5), grid, true).unwrap();
        let f = LatticeField::from_fn(grid, |x| x[0].sin());
        assert_eq!(zero.apply(&f).unwrap().sup_norm(), 0.0);
        // a symmetric law annihilates the (locally) linear part: odd multiplier vanishes
        let m = symmetric_model(0.3);
        let j = m.ray_multiplier(1.7, false).unwrap() + m.ray_multiplier(-1.7, false).unwrap();
        assert_abs_diff_eq!(j.im, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn beta_moment_closed_form_matches_quadrature() {
        let mut model = symmetric_model(0.3);
        model.pi = vec![PiAtom {
            y: vec![1.5],
            mass: 0.4,
        }];
        model.eta = Modulator::constant(0.5);
        let q = model.beta_moment_at(&[0.0]).unwrap();
        assert_abs_diff_eq!(model.beta_moment_bound(), q, epsilon = 1e-8);
        assert_abs_diff_eq!(model.beta_moment_bound(), 2.0 / 0.2 + 0.2, epsilon = 1e-12);
    }

    #[test]
    fn compensator_oracle() {
        let model = JumpKernelModel::new(
            1,
            0.5,
            SmallJumpLaw::one_sided(0.3),
            Modulator::constant(1.0),
            Modulator::zero(),
            Vec::new(),
        )
        .unwrap()
        .truncated(TruncationCutoff::new(0.2).unwrap());
        let c = model.compensator(1.5, &[0.0]).unwrap()[0];
        let oracle = integrate(
            |y| smooth_step(y / 0.2) * y.powf(-0.3),
            0.1,
            1.0,
            1e-14,
            1e-13,
        )
        .unwrap()
        .value;
        assert_abs_diff_eq!(c, oracle, epsilon = 1e-8);
        assert_eq!(model.compensator(0.8, &[0.0]).unwrap()[0], 0.0);
        let sym = symmetric_model(0.3).truncated(TruncationCutoff::new(0.2).unwrap());
        assert_abs_diff_eq!(
            sym.compensator(1.5, &[0.3]).unwrap()[0],
            0.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn ray_multiplier_against_direct_quadrature() {
        let model = symmetric_model(0.3);
        for s in [0.3, 5.0, 80.0] {
            let j = model.ray_multiplier(s, true).unwrap();
            let re = integrate(
                |r| ((r * s).cos() - 1.0) * r.powf(-1.3),
                1e-12,
                1.0,
                1e-13,
                1e-12,
            )
            .unwrap()
            .value;
            assert_abs_diff_eq!(j.re, re, epsilon = 1e-8);
        }
    }

    #[test]
    fn kernel_in_two_dimensions_matches_quadrature() {
        let model = JumpKernelModel::new(
            2,
            0.6,
            SmallJumpLaw::isotropic(2, 0.2, 8).unwrap(),
            Modulator::constant(1.0),
            Modulator::zero(),
            Vec::new(),
        )
        .unwrap();
        let grid = Grid::new(2, 32, PI).unwrap();
        let k = KernelOperator::new(&model, grid, false).unwrap();
        let f = LatticeField::from_fn(grid, |x| (x[0] + 2.0 * x[1]).cos());
        let kf = k.apply(&f).unwrap();
        let idx = grid.flatten(&[16, 16]);
        let mut oracle = 0.0;
        for r in &model.small.rays {
            let s = r.direction[0] + 2.0 * r.direction[1];
            oracle += r.weight * model.ray_multiplier(s, false).unwrap().re;
        }
        assert_abs_diff_eq!(kf.values[idx], oracle, epsilon = 1e-8);
    }
}
