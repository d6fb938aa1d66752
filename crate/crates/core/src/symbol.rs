//! Characteristic exponents of the stable part and of the full Lévy triple.
//!
//! Sign convention: `E[exp(i u·S_t)] = exp(-t ψ(u))`, with
//! `ψ(u) = Σ a_ij u_i u_j - i b·u - ∫ (e^{iu·y} - 1 - 1_{|y|≤1} i u·y) ν(dy)`.
//! The stable part has Lévy measure `ν̃(B) = ∫ μ(dξ) ∫ 1_B(rξ) r^{-1-α} dr`
//! for a discrete spectral measure `μ`, so every ray integral is closed form.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use std::f64::consts::{FRAC_PI_2, PI};

/// `∫₁^∞ r^{-2} sin r dr + ∫₀¹ r^{-2}(sin r - r) dr = 1 - Euler's constant`.
pub const C1: f64 = 0.422_784_335_098_467_1;

const UNIT_TOL: f64 = 1e-12;
const SPAN_TOL: f64 = 1e-10;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Anything with a characteristic exponent on ℝ^d.
pub trait Exponent: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, u: &[f64]) -> Complex64;
    /// Stability index of the dominating stable part, when there is one.
    fn alpha(&self) -> Option<f64> {
        None
    }
    /// Whether `p_u` is `p_1` rescaled by `u^{1/α}` up to a translation, so
    /// shift differences satisfy `‖p_u(·+z) - p_u‖ = ‖p_1(·+u^{-1/α}z) - p_1‖`.
    fn self_similar(&self) -> bool {
        false
    }
}

/// Wraps a closure as an [`Exponent`].
pub struct FnExponent<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> Complex64 + Sync> FnExponent<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64]) -> Complex64 + Sync> Exponent for FnExponent<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, u: &[f64]) -> Complex64 {
        (self.f)(u)
    }
}

/// Scales time: the exponent of `S_{c t}`.
pub struct ScaledExponent<'a, E: ?Sized> {
    pub inner: &'a E,
    pub factor: f64,
}

impl<E: Exponent + ?Sized> Exponent for ScaledExponent<'_, E> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn eval(&self, u: &[f64]) -> Complex64 {
        self.inner.eval(u) * self.factor
    }
    fn alpha(&self) -> Option<f64> {
        self.inner.alpha()
    }
    fn self_similar(&self) -> bool {
        self.inner.self_similar()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    #[serde(rename = "dir")]
    pub direction: Vec<f64>,
    #[serde(rename = "w")]
    pub weight: f64,
}

/// Discrete finite measure on the unit sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMeasure {
    atoms: Vec<Atom>,
    dim: usize,
}

impl SpectralMeasure {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        let dim = atoms
            .first()
            .map(|a| a.direction.len())
            .ok_or_else(|| Error::InvalidMeasure("no atoms".into()))?;
        if dim == 0 {
            return Err(Error::InvalidMeasure("zero-dimensional direction".into()));
        }
        for (i, a) in atoms.iter().enumerate() {
            if a.direction.len() != dim {
                return Err(Error::InvalidMeasure(format!(
                    "atom {i} has dimension {}",
                    a.direction.len()
                )));
            }
            if ((norm(&a.direction)) - 1.0).abs() > UNIT_TOL {
                return Err(Error::InvalidMeasure(format!(
                    "atom {i} direction has norm {}",
                    norm(&a.direction)
                )));
            }
            if !(a.weight > 0.0 && a.weight.is_finite()) {
                return Err(Error::InvalidMeasure(format!(
                    "atom {i} weight {} is not positive",
                    a.weight
                )));
            }
        }
        let m = Self { atoms, dim };
        let s = m.smallest_singular_value();
        if s <= SPAN_TOL {
            return Err(Error::InvalidMeasure(format!(
                "directions do not span R^{dim} (smallest singular value {s:.3e})"
            )));
        }
        Ok(m)
    }

    /// Symmetric measure with unit-normalised directions `±ξ`, weight `w` each.
    pub fn symmetric(directions: &[Vec<f64>], w: f64) -> Result<Self> {
        let mut atoms = Vec::new();
        for d in directions {
            let n = norm(d);
            let xi: Vec<f64> = d.iter().map(|x| x / n).collect();
            atoms.push(Atom {
                direction: xi.clone(),
                weight: w,
            });
            atoms.push(Atom {
                direction: xi.iter().map(|x| -x).collect(),
                weight: w,
            });
        }
        Self::new(atoms)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    /// Smallest singular value of the matrix with rows `sqrt(w_j) ξ_j`.
    pub fn smallest_singular_value(&self) -> f64 {
        let d = self.dim;
        let mut gram = DMatrix::<f64>::zeros(d, d);
        for a in &self.atoms {
            for i in 0..d {
                for j in 0..d {
                    gram[(i, j)] += a.weight * a.direction[i] * a.direction[j];
                }
            }
        }
        let eig = SymmetricEigen::new(gram);
        eig.eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
            .max(0.0)
            .sqrt()
    }

    /// `Σ_j w_j ξ_j`.
    pub fn first_moment(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for a in &self.atoms {
            for (mi, xi) in m.iter_mut().zip(&a.direction) {
                *mi += a.weight * xi;
            }
        }
        m
    }
}

/// One-ray integral `h_α(s) = ∫₀^∞ (e^{isr} - 1 - i s r 1_{r≤1}) r^{-1-α} dr`.
///
/// For `α ≠ 1` the two regimes `α < 1` and `α > 1` share the closed form
/// `Γ(-α) |s|^α e^{∓iπα/2} - i s / (1 - α)`; for `α = 1` it is
/// `-π|s|/2 + i s (c₁ - log|s|)`.
pub fn one_ray(alpha: f64, s: f64) -> Complex64 {
    if s == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let a = s.abs();
    if alpha == 1.0 {
        return Complex64::new(-FRAC_PI_2 * a, s * (C1 - a.ln()));
    }
    let mag = gamma(-alpha) * a.powf(alpha);
    let phase = -s.signum() * FRAC_PI_2 * alpha;
    Complex64::from_polar(mag, phase) - Complex64::new(0.0, s / (1.0 - alpha))
}

/// The α-stable part: index `alpha` and spectral measure `mu`.
#[derive(Debug, Clone, PartialEq)]
pub struct StablePart {
    alpha: f64,
    mu: SpectralMeasure,
    gamma: Vec<f64>,
}

impl StablePart {
    pub fn new(alpha: f64, mu: SpectralMeasure) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::Domain(format!("alpha = {alpha} is outside (0, 2)")));
        }
        let gamma = gamma_vector(alpha, &mu);
        Ok(Self { alpha, mu, gamma })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn measure(&self) -> &SpectralMeasure {
        &self.mu
    }

    pub fn dim(&self) -> usize {
        self.mu.dim()
    }

    /// Cached centring vector γ.
    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    /// `ψ̃(u)`.
    pub fn exponent(&self, u: &[f64]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for atom in self.mu.atoms() {
            acc -= atom.weight * one_ray(self.alpha, dot(u, &atom.direction));
        }
        acc
    }

    /// `|LHS - RHS|` of the scaling identity of `ψ̃` under `u ↦ ρu`.
    pub fn homogeneity_residual(&self, rho: f64, u: &[f64]) -> Result<f64> {
        if !(rho > 0.0) {
            return Err(Error::Domain(format!("rho = {rho} must be positive")));
        }
        let ru: Vec<f64> = u.iter().map(|x| rho * x).collect();
        let ug = dot(u, &self.gamma);
        let i = Complex64::i();
        let residual = if self.alpha == 1.0 {
            self.exponent(&ru) - rho * self.exponent(u) - i * (rho * rho.ln()) * ug
        } else {
            (self.exponent(&ru) + i * rho * ug) - rho.powf(self.alpha) * (self.exponent(u) + i * ug)
        };
        Ok(residual.norm())
    }

    /// `Re ψ̃(u) = κ_α Σ_j w_j |u·ξ_j|^α` with `κ_α > 0`.
    pub fn real_part(&self, u: &[f64]) -> f64 {
        let k = if self.alpha == 1.0 {
            FRAC_PI_2
        } else {
            -gamma(-self.alpha) * (FRAC_PI_2 * self.alpha).cos()
        };
        self.mu
            .atoms()
            .iter()
            .map(|a| a.weight * dot(u, &a.direction).abs().powf(self.alpha))
            .sum::<f64>()
            * k
    }

    /// Sampled lower bound of `Re ψ̃(u) / |u|^α` over the unit sphere.
    pub fn coercivity_constant(&self, samples: usize) -> f64 {
        unit_sphere_samples(self.dim(), samples)
            .iter()
            .map(|u| self.real_part(u))
            .fold(f64::INFINITY, f64::min)
    }
}

impl Exponent for StablePart {
    fn dim(&self) -> usize {
        self.mu.dim()
    }
    fn eval(&self, u: &[f64]) -> Complex64 {
        self.exponent(u)
    }
    fn alpha(&self) -> Option<f64> {
        Some(self.alpha)
    }
    fn self_similar(&self) -> bool {
        true
    }
}

/// Closed-form centring vector: `-Σ w ξ / (1-α)` for `α ≠ 1`, `Σ w ξ` for `α = 1`.
pub fn gamma_vector(alpha: f64, mu: &SpectralMeasure) -> Vec<f64> {
    let m = mu.first_moment();
    if alpha == 1.0 {
        m
    } else {
        m.into_iter().map(|x| -x / (1.0 - alpha)).collect()
    }
}

/// Deterministic, roughly uniform points on the unit sphere of ℝ^d.
pub fn unit_sphere_samples(dim: usize, count: usize) -> Vec<Vec<f64>> {
    match dim {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count)
            .map(|k| {
                let th = 2.0 * PI * k as f64 / count as f64;
                vec![th.cos(), th.sin()]
            })
            .collect(),
        _ => {
            // Fibonacci lattice on S^2, embedded in the first three coordinates
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let th = golden * k as f64;
                    let mut v = vec![0.0; dim];
                    v[0] = r * th.cos();
                    v[1] = r * th.sin();
                    v[2] = z;
                    v
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtraJump {
    pub y: Vec<f64>,
    pub rate: f64,
}

/// Finite atomic jump measure added on top of the stable part.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FiniteJumpMeasure {
    jumps: Vec<ExtraJump>,
}

impl FiniteJumpMeasure {
    pub fn new(jumps: Vec<ExtraJump>) -> Result<Self> {
        for (i, j) in jumps.iter().enumerate() {
            if !(j.rate >= 0.0 && j.rate.is_finite()) {
                return Err(Error::InvalidTriple(format!(
                    "extra jump {i} has rate {}",
                    j.rate
                )));
            }
            if norm(&j.y) == 0.0 {
                return Err(Error::InvalidTriple(format!(
                    "extra jump {i} has zero size"
                )));
            }
        }
        Ok(Self { jumps })
    }

    pub fn jumps(&self) -> &[ExtraJump] {
        &self.jumps
    }

    pub fn total_rate(&self) -> f64 {
        self.jumps.iter().map(|j| j.rate).sum()
    }

    /// `-∫ (e^{iu·y} - 1 - 1_{|y|≤1} i u·y) ν_extra(dy)`.
    pub fn exponent(&self, u: &[f64]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for j in &self.jumps {
            let s = dot(u, &j.y);
            let comp = if norm(&j.y) <= 1.0 { s } else { 0.0 };
            acc -= j.rate * (Complex64::new(s.cos() - 1.0, s.sin() - comp));
        }
        acc
    }

    /// Drift removed by the small-jump compensation, `Σ_{|y|≤1} rate·y`.
    pub fn compensation(&self, dim: usize) -> Vec<f64> {
        let mut c = vec![0.0; dim];
        for j in self.jumps.iter().filter(|j| norm(&j.y) <= 1.0) {
            for (ci, yi) in c.iter_mut().zip(&j.y) {
                *ci += j.rate * yi;
            }
        }
        c
    }
}

/// The generator `L`: diffusion `a`, drift `b`, stable part and extra jumps.
#[derive(Debug, Clone, PartialEq)]
pub struct LevyTriple {
    a: DMatrix<f64>,
    b: Vec<f64>,
    stable: StablePart,
    extra: FiniteJumpMeasure,
}

impl LevyTriple {
    pub fn new(
        a: DMatrix<f64>,
        b: Vec<f64>,
        stable: StablePart,
        extra: FiniteJumpMeasure,
    ) -> Result<Self> {
        let d = stable.dim();
        if a.nrows() != d || a.ncols() != d {
            return Err(Error::InvalidTriple(format!(
                "diffusion matrix is {}x{}, expected {d}x{d}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.len() != d {
            return Err(Error::InvalidTriple(format!(
                "drift has length {}, expected {d}",
                b.len()
            )));
        }
        if (&a - a.transpose()).abs().max() > 1e-12 {
            return Err(Error::InvalidTriple(
                "diffusion matrix is not symmetric".into(),
            ));
        }
        let min_eig = SymmetricEigen::new(a.clone()).eigenvalues.min();
        if min_eig < -1e-10 {
            return Err(Error::InvalidTriple(format!(
                "diffusion matrix has eigenvalue {min_eig:.3e} < 0"
            )));
        }
        if extra.jumps().iter().any(|j| j.y.len() != d) {
            return Err(Error::InvalidTriple("extra jump dimension mismatch".into()));
        }
        Ok(Self {
            a,
            b,
            stable,
            extra,
        })
    }

    /// Pure stable triple: `a = 0`, `b = 0`, no extra jumps.
    pub fn pure_stable(stable: StablePart) -> Self {
        let d = stable.dim();
        Self {
            a: DMatrix::zeros(d, d),
            b: vec![0.0; d],
            stable,
            extra: FiniteJumpMeasure::default(),
        }
    }

    pub fn dim(&self) -> usize {
        self.stable.dim()
    }
    pub fn diffusion(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn drift(&self) -> &[f64] {
        &self.b
    }
    pub fn stable(&self) -> &StablePart {
        &self.stable
    }
    pub fn extra(&self) -> &FiniteJumpMeasure {
        &self.extra
    }

    /// `ψ(u) = Σ a_ij u_i u_j - i b·u + ψ̃(u) + ψ_extra(u)`.
    pub fn exponent(&self, u: &[f64]) -> Complex64 {
        let d = self.dim();
        let mut quad = 0.0;
        for i in 0..d {
            for j in 0..d {
                quad += self.a[(i, j)] * u[i] * u[j];
            }
        }
        Complex64::new(quad, -dot(&self.b, u)) + self.stable.exponent(u) + self.extra.exponent(u)
    }

    /// `Re ψ(u)`, cheaper than the full exponent.
    pub fn real_part(&self, u: &[f64]) -> f64 {
        self.exponent(u).re
    }
}

impl Exponent for LevyTriple {
    fn dim(&self) -> usize {
        self.stable.dim()
    }
    fn eval(&self, u: &[f64]) -> Complex64 {
        self.exponent(u)
    }
    fn alpha(&self) -> Option<f64> {
        Some(self.stable.alpha())
    }
    fn self_similar(&self) -> bool {
        // a drift only translates p_u
        self.extra.jumps().is_empty() && self.a.iter().all(|v| *v == 0.0)
    }
}

/// JSON form of a triple: `alpha`, `atoms`, `a`, `b`, `extra`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripleConfig {
    pub alpha: f64,
    pub atoms: Vec<Atom>,
    #[serde(default)]
    pub a: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub b: Option<Vec<f64>>,
    #[serde(default)]
    pub extra: Vec<ExtraJump>,
}

impl TripleConfig {
    pub fn build(&self) -> Result<LevyTriple> {
        let mu = SpectralMeasure::new(self.atoms.clone())?;
        let d = mu.dim();
        let stable = StablePart::new(self.alpha, mu)?;
        let a = match &self.a {
            None => DMatrix::zeros(d, d),
            Some(rows) => {
                if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                    return Err(Error::InvalidTriple(format!("`a` must be {d}x{d}")));
                }
                DMatrix::from_fn(d, d, |i, j| rows[i][j])
            }
        };
        let b = self.b.clone().unwrap_or_else(|| vec![0.0; d]);
        LevyTriple::new(a, b, stable, FiniteJumpMeasure::new(self.extra.clone())?)
    }
}
