//! The time-space resolvent `R_λ g(t,x) = ∫₀^∞ e^{-λu} E[g(t+u, x+S_u)] du`,
//! its spatial gradient, measured Hölder moduli and the Komatsu integrals.
//!
//! On a lattice each Fourier mode evolves independently: with
//! `z = λ + ψ(v)`, the mode coefficient is `r(t) = ∫₀^∞ e^{-zu} ĝ(t+u) du`.
//! Space-time functions are piecewise linear in time, so the time integral
//! is done exactly segment by segment.

use crate::density::{invert, AutoLattice, Multiplier};
use crate::error::{Error, Result};
use crate::lattice::{Grid, Interp, LatticeField};
use crate::par;
use crate::quad::{composite_rule, integrate, integrate_left_singular};
use crate::symbol::{norm, Exponent};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use std::f64::consts::PI;

/// What a space-time function does after its last time node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extension {
    /// `g(t, ·) = 0` for `t > T`.
    Zero,
    /// `g(t, ·) = g(T, ·)` for `t > T`.
    Constant,
}

/// Lattice fields on a time grid, linear in time between nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeFunction {
    times: Vec<f64>,
    fields: Vec<LatticeField>,
    extension: Extension,
    sup: f64,
}

impl SpaceTimeFunction {
    pub fn new(times: Vec<f64>, fields: Vec<LatticeField>, extension: Extension) -> Result<Self> {
        if times.is_empty() || times.len() != fields.len() {
            return Err(Error::Shape(format!(
                "{} times for {} fields",
                times.len(),
                fields.len()
            )));
        }
        if times[0] < 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain(
                "time nodes must be non-negative and increasing".into(),
            ));
        }
        let grid = fields[0].grid;
        if fields.iter().any(|f| !f.grid.same_geometry(&grid)) {
            return Err(Error::Shape(
                "all time slices must share one lattice".into(),
            ));
        }
        let sup = fields
            .iter()
            .map(LatticeField::sup_norm)
            .fold(0.0, f64::max);
        Ok(Self {
            times,
            fields,
            extension,
            sup,
        })
    }

    /// A single field held for all times.
    pub fn frozen(field: LatticeField) -> Self {
        let sup = field.sup_norm();
        Self {
            times: vec![0.0],
            fields: vec![field],
            extension: Extension::Constant,
            sup,
        }
    }

    pub fn from_fn<F: Fn(f64, &[f64]) -> f64 + Sync + Send>(
        grid: Grid,
        times: Vec<f64>,
        extension: Extension,
        f: F,
    ) -> Result<Self> {
        let fields = times
            .iter()
            .map(|&t| LatticeField::from_fn(grid, |x| f(t, x)))
            .collect();
        Self::new(times, fields, extension)
    }

    pub fn grid(&self) -> Grid {
        self.fields[0].grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn fields(&self) -> &[LatticeField] {
        &self.fields
    }

    pub fn extension(&self) -> Extension {
        self.extension
    }

    /// `sup |g|` over all samples.
    pub fn sup_norm(&self) -> f64 {
        self.sup
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("non-empty")
    }

    /// The slice at time `t` (linear interpolation, extension beyond the end).
    pub fn at_time(&self, t: f64) -> LatticeField {
        let k = self.times.len();
        if t <= self.times[0] {
            return self.fields[0].clone();
        }
        if t >= self.times[k - 1] {
            return match self.extension {
                Extension::Constant => self.fields[k - 1].clone(),
                Extension::Zero if t == self.times[k - 1] => self.fields[k - 1].clone(),
                Extension::Zero => LatticeField::zeros(self.grid()),
            };
        }
        let j = self.times.partition_point(|&s| s <= t) - 1;
        let w = (t - self.times[j]) / (self.times[j + 1] - self.times[j]);
        let (a, b) = (&self.fields[j], &self.fields[j + 1]);
        LatticeField {
            grid: a.grid,
            values: a
                .values
                .iter()
                .zip(&b.values)
                .map(|(x, y)| (1.0 - w) * x + w * y)
                .collect(),
        }
    }

    pub fn eval(&self, t: f64, x: &[f64], rule: Interp) -> f64 {
        self.at_time(t).eval(x, rule)
    }

    /// `(∫ ‖g(t,·)‖_{L^p}^q dt)^{1/q}` by the trapezoid rule over the nodes.
    pub fn lq_lp_norm(&self, p: f64, q: f64) -> Result<f64> {
        if !(q >= 1.0) {
            return Err(Error::Domain(format!("q = {q} must be at least 1")));
        }
        let norms: Vec<f64> = self
            .fields
            .iter()
            .map(|f| f.lr_norm(p))
            .collect::<Result<_>>()?;
        if self.times.len() == 1 {
            return Ok(norms[0]);
        }
        let mut acc = 0.0;
        for j in 0..self.times.len() - 1 {
            let dt = self.times[j + 1] - self.times[j];
            acc += 0.5 * dt * (norms[j].powf(q) + norms[j + 1].powf(q));
        }
        Ok(acc.powf(1.0 / q))
    }

    pub fn map_fields<F: Fn(&LatticeField) -> LatticeField>(&self, f: F) -> Result<Self> {
        Self::new(
            self.times.clone(),
            self.fields.iter().map(f).collect(),
            self.extension,
        )
    }
}

/// `(1 - e^{-w}) / w` and `(1 - e^{-w}(1 + w)) / w²`, stable near `w = 0`.
fn phi_pair(w: Complex64) -> (Complex64, Complex64) {
    if w.norm() < 0.5 {
        let mut term = Complex64::new(1.0, 0.0);
        let mut p0 = Complex64::new(0.0, 0.0);
        let mut p1 = Complex64::new(0.0, 0.0);
        // term = (-w)^k / k!
        for k in 0..20 {
            let kf = k as f64;
            p0 += term / (kf + 1.0);
            p1 += term / ((kf + 1.0) * (kf + 2.0)) * (kf + 1.0);
            term *= -w / (kf + 1.0);
        }
        // p1 currently Σ (-w)^k / k! / (k+2) = Σ (-w)^k (k+1)/(k+2)!
        (p0, p1)
    } else {
        let e = (-w).exp();
        ((1.0 - e) / w, (1.0 - e * (1.0 + w)) / (w * w))
    }
}

/// `∫₀^Δ e^{-z s} (a + (b - a) s / Δ) ds`.
fn segment_integral(z: Complex64, dt: f64, a: Complex64, b: Complex64) -> Complex64 {
    let (p0, p1) = phi_pair(z * dt);
    a * dt * p0 + (b - a) * dt * p1
}

/// Spectra of `g` at its time nodes and the mode coefficients of `R_λ g` there.
type ModeSweep = (Vec<Vec<Complex64>>, Vec<Vec<Complex64>>);

/// Characteristic exponent tabulated on the frequency lattice; applies the
/// generator `L`, `R_λ` and their gradients spectrally.
pub struct SpectralGenerator {
    grid: Grid,
    psi: Vec<Complex64>,
}

impl SpectralGenerator {
    pub fn new<E: Exponent + ?Sized>(exponent: &E, grid: Grid) -> Result<Self> {
        if exponent.dim() != grid.dim {
            return Err(Error::Shape(format!(
                "exponent in dimension {} on a {}-d lattice",
                exponent.dim(),
                grid.dim
            )));
        }
        let psi = par::map_range(grid.len(), |i| exponent.eval(&grid.frequency(i)));
        Ok(Self { grid, psi })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn psi(&self) -> &[Complex64] {
        &self.psi
    }

    fn check(&self, g: &SpaceTimeFunction) -> Result<()> {
        if !g.grid().same_geometry(&self.grid) {
            return Err(Error::Shape(
                "function and generator lattices differ".into(),
            ));
        }
        Ok(())
    }

    /// `L f` for a lattice field (multiplier `-ψ`).
    pub fn apply_generator(&self, f: &LatticeField) -> LatticeField {
        let mut c = f.spectrum();
        par::for_each_mut(&mut c, |i, ci| *ci *= -self.psi[i]);
        LatticeField::from_spectrum(self.grid, c)
    }

    fn spectra(&self, g: &SpaceTimeFunction) -> Vec<Vec<Complex64>> {
        g.fields.iter().map(LatticeField::spectrum).collect()
    }

    /// Mode coefficients of `R_λ g` at every time node of `g`.
    fn node_coefficients(
        &self,
        lambda: f64,
        g: &SpaceTimeFunction,
        spectra: &[Vec<Complex64>],
    ) -> Vec<Vec<Complex64>> {
        let k = g.times.len();
        let n = self.grid.len();
        let mut out = vec![vec![Complex64::new(0.0, 0.0); n]; k];
        let last = &spectra[k - 1];
        let tail: Vec<Complex64> = match g.extension {
            Extension::Constant => (0..n).map(|i| last[i] / (lambda + self.psi[i])).collect(),
            Extension::Zero => vec![Complex64::new(0.0, 0.0); n],
        };
        out[k - 1] = tail;
        for j in (0..k - 1).rev() {
            let dt = g.times[j + 1] - g.times[j];
            let (head, rest) = out.split_at_mut(j + 1);
            let next = &rest[0];
            let cur = &mut head[j];
            let (a, b) = (&spectra[j], &spectra[j + 1]);
            par::for_each_mut(cur, |i, c| {
                let z = lambda + self.psi[i];
                *c = segment_integral(z, dt, a[i], b[i]) + (-z * dt).exp() * next[i];
            });
        }
        out
    }

    fn prepare(&self, lambda: f64, g: &SpaceTimeFunction) -> Result<ModeSweep> {
        self.check(g)?;
        if !(lambda > 0.0) {
            return Err(Error::Domain(format!("lambda = {lambda} must be positive")));
        }
        let spectra = self.spectra(g);
        let nodes = self.node_coefficients(lambda, g, &spectra);
        Ok((spectra, nodes))
    }

    /// Mode coefficients of `R_λ g` at an arbitrary time `t ≥ t₀`, from the
    /// spectra of `g` and the node coefficients.
    fn coefficients_between(
        &self,
        lambda: f64,
        g: &SpaceTimeFunction,
        spectra: &[Vec<Complex64>],
        nodes: &[Vec<Complex64>],
        t: f64,
    ) -> Result<Vec<Complex64>> {
        if t < g.times[0] {
            return Err(Error::Domain(format!(
                "t = {t} precedes the first time node {}",
                g.times[0]
            )));
        }
        let k = g.times.len();
        if t >= g.times[k - 1] {
            if g.extension == Extension::Zero && t > g.times[k - 1] {
                return Ok(vec![Complex64::new(0.0, 0.0); self.grid.len()]);
            }
            return Ok(nodes[k - 1].clone());
        }
        let j = g.times.partition_point(|&s| s <= t) - 1;
        let (t0, t1) = (g.times[j], g.times[j + 1]);
        let w = (t - t0) / (t1 - t0);
        let dt = t1 - t;
        let (a, b) = (&spectra[j], &spectra[j + 1]);
        Ok(par::map_range(self.grid.len(), |i| {
            let z = lambda + self.psi[i];
            let gt = a[i] * (1.0 - w) + b[i] * w;
            segment_integral(z, dt, gt, b[i]) + (-z * dt).exp() * nodes[j + 1][i]
        }))
    }

    fn coefficients_at(
        &self,
        lambda: f64,
        g: &SpaceTimeFunction,
        t: f64,
    ) -> Result<Vec<Complex64>> {
        let (spectra, nodes) = self.prepare(lambda, g)?;
        self.coefficients_between(lambda, g, &spectra, &nodes, t)
    }

    /// `R_λ g(t, ·)` for every `t` in `times`, sharing one backward sweep.
    pub fn apply_r_many(
        &self,
        lambda: f64,
        g: &SpaceTimeFunction,
        times: &[f64],
    ) -> Result<Vec<LatticeField>> {
        let (spectra, nodes) = self.prepare(lambda, g)?;
        times
            .iter()
            .map(|&t| {
                self.coefficients_between(lambda, g, &spectra, &nodes, t)
                    .map(|c| LatticeField::from_spectrum(self.grid, c))
            })
            .collect()
    }

    /// `x ↦ R_λ g(t, x)`.
    pub fn apply_r(&self, lambda: f64, g: &SpaceTimeFunction, t: f64) -> Result<LatticeField> {
        Ok(LatticeField::from_spectrum(
            self.grid,
            self.coefficients_at(lambda, g, t)?,
        ))
    }

    /// `x ↦ ∂_i R_λ g(t, x)`.
    pub fn apply_grad_r(
        &self,
        lambda: f64,
        g: &SpaceTimeFunction,
        t: f64,
        axis: usize,
    ) -> Result<LatticeField> {
        if axis >= self.grid.dim {
            return Err(Error::Domain(format!("axis {axis} out of range")));
        }
        let mut c = self.coefficients_at(lambda, g, t)?;
        let grid = self.grid;
        par::for_each_mut(&mut c, |i, ci| {
            *ci = if grid.is_nyquist(i) {
                Complex64::new(0.0, 0.0)
            } else {
                *ci * Complex64::new(0.0, grid.frequency(i)[axis])
            };
        });
        Ok(LatticeField::from_spectrum(grid, c))
    }

    /// `R_λ g` on the whole time grid of `g`, with `g`'s extension mode.
    pub fn resolve(&self, lambda: f64, g: &SpaceTimeFunction) -> Result<SpaceTimeFunction> {
        let (_, nodes) = self.prepare(lambda, g)?;
        let fields = nodes
            .into_iter()
            .map(|c| LatticeField::from_spectrum(self.grid, c))
            .collect();
        SpaceTimeFunction::new(g.times.clone(), fields, g.extension)
    }

    /// `R_λ g` together with `∂_i R_λ g` for every axis, on `g`'s time grid.
    pub fn resolve_with_gradient(
        &self,
        lambda: f64,
        g: &SpaceTimeFunction,
    ) -> Result<(SpaceTimeFunction, Vec<SpaceTimeFunction>)> {
        let r = self.resolve(lambda, g)?;
        let grads = (0..self.grid.dim)
            .map(|a| r.map_fields(|f| f.gradient(a)))
            .collect::<Result<Vec<_>>>()?;
        Ok((r, grads))
    }

    /// Sup over interior time midpoints of
    /// `|λ R_λg - ∂_t R_λg - L R_λg - g|`, with `∂_t` by a fourth-order
    /// central difference of step `dt`.
    pub fn identity_residual(&self, lambda: f64, g: &SpaceTimeFunction, dt: f64) -> Result<f64> {
        let stencils = residual_stencils(g, dt);
        let times: Vec<f64> = stencils.iter().flat_map(|s| s.times()).collect();
        let values = self.apply_r_many(lambda, g, &times)?;
        let mut worst: f64 = 0.0;
        for (st, r) in stencils.iter().zip(values.chunks(5)) {
            let lr = self.apply_generator(&r[2]);
            let gt = g.at_time(st.t);
            for i in 0..self.grid.len() {
                let res =
                    lambda * r[2].values[i] - st.derivative(r, i) - lr.values[i] - gt.values[i];
                worst = worst.max(res.abs());
            }
        }
        Ok(worst)
    }
}

/// A five-point central-difference stencil at `t` with step `half`.
#[derive(Debug, Clone, Copy)]
pub struct Stencil {
    pub t: f64,
    pub half: f64,
}

impl Stencil {
    /// `t - 2h, t - h, t, t + h, t + 2h`.
    pub fn times(&self) -> [f64; 5] {
        let (t, h) = (self.t, self.half);
        [t - 2.0 * h, t - h, t, t + h, t + 2.0 * h]
    }

    /// Fourth-order `∂_t` at node `i` from the five fields at `times()`.
    pub fn derivative(&self, f: &[LatticeField], i: usize) -> f64 {
        (f[0].values[i] - 8.0 * f[1].values[i] + 8.0 * f[3].values[i] - f[4].values[i])
            / (12.0 * self.half)
    }
}

/// Stencils at the midpoints of `g`'s time cells (one point past a single
/// node), kept inside the time domain.
pub fn residual_stencils(g: &SpaceTimeFunction, dt: f64) -> Vec<Stencil> {
    if g.times.len() == 1 {
        return vec![Stencil {
            t: g.times[0] + 1.0,
            half: dt,
        }];
    }
    g.times
        .windows(2)
        .map(|w| {
            let t = 0.5 * (w[0] + w[1]);
            Stencil {
                t,
                half: dt.min(0.25 * (t - g.times[0]).max(1e-300)),
            }
        })
        .collect()
}

/// Fixed nodes in `log u` for Laplace integrals `∫₀^∞ e^{-λu} F(u) du`
/// shared by every `λ`; the piece below the first node is closed with a
/// local power-law fit of `F`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplaceRule {
    pub log_u_min: f64,
    pub log_u_max: f64,
    pub panel: f64,
    pub order: usize,
}

impl Default for LaplaceRule {
    fn default() -> Self {
        Self {
            log_u_min: -16.0,
            log_u_max: 3.5,
            panel: 0.5,
            order: 8,
        }
    }
}

#[derive(Debug, Clone)]
struct LaplaceSamples {
    u: Vec<f64>,
    w: Vec<f64>,
    values: Vec<f64>,
    /// `(u, F(u))` at `u_min` and `e·u_min` for the power-law closure.
    head: [(f64, f64); 2],
}

impl LaplaceRule {
    fn sample<F: Fn(f64) -> Result<f64> + Sync>(&self, f: F) -> Result<LaplaceSamples> {
        let panels = ((self.log_u_max - self.log_u_min) / self.panel).ceil() as usize;
        let breaks: Vec<f64> = (0..=panels)
            .map(|k| self.log_u_min + k as f64 * self.panel)
            .collect();
        let (nodes, weights) = composite_rule(&breaks, self.order);
        let u: Vec<f64> = nodes.iter().map(|t| t.exp()).collect();
        let w: Vec<f64> = weights.iter().zip(&u).map(|(w, u)| w * u).collect();
        let values = par::map_slice(&u, |&x| f(x))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let u0 = self.log_u_min.exp();
        let u1 = u0 * std::f64::consts::E;
        let head = [(u0, f(u0)?), (u1, f(u1)?)];
        Ok(LaplaceSamples { u, w, values, head })
    }
}

impl LaplaceSamples {
    fn integrate(&self, lambda: f64) -> Result<f64> {
        let body: f64 = self
            .u
            .iter()
            .zip(&self.w)
            .zip(&self.values)
            .map(|((u, w), v)| w * (-lambda * u).exp() * v)
            .sum();
        let [(u0, f0), (u1, f1)] = self.head;
        let head = if f0 == 0.0 {
            0.0
        } else {
            // F ≈ f0 (u/u0)^{-κ} on (0, u0]
            let kappa = -(f1 / f0).ln() / (u1 / u0).ln();
            if !(kappa < 1.0) {
                return Err(Error::Quadrature(format!(
                    "integrand grows like u^-{kappa:.3} at 0"
                )));
            }
            f0 * u0 / (1.0 - kappa.max(0.0))
        };
        Ok(body + head)
    }
}

/// Measured moduli of `R_λ` (or of `∂_1 R_λ`) over all bounded `g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderModulus {
    pub lambda: f64,
    pub delta: f64,
    pub gradient: bool,
    /// `sup_z ∫ e^{-λu} ‖q_u(·+z) - q_u‖₁ du / |z|^δ` with `q = p` or `∂_1 p`.
    pub difference: f64,
    pub argmax_z: f64,
    /// The maximising shift is the largest or smallest probe shift, so the
    /// supremum may lie outside the probed range.
    pub at_edge: bool,
    /// `∫ e^{-λu} ‖|∂|^δ q_u‖₁ du`.
    pub fractional: f64,
    /// Evaluations where the lattice could not hold the shift and the
    /// difference norm was replaced by its upper bound `2‖q_u‖₁`.
    pub saturated: usize,
}

/// Settings for the moduli measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusProbe {
    pub lattice: AutoLattice,
    /// Shift magnitudes (along `direction`).
    pub z: Vec<f64>,
    pub direction: Vec<f64>,
    pub rule: LaplaceRule,
    /// Lattice size for the shift-difference table of self-similar kernels.
    pub table_n: usize,
    pub table_points: usize,
    pub max_points: usize,
}

impl ModulusProbe {
    pub fn new(dim: usize) -> Self {
        let mut direction = vec![0.0; dim];
        direction[0] = 1.0;
        let z = (0..=24)
            .map(|k| 10f64.powf(-3.0 + k as f64 / 4.0))
            .collect();
        Self {
            lattice: AutoLattice::new(dim, 2048).with_boundary_tol(1e-5),
            z,
            direction,
            rule: LaplaceRule::default(),
            table_n: if dim == 1 { 1 << 16 } else { 512 },
            table_points: 241,
            max_points: 1 << 20,
        }
    }

    fn shift(&self, zmag: f64) -> [f64; 3] {
        let mut z = [0.0; 3];
        let n = norm(&self.direction);
        for (k, c) in self.direction.iter().enumerate() {
            z[k] = zmag * c / n;
        }
        z
    }
}

fn l1_norm<E: Exponent + ?Sized>(
    exponent: &E,
    u: f64,
    mult: Multiplier,
    lattice: &AutoLattice,
) -> Result<f64> {
    let spec = lattice.spec_for(exponent, u, mult)?;
    invert(exponent, u, mult, &spec)?.field.lr_norm(1.0)
}

/// `w ↦ ‖q₁(·+w e) - q₁‖₁` tabulated on a log grid for self-similar kernels.
struct DifferenceTable {
    log_w: Vec<f64>,
    log_d: Vec<f64>,
    saturation: f64,
}

impl DifferenceTable {
    fn build<E: Exponent + ?Sized>(
        exponent: &E,
        gradient: bool,
        probe: &ModulusProbe,
    ) -> Result<Self> {
        let base = if gradient {
            Multiplier::Gradient(0)
        } else {
            Multiplier::Identity
        };
        let mut spec = probe.lattice.spec_for(exponent, 1.0, base)?;
        let h = spec.grid.spacing();
        spec.grid = Grid::new(spec.grid.dim, probe.table_n, 0.5 * probe.table_n as f64 * h)?;
        spec = spec.fixed_extent().with_boundary_tol(1e-3);
        let w_hi = spec.grid.half_extent / 4.0;
        let w_lo = h * 1e-3;
        let saturation = 2.0 * invert(exponent, 1.0, base, &spec)?.field.lr_norm(1.0)?;
        let m = probe.table_points;
        let log_w: Vec<f64> = (0..m)
            .map(|k| w_lo.ln() + (w_hi / w_lo).ln() * k as f64 / (m - 1) as f64)
            .collect();
        let log_d = par::map_slice(&log_w, |lw| {
            let z = probe.shift(lw.exp());
            let mult = if gradient {
                Multiplier::GradientDifference(z, 0)
            } else {
                Multiplier::Difference(z)
            };
            invert(exponent, 1.0, mult, &spec)
                .and_then(|f| f.field.lr_norm(1.0))
                .map(f64::ln)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            log_w,
            log_d,
            saturation,
        })
    }

    /// Value at `w`, with the linear law below the table and the bound
    /// `2‖q₁‖₁` above it (flagged).
    fn eval(&self, w: f64) -> (f64, bool) {
        let lw = w.ln();
        let m = self.log_w.len();
        if lw <= self.log_w[0] {
            return ((self.log_d[0] + lw - self.log_w[0]).exp(), false);
        }
        if lw >= self.log_w[m - 1] {
            return (self.saturation, true);
        }
        let step = self.log_w[1] - self.log_w[0];
        let s = (lw - self.log_w[0]) / step;
        let j = (s.floor() as usize).clamp(1, m - 3);
        let t = s - j as f64;
        let y = [
            self.log_d[j - 1],
            self.log_d[j],
            self.log_d[j + 1],
            self.log_d[j + 2],
        ];
        let v = -t * (t - 1.0) * (t - 2.0) / 6.0 * y[0]
            + (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0 * y[1]
            - (t + 1.0) * t * (t - 2.0) / 2.0 * y[2]
            + (t + 1.0) * t * (t - 1.0) / 6.0 * y[3];
        (v.exp().min(self.saturation), false)
    }
}

/// Measures the Hölder and fractional moduli of `R_λ` (or `∂_1 R_λ` when
/// `gradient`) for every `λ`, maximising the difference quotient over the
/// probe shifts.
pub fn holder_moduli<E: Exponent + ?Sized>(
    exponent: &E,
    lambdas: &[f64],
    delta: f64,
    gradient: bool,
    probe: &ModulusProbe,
) -> Result<Vec<HolderModulus>> {
    if lambdas.iter().any(|l| !(*l > 0.0)) {
        return Err(Error::Domain("every lambda must be positive".into()));
    }
    let curve = HolderCurve::measure(exponent, delta, gradient, probe)?;
    lambdas.iter().map(|&l| curve.at(l)).collect()
}

/// Laplace-domain samples from which the moduli of `R_λ` follow for any `λ`.
#[derive(Debug, Clone)]
pub struct HolderCurve {
    delta: f64,
    gradient: bool,
    z: Vec<f64>,
    differences: Vec<LaplaceSamples>,
    fractional: LaplaceSamples,
    saturated: usize,
}

impl HolderCurve {
    pub fn measure<E: Exponent + ?Sized>(
        exponent: &E,
        delta: f64,
        gradient: bool,
        probe: &ModulusProbe,
    ) -> Result<Self> {
        let alpha = exponent
            .alpha()
            .ok_or_else(|| Error::Domain("moduli need a stable index".into()))?;
        if gradient {
            if !(alpha > 1.0 && delta > 0.0 && delta < alpha - 1.0) {
                return Err(Error::Domain(format!(
                "gradient modulus needs 1 < alpha and 0 < delta < alpha - 1 (alpha {alpha}, delta {delta})"
            )));
            }
        } else if !(delta > 0.0 && delta < alpha.min(1.0)) {
            return Err(Error::Domain(format!(
                "delta = {delta} must lie in (0, alpha ∧ 1)"
            )));
        }
        let base = if gradient {
            Multiplier::Gradient(0)
        } else {
            Multiplier::Identity
        };
        let frac_mult = if gradient {
            Multiplier::FractionalGradient(delta, 0)
        } else {
            Multiplier::Fractional(delta)
        };
        let fractional = probe
            .rule
            .sample(|u| l1_norm(exponent, u, frac_mult, &probe.lattice))?;

        let saturated = std::sync::atomic::AtomicUsize::new(0);
        let count = |hit: bool| {
            if hit {
                saturated.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
            }
        };
        let differences: Vec<LaplaceSamples> = if exponent.self_similar() {
            let table = DifferenceTable::build(exponent, gradient, probe)?;
            probe
                .z
                .iter()
                .map(|&zmag| {
                    probe.rule.sample(|u| {
                        let scale = u.powf(-1.0 / alpha);
                        let (v, hit) = table.eval(zmag * scale);
                        count(hit);
                        Ok(if gradient { scale * v } else { v })
                    })
                })
                .collect::<Result<_>>()?
        } else {
            probe
                .z
                .iter()
                .map(|&zmag| {
                    let mult = if gradient {
                        Multiplier::GradientDifference(probe.shift(zmag), 0)
                    } else {
                        Multiplier::Difference(probe.shift(zmag))
                    };
                    probe.rule.sample(|u| {
                        let mut spec = probe.lattice.spec_for(exponent, u, mult)?;
                        spec.max_points = probe.max_points;
                        let mut fits = true;
                        while spec.grid.half_extent < 4.0 * zmag {
                            if spec.grid.len() << spec.grid.dim > probe.max_points {
                                fits = false;
                                break;
                            }
                            spec.grid = Grid::new(
                                spec.grid.dim,
                                spec.grid.n * 2,
                                spec.grid.half_extent * 2.0,
                            )?;
                        }
                        let direct = if fits {
                            match invert(exponent, u, mult, &spec) {
                                Ok(f) => Some(f.field.lr_norm(1.0)?),
                                Err(Error::Extent { .. }) => None,
                                Err(e) => return Err(e),
                            }
                        } else {
                            None
                        };
                        match direct {
                            Some(v) => Ok(v),
                            None => {
                                count(true);
                                Ok(2.0 * l1_norm(exponent, u, base, &probe.lattice)?)
                            }
                        }
                    })
                })
                .collect::<Result<_>>()?
        };
        let saturated = saturated.into_inner();

        Ok(Self {
            delta,
            gradient,
            z: probe.z.clone(),
            differences,
            fractional,
            saturated,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn gradient(&self) -> bool {
        self.gradient
    }

    /// Moduli at `λ`.
    pub fn at(&self, lambda: f64) -> Result<HolderModulus> {
        if !(lambda > 0.0) {
            return Err(Error::Domain(format!("lambda = {lambda} must be positive")));
        }
        let mut best = (0.0, 0);
        for (k, (zmag, samples)) in self.z.iter().zip(&self.differences).enumerate() {
            let ratio = samples.integrate(lambda)? / zmag.powf(self.delta);
            if ratio > best.0 {
                best = (ratio, k);
            }
        }
        let (best, k) = best;
        let best = (best, self.z[k]);
        let at_edge = k == 0 || k + 1 == self.z.len();
        Ok(HolderModulus {
            lambda,
            delta: self.delta,
            gradient: self.gradient,
            difference: best.0,
            argmax_z: best.1,
            at_edge,
            fractional: self.fractional.integrate(lambda)?,
            saturated: self.saturated,
        })
    }
}

/// `c₄ Γ(1 - δ/α) λ^{δ/α - 1}`: the closed form of `c₄ ∫ e^{-λu} u^{-δ/α} du`.
pub fn gamma_ceiling(c4: f64, delta: f64, alpha: f64, lambda: f64) -> f64 {
    c4 * gamma(1.0 - delta / alpha) * lambda.powf(delta / alpha - 1.0)
}

/// Gradient analogue: `c₅ Γ(1 - (δ+1)/α) λ^{(δ+1)/α - 1}`.
pub fn gradient_gamma_ceiling(c5: f64, delta: f64, alpha: f64, lambda: f64) -> f64 {
    gamma_ceiling(c5, delta + 1.0, alpha, lambda)
}

/// Riesz-potential constant `Γ((d-δ)/2) / (2^δ π^{d/2} Γ(δ/2))`: the size of
/// the factor in `f(x+z) - f(x) = c ∫ (|w+z|^{δ-d} - |w|^{δ-d}) |∂|^δ f(x-w) dw`.
pub fn riesz_constant(delta: f64, dim: usize) -> f64 {
    let d = dim as f64;
    gamma((d - delta) / 2.0) / (2f64.powf(delta) * PI.powf(d / 2.0) * gamma(delta / 2.0))
}

/// `∫_{ℝ^d} | |w+z|^{δ-d} - |w|^{δ-d} | dw` by singularity-split quadrature.
pub fn komatsu_integral(delta: f64, dim: usize, z: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!("delta = {delta} must lie in (0, 1)")));
    }
    if z == 0.0 {
        return Err(Error::Domain("z must be non-zero".into()));
    }
    let a = z.abs();
    let e = delta - dim as f64;
    let tol = 1e-10;
    // the integrand decays like w^{δ-2} (radial weight included), so
    // w = a s^{-m} with m = 1/(1-δ) makes the tail integrand bounded
    let m = 1.0 / (1.0 - delta);
    let tail_of = |f: &dyn Fn(f64) -> f64| {
        integrate(
            |s: f64| {
                if s <= 0.0 {
                    0.0
                } else {
                    f(a * s.powf(-m)) * a * m * s.powf(-m - 1.0)
                }
            },
            0.0,
            1.0,
            tol,
            tol,
        )
    };
    match dim {
        1 => {
            // symmetric under w ↦ -z - w; integrate w > -a/2 and double
            // |w|^e |(1 + a/w)^e - 1|, computed without cancellation
            let f = |w: f64| {
                if w > 0.0 {
                    w.powf(e) * (e * (a / w).ln_1p()).exp_m1().abs()
                } else {
                    ((w + a).abs().powf(e) - w.abs().powf(e)).abs()
                }
            };
            let p = 1.0 / delta;
            let left = integrate_left_singular(|s| f(-s), 0.0, 0.5 * a, p, tol, tol)?.value;
            let right = integrate_left_singular(f, 0.0, a, p, tol, tol)?.value;
            let tail = tail_of(&f)?.value;
            Ok(2.0 * (left + right + tail))
        }
        2 => {
            // half-plane w₁ > -a/2 in polar coordinates around the origin,
            // doubled by symmetry in w₂ and by the reflection w ↦ -z - w
            let radial = |theta: f64| -> f64 {
                let c = theta.cos();
                let f = |r: f64| {
                    // |w+z|²/|w|² = 1 + (2 r c a + a²)/r²
                    let rel = (2.0 * r * c * a + a * a) / (r * r);
                    r * r.powf(e) * (0.5 * e * rel.ln_1p()).exp_m1().abs()
                };
                let p = 1.0 / delta;
                if c < 0.0 {
                    let rmax = 0.5 * a / (-c);
                    integrate_left_singular(f, 0.0, rmax, p, tol, tol)
                        .map(|q| q.value)
                        .unwrap_or(f64::NAN)
                } else {
                    let near = integrate_left_singular(f, 0.0, a, p, tol, tol)
                        .map(|q| q.value)
                        .unwrap_or(f64::NAN);
                    let far = tail_of(&f).map(|q| q.value).unwrap_or(f64::NAN);
                    near + far
                }
            };
            let half = PI / 2.0;
            let q1 = integrate(radial, 0.0, half, 1e-9, 1e-9)?.value;
            let q2 = integrate(radial, half, PI, 1e-9, 1e-9)?.value;
            let v = 4.0 * (q1 + q2);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Quadrature("radial Komatsu integral failed".into()))
            }
        }
        _ => Err(Error::Domain(format!(
            "Komatsu quadrature supports d in {{1, 2}}, got {dim}"
        ))),
    }
}

/// `c₆(z) = integral / |z|^δ` for every `z`.
pub fn komatsu_check(delta: f64, dim: usize, z_list: &[f64]) -> Result<Vec<f64>> {
    z_list
        .iter()
        .map(|&z| Ok(komatsu_integral(delta, dim, z)? / z.abs().powf(delta)))
        .collect()
}

/// `(c ∫ e^{-q*λu} u^{q* e} du)^{1/q*}`-type constants, returned as
/// `c (Γ(1 + q* e) (q* λ)^{-(1 + q* e)})^{1/q*}` where `e` is the decay
/// exponent of the relevant `L^{p*}` norm; errors when the integral diverges.
pub fn lq_lp_constant(c: f64, lambda: f64, q: f64, decay: f64) -> Result<f64> {
    let qs = conjugate(q)?;
    let power = qs * decay;
    if !(power > -1.0) {
        return Err(Error::Inadmissible(format!(
            "u^{power:.4} is not integrable at 0"
        )));
    }
    Ok(c * (gamma(1.0 + power) * (qs * lambda).powf(-(1.0 + power))).powf(1.0 / qs))
}

/// Hölder conjugate exponent.
pub fn conjugate(p: f64) -> Result<f64> {
    if !(p > 1.0) {
        return Err(Error::Domain(format!("exponent {p} must exceed 1")));
    }
    Ok(if p.is_infinite() { 1.0 } else { p / (p - 1.0) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol::{SpectralMeasure, StablePart};
    use approx::assert_abs_diff_eq;

    fn stable(alpha: f64) -> StablePart {
        StablePart::new(
            alpha,
            SpectralMeasure::symmetric(&[vec![1.0]], 1.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn phi_series_matches_closed_form() {
        for w in [Complex64::new(0.49, 0.1), Complex64::new(-0.3, 0.2)] {
            let (a, b) = phi_pair(w);
            let e = (-w).exp();
            assert_abs_diff_eq!((a - (1.0 - e) / w).norm(), 0.0, epsilon = 1e-14);
            assert_abs_diff_eq!(
                (b - (1.0 - e * (1.0 + w)) / (w * w)).norm(),
                0.0,
                epsilon = 1e-13
            );
        }
    }

    #[test]
    fn constant_input_gives_inverse_lambda() {
        let grid = Grid::new(1, 256, 20.0).unwrap();
        let gen = SpectralGenerator::new(&stable(1.5), grid).unwrap();
        let g = SpaceTimeFunction::frozen(LatticeField::from_fn(grid, |_| 1.0));
        let r = gen.apply_r(3.0, &g, 0.5).unwrap();
        for v in &r.values {
            assert_abs_diff_eq!(*v, 1.0 / 3.0, epsilon = 1e-14);
        }
        let dr = gen.apply_grad_r(3.0, &g, 0.0, 0).unwrap();
        assert!(dr.sup_norm() < 1e-14);
    }

    #[test]
    fn exponential_time_profile() {
        let grid = Grid::new(1, 64, 10.0).unwrap();
        let gen = SpectralGenerator::new(&stable(1.2), grid).unwrap();
        let kappa = 0.7;
        let times: Vec<f64> = (0..=4000).map(|k| k as f64 * 0.01).collect();
        let g = SpaceTimeFunction::from_fn(grid, times, Extension::Zero, |t, _| (-kappa * t).exp())
            .unwrap();
        let lambda = 2.0;
        let r = gen.apply_r(lambda, &g, 1.0).unwrap();
        let exact = (-kappa * 1.0f64).exp() / (lambda + kappa);
        // piecewise-linear time interpolation and the horizon cost ~1e-6
        assert_abs_diff_eq!(r.values[10], exact, epsilon = 1e-5);
    }

    #[test]
    fn single_mode_gradient_oracle() {
        let grid = Grid::new(1, 64, PI).unwrap();
        let s = stable(1.5);
        let gen = SpectralGenerator::new(&s, grid).unwrap();
        let g = SpaceTimeFunction::frozen(LatticeField::from_fn(grid, |x| x[0].sin()));
        let lambda = 2.0;
        let dr = gen.apply_grad_r(lambda, &g, 0.0, 0).unwrap();
        let z = lambda + s.exponent(&[1.0]);
        for i in 0..64 {
            let x = grid.node(i);
            // sin x = Im e^{ix}; R multiplies e^{ix} by 1/z, ∂ by i
            let want = (Complex64::new(0.0, 1.0) * Complex64::from_polar(1.0, x) / z).im;
            assert_abs_diff_eq!(dr.values[i], want, epsilon = 1e-13);
        }
    }

    #[test]
    fn komatsu_constant_d1() {
        let c = komatsu_check(0.5, 1, &[0.5, 1.0, 2.0]).unwrap();
        for v in &c {
            assert_abs_diff_eq!(*v, 4.0 * 2f64.sqrt(), epsilon = 1e-6);
        }
    }

    #[test]
    fn gamma_ceiling_matches_quadrature() {
        let (c4, delta, alpha, lambda) = (1.3, 0.4, 1.2, 5.0);
        let q = integrate_left_singular(
            |u| (-lambda * u).exp() * u.powf(-delta / alpha),
            0.0,
            20.0,
            3.0,
            1e-12,
            1e-12,
        )
        .unwrap()
        .value;
        assert_abs_diff_eq!(
            gamma_ceiling(c4, delta, alpha, lambda),
            c4 * q,
            epsilon = 1e-9
        );
    }
}
