//! Monte Carlo for the process with generator `L + K^δ_n`: Gaussian part,
//! drift, stable part (exact per-ray Chambers–Mallows–Stuck draws or
//! compound Poisson above `ε`), extra finite jumps, and state-dependent
//! jumps by thinning. Each path owns a ChaCha stream keyed by
//! `(seed, path index)`, so ensembles are reproducible in any order.

use crate::error::{Error, Result};
use crate::kernel::JumpKernelModel;
use crate::lattice::{Interp, LatticeField};
use crate::perturb::NeumannSeries;
use crate::quad::integrate;
use crate::resolvent::{Extension, SpaceTimeFunction};
use crate::stats::mean_stderr;
use crate::symbol::{dot, norm, LevyTriple, StablePart, C1};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

/// How the stable part is advanced over one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StableScheme {
    /// Exact increments, one totally skewed stable draw per spectral atom.
    Exact,
    /// Jumps above `eps` as compound Poisson with analytic compensation;
    /// optionally the variance of the dropped jumps as a Gaussian.
    CompoundPoisson { eps: f64, gaussian_correction: bool },
}

impl StableScheme {
    /// Compound Poisson with `ε^{2-α} = Δt`.
    pub fn compound_poisson_for(alpha: f64, dt: f64, gaussian_correction: bool) -> Self {
        Self::CompoundPoisson {
            eps: dt.powf(1.0 / (2.0 - alpha)).min(1.0),
            gaussian_correction,
        }
    }
}

/// The Lévy part driving the sampler. Unlike [`LevyTriple`], the stable part
/// may be absent, which is only meaningful for calibration runs.
#[derive(Debug, Clone)]
pub struct SamplerModel {
    pub a: DMatrix<f64>,
    pub b: Vec<f64>,
    pub stable: Option<StablePart>,
    pub extra: Vec<(Vec<f64>, f64)>,
}

impl SamplerModel {
    pub fn from_triple(t: &LevyTriple) -> Self {
        Self {
            a: t.diffusion().clone(),
            b: t.drift().to_vec(),
            stable: Some(t.stable().clone()),
            extra: t
                .extra()
                .jumps()
                .iter()
                .map(|j| (j.y.clone(), j.rate))
                .collect(),
        }
    }

    pub fn gaussian(a: DMatrix<f64>, b: Vec<f64>) -> Self {
        Self {
            a,
            b,
            stable: None,
            extra: Vec::new(),
        }
    }

    pub fn dead(dim: usize) -> Self {
        Self::gaussian(DMatrix::zeros(dim, dim), vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JumpSource {
    StableRay,
    Extra,
    StateKernel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpRecord {
    pub time: f64,
    pub size: Vec<f64>,
    pub source: JumpSource,
}

/// One simulated path on the step grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub s: f64,
    pub x: Vec<f64>,
    pub dt: f64,
    pub states: Vec<Vec<f64>>,
    pub jumps: Vec<JumpRecord>,
    pub seed: u64,
    pub path: u64,
}

/// Sampling data for the state-dependent kernel `M^δ_n`.
#[derive(Debug, Clone)]
struct StateJumps {
    model: JumpKernelModel,
    alpha: f64,
    /// `∫ χ_δ(r) r^{-1-β'} dr`.
    radial_mass: f64,
    angular_mass: f64,
    pi_mass: f64,
    rate_max: f64,
    /// Compensator `c_δ(x) = κ(x) small_drift + η(x) near_drift` (zero for α ≤ 1).
    small_drift: Vec<f64>,
    near_drift: Vec<f64>,
    /// Inverse-CDF table of the radial law.
    radii: Vec<f64>,
    cdf: Vec<f64>,
    ray_cum: Vec<f64>,
    pi_cum: Vec<f64>,
}

impl StateJumps {
    fn new(model: JumpKernelModel, alpha: f64) -> Result<Self> {
        model.check_against(alpha)?;
        let cutoff = model.cutoff.ok_or_else(|| {
            Error::InvalidKernel("the sampler needs a kernel with an inner cutoff".into())
        })?;
        let bp = model.small.beta_prime;
        let lo = 0.5 * cutoff.delta;
        let m = 4096;
        let radii: Vec<f64> = (0..=m)
            .map(|k| lo * (1.0 / lo).powf(k as f64 / m as f64))
            .collect();
        let mut cdf = vec![0.0; m + 1];
        for k in 0..m {
            let piece = integrate(
                |r| cutoff.eval(r) * r.powf(-1.0 - bp),
                radii[k],
                radii[k + 1],
                1e-15,
                1e-12,
            )?
            .value;
            cdf[k + 1] = cdf[k] + piece;
        }
        let radial_mass = cdf[m];
        let angular_mass = model.small.angular_mass();
        let pi_mass: f64 = model.pi.iter().map(|a| a.mass).sum();
        let cum = |w: &mut dyn Iterator<Item = f64>| {
            let mut acc = 0.0;
            w.map(|v| {
                acc += v;
                acc
            })
            .collect::<Vec<_>>()
        };
        let ray_cum = cum(&mut model.small.rays.iter().map(|r| r.weight));
        let pi_cum = cum(&mut model.pi.iter().map(|a| a.mass));
        let rate_max =
            model.kappa.sup_bound() * angular_mass * radial_mass + model.eta.sup_bound() * pi_mass;
        // the compensator is affine in (κ(x), η(x)); evaluate its two parts once
        let (mut small_drift, mut near_drift) = (vec![0.0; model.dim], vec![0.0; model.dim]);
        if alpha > 1.0 {
            let unit = JumpKernelModel {
                kappa: crate::kernel::Modulator::constant(1.0),
                eta: crate::kernel::Modulator::zero(),
                ..model.clone()
            };
            small_drift = unit.compensator(alpha, &vec![0.0; model.dim])?;
            for a in model.pi.iter().filter(|a| norm(&a.y) <= 1.0) {
                for (o, yi) in near_drift.iter_mut().zip(&a.y) {
                    *o += a.mass * yi;
                }
            }
        }
        Ok(Self {
            model,
            alpha,
            radial_mass,
            angular_mass,
            pi_mass,
            rate_max,
            small_drift,
            near_drift,
            radii,
            cdf,
            ray_cum,
            pi_cum,
        })
    }

    fn small_rate(&self, x: &[f64]) -> f64 {
        if self.model.small.rays.is_empty() {
            0.0
        } else {
            self.model.kappa.eval(x) * self.angular_mass * self.radial_mass
        }
    }

    fn big_rate(&self, x: &[f64]) -> f64 {
        self.model.eta.eval(x) * self.pi_mass
    }

    fn radius(&self, u: f64) -> f64 {
        let target = u * self.radial_mass;
        let k = self
            .cdf
            .partition_point(|c| *c < target)
            .clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[k - 1], self.cdf[k]);
        let t = if c1 > c0 {
            (target - c0) / (c1 - c0)
        } else {
            0.5
        };
        self.radii[k - 1] + t * (self.radii[k] - self.radii[k - 1])
    }

    fn pick(cum: &[f64], u: f64) -> usize {
        let total = *cum.last().expect("non-empty");
        cum.partition_point(|c| *c < u * total).min(cum.len() - 1)
    }
}

/// Per-atom constants of the stable increment.
#[derive(Debug, Clone)]
struct RayStep {
    direction: Vec<f64>,
    /// Exact: `(c^{1/α} σ_α, shift)`; compound Poisson: `(rate·dt, drift)`.
    scale: f64,
    shift: f64,
    poisson: Option<Poisson<f64>>,
}

/// Simulates paths of the approximating process.
#[derive(Debug, Clone)]
pub struct Sampler {
    model: SamplerModel,
    state: Option<StateJumps>,
    dt: f64,
    scheme: StableScheme,
    seed: u64,
    sqrt_cov: DMatrix<f64>,
    gaussian: bool,
    rays: Vec<RayStep>,
    alpha: f64,
    eps: f64,
    extra_poisson: Option<Poisson<f64>>,
    extra_cum: Vec<f64>,
    /// Deterministic drift per step: `b dt` plus stable and extra compensation.
    base_drift: Vec<f64>,
    state_poisson: Option<Poisson<f64>>,
}

fn poisson(mean: f64) -> Result<Option<Poisson<f64>>> {
    if mean > 0.0 {
        Ok(Some(Poisson::new(mean).map_err(|e| {
            Error::Domain(format!("Poisson mean {mean}: {e}"))
        })?))
    } else {
        Ok(None)
    }
}

impl Sampler {
    /// `kernel` is the state-dependent kernel (already mollified and
    /// truncated); `None` means `K ≡ 0`.
    pub fn new(
        model: SamplerModel,
        kernel: Option<JumpKernelModel>,
        dt: f64,
        scheme: StableScheme,
        seed: u64,
    ) -> Result<Self> {
        let d = model.dim();
        if !(dt > 0.0) {
            return Err(Error::Domain(format!("time step {dt} must be positive")));
        }
        if model.a.nrows() != d || model.a.ncols() != d {
            return Err(Error::Shape(
                "diffusion matrix does not match the drift".into(),
            ));
        }
        let alpha = model.stable.as_ref().map_or(2.0, |s| s.alpha());
        let state = match kernel {
            Some(k) if !k.is_zero() => {
                if k.dim != d {
                    return Err(Error::Shape(
                        "kernel dimension differs from the model".into(),
                    ));
                }
                let sj = StateJumps::new(k, if model.stable.is_some() { alpha } else { 1.0 })?;
                if sj.rate_max * dt >= 0.1 {
                    return Err(Error::StepSize {
                        prob: sj.rate_max * dt,
                    });
                }
                Some(sj)
            }
            _ => None,
        };
        // Gaussian part: covariance 2 a dt, square root through the spectrum
        let eig = SymmetricEigen::new(model.a.clone() * (2.0 * dt));
        let roots = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt()));
        let mut sqrt_cov = &eig.eigenvectors * roots * eig.eigenvectors.transpose();
        let mut base_drift: Vec<f64> = model.b.iter().map(|b| b * dt).collect();
        let mut eps = 0.0;
        let mut rays = Vec::new();
        if let Some(stable) = &model.stable {
            for atom in stable.measure().atoms() {
                let c = dt * atom.weight;
                let step = match scheme {
                    StableScheme::Exact => {
                        if alpha == 1.0 {
                            RayStep {
                                direction: atom.direction.clone(),
                                scale: c,
                                shift: c * c.ln(),
                                poisson: None,
                            }
                        } else {
                            let sigma = (-statrs::function::gamma::gamma(-alpha)
                                * (FRAC_PI_2 * alpha).cos())
                            .powf(1.0 / alpha);
                            RayStep {
                                direction: atom.direction.clone(),
                                scale: c.powf(1.0 / alpha) * sigma,
                                shift: -c / (1.0 - alpha),
                                poisson: None,
                            }
                        }
                    }
                    StableScheme::CompoundPoisson {
                        eps: e,
                        gaussian_correction,
                    } => {
                        if !(e > 0.0 && e <= 1.0) {
                            return Err(Error::Domain(format!(
                                "stable cutoff {e} must lie in (0, 1]"
                            )));
                        }
                        eps = e;
                        let rate = atom.weight * e.powf(-alpha) / alpha;
                        // compensation of jumps with ε ≤ r ≤ 1
                        let comp = if alpha == 1.0 {
                            -e.ln()
                        } else {
                            (1.0 - e.powf(1.0 - alpha)) / (1.0 - alpha)
                        };
                        for (bd, xi) in base_drift.iter_mut().zip(&atom.direction) {
                            *bd -= c * comp * xi;
                        }
                        if gaussian_correction {
                            let var = 2.0 * 0.0 + c * e.powf(2.0 - alpha) / (2.0 - alpha);
                            let xi = DVector::from_column_slice(&atom.direction);
                            // independent Gaussian per atom, added through the covariance root below
                            let extra_cov = &xi * xi.transpose() * var;
                            let cov = &sqrt_cov * sqrt_cov.transpose() + extra_cov;
                            let e2 = SymmetricEigen::new(cov);
                            let r2 =
                                DMatrix::from_diagonal(&e2.eigenvalues.map(|v| v.max(0.0).sqrt()));
                            sqrt_cov = &e2.eigenvectors * r2 * e2.eigenvectors.transpose();
                        }
                        RayStep {
                            direction: atom.direction.clone(),
                            scale: rate * dt,
                            shift: 0.0,
                            poisson: poisson(rate * dt)?,
                        }
                    }
                };
                rays.push(step);
            }
        }
        let gaussian = sqrt_cov.iter().any(|v| *v != 0.0);
        // extra finite jumps with compensation of |y| ≤ 1
        let extra_rate: f64 = model.extra.iter().map(|(_, r)| r).sum();
        let mut acc = 0.0;
        let extra_cum = model
            .extra
            .iter()
            .map(|(_, r)| {
                acc += r;
                acc
            })
            .collect();
        for (y, r) in &model.extra {
            if norm(y) <= 1.0 {
                for (bd, yi) in base_drift.iter_mut().zip(y) {
                    *bd -= dt * r * yi;
                }
            }
        }
        let state_poisson = match &state {
            Some(s) => poisson(s.rate_max * dt)?,
            None => None,
        };
        Ok(Self {
            extra_poisson: poisson(extra_rate * dt)?,
            extra_cum,
            model,
            state,
            dt,
            scheme,
            seed,
            sqrt_cov,
            gaussian,
            rays,
            alpha,
            eps,
            base_drift,
            state_poisson,
        })
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn scheme(&self) -> StableScheme {
        self.scheme
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Envelope `Λ_max` of the state-dependent jump intensity.
    pub fn rate_bound(&self) -> f64 {
        self.state.as_ref().map_or(0.0, |s| s.rate_max)
    }

    fn steps(&self, s: f64, t_end: f64) -> Result<usize> {
        let steps = ((t_end - s) / self.dt).round();
        if !(steps >= 1.0)
            || ((t_end - s) - steps * self.dt).abs() > 1e-9 * (t_end - s).abs().max(1.0)
        {
            return Err(Error::Domain(format!(
                "horizon {} is not a positive multiple of dt = {}",
                t_end - s,
                self.dt
            )));
        }
        Ok(steps as usize)
    }

    pub fn rng(&self, path: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(path);
        rng
    }

    /// Runs path `path` from `(s, x)` to `t_end`, calling `visit(t, X_t)` at
    /// every step boundary including the start.
    pub fn run_path<V: FnMut(f64, &[f64])>(
        &self,
        path: u64,
        s: f64,
        x: &[f64],
        t_end: f64,
        mut visit: V,
        mut log: Option<&mut Vec<JumpRecord>>,
    ) -> Result<()> {
        let d = self.dim();
        if x.len() != d {
            return Err(Error::Shape(format!(
                "start point has length {}, expected {d}",
                x.len()
            )));
        }
        let steps = self.steps(s, t_end)?;
        let mut rng = self.rng(path);
        let mut state = x.to_vec();
        let mut inc = vec![0.0; d];
        let mut z = DVector::zeros(d);
        visit(s, &state);
        for k in 0..steps {
            let t = s + k as f64 * self.dt;
            let t_next = s + (k + 1) as f64 * self.dt;
            inc.copy_from_slice(&self.base_drift);
            if self.gaussian {
                for zi in z.iter_mut() {
                    *zi = rng.sample(StandardNormal);
                }
                let g = &self.sqrt_cov * &z;
                for (i, gi) in g.iter().enumerate() {
                    inc[i] += gi;
                }
            }
            self.stable_step(&mut rng, &mut inc, t_next, log.as_deref_mut());
            self.extra_step(&mut rng, &mut inc, t_next, log.as_deref_mut());
            if let Some(sj) = &self.state {
                self.state_step(
                    sj,
                    &mut rng,
                    &state,
                    &mut inc,
                    t,
                    t_next,
                    log.as_deref_mut(),
                )?;
            }
            for (si, ii) in state.iter_mut().zip(&inc) {
                *si += ii;
            }
            visit(t_next, &state);
        }
        Ok(())
    }

    fn stable_step(
        &self,
        rng: &mut ChaCha8Rng,
        inc: &mut [f64],
        t: f64,
        mut log: Option<&mut Vec<JumpRecord>>,
    ) {
        for ray in &self.rays {
            match self.scheme {
                StableScheme::Exact => {
                    let y = if self.alpha == 1.0 {
                        // S_1(π/2, 1, c₁) scaled by c, plus c log c
                        ray.scale * (FRAC_PI_2 * cms_totally_skewed(1.0, rng) + C1 + FRAC_PI_2.ln())
                            + ray.shift
                    } else {
                        ray.scale * cms_totally_skewed(self.alpha, rng) + ray.shift
                    };
                    for (i, xi) in ray.direction.iter().enumerate() {
                        inc[i] += xi * y;
                    }
                }
                StableScheme::CompoundPoisson { .. } => {
                    let count = ray.poisson.as_ref().map_or(0, |p| p.sample(rng) as usize);
                    for _ in 0..count {
                        let u: f64 = 1.0 - rng.random::<f64>();
                        let r = self.eps * u.powf(-1.0 / self.alpha);
                        for (i, xi) in ray.direction.iter().enumerate() {
                            inc[i] += xi * r;
                        }
                        if let Some(l) = log.as_deref_mut() {
                            l.push(JumpRecord {
                                time: t,
                                size: ray.direction.iter().map(|xi| xi * r).collect(),
                                source: JumpSource::StableRay,
                            });
                        }
                    }
                }
            }
        }
    }

    fn extra_step(
        &self,
        rng: &mut ChaCha8Rng,
        inc: &mut [f64],
        t: f64,
        log: Option<&mut Vec<JumpRecord>>,
    ) {
        let Some(p) = &self.extra_poisson else { return };
        let count = p.sample(rng) as usize;
        let mut log = log;
        for _ in 0..count {
            let j = StateJumps::pick(&self.extra_cum, rng.random());
            let y = &self.model.extra[j].0;
            for (i, yi) in y.iter().enumerate() {
                inc[i] += yi;
            }
            if let Some(l) = log.as_deref_mut() {
                l.push(JumpRecord {
                    time: t,
                    size: y.clone(),
                    source: JumpSource::Extra,
                });
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn state_step(
        &self,
        sj: &StateJumps,
        rng: &mut ChaCha8Rng,
        x: &[f64],
        inc: &mut [f64],
        t: f64,
        t_next: f64,
        mut log: Option<&mut Vec<JumpRecord>>,
    ) -> Result<()> {
        if sj.alpha > 1.0 {
            let (k, e) = (sj.model.kappa.eval(x), sj.model.eta.eval(x));
            for (i, o) in inc.iter_mut().enumerate() {
                *o -= (k * sj.small_drift[i] + e * sj.near_drift[i]) * self.dt;
            }
        }
        let Some(p) = &self.state_poisson else {
            return Ok(());
        };
        let candidates = p.sample(rng) as usize;
        if candidates == 0 {
            return Ok(());
        }
        let small = sj.small_rate(x);
        let big = sj.big_rate(x);
        let rate = small + big;
        if rate > sj.rate_max * (1.0 + 1e-12) {
            return Err(Error::ModelBound {
                rate,
                envelope: sj.rate_max,
            });
        }
        let _ = t;
        for _ in 0..candidates {
            if rng.random::<f64>() * sj.rate_max >= rate {
                continue;
            }
            let y: Vec<f64> = if rng.random::<f64>() * rate < small {
                let ray = &sj.model.small.rays[StateJumps::pick(&sj.ray_cum, rng.random())];
                let r = sj.radius(rng.random());
                ray.direction.iter().map(|xi| xi * r).collect()
            } else {
                sj.model.pi[StateJumps::pick(&sj.pi_cum, rng.random())]
                    .y
                    .clone()
            };
            for (i, yi) in y.iter().enumerate() {
                inc[i] += yi;
            }
            if let Some(l) = log.as_deref_mut() {
                l.push(JumpRecord {
                    time: t_next,
                    size: y,
                    source: JumpSource::StateKernel,
                });
            }
        }
        Ok(())
    }

    /// A full path with its state sequence and jump log.
    pub fn sample_path(&self, path: u64, s: f64, x: &[f64], t_end: f64) -> Result<PathSample> {
        let mut states = Vec::new();
        let mut jumps = Vec::new();
        self.run_path(
            path,
            s,
            x,
            t_end,
            |_, v| states.push(v.to_vec()),
            Some(&mut jumps),
        )?;
        Ok(PathSample {
            s,
            x: x.to_vec(),
            dt: self.dt,
            states,
            jumps,
            seed: self.seed,
            path,
        })
    }

    /// `X_{t_end}` for paths `0..paths`.
    pub fn terminal_values(
        &self,
        paths: usize,
        s: f64,
        x: &[f64],
        t_end: f64,
    ) -> Result<Vec<Vec<f64>>> {
        crate::par::map_range(paths, |p| {
            let mut last = Vec::new();
            self.run_path(p as u64, s, x, t_end, |_, v| last = v.to_vec(), None)
                .map(|_| last)
        })
        .into_iter()
        .collect()
    }
}

/// Chambers–Mallows–Stuck draw from `S_α(1, 1, 0)`.
fn cms_totally_skewed<R: Rng>(alpha: f64, rng: &mut R) -> f64 {
    let v = PI * (rng.random::<f64>() - 0.5);
    let w: f64 = rng.sample(Exp1);
    if alpha == 1.0 {
        let a = FRAC_PI_2 + v;
        return (a * v.tan() - (FRAC_PI_2 * w * v.cos() / a).ln()) / FRAC_PI_2;
    }
    let tan = (FRAC_PI_2 * alpha).tan();
    let b = tan.atan() / alpha;
    let s = (1.0 + tan * tan).powf(0.5 / alpha);
    s * (alpha * (v + b)).sin() / v.cos().powf(1.0 / alpha)
        * ((v - alpha * (v + b)).cos() / w).powf((1.0 - alpha) / alpha)
}

/// A band-limited lattice field stored as its significant Fourier modes,
/// cheap to evaluate at arbitrary points.
#[derive(Debug, Clone)]
pub struct TrigPolynomial {
    modes: Vec<(Vec<f64>, Complex64)>,
}

impl TrigPolynomial {
    pub fn from_field(field: &LatticeField, rel_tol: f64) -> Self {
        let grid = field.grid;
        let c = field.spectrum();
        let max = c.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let modes = c
            .iter()
            .enumerate()
            .filter(|(_, v)| v.norm() > rel_tol * max && max > 0.0)
            .map(|(i, v)| {
                // the Nyquist mode is cos-only on the lattice
                let c = if grid.is_nyquist(i) {
                    Complex64::new(v.re, 0.0)
                } else {
                    *v
                };
                (grid.frequency(i), c)
            })
            .collect();
        Self { modes }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.modes
            .iter()
            .map(|(v, c)| (c * Complex64::from_polar(1.0, dot(v, x))).re)
            .sum()
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }
}

/// A [`SpaceTimeFunction`] evaluated off the lattice: one trigonometric
/// polynomial per time node, linear in time between nodes, with the same
/// extension rule past the last node.
#[derive(Debug, Clone)]
pub struct SpaceTimeTrig {
    times: Vec<f64>,
    slices: Vec<TrigPolynomial>,
    extension: Extension,
}

impl SpaceTimeTrig {
    pub fn new(g: &SpaceTimeFunction, rel_tol: f64) -> Self {
        Self {
            times: g.times().to_vec(),
            slices: g
                .fields()
                .iter()
                .map(|f| TrigPolynomial::from_field(f, rel_tol))
                .collect(),
            extension: g.extension(),
        }
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> f64 {
        let k = self.times.len();
        if t <= self.times[0] {
            return self.slices[0].eval(x);
        }
        if t >= self.times[k - 1] {
            return match self.extension {
                Extension::Zero if t > self.times[k - 1] => 0.0,
                _ => self.slices[k - 1].eval(x),
            };
        }
        let j = self.times.partition_point(|&s| s <= t) - 1;
        let w = (t - self.times[j]) / (self.times[j + 1] - self.times[j]);
        let a = self.slices[j].eval(x);
        if w == 0.0 {
            a
        } else {
            (1.0 - w) * a + w * self.slices[j + 1].eval(x)
        }
    }
}

/// Ensemble mean of a per-path functional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub paths: usize,
    /// Bound on what the finite horizon leaves out.
    pub bias_bound: f64,
}

/// Weights `(A, B)` with `∫₀^h e^{-λτ} [(1-τ/h) a + (τ/h) b] dτ = A a + B b`.
fn exp_linear_weights(lambda: f64, h: f64) -> (f64, f64) {
    let x = lambda * h;
    if x.abs() < 1e-4 {
        let b = h * (0.5 - x / 3.0 + x * x / 8.0);
        let total = h * (1.0 - x / 2.0 + x * x / 6.0);
        return (total - b, b);
    }
    let e = (-x).exp();
    let total = -(-x).exp_m1() / lambda;
    let b = (1.0 - e * (1.0 + x)) / (lambda * x);
    (total - b, b)
}

/// `E[∫_s^T e^{-λ(t-s)} g(t, X_t) dt]` with `g` linear between step nodes,
/// plus the tail bound `e^{-λ(T-s)} ‖g‖ / λ`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_v<G: Fn(f64, &[f64]) -> f64 + Sync>(
    sampler: &Sampler,
    paths: usize,
    s: f64,
    x: &[f64],
    t_end: f64,
    lambda: f64,
    g: G,
    g_sup: f64,
) -> Result<McEstimate> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("lambda = {lambda} must be positive")));
    }
    let (wa, wb) = exp_linear_weights(lambda, sampler.dt());
    let values = crate::par::map_range(paths, |p| {
        let mut acc = 0.0;
        let mut prev: Option<(f64, f64)> = None;
        sampler
            .run_path(
                p as u64,
                s,
                x,
                t_end,
                |t, v| {
                    let gv = g(t, v);
                    if let Some((t0, g0)) = prev {
                        acc += (-lambda * (t0 - s)).exp() * (wa * g0 + wb * gv);
                    }
                    prev = Some((t, gv));
                },
                None,
            )
            .map(|_| acc)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let (mean, stderr) = mean_stderr(&values);
    Ok(McEstimate {
        mean,
        stderr,
        paths,
        bias_bound: (-lambda * (t_end - s)).exp() * g_sup / lambda,
    })
}

/// Outcome of a Dynkin check `E f(X_t) - f(x) = E ∫_s^t 𝒢f(X_u) du`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynkinResult {
    pub lhs: f64,
    pub rhs: f64,
    /// Mean of the paired per-path difference and its standard error.
    pub residual: f64,
    pub stderr: f64,
    pub allowance: f64,
    pub passes: bool,
}

impl DynkinResult {
    /// The same estimate judged against another allowance.
    pub fn with_allowance(self, allowance: f64) -> Self {
        Self {
            allowance,
            passes: self.residual.abs() <= 3.0 * self.stderr + allowance,
            ..self
        }
    }
}

/// Paired estimate of both sides of Dynkin's formula for a time-independent
/// `f` and its generator image `gf = 𝒢f`, with `allowance` added to the
/// three-standard-error band.
#[allow(clippy::too_many_arguments)]
pub fn dynkin_residual(
    sampler: &Sampler,
    paths: usize,
    s: f64,
    x: &[f64],
    t_end: f64,
    f: &TrigPolynomial,
    gf: &TrigPolynomial,
    allowance: f64,
) -> Result<DynkinResult> {
    let h = sampler.dt();
    let rows = crate::par::map_range(paths, |p| {
        let mut integral = 0.0;
        let mut prev: Option<f64> = None;
        let mut last = 0.0;
        sampler
            .run_path(
                p as u64,
                s,
                x,
                t_end,
                |_, v| {
                    let gv = gf.eval(v);
                    if let Some(g0) = prev {
                        integral += 0.5 * h * (g0 + gv);
                    }
                    prev = Some(gv);
                    last = f.eval(v);
                },
                None,
            )
            .map(|_| (last - f.eval(x), integral))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let lhs: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let rhs: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let diff: Vec<f64> = rows.iter().map(|r| r.0 - r.1).collect();
    let (residual, stderr) = mean_stderr(&diff);
    let stderr = if stderr.is_nan() { 0.0 } else { stderr };
    Ok(DynkinResult {
        lhs: mean_stderr(&lhs).0,
        rhs: mean_stderr(&rhs).0,
        residual,
        stderr,
        allowance,
        passes: residual.abs() <= 3.0 * stderr + allowance,
    })
}

/// Monte Carlo against the Neumann series at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation {
    pub lambda: f64,
    pub k_lambda: f64,
    pub paths: usize,
    pub mc_mean: f64,
    pub mc_stderr: f64,
    /// The same estimate at twice the step.
    pub mc_coarse_mean: f64,
    pub neumann: f64,
    /// Certified tail of the truncated series.
    pub neumann_truncation: f64,
    /// `2 · residual / λ`: the lattice solution's defect mapped through `G_λ`.
    pub neumann_discretization: f64,
    /// `|V_Δt - V_2Δt|`, the first-order estimate of the time-step bias.
    pub richardson: f64,
    /// Tail of the finite horizon.
    pub horizon_bias: f64,
    /// Distance to the untruncated kernel; reported, not part of the band
    /// since both sides use the same truncated kernel.
    pub truncation_systematic: f64,
    pub difference: f64,
    pub allowance: f64,
    pub passes: bool,
}

/// Compares `E ∫ e^{-λ(t-s)} g(t, X_t) dt` from `fine` (and `coarse`, at
/// twice the step, for the bias estimate) with the Neumann series at `(s, x)`.
#[allow(clippy::too_many_arguments)]
pub fn mc_vs_neumann(
    series: &NeumannSeries,
    residual: f64,
    fine: &Sampler,
    coarse: &Sampler,
    paths: usize,
    s: f64,
    x: &[f64],
    g: &SpaceTimeFunction,
    truncation_systematic: f64,
) -> Result<CrossValidation> {
    let lambda = series.lambda;
    let t_end = g.horizon();
    let eval = SpaceTimeTrig::new(g, 1e-13);
    let g_sup = g.sup_norm();
    let run = |sampler: &Sampler| {
        estimate_v(
            sampler,
            paths,
            s,
            x,
            t_end,
            lambda,
            |t, v| eval.eval(t, v),
            g_sup,
        )
    };
    let mc = run(fine)?;
    let mc_coarse = run(coarse)?;
    let neumann = series.value.eval(s, x, Interp::Spectral);
    // g vanishes past its last node, so the horizon leaves nothing out
    let horizon_bias = if g.extension() == Extension::Zero {
        0.0
    } else {
        mc.bias_bound
    };
    let neumann_discretization = 2.0 * residual / lambda;
    let richardson = (mc.mean - mc_coarse.mean).abs();
    let allowance = 3.0 * mc.stderr
        + series.truncation_bound
        + neumann_discretization
        + richardson
        + horizon_bias;
    let difference = (mc.mean - neumann).abs();
    Ok(CrossValidation {
        lambda,
        k_lambda: series.k_lambda,
        paths,
        mc_mean: mc.mean,
        mc_stderr: mc.stderr,
        mc_coarse_mean: mc_coarse.mean,
        neumann,
        neumann_truncation: series.truncation_bound,
        neumann_discretization,
        richardson,
        horizon_bias,
        truncation_systematic,
        difference,
        allowance,
        passes: difference <= allowance,
    })
}

/// The Krylov occupation check needs `p > (d + α) / (α - β)`.
pub fn krylov_mc_admissible(dim: usize, alpha: f64, beta: f64, p: f64) -> Result<()> {
    let need = (dim as f64 + alpha) / (alpha - beta);
    if !(p > need) {
        return Err(Error::Inadmissible(format!(
            "p = {p} must exceed (d + alpha)/(alpha - beta) = {need:.4}"
        )));
    }
    Ok(())
}

/// One point of the occupation sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KrylovRow {
    pub eps: f64,
    pub occupation: f64,
    pub stderr: f64,
    pub lp_norm: f64,
    pub ratio: f64,
}

/// `E ∫_s^T f_ε(X_t) dt / ‖f_ε‖_{L^p}` for bumps centred at the start point.
pub fn krylov_mc_check(
    sampler: &Sampler,
    paths: usize,
    s: f64,
    x: &[f64],
    t_end: f64,
    p: f64,
    eps: f64,
) -> Result<KrylovRow> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("bump width {eps} must be positive")));
    }
    let h = sampler.dt();
    let values = crate::par::map_range(paths, |path| {
        let mut acc = 0.0;
        let mut prev: Option<f64> = None;
        sampler
            .run_path(
                path as u64,
                s,
                x,
                t_end,
                |_, v| {
                    let f = occupation_bump(x, eps, v);
                    if let Some(f0) = prev {
                        acc += 0.5 * h * (f0 + f);
                    }
                    prev = Some(f);
                },
                None,
            )
            .map(|_| acc)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let (occupation, stderr) = mean_stderr(&values);
    let lp_norm = occupation_bump_norm(x.len(), eps, t_end - s, p)?;
    Ok(KrylovRow {
        eps,
        occupation,
        stderr,
        lp_norm,
        ratio: occupation / lp_norm,
    })
}

/// Smooth bump `f_ε(x) = exp(1 - 1/(1 - |x-c|²/ε²))` of unit height.
pub fn occupation_bump(center: &[f64], eps: f64, x: &[f64]) -> f64 {
    let r2: f64 = x
        .iter()
        .zip(center)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / (eps * eps);
    if r2 >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - r2)).exp()
    }
}

/// `‖f_ε‖_{L^p([0,T] × ℝ^d)}` by radial quadrature.
pub fn occupation_bump_norm(dim: usize, eps: f64, horizon: f64, p: f64) -> Result<f64> {
    let radial = integrate(
        |r| r.powi(dim as i32 - 1) * occupation_bump(&[0.0], 1.0, &[r]).powf(p),
        0.0,
        1.0,
        1e-15,
        1e-12,
    )?
    .value;
    Ok((horizon * crate::kernel::sphere_area(dim) * eps.powi(dim as i32) * radial).powf(1.0 / p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{gil_pelaez_cdf, ks_test};
    use crate::symbol::{Atom, SpectralMeasure};
    use approx::assert_abs_diff_eq;

    #[test]
    fn exp_linear_weights_sum() {
        for (l, h) in [(1.0, 0.1), (50.0, 1e-3), (1e-7, 0.5)] {
            let (a, b) = exp_linear_weights(l, h);
            assert_abs_diff_eq!(a + b, -(-l * h).exp_m1() / l, epsilon = 1e-15);
            let direct = integrate(|t| (-l * t).exp() * t / h, 0.0, h, 1e-17, 1e-13)
                .unwrap()
                .value;
            assert_abs_diff_eq!(b, direct, epsilon = 1e-12);
        }
    }

    fn one_ray(alpha: f64, w: f64) -> StablePart {
        StablePart::new(
            alpha,
            SpectralMeasure::new(vec![Atom {
                direction: vec![1.0],
                weight: w,
            }])
            .unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn exact_stable_increments_match_the_exponent() {
        for (alpha, t) in [(0.7, 0.3), (1.0, 0.5), (1.2, 1.0), (1.7, 0.2)] {
            let s = one_ray(alpha, 1.3);
            let sampler = Sampler::new(
                SamplerModel::from_triple(&LevyTriple::pure_stable(s.clone())),
                None,
                t,
                StableScheme::Exact,
                5,
            )
            .unwrap();
            let xs: Vec<f64> = sampler
                .terminal_values(4000, 0.0, &[0.0], t)
                .unwrap()
                .into_iter()
                .map(|v| v[0])
                .collect();
            let ks = ks_test(&xs, |x| gil_pelaez_cdf(&s, t, x).unwrap()).unwrap();
            assert!(ks.p_value > 0.01, "alpha {alpha}: {ks:?}");
        }
    }

    #[test]
    fn dead_generator_and_determinism() {
        let dead = Sampler::new(SamplerModel::dead(2), None, 0.1, StableScheme::Exact, 1).unwrap();
        let p = dead.sample_path(0, 0.0, &[0.3, -1.0], 1.0).unwrap();
        assert!(p.states.iter().all(|v| v == &vec![0.3, -1.0]));
        let model = crate::approx::truncate_kernel(&crate::flagship::kernel(), 0.05).unwrap();
        let s = Sampler::new(
            SamplerModel::from_triple(&crate::flagship::triple()),
            Some(model),
            1e-3,
            StableScheme::Exact,
            9,
        )
        .unwrap();
        let a = s.sample_path(17, 0.0, &[0.0], 0.5).unwrap();
        let b = s.sample_path(17, 0.0, &[0.0], 0.5).unwrap();
        assert_eq!(a, b);
        assert_ne!(
            a.states,
            s.sample_path(18, 0.0, &[0.0], 0.5).unwrap().states
        );
        assert!(a.jumps.iter().all(|j| j.source == JumpSource::StateKernel));
    }

    #[test]
    fn step_size_guard() {
        let model = crate::approx::truncate_kernel(&crate::flagship::kernel(), 0.05).unwrap();
        let r = Sampler::new(
            SamplerModel::from_triple(&crate::flagship::triple()),
            Some(model),
            0.5,
            StableScheme::Exact,
            9,
        );
        assert!(matches!(r, Err(Error::StepSize { .. })));
    }

    #[test]
    fn constant_integrand_has_zero_variance() {
        let s = Sampler::new(
            SamplerModel::from_triple(&crate::flagship::triple()),
            None,
            0.01,
            StableScheme::Exact,
            2,
        )
        .unwrap();
        let e = estimate_v(&s, 200, 0.0, &[0.0], 1.0, 3.0, |_, _| 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(e.mean, -(-3.0f64).exp_m1() / 3.0, epsilon = 1e-14);
        assert!(e.stderr < 1e-15);
        let e = estimate_v(&s, 50, 0.0, &[0.0], 1.0, 3.0, |t, _| (-2.0 * t).exp(), 1.0).unwrap();
        let exact = -(-5.0f64).exp_m1() / 5.0;
        assert!((e.mean - exact).abs() < 1e-4 && e.stderr < 1e-15);
    }

    #[test]
    fn trig_polynomial_matches_field() {
        let grid = crate::lattice::Grid::new(1, 64, 2.0 * PI).unwrap();
        let exact = |x: f64| (x + 0.3).cos() + 0.2 * (3.0 * x).sin() - 0.7 * (1.5 * x).cos();
        let f = LatticeField::from_fn(grid, |x| exact(x[0]));
        let t = TrigPolynomial::from_field(&f, 1e-12);
        assert_eq!(t.len(), 6);
        for x in [0.0, 0.77, -5.1] {
            assert_abs_diff_eq!(t.eval(&[x]), exact(x), epsilon = 1e-13);
        }
    }
}
