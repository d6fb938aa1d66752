//! The perturbation `K` of the stable generator: the composed operator
//! `KR_λ`, its contraction constant `k_λ`, the threshold `λ₀`, the Neumann
//! series `G_λ = Σ R_λ(KR_λ)^i`, and Krylov-type `L^q L^p` constants.

use crate::density::{invert, predicted_slope, AutoLattice, Multiplier};
use crate::error::{Error, Result};
use crate::kernel::{JumpKernelModel, KernelOperator};
use crate::lattice::{Grid, LatticeField};
use crate::ledger::{ConstantsLedger, Provenance};
use crate::resolvent::{
    conjugate, komatsu_integral, lq_lp_constant, residual_stencils, riesz_constant, HolderCurve,
    HolderModulus, ModulusProbe, SpaceTimeFunction, SpectralGenerator,
};
use crate::symbol::Exponent;
use serde::{Deserialize, Serialize};

/// The Hölder exponent used inside `k_λ`: `δ = β` (on `R_λ`) for `α ≤ 1`;
/// for `α > 1` the midpoint of the admissible interval
/// `max(0, β-1) < δ < α-1` (on `∇R_λ`). Returns `(δ, gradient)`.
pub fn contraction_delta(alpha: f64, beta: f64) -> Result<(f64, bool)> {
    if !(beta > 0.0 && beta < alpha) {
        return Err(Error::InvalidKernel(format!(
            "need 0 < beta < alpha, got beta {beta}, alpha {alpha}"
        )));
    }
    if alpha <= 1.0 {
        Ok((beta, false))
    } else {
        Ok((0.5 * ((beta - 1.0).max(0.0) + alpha - 1.0), true))
    }
}

/// `k_λ = (C_λ + 2/λ) B_M`.
pub fn k_lambda(modulus: f64, lambda: f64, b_m: f64) -> f64 {
    (modulus + 2.0 / lambda) * b_m
}

/// `λ ↦ k_λ` for a fixed kernel, from measured moduli.
#[derive(Debug, Clone)]
pub struct ContractionCurve {
    pub alpha: f64,
    pub b_m: f64,
    curve: HolderCurve,
}

impl ContractionCurve {
    pub fn measure<E: Exponent + ?Sized>(
        exponent: &E,
        model: &JumpKernelModel,
        probe: &ModulusProbe,
    ) -> Result<Self> {
        let alpha = exponent
            .alpha()
            .ok_or_else(|| Error::Domain("contraction needs a stable index".into()))?;
        model.check_against(alpha)?;
        let (delta, gradient) = contraction_delta(alpha, model.beta)?;
        let curve = HolderCurve::measure(exponent, delta, gradient, probe)?;
        Ok(Self {
            alpha,
            b_m: model.beta_moment_bound(),
            curve,
        })
    }

    /// The same moduli with another kernel bound `B_M`.
    pub fn with_bound(&self, b_m: f64) -> Self {
        Self {
            b_m,
            ..self.clone()
        }
    }

    pub fn delta(&self) -> f64 {
        self.curve.delta()
    }

    pub fn gradient(&self) -> bool {
        self.curve.gradient()
    }

    pub fn modulus(&self, lambda: f64) -> Result<HolderModulus> {
        self.curve.at(lambda)
    }

    pub fn k(&self, lambda: f64) -> Result<f64> {
        if self.b_m == 0.0 {
            return Ok(0.0);
        }
        Ok(k_lambda(self.modulus(lambda)?.difference, lambda, self.b_m))
    }

    /// Records the modulus and the resulting `k_λ` in `ledger`.
    pub fn record(&self, ledger: &mut ConstantsLedger, lambda: f64) -> Result<f64> {
        let m = self.modulus(lambda)?;
        let (name, frac) = if m.gradient {
            ("C_hat_lambda", "C_hat_lambda_fractional")
        } else {
            ("C_lambda", "C_lambda_fractional")
        };
        ledger.record(
            name,
            self.alpha,
            Some(m.delta),
            None,
            Some(lambda),
            m.difference,
            Provenance::Measured,
            vec![],
        );
        ledger.record(
            frac,
            self.alpha,
            Some(m.delta),
            None,
            Some(lambda),
            m.fractional,
            Provenance::Measured,
            vec![],
        );
        ledger.k_lambda(lambda, m.delta, m.gradient, self.b_m)
    }
}

/// Outcome of the `λ₀` search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lambda0 {
    pub lambda0: f64,
    pub k_at_lambda0: f64,
    /// `(λ, k_λ)` on the search grid.
    pub grid: Vec<(f64, f64)>,
}

/// Smallest `λ` with `k_λ < 1/2`: the first grid point that qualifies,
/// refined by bisection against its predecessor to within `1e-3`.
/// Errors when `k` increases along the grid or no grid point qualifies.
pub fn find_lambda0<F: Fn(f64) -> Result<f64>>(k: F, grid: &[f64]) -> Result<Lambda0> {
    if grid.is_empty() || grid.windows(2).any(|w| !(w[1] > w[0])) || !(grid[0] > 0.0) {
        return Err(Error::Domain(
            "lambda grid must be positive and strictly increasing".into(),
        ));
    }
    let values = grid
        .iter()
        .map(|&l| Ok((l, k(l)?)))
        .collect::<Result<Vec<_>>>()?;
    for w in values.windows(2) {
        if w[1].1 > w[0].1 * (1.0 + 1e-9) + 1e-15 {
            return Err(Error::Domain(format!(
                "k_lambda is not non-increasing on the grid: k({}) = {} < k({}) = {}",
                w[0].0, w[0].1, w[1].0, w[1].1
            )));
        }
    }
    let first = values
        .iter()
        .position(|(_, v)| *v < 0.5)
        .ok_or(Error::GridExhausted {
            best: values.iter().map(|(_, v)| *v).fold(f64::INFINITY, f64::min),
        })?;
    if first == 0 {
        return Ok(Lambda0 {
            lambda0: values[0].0,
            k_at_lambda0: values[0].1,
            grid: values,
        });
    }
    let (mut lo, mut hi) = (values[first - 1].0, values[first].0);
    let mut k_hi = values[first].1;
    while hi - lo > 1e-3 {
        let mid = 0.5 * (lo + hi);
        let km = k(mid)?;
        if km < 0.5 {
            hi = mid;
            k_hi = km;
        } else {
            lo = mid;
        }
    }
    Ok(Lambda0 {
        lambda0: hi,
        k_at_lambda0: k_hi,
        grid: values,
    })
}

/// `L + K` on a lattice: the stable resolvent together with the kernel
/// operator.
pub struct Perturbation {
    generator: SpectralGenerator,
    kernel: KernelOperator,
}

/// Partial sum of the Neumann series with its bookkeeping.
#[derive(Debug, Clone)]
pub struct NeumannSeries {
    pub lambda: f64,
    pub k_lambda: f64,
    pub value: SpaceTimeFunction,
    /// `h_0 = g`, `h_{i+1} = K R_λ h_i`; the `i`-th term is `R_λ h_i`.
    pub sources: Vec<SpaceTimeFunction>,
    /// Sup norms of the terms `R_λ(KR_λ)^i g`.
    pub term_norms: Vec<f64>,
    /// Sup norms of `(KR_λ)^i g`.
    pub source_norms: Vec<f64>,
    /// `λ^{-1} k^{K+1} / (1-k) ‖g‖` for the omitted tail.
    pub truncation_bound: f64,
}

impl Perturbation {
    pub fn new<E: Exponent + ?Sized>(
        exponent: &E,
        model: &JumpKernelModel,
        grid: Grid,
    ) -> Result<Self> {
        let alpha = exponent
            .alpha()
            .ok_or_else(|| Error::Domain("perturbation needs a stable index".into()))?;
        model.check_against(alpha)?;
        Ok(Self {
            generator: SpectralGenerator::new(exponent, grid)?,
            kernel: KernelOperator::new(model, grid, alpha > 1.0)?,
        })
    }

    pub fn generator(&self) -> &SpectralGenerator {
        &self.generator
    }

    pub fn apply_k(&self, f: &LatticeField) -> Result<LatticeField> {
        self.kernel.apply(f)
    }

    fn apply_k_all(&self, f: &SpaceTimeFunction) -> Result<SpaceTimeFunction> {
        let fields = f
            .fields()
            .iter()
            .map(|x| self.kernel.apply(x))
            .collect::<Result<Vec<_>>>()?;
        SpaceTimeFunction::new(f.times().to_vec(), fields, f.extension())
    }

    /// `KR_λ g` on `g`'s time grid.
    pub fn apply_kr(&self, lambda: f64, g: &SpaceTimeFunction) -> Result<SpaceTimeFunction> {
        self.apply_k_all(&self.generator.resolve(lambda, g)?)
    }

    /// `Σ_{i≤K} R_λ(KR_λ)^i g` with `K` the smallest count whose tail bound
    /// falls below `tol`.
    pub fn neumann(
        &self,
        lambda: f64,
        g: &SpaceTimeFunction,
        k: f64,
        tol: f64,
    ) -> Result<NeumannSeries> {
        if !(k < 0.5) {
            return Err(Error::Contraction { k });
        }
        let gnorm = g.sup_norm();
        let tail = |n: usize| gnorm / lambda * k.powi(n as i32 + 1) / (1.0 - k);
        let mut count = 0;
        while k > 0.0 && tail(count) >= tol && count < 200 {
            count += 1;
        }
        let first = self.generator.resolve(lambda, g)?;
        let mut value = first.clone();
        let mut term_norms = vec![first.sup_norm()];
        let mut source_norms = vec![gnorm];
        let mut sources = vec![g.clone()];
        let mut term = first;
        for _ in 0..count {
            let h = self.apply_k_all(&term)?;
            let hn = h.sup_norm();
            source_norms.push(hn);
            if hn == 0.0 {
                break;
            }
            term = self.generator.resolve(lambda, &h)?;
            term_norms.push(term.sup_norm());
            let fields = value
                .fields()
                .iter()
                .zip(term.fields())
                .map(|(a, b)| a.add(b))
                .collect::<Result<Vec<_>>>()?;
            value = SpaceTimeFunction::new(value.times().to_vec(), fields, value.extension())?;
            sources.push(h);
        }
        Ok(NeumannSeries {
            lambda,
            k_lambda: k,
            value,
            sources,
            term_norms,
            source_norms,
            truncation_bound: if k == 0.0 { 0.0 } else { tail(count) },
        })
    }

    /// `G(t) = Σ R_λ h_i (t)` at any time.
    pub fn series_at(&self, series: &NeumannSeries, t: f64) -> Result<LatticeField> {
        let mut acc = LatticeField::zeros(self.generator.grid());
        for h in &series.sources {
            acc = acc.add(&self.generator.apply_r(series.lambda, h, t)?)?;
        }
        Ok(acc)
    }

    /// Sup over interior time midpoints of `|λG - ∂_tG - LG - KG - g|`.
    pub fn series_residual(
        &self,
        series: &NeumannSeries,
        g: &SpaceTimeFunction,
        dt: f64,
    ) -> Result<f64> {
        let lambda = series.lambda;
        let stencils = residual_stencils(g, dt);
        let times: Vec<f64> = stencils.iter().flat_map(|s| s.times()).collect();
        let mut values = vec![LatticeField::zeros(self.generator.grid()); times.len()];
        for h in &series.sources {
            for (acc, v) in values
                .iter_mut()
                .zip(self.generator.apply_r_many(lambda, h, &times)?)
            {
                *acc = acc.add(&v)?;
            }
        }
        let mut worst: f64 = 0.0;
        for (st, r) in stencils.iter().zip(values.chunks(5)) {
            let lg = self.generator.apply_generator(&r[2]);
            let kg = self.kernel.apply(&r[2])?;
            let src = g.at_time(st.t);
            for i in 0..r[2].values.len() {
                let res = lambda * r[2].values[i]
                    - st.derivative(r, i)
                    - lg.values[i]
                    - kg.values[i]
                    - src.values[i];
                worst = worst.max(res.abs());
            }
        }
        Ok(worst)
    }
}

/// The Krylov gate `d/p + α/q < α - β` (with `p, q > 1`).
pub fn krylov_admissible(dim: usize, alpha: f64, beta: f64, p: f64, q: f64) -> Result<()> {
    if !(p > 1.0 && q > 1.0) {
        return Err(Error::Inadmissible(format!(
            "p = {p} and q = {q} must exceed 1"
        )));
    }
    let lhs = dim as f64 / p + alpha / q;
    if !(lhs < alpha - beta) {
        return Err(Error::Inadmissible(format!(
            "d/p + alpha/q = {lhs:.4} is not below alpha - beta = {:.4}",
            alpha - beta
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KrylovConstants {
    pub lambda: f64,
    pub p: f64,
    pub q: f64,
    /// `L^q L^p → sup` constant of `R_λ`.
    pub c_lambda: f64,
    /// `L^q L^p` Hölder constant of `R_λ` (or `∇R_λ` when `α > 1`).
    pub n_lambda: f64,
    pub c_tilde: f64,
    pub l_lambda: f64,
}

/// `L^{p*}` norms of `p₁` and of the Hölder-relevant derivative, measured
/// once for self-similar kernels; `λ`-dependence is then exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KrylovNorms {
    pub dim: usize,
    pub alpha: f64,
    pub beta: f64,
    pub p: f64,
    pub q: f64,
    pub delta: f64,
    pub gradient: bool,
    pub density_norm: f64,
    pub derivative_norm: f64,
    /// `c₆ c₇`: converts the fractional bound into a difference bound.
    pub komatsu_factor: f64,
    pub b_m: f64,
}

impl KrylovNorms {
    pub fn measure<E: Exponent + ?Sized>(
        exponent: &E,
        model: &JumpKernelModel,
        p: f64,
        q: f64,
        lattice: &AutoLattice,
    ) -> Result<Self> {
        let alpha = exponent
            .alpha()
            .ok_or_else(|| Error::Domain("Krylov constants need a stable index".into()))?;
        if !exponent.self_similar() {
            return Err(Error::Domain(
                "Krylov constants are measured for self-similar kernels only".into(),
            ));
        }
        let dim = exponent.dim();
        krylov_admissible(dim, alpha, model.beta, p, q)?;
        let (delta, gradient) = contraction_delta(alpha, model.beta)?;
        let ps = conjugate(p)?;
        let norm_of = |mult: Multiplier| -> Result<f64> {
            let spec = lattice.spec_for(exponent, 1.0, mult)?;
            invert(exponent, 1.0, mult, &spec)?.field.lr_norm(ps)
        };
        let density_norm = norm_of(Multiplier::Identity)?;
        let derivative_norm = if gradient {
            (0..dim)
                .map(|a| norm_of(Multiplier::FractionalGradient(delta, a)))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .fold(0.0, f64::max)
        } else {
            norm_of(Multiplier::Fractional(delta))?
        };
        let komatsu_factor = komatsu_integral(delta, dim, 1.0)? * riesz_constant(delta, dim);
        Ok(Self {
            dim,
            alpha,
            beta: model.beta,
            p,
            q,
            delta,
            gradient,
            density_norm,
            derivative_norm,
            komatsu_factor,
            b_m: model.beta_moment_bound(),
        })
    }

    /// `c_λ`, `N_λ` (or `Ñ_λ`), `c̃_λ = (N_λ + 2c_λ) B_M` and
    /// `l_λ = c_λ (1 + 2 c̃_λ)`. For `α > 1` the gradient constant needs the
    /// stricter `d/p + α/q < α - 1 - δ`.
    pub fn constants(&self, lambda: f64) -> Result<KrylovConstants> {
        let d = self.dim as f64;
        let ps = conjugate(self.p)?;
        let c_decay = predicted_slope(self.dim, self.alpha, ps, Multiplier::Identity);
        let n_mult = if self.gradient {
            Multiplier::FractionalGradient(self.delta, 0)
        } else {
            Multiplier::Fractional(self.delta)
        };
        let n_decay = predicted_slope(self.dim, self.alpha, ps, n_mult);
        let c_lambda = lq_lp_constant(self.density_norm, lambda, self.q, c_decay)?;
        let n_lambda =
            lq_lp_constant(self.derivative_norm, lambda, self.q, n_decay).map_err(|_| {
                Error::Inadmissible(format!(
                    "d/p + alpha/q = {:.4} must be below {:.4} for the Hölder constant of {}",
                    d / self.p + self.alpha / self.q,
                    self.alpha - self.delta - if self.gradient { 1.0 } else { 0.0 },
                    if self.gradient {
                        "the gradient"
                    } else {
                        "the resolvent"
                    }
                ))
            })? * self.komatsu_factor;
        let c_tilde = (n_lambda + 2.0 * c_lambda) * self.b_m;
        Ok(KrylovConstants {
            lambda,
            p: self.p,
            q: self.q,
            c_lambda,
            n_lambda,
            c_tilde,
            l_lambda: c_lambda * (1.0 + 2.0 * c_tilde),
        })
    }

    pub fn record(&self, ledger: &mut ConstantsLedger, lambda: f64) -> Result<KrylovConstants> {
        let k = self.constants(lambda)?;
        let r = Some(self.p);
        let delta = Some(self.delta);
        ledger.record(
            "c_lambda",
            self.alpha,
            None,
            r,
            Some(lambda),
            k.c_lambda,
            Provenance::DerivedFormula,
            vec![("density_norm".into(), self.density_norm)],
        );
        let n_name = if self.gradient {
            "N_tilde_lambda"
        } else {
            "N_lambda"
        };
        ledger.record(
            n_name,
            self.alpha,
            delta,
            r,
            Some(lambda),
            k.n_lambda,
            Provenance::DerivedFormula,
            vec![
                ("derivative_norm".into(), self.derivative_norm),
                ("c6_c7".into(), self.komatsu_factor),
            ],
        );
        ledger.record(
            "c_tilde_lambda",
            self.alpha,
            delta,
            r,
            Some(lambda),
            k.c_tilde,
            Provenance::DerivedFormula,
            vec![
                (n_name.into(), k.n_lambda),
                ("c_lambda".into(), k.c_lambda),
                ("B_M".into(), self.b_m),
            ],
        );
        ledger.record(
            "l_lambda",
            self.alpha,
            delta,
            r,
            Some(lambda),
            k.l_lambda,
            Provenance::DerivedFormula,
            vec![
                ("c_lambda".into(), k.c_lambda),
                ("c_tilde_lambda".into(), k.c_tilde),
            ],
        );
        Ok(k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resolvent::gamma_ceiling;
    use approx::assert_abs_diff_eq;

    #[test]
    fn contraction_delta_policy() {
        assert_eq!(contraction_delta(0.8, 0.5).unwrap(), (0.5, false));
        let (d, g) = contraction_delta(1.2, 0.5).unwrap();
        assert!(g);
        assert_abs_diff_eq!(d, 0.1, epsilon = 1e-15);
        let (d, _) = contraction_delta(1.8, 1.4).unwrap();
        assert_abs_diff_eq!(d, 0.6, epsilon = 1e-15);
        assert!(contraction_delta(1.2, 1.3).is_err());
    }

    #[test]
    fn k_lambda_arithmetic() {
        assert_eq!(k_lambda(0.3, 10.0, 1.0), 0.5);
        assert_eq!(k_lambda(0.3, 10.0, 2.0), 2.0 * k_lambda(0.3, 10.0, 1.0));
        assert_eq!(k_lambda(0.3, 10.0, 0.0), 0.0);
    }

    #[test]
    fn lambda0_against_scalar_root() {
        let (c4, delta, alpha) = (1.0, 0.5, 0.8);
        let k = |l: f64| Ok(gamma_ceiling(c4, delta, alpha, l) + 2.0 / l);
        let grid: Vec<f64> = (0..24).map(|j| 2f64.powi(j)).collect();
        let found = find_lambda0(k, &grid).unwrap();
        // independent root by plain bisection on a wide bracket
        let (mut lo, mut hi) = (1.0f64, 1e8f64);
        for _ in 0..200 {
            let mid = (lo * hi).sqrt();
            if k(mid).unwrap() < 0.5 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        assert!(
            found.lambda0 >= hi - 1e-9 && found.lambda0 - hi <= 1e-3,
            "{} vs {hi}",
            found.lambda0
        );
        assert!(found.k_at_lambda0 < 0.5);
        // a four times larger kernel needs a strictly larger threshold
        let bigger = find_lambda0(|l| Ok(4.0 * k(l)?), &grid).unwrap();
        assert!(bigger.lambda0 > found.lambda0);
        // the zero kernel qualifies at the first grid point
        assert_eq!(find_lambda0(|_| Ok(0.0), &grid).unwrap().lambda0, 1.0);
        assert!(matches!(
            find_lambda0(|_| Ok(0.7), &grid),
            Err(Error::GridExhausted { .. })
        ));
        assert!(find_lambda0(Ok, &grid).is_err());
    }

    #[test]
    fn krylov_gate() {
        assert!(krylov_admissible(1, 1.5, 0.5, 3.0, 3.0).is_ok());
        assert!(matches!(
            krylov_admissible(1, 1.5, 0.5, 2.0, 2.0),
            Err(Error::Inadmissible(_))
        ));
    }
}
