//! Approximation of the jump kernel: spatial mollification `M_n`, the
//! commutator error `K_n f - (K f) * φ_n`, inner cutoffs `M_n^δ` and the
//! truncation error.

use crate::density::least_squares;
use crate::error::{Error, Result};
use crate::kernel::{sphere_area, JumpKernelModel, KernelOperator, TruncationCutoff};
use crate::lattice::{Grid, LatticeField};
use crate::quad::{gauss_legendre, integrate};
use crate::symbol::norm;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

fn bump(r: f64) -> f64 {
    if r >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - r * r)).exp()
    }
}

/// The normalised bump `φ(x) = e^{-1/(1-|x|²)} / Z` on the unit ball, and
/// its rescalings `φ_n(x) = n^d φ(nx)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mollifier {
    pub dim: usize,
    normaliser: f64,
}

impl Mollifier {
    pub fn new(dim: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Domain(format!("dimension {dim} outside 1..=3")));
        }
        let radial = integrate(|r| r.powi(dim as i32 - 1) * bump(r), 0.0, 1.0, 1e-16, 1e-14)?.value;
        Ok(Self {
            dim,
            normaliser: sphere_area(dim) * radial,
        })
    }

    /// `φ_n(x)`.
    pub fn eval(&self, n: f64, x: &[f64]) -> f64 {
        n.powi(self.dim as i32) * bump(n * norm(x)) / self.normaliser
    }

    /// `∫ φ_n` by radial quadrature (should be 1).
    pub fn mass(&self, n: f64) -> Result<f64> {
        self.radial_moment(n, 0.0)
    }

    /// `∫ |y|^k φ_n(y) dy`.
    pub fn radial_moment(&self, n: f64, k: f64) -> Result<f64> {
        let d = self.dim as i32;
        let v = integrate(
            |r| r.powi(d - 1) * r.powf(k) * self.eval(n, &radial_point(self.dim, r)),
            0.0,
            1.0 / n,
            1e-16,
            1e-14,
        )?
        .value;
        Ok(sphere_area(self.dim) * v)
    }

    /// `φ̂_n(k) = ∫ cos(k·z) φ_n(z) dz` (the bump is even).
    pub fn transform(&self, n: f64, k: &[f64]) -> f64 {
        let s = norm(k) / n;
        if s == 0.0 {
            return 1.0;
        }
        let (x, w) = gauss_legendre(64);
        let on_unit = |f: &dyn Fn(f64) -> f64| -> f64 {
            x.iter()
                .zip(&w)
                .map(|(x, w)| 0.5 * w * f(0.5 * (x + 1.0)))
                .sum()
        };
        let v = match self.dim {
            1 => 2.0 * on_unit(&|r| bump(r) * (s * r).cos()),
            2 => {
                // ∫₀^{2π} cos(s r cos θ) dθ by the periodic trapezoid rule
                let m = 96;
                on_unit(&|r| {
                    let ang: f64 = (0..m)
                        .map(|j| (s * r * (2.0 * PI * j as f64 / m as f64).cos()).cos())
                        .sum::<f64>()
                        * 2.0
                        * PI
                        / m as f64;
                    r * bump(r) * ang
                })
            }
            _ => {
                4.0 * PI
                    * on_unit(&|r| {
                        r * r
                            * bump(r)
                            * if r == 0.0 {
                                1.0
                            } else {
                                (s * r).sin() / (s * r)
                            }
                    })
            }
        };
        v / self.normaliser
    }

    /// Spectral convolution `f * φ_n` of a lattice field.
    pub fn convolve(&self, n: f64, f: &LatticeField) -> LatticeField {
        f.apply_multiplier(|v| num_complex::Complex64::new(self.transform(n, v), 0.0))
    }
}

fn radial_point(dim: usize, r: f64) -> Vec<f64> {
    let mut x = vec![0.0; dim];
    x[0] = r;
    x
}

/// `M_n`: `κ` and `η` replaced by `κ * φ_n`, `η * φ_n`.
pub fn mollify_kernel(model: &JumpKernelModel, n: f64) -> Result<JumpKernelModel> {
    let phi = Mollifier::new(model.dim)?;
    Ok(JumpKernelModel {
        kappa: model.kappa.convolved(|k| phi.transform(n, k)),
        eta: model.eta.convolved(|k| phi.transform(n, k)),
        ..model.clone()
    })
}

/// Smooth test functions with closed-form `C^m` norms
/// `‖f‖_{C^m} = Σ_{|j|≤m} sup |∂^j f|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    /// `cos(k·x + φ)`.
    Cosine { wavevector: Vec<f64>, phase: f64 },
    /// `exp(-|x - c|² / (2 s²))`.
    Gaussian { center: Vec<f64>, width: f64 },
}

impl TestFunction {
    pub fn dim(&self) -> usize {
        match self {
            Self::Cosine { wavevector, .. } => wavevector.len(),
            Self::Gaussian { center, .. } => center.len(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Self::Cosine { wavevector, phase } => (crate::symbol::dot(wavevector, x) + phase).cos(),
            Self::Gaussian { center, width } => {
                let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                (-r2 / (2.0 * width * width)).exp()
            }
        }
    }

    pub fn field(&self, grid: Grid) -> LatticeField {
        LatticeField::from_fn(grid, |x| self.eval(x))
    }

    /// `Σ_{|j|≤m} sup|∂^j f|` over multi-indices `j`.
    pub fn c_norm(&self, m: usize) -> f64 {
        let d = self.dim();
        let mut total = 0.0;
        for j in multi_indices(d, m) {
            total += match self {
                Self::Cosine { wavevector, .. } => j
                    .iter()
                    .zip(wavevector)
                    .map(|(&e, k)| k.abs().powi(e as i32))
                    .product::<f64>(),
                Self::Gaussian { width, .. } => j
                    .iter()
                    .map(|&e| hermite_sup(e) / width.powi(e as i32))
                    .product::<f64>(),
            };
        }
        total
    }
}

fn multi_indices(d: usize, m: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..d {
        out = out
            .into_iter()
            .flat_map(|p: Vec<usize>| {
                let used: usize = p.iter().sum();
                (0..=m - used).map(move |e| {
                    let mut q = p.clone();
                    q.push(e);
                    q
                })
            })
            .collect();
    }
    out
}

/// `sup_u |He_k(u) e^{-u²/2}|`, i.e. the sup of the k-th derivative of the
/// unit Gaussian bump.
fn hermite_sup(k: usize) -> f64 {
    match k {
        0 => 1.0,
        1 => (-0.5f64).exp(),
        2 => 1.0,
        3 => {
            // He₃ = u³ - 3u; maximiser solves u⁴ - 6u² + 3 = 0
            let u = (3.0 - 6f64.sqrt()).sqrt();
            ((u * u * u - 3.0 * u) * (-u * u / 2.0).exp()).abs()
        }
        _ => panic!("derivative order {k} not tabulated"),
    }
}

/// One row of the mollification study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MollifyRow {
    pub n: f64,
    pub measured: f64,
    pub bound: f64,
}

/// `sup_x |K_n f(x) - (K f) * φ_n(x)|` over the lattice nodes, with the
/// bound `4 n^{-1} ‖f‖_{C³} B_M`.
pub fn mollify_error(
    f: &TestFunction,
    model: &JumpKernelModel,
    compensated: bool,
    n: f64,
    grid: Grid,
) -> Result<MollifyRow> {
    let phi = Mollifier::new(model.dim)?;
    let field = f.field(grid);
    let k = KernelOperator::new(model, grid, compensated)?;
    let kn = KernelOperator::new(&mollify_kernel(model, n)?, grid, compensated)?;
    let smoothed = phi.convolve(n, &k.apply(&field)?);
    let measured = kn.apply(&field)?.sub(&smoothed)?.sup_norm();
    Ok(MollifyRow {
        n,
        measured,
        bound: 4.0 / n * f.c_norm(3) * model.beta_moment_bound(),
    })
}

/// Mollification errors for every `n` and the fitted log-log slope.
pub fn mollify_study(
    f: &TestFunction,
    model: &JumpKernelModel,
    compensated: bool,
    ns: &[f64],
    grid: Grid,
) -> Result<(Vec<MollifyRow>, f64)> {
    let rows = ns
        .iter()
        .map(|&n| mollify_error(f, model, compensated, n, grid))
        .collect::<Result<Vec<_>>>()?;
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.n.ln(), r.measured.ln())).collect();
    Ok((rows, least_squares(&pts).0))
}

/// `M^δ`: small jumps multiplied by `χ_δ`.
pub fn truncate_kernel(model: &JumpKernelModel, delta_cut: f64) -> Result<JumpKernelModel> {
    Ok(model.truncated(TruncationCutoff::new(delta_cut)?))
}

/// One row of the truncation study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationRow {
    pub delta_cut: f64,
    pub measured: f64,
    pub bound: f64,
    /// Closed-form bound on the jump intensity `M^δ(x, ℝ^d∖{0})`.
    pub rate_bound: f64,
}

/// `sup_x |K^δ f - K f|` against `δ^{α-β} ‖f‖_{C²} B_M`.
pub fn truncation_error(
    f: &TestFunction,
    model: &JumpKernelModel,
    alpha: f64,
    delta_cut: f64,
    grid: Grid,
) -> Result<TruncationRow> {
    let truncated = truncate_kernel(model, delta_cut)?;
    let compensated = alpha > 1.0;
    let field = f.field(grid);
    let full = KernelOperator::new(model, grid, compensated)?.apply(&field)?;
    let cut = KernelOperator::new(&truncated, grid, compensated)?.apply(&field)?;
    Ok(TruncationRow {
        delta_cut,
        measured: cut.sub(&full)?.sup_norm(),
        bound: delta_cut.powf(alpha - model.beta) * f.c_norm(2) * model.beta_moment_bound(),
        rate_bound: truncated.total_rate_bound()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{Modulator, SmallJumpLaw};
    use approx::assert_abs_diff_eq;

    #[test]
    fn mollifier_invariants() {
        for d in 1..=3 {
            let phi = Mollifier::new(d).unwrap();
            for n in [1.0, 4.0, 32.0] {
                assert_abs_diff_eq!(phi.mass(n).unwrap(), 1.0, epsilon = 1e-10);
                assert!(phi.radial_moment(n, 1.0).unwrap() <= 1.0 / n);
                assert_abs_diff_eq!(phi.transform(n, &vec![0.0; d]), 1.0, epsilon = 1e-12);
            }
            assert_eq!(phi.eval(4.0, &radial_point(d, 0.26)), 0.0);
        }
        // transform against direct quadrature in 1-d
        let phi = Mollifier::new(1).unwrap();
        let direct = integrate(
            |z| (3.0 * z).cos() * phi.eval(2.0, &[z]),
            -0.5,
            0.5,
            1e-15,
            1e-13,
        )
        .unwrap()
        .value;
        assert_abs_diff_eq!(phi.transform(2.0, &[3.0]), direct, epsilon = 1e-12);
    }

    #[test]
    fn mollified_modulator_is_close() {
        let model = crate::flagship::kernel();
        assert_eq!(
            mollify_kernel(
                &JumpKernelModel {
                    kappa: Modulator::constant(1.3),
                    ..model.clone()
                },
                4.0
            )
            .unwrap()
            .kappa,
            Modulator::constant(1.3)
        );
        for n in [2.0, 8.0, 32.0] {
            let m = mollify_kernel(&model, n).unwrap();
            assert!(m.beta_moment_bound() <= model.beta_moment_bound());
            let worst = (0..200)
                .map(|j| {
                    let x = [j as f64 * 0.05];
                    (m.kappa.eval(&x) - model.kappa.eval(&x)).abs()
                })
                .fold(0.0, f64::max);
            assert!(worst <= model.kappa.lipschitz() / n);
        }
    }

    #[test]
    fn constant_modulators_reduce_to_smoothing_error() {
        let model = JumpKernelModel::new(
            1,
            0.5,
            SmallJumpLaw::isotropic(1, 0.3, 2).unwrap(),
            Modulator::constant(1.0),
            Modulator::zero(),
            vec![],
        )
        .unwrap();
        let f = TestFunction::Cosine {
            wavevector: vec![1.0],
            phase: 0.2,
        };
        let grid = Grid::new(1, 128, 4.0 * PI).unwrap();
        // with x-independent modulators M_n = M, so the difference is K(f - f * φ_n)
        let row = mollify_error(&f, &model, false, 4.0, grid).unwrap();
        let phi = Mollifier::new(1).unwrap();
        let field = f.field(grid);
        let k = KernelOperator::new(&model, grid, false).unwrap();
        let direct = k
            .apply(&field.sub(&phi.convolve(4.0, &field)).unwrap())
            .unwrap()
            .sup_norm();
        assert_abs_diff_eq!(row.measured, direct, epsilon = 1e-13);
        assert!(row.measured <= row.bound);
        // and it vanishes on constants
        let c = TestFunction::Cosine {
            wavevector: vec![0.0],
            phase: 0.0,
        };
        assert!(
            mollify_error(&c, &model, false, 4.0, grid)
                .unwrap()
                .measured
                < 1e-14
        );
    }

    #[test]
    fn c_norms() {
        let f = TestFunction::Cosine {
            wavevector: vec![2.0],
            phase: 0.0,
        };
        assert_eq!(f.c_norm(3), 1.0 + 2.0 + 4.0 + 8.0);
        let g = TestFunction::Gaussian {
            center: vec![0.0],
            width: 1.0,
        };
        assert_abs_diff_eq!(g.c_norm(1), 1.0 + (-0.5f64).exp(), epsilon = 1e-15);
        let sup3 = (0..20000)
            .map(|j| {
                let u = j as f64 * 1e-3 - 10.0;
                ((u * u * u - 3.0 * u) * (-u * u / 2.0).exp()).abs()
            })
            .fold(0.0, f64::max);
        assert_abs_diff_eq!(hermite_sup(3), sup3, epsilon = 1e-6);
        assert_eq!(multi_indices(2, 2).len(), 6);
    }
}
