//! Heat kernels by lattice Fourier inversion, plus the fractional and
//! gradient multipliers and `L^r` decay measurements built on them.
//!
//! Convention: `p_t(x) = (2π)^{-d} ∫ e^{-iu·x} e^{-tψ(u)} du`. On a lattice
//! this becomes `(2L)^{-d} Σ_k e^{-tψ(v_k)} e^{-iv_k·x_j}`, i.e. one FFT.

use crate::error::{Error, Result};
use crate::lattice::{fft_nd, Grid, Interp, LatticeField};
use crate::par;
use crate::symbol::{norm, unit_sphere_samples, Exponent, StablePart};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Fourier multiplier applied before inversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Multiplier {
    Identity,
    /// `|∂|^δ`, multiplier `-|u|^δ`. `δ = 0` is treated as the identity
    /// (the plain density), not as `-p_t`.
    Fractional(f64),
    /// `∂_i`, multiplier `-i u_i`.
    Gradient(usize),
    /// `|∂|^δ ∂_i`, multiplier `|u|^δ i u_i`.
    FractionalGradient(f64, usize),
    /// `f ↦ f(· + z) - f`, multiplier `e^{-iu·z} - 1` (unused trailing
    /// components are ignored).
    Difference([f64; 3]),
    /// `f ↦ ∂_i f(· + z) - ∂_i f`.
    GradientDifference([f64; 3], usize),
}

impl Multiplier {
    pub fn validate(&self, dim: usize) -> Result<()> {
        let check_delta = |d: f64| {
            if (0.0..1.0).contains(&d) {
                Ok(())
            } else {
                Err(Error::Domain(format!(
                    "fractional order {d} outside [0, 1)"
                )))
            }
        };
        let check_axis = |i: usize| {
            if i < dim {
                Ok(())
            } else {
                Err(Error::Domain(format!(
                    "axis {i} out of range for dimension {dim}"
                )))
            }
        };
        match *self {
            Multiplier::Identity => Ok(()),
            Multiplier::Fractional(d) => check_delta(d),
            Multiplier::Gradient(i) => check_axis(i),
            Multiplier::FractionalGradient(d, i) => check_delta(d).and(check_axis(i)),
            Multiplier::Difference(_) => Ok(()),
            Multiplier::GradientDifference(_, i) => check_axis(i),
        }
    }

    pub fn eval(&self, u: &[f64]) -> Complex64 {
        match *self {
            Multiplier::Identity => Complex64::new(1.0, 0.0),
            Multiplier::Fractional(0.0) => Complex64::new(1.0, 0.0),
            Multiplier::Fractional(d) => Complex64::new(-norm(u).powf(d), 0.0),
            Multiplier::Gradient(i) => Complex64::new(0.0, -u[i]),
            Multiplier::FractionalGradient(d, i) => {
                let f = if d == 0.0 { 1.0 } else { -norm(u).powf(d) };
                Complex64::new(0.0, -u[i]) * f
            }
            Multiplier::Difference(z) => shift_factor(u, &z),
            Multiplier::GradientDifference(z, i) => {
                Complex64::new(0.0, -u[i]) * shift_factor(u, &z)
            }
        }
    }

    /// Multipliers without the symmetry `m(-u) = conj m(u)` at Nyquist.
    fn drops_nyquist(&self) -> bool {
        !matches!(self, Multiplier::Identity | Multiplier::Fractional(_))
    }

    /// Order of growth in `|u|`, used for the resolution guard.
    fn order(&self) -> f64 {
        match *self {
            Multiplier::Identity => 0.0,
            Multiplier::Fractional(d) => d,
            Multiplier::Gradient(_) => 1.0,
            Multiplier::FractionalGradient(d, _) => d + 1.0,
            Multiplier::Difference(_) => 0.0,
            Multiplier::GradientDifference(..) => 1.0,
        }
    }
}

fn shift_factor(u: &[f64], z: &[f64; 3]) -> Complex64 {
    let s: f64 = u.iter().zip(z.iter()).map(|(a, b)| a * b).sum();
    Complex64::from_polar(1.0, -s) - 1.0
}

/// Lattice and guard settings for one inversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InversionSpec {
    pub grid: Grid,
    /// Required `|e^{-tψ(u)}|` on the edge of the frequency box.
    pub tail_tol: f64,
    /// Required `max |f(boundary)| / max |f|`.
    pub boundary_tol: f64,
    /// Double the extent (same spacing) until the boundary guard passes.
    pub auto_extent: bool,
    /// Cap on lattice points when padding.
    pub max_points: usize,
}

impl InversionSpec {
    pub fn new(grid: Grid) -> Self {
        Self {
            grid,
            tail_tol: 1e-12,
            boundary_tol: 1e-6,
            auto_extent: true,
            max_points: 1 << 22,
        }
    }

    pub fn with_boundary_tol(mut self, tol: f64) -> Self {
        self.boundary_tol = tol;
        self
    }

    pub fn fixed_extent(mut self) -> Self {
        self.auto_extent = false;
        self
    }
}

/// Guard values and sanity numbers recorded with every inversion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub t: f64,
    pub requested: Grid,
    pub grid: Grid,
    pub padding: usize,
    pub tail: f64,
    pub boundary_ratio: f64,
    pub mass: f64,
    /// Most negative value (0 when the field is non-negative).
    pub ringing: f64,
    /// Largest discarded imaginary part.
    pub imag_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Inverted {
    pub field: LatticeField,
    pub diagnostics: Diagnostics,
}

impl Inverted {
    /// Value at an arbitrary point by interpolation on the effective lattice.
    pub fn at(&self, x: &[f64], rule: Interp) -> f64 {
        self.field.eval(x, rule)
    }

    /// Values restricted to the originally requested window.
    pub fn window(&self) -> LatticeField {
        let g = self.diagnostics.grid;
        let r = self.diagnostics.requested;
        if g == r {
            return self.field.clone();
        }
        let offset = (g.n - r.n) / 2;
        let values = (0..r.len())
            .map(|i| {
                let m = r.unflatten(i);
                let mut src = [0usize; 3];
                for ax in 0..r.dim {
                    src[ax] = m[ax] + offset;
                }
                self.field.values[g.flatten(&src)]
            })
            .collect();
        LatticeField { grid: r, values }
    }
}

/// Largest `|e^{-tψ(u)}| max(1, |m(u)|)` over the faces of the frequency box.
fn frequency_tail<E: Exponent + ?Sized>(
    exponent: &E,
    t: f64,
    mult: Multiplier,
    grid: &Grid,
) -> f64 {
    let n = grid.n;
    let edges = [n / 2, n / 2 - 1];
    let face_points: Vec<Vec<f64>> = match grid.dim {
        1 => edges.iter().map(|&k| vec![grid.freq(k)]).collect(),
        2 => {
            let mut pts = Vec::with_capacity(4 * n);
            for &e in &edges {
                for k in 0..n {
                    pts.push(vec![grid.freq(e), grid.freq(k)]);
                    pts.push(vec![grid.freq(k), grid.freq(e)]);
                }
            }
            pts
        }
        _ => {
            let mut pts = Vec::with_capacity(6 * n * n);
            for &e in &edges {
                for k in 0..n {
                    for l in 0..n {
                        pts.push(vec![grid.freq(e), grid.freq(k), grid.freq(l)]);
                        pts.push(vec![grid.freq(k), grid.freq(e), grid.freq(l)]);
                        pts.push(vec![grid.freq(k), grid.freq(l), grid.freq(e)]);
                    }
                }
            }
            pts
        }
    };
    par::map_slice(&face_points, |u| {
        (-t * exponent.eval(u).re).exp() * mult.eval(u).norm().max(1.0)
    })
    .into_iter()
    .fold(0.0, f64::max)
}

fn suggest_n<E: Exponent + ?Sized>(
    exponent: &E,
    t: f64,
    mult: Multiplier,
    grid: &Grid,
    tol: f64,
) -> usize {
    let mut g = *grid;
    while g.n < 1 << 26 {
        g.n *= 2;
        if frequency_tail(exponent, t, mult, &g) < tol {
            return g.n;
        }
    }
    g.n
}

fn boundary_ratio(field: &LatticeField) -> f64 {
    let g = field.grid;
    let peak = field.sup_norm();
    if peak == 0.0 {
        return 0.0;
    }
    let edge = (0..g.len())
        .filter(|&i| {
            let m = g.unflatten(i);
            (0..g.dim).any(|a| m[a] == 0)
        })
        .map(|i| field.values[i].abs())
        .fold(0.0, f64::max);
    edge / peak
}

fn invert_once<E: Exponent + ?Sized>(
    exponent: &E,
    t: f64,
    mult: Multiplier,
    grid: Grid,
) -> (LatticeField, f64) {
    let odd = mult.drops_nyquist();
    let mut spec: Vec<Complex64> = par::map_range(grid.len(), |i| {
        if odd && grid.is_nyquist(i) {
            return Complex64::new(0.0, 0.0);
        }
        let u = grid.frequency(i);
        let v = (-t * exponent.eval(&u)).exp() * mult.eval(&u);
        if grid.index_parity(i) {
            -v
        } else {
            v
        }
    });
    fft_nd(&grid, &mut spec, false);
    let scale = (2.0 * grid.half_extent).powi(-(grid.dim as i32));
    let imag = spec.iter().fold(0.0f64, |m, c| m.max((c.im * scale).abs()));
    let values = spec.into_iter().map(|c| c.re * scale).collect();
    (LatticeField { grid, values }, imag)
}

/// Inverts `m(u) e^{-tψ(u)}` on the lattice of `spec`, padding the extent if
/// the boundary guard demands it.
pub fn invert<E: Exponent + ?Sized>(
    exponent: &E,
    t: f64,
    mult: Multiplier,
    spec: &InversionSpec,
) -> Result<Inverted> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("time t = {t} must be positive")));
    }
    if exponent.dim() != spec.grid.dim {
        return Err(Error::Shape(format!(
            "exponent in dimension {} on a {}-d lattice",
            exponent.dim(),
            spec.grid.dim
        )));
    }
    mult.validate(spec.grid.dim)?;
    let tail = frequency_tail(exponent, t, mult, &spec.grid);
    if !(tail < spec.tail_tol) {
        return Err(Error::Resolution {
            t,
            tail,
            suggested_n: suggest_n(exponent, t, mult, &spec.grid, spec.tail_tol),
        });
    }
    let mut grid = spec.grid;
    let mut padding = 1;
    loop {
        let (field, imag) = invert_once(exponent, t, mult, grid);
        let ratio = boundary_ratio(&field);
        if ratio <= spec.boundary_tol {
            let mass = field.integral();
            let ringing = field.min_value().min(0.0);
            let diagnostics = Diagnostics {
                t,
                requested: spec.grid,
                grid,
                padding,
                tail,
                boundary_ratio: ratio,
                mass,
                ringing,
                imag_residual: imag,
            };
            return Ok(Inverted { field, diagnostics });
        }
        let next = grid.len() << grid.dim;
        if !spec.auto_extent || next > spec.max_points {
            return Err(Error::Extent {
                boundary: ratio,
                tolerance: spec.boundary_tol,
            });
        }
        grid = grid.padded(2);
        padding *= 2;
    }
}

/// The heat kernel `p_t`.
pub fn invert_density<E: Exponent + ?Sized>(
    exponent: &E,
    t: f64,
    spec: &InversionSpec,
) -> Result<Inverted> {
    invert(exponent, t, Multiplier::Identity, spec)
}

/// `|∂|^δ p_t`; `δ = 0` returns `p_t` itself.
pub fn fractional_apply<E: Exponent + ?Sized>(
    exponent: &E,
    delta: f64,
    t: f64,
    spec: &InversionSpec,
) -> Result<Inverted> {
    invert(exponent, t, Multiplier::Fractional(delta), spec)
}

/// `∂_i p_t`.
pub fn gradient_apply<E: Exponent + ?Sized>(
    exponent: &E,
    axis: usize,
    t: f64,
    spec: &InversionSpec,
) -> Result<Inverted> {
    invert(exponent, t, Multiplier::Gradient(axis), spec)
}

/// Sup over the requested window of the scaling-law residual between `p̃_t`
/// and the rescaled, interpolated `p̃₁`.
///
/// The two kernels are inverted independently; `p̃₁` lives on the lattice
/// similar to the one of `p̃_t` (same `n`, extent scaled by the time scale).
/// Periodic images then map onto each other under the scaling, so lattice
/// aliasing cancels and only the shift needs interpolation.
pub fn scaling_check(
    stable: &StablePart,
    t: f64,
    spec: &InversionSpec,
    rule: Interp,
) -> Result<f64> {
    let alpha = stable.alpha();
    let pt = invert_density(stable, t, spec)?;
    let scale = if alpha == 1.0 {
        1.0 / t
    } else {
        t.powf(-1.0 / alpha)
    };
    let g = pt.diagnostics.grid;
    let similar = InversionSpec {
        grid: Grid::new(g.dim, g.n, g.half_extent * scale)?,
        boundary_tol: 10.0 * spec.boundary_tol,
        ..*spec
    }
    .fixed_extent();
    let p1 = invert_density(stable, 1.0, &similar)?;
    let d = stable.dim() as f64;
    let gamma = stable.gamma();
    let window = pt.window();
    let wg = window.grid;
    let residuals = par::map_range(wg.len(), |i| {
        let x = wg.position(i);
        let (pref, y): (f64, Vec<f64>) = if alpha == 1.0 {
            let y = x
                .iter()
                .zip(gamma)
                .map(|(xi, gi)| xi / t - gi * t.ln())
                .collect();
            (t.powf(-d), y)
        } else {
            let shift = 1.0 - t.powf(1.0 - 1.0 / alpha);
            let y = x
                .iter()
                .zip(gamma)
                .map(|(xi, gi)| scale * xi + shift * gi)
                .collect();
            (t.powf(-d / alpha), y)
        };
        (window.values[i] - pref * p1.at(&y, rule)).abs()
    });
    Ok(residuals.into_iter().fold(0.0, f64::max))
}

/// Sup-norm gap between `p_{t+s}` and the lattice convolution `p_t ⊛ p_s`.
pub fn chapman_kolmogorov<E: Exponent + ?Sized>(
    exponent: &E,
    t: f64,
    s: f64,
    spec: &InversionSpec,
) -> Result<f64> {
    let wide = invert_density(exponent, t + s, spec)?;
    let on_wide = InversionSpec {
        grid: wide.diagnostics.grid,
        ..*spec
    }
    .fixed_extent();
    let pt = invert_density(exponent, t, &on_wide)?;
    let ps = invert_density(exponent, s, &on_wide)?;
    let conv = pt.field.convolve(&ps.field)?;
    Ok(conv.sub(&wide.field)?.sup_norm())
}

/// Picks a lattice adapted to the time scale: spacing from the frequency
/// radius where `|e^{-tψ}|` falls below `tail_tol`, `n` points per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AutoLattice {
    pub dim: usize,
    pub n: usize,
    pub tail_tol: f64,
    pub boundary_tol: f64,
    pub max_points: usize,
}

impl AutoLattice {
    pub fn new(dim: usize, n: usize) -> Self {
        Self {
            dim,
            n,
            tail_tol: 1e-12,
            boundary_tol: 1e-6,
            max_points: 1 << 22,
        }
    }

    pub fn with_boundary_tol(mut self, tol: f64) -> Self {
        self.boundary_tol = tol;
        self
    }

    pub fn spec_for<E: Exponent + ?Sized>(
        &self,
        exponent: &E,
        t: f64,
        mult: Multiplier,
    ) -> Result<InversionSpec> {
        let target = -self.tail_tol.ln();
        let directions = unit_sphere_samples(self.dim, 32);
        let mut radius: f64 = 0.0;
        for e in &directions {
            let decay = |r: f64| {
                let u: Vec<f64> = e.iter().map(|c| c * r).collect();
                t * exponent.eval(&u).re - (mult.order() * r.ln()).max(0.0)
            };
            let mut hi = 1.0;
            let mut guard = 0;
            while decay(hi) < target {
                hi *= 2.0;
                guard += 1;
                if guard > 200 {
                    return Err(Error::Resolution {
                        t,
                        tail: 1.0,
                        suggested_n: usize::MAX,
                    });
                }
            }
            let mut lo = 0.0;
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if decay(mid) < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            radius = radius.max(hi);
        }
        // a 5% margin keeps the box faces strictly beyond the decay radius
        let h = std::f64::consts::PI / (1.05 * radius);
        let grid = Grid::new(self.dim, self.n, 0.5 * self.n as f64 * h)?;
        Ok(InversionSpec {
            grid,
            tail_tol: self.tail_tol,
            boundary_tol: self.boundary_tol,
            auto_extent: true,
            max_points: self.max_points,
        })
    }
}

/// Log-log least-squares fit of `t ↦ ‖m(∂) p_t‖_{L^r}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub slope: f64,
    /// `exp(intercept)`: the fitted constant in `‖·‖ ≈ c t^{slope}`.
    pub constant: f64,
    pub samples: Vec<(f64, f64)>,
}

pub fn decay_exponent_fit<E: Exponent + ?Sized>(
    exponent: &E,
    mult: Multiplier,
    r: f64,
    t_list: &[f64],
    lattice: &AutoLattice,
) -> Result<DecayFit> {
    if t_list.len() < 4 {
        return Err(Error::Domain(format!(
            "decay fit needs at least 4 times, got {}",
            t_list.len()
        )));
    }
    let mut samples = Vec::with_capacity(t_list.len());
    for &t in t_list {
        let spec = lattice.spec_for(exponent, t, mult)?;
        let field = invert(exponent, t, mult, &spec)?;
        samples.push((t, field.field.lr_norm(r)?));
    }
    let (slope, intercept) = least_squares(
        &samples
            .iter()
            .map(|(t, v)| (t.ln(), v.ln()))
            .collect::<Vec<_>>(),
    );
    Ok(DecayFit {
        slope,
        constant: intercept.exp(),
        samples,
    })
}

/// Ordinary least squares `y ≈ a x + b`; returns `(a, b)`.
pub fn least_squares(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let a = sxy / sxx;
    (a, my - a * mx)
}

/// The decay rate `(d/r - δ - d)/α` (plus `-1/α` for a gradient).
pub fn predicted_slope(dim: usize, alpha: f64, r: f64, mult: Multiplier) -> f64 {
    let d = dim as f64;
    let (delta, grad) = match mult {
        Multiplier::Identity => (0.0, 0.0),
        Multiplier::Fractional(x) => (x, 0.0),
        Multiplier::Gradient(_) => (0.0, 1.0),
        Multiplier::FractionalGradient(x, _) => (x, 1.0),
        Multiplier::Difference(_) => (0.0, 0.0),
        Multiplier::GradientDifference(..) => (0.0, 1.0),
    };
    (d / r - delta - grad - d) / alpha
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol::SpectralMeasure;
    use approx::assert_abs_diff_eq;
    use statrs::function::gamma::gamma;
    use std::f64::consts::PI;

    fn cauchy() -> StablePart {
        StablePart::new(1.0, SpectralMeasure::symmetric(&[vec![1.0]], 1.0).unwrap()).unwrap()
    }

    #[test]
    fn cauchy_density_matches_closed_form() {
        let spec = InversionSpec::new(Grid::new(1, 1 << 14, 64.0).unwrap());
        let p = invert_density(&cauchy(), 1.0, &spec).unwrap();
        let w = p.window();
        let err = (0..w.grid.len())
            .filter(|&i| w.grid.node(i).abs() <= 10.0)
            .map(|i| {
                let x = w.grid.node(i);
                (w.values[i] - 1.0 / (PI * PI + x * x)).abs()
            })
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "sup error {err}");
        assert_abs_diff_eq!(p.diagnostics.mass, 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(p.at(&[0.0], Interp::Cubic), 1.0 / (PI * PI), epsilon = 1e-6);
    }

    #[test]
    fn gaussian_density_and_gradient() {
        let e = crate::symbol::FnExponent::new(1, |u: &[f64]| {
            Complex64::new(0.5 * u[0] * u[0], -0.3 * u[0])
        });
        let spec = InversionSpec::new(Grid::new(1, 1024, 16.0).unwrap());
        let p = invert_density(&e, 1.0, &spec).unwrap();
        for i in (0..1024).step_by(37) {
            let x = p.field.grid.node(i);
            let exact = (-(x - 0.3f64).powi(2) / 2.0).exp() / (2.0 * PI).sqrt();
            assert_abs_diff_eq!(p.field.values[i], exact, epsilon = 1e-12);
        }
        let centered =
            crate::symbol::FnExponent::new(1, |u: &[f64]| Complex64::new(0.5 * u[0] * u[0], 0.0));
        let g = gradient_apply(&centered, 0, 1.0, &spec).unwrap();
        assert_abs_diff_eq!(
            g.at(&[1.0], Interp::Cubic),
            -(-0.5f64).exp() / (2.0 * PI).sqrt(),
            epsilon = 1e-8
        );
        assert_abs_diff_eq!(g.at(&[0.0], Interp::Cubic), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn fractional_half_at_origin() {
        // |∂|^δ p has |x|^{-1-δ} tails, so the lattice is coarse and wide
        let spec = InversionSpec::new(Grid::new(1, 1 << 12, 512.0).unwrap());
        let f = fractional_apply(&cauchy(), 0.5, 1.0, &spec).unwrap();
        let exact = -gamma(1.5) / PI.powf(2.5);
        assert_abs_diff_eq!(f.at(&[0.0], Interp::Cubic), exact, epsilon = 1e-6);
        let zero = fractional_apply(&cauchy(), 0.0, 1.0, &spec).unwrap();
        assert!(zero.at(&[0.0], Interp::Cubic) > 0.0);
    }

    #[test]
    fn resolution_guard_suggests_n() {
        let spec = InversionSpec::new(Grid::new(1, 64, 64.0).unwrap());
        match invert_density(&cauchy(), 0.01, &spec) {
            Err(Error::Resolution { suggested_n, .. }) => assert!(suggested_n > 64),
            other => panic!("expected resolution error, got {other:?}"),
        }
    }

    #[test]
    fn cauchy_l2_norm() {
        let spec = InversionSpec::new(Grid::new(1, 1 << 14, 64.0).unwrap());
        let p = invert_density(&cauchy(), 1.0, &spec).unwrap();
        assert_abs_diff_eq!(
            p.field.lr_norm(2.0).unwrap(),
            (1.0 / (2.0 * PI * PI)).sqrt(),
            epsilon = 1e-6
        );
        assert_abs_diff_eq!(p.field.lr_norm(1.0).unwrap(), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn scaling_identity_trivial_and_symmetric() {
        let spec = InversionSpec::new(Grid::new(1, 1 << 14, 64.0).unwrap());
        assert!(scaling_check(&cauchy(), 1.0, &spec, Interp::Cubic).unwrap() < 1e-14);
        assert!(scaling_check(&cauchy(), 0.25, &spec, Interp::Cubic).unwrap() < 1e-5);
    }

    #[test]
    fn chapman_kolmogorov_cauchy() {
        let spec = InversionSpec::new(Grid::new(1, 1 << 12, 32.0).unwrap()).with_boundary_tol(1e-4);
        assert!(chapman_kolmogorov(&cauchy(), 0.5, 0.7, &spec).unwrap() < 1e-5);
    }

    #[test]
    fn predicted_slopes() {
        assert_abs_diff_eq!(predicted_slope(1, 1.0, 2.0, Multiplier::Identity), -0.5);
        assert_abs_diff_eq!(
            predicted_slope(1, 1.5, 1.0, Multiplier::Fractional(0.4)),
            -0.4 / 1.5
        );
        assert!(Multiplier::Fractional(1.2).validate(1).is_err());
        assert!(Multiplier::Gradient(1).validate(1).is_err());
    }
}
