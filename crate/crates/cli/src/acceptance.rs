//! The acceptance suite: one function per criterion, each returning a
//! verdict with the measured numbers that decided it.

use anyhow::Result;
use levy_core::approx::{
    mollify_kernel, mollify_study, truncate_kernel, truncation_error, TestFunction,
};
use levy_core::density::{
    decay_exponent_fit, fractional_apply, invert_density, predicted_slope, scaling_check,
    AutoLattice, InversionSpec, Multiplier,
};
use levy_core::flagship;
use levy_core::kernel::JumpKernelModel;
use levy_core::lattice::{Grid, Interp, LatticeField};
use levy_core::perturb::{find_lambda0, ContractionCurve, KrylovNorms, Perturbation};
use levy_core::resolvent::{
    gamma_ceiling, holder_moduli, komatsu_check, Extension, ModulusProbe, SpaceTimeFunction,
    SpectralGenerator,
};
use levy_core::simulate::{
    dynkin_residual, krylov_mc_check, mc_vs_neumann, Sampler, SamplerModel, StableScheme,
    TrigPolynomial,
};
use levy_core::stats::ks_test;
use levy_core::symbol::{Atom, LevyTriple, SpectralMeasure, StablePart};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use statrs::distribution::{Cauchy, ContinuousCDF, Normal};
use std::f64::consts::PI;
use std::time::Instant;

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub id: u32,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl Verdict {
    pub fn line(&self) -> String {
        format!(
            "[{}] {:>2} {:<32} {} ({:.1} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.detail,
            self.seconds
        )
    }
}

type Outcome = Result<(bool, String)>;

pub struct Criterion {
    pub id: u32,
    pub title: &'static str,
    run: fn() -> Outcome,
}

impl Criterion {
    pub fn evaluate(&self) -> Verdict {
        let started = Instant::now();
        let (passed, detail) = match (self.run)() {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e:#}")),
        };
        Verdict {
            id: self.id,
            title: self.title,
            passed,
            detail,
            seconds: started.elapsed().as_secs_f64(),
        }
    }
}

pub fn criteria() -> Vec<Criterion> {
    vec![
        Criterion {
            id: 1,
            title: "Cauchy oracle",
            run: cauchy_oracle,
        },
        Criterion {
            id: 2,
            title: "scaling law",
            run: scaling_law,
        },
        Criterion {
            id: 3,
            title: "L^r decay slopes",
            run: decay_slopes,
        },
        Criterion {
            id: 4,
            title: "Komatsu identity",
            run: komatsu_identity,
        },
        Criterion {
            id: 5,
            title: "resolvent",
            run: resolvent,
        },
        Criterion {
            id: 6,
            title: "Hölder moduli",
            run: holder,
        },
        Criterion {
            id: 7,
            title: "flagship contraction",
            run: contraction,
        },
        Criterion {
            id: 8,
            title: "mollification and truncation",
            run: mollification,
        },
        Criterion {
            id: 9,
            title: "sampler calibration",
            run: sampler_calibration,
        },
        Criterion {
            id: 10,
            title: "flagship cross-validation",
            run: cross_validation,
        },
        Criterion {
            id: 11,
            title: "Dynkin identity",
            run: dynkin,
        },
        Criterion {
            id: 12,
            title: "Krylov",
            run: krylov,
        },
    ]
}

/// Evaluates the criteria whose ids are in `only` (all when empty).
pub fn run(only: &[u32]) -> Vec<Verdict> {
    criteria()
        .iter()
        .filter(|c| only.is_empty() || only.contains(&c.id))
        .map(Criterion::evaluate)
        .collect()
}

fn asymmetric_1d(alpha: f64, plus: f64, minus: f64) -> Result<StablePart> {
    let mu = SpectralMeasure::new(vec![
        Atom {
            direction: vec![1.0],
            weight: plus,
        },
        Atom {
            direction: vec![-1.0],
            weight: minus,
        },
    ])?;
    Ok(StablePart::new(alpha, mu)?)
}

fn anisotropic_2d(alpha: f64) -> Result<StablePart> {
    let s = 0.5f64.sqrt();
    let mu = SpectralMeasure::new(vec![
        Atom {
            direction: vec![1.0, 0.0],
            weight: 1.5,
        },
        Atom {
            direction: vec![-1.0, 0.0],
            weight: 0.5,
        },
        Atom {
            direction: vec![s, s],
            weight: 1.0,
        },
        Atom {
            direction: vec![0.0, -1.0],
            weight: 0.8,
        },
    ])?;
    Ok(StablePart::new(alpha, mu)?)
}

fn symmetric_cauchy() -> Result<StablePart> {
    Ok(StablePart::new(
        1.0,
        SpectralMeasure::symmetric(&[vec![1.0]], 1.0)?,
    )?)
}

fn cauchy_oracle() -> Outcome {
    let started = Instant::now();
    let spec = InversionSpec::new(Grid::new(1, 1 << 14, 64.0)?);
    let p = invert_density(&symmetric_cauchy()?, 1.0, &spec)?;
    let elapsed = started.elapsed().as_secs_f64();
    let w = p.window();
    let err = (0..w.grid.len())
        .filter(|&i| w.grid.node(i).abs() <= 10.0)
        .map(|i| (w.values[i] - 1.0 / (PI * PI + w.grid.node(i).powi(2))).abs())
        .fold(0.0, f64::max);
    Ok((
        err < 1e-6 && elapsed < 1.0,
        format!("sup error {err:.2e} < 1e-6, runtime {elapsed:.3} s < 1 s"),
    ))
}

fn scaling_law() -> Outcome {
    let spec = InversionSpec::new(Grid::new(1, 1 << 14, 64.0)?).with_boundary_tol(1e-3);
    let mut worst1: f64 = 0.0;
    for alpha in [0.7, 1.0, 1.5] {
        let stable = asymmetric_1d(alpha, 2.0, 1.0)?;
        for t in [0.25, 4.0] {
            worst1 = worst1.max(scaling_check(&stable, t, &spec, Interp::Cubic)?);
        }
    }
    let spec2 = InversionSpec::new(Grid::new(2, 256, 16.0)?).with_boundary_tol(1e-2);
    let r2 = scaling_check(&anisotropic_2d(1.5)?, 4.0, &spec2, Interp::Cubic)?;
    Ok((
        worst1 < 1e-5 && r2 < 1e-4,
        format!("d=1 worst residual {worst1:.2e} < 1e-5, d=2 residual {r2:.2e} < 1e-4"),
    ))
}

fn decay_slopes() -> Outcome {
    let times: Vec<f64> = (0..9).map(|k| 10f64.powf(-2.0 + 0.5 * k as f64)).collect();
    let lattice = AutoLattice::new(1, 1 << 12);
    let cases = [
        (symmetric_cauchy()?, Multiplier::Identity, 2.0),
        (
            asymmetric_1d(1.5, 2.0, 1.0)?,
            Multiplier::Fractional(0.4),
            1.0,
        ),
        (
            asymmetric_1d(1.5, 2.0, 1.0)?,
            Multiplier::FractionalGradient(0.3, 0),
            1.0,
        ),
        (asymmetric_1d(1.5, 2.0, 1.0)?, Multiplier::Gradient(0), 2.0),
        (asymmetric_1d(0.7, 2.0, 1.0)?, Multiplier::Identity, 3.0),
    ];
    let mut worst: f64 = 0.0;
    for (stable, mult, r) in cases {
        let fit = decay_exponent_fit(&stable, mult, r, &times, &lattice)?;
        let want = predicted_slope(1, stable.alpha(), r, mult);
        worst = worst.max((fit.slope / want - 1.0).abs());
    }
    Ok((
        worst < 0.02,
        format!(
            "worst relative slope error {:.3}% < 2% over t in [1e-2, 1e2]",
            100.0 * worst
        ),
    ))
}

fn komatsu_identity() -> Outcome {
    let z: Vec<f64> = (0..=8)
        .map(|j| 10f64.powf(-1.0 + 0.25 * j as f64))
        .collect();
    let mut worst: f64 = 0.0;
    for dim in [1, 2] {
        for delta in [0.3, 0.7] {
            let c = komatsu_check(delta, dim, &z)?;
            let (lo, hi) = c
                .iter()
                .fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
            worst = worst.max(hi / lo - 1.0);
        }
    }
    Ok((
        worst < 0.01,
        format!(
            "worst spread of c6(z) over |z| in [0.1, 10] {:.2e} < 1%",
            worst
        ),
    ))
}

fn reference_stable() -> Result<StablePart> {
    asymmetric_1d(1.2, 1.5, 1.0)
}

fn random_field(grid: Grid, rng: &mut ChaCha8Rng, smooth: bool) -> Result<LatticeField> {
    if smooth {
        let modes: Vec<(f64, f64, f64)> = (0..6)
            .map(|_| {
                (
                    rng.random_range(-1.0..1.0),
                    rng.random_range(1..8) as f64,
                    rng.random_range(0.0..6.3),
                )
            })
            .collect();
        let step = grid.freq_step();
        Ok(LatticeField::from_fn(grid, |x| {
            modes
                .iter()
                .map(|(a, k, ph)| a * (k * step * x[0] + ph).cos())
                .sum()
        }))
    } else {
        Ok(LatticeField::new(
            grid,
            (0..grid.len())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
        )?)
    }
}

fn resolvent() -> Outcome {
    let s = reference_stable()?;
    let grid = Grid::new(1, 1024, 32.0)?;
    let gen = SpectralGenerator::new(&s, grid)?;
    let one = SpaceTimeFunction::frozen(LatticeField::from_fn(grid, |_| 1.0));
    let mut const_err: f64 = 0.0;
    for lambda in [0.5, 2.0, 10.0] {
        let r = gen.apply_r(lambda, &one, 0.0)?;
        const_err = const_err.max(
            r.values
                .iter()
                .map(|v| (v - 1.0 / lambda).abs())
                .fold(0.0, f64::max),
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let times: Vec<f64> = (0..=20).map(|k| 0.1 * k as f64).collect();
    let mut excess = f64::NEG_INFINITY;
    for k in 0..20 {
        let fields = times
            .iter()
            .map(|_| random_field(grid, &mut rng, k % 2 == 0))
            .collect::<Result<Vec<_>>>()?;
        let g = SpaceTimeFunction::new(times.clone(), fields, Extension::Zero)?;
        let r = gen.apply_r(2.0, &g, 0.3)?;
        excess = excess.max(r.sup_norm() - g.sup_norm() / 2.0);
    }
    let grid = Grid::new(1, 256, 4.0 * PI)?;
    let gen = SpectralGenerator::new(&s, grid)?;
    let times: Vec<f64> = (0..=400).map(|k| 0.005 * k as f64).collect();
    let eta = |t: f64| {
        if t < 2.0 {
            (PI * t / 2.0).sin().powi(2)
        } else {
            0.0
        }
    };
    let g = SpaceTimeFunction::from_fn(grid, times, Extension::Zero, |t, x| {
        eta(t) * (0.5 * x[0]).cos()
    })?;
    let mut residual: f64 = 0.0;
    for lambda in [2.0, 4.0] {
        residual = residual.max(gen.identity_residual(lambda, &g, 1e-3)?);
    }
    Ok((
        const_err < 1e-8 && excess <= 1e-8 && residual < 1e-4,
        format!(
            "|R1 - 1/lambda| {const_err:.1e} < 1e-8, max(|Rg| - |g|/lambda) {excess:.1e} <= 1e-8, equation residual {residual:.1e} < 1e-4"
        ),
    ))
}

fn holder() -> Outcome {
    let s = reference_stable()?;
    let delta = 0.5;
    let spec = InversionSpec::new(Grid::new(1, 1 << 14, 256.0)?);
    let c4 = fractional_apply(&s, delta, 1.0, &spec)?
        .field
        .lr_norm(1.0)?;
    let moduli = holder_moduli(
        &s,
        &[2.0, 4.0, 8.0, 16.0],
        delta,
        false,
        &ModulusProbe::new(1),
    )?;
    let decreasing = moduli.windows(2).all(|w| w[1].difference < w[0].difference);
    let worst = moduli
        .iter()
        .map(|m| m.difference / gamma_ceiling(c4, delta, 1.2, m.lambda))
        .fold(0.0, f64::max);
    let interior = moduli.iter().all(|m| !m.at_edge);
    let values: Vec<String> = moduli
        .iter()
        .map(|m| format!("{:.4}", m.difference))
        .collect();
    Ok((
        decreasing && worst <= 1.0 && interior,
        format!(
            "C_lambda [{}] decreasing: {decreasing}, max C/ceiling {worst:.3} <= 1",
            values.join(", ")
        ),
    ))
}

fn flagship_curve() -> Result<(ContractionCurve, f64, f64)> {
    let curve = ContractionCurve::measure(
        &flagship::stable(),
        &flagship::kernel(),
        &ModulusProbe::new(1),
    )?;
    let grid: Vec<f64> = (0..=14).map(|j| 2f64.powi(j)).collect();
    let l0 = find_lambda0(|l| curve.k(l), &grid)?;
    Ok((curve, l0.lambda0, 2.0 * l0.lambda0))
}

fn flagship_lattice() -> Result<Grid> {
    Ok(Grid::new(1, 512, 8.0 * PI)?)
}

fn random_source(grid: Grid, rng: &mut ChaCha8Rng, times: &[f64]) -> Result<SpaceTimeFunction> {
    let modes: Vec<(f64, f64, f64, f64)> = (0..5)
        .map(|_| {
            (
                rng.random_range(-1.0..1.0),
                rng.random_range(1..24) as f64,
                rng.random_range(0.0..6.3),
                rng.random_range(0.5..3.0),
            )
        })
        .collect();
    let step = grid.freq_step();
    let t_end = *times.last().expect("non-empty time grid");
    Ok(SpaceTimeFunction::from_fn(
        grid,
        times.to_vec(),
        Extension::Zero,
        |t, x| {
            let envelope = (PI * t / t_end).sin();
            modes
                .iter()
                .map(|(a, k, ph, w)| a * envelope * (k * step * x[0] + ph + w * t).cos())
                .sum()
        },
    )?)
}

fn contraction() -> Outcome {
    let (curve, lambda0, lambda) = flagship_curve()?;
    let k = curve.k(lambda)?;
    let grid = flagship_lattice()?;
    let pert = Perturbation::new(&flagship::stable(), &flagship::kernel(), grid)?;
    let times: Vec<f64> = (0..=40).map(|j| 0.01 * j as f64).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst_kr: f64 = 0.0;
    for _ in 0..20 {
        let g = random_source(grid, &mut rng, &times)?;
        worst_kr = worst_kr.max(pert.apply_kr(lambda, &g)?.sup_norm() / g.sup_norm());
    }
    let g = random_source(grid, &mut rng, &times)?;
    let series = pert.neumann(lambda, &g, k, 1e-10)?;
    let ratio = |v: &[f64]| v.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
    let worst_term = ratio(&series.term_norms).max(ratio(&series.source_norms));
    let g_ratio = series.value.sup_norm() * lambda / g.sup_norm();
    Ok((
        k < 0.5 && worst_kr <= k && worst_term <= k + 0.02 && g_ratio <= 2.0,
        format!(
            "lambda0 {lambda0:.3}, k(2 lambda0) {k:.4}; |KRg|/|g| {worst_kr:.4} <= k; term ratios {worst_term:.4} <= k + 0.02; lambda|Gg|/|g| {g_ratio:.3} <= 2"
        ),
    ))
}

fn mollification() -> Outcome {
    let model = flagship::kernel();
    let grid = Grid::new(1, 256, 4.0 * PI)?;
    let mut ok = true;
    let mut worst_ratio: f64 = 0.0;
    let mut worst_slope = f64::NEG_INFINITY;
    for f in [
        TestFunction::Cosine {
            wavevector: vec![1.0],
            phase: 0.0,
        },
        TestFunction::Cosine {
            wavevector: vec![2.0],
            phase: 0.7,
        },
    ] {
        let (rows, slope) = mollify_study(&f, &model, true, &[4.0, 8.0, 16.0, 32.0], grid)?;
        for r in &rows {
            worst_ratio = worst_ratio.max(r.measured / r.bound);
        }
        worst_slope = worst_slope.max(slope);
    }
    ok &= worst_ratio <= 1.0 && worst_slope <= -0.9;
    let f = TestFunction::Cosine {
        wavevector: vec![1.0],
        phase: 0.3,
    };
    let mut trunc_ratio: f64 = 0.0;
    for d in [0.4, 0.2, 0.1, 0.05, 0.025] {
        let r = truncation_error(&f, &model, flagship::ALPHA, d, grid)?;
        trunc_ratio = trunc_ratio.max(r.measured / r.bound);
    }
    ok &= trunc_ratio <= 1.0;
    Ok((
        ok,
        format!(
            "mollified error/bound {worst_ratio:.3} <= 1, slope {worst_slope:.3} <= -0.9; truncation error/bound {trunc_ratio:.3} <= 1"
        ),
    ))
}

fn approximating_kernel(n: f64, delta_cut: f64) -> Result<JumpKernelModel> {
    Ok(truncate_kernel(
        &mollify_kernel(&flagship::kernel(), n)?,
        delta_cut,
    )?)
}

fn terminal(sampler: &Sampler, paths: usize) -> Result<Vec<f64>> {
    Ok(sampler
        .terminal_values(paths, 0.0, &[0.0], 1.0)?
        .into_iter()
        .map(|v| v[0])
        .collect())
}

#[cfg(feature = "parallel")]
fn single_threaded<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    Ok(rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()?
        .install(f))
}

#[cfg(not(feature = "parallel"))]
fn single_threaded<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    Ok(f())
}

fn sampler_calibration() -> Outcome {
    let gauss = Sampler::new(
        SamplerModel::gaussian(DMatrix::from_element(1, 1, 0.5), vec![0.0]),
        None,
        0.05,
        StableScheme::Exact,
        3,
    )?;
    let normal = Normal::new(0.0, 1.0)?;
    let p_gauss = ks_test(&terminal(&gauss, 10_000)?, |x| normal.cdf(x))?.p_value;

    let mu = SpectralMeasure::new(vec![
        Atom {
            direction: vec![1.0],
            weight: 1.0,
        },
        Atom {
            direction: vec![-1.0],
            weight: 1.0,
        },
    ])?;
    let triple = LevyTriple::pure_stable(StablePart::new(1.0, mu)?);
    let cauchy = Cauchy::new(0.0, PI)?;
    let mut p_stable = Vec::new();
    for scheme in [
        StableScheme::Exact,
        StableScheme::compound_poisson_for(1.0, 0.01, true),
    ] {
        let sampler = Sampler::new(SamplerModel::from_triple(&triple), None, 0.01, scheme, 4)?;
        p_stable.push(ks_test(&terminal(&sampler, 10_000)?, |x| cauchy.cdf(x))?.p_value);
    }

    let flag = Sampler::new(
        SamplerModel::from_triple(&flagship::triple()),
        Some(approximating_kernel(16.0, 0.05)?),
        2e-3,
        StableScheme::Exact,
        99,
    )?;
    let again = Sampler::new(
        SamplerModel::from_triple(&flagship::triple()),
        Some(approximating_kernel(16.0, 0.05)?),
        2e-3,
        StableScheme::Exact,
        99,
    )?;
    let same_path =
        flag.sample_path(17, 0.0, &[0.0], 0.5)? == again.sample_path(17, 0.0, &[0.0], 0.5)?;
    let bits = |v: Vec<Vec<f64>>| v.into_iter().map(|x| x[0].to_bits()).collect::<Vec<_>>();
    let many = bits(flag.terminal_values(2_000, 0.0, &[0.0], 0.5)?);
    let serial = bits(single_threaded(|| {
        again.terminal_values(2_000, 0.0, &[0.0], 0.5)
    })??);
    let deterministic = same_path && many == serial;
    let ok = p_gauss > 0.01 && p_stable.iter().all(|&p| p > 0.01) && deterministic;
    Ok((
        ok,
        format!(
            "KS p: gaussian {p_gauss:.3}, cauchy exact {:.3}, cauchy compound Poisson {:.3} (> 0.01); bit-exact reruns: {deterministic}",
            p_stable[0], p_stable[1]
        ),
    ))
}

fn smooth_source(grid: Grid, t_end: f64) -> Result<SpaceTimeFunction> {
    let step = grid.freq_step();
    let times: Vec<f64> = (0..=30).map(|j| t_end * j as f64 / 30.0).collect();
    Ok(SpaceTimeFunction::from_fn(
        grid,
        times,
        Extension::Zero,
        |t, x| {
            let envelope = (PI * t / t_end).sin();
            envelope
                * (0.8 * (8.0 * step * x[0] + 0.4).cos()
                    + 0.5 * (3.0 * step * x[0] - 1.0 + 4.0 * t).sin()
                    + 0.3)
        },
    )?)
}

fn cross_validation() -> Outcome {
    let started = Instant::now();
    let (curve, _, lambda) = flagship_curve()?;
    let k = curve.k(lambda)?;
    let (n, delta_cut) = (16.0, 0.05);
    let model = approximating_kernel(n, delta_cut)?;
    let grid = flagship_lattice()?;
    let pert = Perturbation::new(&flagship::stable(), &model, grid)?;
    let g = smooth_source(grid, 0.3)?;
    let series = pert.neumann(lambda, &g, k, 1e-9)?;
    let residual = pert.series_residual(&series, &g, 1e-4)?;
    let triple = SamplerModel::from_triple(&flagship::triple());
    let fine = Sampler::new(
        triple.clone(),
        Some(model.clone()),
        1e-3,
        StableScheme::Exact,
        21,
    )?;
    let coarse = Sampler::new(triple, Some(model.clone()), 2e-3, StableScheme::Exact, 22)?;
    let systematic =
        delta_cut.powf(flagship::ALPHA - flagship::BETA) * model.beta_moment_bound() * g.sup_norm()
            / lambda;
    let cv = mc_vs_neumann(
        &series,
        residual,
        &fine,
        &coarse,
        100_000,
        0.0,
        &[0.0],
        &g,
        systematic,
    )?;
    let elapsed = started.elapsed().as_secs_f64();
    Ok((
        cv.passes && elapsed < 300.0,
        format!(
            "|MC - Neumann| {:.2e} <= {:.2e} (3 se {:.1e} + tail {:.1e} + lattice {:.1e} + step bias {:.1e}) at 1e5 paths, {elapsed:.0} s < 300 s",
            cv.difference,
            cv.allowance,
            3.0 * cv.mc_stderr,
            cv.neumann_truncation,
            cv.neumann_discretization,
            cv.richardson
        ),
    ))
}

fn dynkin() -> Outcome {
    let grid = flagship_lattice()?;
    let model = approximating_kernel(16.0, 0.05)?;
    let pert = Perturbation::new(&flagship::stable(), &model, grid)?;
    let step = grid.freq_step();
    let triple = SamplerModel::from_triple(&flagship::triple());
    let fine = Sampler::new(
        triple.clone(),
        Some(model.clone()),
        1e-3,
        StableScheme::Exact,
        31,
    )?;
    let coarse = Sampler::new(triple, Some(model), 2e-3, StableScheme::Exact, 32)?;
    let tests: [Box<dyn Fn(f64) -> f64 + Sync + Send>; 3] = [
        Box::new(move |x| (2.0 * step * x).cos()),
        Box::new(move |x| (5.0 * step * x + 0.3).sin()),
        Box::new(move |x| 0.5 * (step * x).cos() - 0.4 * (4.0 * step * x - 1.0).sin()),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for f in tests {
        let field = LatticeField::from_fn(grid, |x| f(x[0]));
        let gf = pert
            .generator()
            .apply_generator(&field)
            .add(&pert.apply_k(&field)?)?;
        let (fp, gp) = (
            TrigPolynomial::from_field(&field, 1e-13),
            TrigPolynomial::from_field(&gf, 1e-13),
        );
        let c = dynkin_residual(&coarse, 40_000, 0.0, &[0.0], 0.25, &fp, &gp, 0.0)?;
        let r = dynkin_residual(&fine, 40_000, 0.0, &[0.0], 0.25, &fp, &gp, 0.0)?;
        let r = r.with_allowance((r.residual - c.residual).abs());
        ok &= r.passes;
        parts.push(format!(
            "{:.1e} <= {:.1e}",
            r.residual.abs(),
            3.0 * r.stderr + r.allowance
        ));
    }
    Ok((
        ok,
        format!("|residual| vs 3 se + step bias: {}", parts.join("; ")),
    ))
}

fn krylov() -> Outcome {
    let s = flagship::stable();
    let norms = KrylovNorms::measure(
        &s,
        &flagship::kernel(),
        30.0,
        30.0,
        &AutoLattice::new(1, 1 << 14),
    )?;
    let l: Vec<f64> = [25.0, 50.0, 100.0, 200.0, 400.0]
        .iter()
        .map(|&x| norms.constants(x).map(|k| k.l_lambda))
        .collect::<levy_core::Result<_>>()?;
    let decreasing = l.windows(2).all(|w| w[1] < w[0]);
    let triple = SamplerModel::from_triple(&flagship::triple());
    let mut worst: f64 = 0.0;
    for n in [4.0, 16.0, 64.0] {
        let sampler = Sampler::new(
            triple.clone(),
            Some(approximating_kernel(n, 0.05)?),
            2e-3,
            StableScheme::Exact,
            40,
        )?;
        let rows = [1.0, 0.5, 0.25]
            .iter()
            .map(|&eps| krylov_mc_check(&sampler, 5_000, 0.0, &[0.0], 0.5, 4.0, eps))
            .collect::<levy_core::Result<Vec<_>>>()?;
        for r in &rows {
            worst = worst.max(r.ratio / rows[0].ratio);
        }
    }
    Ok((
        decreasing && worst <= 2.0,
        format!(
            "l_lambda {:.4} -> {:.4} decreasing: {decreasing}; worst ratio growth {worst:.3} <= 2 as eps halves twice, n in {{4, 16, 64}}",
            l[0],
            l[l.len() - 1]
        ),
    ))
}
