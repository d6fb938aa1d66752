use levy_core::approx::{mollify_kernel, truncate_kernel};
use levy_core::flagship;
use levy_core::kernel::JumpKernelModel;
use levy_core::lattice::{Grid, LatticeField};
use levy_core::perturb::{ContractionCurve, Perturbation};
use levy_core::resolvent::{Extension, ModulusProbe, SpaceTimeFunction};
use levy_core::simulate::{
    dynkin_residual, krylov_mc_admissible, krylov_mc_check, mc_vs_neumann, Sampler, SamplerModel,
    StableScheme, TrigPolynomial,
};
use levy_core::stats::ks_test;
use levy_core::symbol::{Atom, LevyTriple, SpectralMeasure, StablePart};
use nalgebra::DMatrix;
use statrs::distribution::{Cauchy, ContinuousCDF, Normal};
use std::f64::consts::PI;
use std::time::Instant;

fn lattice() -> Grid {
    Grid::new(1, 512, 8.0 * PI).unwrap()
}

fn approximating_kernel(n: f64, delta_cut: f64) -> JumpKernelModel {
    truncate_kernel(&mollify_kernel(&flagship::kernel(), n).unwrap(), delta_cut).unwrap()
}

fn smooth_source(grid: Grid, t_end: f64) -> SpaceTimeFunction {
    let step = grid.freq_step();
    let times: Vec<f64> = (0..=30).map(|j| t_end * j as f64 / 30.0).collect();
    SpaceTimeFunction::from_fn(grid, times, Extension::Zero, |t, x| {
        let envelope = (PI * t / t_end).sin();
        envelope
            * (0.8 * (8.0 * step * x[0] + 0.4).cos()
                + 0.5 * (3.0 * step * x[0] - 1.0 + 4.0 * t).sin()
                + 0.3)
    })
    .unwrap()
}

#[test]
fn gaussian_marginal() {
    let model = SamplerModel::gaussian(DMatrix::from_element(1, 1, 0.5), vec![0.0]);
    let sampler = Sampler::new(model, None, 0.05, StableScheme::Exact, 3).unwrap();
    let xs: Vec<f64> = sampler
        .terminal_values(10_000, 0.0, &[0.0], 1.0)
        .unwrap()
        .into_iter()
        .map(|v| v[0])
        .collect();
    let normal = Normal::new(0.0, 1.0).unwrap();
    let ks = ks_test(&xs, |x| normal.cdf(x)).unwrap();
    println!("gaussian KS {ks:?}");
    assert!(ks.p_value > 0.01);
}

#[test]
fn symmetric_cauchy_marginal() {
    let mu = SpectralMeasure::new(vec![
        Atom {
            direction: vec![1.0],
            weight: 1.0,
        },
        Atom {
            direction: vec![-1.0],
            weight: 1.0,
        },
    ])
    .unwrap();
    let triple = LevyTriple::pure_stable(StablePart::new(1.0, mu).unwrap());
    let cauchy = Cauchy::new(0.0, PI).unwrap();
    for scheme in [
        StableScheme::Exact,
        StableScheme::compound_poisson_for(1.0, 0.01, true),
    ] {
        let sampler =
            Sampler::new(SamplerModel::from_triple(&triple), None, 0.01, scheme, 4).unwrap();
        let xs: Vec<f64> = sampler
            .terminal_values(10_000, 0.0, &[0.0], 1.0)
            .unwrap()
            .into_iter()
            .map(|v| v[0])
            .collect();
        let ks = ks_test(&xs, |x| cauchy.cdf(x)).unwrap();
        println!("{scheme:?}: cauchy KS {ks:?}");
        assert!(ks.p_value > 0.01);
    }
}

#[test]
fn generator_without_kernel_matches_resolvent() {
    let grid = lattice();
    let s = flagship::stable();
    let pert = Perturbation::new(&s, &JumpKernelModel::zero(1, flagship::BETA), grid).unwrap();
    let g = smooth_source(grid, 0.2);
    let series = pert.neumann(20.0, &g, 0.0, 1e-12).unwrap();
    assert_eq!(series.sources.len(), 1);
    let model = SamplerModel::from_triple(&flagship::triple());
    let fine = Sampler::new(model.clone(), None, 2e-3, StableScheme::Exact, 8).unwrap();
    let coarse = Sampler::new(model, None, 4e-3, StableScheme::Exact, 9).unwrap();
    let cv = mc_vs_neumann(&series, 0.0, &fine, &coarse, 20_000, 0.0, &[0.0], &g, 0.0).unwrap();
    println!("{cv:?}");
    assert!(cv.difference <= 3.0 * cv.mc_stderr + 1e-6);
}

#[test]
fn flagship_cross_validation() {
    let started = Instant::now();
    let s = flagship::stable();
    let curve = ContractionCurve::measure(&s, &flagship::kernel(), &ModulusProbe::new(1)).unwrap();
    let grid_l: Vec<f64> = (0..=14).map(|j| 2f64.powi(j)).collect();
    let l0 = levy_core::perturb::find_lambda0(|l| curve.k(l), &grid_l).unwrap();
    let lambda = 2.0 * l0.lambda0;
    let k = curve.k(lambda).unwrap();

    let (n, delta_cut) = (16.0, 0.05);
    let model = approximating_kernel(n, delta_cut);
    assert!(model.beta_moment_bound() <= flagship::kernel().beta_moment_bound() + 1e-12);
    let grid = lattice();
    let pert = Perturbation::new(&s, &model, grid).unwrap();
    let g = smooth_source(grid, 0.3);
    let series = pert.neumann(lambda, &g, k, 1e-9).unwrap();
    let residual = pert.series_residual(&series, &g, 1e-4).unwrap();
    let triple = SamplerModel::from_triple(&flagship::triple());
    let fine = Sampler::new(
        triple.clone(),
        Some(model.clone()),
        1e-3,
        StableScheme::Exact,
        21,
    )
    .unwrap();
    let coarse = Sampler::new(triple, Some(model), 2e-3, StableScheme::Exact, 22).unwrap();
    let systematic = delta_cut.powf(flagship::ALPHA - flagship::BETA) * 2.0 * g.sup_norm() / lambda;
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
    )
    .unwrap();
    println!("{cv:#?}\nelapsed {:.1?}", started.elapsed());
    assert!(cv.passes);
}

#[test]
fn dynkin_identity_three_functions() {
    let grid = lattice();
    let s = flagship::stable();
    let model = approximating_kernel(16.0, 0.05);
    let pert = Perturbation::new(&s, &model, grid).unwrap();
    let step = grid.freq_step();
    let triple = SamplerModel::from_triple(&flagship::triple());
    let fine = Sampler::new(
        triple.clone(),
        Some(model.clone()),
        1e-3,
        StableScheme::Exact,
        31,
    )
    .unwrap();
    let coarse = Sampler::new(triple, Some(model), 2e-3, StableScheme::Exact, 32).unwrap();
    type Test = (&'static str, Box<dyn Fn(f64) -> f64 + Sync + Send>);
    let tests: [Test; 3] = [
        ("cos", Box::new(move |x| (2.0 * step * x).cos())),
        ("sin", Box::new(move |x| (5.0 * step * x + 0.3).sin())),
        (
            "mix",
            Box::new(move |x| 0.5 * (step * x).cos() - 0.4 * (4.0 * step * x - 1.0).sin()),
        ),
    ];
    for (name, f) in tests {
        let field = LatticeField::from_fn(grid, |x| f(x[0]));
        let gf = pert
            .generator()
            .apply_generator(&field)
            .add(&pert.apply_k(&field).unwrap())
            .unwrap();
        let (fp, gp) = (
            TrigPolynomial::from_field(&field, 1e-13),
            TrigPolynomial::from_field(&gf, 1e-13),
        );
        let coarse_r = dynkin_residual(&coarse, 40_000, 0.0, &[0.0], 0.25, &fp, &gp, 0.0).unwrap();
        let fine_r = dynkin_residual(&fine, 40_000, 0.0, &[0.0], 0.25, &fp, &gp, 0.0).unwrap();
        let r = fine_r.with_allowance((fine_r.residual - coarse_r.residual).abs());
        println!("{name}: {r:?}");
        assert!(r.passes);
    }
}

#[test]
fn occupation_ratio_does_not_explode() {
    assert!(krylov_mc_admissible(1, 1.2, 0.5, 4.0).is_ok());
    assert!(krylov_mc_admissible(1, 1.2, 0.5, 3.0).is_err());
    let triple = SamplerModel::from_triple(&flagship::triple());
    for n in [4.0, 16.0, 64.0] {
        let sampler = Sampler::new(
            triple.clone(),
            Some(approximating_kernel(n, 0.05)),
            2e-3,
            StableScheme::Exact,
            40,
        )
        .unwrap();
        let rows: Vec<_> = [1.0, 0.5, 0.25]
            .iter()
            .map(|&eps| krylov_mc_check(&sampler, 5_000, 0.0, &[0.0], 0.5, 4.0, eps).unwrap())
            .collect();
        println!("n = {n}: {rows:?}");
        for r in &rows {
            assert!(r.ratio <= 2.0 * rows[0].ratio);
        }
    }
}

#[test]
fn stderr_follows_the_square_root_law() {
    let sampler = Sampler::new(
        SamplerModel::from_triple(&flagship::triple()),
        None,
        5e-3,
        StableScheme::Exact,
        50,
    )
    .unwrap();
    let g = |_: f64, x: &[f64]| (0.7 * x[0]).cos();
    let errs: Vec<f64> = [1_000, 10_000, 100_000]
        .iter()
        .map(|&n| {
            levy_core::simulate::estimate_v(&sampler, n, 0.0, &[0.0], 0.25, 4.0, g, 1.0)
                .unwrap()
                .stderr
        })
        .collect();
    for w in errs.windows(2) {
        let ratio = w[0] / w[1] / 10f64.sqrt();
        assert!((ratio - 1.0).abs() < 0.2, "{errs:?}");
    }
}

#[test]
fn trivial_dynkin_cases() {
    let grid = lattice();
    let one = TrigPolynomial::from_field(&LatticeField::from_fn(grid, |_| 1.0), 1e-13);
    let zero = TrigPolynomial::from_field(&LatticeField::zeros(grid), 1e-13);
    let model = SamplerModel::from_triple(&flagship::triple());
    let sampler = Sampler::new(
        model,
        Some(approximating_kernel(4.0, 0.1)),
        2e-3,
        StableScheme::Exact,
        1,
    )
    .unwrap();
    let r = dynkin_residual(&sampler, 200, 0.0, &[0.0], 0.1, &one, &zero, 0.0).unwrap();
    assert!(r.lhs.abs() < 1e-13 && r.rhs == 0.0 && r.passes);

    let dead = Sampler::new(SamplerModel::dead(1), None, 0.01, StableScheme::Exact, 1).unwrap();
    let f = LatticeField::from_fn(grid, |x| (x[0] / 4.0).sin());
    let fp = TrigPolynomial::from_field(&f, 1e-13);
    let r = dynkin_residual(&dead, 50, 0.0, &[0.3], 0.5, &fp, &zero, 0.0).unwrap();
    assert!(r.lhs.abs() < 1e-13 && r.residual.abs() < 1e-13);
}
