use levy_core::flagship;
use levy_core::kernel::JumpKernelModel;
use levy_core::lattice::{Grid, LatticeField};
use levy_core::perturb::{find_lambda0, ContractionCurve, Perturbation};
use levy_core::resolvent::{Extension, ModulusProbe, SpaceTimeFunction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn lattice() -> Grid {
    Grid::new(1, 512, 8.0 * PI).unwrap()
}

fn random_g(grid: Grid, rng: &mut ChaCha8Rng, times: &[f64]) -> SpaceTimeFunction {
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
    let t_end = *times.last().unwrap();
    SpaceTimeFunction::from_fn(grid, times.to_vec(), Extension::Zero, |t, x| {
        let envelope = (PI * t / t_end).sin();
        modes
            .iter()
            .map(|(a, k, ph, w)| a * envelope * (k * step * x[0] + ph + w * t).cos())
            .sum()
    })
    .unwrap()
}

#[test]
fn contraction_and_series_on_flagship_kernel() {
    let s = flagship::stable();
    let model = flagship::kernel();
    let curve = ContractionCurve::measure(&s, &model, &ModulusProbe::new(1)).unwrap();
    let grid: Vec<f64> = (0..=14).map(|j| 2f64.powi(j)).collect();
    let l0 = find_lambda0(|l| curve.k(l), &grid).unwrap();
    let lambda = 2.0 * l0.lambda0;
    let k = curve.k(lambda).unwrap();
    let m = curve.modulus(lambda).unwrap();
    println!(
        "lambda0 {:.4}, lambda {lambda:.4}, k {k:.4}, C_hat {:.4} (z* {}, edge {})",
        l0.lambda0, m.difference, m.argmax_z, m.at_edge
    );
    assert!(!m.at_edge);
    assert!(k < 0.5);

    let grid = lattice();
    let pert = Perturbation::new(&s, &model, grid).unwrap();
    let times: Vec<f64> = (0..=40).map(|j| 0.01 * j as f64).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst_ratio: f64 = 0.0;
    for _ in 0..20 {
        let g = random_g(grid, &mut rng, &times);
        let kr = pert.apply_kr(lambda, &g).unwrap();
        worst_ratio = worst_ratio.max(kr.sup_norm() / g.sup_norm());
    }
    println!("sup |KRg| / |g| = {worst_ratio:.4} vs k = {k:.4}");
    assert!(worst_ratio <= k);

    let g = random_g(grid, &mut rng, &times);
    let series = pert.neumann(lambda, &g, k, 1e-10).unwrap();
    println!(
        "terms {:?}\nsources {:?}",
        series.term_norms, series.source_norms
    );
    for w in series.source_norms.windows(2) {
        assert!(w[1] <= (k + 0.02) * w[0]);
    }
    for w in series.term_norms.windows(2) {
        assert!(w[1] <= (k + 0.02) * w[0]);
    }
    assert!(series.value.sup_norm() * lambda <= 2.0 * g.sup_norm());
    let residual = pert.series_residual(&series, &g, 1e-4).unwrap();
    println!("perturbed resolvent residual {residual:.3e}");
    assert!(residual < 1e-3);
}

#[test]
fn series_trivial_cases() {
    let s = flagship::stable();
    let grid = lattice();
    let times = vec![0.0, 0.5, 1.0];
    let one = SpaceTimeFunction::new(
        times.clone(),
        vec![LatticeField::from_fn(grid, |_| 1.0); 3],
        Extension::Constant,
    )
    .unwrap();
    let pert = Perturbation::new(&s, &flagship::kernel(), grid).unwrap();
    let kr = pert.apply_kr(3.0, &one).unwrap();
    assert!(kr.sup_norm() < 1e-12);
    let series = pert.neumann(30.0, &one, 0.3, 1e-12).unwrap();
    assert!(series
        .value
        .fields()
        .iter()
        .all(|f| f.values.iter().all(|v| (v - 1.0 / 30.0).abs() < 1e-12)));

    let dead = Perturbation::new(&s, &JumpKernelModel::zero(1, 0.5), grid).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = random_g(grid, &mut rng, &[0.0, 0.1, 0.2, 0.3]);
    let series = dead.neumann(5.0, &g, 0.0, 1e-12).unwrap();
    assert_eq!(series.term_norms.len(), 1);
    let direct = dead.generator().resolve(5.0, &g).unwrap();
    assert_eq!(series.value.fields()[1].values, direct.fields()[1].values);
    assert!(matches!(
        dead.neumann(5.0, &g, 0.5, 1e-12),
        Err(levy_core::Error::Contraction { .. })
    ));
}

#[test]
fn krylov_constants_on_flagship() {
    use levy_core::density::{invert, predicted_slope, AutoLattice, Multiplier};
    use levy_core::perturb::KrylovNorms;
    use levy_core::quad::integrate_to_infinity;
    use levy_core::resolvent::conjugate;

    let s = flagship::stable();
    let model = flagship::kernel();
    let lattice = AutoLattice::new(1, 1 << 14);
    assert!(KrylovNorms::measure(&s, &model, 3.0, 3.0, &lattice).is_err());
    let norms = KrylovNorms::measure(&s, &model, 30.0, 30.0, &lattice).unwrap();
    let mut prev = f64::INFINITY;
    for lambda in [25.0, 50.0, 100.0, 200.0, 400.0] {
        let k = norms.constants(lambda).unwrap();
        println!("{k:?}");
        assert!(k.l_lambda < prev);
        prev = k.l_lambda;
    }

    // the Gamma form of c_λ against quadrature of the power-law integrand
    let (lambda, q) = (50.0, 30.0);
    let ps = conjugate(30.0).unwrap();
    let qs = conjugate(q).unwrap();
    let slope = predicted_slope(1, flagship::ALPHA, ps, Multiplier::Identity);
    let direct = integrate_to_infinity(
        |u| {
            if u == 0.0 {
                0.0
            } else {
                ((-lambda * u).exp() * norms.density_norm * u.powf(slope)).powf(qs)
            }
        },
        0.0,
        1e-14,
        1e-11,
    )
    .unwrap()
    .value
    .powf(1.0 / qs);
    assert!((norms.constants(lambda).unwrap().c_lambda / direct - 1.0).abs() < 1e-6);

    // the L^{p*} norm of p_u follows the predicted power of u
    for u in [0.25, 4.0] {
        let spec = lattice.spec_for(&s, u, Multiplier::Identity).unwrap();
        let measured = invert(&s, u, Multiplier::Identity, &spec)
            .unwrap()
            .field
            .lr_norm(ps)
            .unwrap();
        let predicted = norms.density_norm * u.powf(slope);
        assert!(
            (measured / predicted - 1.0).abs() < 0.01,
            "u = {u}: {measured} vs {predicted}"
        );
    }
}
