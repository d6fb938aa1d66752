use levy_core::density::{fractional_apply, invert, InversionSpec, Multiplier};
use levy_core::lattice::{Grid, LatticeField};
use levy_core::resolvent::{
    gamma_ceiling, gradient_gamma_ceiling, holder_moduli, komatsu_check, Extension, ModulusProbe,
    SpaceTimeFunction, SpectralGenerator,
};
use levy_core::symbol::{Atom, SpectralMeasure, StablePart};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn flagship_stable() -> StablePart {
    let mu = SpectralMeasure::new(vec![
        Atom {
            direction: vec![1.0],
            weight: 1.5,
        },
        Atom {
            direction: vec![-1.0],
            weight: 1.0,
        },
    ])
    .unwrap();
    StablePart::new(1.2, mu).unwrap()
}

fn random_field(grid: Grid, rng: &mut ChaCha8Rng, smooth: bool) -> LatticeField {
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
        LatticeField::from_fn(grid, |x| {
            modes
                .iter()
                .map(|(a, k, ph)| a * (k * step * x[0] + ph).cos())
                .sum()
        })
    } else {
        LatticeField::new(
            grid,
            (0..grid.len())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
        )
        .unwrap()
    }
}

#[test]
fn resolvent_of_constant_and_sup_bound() {
    let grid = Grid::new(1, 1024, 32.0).unwrap();
    let gen = SpectralGenerator::new(&flagship_stable(), grid).unwrap();
    let one = SpaceTimeFunction::frozen(LatticeField::from_fn(grid, |_| 1.0));
    for lambda in [0.5, 2.0, 10.0] {
        let r = gen.apply_r(lambda, &one, 0.0).unwrap();
        assert!(r.values.iter().all(|v| (v - 1.0 / lambda).abs() < 1e-12));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let times: Vec<f64> = (0..=20).map(|k| 0.1 * k as f64).collect();
    let mut worst: f64 = f64::NEG_INFINITY;
    for k in 0..20 {
        let fields = times
            .iter()
            .map(|_| random_field(grid, &mut rng, k % 2 == 0))
            .collect();
        let g = SpaceTimeFunction::new(times.clone(), fields, Extension::Zero).unwrap();
        let lambda = 2.0;
        let r = gen.apply_r(lambda, &g, 0.3).unwrap();
        worst = worst.max(r.sup_norm() - g.sup_norm() / lambda);
    }
    println!("worst excess {worst:.3e}");
    assert!(worst <= 1e-8);
}

#[test]
fn resolvent_equation_residual() {
    let grid = Grid::new(1, 256, std::f64::consts::PI * 4.0).unwrap();
    let gen = SpectralGenerator::new(&flagship_stable(), grid).unwrap();
    let times: Vec<f64> = (0..=400).map(|k| 0.005 * k as f64).collect();
    let eta = |t: f64| {
        if t < 2.0 {
            (std::f64::consts::PI * t / 2.0).sin().powi(2)
        } else {
            0.0
        }
    };
    let g = SpaceTimeFunction::from_fn(grid, times, Extension::Zero, |t, x| {
        eta(t) * (0.5 * x[0]).cos()
    })
    .unwrap();
    for lambda in [2.0, 4.0] {
        let r = gen.identity_residual(lambda, &g, 1e-3).unwrap();
        println!("lambda {lambda}: residual {r:.3e}");
        assert!(r < 1e-4);
    }
}

#[test]
fn holder_moduli_decrease_and_sit_below_ceiling() {
    let s = flagship_stable();
    let delta = 0.5;
    let spec = InversionSpec::new(Grid::new(1, 1 << 14, 256.0).unwrap());
    let c4 = fractional_apply(&s, delta, 1.0, &spec)
        .unwrap()
        .field
        .lr_norm(1.0)
        .unwrap();
    let probe = ModulusProbe::new(1);
    let mut prev = f64::INFINITY;
    for m in holder_moduli(&s, &[2.0, 4.0, 8.0, 16.0], delta, false, &probe).unwrap() {
        let ceil = gamma_ceiling(c4, delta, 1.2, m.lambda);
        println!(
            "lambda {}: C {:.5} (z* {:.3}) fractional {:.5} ceiling {:.5}",
            m.lambda, m.difference, m.argmax_z, m.fractional, ceil
        );
        assert!(m.difference < prev && !m.at_edge);
        assert!(m.difference <= ceil);
        assert!(m.fractional <= ceil * (1.0 + 1e-6));
        prev = m.difference;
    }
}

#[test]
fn gradient_moduli_decrease_and_sit_below_ceiling() {
    let s = flagship_stable();
    let delta = 0.1;
    let spec = InversionSpec::new(Grid::new(1, 1 << 14, 256.0).unwrap());
    let c5 = invert(&s, 1.0, Multiplier::FractionalGradient(delta, 0), &spec)
        .unwrap()
        .field
        .lr_norm(1.0)
        .unwrap();
    let probe = ModulusProbe::new(1);
    let mut prev = f64::INFINITY;
    for m in holder_moduli(&s, &[2.0, 4.0, 8.0, 16.0], delta, true, &probe).unwrap() {
        let ceil = gradient_gamma_ceiling(c5, delta, 1.2, m.lambda);
        println!(
            "lambda {}: C_hat {:.5} (z* {:.3}) fractional {:.5} ceiling {:.5}",
            m.lambda, m.difference, m.argmax_z, m.fractional, ceil
        );
        assert!(m.difference < prev && !m.at_edge);
        assert!(m.difference <= ceil);
        prev = m.difference;
    }
}

#[test]
fn komatsu_constant_is_flat_in_the_shift() {
    let z: Vec<f64> = (0..=8)
        .map(|j| 10f64.powf(-1.0 + 0.25 * j as f64))
        .collect();
    for dim in [1, 2] {
        for delta in [0.3, 0.7] {
            let c = komatsu_check(delta, dim, &z).unwrap();
            let (lo, hi) = c
                .iter()
                .fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
            println!("d = {dim}, delta = {delta}: c6 in [{lo:.6}, {hi:.6}]");
            assert!(hi / lo - 1.0 < 0.01);
            if dim == 1 {
                // ∫ ||w+1|^{δ-1} - |w|^{δ-1}| dw = 2^{2-δ}/δ
                let exact = 2f64.powf(2.0 - delta) / delta;
                assert!((c[0] / exact - 1.0).abs() < 1e-8);
            }
        }
    }
}
