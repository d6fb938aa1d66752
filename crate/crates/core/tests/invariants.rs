use levy_core::kernel::Modulator;
use levy_core::lattice::{Grid, LatticeField};
use levy_core::simulate::{occupation_bump, Sampler, SamplerModel, StableScheme};
use levy_core::stats::ks_test;
use levy_core::symbol::{Atom, Exponent, SpectralMeasure, StablePart};
use proptest::prelude::*;

fn stable(alpha: f64, w_plus: f64, w_minus: f64) -> StablePart {
    let mu = SpectralMeasure::new(vec![
        Atom {
            direction: vec![1.0],
            weight: w_plus,
        },
        Atom {
            direction: vec![-1.0],
            weight: w_minus,
        },
    ])
    .unwrap();
    StablePart::new(alpha, mu).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exponent_is_homogeneous_with_nonnegative_real_part(
        alpha in 0.3f64..1.95, wp in 0.1f64..5.0, wm in 0.1f64..5.0, u in -50.0f64..50.0, rho in 0.1f64..10.0,
    ) {
        let s = stable(alpha, wp, wm);
        prop_assert!(s.eval(&[u]).re >= 0.0);
        prop_assert!(s.homogeneity_residual(rho, &[u]).unwrap() < 1e-9);
        // Hermitian symmetry of a real-valued process
        let (a, b) = (s.eval(&[u]), s.eval(&[-u]));
        prop_assert!((a - b.conj()).norm() <= 1e-10 * (1.0 + a.norm()));
    }

    #[test]
    fn spectrum_round_trip(values in proptest::collection::vec(-10.0f64..10.0, 64)) {
        let grid = Grid::new(1, 64, 5.0).unwrap();
        let f = LatticeField::new(grid, values.clone()).unwrap();
        let back = LatticeField::from_spectrum(grid, f.spectrum());
        for (a, b) in back.values.iter().zip(&values) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn modulator_bounds_hold(base in 0.5f64..3.0, amp in 0.0f64..0.5, k in 0.1f64..4.0, x in -20.0f64..20.0) {
        let m = Modulator::sine(1, base, amp, k);
        let v = m.eval(&[x]);
        prop_assert!(v <= m.sup_bound() + 1e-12);
        prop_assert!(v >= m.inf_bound() - 1e-12);
        prop_assert!(m.lipschitz() >= 0.0);
    }

    #[test]
    fn ks_p_value_is_a_probability(xs in proptest::collection::vec(-5.0f64..5.0, 5..200)) {
        let r = ks_test(&xs, |x| (x + 5.0) / 10.0).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.p_value));
        prop_assert!((0.0..=1.0).contains(&r.statistic));
    }

    #[test]
    fn bump_is_bounded_and_supported(eps in 0.05f64..2.0, x in -3.0f64..3.0) {
        let v = occupation_bump(&[0.0], eps, &[x]);
        prop_assert!((0.0..=1.0).contains(&v));
        if x.abs() >= eps {
            prop_assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn paths_are_reproducible(seed in 0u64..1000, path in 0u64..1000) {
        let triple = levy_core::symbol::LevyTriple::pure_stable(stable(1.3, 1.0, 0.5));
        let s = Sampler::new(SamplerModel::from_triple(&triple), None, 0.01, StableScheme::Exact, seed).unwrap();
        let a = s.sample_path(path, 0.0, &[0.0], 0.1).unwrap();
        let b = s.sample_path(path, 0.0, &[0.0], 0.1).unwrap();
        prop_assert_eq!(a, b);
    }
}
