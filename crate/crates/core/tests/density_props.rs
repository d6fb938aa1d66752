use levy_core::density::{
    chapman_kolmogorov, decay_exponent_fit, predicted_slope, scaling_check, AutoLattice,
    InversionSpec, Multiplier,
};
use levy_core::lattice::{Grid, Interp};
use levy_core::symbol::{Atom, SpectralMeasure, StablePart};

fn asymmetric_1d(alpha: f64) -> StablePart {
    let mu = SpectralMeasure::new(vec![
        Atom {
            direction: vec![1.0],
            weight: 2.0,
        },
        Atom {
            direction: vec![-1.0],
            weight: 1.0,
        },
    ])
    .unwrap();
    StablePart::new(alpha, mu).unwrap()
}

fn anisotropic_2d(alpha: f64) -> StablePart {
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
    ])
    .unwrap();
    StablePart::new(alpha, mu).unwrap()
}

fn log_times(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|k| 10f64.powf(lo + (hi - lo) * k as f64 / (count - 1) as f64))
        .collect()
}

#[test]
fn scaling_law_one_dimensional() {
    // aliasing cancels between similar lattices, so a loose extent guard suffices
    let spec = InversionSpec::new(Grid::new(1, 1 << 14, 64.0).unwrap()).with_boundary_tol(1e-3);
    for alpha in [0.7, 1.0, 1.5] {
        let stable = asymmetric_1d(alpha);
        for t in [0.25, 4.0] {
            let r = scaling_check(&stable, t, &spec, Interp::Cubic).unwrap();
            println!("alpha {alpha} t {t}: residual {r:.3e}");
            assert!(r < 1e-5, "alpha {alpha} t {t}: residual {r:.3e}");
        }
    }
}

#[test]
fn scaling_law_two_dimensional() {
    let spec = InversionSpec::new(Grid::new(2, 256, 16.0).unwrap()).with_boundary_tol(1e-2);
    let r = scaling_check(&anisotropic_2d(1.5), 4.0, &spec, Interp::Cubic).unwrap();
    println!("2-d residual {r:.3e}");
    assert!(r < 1e-4, "residual {r:.3e}");
}

#[test]
fn chapman_kolmogorov_asymmetric() {
    let spec = InversionSpec::new(Grid::new(1, 1 << 12, 32.0).unwrap());
    let r = chapman_kolmogorov(&asymmetric_1d(1.5), 0.3, 0.9, &spec).unwrap();
    assert!(r < 1e-5, "residual {r:.3e}");
}

#[test]
fn decay_slopes_match_prediction() {
    let times = log_times(-2.0, 2.0, 9);
    let lattice = AutoLattice::new(1, 1 << 12);
    let cases = [
        (
            StablePart::new(1.0, SpectralMeasure::symmetric(&[vec![1.0]], 1.0).unwrap()).unwrap(),
            Multiplier::Identity,
            1.0,
        ),
        (
            StablePart::new(1.0, SpectralMeasure::symmetric(&[vec![1.0]], 1.0).unwrap()).unwrap(),
            Multiplier::Identity,
            2.0,
        ),
        (asymmetric_1d(1.5), Multiplier::Fractional(0.4), 1.0),
        (
            asymmetric_1d(1.5),
            Multiplier::FractionalGradient(0.3, 0),
            1.0,
        ),
        (asymmetric_1d(1.5), Multiplier::Gradient(0), 2.0),
    ];
    for (stable, mult, r) in cases {
        let fit = decay_exponent_fit(&stable, mult, r, &times, &lattice).unwrap();
        let want = predicted_slope(1, stable.alpha(), r, mult);
        println!("{mult:?} r={r}: slope {:.5} predicted {want:.5}", fit.slope);
        if want == 0.0 {
            assert!(fit.slope.abs() < 1e-6);
        } else {
            assert!(
                (fit.slope / want - 1.0).abs() < 0.02,
                "{mult:?}: {} vs {want}",
                fit.slope
            );
        }
    }
}
