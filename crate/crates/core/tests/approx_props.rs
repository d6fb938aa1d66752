use levy_core::approx::{
    mollify_kernel, mollify_study, truncate_kernel, truncation_error, TestFunction,
};
use levy_core::density::least_squares;
use levy_core::flagship;
use levy_core::lattice::Grid;
use std::f64::consts::PI;

fn grid() -> Grid {
    Grid::new(1, 256, 4.0 * PI).unwrap()
}

#[test]
fn mollification_error_is_bounded_and_decays() {
    let model = flagship::kernel();
    let tests = [
        TestFunction::Cosine {
            wavevector: vec![1.0],
            phase: 0.0,
        },
        TestFunction::Cosine {
            wavevector: vec![2.0],
            phase: 0.7,
        },
    ];
    for f in &tests {
        let (rows, slope) =
            mollify_study(f, &model, true, &[4.0, 8.0, 16.0, 32.0], grid()).unwrap();
        for r in &rows {
            println!(
                "n {:>3}: measured {:.3e} bound {:.3e}",
                r.n, r.measured, r.bound
            );
            assert!(r.measured <= r.bound);
        }
        println!("slope {slope:.3}");
        assert!(slope <= -0.9);
    }
    for n in [4.0, 32.0] {
        assert!(
            mollify_kernel(&model, n).unwrap().beta_moment_bound() <= model.beta_moment_bound()
        );
    }
}

#[test]
fn truncation_error_is_bounded() {
    let model = flagship::kernel();
    let f = TestFunction::Cosine {
        wavevector: vec![1.0],
        phase: 0.3,
    };
    let deltas = [0.4, 0.2, 0.1, 0.05, 0.025];
    let rows: Vec<_> = deltas
        .iter()
        .map(|&d| truncation_error(&f, &model, flagship::ALPHA, d, grid()).unwrap())
        .collect();
    for r in &rows {
        println!(
            "delta {:.3}: measured {:.3e} bound {:.3e} rate {:.3}",
            r.delta_cut, r.measured, r.bound, r.rate_bound
        );
        assert!(r.measured <= r.bound);
    }
    // Taylor: the removed part behaves like ∫₀^δ r² r^{-1-β'} dr ∝ δ^{2-β'}
    let (slope, _) = least_squares(
        &rows
            .iter()
            .map(|r| (r.delta_cut.ln(), r.measured.ln()))
            .collect::<Vec<_>>(),
    );
    println!(
        "truncation exponent {slope:.3} (Taylor {:.3})",
        2.0 - flagship::BETA_PRIME
    );
    assert!((slope - (2.0 - flagship::BETA_PRIME)).abs() < 0.15 * (2.0 - flagship::BETA_PRIME));
    // ∫ χ(r/δ) r^{-1-β'} dr over (0, 1] equals A δ^{-β'} - 1/β', so after
    // removing the big-jump mass and the constant the intensity is a pure power
    let (pi_mass, sup_kappa, ray) = (0.5, 1.5, 0.2);
    let shift = sup_kappa * ray / flagship::BETA_PRIME;
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (r.delta_cut.ln(), (r.rate_bound - pi_mass + shift).ln()))
        .collect();
    let (rate_slope, _) = least_squares(&pts);
    println!("rate exponent {rate_slope:.3}");
    assert!((rate_slope + flagship::BETA_PRIME).abs() < 1e-6);
}

#[test]
fn compensator_is_uniformly_lipschitz() {
    let model = mollify_kernel(&flagship::kernel(), 8.0).unwrap();
    let mut worst: Vec<f64> = Vec::new();
    for d in [0.4, 0.1, 0.025] {
        let m = truncate_kernel(&model, d).unwrap();
        let h = 1e-3;
        let fd = (0..400)
            .map(|j| {
                let x = -PI + j as f64 * 2.0 * PI / 400.0;
                ((m.compensator(flagship::ALPHA, &[x + h]).unwrap()[0]
                    - m.compensator(flagship::ALPHA, &[x]).unwrap()[0])
                    / h)
                    .abs()
            })
            .fold(0.0, f64::max);
        let bound = m.compensator_lipschitz(flagship::ALPHA).unwrap();
        println!("delta {d}: finite-difference Lipschitz {fd:.4}, bound {bound:.4}");
        assert!(fd <= bound * (1.0 + 1e-3));
        worst.push(fd);
    }
    let max = worst.iter().cloned().fold(0.0, f64::max);
    let min = worst.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(max <= 2.0 * min);
}
