//! Distribution-free checks: Kolmogorov–Smirnov against a continuous CDF,
//! and a Gil-Pelaez CDF built directly from a characteristic exponent.

use crate::error::{Error, Result};
use crate::quad::{integrate_left_singular, integrate_with_limit};
use crate::symbol::Exponent;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub count: usize,
}

/// Asymptotic Kolmogorov tail `Q(x) = 2 Σ (-1)^{k-1} e^{-2k²x²}`.
pub fn kolmogorov_q(x: f64) -> f64 {
    if x < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * x * x).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// One-sample KS test; `cdf` is evaluated on the sorted sample.
pub fn ks_test<F: Fn(f64) -> f64 + Sync>(samples: &[f64], cdf: F) -> Result<KsResult> {
    if samples.is_empty() || samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("KS test needs finite samples".into()));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = xs.len() as f64;
    let f = crate::par::map_slice(&xs, |&x| cdf(x));
    let d = f
        .iter()
        .enumerate()
        .map(|(i, &fi)| (fi - i as f64 / n).max((i + 1) as f64 / n - fi))
        .fold(0.0, f64::max);
    let sq = n.sqrt();
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_q((sq + 0.12 + 0.11 / sq) * d),
        count: xs.len(),
    })
}

/// `P(X_t ≤ x)` for a one-dimensional exponent by the Gil-Pelaez formula
/// `1/2 - (1/π) ∫₀^∞ Im(e^{-iux} e^{-tψ(u)}) / u du`.
pub fn gil_pelaez_cdf<E: Exponent + ?Sized>(exponent: &E, t: f64, x: f64) -> Result<f64> {
    if exponent.dim() != 1 {
        return Err(Error::Domain("Gil-Pelaez CDF is one-dimensional".into()));
    }
    let integrand = |u: f64| {
        if u == 0.0 {
            return 0.0;
        }
        let phi =
            (-t * exponent.eval(&[u])).exp() * num_complex::Complex64::from_polar(1.0, -u * x);
        phi.im / u
    };
    // cut the frequency range where |e^{-tψ}| < 1e-17
    let mut top = 1.0;
    while (-t * exponent.eval(&[top]).re).exp() > 1e-17
        || (-t * exponent.eval(&[-top]).re).exp() > 1e-17
    {
        top *= 2.0;
        if top > 1e12 {
            return Err(Error::Domain(
                "characteristic function does not decay".into(),
            ));
        }
    }
    // split into pieces of a few oscillation periods each
    let period = if x == 0.0 {
        top
    } else {
        (2.0 * std::f64::consts::PI / x.abs()).max(top / 4096.0)
    };
    let pieces = ((top / period).ceil() as usize).clamp(1, 4096);
    let mut total = 0.0;
    for k in 0..pieces {
        let a = top * k as f64 / pieces as f64;
        let b = top * (k + 1) as f64 / pieces as f64;
        total += if k == 0 {
            // the integrand may behave like u^{α-1} or log u at the origin
            integrate_left_singular(integrand, a, b, 3.0, 1e-12, 1e-11)?.value
        } else {
            integrate_with_limit(integrand, a, b, 1e-12, 1e-11, 2000)?.value
        };
    }
    Ok(0.5 - total / std::f64::consts::PI)
}

/// Mean and standard error with a fixed summation order.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
