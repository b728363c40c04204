//! Standard normal distribution function and quantiles.

use statrs::function::erf;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal CDF, evaluated through `erfc` so that both tails keep full
/// relative precision.
pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Upper tail `1 - Φ(x)`.
pub fn sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile `Φ^{-1}(p)` for `p ∈ (0, 1)`.
pub fn quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let mut x = -std::f64::consts::SQRT_2 * erf::erfc_inv(2.0 * p);
    // Halley refinement against the accurate CDF, working in the smaller tail.
    for _ in 0..2 {
        let e = if x < 0.0 { cdf(x) - p } else { (1.0 - p) - sf(x) };
        let dens = INV_SQRT_2PI * (-0.5 * x * x).exp();
        if dens == 0.0 {
            break;
        }
        let u = e / dens;
        x -= u / (1.0 + 0.5 * x * u);
    }
    x
}

/// Standard normal density.
pub fn pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}
