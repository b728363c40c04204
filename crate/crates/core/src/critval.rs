//! Critical values for bias-aware confidence intervals.
//!
//! If an estimator is normal with standard deviation `s` and bias at most
//! `t * s` in absolute value, then `estimate ± cv(t) * s` covers with
//! probability at least `level`, where `cv(t)` is the `level` quantile of the
//! folded normal `|N(t, 1)|`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal;
use crate::optim::brent_root;

/// Worst-case bias divided by the standard deviation.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct BiasSdRatio(f64);

impl BiasSdRatio {
    pub fn new(t: f64) -> Result<Self> {
        if t.is_finite() && t >= 0.0 {
            Ok(Self(t))
        } else {
            Err(Error::domain(format!("bias-sd ratio must be finite and nonnegative, got {t}")))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// Nominal coverage `1 - α`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct ConfidenceLevel(f64);

impl ConfidenceLevel {
    pub fn new(level: f64) -> Result<Self> {
        if level > 0.0 && level < 1.0 {
            Ok(Self(level))
        } else {
            Err(Error::domain(format!("confidence level must lie in (0, 1), got {level}")))
        }
    }

    pub fn from_alpha(alpha: f64) -> Result<Self> {
        Self::new(1.0 - alpha)
    }

    pub fn get(self) -> f64 {
        self.0
    }

    pub fn alpha(self) -> f64 {
        1.0 - self.0
    }

    /// Two-sided normal critical value `z_{1-α/2}`.
    pub fn z_two_sided(self) -> f64 {
        normal::quantile(1.0 - 0.5 * self.alpha())
    }

    /// One-sided normal critical value `z_{1-α}`.
    pub fn z_one_sided(self) -> f64 {
        normal::quantile(self.0)
    }
}

/// `P(|N(t,1)| > c)`, computed from the two tails separately.
pub(crate) fn folded_tail(c: f64, t: f64) -> f64 {
    normal::sf(c - t) + normal::cdf(-c - t)
}

/// The `level` quantile of `|N(t, 1)|`.
pub fn cv(t: BiasSdRatio, level: ConfidenceLevel) -> f64 {
    let t = t.get();
    let alpha = level.alpha();
    let z = level.z_two_sided();
    if t == 0.0 {
        return z;
    }
    // Non-coverage is strictly decreasing in c; at c = t + z it is already below α.
    let lo = if level.get() >= 0.5 { t } else { 0.0 };
    let hi = t + z + 1.0;
    brent_root(|c| folded_tail(c, t) - alpha, lo, hi, 1e-12)
        .expect("folded-normal quantile is bracketed by [t, t + z + 1]")
}

/// Convenience wrapper taking raw numbers.
pub fn cv_raw(t: f64, level: f64) -> Result<f64> {
    Ok(cv(BiasSdRatio::new(t)?, ConfidenceLevel::new(level)?))
}

/// Coverage of `estimate ± z_{1-α/2} * sd` when the bias-sd ratio is `t`.
pub fn coverage_given_ratio(t: BiasSdRatio, level: ConfidenceLevel) -> f64 {
    1.0 - folded_tail(level.z_two_sided(), t.get())
}

/// Inverse of [`coverage_given_ratio`] in `t`.
pub fn invert_coverage(target: f64, level: ConfidenceLevel) -> Result<BiasSdRatio> {
    if !(target > 0.0 && target < level.get()) {
        return Err(Error::NoSolution(format!("target coverage {target} must lie in (0, {})", level.get())));
    }
    let z = level.z_two_sided();
    let miss = 1.0 - target;
    let mut hi = z + 1.0;
    while folded_tail(z, hi) < miss {
        hi *= 2.0;
    }
    let t = brent_root(|t| folded_tail(z, t) - miss, 0.0, hi, 1e-13)?;
    BiasSdRatio::new(t)
}
