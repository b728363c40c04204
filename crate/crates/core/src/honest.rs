//! Honest confidence intervals at a point and for sharp regression
//! discontinuity.

use serde::{Deserialize, Serialize};

use crate::asymptotics::rate;
use crate::bandwidth::{maxbias, minimize_rmse, preliminary_sigma2, Family, FunctionClass};
use crate::critval::{cv, folded_tail, BiasSdRatio, ConfidenceLevel};
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::lpreg::{lp_weights, nn_variance, rd_weights, standard_error, Sample, Side};

/// Which bias-sd ratio indexes the critical value.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvMethod {
    /// `maxbias / se` at the bandwidth used.
    #[default]
    FiniteSample,
    /// `√(1/r − 1)`, the ratio at the asymptotically RMSE-optimal bandwidth.
    Asymptotic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CiOptions {
    pub level: ConfidenceLevel,
    /// Bandwidth; minimizes the finite-sample worst-case RMSE when absent.
    pub h: Option<f64>,
    /// Neighbors in the variance estimator.
    pub j: usize,
    pub cv_method: CvMethod,
}

impl CiOptions {
    pub fn new(level: ConfidenceLevel) -> Self {
        Self { level, h: None, j: 3, cv_method: CvMethod::FiniteSample }
    }

    pub fn with_bandwidth(mut self, h: f64) -> Self {
        self.h = Some(h);
        self
    }

    pub fn with_neighbors(mut self, j: usize) -> Self {
        self.j = j;
        self
    }

    pub fn with_cv_method(mut self, m: CvMethod) -> Self {
        self.cv_method = m;
        self
    }
}

/// An estimate with its two-sided fixed-length CI and lower one-sided CI.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HonestResult {
    pub estimate: f64,
    pub se: f64,
    pub maxbias: f64,
    /// `maxbias / se` (infinite when `se = 0` and the bias is not).
    pub ratio_t: f64,
    pub cv: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub oci_lower: f64,
    /// Upper end of the upper one-sided CI.
    pub oci_upper: f64,
    pub h_used: f64,
    pub m_used: f64,
    pub p: usize,
    pub q: usize,
    pub kernel: String,
    pub family: Family,
    pub level: f64,
    pub effective_n: usize,
    /// Smallest `α` for which zero lies outside the fixed-length CI.
    pub p_value: f64,
}

impl HonestResult {
    pub fn half_length(&self) -> f64 {
        0.5 * (self.ci_upper - self.ci_lower)
    }

    pub fn contains(&self, v: f64) -> bool {
        self.ci_lower <= v && v <= self.ci_upper
    }
}

/// `P(|N(t,1)| > |estimate| / se)`: the FLCI at level `1 − α` excludes zero
/// exactly when `cv_{1−α}(t) < |estimate| / se`.
pub fn p_value(estimate: f64, se: f64, t: f64) -> f64 {
    if se == 0.0 {
        return if estimate == 0.0 { 1.0 } else { 0.0 };
    }
    folded_tail(estimate.abs() / se, t).clamp(0.0, 1.0)
}

struct Pieces {
    estimate: f64,
    se: f64,
    maxbias: f64,
    h: f64,
    effective_n: usize,
}

fn assemble(pc: Pieces, class: &FunctionClass, q: usize, k: &KernelSpec, opts: &CiOptions) -> Result<HonestResult> {
    let Pieces { estimate, se, maxbias, h, effective_n } = pc;
    let level = opts.level;
    let (t, c, half) = match opts.cv_method {
        CvMethod::Asymptotic => {
            let t = (1.0 / rate(class.p) - 1.0).sqrt();
            let c = cv(BiasSdRatio::new(t)?, level);
            (t, c, c * se)
        }
        CvMethod::FiniteSample if se > 0.0 => {
            let t = maxbias / se;
            let c = cv(BiasSdRatio::new(t)?, level);
            (t, c, c * se)
        }
        CvMethod::FiniteSample if maxbias == 0.0 => (0.0, level.z_two_sided(), 0.0),
        // No noise: the interval is the bias bound itself.
        CvMethod::FiniteSample => (f64::INFINITY, f64::INFINITY, maxbias),
    };
    let z1 = level.z_one_sided();
    Ok(HonestResult {
        estimate,
        se,
        maxbias,
        ratio_t: t,
        cv: c,
        ci_lower: estimate - half,
        ci_upper: estimate + half,
        oci_lower: estimate - maxbias - z1 * se,
        oci_upper: estimate + maxbias + z1 * se,
        h_used: h,
        m_used: class.m,
        p: class.p,
        q,
        kernel: k.name.to_string(),
        family: class.family,
        level: level.get(),
        effective_n,
        p_value: if t.is_finite() { p_value(estimate, se, t) } else { p_value(estimate, 0.0, 0.0) },
    })
}

fn point_estimate(
    sample: &Sample,
    class: &FunctionClass,
    k: &KernelSpec,
    q: usize,
    opts: &CiOptions,
) -> Result<Pieces> {
    if class.family == Family::RdHolder {
        return Err(Error::domain("use rd_estimate for the regression discontinuity class"));
    }
    if q + 1 < class.p {
        return Err(Error::InfiniteBias(format!(
            "order q = {q} is too low for smoothness p = {}; use q ≥ {}",
            class.p,
            class.p - 1
        )));
    }
    let x = sample.x();
    let h = match opts.h {
        Some(h) => h,
        None => {
            let s2 = preliminary_sigma2(sample, class.p, false)?.per_observation(x);
            minimize_rmse(x, k, q, class, &s2, None)?.h_star
        }
    };
    let fit = lp_weights(x, h, k, q, Side::Both)?;
    let sigma2 = nn_variance(sample, opts.j, false)?;
    Ok(Pieces {
        estimate: crate::lpreg::estimate(&fit, sample.y()),
        se: standard_error(&fit, &sigma2),
        maxbias: maxbias(&fit, class)?,
        h,
        effective_n: fit.effective_n,
    })
}

/// `T̂ ± cv(maxbias/se)·se` for `f(0)` over `class`, with the point at `x = 0`.
pub fn flci_at_point(
    sample: &Sample,
    class: &FunctionClass,
    k: &KernelSpec,
    q: usize,
    opts: &CiOptions,
) -> Result<HonestResult> {
    let pc = point_estimate(sample, class, k, q, opts)?;
    assemble(pc, class, q, k, opts)
}

/// One-sided CI `[T̂ − maxbias − z_{1−α}·se, ∞)`; the returned result also
/// carries the two-sided interval at the same bandwidth.
pub fn oci_at_point(
    sample: &Sample,
    class: &FunctionClass,
    k: &KernelSpec,
    q: usize,
    opts: &CiOptions,
) -> Result<HonestResult> {
    flci_at_point(sample, class, k, q, opts)
}

/// Sharp RD: the jump at zero estimated by boundary local linear fits on each
/// side with a common bandwidth, over the class of functions whose second
/// derivative is bounded by `m` on either side.
pub fn rd_estimate(sample: &Sample, m: f64, k: &KernelSpec, opts: &CiOptions) -> Result<HonestResult> {
    let class = FunctionClass::new(Family::RdHolder, 2, m)?;
    let q = 1;
    let x = sample.x();
    let h = match opts.h {
        Some(h) => h,
        None => {
            let s2 = preliminary_sigma2(sample, class.p, true)?.per_observation(x);
            minimize_rmse(x, k, q, &class, &s2, None)?.h_star
        }
    };
    let fit = rd_weights(x, h, k, q)?;
    let sigma2 = nn_variance(sample, opts.j, true)?;
    let pc = Pieces {
        estimate: fit.estimate(sample.y()),
        se: fit.standard_error(&sigma2),
        maxbias: fit.maxbias_holder(2, m)?,
        h,
        effective_n: fit.plus.effective_n + fit.minus.effective_n,
    };
    assemble(pc, &class, q, k, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::Domain;
    use approx::assert_relative_eq;

    fn grid(n: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / n as f64).collect()
    }

    fn noisy(x: &[f64], f: impl Fn(f64) -> f64) -> Vec<f64> {
        // Deterministic alternating noise keeps the tests free of RNG state.
        x.iter().enumerate().map(|(i, &v)| f(v) + 0.5 * ((i * 7919 % 13) as f64 / 6.0 - 1.0)).collect()
    }

    fn level(l: f64) -> ConfidenceLevel {
        ConfidenceLevel::new(l).unwrap()
    }

    #[test]
    fn constant_function_without_noise() {
        let x = grid(200, -1.0, 1.0);
        let s = Sample::new(x, vec![4.2; 200]).unwrap();
        let class = FunctionClass::new(Family::Holder, 2, 1.0).unwrap();
        let k = KernelSpec::triangular(Domain::Interior);
        let r = flci_at_point(&s, &class, &k, 1, &CiOptions::new(level(0.95)).with_bandwidth(0.3)).unwrap();
        assert_relative_eq!(r.estimate, 4.2, epsilon = 1e-12);
        assert!(r.contains(4.2));
        assert_eq!(r.se, 0.0);
        assert_relative_eq!(r.half_length(), r.maxbias, epsilon = 1e-15);
    }

    #[test]
    fn result_invariants() {
        let x = grid(400, -1.0, 1.0);
        let s = Sample::new(x.clone(), noisy(&x, |v| v * v)).unwrap();
        let class = FunctionClass::new(Family::Holder, 2, 2.0).unwrap();
        let k = KernelSpec::triangular(Domain::Interior);
        let opts = CiOptions::new(level(0.95));
        let r = flci_at_point(&s, &class, &k, 1, &opts).unwrap();
        assert_relative_eq!(r.ci_lower, r.estimate - r.cv * r.se, epsilon = 1e-12);
        assert_relative_eq!(r.ci_upper, r.estimate + r.cv * r.se, epsilon = 1e-12);
        assert_relative_eq!(r.cv, cv(BiasSdRatio::new(r.maxbias / r.se).unwrap(), opts.level), epsilon = 1e-12);
        assert_relative_eq!(r.oci_lower, r.estimate - r.maxbias - opts.level.z_one_sided() * r.se, epsilon = 1e-12);
        // The finite-sample ratio at the RMSE bandwidth is close to 1/2.
        assert!((r.ratio_t - 0.5).abs() < 0.1, "t = {}", r.ratio_t);
        // Conservative interval contains the FLCI.
        let cons = r.maxbias + opts.level.z_two_sided() * r.se;
        assert!(r.half_length() <= cons);
    }

    #[test]
    fn nesting_and_monotonicity() {
        let x = grid(300, -1.0, 1.0);
        let s = Sample::new(x.clone(), noisy(&x, f64::sin)).unwrap();
        let k = KernelSpec::epanechnikov(Domain::Interior);
        let c = FunctionClass::new(Family::Taylor, 2, 1.0).unwrap();
        let base = CiOptions::new(level(0.95)).with_bandwidth(0.4);
        let r95 = flci_at_point(&s, &c, &k, 1, &base).unwrap();
        let r99 = flci_at_point(&s, &c, &k, 1, &CiOptions { level: level(0.99), ..base }).unwrap();
        assert!(r99.ci_lower <= r95.ci_lower && r95.ci_upper <= r99.ci_upper);
        let mut prev = 0.0;
        for m in [0.0, 0.5, 1.0, 2.0, 5.0] {
            let c = FunctionClass::new(Family::Taylor, 2, m).unwrap();
            let len = flci_at_point(&s, &c, &k, 1, &base).unwrap().half_length();
            assert!(len >= prev);
            prev = len;
        }
    }

    #[test]
    fn zero_bias_gives_classical_intervals() {
        let x = grid(300, -1.0, 1.0);
        let s = Sample::new(x.clone(), noisy(&x, |v| v)).unwrap();
        let k = KernelSpec::triangular(Domain::Interior);
        let c = FunctionClass::new(Family::Holder, 2, 0.0).unwrap();
        let opts = CiOptions::new(level(0.9)).with_bandwidth(0.5);
        let r = oci_at_point(&s, &c, &k, 1, &opts).unwrap();
        assert_relative_eq!(r.oci_lower, r.estimate - opts.level.z_one_sided() * r.se, epsilon = 1e-14);
        assert_relative_eq!(r.cv, opts.level.z_two_sided(), epsilon = 1e-12);
    }

    #[test]
    fn order_too_low() {
        let x = grid(50, -1.0, 1.0);
        let s = Sample::new(x.clone(), x.clone()).unwrap();
        let c = FunctionClass::new(Family::Holder, 3, 1.0).unwrap();
        let k = KernelSpec::triangular(Domain::Interior);
        let e = flci_at_point(&s, &c, &k, 1, &CiOptions::new(level(0.95)).with_bandwidth(0.5));
        assert!(matches!(e, Err(Error::InfiniteBias(_))));
    }

    #[test]
    fn asymptotic_cv_option() {
        let x = grid(300, -1.0, 1.0);
        let s = Sample::new(x.clone(), noisy(&x, f64::cos)).unwrap();
        let k = KernelSpec::triangular(Domain::Interior);
        let c = FunctionClass::new(Family::Holder, 2, 1.0).unwrap();
        let opts = CiOptions::new(level(0.95)).with_bandwidth(0.4).with_cv_method(CvMethod::Asymptotic);
        let r = flci_at_point(&s, &c, &k, 1, &opts).unwrap();
        assert!((r.cv - 2.181).abs() < 5e-4);
    }

    #[test]
    fn p_value_matches_interval() {
        let (est, se, t) = (0.9, 0.4, 0.5);
        let p = p_value(est, se, t);
        // At level 1 − p the interval just touches zero.
        let c = cv(BiasSdRatio::new(t).unwrap(), ConfidenceLevel::new(1.0 - p).unwrap());
        assert_relative_eq!(c * se, est, max_relative = 1e-9);
        assert_eq!(p_value(0.0, 0.0, 0.0), 1.0);
    }

    #[test]
    fn rd_jump_recovered_exactly() {
        let x = grid(400, -1.0, 1.0);
        let y: Vec<f64> = x.iter().map(|&v| 0.7 * (v >= 0.0) as u8 as f64 + 0.3 - 1.2 * v).collect();
        let s = Sample::new(x, y).unwrap();
        let k = KernelSpec::triangular(Domain::Boundary);
        let r = rd_estimate(&s, 1.0, &k, &CiOptions::new(level(0.95)).with_bandwidth(0.5)).unwrap();
        assert_relative_eq!(r.estimate, 0.7, epsilon = 1e-12);
        assert!(r.contains(0.7));
    }

    #[test]
    fn rd_bias_identity_and_mirror() {
        // Asymmetric design: the signed sum formula still equals the exact bound.
        let x: Vec<f64> = grid(97, -1.0, 0.0).into_iter().chain(grid(61, 0.0, 0.8)).collect();
        let k = KernelSpec::triangular(Domain::Boundary);
        let m = 2.0;
        let fit = rd_weights(&x, 0.45, &k, 1).unwrap();
        let signed: f64 =
            x.iter().zip(fit.plus.weights.iter().zip(&fit.minus.weights)).map(|(x, (a, b))| (a + b) * x * x).sum();
        assert!((fit.maxbias_holder(2, m).unwrap() - m / 2.0 * signed.abs()).abs() < 1e-10);
        // Mirror design: both sides contribute equally.
        let half = grid(80, 0.0, 1.0);
        let xs: Vec<f64> = half.iter().map(|v| -v).rev().chain(half.iter().copied()).collect();
        let fit = rd_weights(&xs, 0.5, &k, 1).unwrap();
        let one = crate::lpreg::maxbias_holder(&fit.plus, 2, m).unwrap();
        assert_relative_eq!(fit.maxbias_holder(2, m).unwrap(), 2.0 * one, max_relative = 1e-12);
    }

    #[test]
    fn rd_names_the_empty_side() {
        let x = grid(40, 0.0, 1.0);
        let s = Sample::new(x.clone(), x).unwrap();
        let k = KernelSpec::triangular(Domain::Boundary);
        let e = rd_estimate(&s, 1.0, &k, &CiOptions::new(level(0.95)).with_bandwidth(0.5)).unwrap_err();
        match e {
            Error::InsufficientData { reason, .. } => assert!(reason.contains("below")),
            e => panic!("unexpected {e}"),
        }
    }
}
