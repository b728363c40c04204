//! Closed-form asymptotics: optimal bias-sd ratios and bandwidths, kernel
//! efficiency, and the comparisons with undersmoothing and bias correction.
//!
//! Worst-case bias is `h^{γ_b} M B` and the standard deviation is
//! `n^{-1/2} h^{γ_s} S`; for local polynomials `γ_b = p`, `γ_s = -1/2`, so
//! the rate exponent is `r = 2p / (2p + 1)`.

use serde::{Deserialize, Serialize};

use crate::bandwidth::Family;
use crate::critval::{coverage_given_ratio, cv, invert_coverage, BiasSdRatio, ConfidenceLevel};
use crate::error::{Error, Result};
use crate::kernels::{
    equivalent_kernel, holder_bias_constant, kernel_constants, optimal_kernel_holder2, optimal_kernel_sy, sd_constant,
    taylor_bias_constant, Domain, KernelSpec,
};
use crate::normal;
use crate::optim::golden_section;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticConstants {
    pub gamma_b: f64,
    pub gamma_s: f64,
    pub rate_r: f64,
    /// Bias constant `B_{p,q}(k) / p!`.
    pub b: f64,
    /// Standard deviation constant `d^{-1/2} σ(0) (∫ k*²)^{1/2}`.
    pub s: f64,
    pub d: f64,
    pub sigma0: f64,
}

fn factorial(p: usize) -> f64 {
    (1..=p).map(|i| i as f64).product()
}

impl AsymptoticConstants {
    /// Constants for a local polynomial estimator of order `q` over a class of
    /// order `p`, with design density `d` and residual sd `sigma0` at the point.
    pub fn local_polynomial(
        kernel: &KernelSpec,
        q: usize,
        p: usize,
        family: Family,
        domain: Domain,
        d: f64,
        sigma0: f64,
    ) -> Result<Self> {
        if !(d > 0.0 && sigma0 > 0.0) {
            return Err(Error::domain("design density and residual sd must be positive"));
        }
        let kc = kernel_constants(kernel, q, p, domain)?;
        let bias = if family.is_holder() { kc.holder_bias } else { kc.taylor_bias };
        Ok(Self::from_parts(p, bias / factorial(p), d.powf(-0.5) * sigma0 * kc.sd_constant.sqrt(), d, sigma0))
    }

    /// Local polynomial rates with the given `B` and `S`.
    pub fn from_parts(p: usize, b: f64, s: f64, d: f64, sigma0: f64) -> Self {
        let gamma_b = p as f64;
        let gamma_s = -0.5;
        Self { gamma_b, gamma_s, rate_r: gamma_b / (gamma_b - gamma_s), b, s, d, sigma0 }
    }

    fn exponent(&self) -> f64 {
        self.gamma_b - self.gamma_s
    }
}

/// Rate exponent `2p / (2p + 1)`.
pub fn rate(p: usize) -> f64 {
    2.0 * p as f64 / (2.0 * p as f64 + 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PerformanceCriterion {
    Rmse,
    Flci {
        level: ConfidenceLevel,
    },
    /// Worst-case `beta` quantile of excess length of a one-sided CI.
    Oci {
        level: ConfidenceLevel,
        beta: f64,
    },
}

/// Criterion value for an `N(b, s²)` estimator with worst-case bias `b`.
pub fn tilde_r(criterion: PerformanceCriterion, b: f64, s: f64) -> f64 {
    match criterion {
        PerformanceCriterion::Rmse => b.hypot(s),
        PerformanceCriterion::Flci { level } => {
            let t = BiasSdRatio::new(b / s).expect("nonnegative bias and positive sd");
            s * cv(t, level)
        }
        PerformanceCriterion::Oci { level, beta } => 2.0 * b + (level.z_one_sided() + normal::quantile(beta)) * s,
    }
}

/// Ratio `t` minimizing `t^{r−1} R̃(t, 1)`, which is the bias-sd ratio at the
/// criterion-optimal bandwidth.
pub fn t_star(criterion: PerformanceCriterion, r: f64) -> BiasSdRatio {
    let t = match criterion {
        PerformanceCriterion::Rmse => (1.0 / r - 1.0).sqrt(),
        PerformanceCriterion::Oci { level, beta } => {
            (1.0 / r - 1.0) * (level.z_one_sided() + normal::quantile(beta)) / 2.0
        }
        PerformanceCriterion::Flci { .. } => scaled_argmin(criterion, r).0,
    };
    BiasSdRatio::new(t.max(0.0)).expect("finite optimal ratio")
}

/// `argmin_t t^{r−1} R̃(t, 1)` and the minimum, by golden section on `[1e-6, 10]`.
pub fn scaled_argmin(criterion: PerformanceCriterion, r: f64) -> (f64, f64) {
    golden_section(|t| t.powf(r - 1.0) * tilde_r(criterion, t, 1.0), 1e-6, 10.0, 1e-10)
}

/// Bandwidth at which the bias-sd ratio equals the criterion-optimal `t*`.
pub fn optimal_bandwidth(c: &AsymptoticConstants, m: f64, n: f64, criterion: PerformanceCriterion) -> f64 {
    let t = t_star(criterion, c.rate_r).get();
    bandwidth_for_ratio(c, m, n, t)
}

/// Bandwidth `h` with `h^{γ_b} M B / (n^{-1/2} h^{γ_s} S) = t`.
pub fn bandwidth_for_ratio(c: &AsymptoticConstants, m: f64, n: f64, t: f64) -> f64 {
    (t * c.s / (n.sqrt() * m * c.b)).powf(1.0 / c.exponent())
}

/// Bias-sd ratio `h^{γ_b − γ_s} √n M B / S`.
pub fn ratio_at_bandwidth(c: &AsymptoticConstants, m: f64, n: f64, h: f64) -> f64 {
    h.powf(c.exponent()) * n.sqrt() * m * c.b / c.s
}

/// `S(k₁)^r B(k₁)^{1−r} / (S(k₂)^r B(k₂)^{1−r})`: how much larger the optimized
/// risk of `k₁` is than that of `k₂`.
pub fn relative_kernel_efficiency(k1: &AsymptoticConstants, k2: &AsymptoticConstants) -> Result<f64> {
    if (k1.rate_r - k2.rate_r).abs() > 1e-12 {
        return Err(Error::domain("kernels must share the same rate exponent"));
    }
    let r = k1.rate_r;
    Ok((k1.s / k2.s).powf(r) * (k1.b / k2.b).powf(1.0 - r))
}

/// How much longer the FLCI is when the bandwidth is RMSE-optimal rather than
/// FLCI-optimal.
pub fn flci_at_rmse_inefficiency(r: f64, level: ConfidenceLevel) -> f64 {
    let flci = PerformanceCriterion::Flci { level };
    let scaled = |t: f64| t.powf(r - 1.0) * tilde_r(flci, t, 1.0);
    let t_rmse = t_star(PerformanceCriterion::Rmse, r).get();
    let (_, best) = scaled_argmin(flci, r);
    scaled(t_rmse) / best
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RbcComparison {
    /// Bias-sd ratio of the bias-corrected estimator at the RMSE-optimal
    /// bandwidth for the local linear estimator.
    pub t_rbc: f64,
    pub coverage: f64,
    /// Length relative to the FLCI based on the local linear estimator.
    pub length_ratio: f64,
}

/// Robust bias correction at `h = b = h_RMSE` for `p = 2`: a local quadratic
/// estimate with the usual critical value, against the honest local linear FLCI.
pub fn rbc_comparison(
    kernel: &KernelSpec,
    domain: Domain,
    family: Family,
    level: ConfidenceLevel,
) -> Result<RbcComparison> {
    let k1 = equivalent_kernel(kernel, 1, domain)?;
    let k2 = equivalent_kernel(kernel, 2, domain)?;
    let bias = |k| {
        if family.is_holder() {
            holder_bias_constant(k, 2)
        } else {
            taylor_bias_constant(k, 2)
        }
    };
    let (s1, s2) = (sd_constant(&k1), sd_constant(&k2));
    let t_rbc = 0.5 * bias(&k2)? / bias(&k1)? * (s1 / s2).sqrt();
    let z = level.z_two_sided();
    let coverage = normal::cdf(t_rbc + z) - normal::cdf(t_rbc - z);
    let cv_half = cv(BiasSdRatio::new(0.5)?, level);
    let length_ratio = z * s2.sqrt() / (cv_half * s1.sqrt());
    Ok(RbcComparison { t_rbc, coverage, length_ratio })
}

/// Largest smoothness constant for which a CI with the usual critical value at
/// bandwidth `h` undercovers by at most `eta`.
pub fn implied_smoothness(h: f64, c: &AsymptoticConstants, n: f64, level: ConfidenceLevel, eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta < level.get()) {
        return Err(Error::domain(format!("undercoverage budget must lie in (0, level), got {eta}")));
    }
    let t = invert_coverage(level.get() - eta, level)?.get();
    Ok(t * c.s / (n.sqrt() * h.powf(c.exponent()) * c.b))
}

/// Coverage of the usual CI when the bias-sd ratio is `t` (re-exported for
/// convenience alongside [`implied_smoothness`]).
pub fn naive_coverage(t: f64, level: ConfidenceLevel) -> Result<f64> {
    Ok(coverage_given_ratio(BiasSdRatio::new(t)?, level))
}

/// Efficiency of a common RD bandwidth relative to separate bandwidths on the
/// two sides when the residual sd ratio between the sides is `varsigma`.
pub fn two_bandwidth_efficiency(varsigma: f64, r: f64) -> Result<f64> {
    if !(varsigma > 0.0 && r > 0.0 && r < 1.0) {
        return Err(Error::domain("need varsigma > 0 and r in (0, 1)"));
    }
    let num = 2f64.powf(r - 1.0) * (1.0 + varsigma.powf(2.0 * r / (2.0 - r))).powf(1.0 - r / 2.0);
    Ok(num / (1.0 + varsigma * varsigma).powf(r / 2.0))
}

/// Risk under the Hölder class relative to the Taylor class for the same kernel
/// and `q = p − 1`.
pub fn holder_vs_taylor_gain(kernel: &KernelSpec, p: usize, domain: Domain) -> Result<f64> {
    holder_vs_taylor_gain_kernels(kernel, kernel, p, domain)
}

/// As [`holder_vs_taylor_gain`], comparing the Hölder risk of `holder_kernel`
/// with the Taylor risk of `taylor_kernel`.
pub fn holder_vs_taylor_gain_kernels(
    holder_kernel: &KernelSpec,
    taylor_kernel: &KernelSpec,
    p: usize,
    domain: Domain,
) -> Result<f64> {
    let q = p.checked_sub(1).ok_or_else(|| Error::domain("p must be at least 1"))?;
    let h = AsymptoticConstants::local_polynomial(holder_kernel, q, p, Family::Holder, domain, 1.0, 1.0)?;
    let t = AsymptoticConstants::local_polynomial(taylor_kernel, q, p, Family::Taylor, domain, 1.0, 1.0)?;
    relative_kernel_efficiency(&h, &t)
}

/// The kernel and order against which efficiencies are reported: the optimal
/// kernel where it is known, the triangular kernel with `q = p − 1` otherwise.
pub fn reference_kernel(family: Family, p: usize, domain: Domain) -> Result<(KernelSpec, usize)> {
    let q = p.checked_sub(1).ok_or_else(|| Error::domain("p must be at least 1"))?;
    let kernel = match (family.is_holder(), p) {
        (false, _) | (true, 1) => optimal_kernel_sy(p, domain)?,
        (true, 2) => optimal_kernel_holder2(domain),
        (true, _) => KernelSpec::triangular(domain),
    };
    Ok((kernel, q))
}

/// Efficiency of `kernel` with order `q` for a class of order `p`, relative to
/// [`reference_kernel`]. Values are at most one when the reference is optimal.
pub fn kernel_efficiency(kernel: &KernelSpec, q: usize, p: usize, family: Family, domain: Domain) -> Result<f64> {
    let (opt, q_opt) = reference_kernel(family, p, domain)?;
    efficiency_against(kernel, q, &opt, q_opt, p, family, domain)
}

/// Efficiency of `(kernel, q)` relative to `(reference, q_ref)`.
pub fn efficiency_against(
    kernel: &KernelSpec,
    q: usize,
    reference: &KernelSpec,
    q_ref: usize,
    p: usize,
    family: Family,
    domain: Domain,
) -> Result<f64> {
    let k = AsymptoticConstants::local_polynomial(kernel, q, p, family, domain, 1.0, 1.0)?;
    let o = AsymptoticConstants::local_polynomial(reference, q_ref, p, family, domain, 1.0, 1.0)?;
    relative_kernel_efficiency(&o, &k)
}
