//! Smoothness classes and bandwidth selection.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::AsymptoticConstants;
use crate::error::{Error, Result};
use crate::kernels::{equivalent_kernel, sd_constant, Domain, KernelSpec};
use crate::lpreg::{
    holder_bias_slices, lp_weights, maxbias_holder, maxbias_taylor, rd_weights, standard_error, taylor_bias_slices,
    window_weights, LocalFit, Sample, Side,
};
use crate::optim::golden_section;
use crate::poly::Polynomial;

/// Which smoothness restriction the worst-case bias is computed over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `|f(x) − Σ_{j<p} f^{(j)}(0) x^j / j!| ≤ M |x|^p / p!`.
    Taylor,
    /// `f^{(p−1)}` is Lipschitz with constant `M`.
    Holder,
    /// Hölder on either side of a cutoff, with unrestricted jumps at the cutoff.
    RdHolder,
}

impl Family {
    /// Taylor or Hölder, with the RD class mapped to Hölder.
    pub fn is_holder(self) -> bool {
        !matches!(self, Family::Taylor)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Taylor => "taylor",
            Family::Holder => "holder",
            Family::RdHolder => "rd_holder",
        })
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "taylor" => Ok(Family::Taylor),
            "holder" | "hölder" => Ok(Family::Holder),
            "rd_holder" | "rd-holder" | "rd" => Ok(Family::RdHolder),
            _ => Err(Error::domain(format!("unknown function class '{s}'"))),
        }
    }
}

/// A smoothness class: family, order `p` and constant `M`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionClass {
    pub family: Family,
    pub p: usize,
    pub m: f64,
}

impl FunctionClass {
    pub fn new(family: Family, p: usize, m: f64) -> Result<Self> {
        if !(1..=3).contains(&p) {
            return Err(Error::domain(format!("order p must be 1, 2 or 3, got {p}")));
        }
        if !(m.is_finite() && m >= 0.0) {
            return Err(Error::domain(format!("smoothness constant must be finite and nonnegative, got {m}")));
        }
        if family == Family::RdHolder && p != 2 {
            return Err(Error::domain("the regression discontinuity class requires p = 2"));
        }
        Ok(Self { family, p, m })
    }
}

/// Worst-case bias of a single fit over `class` (the RD class is Hölder on
/// the observed side).
pub fn maxbias(fit: &LocalFit, class: &FunctionClass) -> Result<f64> {
    match class.family {
        Family::Taylor => maxbias_taylor(fit, class.p, class.m),
        Family::Holder | Family::RdHolder => maxbias_holder(fit, class.p, class.m),
    }
}

/// Worst-case bias and standard deviation at bandwidth `h`. For the RD class
/// the estimator is the difference of one-sided fits.
pub fn bias_and_sd(
    h: f64,
    x: &[f64],
    k: &KernelSpec,
    q: usize,
    class: &FunctionClass,
    sigma2: &[f64],
) -> Result<(f64, f64)> {
    if class.family == Family::RdHolder {
        let fit = rd_weights(x, h, k, q)?;
        Ok((fit.maxbias_holder(class.p, class.m)?, fit.standard_error(sigma2)))
    } else {
        let fit = lp_weights(x, h, k, q, Side::Both)?;
        Ok((maxbias(&fit, class)?, standard_error(&fit, sigma2)))
    }
}

/// `sqrt(maxbias² + Σ w_i² σ²_i)`.
pub fn rmse_objective(
    h: f64,
    x: &[f64],
    k: &KernelSpec,
    q: usize,
    class: &FunctionClass,
    sigma2: &[f64],
) -> Result<f64> {
    let (b, s) = bias_and_sd(h, x, k, q, class, sigma2)?;
    Ok(b.hypot(s))
}

/// Finite-sample RMSE evaluated over candidate bandwidths, and its minimizer.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RmseCurve {
    /// Admissible `(h, rmse)` pairs in increasing `h`.
    pub evaluated: Vec<(f64, f64)>,
    pub h_star: f64,
    pub rmse: f64,
    pub bias: f64,
    pub sd: f64,
    /// The minimizer sits at an end of the searched range.
    pub at_boundary: bool,
}

const LOG_GRID_POINTS: usize = 50;
/// Above this many distinct `|x_i|`, breakpoint candidates are thinned to
/// evenly spaced order statistics.
const MAX_BREAKPOINTS: usize = 400;

/// Default search range: from the distance to the `(q+2)`-th nearest point
/// (per side for RD) to the bandwidth whose window covers the whole sample.
pub fn default_h_range(x: &[f64], k: &KernelSpec, q: usize, rd: bool) -> Result<(f64, f64)> {
    let radius = k.support_radius();
    let kth = |mut d: Vec<f64>, side: &str| -> Result<f64> {
        d.sort_by(f64::total_cmp);
        d.get(q + 1)
            .copied()
            .ok_or_else(|| Error::insufficient(format!("need at least {} observations{side}", q + 2), d.len()))
    };
    let lo = if rd {
        let plus = kth(x.iter().filter(|v| **v >= 0.0).copied().collect(), " above the cutoff")?;
        let minus = kth(x.iter().filter(|v| **v < 0.0).map(|v| -v).collect(), " below the cutoff")?;
        plus.max(minus)
    } else {
        kth(x.iter().map(|v| v.abs()).collect(), "")?
    };
    let hi = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    Ok((lo / radius, hi / radius * (1.0 + 1e-9)))
}

/// The RMSE objective on a sorted design with reusable weight buffers.
struct Objective<'a> {
    x: Vec<f64>,
    sigma2: Vec<f64>,
    k: &'a KernelSpec,
    q: usize,
    class: &'a FunctionClass,
}

impl<'a> Objective<'a> {
    fn new(x: &[f64], sigma2: &[f64], k: &'a KernelSpec, q: usize, class: &'a FunctionClass) -> Self {
        assert_eq!(x.len(), sigma2.len(), "one variance per observation");
        let mut idx: Vec<usize> = (0..x.len()).collect();
        idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
        Self { x: idx.iter().map(|&i| x[i]).collect(), sigma2: idx.iter().map(|&i| sigma2[i]).collect(), k, q, class }
    }

    fn side(&self, h: f64, side: Side, buf: &mut Vec<f64>) -> Result<(f64, f64)> {
        let (start, _) = window_weights(&self.x, true, h, self.k, self.q, side, buf)?;
        let xs = &self.x[start..start + buf.len()];
        let var: f64 = buf.iter().zip(&self.sigma2[start..]).map(|(w, s)| w * w * s).sum();
        let (p, m) = (self.class.p, self.class.m);
        let bias = match self.class.family {
            Family::Taylor => taylor_bias_slices(xs, buf, p, m)?,
            Family::Holder | Family::RdHolder => holder_bias_slices(xs, buf, true, p, m)?,
        };
        Ok((bias, var))
    }

    fn bias_and_sd(&self, h: f64, buf: &mut Vec<f64>) -> Result<(f64, f64)> {
        if self.class.family == Family::RdHolder {
            let (bp, vp) = self.side(h, Side::Plus, buf)?;
            let (bm, vm) = self.side(h, Side::Minus, buf)?;
            Ok((bp + bm, (vp + vm).sqrt()))
        } else {
            let (b, v) = self.side(h, Side::Both, buf)?;
            Ok((b, v.sqrt()))
        }
    }
}

/// Minimizes the finite-sample RMSE: a candidate grid of window breakpoints
/// and a log grid, then golden-section refinement around the best candidate.
pub fn minimize_rmse(
    x: &[f64],
    k: &KernelSpec,
    q: usize,
    class: &FunctionClass,
    sigma2: &[f64],
    h_range: Option<(f64, f64)>,
) -> Result<RmseCurve> {
    let rd = class.family == Family::RdHolder;
    let (mut lo, hi) = match h_range {
        Some(r) => r,
        None => default_h_range(x, k, q, rd)?,
    };
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        return Err(Error::domain(format!("invalid bandwidth range [{lo}, {hi}]")));
    }
    let obj = Objective::new(x, sigma2, k, q, class);
    let mut buf = Vec::with_capacity(x.len());
    // Grow the lower end until the fit is identified.
    while obj.bias_and_sd(lo, &mut buf).is_err() {
        lo *= 1.1;
        if lo > hi {
            return Err(obj
                .bias_and_sd(hi, &mut buf)
                .err()
                .unwrap_or_else(|| Error::insufficient("no admissible bandwidth in the search range", 0)));
        }
    }

    let radius = k.support_radius();
    let mut breaks: Vec<f64> =
        obj.x.iter().map(|v| v.abs() / radius * (1.0 + 1e-9)).filter(|h| (lo..=hi).contains(h)).collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    if breaks.len() > MAX_BREAKPOINTS {
        let step = breaks.len() as f64 / MAX_BREAKPOINTS as f64;
        breaks = (0..MAX_BREAKPOINTS).map(|i| breaks[(i as f64 * step) as usize]).collect();
    }
    let mut grid = breaks;
    let ratio = (hi / lo).ln();
    grid.extend((0..LOG_GRID_POINTS).map(|i| lo * (ratio * i as f64 / (LOG_GRID_POINTS - 1) as f64).exp()));
    grid.push(hi);
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let values: Vec<Option<(f64, f64)>> =
        grid.par_iter().map_init(|| Vec::with_capacity(x.len()), |buf, &h| obj.bias_and_sd(h, buf).ok()).collect();
    let evaluated: Vec<(f64, f64)> =
        grid.iter().zip(&values).filter_map(|(&h, v)| v.map(|(b, s)| (h, b.hypot(s)))).collect();
    let best = evaluated
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::insufficient("no admissible bandwidth in the search range", 0))?;

    let (mut h_star, mut rmse) = evaluated[best];
    let a = evaluated[best.saturating_sub(1)].0;
    let b = evaluated[(best + 1).min(evaluated.len() - 1)].0;
    if b > a {
        let f = |h: f64| obj.bias_and_sd(h, &mut Vec::new()).map_or(f64::INFINITY, |(b, s)| b.hypot(s));
        let (h, r) = golden_section(f, a, b, 1e-10 * b);
        if r < rmse {
            h_star = h;
            rmse = r;
        }
    }
    let (bias, sd) = obj.bias_and_sd(h_star, &mut buf)?;
    let at_boundary = best == 0 || best == evaluated.len() - 1;
    Ok(RmseCurve { evaluated, h_star, rmse, bias, sd, at_boundary })
}

/// Asymptotic RMSE-optimal bandwidth `(S² / (2p n M² B²))^{1/(2p+1)}`, with
/// `p = γ_b` and `B` the class-appropriate constant in `c`.
pub fn plugin_hrmse(c: &AsymptoticConstants, m: f64, n: f64) -> f64 {
    let p = c.gamma_b;
    (c.s * c.s / (2.0 * p * n * m * m * c.b * c.b)).powf(1.0 / (2.0 * p + 1.0))
}

/// RD version with a boundary local linear estimator on each side:
/// `(∫₀^∞ k*₁² / (∫₀^∞ u² k*₁)² · (σ²₊ + σ²₋) / (4 d n M²))^{1/5}`.
pub fn plugin_hrmse_rd(k: &KernelSpec, sigma2_plus: f64, sigma2_minus: f64, d: f64, m: f64, n: f64) -> Result<f64> {
    let ks = equivalent_kernel(k, 1, Domain::Boundary)?;
    let b = ks.moment(2);
    Ok((sd_constant(&ks) / (b * b) * (sigma2_plus + sigma2_minus) / (4.0 * d * n * m * m)).powf(0.2))
}

/// Bandwidth under pointwise asymptotics; infinite when the bias term vanishes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", content = "h", rename_all = "lowercase")]
pub enum PointwiseBandwidth {
    Finite(f64),
    /// The leading bias is zero, so the criterion keeps decreasing in `h`.
    Infinite,
}

impl PointwiseBandwidth {
    pub fn value(self) -> f64 {
        match self {
            PointwiseBandwidth::Finite(h) => h,
            PointwiseBandwidth::Infinite => f64::INFINITY,
        }
    }
}

/// Constants with the bias constant replaced by `|∫ t^p k*_q| / p!`, the
/// leading bias at `f(x) = x^p / p!`.
pub fn pointwise_constants(
    k: &KernelSpec,
    q: usize,
    p: usize,
    domain: Domain,
    d: f64,
    sigma0: f64,
) -> Result<AsymptoticConstants> {
    let ks = equivalent_kernel(k, q, domain)?;
    let fact: f64 = (1..=p).map(|i| i as f64).product();
    Ok(AsymptoticConstants::from_parts(
        p,
        ks.moment(p).abs() / fact,
        d.powf(-0.5) * sigma0 * sd_constant(&ks).sqrt(),
        d,
        sigma0,
    ))
}

/// Pointwise-optimal bandwidth with `f^{(p)}(0)` in place of `M`; `c` should
/// come from [`pointwise_constants`].
pub fn pointwise_bandwidth(c: &AsymptoticConstants, f_p0: f64, n: f64) -> PointwiseBandwidth {
    if f_p0 == 0.0 || c.b == 0.0 {
        PointwiseBandwidth::Infinite
    } else {
        PointwiseBandwidth::Finite(plugin_hrmse(c, f_p0.abs(), n))
    }
}

/// Least-squares polynomial of the given degree and its residual sum of squares.
fn global_poly_fit(x: &[f64], y: &[f64], degree: usize) -> Result<(Polynomial, f64)> {
    let n = x.len();
    let scale = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if scale == 0.0 {
        return Err(Error::DegenerateDesign("all design points are at zero".into()));
    }
    let design = DMatrix::from_fn(n, degree + 1, |i, j| (x[i] / scale).powi(j as i32));
    let svd = design.clone().svd(true, true);
    let (smax, smin) = (svd.singular_values.max(), svd.singular_values.min());
    if !(smin > smax * 1e-12) {
        return Err(Error::DegenerateDesign(format!(
            "global polynomial of degree {degree} is not identified ({n} observations)"
        )));
    }
    let yv = DVector::from_column_slice(y);
    let beta = svd.solve(&yv, 0.0).map_err(|e| Error::DegenerateDesign(e.to_string()))?;
    let rss = (design * &beta - yv).norm_squared();
    let fitted = Polynomial::new(beta.iter().copied().collect()).dilate(1.0 / scale);
    Ok((fitted, rss))
}

fn sup_abs_on(f: &Polynomial, a: f64, b: f64) -> f64 {
    let mut pts = vec![a, b];
    pts.extend(f.derivative().roots_in(a, b));
    pts.into_iter().map(|u| f.eval(u).abs()).fold(0.0, f64::max)
}

fn split_sides(sample: &Sample) -> [(Vec<f64>, Vec<f64>); 2] {
    let cut = sample.x().partition_point(|v| *v < 0.0);
    let (x, y) = (sample.x(), sample.y());
    [(x[..cut].to_vec(), y[..cut].to_vec()), (x[cut..].to_vec(), y[cut..].to_vec())]
}

/// Rule of thumb for `M`: the sup over the design range of `|f̆^{(p)}|`, where
/// `f̆` is a global polynomial of degree `p + 2` (fitted separately on each
/// side of zero for RD). A heuristic; honesty is not guaranteed.
pub fn rot_smoothness(sample: &Sample, p: usize, rd: bool) -> Result<f64> {
    let need = 2 * (p + 3);
    let pieces: Vec<(Vec<f64>, Vec<f64>)> =
        if rd { split_sides(sample).into_iter().collect() } else { vec![(sample.x().to_vec(), sample.y().to_vec())] };
    let mut sup = 0.0f64;
    for (x, y) in &pieces {
        if x.len() < need {
            return Err(Error::insufficient(
                format!("rule of thumb needs at least {need} observations{}", if rd { " per side" } else { "" }),
                x.len(),
            ));
        }
        let (f, _) = global_poly_fit(x, y, p + 2)?;
        let mut dp = f;
        for _ in 0..p {
            dp = dp.derivative();
        }
        sup = sup.max(sup_abs_on(&dp, x[0], x[x.len() - 1]));
    }
    Ok(sup)
}

/// Homoskedastic variance for the RMSE objective, per side for RD.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PreliminaryVariance {
    pub minus: f64,
    pub plus: f64,
}

impl PreliminaryVariance {
    pub fn per_observation(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|&v| if v >= 0.0 { self.plus } else { self.minus }).collect()
    }
}

/// Residual variance of the rule-of-thumb global polynomial fit (degree
/// `p + 2`), with a degrees-of-freedom correction.
pub fn preliminary_sigma2(sample: &Sample, p: usize, rd: bool) -> Result<PreliminaryVariance> {
    let k = p + 3;
    let fit = |x: &[f64], y: &[f64], side: &str| -> Result<f64> {
        if x.len() <= k {
            return Err(Error::insufficient(
                format!("variance estimate needs more than {k} observations{side}"),
                x.len(),
            ));
        }
        let (_, rss) = global_poly_fit(x, y, p + 2)?;
        Ok(rss / (x.len() - k) as f64)
    };
    if rd {
        let [(xm, ym), (xp, yp)] = split_sides(sample);
        Ok(PreliminaryVariance {
            minus: fit(&xm, &ym, " below the cutoff")?,
            plus: fit(&xp, &yp, " above the cutoff")?,
        })
    } else {
        let s = fit(sample.x(), sample.y(), "")?;
        Ok(PreliminaryVariance { minus: s, plus: s })
    }
}
