//! Coverage simulations for inference at a point, on the three regression
//! designs with `x ~ U[−1, 1]` and normal noise.
//!
//! Each draw has its own ChaCha20 stream (key from the base seed, stream id
//! from the draw index), so results do not depend on scheduling or on the
//! number of threads.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bandwidth::{minimize_rmse, preliminary_sigma2, rot_smoothness, Family, FunctionClass};
use crate::critval::ConfidenceLevel;
use crate::error::{Error, Result};
use crate::honest::{flci_at_point, CiOptions};
use crate::kernels::{Domain, KernelSpec};
use crate::lpreg::{estimate, lp_weights, nn_variance, standard_error, Sample, Side};

fn pos(v: f64) -> f64 {
    v.max(0.0)
}

/// A regression design: `f_id` scaled by `m`, `n` points, noise sd `sigma`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub id: u8,
    pub m: f64,
    pub n: usize,
    pub sigma: f64,
}

impl Design {
    /// Defaults: `n = 500`, noise sd `1/2`.
    pub fn new(id: u8, m: f64) -> Result<Self> {
        if !(1..=3).contains(&id) {
            return Err(Error::domain(format!("design id must be 1, 2 or 3, got {id}")));
        }
        if !(m >= 0.0 && m.is_finite()) {
            return Err(Error::domain(format!("design constant must be nonnegative, got {m}")));
        }
        Ok(Self { id, m, n: 500, sigma: 0.5 })
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    /// Regression function; each lies in the Hölder class of order 2 with
    /// constant `m`, and all vanish at zero.
    pub fn f(&self, x: f64) -> f64 {
        let a = x.abs();
        let g = match self.id {
            1 => x * x - 2.0 * pos(a - 0.25).powi(2),
            2 => x * x - 2.0 * pos(a - 0.2).powi(2) + 2.0 * pos(a - 0.5).powi(2) - 2.0 * pos(a - 0.65).powi(2),
            _ => {
                (x + 1.0).powi(2) - 2.0 * pos(x + 0.2).powi(2) + 2.0 * pos(x - 0.2).powi(2) - 2.0 * pos(x - 0.4).powi(2)
                    + 2.0 * pos(x - 0.7).powi(2)
                    - 0.92
            }
        };
        0.5 * self.m * g
    }

    /// Draw `index` of the experiment keyed by `seed`.
    pub fn draw(&self, seed: u64, index: u64) -> Sample {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(index);
        let ux = Uniform::new_inclusive(-1.0, 1.0);
        let noise = Normal::new(0.0, self.sigma).expect("finite noise sd");
        let x: Vec<f64> = (0..self.n).map(|_| ux.sample(&mut rng)).collect();
        let y: Vec<f64> = x.iter().map(|&v| self.f(v) + noise.sample(&mut rng)).collect();
        Sample::new(x, y).expect("simulated data are finite")
    }
}

/// How `M` is set for a method.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothness {
    Fixed(f64),
    RuleOfThumb,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Method {
    /// Fixed-length CI at the finite-sample RMSE-optimal bandwidth.
    Flci { m: Smoothness },
    /// Local quadratic fit at the local linear RMSE-optimal bandwidth for `m`,
    /// with the usual critical value.
    Rbc { m: f64 },
    /// Local linear fit at bandwidth `h`, usual critical value.
    Conventional { h: f64 },
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::Flci { m: Smoothness::Fixed(m) } => write!(f, "FLCI M={m}"),
            Method::Flci { m: Smoothness::RuleOfThumb } => write!(f, "FLCI M=ROT"),
            Method::Rbc { m } => write!(f, "RBC h=b=h_rmse(M={m})"),
            Method::Conventional { h } => write!(f, "Conventional h={h}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MethodConfig {
    pub method: Method,
    pub level: ConfidenceLevel,
    pub kernel: KernelSpec,
    /// Order of the local polynomial for the FLCI and conventional methods.
    pub q: usize,
    /// Neighbors in the variance estimator.
    pub j: usize,
}

impl MethodConfig {
    /// Triangular kernel, local linear, `J = 3`, level 0.95.
    pub fn new(method: Method) -> Self {
        Self {
            method,
            level: ConfidenceLevel::new(0.95).expect("valid level"),
            kernel: KernelSpec::triangular(Domain::Interior),
            q: 1,
            j: 3,
        }
    }
}

/// An interval with its center and standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Interval {
    pub estimate: f64,
    pub se: f64,
    pub lower: f64,
    pub upper: f64,
    pub h: f64,
}

impl Interval {
    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }
}

fn classical_ci(
    sample: &Sample,
    h: f64,
    q: usize,
    level: ConfidenceLevel,
    k: &KernelSpec,
    j: usize,
) -> Result<Interval> {
    let fit = lp_weights(sample.x(), h, k, q, Side::Both)?;
    let est = estimate(&fit, sample.y());
    let se = standard_error(&fit, &nn_variance(sample, j, false)?);
    let half = level.z_two_sided() * se;
    Ok(Interval { estimate: est, se, lower: est - half, upper: est + half, h })
}

/// Bias-corrected CI with equal main and pilot bandwidths: a local quadratic
/// estimate at `h` with the usual critical value.
pub fn rbc_ci(sample: &Sample, h: f64, level: ConfidenceLevel, k: &KernelSpec, j: usize) -> Result<Interval> {
    classical_ci(sample, h, 2, level, k, j)
}

/// One simulated sample with RMSE-optimal bandwidths memoized by
/// `(M, q, kernel)`, so methods sharing a bandwidth minimize once.
pub struct DrawContext<'a> {
    pub sample: Sample,
    sigma2: Option<Vec<f64>>,
    cache: Vec<(f64, usize, &'a KernelSpec, f64)>,
}

impl<'a> DrawContext<'a> {
    pub fn new(sample: Sample) -> Self {
        Self { sample, sigma2: None, cache: Vec::new() }
    }

    /// Bandwidth minimizing worst-case RMSE over the Hölder class of order 2
    /// with constant `m`, using a homoskedastic preliminary variance. This is
    /// the default bandwidth of [`flci_at_point`].
    pub fn rmse_bandwidth(&mut self, m: f64, q: usize, k: &'a KernelSpec) -> Result<f64> {
        if let Some(&(_, _, _, h)) = self.cache.iter().find(|c| c.0 == m && c.1 == q && c.2 == k) {
            return Ok(h);
        }
        let x = self.sample.x();
        if self.sigma2.is_none() {
            self.sigma2 = Some(preliminary_sigma2(&self.sample, 2, false)?.per_observation(x));
        }
        let class = FunctionClass::new(Family::Holder, 2, m)?;
        let s2 = self.sigma2.as_deref().expect("set above");
        let h = minimize_rmse(x, k, q, &class, s2, None)?.h_star;
        self.cache.push((m, q, k, h));
        Ok(h)
    }

    pub fn run(&mut self, cfg: &'a MethodConfig) -> Result<Interval> {
        let k = &cfg.kernel;
        match cfg.method {
            Method::Flci { m } => {
                let m = match m {
                    Smoothness::Fixed(m) => m,
                    Smoothness::RuleOfThumb => rot_smoothness(&self.sample, 2, false)?,
                };
                let h = self.rmse_bandwidth(m, cfg.q, k)?;
                let class = FunctionClass::new(Family::Holder, 2, m)?;
                let opts = CiOptions::new(cfg.level).with_neighbors(cfg.j).with_bandwidth(h);
                let r = flci_at_point(&self.sample, &class, k, cfg.q, &opts)?;
                Ok(Interval { estimate: r.estimate, se: r.se, lower: r.ci_lower, upper: r.ci_upper, h })
            }
            Method::Rbc { m } => {
                let h = self.rmse_bandwidth(m, 1, k)?;
                rbc_ci(&self.sample, h, cfg.level, k, cfg.j)
            }
            Method::Conventional { h } => classical_ci(&self.sample, h, cfg.q, cfg.level, k, cfg.j),
        }
    }
}

/// Runs one method on one sample.
pub fn run_method(sample: &Sample, cfg: &MethodConfig) -> Result<Interval> {
    DrawContext::new(sample.clone()).run(cfg)
}

/// Averages over draws; lengths are relative to the FLCI that uses the
/// design's true `M`, computed on the same draws.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimReport {
    pub design: Design,
    pub method: Method,
    pub label: String,
    pub draws: usize,
    pub seed: u64,
    /// Draws where estimation failed; excluded from the averages.
    pub failures: usize,
    pub coverage: f64,
    pub mean_bias: f64,
    pub mean_se: f64,
    pub mean_h: f64,
    pub mean_length: f64,
    /// Mean length over the mean length of the true-`M` FLCI.
    pub relative_length: f64,
}

struct DrawRecord {
    ci: Interval,
    baseline_length: f64,
}

/// Simulates `draws` samples from `design` and applies `cfg` to each.
pub fn simulate(design: &Design, cfg: &MethodConfig, draws: usize, seed: u64) -> Result<SimReport> {
    Ok(simulate_many(design, std::slice::from_ref(cfg), draws, seed)?.remove(0))
}

/// Applies several methods to the same draws, sharing bandwidth searches.
pub fn simulate_many(design: &Design, cfgs: &[MethodConfig], draws: usize, seed: u64) -> Result<Vec<SimReport>> {
    if draws == 0 {
        return Err(Error::domain("number of draws must be at least 1"));
    }
    let baselines: Vec<MethodConfig> = cfgs
        .iter()
        .map(|c| MethodConfig { method: Method::Flci { m: Smoothness::Fixed(design.m) }, ..c.clone() })
        .collect();
    let truth = design.f(0.0);
    let records: Vec<Vec<Option<DrawRecord>>> = (0..draws as u64)
        .into_par_iter()
        .map(|i| {
            let mut ctx = DrawContext::new(design.draw(seed, i));
            cfgs.iter()
                .zip(&baselines)
                .map(|(cfg, base)| {
                    let ci = ctx.run(cfg).ok()?;
                    let baseline_length = ctx.run(base).ok()?.length();
                    Some(DrawRecord { ci, baseline_length })
                })
                .collect()
        })
        .collect();
    cfgs.iter()
        .enumerate()
        .map(|(c, cfg)| {
            let ok: Vec<&DrawRecord> = records.iter().filter_map(|r| r[c].as_ref()).collect();
            let failures = draws - ok.len();
            if ok.is_empty() {
                return Err(Error::insufficient(format!("every simulated draw failed for {}", cfg.method), 0));
            }
            let n = ok.len() as f64;
            let mean = |f: &dyn Fn(&DrawRecord) -> f64| ok.iter().map(|r| f(r)).sum::<f64>() / n;
            let mean_length = mean(&|r| r.ci.length());
            Ok(SimReport {
                design: *design,
                method: cfg.method,
                label: cfg.method.to_string(),
                draws,
                seed,
                failures,
                coverage: mean(&|r| r.ci.contains(truth) as u8 as f64),
                mean_bias: mean(&|r| r.ci.estimate - truth),
                mean_se: mean(&|r| r.ci.se),
                mean_h: mean(&|r| r.ci.h),
                mean_length,
                relative_length: mean_length / mean(&|r| r.baseline_length),
            })
        })
        .collect()
}
