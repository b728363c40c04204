//! Honest confidence intervals for local polynomial regression.
//!
//! ```
//! use honestci::{flci_at_point, CiOptions, ConfidenceLevel, Domain, Family, FunctionClass, KernelSpec, Sample};
//!
//! let x: Vec<f64> = (0..200).map(|i| -1.0 + (i as f64 + 0.5) / 100.0).collect();
//! let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| v * v + 0.1 * ((i % 7) as f64 - 3.0)).collect();
//! let sample = Sample::new(x, y)?;
//! let class = FunctionClass::new(Family::Holder, 2, 2.0)?;
//! let k = KernelSpec::triangular(Domain::Interior);
//! let ci = flci_at_point(&sample, &class, &k, 1, &CiOptions::new(ConfidenceLevel::new(0.95)?))?;
//! assert!(ci.ci_lower < ci.estimate && ci.estimate < ci.ci_upper);
//! # Ok::<(), honestci::Error>(())
//! ```

// `!(a > b)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod bandwidth;
pub mod critval;
pub mod error;
pub mod honest;
pub mod kernels;
pub mod lpreg;
pub mod montecarlo;
pub mod normal;
pub mod optim;
pub mod poly;
pub mod tables;

pub use asymptotics::AsymptoticConstants;
pub use bandwidth::{Family, FunctionClass, RmseCurve};
pub use critval::{coverage_given_ratio, cv, invert_coverage, BiasSdRatio, ConfidenceLevel};
pub use error::{Error, Result};
pub use honest::{flci_at_point, oci_at_point, rd_estimate, CiOptions, CvMethod, HonestResult};
pub use kernels::{Domain, KernelName, KernelSpec};
pub use lpreg::{LocalFit, RdFit, Sample, Side};
pub use montecarlo::{Design, Method, MethodConfig, SimReport, Smoothness};
