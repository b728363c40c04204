//! Tabulations of critical values, kernel constants and efficiencies.

use serde::Serialize;

use crate::asymptotics::{
    efficiency_against, holder_vs_taylor_gain, holder_vs_taylor_gain_kernels, kernel_efficiency, rbc_comparison,
    reference_kernel,
};
use crate::bandwidth::Family;
use crate::critval::{cv, BiasSdRatio, ConfidenceLevel};
use crate::error::Result;
use crate::kernels::{
    equivalent_kernel, holder_bias_constant, optimal_kernel_holder2, optimal_kernel_sy, sd_constant,
    taylor_bias_constant, Domain, KernelSpec,
};

/// A rectangular table: label columns followed by numeric columns, with blank
/// cells where a quantity is undefined.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub label_columns: Vec<String>,
    pub value_columns: Vec<String>,
    pub rows: Vec<TableRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TableRow {
    pub labels: Vec<String>,
    pub values: Vec<Option<f64>>,
}

impl Table {
    fn new(name: &str, labels: &[&str], values: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            label_columns: labels.iter().map(|s| s.to_string()).collect(),
            value_columns: values.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, labels: Vec<String>, values: Vec<Option<f64>>) {
        self.rows.push(TableRow { labels, values });
    }

    /// Looks up a cell by row labels and column name.
    pub fn get(&self, labels: &[&str], column: &str) -> Option<f64> {
        let c = self.value_columns.iter().position(|v| v == column)?;
        self.rows
            .iter()
            .find(|r| r.labels.iter().map(String::as_str).eq(labels.iter().copied()))
            .and_then(|r| r.values[c])
    }
}

/// Which table to build.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableKind {
    Cv,
    Constants,
    TaylorEfficiency,
    HolderEfficiency,
    Gains,
    Rbc,
}

impl std::str::FromStr for TableKind {
    type Err = crate::error::Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "cv" => TableKind::Cv,
            "constants" => TableKind::Constants,
            "taylor-eff" => TableKind::TaylorEfficiency,
            "holder-eff" => TableKind::HolderEfficiency,
            "gains" => TableKind::Gains,
            "rbc" => TableKind::Rbc,
            _ => return Err(crate::error::Error::domain(format!("unknown table '{s}'"))),
        })
    }
}

pub fn build(kind: TableKind) -> Result<Vec<Table>> {
    Ok(match kind {
        TableKind::Cv => vec![cv_table()],
        TableKind::Constants => vec![constants_table(Domain::Boundary)?, constants_table(Domain::Interior)?],
        TableKind::TaylorEfficiency => vec![efficiency_table(Family::Taylor)?],
        TableKind::HolderEfficiency => vec![efficiency_table(Family::Holder)?],
        TableKind::Gains => vec![gains_table()?],
        TableKind::Rbc => vec![rbc_table()?],
    })
}

/// Bias-sd ratios tabulated for critical values; three of them are
/// `√(1/r − 1)` for `r ∈ {6/7, 4/5, 2/3}`.
pub fn cv_table_ratios() -> Vec<f64> {
    let mut b: Vec<f64> = (0..=4).map(|i| i as f64 / 10.0).collect();
    b.push((1.0f64 / 6.0).sqrt());
    b.extend([0.5, 0.6, 0.7]);
    b.push(0.5f64.sqrt());
    b.extend([0.8, 0.9, 1.0, 1.5, 2.0]);
    b
}

pub const CV_LEVELS: [f64; 3] = [0.99, 0.95, 0.90];

pub fn cv_table() -> Table {
    let mut t = Table::new("critical_values", &["b"], &["0.99", "0.95", "0.90"]);
    for b in cv_table_ratios() {
        let ratio = BiasSdRatio::new(b).expect("tabulated ratios are nonnegative");
        let values =
            CV_LEVELS.iter().map(|&l| Some(cv(ratio, ConfidenceLevel::new(l).expect("valid level")))).collect();
        t.push(vec![format!("{b:.3}")], values);
    }
    t
}

fn classical(domain: Domain) -> [(&'static str, KernelSpec); 3] {
    [
        ("uniform", KernelSpec::uniform(domain)),
        ("triangular", KernelSpec::triangular(domain)),
        ("epanechnikov", KernelSpec::epanechnikov(domain)),
    ]
}

/// `∫k*²`, `B^T_{p,q}` and `B^Höl_{p,q}` for `p ≤ q + 1 ≤ 3`.
pub fn constants_table(domain: Domain) -> Result<Table> {
    let name = format!("kernel_constants_{domain}");
    let mut t = Table::new(
        &name,
        &["kernel", "q"],
        &["sd", "taylor_p1", "taylor_p2", "taylor_p3", "holder_p1", "holder_p2", "holder_p3"],
    );
    for (kname, k) in classical(domain) {
        for q in 0..=2 {
            let ks = equivalent_kernel(&k, q, domain)?;
            let mut values = vec![Some(sd_constant(&ks))];
            let ps = 1..=3;
            values.extend(
                ps.clone()
                    .map(|p| (p <= q + 1).then(|| taylor_bias_constant(&ks, p)).transpose())
                    .collect::<Result<Vec<_>>>()?,
            );
            values.extend(
                ps.map(|p| (p <= q + 1).then(|| holder_bias_constant(&ks, p)).transpose())
                    .collect::<Result<Vec<_>>>()?,
            );
            t.push(vec![kname.to_string(), q.to_string()], values);
        }
    }
    Ok(t)
}

/// Efficiency relative to the optimal kernel for each `(kernel, q)` and
/// `p ≤ q + 1`, boundary then interior. Under the Hölder class with `p = 3`
/// the reference is the triangular kernel with `q = 2`.
pub fn efficiency_table(family: Family) -> Result<Table> {
    let name = format!("{family}_efficiency");
    let mut t = Table::new(
        &name,
        &["kernel", "q"],
        &["boundary_p1", "boundary_p2", "boundary_p3", "interior_p1", "interior_p2", "interior_p3"],
    );
    let mut refs = Vec::new();
    for domain in [Domain::Boundary, Domain::Interior] {
        for p in 1..=3 {
            refs.push(reference_kernel(family, p, domain)?);
        }
    }
    for (i, kname) in ["uniform", "triangular", "epanechnikov"].into_iter().enumerate() {
        for q in 0..=2 {
            let mut values = Vec::new();
            for (di, domain) in [Domain::Boundary, Domain::Interior].into_iter().enumerate() {
                let k = classical(domain)[i].1.clone();
                for p in 1..=3 {
                    let v = if p <= q + 1 {
                        let (opt, q_opt) = &refs[3 * di + p - 1];
                        Some(efficiency_against(&k, q, opt, *q_opt, p, family, domain)?)
                    } else {
                        None
                    };
                    values.push(v);
                }
            }
            t.push(vec![kname.to_string(), q.to_string()], values);
        }
    }
    Ok(t)
}

/// Hölder risk relative to Taylor risk with `q = p − 1`; the last row pits the
/// Hölder-optimal kernel against the Taylor-optimal one (known for `p ≤ 2`).
pub fn gains_table() -> Result<Table> {
    let mut t = Table::new(
        "holder_vs_taylor_gains",
        &["kernel"],
        &["boundary_p1", "boundary_p2", "boundary_p3", "interior_p1", "interior_p2", "interior_p3"],
    );
    for (i, kname) in ["uniform", "triangular", "epanechnikov"].into_iter().enumerate() {
        let mut values = Vec::new();
        for domain in [Domain::Boundary, Domain::Interior] {
            let k = classical(domain)[i].1.clone();
            for p in 1..=3 {
                values.push(Some(holder_vs_taylor_gain(&k, p, domain)?));
            }
        }
        t.push(vec![kname.to_string()], values);
    }
    let mut values = Vec::new();
    for domain in [Domain::Boundary, Domain::Interior] {
        let sy1 = optimal_kernel_sy(1, domain)?;
        values.push(Some(holder_vs_taylor_gain(&sy1, 1, domain)?));
        let h2 = optimal_kernel_holder2(domain);
        let sy2 = optimal_kernel_sy(2, domain)?;
        values.push(Some(holder_vs_taylor_gain_kernels(&h2, &sy2, 2, domain)?));
        values.push(None);
    }
    t.push(vec!["optimal".to_string()], values);
    Ok(t)
}

/// Length ratio, coverage and bias-sd ratio of robust bias-corrected CIs at
/// level 0.95.
pub fn rbc_table() -> Result<Table> {
    let level = ConfidenceLevel::new(0.95)?;
    let mut t = Table::new(
        "rbc",
        &["point", "kernel"],
        &["taylor_length", "taylor_coverage", "taylor_t", "holder_length", "holder_coverage", "holder_t"],
    );
    for domain in [Domain::Boundary, Domain::Interior] {
        for (kname, k) in classical(domain) {
            let mut values = Vec::new();
            for family in [Family::Taylor, Family::Holder] {
                let r = rbc_comparison(&k, domain, family, level)?;
                values.extend([Some(r.length_ratio), Some(r.coverage), Some(r.t_rbc)]);
            }
            t.push(vec![domain.to_string(), kname.to_string()], values);
        }
    }
    Ok(t)
}

/// Efficiency of a named classical kernel (convenience for callers that do not
/// need the full table).
pub fn classical_efficiency(kernel: &str, q: usize, p: usize, family: Family, domain: Domain) -> Result<f64> {
    kernel_efficiency(&KernelSpec::classical(kernel, domain)?, q, p, family, domain)
}
