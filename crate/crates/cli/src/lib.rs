//! Command-line front end: argument parsing, CSV ingestion and report output.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use honestci::bandwidth::rot_smoothness;
use honestci::montecarlo::simulate;
use honestci::tables::{build, Table, TableKind};
use honestci::{
    cv, flci_at_point, rd_estimate, BiasSdRatio, CiOptions, ConfidenceLevel, CvMethod, Design, Domain, Family,
    FunctionClass, HonestResult, KernelSpec, Method, MethodConfig, Sample, SimReport, Smoothness,
};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] honestci::Error),
    #[error("{path}: {message}")]
    Input { path: String, message: String },
    #[error("{path}, line {line}: {message}")]
    Parse { path: String, line: u64, message: String },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(honestci::Error::Domain(_)) => "domain",
            CliError::Core(honestci::Error::InsufficientData { .. }) => "insufficient_data",
            CliError::Core(honestci::Error::InfiniteBias(_)) => "infinite_bias",
            CliError::Core(_) => "numerical",
            CliError::Input { .. } => "input",
            CliError::Parse { .. } => "parse",
            CliError::Argument(_) => "argument",
            CliError::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "honestci", version)]
#[command(about = "Honest bias-aware confidence intervals for nonparametric regression")]
pub struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Confidence interval for the regression function at a point.
    Ci(CiArgs),
    /// Confidence interval for a sharp regression discontinuity.
    Rd(RdArgs),
    /// Monte Carlo coverage of a CI method on a simulated design.
    Simulate(SimulateArgs),
    /// Print a table of critical values, kernel constants or efficiencies.
    Tables(TablesArgs),
    /// Critical value of the folded normal |N(t, 1)|.
    Cv(CvArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassArg {
    Taylor,
    Holder,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelArg {
    Uniform,
    Triangular,
    Epanechnikov,
}

impl KernelArg {
    fn spec(self) -> KernelSpec {
        match self {
            KernelArg::Uniform => KernelSpec::uniform(Domain::Interior),
            KernelArg::Triangular => KernelSpec::triangular(Domain::Interior),
            KernelArg::Epanechnikov => KernelSpec::epanechnikov(Domain::Interior),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CvArg {
    Finite,
    Asymptotic,
}

/// Smoothness constant: a number or the rule of thumb.
#[derive(Clone, Debug, Args, Serialize)]
#[group(required = true, multiple = false)]
pub struct SmoothnessArgs {
    /// Smoothness constant M.
    #[arg(long = "M", value_name = "M")]
    pub m: Option<f64>,
    /// Calibrate M with the global-polynomial rule of thumb (heuristic).
    #[arg(long)]
    pub rot: bool,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct CommonArgs {
    /// CSV file with header columns `x` and `y`.
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub smoothness: SmoothnessArgs,
    /// Significance level; the CI has level 1 − alpha.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = KernelArg::Triangular)]
    pub kernel: KernelArg,
    /// Bandwidth; minimizes worst-case RMSE when omitted.
    #[arg(long)]
    pub bandwidth: Option<f64>,
    /// Neighbors in the nearest-neighbor variance estimator.
    #[arg(long = "J", default_value_t = 3)]
    pub j: usize,
    /// Bias-sd ratio for the critical value.
    #[arg(long = "cv-method", value_enum, default_value_t = CvArg::Finite)]
    pub cv_method: CvArg,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct CiArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum, default_value_t = ClassArg::Holder)]
    pub class: ClassArg,
    #[arg(long, default_value_t = 2)]
    pub p: usize,
    /// Order of the local polynomial; defaults to p − 1.
    #[arg(long)]
    pub q: Option<usize>,
    /// Evaluation point; the data are centered here.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub at: f64,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct RdArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Cutoff subtracted from the running variable.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub cutoff: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Flci,
    Rbc,
    Conventional,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// Regression design, 1 to 3.
    #[arg(long, default_value_t = 1)]
    pub design: u8,
    /// Smoothness constant of the true regression function.
    #[arg(long = "M-true", value_name = "M")]
    pub m_true: f64,
    #[arg(long, value_enum, default_value_t = MethodArg::Flci)]
    pub method: MethodArg,
    /// M assumed by the method (RBC uses it for its bandwidth).
    #[arg(long = "M", value_name = "M", conflicts_with = "rot")]
    pub m: Option<f64>,
    /// FLCI with the rule-of-thumb M.
    #[arg(long)]
    pub rot: bool,
    /// Bandwidth of the conventional CI.
    #[arg(long)]
    pub bandwidth: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    pub draws: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    /// Noise standard deviation.
    #[arg(long, default_value_t = 0.5)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = KernelArg::Triangular)]
    pub kernel: KernelArg,
    #[arg(long, default_value_t = 1)]
    pub q: usize,
    #[arg(long = "J", default_value_t = 3)]
    pub j: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TableArg {
    Cv,
    Constants,
    TaylorEff,
    HolderEff,
    Gains,
    Rbc,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct TablesArgs {
    #[arg(long, value_enum)]
    pub table: TableArg,
    /// Decimals in CSV and text output.
    #[arg(long, default_value_t = 4)]
    pub digits: usize,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct CvArgs {
    /// Bias-sd ratio.
    #[arg(long, allow_negative_numbers = true)]
    pub t: f64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
}

/// Reads a CSV with `x` and `y` columns; rows with unparsable or non-finite
/// values are rejected with their line number.
pub fn ingest_csv(path: &Path) -> Result<Sample> {
    let name = path.display().to_string();
    let input = |message: String| CliError::Input { path: name.clone(), message };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(|e| input(e.to_string()))?;
    let headers = rdr.headers().map_err(|e| input(e.to_string()))?.clone();
    let col =
        |c: &str| headers.iter().position(|h| h == c).ok_or_else(|| input(format!("missing column '{c}' in header")));
    let (ix, iy) = (col("x")?, col("y")?);
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            CliError::Parse { path: name.clone(), line, message: e.to_string() }
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |i: usize, c: &str| -> Result<f64> {
            let raw = rec.get(i).unwrap_or("");
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                Ok(_) => Err(CliError::Parse { path: name.clone(), line, message: format!("non-finite {c} '{raw}'") }),
                Err(_) => {
                    Err(CliError::Parse { path: name.clone(), line, message: format!("cannot parse {c} '{raw}'") })
                }
            }
        };
        x.push(field(ix, "x")?);
        y.push(field(iy, "y")?);
    }
    if x.is_empty() {
        return Err(input("no data rows".to_string()));
    }
    Ok(Sample::new(x, y)?)
}

fn level(alpha: f64) -> Result<ConfidenceLevel> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CliError::Argument(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(ConfidenceLevel::from_alpha(alpha)?)
}

fn options(c: &CommonArgs) -> Result<CiOptions> {
    let mut opts = CiOptions::new(level(c.alpha)?).with_neighbors(c.j).with_cv_method(match c.cv_method {
        CvArg::Finite => CvMethod::FiniteSample,
        CvArg::Asymptotic => CvMethod::Asymptotic,
    });
    if let Some(h) = c.bandwidth {
        opts = opts.with_bandwidth(h);
    }
    Ok(opts)
}

/// The `M` to use: given, or the rule of thumb on the centered data.
fn smoothness(s: &SmoothnessArgs, sample: &Sample, p: usize, rd: bool) -> Result<f64> {
    match (s.m, s.rot) {
        (Some(m), false) => Ok(m),
        (None, true) => Ok(rot_smoothness(sample, p, rd)?),
        _ => Err(CliError::Argument("exactly one of --M and --rot is required".into())),
    }
}

pub fn run_ci(a: &CiArgs) -> Result<HonestResult> {
    let sample = ingest_csv(&a.common.input)?.centered(a.at);
    let family = match a.class {
        ClassArg::Taylor => Family::Taylor,
        ClassArg::Holder => Family::Holder,
    };
    let m = smoothness(&a.common.smoothness, &sample, a.p, false)?;
    let class = FunctionClass::new(family, a.p, m)?;
    let q = a.q.unwrap_or(a.p.saturating_sub(1));
    Ok(flci_at_point(&sample, &class, &a.common.kernel.spec(), q, &options(&a.common)?)?)
}

pub fn run_rd(a: &RdArgs) -> Result<HonestResult> {
    let sample = ingest_csv(&a.common.input)?.centered(a.cutoff);
    let m = smoothness(&a.common.smoothness, &sample, 2, true)?;
    Ok(rd_estimate(&sample, m, &a.common.kernel.spec(), &options(&a.common)?)?)
}

pub fn run_simulate(a: &SimulateArgs) -> Result<SimReport> {
    let design = Design::new(a.design, a.m_true)?.with_n(a.n).with_sigma(a.sigma);
    let need_m = || a.m.ok_or_else(|| CliError::Argument("--M is required for this method".into()));
    let method = match a.method {
        MethodArg::Flci if a.rot => Method::Flci { m: Smoothness::RuleOfThumb },
        MethodArg::Flci => Method::Flci { m: Smoothness::Fixed(need_m()?) },
        MethodArg::Rbc => Method::Rbc { m: need_m()? },
        MethodArg::Conventional => Method::Conventional {
            h: a.bandwidth.ok_or_else(|| CliError::Argument("--bandwidth is required for conventional".into()))?,
        },
    };
    let cfg = MethodConfig { method, level: level(a.alpha)?, kernel: a.kernel.spec(), q: a.q, j: a.j };
    Ok(simulate(&design, &cfg, a.draws, a.seed)?)
}

pub fn run_tables(a: &TablesArgs) -> Result<Vec<Table>> {
    let kind = match a.table {
        TableArg::Cv => TableKind::Cv,
        TableArg::Constants => TableKind::Constants,
        TableArg::TaylorEff => TableKind::TaylorEfficiency,
        TableArg::HolderEff => TableKind::HolderEfficiency,
        TableArg::Gains => TableKind::Gains,
        TableArg::Rbc => TableKind::Rbc,
    };
    Ok(build(kind)?)
}

#[derive(Debug, Serialize)]
pub struct CvReport {
    pub t: f64,
    pub level: f64,
    pub cv: f64,
}

pub fn run_cv(a: &CvArgs) -> Result<CvReport> {
    let l = level(a.alpha)?;
    Ok(CvReport { t: a.t, level: l.get(), cv: cv(BiasSdRatio::new(a.t)?, l) })
}

/// Writes `f64` values with 17 significant digits so output is exact and
/// byte-stable.
struct Exact(serde_json::ser::PrettyFormatter<'static>);

impl serde_json::ser::Formatter for Exact {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> std::io::Result<()> {
        write!(w, "{v:.16e}")
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json<T: Serialize>(v: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Exact(serde_json::ser::PrettyFormatter::new()));
    v.serialize(&mut ser).expect("reports serialize");
    buf.push(b'\n');
    String::from_utf8(buf).expect("JSON is UTF-8")
}

/// A result with the provenance needed to reproduce it.
#[derive(Serialize)]
struct Envelope<'a, C: Serialize, R: Serialize> {
    version: &'static str,
    command: &'static str,
    config: &'a C,
    result: R,
}

fn envelope<C: Serialize, R: Serialize>(command: &'static str, config: &C, result: R) -> String {
    to_json(&Envelope { version: env!("CARGO_PKG_VERSION"), command, config, result })
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn honest_csv(r: &HonestResult) -> String {
    let header = "estimate,se,maxbias,ratio_t,cv,ci_lower,ci_upper,oci_lower,oci_upper,h_used,m_used,p,q,kernel,family,level,effective_n,p_value";
    let nums = [
        r.estimate,
        r.se,
        r.maxbias,
        r.ratio_t,
        r.cv,
        r.ci_lower,
        r.ci_upper,
        r.oci_lower,
        r.oci_upper,
        r.h_used,
        r.m_used,
    ];
    let mut row: Vec<String> = nums.iter().map(|&v| num(v)).collect();
    row.extend([r.p.to_string(), r.q.to_string(), r.kernel.clone(), r.family.to_string(), num(r.level)]);
    row.extend([r.effective_n.to_string(), num(r.p_value)]);
    format!("{header}\n{}\n", row.join(","))
}

fn honest_text(r: &HonestResult) -> String {
    format!(
        "Estimate      {:.4}\nStd. error    {:.4}\nMax. bias     {:.4}\nBias/sd       {:.4}\nCrit. value   {:.4}\n\
         {:.0}% CI        ({:.4}, {:.4})\nOne-sided     [{:.4}, inf) / (-inf, {:.4}]\np-value       {:.4}\n\
         Bandwidth     {:.4}\nM             {:.4}\nEffective n   {}\n",
        r.estimate,
        r.se,
        r.maxbias,
        r.ratio_t,
        r.cv,
        100.0 * r.level,
        r.ci_lower,
        r.ci_upper,
        r.oci_lower,
        r.oci_upper,
        r.p_value,
        r.h_used,
        r.m_used,
        r.effective_n
    )
}

fn sim_csv(r: &SimReport) -> String {
    let header = "design,m_true,n,sigma,method,draws,seed,failures,coverage,mean_bias,mean_se,mean_h,mean_length,relative_length";
    let d = &r.design;
    format!(
        "{header}\n{},{},{},{},\"{}\",{},{},{},{},{},{},{},{},{}\n",
        d.id,
        num(d.m),
        d.n,
        num(d.sigma),
        r.label,
        r.draws,
        r.seed,
        r.failures,
        num(r.coverage),
        num(r.mean_bias),
        num(r.mean_se),
        num(r.mean_h),
        num(r.mean_length),
        num(r.relative_length)
    )
}

fn sim_text(r: &SimReport) -> String {
    format!(
        "{} on design {} (M = {}, n = {}), {} draws, seed {}\nCoverage      {:.1}%\nMean bias     {:.4}\n\
         Mean se       {:.4}\nMean h        {:.4}\nRel. length   {:.3}\nFailures      {}\n",
        r.label,
        r.design.id,
        r.design.m,
        r.design.n,
        r.draws,
        r.seed,
        100.0 * r.coverage,
        r.mean_bias,
        r.mean_se,
        r.mean_h,
        r.relative_length,
        r.failures
    )
}

fn table_delimited(t: &Table, digits: usize, sep: &str) -> String {
    let mut out = String::new();
    let header: Vec<&str> = t.label_columns.iter().chain(&t.value_columns).map(String::as_str).collect();
    out.push_str(&header.join(sep));
    out.push('\n');
    for r in &t.rows {
        let mut cells = r.labels.clone();
        cells.extend(r.values.iter().map(|v| v.map_or(String::new(), |v| format!("{v:.digits$}"))));
        out.push_str(&cells.join(sep));
        out.push('\n');
    }
    out
}

/// Runs a parsed command and returns what to print.
pub fn run(cli: &Cli) -> Result<String> {
    let f = cli.format;
    Ok(match &cli.command {
        Command::Ci(a) => {
            let r = run_ci(a)?;
            match f {
                Format::Json => envelope("ci", a, &r),
                Format::Csv => honest_csv(&r),
                Format::Text => honest_text(&r),
            }
        }
        Command::Rd(a) => {
            let r = run_rd(a)?;
            match f {
                Format::Json => envelope("rd", a, &r),
                Format::Csv => honest_csv(&r),
                Format::Text => honest_text(&r),
            }
        }
        Command::Simulate(a) => {
            let r = run_simulate(a)?;
            match f {
                Format::Json => envelope("simulate", a, &r),
                Format::Csv => sim_csv(&r),
                Format::Text => sim_text(&r),
            }
        }
        Command::Tables(a) => {
            let tables = run_tables(a)?;
            match f {
                Format::Json => envelope("tables", a, &tables),
                Format::Csv => tables.iter().map(|t| table_delimited(t, a.digits, ",")).collect::<Vec<_>>().join("\n"),
                Format::Text => tables
                    .iter()
                    .map(|t| format!("{}\n{}", t.name, table_delimited(t, a.digits, "\t")))
                    .collect::<Vec<_>>()
                    .join("\n"),
            }
        }
        Command::Cv(a) => {
            let r = run_cv(a)?;
            match f {
                Format::Json => envelope("cv", a, &r),
                Format::Csv => format!("t,level,cv\n{},{},{}\n", num(r.t), num(r.level), num(r.cv)),
                Format::Text => format!("{:.3}\n", r.cv),
            }
        }
    })
}

/// The structured error printed on failure.
pub fn error_json(e: &CliError) -> String {
    #[derive(Serialize)]
    struct Body<'a> {
        kind: &'a str,
        message: String,
    }
    #[derive(Serialize)]
    struct Wrapper<'a> {
        error: Body<'a>,
    }
    to_json(&Wrapper { error: Body { kind: e.kind(), message: e.to_string() } })
}
