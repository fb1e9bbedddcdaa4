//! Command-line front end. [`run`] does all the work and returns the exit
//! code with the text for stdout and stderr, so it can be driven in-process.
//!
//! Exit codes: 0 success, 1 parse or validation failure, 2 an inner solve
//! hit its iteration limit, 3 the command does not apply to the rank regime.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use crate::error::{LinxError, Result};
use crate::exact::exact_mesp;
use crate::gaps::{run_gap_experiment, GapKind, GapReportRow};
use crate::instance::{load_matrix, validate, Mask, SymMatrix};
use crate::linx::{solve_linx, SolverOptions};
use crate::num::json_f64;
use crate::scaling::{classify_regime, limit_linx_at_infinity, optimize_gamma, GammaRegime};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_REGIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "linx",
    version,
    about = "Linx bounds for maximum-entropy sampling"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Json)]
    pub output: OutputFormat,

    /// Base of the logarithm used for reported entropy values.
    #[arg(long, global = true, value_enum, default_value_t = LogBase::E)]
    pub log_base: LogBase,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// linx(C, s; M, γ) with its maximizer and duality gap.
    Bound(BoundArgs),
    /// Optimize γ and report the rank regime.
    Gamma(GammaArgs),
    /// Exact MESP value by enumeration (small n only).
    Exact(ExactArgs),
    /// Gap experiment on the built-in instance families.
    Gap(GapArgs),
    /// Limit of the bound as γ → ∞ when s = rank(C).
    Limit(LimitArgs),
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    #[arg(long, default_value_t = SolverOptions::default().tol_fw)]
    pub tol_fw: f64,
    #[arg(long, default_value_t = SolverOptions::default().max_iter)]
    pub max_iter: usize,
}

impl SolverArgs {
    fn options(&self) -> Result<SolverOptions> {
        if !(self.tol_fw > 0.0 && self.tol_fw.is_finite()) {
            return Err(LinxError::InvalidArgument(format!(
                "--tol-fw must be positive, got {}",
                self.tol_fw
            )));
        }
        Ok(SolverOptions {
            tol_fw: self.tol_fw,
            max_iter: self.max_iter,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaArg {
    Value(f64),
    Auto,
}

fn parse_gamma(s: &str) -> std::result::Result<GammaArg, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(GammaArg::Auto);
    }
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(GammaArg::Value(v)),
        _ => Err(format!("expected a positive number or 'auto', got '{s}'")),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MaskArg {
    None,
    Identity,
    File(PathBuf),
}

fn parse_mask(s: &str) -> std::result::Result<MaskArg, String> {
    match s {
        "none" => Ok(MaskArg::None),
        "identity" => Ok(MaskArg::Identity),
        _ => match s.strip_prefix("file:") {
            Some(p) if !p.is_empty() => Ok(MaskArg::File(PathBuf::from(p))),
            _ => Err(format!("expected none, identity or file:<path>, got '{s}'")),
        },
    }
}

impl MaskArg {
    fn label(&self) -> String {
        match self {
            MaskArg::None => "none".into(),
            MaskArg::Identity => "identity".into(),
            MaskArg::File(p) => format!("file:{}", p.display()),
        }
    }

    fn load(&self, n: usize) -> Result<Mask> {
        match self {
            MaskArg::None => Ok(Mask::all_ones(n)),
            MaskArg::Identity => Ok(Mask::identity(n)),
            MaskArg::File(p) => {
                let m = Mask::new(read_matrix(p)?)?;
                if m.n() != n {
                    return Err(LinxError::DimensionMismatch {
                        expected: n,
                        found: m.n(),
                    });
                }
                Ok(m)
            }
        }
    }
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub s: usize,
    /// Positive number, or `auto` to use the optimal γ.
    #[arg(long, value_parser = parse_gamma, default_value = "1")]
    pub gamma: GammaArg,
    /// none, identity or file:<path>
    #[arg(long, value_parser = parse_mask, default_value = "none")]
    pub mask: MaskArg,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct GammaArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub s: usize,
    #[arg(long, value_parser = parse_mask, default_value = "none")]
    pub mask: MaskArg,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct ExactArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub s: usize,
}

#[derive(Debug, Args)]
pub struct GapArgs {
    #[arg(long, value_enum)]
    pub kind: GapKindArg,
    /// Comma-separated sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,
    #[arg(long, default_value_t = 0.0)]
    pub c1: f64,
    #[arg(long, default_value_t = 1.0)]
    pub c2: f64,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct LimitArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub s: usize,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GapKindArg {
    Unscaled,
    Scaled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
    Plain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LogBase {
    #[value(name = "e")]
    E,
    #[value(name = "2")]
    Two,
    #[value(name = "10")]
    Ten,
}

impl LogBase {
    fn convert(self, v: f64) -> f64 {
        match self {
            LogBase::E => v,
            LogBase::Two => v / std::f64::consts::LN_2,
            LogBase::Ten => v / std::f64::consts::LN_10,
        }
    }
}

/// Fields follow the JSON schema; `None` fields are omitted.
#[derive(Debug, Default, Serialize)]
pub struct Report {
    pub command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mask: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_hat: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duality_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regime: Option<GammaRegime>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rows: Option<Vec<GapReportRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subset: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certified: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi_trace: Option<Vec<(f64, f64)>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

fn read_matrix(path: &Path) -> Result<SymMatrix> {
    let text = std::fs::read_to_string(path)?;
    load_matrix(&text)
}

fn bound(args: &BoundArgs, base: LogBase) -> Result<Report> {
    let c = read_matrix(&args.input)?;
    let n = c.n();
    let inst = validate(c, args.s)?;
    let mask = args.mask.load(n)?;
    let opts = args.solver.options()?;
    let mut report = Report {
        command: "bound",
        n: Some(n),
        s: Some(args.s),
        mask: Some(args.mask.label()),
        ..Report::default()
    };
    match args.gamma {
        GammaArg::Value(gamma) => {
            let r = solve_linx(&inst, args.s, &mask, gamma, &opts)?;
            report.gamma = Some(json_f64(gamma));
            report.value = Some(json_f64(base.convert(r.value)));
            report.x_hat = Some(r.x_hat.into_vec());
            report.duality_gap = Some(base.convert(r.duality_gap));
            report.converged = Some(r.converged);
            report.iterations = Some(r.iterations);
        }
        GammaArg::Auto => {
            let g = optimize_gamma(&inst, args.s, &mask, &opts)?;
            report.gamma = Some(json_f64(g.gamma_hat));
            report.value = Some(json_f64(base.convert(g.bound_value)));
            report.x_hat = g.x_hat.map(|x| x.into_vec());
            report.regime = Some(g.regime);
            report.certified = Some(g.certified);
            report.converged = Some(g.converged);
            report.diagnostic = g.diagnostic;
        }
    }
    Ok(report)
}

fn gamma(args: &GammaArgs, base: LogBase) -> Result<Report> {
    let c = read_matrix(&args.input)?;
    let n = c.n();
    let inst = validate(c, args.s)?;
    let mask = args.mask.load(n)?;
    let g = optimize_gamma(&inst, args.s, &mask, &args.solver.options()?)?;
    Ok(Report {
        command: "gamma",
        n: Some(n),
        s: Some(args.s),
        gamma: Some(json_f64(g.gamma_hat)),
        mask: Some(args.mask.label()),
        value: Some(json_f64(base.convert(g.bound_value))),
        x_hat: g.x_hat.map(|x| x.into_vec()),
        regime: Some(g.regime),
        certified: Some(g.certified),
        converged: Some(g.converged),
        psi_trace: Some(
            g.psi_trace
                .iter()
                .map(|&(p, v)| (p, base.convert(v)))
                .collect(),
        ),
        diagnostic: g.diagnostic,
        ..Report::default()
    })
}

fn exact(args: &ExactArgs, base: LogBase) -> Result<Report> {
    let c = read_matrix(&args.input)?;
    let n = c.n();
    let inst = validate(c, args.s)?;
    let r = exact_mesp(&inst, args.s)?;
    Ok(Report {
        command: "exact",
        n: Some(n),
        s: Some(args.s),
        value: Some(json_f64(base.convert(r.value))),
        subset: Some(r.best_subset),
        ..Report::default()
    })
}

fn gap(args: &GapArgs, base: LogBase) -> Result<Report> {
    let kind = match args.kind {
        GapKindArg::Unscaled => GapKind::Unscaled,
        GapKindArg::Scaled => GapKind::Scaled,
    };
    let mut rows = run_gap_experiment(kind, &args.n, args.c1, args.c2, &args.solver.options()?)?;
    for r in rows.iter_mut() {
        r.plain_bound = base.convert(r.plain_bound);
        r.masked_bound = base.convert(r.masked_bound);
        r.gap = base.convert(r.gap);
        r.theoretical_floor = base.convert(r.theoretical_floor);
    }
    let converged = rows.iter().all(|r| r.converged);
    Ok(Report {
        command: "gap",
        rows: Some(rows),
        converged: Some(converged),
        ..Report::default()
    })
}

fn limit(args: &LimitArgs, base: LogBase) -> Result<Report> {
    let c = read_matrix(&args.input)?;
    let n = c.n();
    let inst = validate(c, args.s)?;
    let regime = classify_regime(&inst, args.s);
    let r = limit_linx_at_infinity(&inst, args.s, &args.solver.options()?)?;
    Ok(Report {
        command: "limit",
        n: Some(n),
        s: Some(args.s),
        gamma: Some(json_f64(f64::INFINITY)),
        value: Some(json_f64(base.convert(r.value))),
        x_hat: Some(r.x_hat.into_vec()),
        duality_gap: Some(base.convert(r.duality_gap)),
        regime: Some(regime),
        converged: Some(r.converged),
        iterations: Some(r.iterations),
        ..Report::default()
    })
}

fn scalar_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Array(items) => items.iter().map(scalar_text).collect::<Vec<_>>().join(";"),
        Value::Object(_) => serde_json::to_string(v).unwrap_or_default(),
        other => other.to_string(),
    }
}

/// Top-level fields except `rows` as ordered `(key, text)` pairs.
fn flat_fields(report: &Report) -> Vec<(String, String)> {
    let value = serde_json::to_value(report).expect("report serializes");
    let Value::Object(map) = value else {
        unreachable!()
    };
    let order = [
        "command",
        "n",
        "s",
        "gamma",
        "mask",
        "value",
        "x_hat",
        "duality_gap",
        "regime",
        "subset",
        "certified",
        "converged",
        "iterations",
        "psi_trace",
        "diagnostic",
    ];
    let mut out = Vec::new();
    for key in order {
        let Some(v) = map.get(key) else { continue };
        match (key, v) {
            ("regime", Value::Object(r)) => {
                for k in ["tag", "rank", "s"] {
                    if let Some(x) = r.get(k) {
                        out.push((format!("regime_{k}"), scalar_text(x)));
                    }
                }
            }
            ("psi_trace", Value::Array(pairs)) => {
                let text = pairs
                    .iter()
                    .map(|p| match p {
                        Value::Array(xy) => {
                            xy.iter().map(scalar_text).collect::<Vec<_>>().join(":")
                        }
                        other => scalar_text(other),
                    })
                    .collect::<Vec<_>>()
                    .join(";");
                out.push((key.to_string(), text));
            }
            _ => out.push((key.to_string(), scalar_text(v))),
        }
    }
    out
}

fn render(report: &Report, format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(report)
                .map_err(|e| LinxError::InvalidArgument(e.to_string()))?;
            s.push('\n');
            Ok(s)
        }
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let csv_err = |e: csv::Error| LinxError::InvalidArgument(e.to_string());
            if let Some(rows) = &report.rows {
                for r in rows {
                    w.serialize(r).map_err(csv_err)?;
                }
            } else {
                let fields = flat_fields(report);
                w.write_record(fields.iter().map(|(k, _)| k))
                    .map_err(csv_err)?;
                w.write_record(fields.iter().map(|(_, v)| v))
                    .map_err(csv_err)?;
            }
            let bytes = w
                .into_inner()
                .map_err(|e| LinxError::InvalidArgument(e.to_string()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        OutputFormat::Plain => {
            let mut s = String::new();
            for (k, v) in flat_fields(report) {
                let _ = writeln!(s, "{k}: {v}");
            }
            if let Some(rows) = &report.rows {
                let _ = writeln!(
                    s,
                    "{:>4} {:>14} {:>14} {:>14} {:>14} {:>12} {:>12} {:>9}",
                    "n",
                    "plain_bound",
                    "masked_bound",
                    "gap",
                    "floor",
                    "gamma_plain",
                    "gamma_mask",
                    "converged"
                );
                for r in rows {
                    let _ = writeln!(
                        s,
                        "{:>4} {:>14.9} {:>14.9} {:>14.9} {:>14.9} {:>12.6} {:>12.6} {:>9}",
                        r.n,
                        r.plain_bound,
                        r.masked_bound,
                        r.gap,
                        r.theoretical_floor,
                        r.gamma_plain,
                        r.gamma_masked,
                        r.converged
                    );
                }
            }
            Ok(s)
        }
    }
}

fn exit_code_for(err: &LinxError) -> i32 {
    match err {
        LinxError::RegimeMismatch { .. } => EXIT_REGIME,
        LinxError::GammaSearch { source, .. } => exit_code_for(source),
        _ => EXIT_INVALID,
    }
}

/// Output of one invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_INVALID
            } else {
                EXIT_OK
            };
            let text = e.render().to_string();
            return if e.use_stderr() {
                Outcome {
                    code,
                    stdout: String::new(),
                    stderr: text,
                }
            } else {
                Outcome {
                    code,
                    stdout: text,
                    stderr: String::new(),
                }
            };
        }
    };
    let base = cli.log_base;
    let result = match &cli.command {
        Command::Bound(a) => bound(a, base),
        Command::Gamma(a) => gamma(a, base),
        Command::Exact(a) => exact(a, base),
        Command::Gap(a) => gap(a, base),
        Command::Limit(a) => limit(a, base),
    };
    let report = match result {
        Ok(r) => r,
        Err(e) => {
            return Outcome {
                code: exit_code_for(&e),
                stdout: String::new(),
                stderr: format!("error: {e}\n"),
            }
        }
    };
    match render(&report, cli.output) {
        Ok(stdout) => {
            let (code, stderr) = if report.converged == Some(false) {
                (
                    EXIT_NOT_CONVERGED,
                    "warning: solver stopped at the iteration limit\n".to_string(),
                )
            } else {
                (EXIT_OK, String::new())
            };
            Outcome {
                code,
                stdout,
                stderr,
            }
        }
        Err(e) => Outcome {
            code: EXIT_INVALID,
            stdout: String::new(),
            stderr: format!("error: {e}\n"),
        },
    }
}
