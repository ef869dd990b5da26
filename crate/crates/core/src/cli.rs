//! Command-line interface: `fit`, `simulate`, `placebo` and `diagnose`.
//!
//! Exit codes are 0 on success, 1 for usage errors and 2 for runtime
//! failures.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::crve::{estimator_label, Arity, Component, Estimates, Family};
use crate::dataset::{Dataset, Dimension, ModelSpec, Table};
use crate::diagnostics::{diag_panel, DiagPanel, DimDiagnostics};
use crate::inference::{t_report, DfContext, TestResult};
use crate::ols::fit_ols;
use crate::simlab::sweep::estimators;
use crate::simlab::{
    parse_sweep, placebo_run, run_sweep, write_sweep_csv, PlaceboConfig, PlaceboKind, PlaceboResult, SweepOptions,
};

#[derive(Debug, Parser)]
#[command(name = "twoclust", version, about = "Two-way cluster-robust and cluster-jackknife inference for OLS")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Worker threads (0 uses all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit OLS and report every variance estimator for the regressor of interest.
    Fit(FitArgs),
    /// Run a Monte Carlo sweep described by a TOML file.
    Simulate(SimulateArgs),
    /// Placebo-regression audit on a dataset.
    Placebo(PlaceboArgs),
    /// Cluster diagnostics only.
    Diagnose(DiagnoseArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Outcome, regressor of interest, then other regressors.
    #[arg(required = true, num_args = 1..)]
    pub varlist: Vec<String>,
    /// CSV file with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// The two clustering variables.
    #[arg(long, visible_alias = "clus", num_args = 1.., required = true)]
    pub cluster: Vec<String>,
    /// Categorical variables entered as fixed effects.
    #[arg(long, visible_alias = "fe", num_args = 1..)]
    pub fevar: Vec<String>,
    /// Row filter such as `female==1&age>=25`.
    #[arg(long, visible_alias = "sam")]
    pub sample: Option<String>,
    /// Omit the constant when there are no fixed effects.
    #[arg(long)]
    pub no_constant: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Text,
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Confidence level for intervals.
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Hypothesized value of the coefficient.
    #[arg(long, default_value_t = 0.0)]
    pub null: f64,
    /// Format written to standard output.
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    pub format: OutputFormat,
    /// Also write one record per estimator here (`.csv` for CSV, JSON lines otherwise).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Sweep file.
    pub config: PathBuf,
    /// Output CSV (standard output when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Replications per design, overriding the file.
    #[arg(long)]
    pub reps: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct PlaceboArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Number of placebo replications.
    #[arg(long)]
    pub reps: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Significance level of the tests.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// TOML generator file; the flags below override its entries.
    #[arg(long)]
    pub generator: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub kind: Option<KindArg>,
    #[arg(long)]
    pub jump_prob: Option<f64>,
    #[arg(long)]
    pub scale: Option<f64>,
    #[arg(long)]
    pub loading: Option<f64>,
    /// Dimension whose clusters carry the step paths.
    #[arg(long, value_enum)]
    pub unit: Option<UnitArg>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    pub format: OutputFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Iid,
    Step,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum UnitArg {
    G,
    H,
}

#[derive(Debug, Clone, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    pub format: OutputFormat,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{stage}: {message}")]
    Runtime { stage: &'static str, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime { .. } => 2,
        }
    }

    fn runtime(stage: &'static str, e: impl std::fmt::Display) -> Self {
        CliError::Runtime {
            stage,
            message: e.to_string(),
        }
    }
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let stdout = io::stdout();
    match execute(&cli, &mut stdout.lock()) {
        Ok(()) => 0,
        Err(e) => {
            match &e {
                CliError::Usage(m) => eprintln!("error: {m}"),
                CliError::Runtime { stage, message } => eprintln!("error in {stage}: {message}"),
            }
            e.exit_code()
        }
    }
}

/// Runs a parsed command, writing its primary output to `out`.
pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Fit(a) => cmd_fit(a, out),
        Command::Simulate(a) => cmd_simulate(a, cli.threads, out),
        Command::Placebo(a) => cmd_placebo(a, cli.threads, out),
        Command::Diagnose(a) => cmd_diagnose(a, out),
    }
}

/// Regressor names and cluster variables resolved from the data flags.
struct Design {
    dataset: Dataset,
    g_name: String,
    h_name: String,
}

fn load_design(a: &DataArgs) -> Result<Design, CliError> {
    if a.cluster.len() != 2 {
        return Err(CliError::Usage(format!(
            "exactly two cluster variables are required, got {}",
            a.cluster.len()
        )));
    }
    if a.varlist.len() < 2 {
        return Err(CliError::Usage(
            "varlist needs the outcome followed by the regressor of interest".into(),
        ));
    }
    let table = Table::read_csv(&a.data).map_err(|e| CliError::runtime("load", e))?;
    let spec = ModelSpec {
        y: a.varlist[0].clone(),
        x: a.varlist[1..].to_vec(),
        g: a.cluster[0].clone(),
        h: a.cluster[1].clone(),
        fevar: a.fevar.clone(),
        constant: !a.no_constant,
        sample: a.sample.clone(),
    };
    let dataset = table.to_dataset(&spec).map_err(|e| CliError::runtime("design", e))?;
    Ok(Design {
        dataset,
        g_name: a.cluster[0].clone(),
        h_name: a.cluster[1].clone(),
    })
}

fn write_output(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::runtime("output", format!("{}: {e}", path.display())))
}

fn io_err(e: impl std::fmt::Display) -> CliError {
    CliError::runtime("output", e)
}

// ---------------------------------------------------------------- fit

/// Sample sizes and degrees of freedom behind a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitMeta {
    pub n_obs: usize,
    pub n_cols: usize,
    /// Regressors other than fixed-effect dummies.
    pub n_primary: usize,
    pub n_g: usize,
    pub n_h: usize,
    pub n_i: usize,
    pub g_name: String,
    pub h_name: String,
    pub level: f64,
    pub df_two_way: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub coef: String,
    pub estimate: f64,
    /// The 16 estimators in menu order.
    pub rows: Vec<TestResult>,
    pub diagnostics: DiagPanel,
    pub meta: FitMeta,
}

/// Fits `ds` and assembles the full report for its coefficient of interest.
pub fn fit_report(ds: &Dataset, g_name: &str, h_name: &str, level: f64, null: f64) -> Result<FitReport, CliError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(CliError::Usage(format!("--level must lie in (0, 1), got {level}")));
    }
    let fit = fit_ols(ds).map_err(|e| CliError::runtime("fit", e))?;
    let indices = ds.cluster_indices();
    let est = Estimates::compute_with(&fit, &indices[0], &indices[1], &indices[2])
        .map_err(|e| CliError::runtime("variance", e))?;
    let coef = ds.coef_id();
    let ctx = DfContext {
        n_obs: est.n_obs,
        n_cols: est.n_cols,
        n_g: est.n_g,
        n_h: est.n_h,
        n_i: est.n_i,
    };
    let rows = t_report(est.beta[coef], &est.menu(coef), &ctx, level, null);
    let diagnostics = diag_panel(&fit, &est, &indices, coef).map_err(|e| CliError::runtime("diagnostics", e))?;
    Ok(FitReport {
        coef: ds.coef_name().to_string(),
        estimate: est.beta[coef],
        rows,
        diagnostics,
        meta: FitMeta {
            n_obs: est.n_obs,
            n_cols: est.n_cols,
            n_primary: ds.n_primary(),
            n_g: est.n_g,
            n_h: est.n_h,
            n_i: est.n_i,
            g_name: g_name.to_string(),
            h_name: h_name.to_string(),
            level,
            df_two_way: ctx.df(Arity::TwoTerm),
        },
    })
}

fn cmd_fit(a: &FitArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let d = load_design(&a.data)?;
    let report = fit_report(&d.dataset, &d.g_name, &d.h_name, a.level, a.null)?;
    match a.format {
        OutputFormat::Text => out.write_all(render_fit_text(&report).as_bytes()).map_err(io_err)?,
        f => write_records(&records(&report), f, &mut *out)?,
    }
    if let Some(path) = &a.out {
        let fmt = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            OutputFormat::Csv
        } else {
            OutputFormat::Jsonl
        };
        let mut w = write_output(path)?;
        write_records(&records(&report), fmt, &mut w)?;
        w.flush().map_err(io_err)?;
    }
    Ok(())
}

/// One machine-readable estimator row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorRecord {
    pub coef: String,
    pub estimator: String,
    pub family: String,
    pub arity: String,
    pub estimate: f64,
    pub se: Option<f64>,
    pub stat: Option<f64>,
    pub p: Option<f64>,
    pub df: u64,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
    pub defined: bool,
    pub selected_component: Option<String>,
}

impl EstimatorRecord {
    pub fn new(coef: &str, r: &TestResult) -> Self {
        Self {
            coef: coef.to_string(),
            estimator: r.label(),
            family: r.family.as_str().to_string(),
            arity: r.arity.as_str().to_string(),
            estimate: r.estimate,
            se: r.se,
            stat: r.stat,
            p: r.p,
            df: r.df,
            ci_lo: r.ci.map(|c| c.0),
            ci_hi: r.ci.map(|c| c.1),
            defined: r.defined,
            selected_component: r.selected.map(|c| c.as_str().to_string()),
        }
    }

    /// Rebuilds the in-memory row; `None` when a field does not parse.
    pub fn to_result(&self) -> Option<TestResult> {
        let ci = match (self.ci_lo, self.ci_hi) {
            (Some(lo), Some(hi)) => Some((lo, hi)),
            (None, None) => None,
            _ => return None,
        };
        let selected = match &self.selected_component {
            Some(s) => Some(Component::parse(s)?),
            None => None,
        };
        Some(TestResult {
            family: Family::parse(&self.family)?,
            arity: Arity::parse(&self.arity)?,
            estimate: self.estimate,
            se: self.se,
            stat: self.stat,
            df: self.df,
            p: self.p,
            ci,
            defined: self.defined,
            selected,
        })
    }
}

pub fn records(report: &FitReport) -> Vec<EstimatorRecord> {
    report.rows.iter().map(|r| EstimatorRecord::new(&report.coef, r)).collect()
}

pub fn write_records<W: Write>(recs: &[EstimatorRecord], format: OutputFormat, mut w: W) -> Result<(), CliError> {
    match format {
        OutputFormat::Csv => {
            let mut wr = csv::Writer::from_writer(w);
            for r in recs {
                wr.serialize(r).map_err(io_err)?;
            }
            wr.flush().map_err(io_err)?;
        }
        OutputFormat::Jsonl | OutputFormat::Text => {
            for r in recs {
                serde_json::to_writer(&mut w, r).map_err(io_err)?;
                w.write_all(b"\n").map_err(io_err)?;
            }
        }
    }
    Ok(())
}

pub fn read_records<R: Read>(format: OutputFormat, r: R) -> Result<Vec<EstimatorRecord>, CliError> {
    let parse = |e: &dyn std::fmt::Display| CliError::runtime("parse", e.to_string());
    match format {
        OutputFormat::Csv => csv::Reader::from_reader(r)
            .deserialize()
            .map(|rec| rec.map_err(|e| parse(&e)))
            .collect(),
        _ => {
            let mut text = String::new();
            io::BufReader::new(r).read_to_string(&mut text).map_err(|e| parse(&e))?;
            text.lines()
                .filter(|l| !l.trim().is_empty())
                .map(|l| serde_json::from_str(l).map_err(|e| parse(&e)))
                .collect()
        }
    }
}

fn dim_name(dim: Dimension, meta: &FitMeta) -> &str {
    match dim {
        Dimension::G => &meta.g_name,
        Dimension::H => &meta.h_name,
        Dimension::I => "intersect",
    }
}

fn opt(v: Option<f64>, decimals: usize, width: usize) -> String {
    match v {
        Some(x) => format!("{x:>width$.decimals$}"),
        None => format!("{:>width$}", "."),
    }
}

/// Aligned text rendering of a fit report.
pub fn render_fit_text(r: &FitReport) -> String {
    let m = &r.meta;
    let mut s = String::new();
    let _ = writeln!(s, "Two-way cluster-robust inference for {}", r.coef);
    let _ = writeln!(
        s,
        "Clusters: {} (G = {}), {} (H = {}), intersections I = {}",
        m.g_name, m.n_g, m.h_name, m.n_h, m.n_i
    );
    let _ = writeln!(
        s,
        "N = {}, k = {}, p = {}, two-way df = {}, {:.0}% intervals",
        m.n_obs,
        m.n_cols,
        m.n_primary,
        m.df_two_way,
        m.level * 100.0
    );
    let _ = writeln!(s);
    let _ = writeln!(s, "Regression output");
    let header = format!(
        "{:>9} | {:>10} {:>10} {:>8} {:>8} {:>11} {:>11} {:>6}  {}",
        "s.e.", "Coeff", "Sd. Err.", "t-stat", "P value", "CI-lower", "CI-upper", "df", "max"
    );
    let _ = writeln!(s, "{header}");
    let _ = writeln!(s, "{}+{}", "-".repeat(10), "-".repeat(header.len() - 11));
    for row in &r.rows {
        let label = row.label();
        if !row.defined {
            let _ = writeln!(
                s,
                "{label:>9} | {:>10.6} {:>10} {:>8} {:>8} {:>11} {:>11} {:>6}",
                row.estimate, "undefined", ".", ".", ".", ".", row.df
            );
            continue;
        }
        let (lo, hi) = match row.ci {
            Some((a, b)) => (Some(a), Some(b)),
            None => (None, None),
        };
        let _ = writeln!(
            s,
            "{label:>9} | {:>10.6} {} {} {} {} {} {:>6}  {}",
            row.estimate,
            opt(row.se, 6, 10),
            opt(row.stat, 4, 8),
            opt(row.p, 4, 8),
            opt(lo, 6, 11),
            opt(hi, 6, 11),
            row.df,
            row.selected.map_or("", |c| c.as_str())
        );
    }
    let _ = writeln!(s);
    s.push_str(&render_diag_text(&r.diagnostics, m));
    s
}

fn render_diag_text(d: &DiagPanel, m: &FitMeta) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "Coefficients of variation, G, and G*");
    let header = format!(
        "{:>10} | {:>8} {:>10} {:>11} {:>11} {:>8} {:>10}",
        "dimension", "Ng", "Leverage", "Partial L.", "beta no g", "G", "Gstar"
    );
    let _ = writeln!(s, "{header}");
    let _ = writeln!(s, "{}+{}", "-".repeat(11), "-".repeat(header.len() - 12));
    for row in &d.dims {
        let _ = writeln!(
            s,
            "{:>10} | {:>8.4} {:>10.4} {:>11.4} {:>11.4} {:>8} {:>10.2}",
            dim_name(row.dim, m),
            row.size_cv,
            row.leverage_cv,
            row.partial_leverage_cv,
            row.beta_cv,
            row.n_clusters,
            row.gstar
        );
    }
    s
}

// ---------------------------------------------------------------- diagnose

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagRecord {
    pub dimension: String,
    pub clusters: usize,
    pub size_cv: f64,
    pub leverage_cv: f64,
    pub partial_leverage_cv: f64,
    pub beta_cv: f64,
    pub gstar: f64,
}

impl DiagRecord {
    fn new(row: &DimDiagnostics, m: &FitMeta) -> Self {
        Self {
            dimension: dim_name(row.dim, m).to_string(),
            clusters: row.n_clusters,
            size_cv: row.size_cv,
            leverage_cv: row.leverage_cv,
            partial_leverage_cv: row.partial_leverage_cv,
            beta_cv: row.beta_cv,
            gstar: row.gstar,
        }
    }
}

fn cmd_diagnose(a: &DiagnoseArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let d = load_design(&a.data)?;
    let report = fit_report(&d.dataset, &d.g_name, &d.h_name, 0.95, 0.0)?;
    let recs: Vec<DiagRecord> = report
        .diagnostics
        .dims
        .iter()
        .map(|row| DiagRecord::new(row, &report.meta))
        .collect();
    match a.format {
        OutputFormat::Text => {
            let text = render_diag_text(&report.diagnostics, &report.meta);
            out.write_all(text.as_bytes()).map_err(io_err)
        }
        OutputFormat::Csv => {
            let mut wr = csv::Writer::from_writer(out);
            for r in &recs {
                wr.serialize(r).map_err(io_err)?;
            }
            wr.flush().map_err(io_err)
        }
        OutputFormat::Jsonl => {
            for r in &recs {
                serde_json::to_writer(&mut *out, r).map_err(io_err)?;
                out.write_all(b"\n").map_err(io_err)?;
            }
            Ok(())
        }
    }
}

// ---------------------------------------------------------------- simulate

fn cmd_simulate(a: &SimulateArgs, threads: usize, out: &mut dyn Write) -> Result<(), CliError> {
    if a.reps == Some(0) {
        return Err(CliError::Usage("--reps must be positive".into()));
    }
    let text = std::fs::read_to_string(&a.config)
        .map_err(|e| CliError::runtime("config", format!("{}: {e}", a.config.display())))?;
    let cfgs = parse_sweep(&text).map_err(|e| CliError::runtime("config", e))?;
    let opts = SweepOptions {
        threads,
        replications: a.reps,
        progress: true,
    };
    let results = run_sweep(&cfgs, &opts).map_err(|e| CliError::runtime("simulate", e))?;
    match &a.out {
        Some(path) => {
            let mut w = write_output(path)?;
            write_sweep_csv(&results, &mut w).map_err(io_err)?;
            w.flush().map_err(io_err)?;
            eprintln!("wrote {} design points to {}", results.len(), path.display());
        }
        None => write_sweep_csv(&results, out).map_err(io_err)?,
    }
    Ok(())
}

// ---------------------------------------------------------------- placebo

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaceboRecord {
    pub estimator: String,
    pub family: String,
    pub arity: String,
    pub replications: u64,
    pub completed: u64,
    pub rejection_freq: f64,
    pub undefined_freq: f64,
}

pub fn placebo_records(res: &PlaceboResult) -> Vec<PlaceboRecord> {
    estimators()
        .into_iter()
        .enumerate()
        .map(|(r, (family, arity))| PlaceboRecord {
            estimator: estimator_label(family, arity),
            family: family.as_str().to_string(),
            arity: arity.as_str().to_string(),
            replications: res.tally.replications,
            completed: res.tally.completed,
            rejection_freq: res.tally.rejection_freq(r),
            undefined_freq: res.tally.undefined_freq(r),
        })
        .collect()
}

fn placebo_generator(a: &PlaceboArgs) -> Result<PlaceboConfig, CliError> {
    let mut gen = match &a.generator {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::runtime("config", format!("{}: {e}", path.display())))?;
            PlaceboConfig::parse_toml(&text).map_err(|e| CliError::runtime("config", e))?
        }
        None => PlaceboConfig::default(),
    };
    if let Some(k) = a.kind {
        gen.kind = match k {
            KindArg::Iid => PlaceboKind::Iid,
            KindArg::Step => PlaceboKind::Step,
        };
    }
    if let Some(v) = a.jump_prob {
        gen.jump_prob = v;
    }
    if let Some(v) = a.scale {
        gen.scale = v;
    }
    if let Some(v) = a.loading {
        gen.loading = v;
    }
    if let Some(u) = a.unit {
        gen.unit = match u {
            UnitArg::G => Dimension::G,
            UnitArg::H => Dimension::H,
        };
    }
    gen.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(gen)
}

fn cmd_placebo(a: &PlaceboArgs, threads: usize, out: &mut dyn Write) -> Result<(), CliError> {
    if a.reps == 0 {
        return Err(CliError::Usage("--reps must be positive".into()));
    }
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(CliError::Usage(format!("--alpha must lie in (0, 1), got {}", a.alpha)));
    }
    let gen = placebo_generator(a)?;
    let d = load_design(&a.data)?;
    let res = placebo_run(&d.dataset, &gen, a.reps, a.seed, a.alpha, threads)
        .map_err(|e| CliError::runtime("placebo", e))?;
    let recs = placebo_records(&res);
    match a.format {
        OutputFormat::Text => {
            let mut s = String::new();
            let _ = writeln!(
                s,
                "Placebo rejection frequencies at the {} level ({} replications, {} completed)",
                a.alpha, res.tally.replications, res.tally.completed
            );
            let _ = writeln!(s, "{:>9} | {:>9} {:>9}", "s.e.", "reject", "undefined");
            let _ = writeln!(s, "{}+{}", "-".repeat(10), "-".repeat(20));
            for r in &recs {
                let _ = writeln!(s, "{:>9} | {:>9.4} {:>9.4}", r.estimator, r.rejection_freq, r.undefined_freq);
            }
            for (kind, n) in &res.tally.failures {
                let _ = writeln!(s, "failed replications ({kind}): {n}");
            }
            out.write_all(s.as_bytes()).map_err(io_err)
        }
        OutputFormat::Csv => {
            let mut wr = csv::Writer::from_writer(out);
            for r in &recs {
                wr.serialize(r).map_err(io_err)?;
            }
            wr.flush().map_err(io_err)
        }
        OutputFormat::Jsonl => {
            for r in &recs {
                serde_json::to_writer(&mut *out, r).map_err(io_err)?;
                out.write_all(b"\n").map_err(io_err)?;
            }
            Ok(())
        }
    }
}
