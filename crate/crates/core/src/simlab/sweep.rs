//! Replication sweeps over a grid of designs.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::config::SimConfig;
use super::dgp::{gen_dataset, Layout};
use super::rng::StreamKey;
use super::SimError;
use crate::crve::{estimator_label, Arity, Estimates, Family};
use crate::dataset::{DataError, Dataset};
use crate::inference::{critical_value, DfContext};
use crate::ols::{fit_ols, EstimationError};

/// Number of rows in the SE menu.
pub const N_ESTIMATORS: usize = 16;

/// `(family, arity)` in menu order.
pub fn estimators() -> [(Family, Arity); N_ESTIMATORS] {
    let mut out = [(Family::Cv1, Arity::Hc); N_ESTIMATORS];
    for (f, family) in [Family::Cv1, Family::Cv3].into_iter().enumerate() {
        for (a, arity) in Arity::ALL.into_iter().enumerate() {
            out[f * Arity::ALL.len() + a] = (family, arity);
        }
    }
    out
}

/// Rejection and undefined-variance counts for one replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Outcome {
    pub reject: [bool; N_ESTIMATORS],
    pub undefined: [bool; N_ESTIMATORS],
}

/// Fits `ds` and tests `beta[coef] = null` with every estimator.
/// Undefined standard errors count as rejections.
pub fn evaluate(ds: &Dataset, level: f64, null: f64) -> Result<Outcome, EstimationError> {
    let fit = fit_ols(ds)?;
    let est = Estimates::compute(&fit)?;
    let coef = ds.coef_id();
    let ctx = DfContext {
        n_obs: est.n_obs,
        n_cols: est.n_cols,
        n_g: est.n_g,
        n_h: est.n_h,
        n_i: est.n_i,
    };
    let b = est.beta[coef] - null;
    let mut out = Outcome {
        reject: [false; N_ESTIMATORS],
        undefined: [false; N_ESTIMATORS],
    };
    let mut crit: BTreeMap<u64, f64> = BTreeMap::new();
    for (r, e) in est.menu(coef).iter().enumerate() {
        let df = ctx.df(e.arity);
        let c = *crit.entry(df).or_insert_with(|| critical_value(level, df));
        match e.se {
            Some(se) => out.reject[r] = (b / se).abs() > c,
            None => {
                out.reject[r] = true;
                out.undefined[r] = true;
            }
        }
    }
    Ok(out)
}

/// Short name of an estimation failure, used as a tally key.
pub fn failure_kind(e: &EstimationError) -> &'static str {
    match e {
        EstimationError::Data(DataError::RankDeficient { .. }) => "rank_deficient",
        EstimationError::Data(_) => "data",
        EstimationError::TooFewClusters { .. } => "too_few_clusters",
        EstimationError::SingularReducedGram(_) => "singular_reduced_gram",
        EstimationError::SingularMjj(_) => "singular_mjj",
        EstimationError::CollinearColumn => "collinear_column",
        EstimationError::DegenerateSelector => "degenerate_selector",
        EstimationError::Numeric(_) => "numeric",
    }
}

/// Counts accumulated over replications.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Tally {
    pub replications: u64,
    /// Replications whose estimation succeeded.
    pub completed: u64,
    pub rejections: [u64; N_ESTIMATORS],
    pub undefined: [u64; N_ESTIMATORS],
    pub failures: BTreeMap<String, u64>,
}

impl Tally {
    pub fn record(mut self, outcome: Result<Outcome, EstimationError>) -> Self {
        self.replications += 1;
        match outcome {
            Ok(o) => {
                self.completed += 1;
                for r in 0..N_ESTIMATORS {
                    self.rejections[r] += o.reject[r] as u64;
                    self.undefined[r] += o.undefined[r] as u64;
                }
            }
            Err(e) => *self.failures.entry(failure_kind(&e).to_string()).or_default() += 1,
        }
        self
    }

    pub fn merge(mut self, other: Self) -> Self {
        self.replications += other.replications;
        self.completed += other.completed;
        for r in 0..N_ESTIMATORS {
            self.rejections[r] += other.rejections[r];
            self.undefined[r] += other.undefined[r];
        }
        for (k, v) in other.failures {
            *self.failures.entry(k).or_default() += v;
        }
        self
    }

    /// Rejection frequency among completed replications.
    pub fn rejection_freq(&self, r: usize) -> f64 {
        self.rejections[r] as f64 / self.completed.max(1) as f64
    }

    pub fn undefined_freq(&self, r: usize) -> f64 {
        self.undefined[r] as f64 / self.completed.max(1) as f64
    }

    pub fn n_failed(&self) -> u64 {
        self.failures.values().sum()
    }

    /// Index of `(family, arity)` in menu order.
    pub fn index(family: Family, arity: Arity) -> usize {
        estimators()
            .iter()
            .position(|&e| e == (family, arity))
            .expect("every pair is in the menu")
    }
}

/// Results for one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub config: SimConfig,
    pub empty_cells: usize,
    pub tally: Tally,
}

impl SweepResult {
    pub fn rejection(&self, family: Family, arity: Arity) -> f64 {
        self.tally.rejection_freq(Tally::index(family, arity))
    }

    pub fn undefined(&self, family: Family, arity: Arity) -> f64 {
        self.tally.undefined_freq(Tally::index(family, arity))
    }
}

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    /// Worker threads; 0 uses the rayon default.
    pub threads: usize,
    /// Replaces every design's replication count.
    pub replications: Option<usize>,
    /// Print per-point progress to standard error.
    pub progress: bool,
}

/// Runs `f` on a pool with `threads` workers (0 for the default pool).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    if threads == 0 {
        return f();
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool")
        .install(f)
}

/// Runs every design for its replication count. Each replication draws
/// from its own streams, so results do not depend on thread count or on
/// the position of a design in the grid.
pub fn run_sweep(cfgs: &[SimConfig], opts: &SweepOptions) -> Result<Vec<SweepResult>, SimError> {
    with_threads(opts.threads, || {
        let mut out = Vec::with_capacity(cfgs.len());
        for (i, cfg) in cfgs.iter().enumerate() {
            let mut cfg = cfg.clone();
            if let Some(r) = opts.replications {
                cfg.replications = r;
            }
            cfg.validate()?;
            let start = Instant::now();
            let res = run_point(&cfg)?;
            if opts.progress {
                eprintln!(
                    "point {}/{}: {} replications in {:.1}s",
                    i + 1,
                    cfgs.len(),
                    cfg.replications,
                    start.elapsed().as_secs_f64()
                );
            }
            out.push(res);
        }
        Ok(out)
    })
}

fn run_point(cfg: &SimConfig) -> Result<SweepResult, SimError> {
    let key = StreamKey::new(cfg.seed, &cfg.stream_label());
    let layout = Layout::build(cfg, &key)?;
    let tally = (0..cfg.replications as u64)
        .into_par_iter()
        .map(|rep| -> Result<_, SimError> {
            let ds = gen_dataset(cfg, &layout, &key, rep)?;
            Ok(evaluate(&ds, cfg.level, 0.0))
        })
        .try_fold(Tally::default, |t, o| o.map(|o| t.record(o)))
        .try_reduce(Tally::default, |a, b| Ok(a.merge(b)))?;
    Ok(SweepResult {
        config: cfg.clone(),
        empty_cells: layout.empty_cells(),
        tally,
    })
}

#[derive(Serialize)]
struct CsvRow<'a> {
    g: usize,
    h: usize,
    n: usize,
    gamma_size_g: f64,
    gamma_size_h: f64,
    rho_g: f64,
    rho_h: f64,
    rho_gx: f64,
    rho_hx: f64,
    p: usize,
    q: usize,
    binary_scope: &'a str,
    fe: bool,
    empty_frac: f64,
    empty_cells: usize,
    beta1: f64,
    level: f64,
    seed: u64,
    estimator: String,
    family: &'a str,
    arity: &'a str,
    replications: u64,
    completed: u64,
    rejection_freq: f64,
    undefined_freq: f64,
    failures: u64,
}

/// One CSV row per (grid point, estimator).
pub fn write_sweep_csv<W: Write>(results: &[SweepResult], w: W) -> Result<(), csv::Error> {
    let mut wr = csv::Writer::from_writer(w);
    for res in results {
        let c = &res.config;
        for (r, (family, arity)) in estimators().into_iter().enumerate() {
            wr.serialize(CsvRow {
                g: c.g,
                h: c.h,
                n: c.n,
                gamma_size_g: c.gamma_size_g,
                gamma_size_h: c.gamma_size_h,
                rho_g: c.rho_g,
                rho_h: c.rho_h,
                rho_gx: c.rho_gx,
                rho_hx: c.rho_hx,
                p: c.p,
                q: c.q,
                binary_scope: c.binary_scope.as_str(),
                fe: c.fe,
                empty_frac: c.empty_frac,
                empty_cells: res.empty_cells,
                beta1: c.beta1,
                level: c.level,
                seed: c.seed,
                estimator: estimator_label(family, arity),
                family: family.as_str(),
                arity: arity.as_str(),
                replications: res.tally.replications,
                completed: res.tally.completed,
                rejection_freq: res.tally.rejection_freq(r),
                undefined_freq: res.tally.undefined_freq(r),
                failures: res.tally.n_failed(),
            })?;
        }
    }
    wr.flush()?;
    Ok(())
}
