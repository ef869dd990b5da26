//! Placebo-regression audits on a real dataset.
//!
//! Each replication prepends a synthetic regressor to the design, refits
//! and tests that its coefficient is zero with every estimator.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::rng::{Stream, StreamKey};
use super::sweep::{evaluate, with_threads, Tally};
use super::SimError;
use crate::dataset::{Categorical, Dataset, Dimension};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlaceboKind {
    /// Independent normal draws per observation.
    Iid,
    /// Per-unit step process over periods.
    Step,
}

fn default_kind() -> PlaceboKind {
    PlaceboKind::Step
}
fn default_jump_prob() -> f64 {
    0.15
}
fn default_scale() -> f64 {
    1.0
}
fn default_loading() -> f64 {
    0.5
}
fn default_unit() -> Dimension {
    Dimension::H
}

/// Placebo generator.
///
/// For `step`, units are the clusters of `unit` and periods are the
/// clusters of the other dimension, ordered numerically when every label
/// parses as a number and by first appearance otherwise. Each unit starts
/// at zero; in every period it jumps with probability `jump_prob` by
/// `|m| * scale`. Jump timing and size use standard normals that load on a
/// per-period common factor with weight `loading`, so jumps are correlated
/// across units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaceboConfig {
    #[serde(default = "default_kind")]
    pub kind: PlaceboKind,
    #[serde(default = "default_jump_prob")]
    pub jump_prob: f64,
    #[serde(default = "default_scale")]
    pub scale: f64,
    #[serde(default = "default_loading")]
    pub loading: f64,
    #[serde(default = "default_unit")]
    pub unit: Dimension,
}

impl Default for PlaceboConfig {
    fn default() -> Self {
        Self {
            kind: default_kind(),
            jump_prob: default_jump_prob(),
            scale: default_scale(),
            loading: default_loading(),
            unit: default_unit(),
        }
    }
}

impl PlaceboConfig {
    pub fn iid() -> Self {
        Self {
            kind: PlaceboKind::Iid,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |key: &str, reason: String| Err(SimError::Config { key: key.into(), reason });
        if !(self.jump_prob > 0.0 && self.jump_prob < 1.0) {
            return bad("jump_prob", format!("must lie in (0, 1), got {}", self.jump_prob));
        }
        if !(self.scale >= 0.0 && self.scale.is_finite()) {
            return bad("scale", format!("must be finite and non-negative, got {}", self.scale));
        }
        if !(-1.0..=1.0).contains(&self.loading) {
            return bad("loading", format!("must lie in [-1, 1], got {}", self.loading));
        }
        if self.unit == Dimension::I {
            return bad("unit", "must be G or H".into());
        }
        Ok(())
    }

    pub fn parse_toml(text: &str) -> Result<Self, SimError> {
        let cfg: Self = toml::from_str(text).map_err(|e| SimError::Config {
            key: e.message().split('`').nth(1).unwrap_or("<placebo>").to_string(),
            reason: e.message().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Period rank of each level of `c`.
fn period_order(c: &Categorical) -> Vec<usize> {
    let levels = c.levels();
    let mut idx: Vec<usize> = (0..levels.len()).collect();
    let nums: Option<Vec<f64>> = levels.iter().map(|l| l.trim().parse::<f64>().ok()).collect();
    if let Some(nums) = nums {
        idx.sort_by(|&a, &b| nums[a].total_cmp(&nums[b]));
    }
    let mut rank = vec![0; levels.len()];
    for (r, &l) in idx.iter().enumerate() {
        rank[l] = r;
    }
    rank
}

/// Layout of a step placebo on one dataset.
#[derive(Debug, Clone)]
struct StepPlan {
    n_units: usize,
    n_periods: usize,
    unit: Vec<usize>,
    period: Vec<usize>,
}

impl StepPlan {
    fn new(ds: &Dataset, unit_dim: Dimension) -> Self {
        let (units, periods) = match unit_dim {
            Dimension::G => (ds.g_labels(), ds.h_labels()),
            _ => (ds.h_labels(), ds.g_labels()),
        };
        let rank = period_order(periods);
        Self {
            n_units: units.n_levels(),
            n_periods: periods.n_levels(),
            unit: units.codes().to_vec(),
            period: periods.codes().iter().map(|&c| rank[c]).collect(),
        }
    }
}

/// Draws one placebo column.
fn draw(gen: &PlaceboConfig, plan: Option<&StepPlan>, n: usize, rng: &mut impl Rng) -> Vec<f64> {
    match (gen.kind, plan) {
        (PlaceboKind::Step, Some(plan)) => {
            let l = gen.loading;
            let s = (1.0 - l * l).sqrt();
            let threshold = Normal::standard().inverse_cdf(gen.jump_prob);
            let mut level = vec![0.0; plan.n_units * plan.n_periods];
            for t in 0..plan.n_periods {
                let f_time: f64 = rng.sample(StandardNormal);
                let f_size: f64 = rng.sample(StandardNormal);
                for u in 0..plan.n_units {
                    let e_time: f64 = rng.sample(StandardNormal);
                    let e_size: f64 = rng.sample(StandardNormal);
                    let prev = if t == 0 { 0.0 } else { level[u * plan.n_periods + t - 1] };
                    let jump = if l * f_time + s * e_time < threshold {
                        (l * f_size + s * e_size).abs() * gen.scale
                    } else {
                        0.0
                    };
                    level[u * plan.n_periods + t] = prev + jump;
                }
            }
            (0..n)
                .map(|i| level[plan.unit[i] * plan.n_periods + plan.period[i]])
                .collect()
        }
        _ => (0..n)
            .map(|_| gen.scale * rng.sample::<f64, _>(StandardNormal))
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlaceboResult {
    pub generator: PlaceboConfig,
    pub tally: Tally,
}

/// Runs `replications` placebo regressions on `ds` and tallies rejections
/// at `level`. Failed replications are counted by failure kind.
pub fn placebo_run(
    ds: &Dataset,
    gen: &PlaceboConfig,
    replications: usize,
    seed: u64,
    level: f64,
    threads: usize,
) -> Result<PlaceboResult, SimError> {
    gen.validate()?;
    if replications == 0 {
        return Err(SimError::Config {
            key: "replications".into(),
            reason: "must be positive".into(),
        });
    }
    let label = serde_json::to_string(gen).expect("generator serializes");
    let key = StreamKey::new(seed, &label);
    let plan = (gen.kind == PlaceboKind::Step).then(|| StepPlan::new(ds, gen.unit));
    let n = ds.n_obs();
    let tally = with_threads(threads, || {
        (0..replications as u64)
            .into_par_iter()
            .map(|rep| -> Result<_, SimError> {
                let mut rng = key.rng(rep, Stream::Placebo);
                let col = draw(gen, plan.as_ref(), n, &mut rng);
                let wider = ds.prepend_column("placebo", &col)?;
                Ok(evaluate(&wider, level, 0.0))
            })
            .try_fold(Tally::default, |t, o| o.map(|o| t.record(o)))
            .try_reduce(Tally::default, |a, b| Ok(a.merge(b)))
    })?;
    Ok(PlaceboResult {
        generator: gen.clone(),
        tally,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::Matrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn panel(n_units: usize, years: &[i32], seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut y = Vec::new();
        let mut x = Vec::new();
        let mut g = Vec::new();
        let mut h = Vec::new();
        for &yr in years {
            for u in 0..n_units {
                for _ in 0..4 {
                    y.push(rng.sample::<f64, _>(StandardNormal));
                    x.push(1.0);
                    g.push(yr.to_string());
                    h.push(format!("u{u}"));
                }
            }
        }
        Dataset::new(
            y,
            Matrix::column(&x),
            vec!["_cons".into()],
            Categorical::from_labels(&g),
            Categorical::from_labels(&h),
            0,
        )
        .unwrap()
    }

    #[test]
    fn periods_sort_numerically() {
        let c = Categorical::from_labels(&["1990", "1985", "2000", "1985"]);
        assert_eq!(period_order(&c), vec![1, 0, 2]);
        let c = Categorical::from_labels(&["b", "a"]);
        assert_eq!(period_order(&c), vec![0, 1]);
    }

    #[test]
    fn step_paths_are_nondecreasing_and_constant_within_cells() {
        let ds = panel(5, &[2003, 2001, 2002, 2000], 1);
        let plan = StepPlan::new(&ds, Dimension::H);
        let gen = PlaceboConfig {
            jump_prob: 0.5,
            ..PlaceboConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let col = draw(&gen, Some(&plan), ds.n_obs(), &mut rng);
        let mut by_cell = std::collections::BTreeMap::new();
        for i in 0..ds.n_obs() {
            let v = *by_cell.entry((plan.unit[i], plan.period[i])).or_insert(col[i]);
            assert_eq!(v, col[i]);
        }
        for u in 0..plan.n_units {
            for t in 1..plan.n_periods {
                assert!(by_cell[&(u, t)] >= by_cell[&(u, t - 1)]);
            }
        }
        assert!(col.iter().any(|&v| v > 0.0));
    }

    #[test]
    fn zero_scale_is_rank_deficient() {
        let ds = panel(4, &[1, 2, 3], 3);
        let gen = PlaceboConfig {
            scale: 0.0,
            ..PlaceboConfig::default()
        };
        let res = placebo_run(&ds, &gen, 5, 1, 0.05, 1).unwrap();
        assert_eq!(res.tally.completed, 0);
        assert_eq!(res.tally.failures.get("rank_deficient"), Some(&5));
    }

    #[test]
    fn results_are_reproducible() {
        let ds = panel(4, &[1, 2, 3], 3);
        let gen = PlaceboConfig::iid();
        let a = placebo_run(&ds, &gen, 20, 9, 0.05, 1).unwrap();
        let b = placebo_run(&ds, &gen, 20, 9, 0.05, 2).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.tally.completed, 20);
    }

    #[test]
    fn zero_replications_rejected() {
        let ds = panel(4, &[1, 2, 3], 3);
        assert!(matches!(
            placebo_run(&ds, &PlaceboConfig::iid(), 0, 1, 0.05, 1),
            Err(SimError::Config { .. })
        ));
    }

    #[test]
    fn generator_toml_names_bad_key() {
        let err = PlaceboConfig::parse_toml("kind = \"step\"\njump_prob = 1.5\n").unwrap_err();
        assert!(matches!(err, SimError::Config { ref key, .. } if key == "jump_prob"));
        let err = PlaceboConfig::parse_toml("wobble = 1\n").unwrap_err();
        assert!(matches!(err, SimError::Config { ref key, .. } if key == "wobble"));
        let cfg = PlaceboConfig::parse_toml("kind = \"iid\"\nunit = \"G\"\n").unwrap();
        assert_eq!((cfg.kind, cfg.unit), (PlaceboKind::Iid, Dimension::G));
    }
}
