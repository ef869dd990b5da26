//! Simulation design and sweep-grid configuration.
//!
//! A sweep file is TOML with a `[base]` table holding a full design and an
//! optional `[grid]` table mapping design keys to lists of values. The grid
//! is the cartesian product of its axes, taken in alphabetical key order
//! with the last key varying fastest. Besides the design keys, the axes
//! `gamma`, `rho` and `rho_x` set both dimensions at once.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinaryScope {
    Observation,
    Intersection,
}

impl BinaryScope {
    pub fn as_str(&self) -> &'static str {
        match self {
            BinaryScope::Observation => "observation",
            BinaryScope::Intersection => "intersection",
        }
    }
}

fn default_level() -> f64 {
    0.05
}

fn default_binary_prob() -> f64 {
    0.5
}

fn default_true() -> bool {
    true
}

fn default_scope() -> BinaryScope {
    BinaryScope::Observation
}

/// One simulation design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub g: usize,
    pub h: usize,
    pub n: usize,
    #[serde(default)]
    pub gamma_size_g: f64,
    #[serde(default)]
    pub gamma_size_h: f64,
    #[serde(default)]
    pub rho_g: f64,
    #[serde(default)]
    pub rho_h: f64,
    #[serde(default)]
    pub rho_gx: f64,
    #[serde(default)]
    pub rho_hx: f64,
    /// Continuous regressors; the first one carries the coefficient of interest.
    pub p: usize,
    /// Extra binary regressors.
    #[serde(default)]
    pub q: usize,
    #[serde(default = "default_scope")]
    pub binary_scope: BinaryScope,
    #[serde(default = "default_binary_prob")]
    pub binary_prob: f64,
    /// Two-way fixed effects; without them a constant is included.
    #[serde(default = "default_true")]
    pub fe: bool,
    #[serde(default)]
    pub empty_frac: f64,
    #[serde(default)]
    pub beta1: f64,
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_level")]
    pub level: f64,
}

fn var_ratio(rho: f64) -> f64 {
    rho / (1.0 - rho)
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |key: &str, reason: String| Err(SimError::Config { key: key.to_string(), reason });
        if self.g < 2 {
            return bad("g", format!("need at least 2 clusters, got {}", self.g));
        }
        if self.h < 2 {
            return bad("h", format!("need at least 2 clusters, got {}", self.h));
        }
        if self.n < self.g.max(self.h) {
            return bad("n", "fewer observations than clusters".into());
        }
        if self.p == 0 {
            return bad("p", "at least one continuous regressor is required".into());
        }
        for (key, rho) in [
            ("rho_g", self.rho_g),
            ("rho_h", self.rho_h),
            ("rho_gx", self.rho_gx),
            ("rho_hx", self.rho_hx),
        ] {
            if !(0.0..1.0).contains(&rho) {
                return bad(key, format!("must lie in [0, 1), got {rho}"));
            }
        }
        if var_ratio(self.rho_g) + var_ratio(self.rho_h) > 1.0 {
            return bad(
                "rho_g",
                "rho_g/(1-rho_g) + rho_h/(1-rho_h) must not exceed 1 (idiosyncratic variance would be negative)"
                    .into(),
            );
        }
        if var_ratio(self.rho_gx) + var_ratio(self.rho_hx) > 1.0 {
            return bad(
                "rho_gx",
                "rho_gx/(1-rho_gx) + rho_hx/(1-rho_hx) must not exceed 1 (idiosyncratic variance would be negative)"
                    .into(),
            );
        }
        for (key, gamma) in [("gamma_size_g", self.gamma_size_g), ("gamma_size_h", self.gamma_size_h)] {
            if !(gamma >= 0.0 && gamma.is_finite()) {
                return bad(key, format!("must be finite and non-negative, got {gamma}"));
            }
        }
        if !(0.0..1.0).contains(&self.empty_frac) {
            return bad("empty_frac", format!("must lie in [0, 1), got {}", self.empty_frac));
        }
        if !(self.binary_prob > 0.0 && self.binary_prob < 1.0) {
            return bad("binary_prob", format!("must lie in (0, 1), got {}", self.binary_prob));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return bad("level", format!("must lie in (0, 1), got {}", self.level));
        }
        if !self.beta1.is_finite() {
            return bad("beta1", "must be finite".into());
        }
        if self.replications == 0 {
            return bad("replications", "must be positive".into());
        }
        let k = self.n_cols();
        if k >= self.n {
            return bad("n", format!("design has k={k} columns but only N={} rows", self.n));
        }
        Ok(())
    }

    /// Number of design columns.
    pub fn n_cols(&self) -> usize {
        let fe = if self.fe { self.g + self.h - 1 } else { 1 };
        self.p + self.q + fe
    }

    /// Label that identifies the design for random-stream derivation. The
    /// replication count is excluded so that longer runs extend shorter
    /// ones.
    pub fn stream_label(&self) -> String {
        let mut c = self.clone();
        c.replications = 0;
        serde_json::to_string(&c).expect("config serializes")
    }
}

/// A parsed sweep file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    pub base: toml::Table,
    #[serde(default)]
    pub grid: BTreeMap<String, Vec<toml::Value>>,
}

/// Parses a sweep file into the list of designs it describes.
pub fn parse_sweep(text: &str) -> Result<Vec<SimConfig>, SimError> {
    let file: SweepFile = toml::from_str(text).map_err(|e| SimError::Config {
        key: "<file>".into(),
        reason: e.message().to_string(),
    })?;
    expand_grid(&file.base, &file.grid)
}

pub fn expand_grid(base: &toml::Table, grid: &BTreeMap<String, Vec<toml::Value>>) -> Result<Vec<SimConfig>, SimError> {
    let mut points: Vec<toml::Table> = vec![base.clone()];
    for (key, values) in grid {
        if values.is_empty() {
            return Err(SimError::Config {
                key: key.clone(),
                reason: "grid axis has no values".into(),
            });
        }
        let targets: Vec<&str> = match key.as_str() {
            "gamma" => vec!["gamma_size_g", "gamma_size_h"],
            "rho" => vec!["rho_g", "rho_h"],
            "rho_x" => vec!["rho_gx", "rho_hx"],
            other => vec![other],
        };
        let mut next = Vec::with_capacity(points.len() * values.len());
        for p in &points {
            for v in values {
                let mut q = p.clone();
                for t in &targets {
                    q.insert(t.to_string(), v.clone());
                }
                next.push(q);
            }
        }
        points = next;
    }
    points
        .into_iter()
        .map(|t| {
            let cfg: SimConfig = toml::Value::Table(t).try_into().map_err(|e: toml::de::Error| SimError::Config {
                key: config_error_key(e.message()),
                reason: e.message().to_string(),
            })?;
            cfg.validate()?;
            Ok(cfg)
        })
        .collect()
}

fn config_error_key(msg: &str) -> String {
    // Serde messages name the offending field in backticks.
    msg.split('`').nth(1).unwrap_or("<config>").to_string()
}
