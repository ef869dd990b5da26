//! t and Wald tests, confidence intervals and the W_min rule.

use crate::crve::{estimator_label, Arity, Component, Family, SeEntry};
use crate::numkernel::{student_t_pvalue, student_t_quantile, Cholesky, Matrix, SymMatrix};

/// Sample dimensions that determine reference degrees of freedom.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DfContext {
    pub n_obs: usize,
    pub n_cols: usize,
    pub n_g: usize,
    pub n_h: usize,
    pub n_i: usize,
}

impl DfContext {
    /// `N-k` for HC, `J-1` for one-way, `min(G,H)-1` for two-way estimators.
    pub fn df(&self, arity: Arity) -> u64 {
        let df = match arity {
            Arity::Hc => self.n_obs.saturating_sub(self.n_cols),
            Arity::OneWayG => self.n_g - 1,
            Arity::OneWayH => self.n_h - 1,
            Arity::OneWayI => self.n_i - 1,
            _ => self.n_g.min(self.n_h) - 1,
        };
        df.max(1) as u64
    }
}

/// One row of a t-test report.
#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    pub family: Family,
    pub arity: Arity,
    pub estimate: f64,
    pub se: Option<f64>,
    pub stat: Option<f64>,
    pub df: u64,
    pub p: Option<f64>,
    pub ci: Option<(f64, f64)>,
    pub defined: bool,
    pub selected: Option<Component>,
}

impl TestResult {
    pub fn label(&self) -> String {
        estimator_label(self.family, self.arity)
    }

    /// Two-sided rejection at `level`; undefined statistics count as
    /// rejections.
    pub fn rejects(&self, level: f64) -> bool {
        match self.stat {
            Some(t) => t.abs() > critical_value(level, self.df),
            None => true,
        }
    }
}

/// Two-sided critical value of `t(df)` at significance `level`.
pub fn critical_value(level: f64, df: u64) -> f64 {
    student_t_quantile(1.0 - level / 2.0, df)
}

/// t statistics, p-values and confidence intervals for `beta_j - null`.
pub fn t_report(beta_j: f64, menu: &[SeEntry], ctx: &DfContext, level: f64, null: f64) -> Vec<TestResult> {
    menu.iter()
        .map(|e| {
            let df = ctx.df(e.arity);
            let crit = student_t_quantile(1.0 - (1.0 - level) / 2.0, df);
            let stat = e.se.map(|se| (beta_j - null) / se);
            TestResult {
                family: e.family,
                arity: e.arity,
                estimate: beta_j,
                se: e.se,
                stat,
                df,
                p: stat.map(|t| student_t_pvalue(t, df)),
                ci: e.se.map(|se| (beta_j - crit * se, beta_j + crit * se)),
                defined: e.se.is_some(),
                selected: e.selected,
            }
        })
        .collect()
}

/// `(R b - r)' (R V R')^{-1} (R b - r)`, or `None` when `R V R'` is not
/// positive definite.
pub fn wald(r_mat: &Matrix, r: &[f64], beta: &[f64], v: &SymMatrix) -> Option<f64> {
    assert_eq!(r_mat.cols(), v.dim(), "R and V are not conformable");
    assert_eq!(r_mat.rows(), r.len(), "R and r are not conformable");
    let d: Vec<f64> = r_mat
        .mul_vec(&beta[..r_mat.cols()])
        .iter()
        .zip(r)
        .map(|(a, b)| a - b)
        .collect();
    let m = v.quad_form_rows(r_mat);
    let ch = Cholesky::factor_with_tol(&m, 0.0).ok()?;
    let x = ch.solve_vec(&d);
    Some(crate::numkernel::dot(&d, &x))
}

/// `min{max{W3, 0}, W_G, W_H}`, with an undefined `W3` treated as zero.
pub fn w_min(w3: Option<f64>, wg: f64, wh: f64) -> (f64, Component) {
    let w3 = w3.map_or(0.0, |w| w.max(0.0));
    let mut best = (w3, Component::ThreeTerm);
    for (w, c) in [(wg, Component::G), (wh, Component::H)] {
        if w < best.0 {
            best = (w, c);
        }
    }
    best
}
