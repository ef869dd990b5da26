//! Cluster-level influence measures and effective cluster counts.

use crate::crve::{selector_projection, sparse_hat_values, Estimates};
use crate::dataset::{ClusterIndex, Dimension};
use crate::ols::{EstimationError, OlsFit};

/// Per-cluster leverage `L_j = sum_{i in j} h_i`.
pub fn leverage(fit: &OlsFit<'_>, idx: &ClusterIndex) -> Vec<f64> {
    let h = sparse_hat_values(fit);
    sum_by_cluster(&h, idx)
}

fn sum_by_cluster(values: &[f64], idx: &ClusterIndex) -> Vec<f64> {
    idx.all_members()
        .iter()
        .map(|rows| rows.iter().map(|&i| values[i]).sum())
        .collect()
}

/// Cluster shares of the residualized-regressor sum of squares for `coef`.
pub fn partial_leverage(fit: &OlsFit<'_>, idx: &ClusterIndex, coef: usize) -> Result<Vec<f64>, EstimationError> {
    let acc = fit.gram_inverse().get(coef, coef);
    // x~'x~ = 1 / A_cc; it vanishes when the column is collinear with the rest.
    if !(acc.is_finite() && acc > 0.0) || 1.0 / acc <= 1e-12 * fit.gram().get(coef, coef) {
        return Err(EstimationError::CollinearColumn);
    }
    let gamma = gamma(fit, idx, coef);
    Ok(gamma.into_iter().map(|g| g / acc).collect())
}

/// `gamma_j = e' A X_j'X_j A e`.
pub fn gamma(fit: &OlsFit<'_>, idx: &ClusterIndex, coef: usize) -> Vec<f64> {
    let proj: Vec<f64> = selector_projection(fit, coef).into_iter().map(|v| v * v).collect();
    sum_by_cluster(&proj, idx)
}

/// Effective number of clusters `J / (1 + Gamma)` with
/// `Gamma = J^{-1} sum_j (gamma_j - mean)^2 / mean^2`.
pub fn gstar(fit: &OlsFit<'_>, idx: &ClusterIndex, coef: usize) -> Result<f64, EstimationError> {
    gstar_from_gamma(&gamma(fit, idx, coef))
}

pub fn gstar_from_gamma(gamma: &[f64]) -> Result<f64, EstimationError> {
    let j = gamma.len() as f64;
    let mean = gamma.iter().sum::<f64>() / j;
    if mean.is_nan() || mean <= 0.0 {
        return Err(EstimationError::DegenerateSelector);
    }
    let disp = gamma.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / j / (mean * mean);
    Ok(j / (1.0 + disp))
}

/// Sample standard deviation (J-1 denominator) over the absolute mean.
pub fn coef_of_variation(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return f64::NAN;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    var.sqrt() / mean.abs()
}

/// Diagnostics for one clustering dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct DimDiagnostics {
    pub dim: Dimension,
    pub n_clusters: usize,
    pub size_cv: f64,
    pub leverage_cv: f64,
    pub partial_leverage_cv: f64,
    pub beta_cv: f64,
    pub gstar: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagPanel {
    /// G, H and intersection rows, in that order.
    pub dims: [DimDiagnostics; 3],
}

/// Builds the panel from a fit and its precomputed estimates.
pub fn diag_panel(
    fit: &OlsFit<'_>,
    est: &Estimates,
    indices: &[ClusterIndex; 3],
    coef: usize,
) -> Result<DiagPanel, EstimationError> {
    let h = sparse_hat_values(fit);
    let acc = fit.gram_inverse().get(coef, coef);
    let proj: Vec<f64> = selector_projection(fit, coef).into_iter().map(|v| v * v).collect();
    let mut rows = Vec::with_capacity(3);
    for (idx, jack) in indices.iter().zip(&est.jackknife) {
        let sizes: Vec<f64> = idx.sizes().into_iter().map(|s| s as f64).collect();
        let lev = sum_by_cluster(&h, idx);
        let gam = sum_by_cluster(&proj, idx);
        let plev: Vec<f64> = gam.iter().map(|g| g / acc).collect();
        let betas: Vec<f64> = jack.betas.iter().map(|b| b[coef]).collect();
        rows.push(DimDiagnostics {
            dim: idx.dim(),
            n_clusters: idx.n_clusters(),
            size_cv: coef_of_variation(&sizes),
            leverage_cv: coef_of_variation(&lev),
            partial_leverage_cv: coef_of_variation(&plev),
            beta_cv: coef_of_variation(&betas),
            gstar: gstar_from_gamma(&gam)?,
        });
    }
    let dims: [DimDiagnostics; 3] = rows.try_into().expect("three dimensions");
    Ok(DiagPanel { dims })
}
