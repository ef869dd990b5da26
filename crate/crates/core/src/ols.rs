//! OLS fit and the per-cluster quantities built on it.

use crate::dataset::{gram_of, ClusterIndex, DataError, Dataset, Dimension};
use crate::numkernel::{Cholesky, NumError, SymMatrix};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EstimationError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("too few clusters in dimension {dim}: {count}")]
    TooFewClusters { dim: Dimension, count: usize },
    #[error("delete-one Gram singular for cluster {0}")]
    SingularReducedGram(usize),
    #[error("M_jj block singular for cluster {0}")]
    SingularMjj(usize),
    #[error("partial-leverage column is collinear with the other regressors")]
    CollinearColumn,
    #[error("coefficient selector has zero variance contribution")]
    DegenerateSelector,
    #[error(transparent)]
    Numeric(#[from] NumError),
}

/// Full-sample OLS fit.
#[derive(Debug, Clone)]
pub struct OlsFit<'a> {
    ds: &'a Dataset,
    beta: Vec<f64>,
    residuals: Vec<f64>,
    gram: SymMatrix,
    chol: Cholesky,
    xty: Vec<f64>,
    inv: SymMatrix,
}

pub fn fit_ols(ds: &Dataset) -> Result<OlsFit<'_>, EstimationError> {
    let x = ds.x();
    let gram = gram_of(x);
    let chol = Cholesky::factor(&gram).map_err(|e| match e {
        NumError::NotPositiveDefinite { pivot } => EstimationError::Data(DataError::RankDeficient {
            column: ds.names()[pivot].clone(),
        }),
        other => other.into(),
    })?;
    let k = ds.n_cols();
    let mut xty = vec![0.0; k];
    for (i, &yi) in ds.y().iter().enumerate() {
        if yi == 0.0 {
            continue;
        }
        for (acc, &v) in xty.iter_mut().zip(x.row(i)) {
            *acc += v * yi;
        }
    }
    let beta = chol.solve_vec(&xty);
    let residuals = ds
        .y()
        .iter()
        .enumerate()
        .map(|(i, &yi)| yi - crate::numkernel::dot(x.row(i), &beta))
        .collect();
    let inv = chol.inverse();
    Ok(OlsFit {
        ds,
        beta,
        residuals,
        gram,
        chol,
        xty,
        inv,
    })
}

impl<'a> OlsFit<'a> {
    pub fn dataset(&self) -> &'a Dataset {
        self.ds
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    pub fn gram(&self) -> &SymMatrix {
        &self.gram
    }

    pub fn cholesky(&self) -> &Cholesky {
        &self.chol
    }

    pub fn xty(&self) -> &[f64] {
        &self.xty
    }

    /// `(X'X)^{-1}`.
    pub fn gram_inverse(&self) -> &SymMatrix {
        &self.inv
    }

    pub fn n_obs(&self) -> usize {
        self.ds.n_obs()
    }

    pub fn n_cols(&self) -> usize {
        self.ds.n_cols()
    }

    /// Hat values `h_i = x_i' (X'X)^{-1} x_i`.
    pub fn hat_values(&self) -> Vec<f64> {
        let x = self.ds.x();
        (0..x.rows())
            .map(|i| {
                let xi = x.row(i);
                crate::numkernel::dot(xi, &self.inv.mul_vec(xi))
            })
            .collect()
    }
}

/// Empirical score vectors `s_j = X_j' u_j`, one per cluster.
#[derive(Debug, Clone)]
pub struct ClusterScores {
    pub dim: Dimension,
    pub scores: Vec<Vec<f64>>,
}

pub fn cluster_scores(fit: &OlsFit<'_>, idx: &ClusterIndex) -> ClusterScores {
    let x = fit.ds.x();
    let k = x.cols();
    let u = fit.residuals();
    let scores = idx
        .all_members()
        .iter()
        .map(|rows| {
            let mut s = vec![0.0; k];
            for &i in rows {
                for (acc, &v) in s.iter_mut().zip(x.row(i)) {
                    *acc += v * u[i];
                }
            }
            s
        })
        .collect();
    ClusterScores {
        dim: idx.dim(),
        scores,
    }
}

impl ClusterScores {
    /// Sums intersection scores into their G or H parents.
    pub fn aggregate(&self, ii: &ClusterIndex, target: Dimension, n_clusters: usize) -> ClusterScores {
        let k = self.scores.first().map_or(0, Vec::len);
        let mut out = vec![vec![0.0; k]; n_clusters];
        for (s, &(g, h)) in self.scores.iter().zip(ii.parents()) {
            let j = if target == Dimension::G { g } else { h };
            for (acc, v) in out[j].iter_mut().zip(s) {
                *acc += v;
            }
        }
        ClusterScores {
            dim: target,
            scores: out,
        }
    }
}

/// Per-cluster `X_j'X_j` and `X_j'y_j`.
#[derive(Debug, Clone)]
pub struct ClusterGrams {
    pub dim: Dimension,
    pub grams: Vec<SymMatrix>,
    pub xty: Vec<Vec<f64>>,
}

pub fn cluster_grams(ds: &Dataset, idx: &ClusterIndex) -> ClusterGrams {
    let x = ds.x();
    let y = ds.y();
    let k = x.cols();
    let mut nz_idx = Vec::with_capacity(k);
    let mut nz_val = Vec::with_capacity(k);
    let mut grams = Vec::with_capacity(idx.n_clusters());
    let mut xtys = Vec::with_capacity(idx.n_clusters());
    for rows in idx.all_members() {
        let mut gram = SymMatrix::zeros(k);
        let mut xty = vec![0.0; k];
        for &i in rows {
            nz_idx.clear();
            nz_val.clear();
            for (c, &v) in x.row(i).iter().enumerate() {
                if v != 0.0 {
                    nz_idx.push(c);
                    nz_val.push(v);
                    xty[c] += v * y[i];
                }
            }
            gram.add_sparse_outer_upper(&nz_idx, &nz_val, 1.0);
        }
        gram.mirror_upper();
        grams.push(gram);
        xtys.push(xty);
    }
    ClusterGrams {
        dim: idx.dim(),
        grams,
        xty: xtys,
    }
}

impl ClusterGrams {
    /// Sums intersection grams into their G or H parents.
    pub fn aggregate(&self, ii: &ClusterIndex, target: Dimension, n_clusters: usize) -> ClusterGrams {
        let k = self.grams.first().map_or(0, SymMatrix::dim);
        let mut grams = vec![SymMatrix::zeros(k); n_clusters];
        let mut xty = vec![vec![0.0; k]; n_clusters];
        for (j, &(g, h)) in ii.parents().iter().enumerate() {
            let t = if target == Dimension::G { g } else { h };
            grams[t].add_assign(&self.grams[j]);
            for (acc, v) in xty[t].iter_mut().zip(&self.xty[j]) {
                *acc += v;
            }
        }
        ClusterGrams {
            dim: target,
            grams,
            xty,
        }
    }

    pub fn n_clusters(&self) -> usize {
        self.grams.len()
    }
}

/// Modified scores `X_j' M_jj^{-1} u_j` with `M_jj = I - X_j (X'X)^{-1} X_j'`.
///
/// Forms each `M_jj` densely, so it is meant for verification on small
/// problems.
pub fn modified_scores(fit: &OlsFit<'_>, idx: &ClusterIndex) -> Result<ClusterScores, EstimationError> {
    let x = fit.ds.x();
    let u = fit.residuals();
    let a = fit.gram_inverse();
    let k = x.cols();
    let mut scores = Vec::with_capacity(idx.n_clusters());
    for (j, rows) in idx.all_members().iter().enumerate() {
        let m = rows.len();
        let ax: Vec<Vec<f64>> = rows.iter().map(|&i| a.mul_vec(x.row(i))).collect();
        let mjj = SymMatrix::from_fn(m, |r, c| {
            let h = crate::numkernel::dot(x.row(rows[r]), &ax[c]);
            if r == c {
                1.0 - h
            } else {
                -h
            }
        });
        let chol = Cholesky::factor(&mjj).map_err(|_| EstimationError::SingularMjj(j))?;
        let uj: Vec<f64> = rows.iter().map(|&i| u[i]).collect();
        let w = chol.solve_vec(&uj);
        let mut s = vec![0.0; k];
        for (&i, &wi) in rows.iter().zip(&w) {
            for (acc, &v) in s.iter_mut().zip(x.row(i)) {
                *acc += v * wi;
            }
        }
        scores.push(s);
    }
    Ok(ClusterScores {
        dim: idx.dim(),
        scores,
    })
}
