//! Cluster-robust variance estimators.
//!
//! CV1 matrices are plug-in sandwiches built from cluster scores. CV3
//! matrices come from delete-one-cluster coefficient vectors. Two-way
//! estimators combine the G, H and intersection components.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{ClusterIndex, Dataset, Dimension};
use crate::numkernel::{dot, sym_eigen, Cholesky, SymMatrix};
use crate::ols::{cluster_grams, cluster_scores, fit_ols, ClusterGrams, ClusterScores, EstimationError, OlsFit};

/// Eigenvalue floor used by the three-plus repair.
pub const ETA: f64 = 1e-12;

/// Relative pivot threshold for the generalized-inverse jackknife.
pub const JACKKNIFE_DROP_TOL: f64 = 1e-9;

/// Leverage above which a delete-one-observation fit is treated as
/// removing that observation's own dummy.
const HAT_ONE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    Cv1,
    Cv3,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Cv1 => "CV1",
            Family::Cv3 => "CV3",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Arity {
    Hc,
    OneWayI,
    OneWayG,
    OneWayH,
    TwoTerm,
    ThreeTerm,
    ThreePlus,
    Max,
}

impl Arity {
    /// Menu order within each family.
    pub const ALL: [Arity; 8] = [
        Arity::Hc,
        Arity::OneWayI,
        Arity::OneWayG,
        Arity::OneWayH,
        Arity::TwoTerm,
        Arity::ThreeTerm,
        Arity::ThreePlus,
        Arity::Max,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Arity::Hc => "hc",
            Arity::OneWayI => "oneway_i",
            Arity::OneWayG => "oneway_g",
            Arity::OneWayH => "oneway_h",
            Arity::TwoTerm => "two_term",
            Arity::ThreeTerm => "three_term",
            Arity::ThreePlus => "three_plus",
            Arity::Max => "max",
        }
    }

    pub fn parse(s: &str) -> Option<Arity> {
        Arity::ALL.into_iter().find(|a| a.as_str() == s)
    }

    /// Whether tests based on this estimator use the two-way reference
    /// distribution.
    pub fn is_two_way(&self) -> bool {
        matches!(
            self,
            Arity::TwoTerm | Arity::ThreeTerm | Arity::ThreePlus | Arity::Max
        )
    }
}

impl Family {
    pub fn as_str(&self) -> &'static str {
        match self {
            Family::Cv1 => "cv1",
            Family::Cv3 => "cv3",
        }
    }

    pub fn parse(s: &str) -> Option<Family> {
        match s {
            "cv1" => Some(Family::Cv1),
            "cv3" => Some(Family::Cv3),
            _ => None,
        }
    }
}

/// Conventional label such as `CV1max` or `HC3`.
pub fn estimator_label(family: Family, arity: Arity) -> String {
    let n = match family {
        Family::Cv1 => 1,
        Family::Cv3 => 3,
    };
    match arity {
        Arity::Hc => format!("HC{n}"),
        Arity::OneWayI => format!("CV{n}I"),
        Arity::OneWayG => format!("CV{n}G"),
        Arity::OneWayH => format!("CV{n}H"),
        Arity::TwoTerm => format!("CV{n}(2)"),
        Arity::ThreeTerm => format!("CV{n}(3)"),
        Arity::ThreePlus => format!("CV{n}(3+)"),
        Arity::Max => format!("CV{n}max"),
    }
}

/// Which candidate the max-se rule picked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Component {
    ThreeTerm,
    G,
    H,
}

impl Component {
    pub fn as_str(&self) -> &'static str {
        match self {
            Component::ThreeTerm => "three_term",
            Component::G => "G",
            Component::H => "H",
        }
    }

    pub fn parse(s: &str) -> Option<Component> {
        match s {
            "three_term" => Some(Component::ThreeTerm),
            "G" => Some(Component::G),
            "H" => Some(Component::H),
            _ => None,
        }
    }
}

/// A variance matrix with its estimator tag.
#[derive(Debug, Clone)]
pub struct CrveMatrix {
    pub matrix: SymMatrix,
    pub family: Family,
    pub arity: Arity,
    /// False when some diagonal entry is not positive.
    pub defined: bool,
}

impl CrveMatrix {
    pub fn new(matrix: SymMatrix, family: Family, arity: Arity) -> Self {
        let defined = matrix.diag().iter().all(|&v| v > 0.0 && v.is_finite());
        Self {
            matrix,
            family,
            arity,
            defined,
        }
    }

    pub fn variance(&self, coef: usize) -> f64 {
        self.matrix.get(coef, coef)
    }

    /// Standard error of one coefficient, `None` when its variance is not
    /// positive.
    pub fn se(&self, coef: usize) -> Option<f64> {
        let v = self.variance(coef);
        (v > 0.0 && v.is_finite()).then(|| v.sqrt())
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }
}

fn check_clusters(dim: Dimension, count: usize) -> Result<(), EstimationError> {
    if count < 2 {
        return Err(EstimationError::TooFewClusters { dim, count });
    }
    Ok(())
}

/// `J(N-1)/((J-1)(N-k)) A (sum_j s_j s_j') A` with `A = (X'X)^{-1}`.
pub fn cv1_component(fit: &OlsFit<'_>, scores: &ClusterScores) -> Result<CrveMatrix, EstimationError> {
    let j = scores.scores.len();
    check_clusters(scores.dim, j)?;
    let (n, k) = (fit.n_obs() as f64, fit.n_cols() as f64);
    let jf = j as f64;
    let factor = jf * (n - 1.0) / ((jf - 1.0) * (n - k));
    let a = fit.gram_inverse();
    let mut v = SymMatrix::zeros(fit.n_cols());
    for s in &scores.scores {
        let as_ = a.mul_vec(s);
        v.add_outer(&as_, 1.0);
    }
    let arity = match scores.dim {
        Dimension::G => Arity::OneWayG,
        Dimension::H => Arity::OneWayH,
        Dimension::I => Arity::OneWayI,
    };
    Ok(CrveMatrix::new(v.scaled(factor), Family::Cv1, arity))
}

/// `N/(N-k) A (sum_i u_i^2 x_i x_i') A`.
pub fn hc1(fit: &OlsFit<'_>) -> CrveMatrix {
    let u = fit.residuals();
    let meat = weighted_row_gram(fit, |i| u[i] * u[i]);
    let (n, k) = (fit.n_obs() as f64, fit.n_cols() as f64);
    let v = sandwich(fit.gram_inverse(), &meat).scaled(n / (n - k));
    CrveMatrix::new(v, Family::Cv1, Arity::Hc)
}

/// Delete-one-observation jackknife, `((N-1)/N) A (sum_i x_i x_i' u_i^2/(1-h_i)^2) A`.
///
/// Observations with leverage one only move their own dummy coefficient
/// when deleted and contribute nothing.
pub fn hc3(fit: &OlsFit<'_>) -> CrveMatrix {
    let u = fit.residuals();
    let h = sparse_hat_values(fit);
    let meat = weighted_row_gram(fit, |i| {
        let m = 1.0 - h[i];
        if m <= HAT_ONE_TOL {
            0.0
        } else {
            (u[i] / m).powi(2)
        }
    });
    let n = fit.n_obs() as f64;
    let v = sandwich(fit.gram_inverse(), &meat).scaled((n - 1.0) / n);
    CrveMatrix::new(v, Family::Cv3, Arity::Hc)
}

fn sandwich(a: &SymMatrix, meat: &SymMatrix) -> SymMatrix {
    meat.congruence(&a.to_matrix())
}

fn weighted_row_gram(fit: &OlsFit<'_>, w: impl Fn(usize) -> f64) -> SymMatrix {
    let x = fit.dataset().x();
    let mut out = SymMatrix::zeros(x.cols());
    let mut idx = Vec::with_capacity(x.cols());
    let mut vals = Vec::with_capacity(x.cols());
    for i in 0..x.rows() {
        let wi = w(i);
        if wi == 0.0 {
            continue;
        }
        nonzeros(x.row(i), &mut idx, &mut vals);
        out.add_sparse_outer_upper(&idx, &vals, wi);
    }
    out.mirror_upper();
    out
}

fn nonzeros(row: &[f64], idx: &mut Vec<usize>, vals: &mut Vec<f64>) {
    idx.clear();
    vals.clear();
    for (c, &v) in row.iter().enumerate() {
        if v != 0.0 {
            idx.push(c);
            vals.push(v);
        }
    }
}

pub(crate) fn sparse_hat_values(fit: &OlsFit<'_>) -> Vec<f64> {
    let x = fit.dataset().x();
    let a = fit.gram_inverse();
    let mut idx = Vec::with_capacity(x.cols());
    let mut vals = Vec::with_capacity(x.cols());
    (0..x.rows())
        .map(|i| {
            nonzeros(x.row(i), &mut idx, &mut vals);
            let mut h = 0.0;
            for (p, &r) in idx.iter().enumerate() {
                let ar = a.row(r);
                let mut s = 0.0;
                for (q, &c) in idx.iter().enumerate() {
                    s += ar[c] * vals[q];
                }
                h += vals[p] * s;
            }
            h
        })
        .collect()
}

/// Delete-one-cluster coefficient vectors.
#[derive(Debug, Clone)]
pub struct JackknifeBetas {
    pub dim: Dimension,
    pub betas: Vec<Vec<f64>>,
    /// True when at least one reduced Gram needed the generalized inverse.
    pub generalized: bool,
}

/// `beta^(j) = (X'X - X_j'X_j)^{-1} (X'y - X_j'y_j)` for each cluster.
///
/// With `generalized` set, columns that become linearly dependent once
/// cluster `j` is removed (for instance its own dummy) get coefficient zero
/// and the rest are solved exactly. Otherwise a singular reduced Gram is an
/// error.
pub fn delete_one_betas(
    grams: &ClusterGrams,
    full_gram: &SymMatrix,
    full_xty: &[f64],
    generalized: bool,
) -> Result<JackknifeBetas, EstimationError> {
    check_clusters(grams.dim, grams.n_clusters())?;
    let k = full_gram.dim();
    let solved: Vec<Result<(Vec<f64>, bool), EstimationError>> = grams
        .grams
        .par_iter()
        .zip(grams.xty.par_iter())
        .enumerate()
        .map(|(j, (gj, xj))| {
            let reduced = full_gram.sub(gj);
            let rhs: Vec<f64> = full_xty.iter().zip(xj).map(|(a, b)| a - b).collect();
            if !generalized {
                let ch = Cholesky::factor(&reduced).map_err(|_| EstimationError::SingularReducedGram(j))?;
                return Ok((ch.solve_vec(&rhs), false));
            }
            let (ch, kept) = Cholesky::factor_dropping(&reduced, JACKKNIFE_DROP_TOL);
            let sub_rhs: Vec<f64> = kept.iter().map(|&c| rhs[c]).collect();
            let sol = ch.solve_vec(&sub_rhs);
            let mut beta = vec![0.0; k];
            for (&c, v) in kept.iter().zip(sol) {
                beta[c] = v;
            }
            Ok((beta, kept.len() < k))
        })
        .collect();
    let mut betas = Vec::with_capacity(solved.len());
    let mut any = false;
    for r in solved {
        let (b, g) = r?;
        any |= g;
        betas.push(b);
    }
    Ok(JackknifeBetas {
        dim: grams.dim,
        betas,
        generalized: any,
    })
}

/// `((J-1)/J) sum_j (beta^(j) - beta)(beta^(j) - beta)'` on the leading
/// `block` coefficients.
pub fn cv3_component(betas: &JackknifeBetas, beta_hat: &[f64], block: usize) -> CrveMatrix {
    let j = betas.betas.len() as f64;
    let mut v = SymMatrix::zeros(block);
    let mut d = vec![0.0; block];
    for b in &betas.betas {
        for c in 0..block {
            d[c] = b[c] - beta_hat[c];
        }
        v.add_outer(&d, 1.0);
    }
    let arity = match betas.dim {
        Dimension::G => Arity::OneWayG,
        Dimension::H => Arity::OneWayH,
        Dimension::I => Arity::OneWayI,
    };
    CrveMatrix::new(v.scaled((j - 1.0) / j), Family::Cv3, arity)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombineMode {
    TwoTerm,
    ThreeTerm,
}

/// `V_G + V_H`, or `V_G + V_H - V_I` computed as the two-term sum minus
/// `V_I`.
pub fn combine(vg: &CrveMatrix, vh: &CrveMatrix, vi: &CrveMatrix, mode: CombineMode) -> CrveMatrix {
    let two = vg.matrix.add(&vh.matrix);
    match mode {
        CombineMode::TwoTerm => CrveMatrix::new(two, vg.family, Arity::TwoTerm),
        CombineMode::ThreeTerm => CrveMatrix::new(two.sub(&vi.matrix), vg.family, Arity::ThreeTerm),
    }
}

/// Replaces eigenvalues below `eta` by `eta`; returns the input unchanged
/// when it is already bounded below by `eta`.
pub fn eigenfix(v3: &CrveMatrix, eta: f64) -> Result<CrveMatrix, EstimationError> {
    let eig = sym_eigen(&v3.matrix)?;
    let matrix = if eig.min_value() >= eta {
        v3.matrix.clone()
    } else {
        let floored: Vec<f64> = eig.values.iter().map(|&l| l.max(eta)).collect();
        eig.reconstruct_with(&floored)
    };
    Ok(CrveMatrix::new(matrix, v3.family, Arity::ThreePlus))
}

/// One family's worth of variance matrices.
#[derive(Debug, Clone)]
pub struct FamilySet {
    pub family: Family,
    pub hc: CrveMatrix,
    pub g: CrveMatrix,
    pub h: CrveMatrix,
    pub i: CrveMatrix,
    pub two: CrveMatrix,
    pub three: CrveMatrix,
    pub three_plus: CrveMatrix,
}

impl FamilySet {
    fn build(family: Family, hc: CrveMatrix, g: CrveMatrix, h: CrveMatrix, i: CrveMatrix) -> Result<Self, EstimationError> {
        let two = combine(&g, &h, &i, CombineMode::TwoTerm);
        let three = combine(&g, &h, &i, CombineMode::ThreeTerm);
        let three_plus = eigenfix(&three, ETA)?;
        Ok(Self {
            family,
            hc,
            g,
            h,
            i,
            two,
            three,
            three_plus,
        })
    }

    pub fn matrix(&self, arity: Arity) -> Option<&CrveMatrix> {
        match arity {
            Arity::Hc => Some(&self.hc),
            Arity::OneWayI => Some(&self.i),
            Arity::OneWayG => Some(&self.g),
            Arity::OneWayH => Some(&self.h),
            Arity::TwoTerm => Some(&self.two),
            Arity::ThreeTerm => Some(&self.three),
            Arity::ThreePlus => Some(&self.three_plus),
            Arity::Max => None,
        }
    }

    /// Largest of the three-term SE (when defined) and the two one-way SEs.
    pub fn max_se(&self, coef: usize) -> (Option<f64>, Option<Component>) {
        max_se_rule(self.three.se(coef), self.g.se(coef), self.h.se(coef))
    }
}

/// `max{SE_3, SE_G, SE_H}` over the defined candidates, with the winner.
pub fn max_se_rule(
    se3: Option<f64>,
    se_g: Option<f64>,
    se_h: Option<f64>,
) -> (Option<f64>, Option<Component>) {
    let mut best: Option<(f64, Component)> = None;
    for (se, c) in [(se3, Component::ThreeTerm), (se_g, Component::G), (se_h, Component::H)] {
        if let Some(s) = se {
            if best.is_none_or(|(b, _)| s > b) {
                best = Some((s, c));
            }
        }
    }
    (best.map(|b| b.0), best.map(|b| b.1))
}

/// Every estimator for one fit, computed once.
#[derive(Debug, Clone)]
pub struct Estimates {
    pub beta: Vec<f64>,
    pub n_obs: usize,
    pub n_cols: usize,
    pub n_g: usize,
    pub n_h: usize,
    pub n_i: usize,
    pub cv1: FamilySet,
    pub cv3: FamilySet,
    /// Delete-one-cluster coefficients for G, H and I.
    pub jackknife: [JackknifeBetas; 3],
}

impl Estimates {
    /// Runs the full pipeline on an OLS fit.
    pub fn compute(fit: &OlsFit<'_>) -> Result<Self, EstimationError> {
        let ds = fit.dataset();
        let [gi, hi, ii] = ds.cluster_indices();
        Self::compute_with(fit, &gi, &hi, &ii)
    }

    pub fn compute_with(
        fit: &OlsFit<'_>,
        gi: &ClusterIndex,
        hi: &ClusterIndex,
        ii: &ClusterIndex,
    ) -> Result<Self, EstimationError> {
        let ds = fit.dataset();
        check_clusters(Dimension::G, gi.n_clusters())?;
        check_clusters(Dimension::H, hi.n_clusters())?;
        check_clusters(Dimension::I, ii.n_clusters())?;

        let s_i = cluster_scores(fit, ii);
        let s_g = s_i.aggregate(ii, Dimension::G, gi.n_clusters());
        let s_h = s_i.aggregate(ii, Dimension::H, hi.n_clusters());
        let cv1 = FamilySet::build(
            Family::Cv1,
            hc1(fit),
            cv1_component(fit, &s_g)?,
            cv1_component(fit, &s_h)?,
            cv1_component(fit, &s_i)?,
        )?;

        let grams_i = cluster_grams(ds, ii);
        let grams_g = grams_i.aggregate(ii, Dimension::G, gi.n_clusters());
        let grams_h = grams_i.aggregate(ii, Dimension::H, hi.n_clusters());
        let generalized = ds.has_fixed_effects();
        let block = ds.n_cols();
        let jk = |g: &ClusterGrams| delete_one_betas(g, fit.gram(), fit.xty(), generalized);
        let jack = [jk(&grams_g)?, jk(&grams_h)?, jk(&grams_i)?];
        let beta = fit.beta();
        let cv3 = FamilySet::build(
            Family::Cv3,
            hc3(fit),
            cv3_component(&jack[0], beta, block),
            cv3_component(&jack[1], beta, block),
            cv3_component(&jack[2], beta, block),
        )?;
        Ok(Self {
            beta: beta.to_vec(),
            n_obs: fit.n_obs(),
            n_cols: fit.n_cols(),
            n_g: gi.n_clusters(),
            n_h: hi.n_clusters(),
            n_i: ii.n_clusters(),
            cv1,
            cv3,
            jackknife: jack,
        })
    }

    pub fn family(&self, family: Family) -> &FamilySet {
        match family {
            Family::Cv1 => &self.cv1,
            Family::Cv3 => &self.cv3,
        }
    }

    /// The 16-row SE menu for one coefficient.
    pub fn menu(&self, coef: usize) -> Vec<SeEntry> {
        let mut out = Vec::with_capacity(16);
        for family in [Family::Cv1, Family::Cv3] {
            let set = self.family(family);
            for arity in Arity::ALL {
                let entry = match set.matrix(arity) {
                    Some(m) => SeEntry {
                        family,
                        arity,
                        variance: m.variance(coef),
                        se: m.se(coef),
                        selected: None,
                    },
                    None => {
                        let (se, selected) = set.max_se(coef);
                        SeEntry {
                            family,
                            arity,
                            variance: se.map_or(f64::NAN, |s| s * s),
                            se,
                            selected,
                        }
                    }
                };
                out.push(entry);
            }
        }
        out
    }
}

/// One row of the SE menu.
#[derive(Debug, Clone, PartialEq)]
pub struct SeEntry {
    pub family: Family,
    pub arity: Arity,
    pub variance: f64,
    /// `None` when the variance is not positive.
    pub se: Option<f64>,
    /// Set for the max rows.
    pub selected: Option<Component>,
}

/// Fits `ds` and returns the SE menu for its coefficient of interest.
pub fn variance_menu(ds: &Dataset) -> Result<Vec<SeEntry>, EstimationError> {
    let fit = fit_ols(ds)?;
    let est = Estimates::compute(&fit)?;
    Ok(est.menu(ds.coef_id()))
}

/// `a' x_i` for every row, with `a = A e_coef`.
pub(crate) fn selector_projection(fit: &OlsFit<'_>, coef: usize) -> Vec<f64> {
    let a = fit.gram_inverse().row(coef).to_vec();
    let x = fit.dataset().x();
    (0..x.rows()).map(|i| dot(&a, x.row(i))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Categorical, FeSpec};
    use crate::numkernel::Matrix;
    use crate::ols::modified_scores;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_ds(n: usize, k: usize, g: usize, h: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..k).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let y = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let gl: Vec<usize> = (0..n).map(|_| rng.random_range(0..g)).collect();
        let hl: Vec<usize> = (0..n).map(|_| rng.random_range(0..h)).collect();
        Dataset::new(
            y,
            Matrix::from_rows(&rows).unwrap(),
            (0..k).map(|c| format!("x{c}")).collect(),
            Categorical::from_labels(&gl),
            Categorical::from_labels(&hl),
            0,
        )
        .unwrap()
    }

    fn max_rel_diff(a: &SymMatrix, b: &SymMatrix) -> f64 {
        a.sub(b).max_abs() / b.max_abs().max(1e-300)
    }

    #[test]
    fn too_few_clusters() {
        let ds = random_ds(10, 2, 3, 3, 1);
        let fit = fit_ols(&ds).unwrap();
        let one = ClusterIndex::from_labels(Dimension::G, &[0; 10]);
        let sc = cluster_scores(&fit, &one);
        assert!(matches!(
            cv1_component(&fit, &sc),
            Err(EstimationError::TooFewClusters { count: 1, .. })
        ));
    }

    #[test]
    fn cv1_matches_hand_rolled_sandwich() {
        let ds = random_ds(40, 2, 4, 3, 2);
        let fit = fit_ols(&ds).unwrap();
        let gi = ds.cluster_index(Dimension::G);
        let v = cv1_component(&fit, &cluster_scores(&fit, &gi)).unwrap();

        // Direct: A * (sum_g X_g' u_g u_g' X_g) * A with explicit loops.
        let x = ds.x();
        let u = fit.residuals();
        let a = fit.gram_inverse().to_matrix();
        let mut meat = Matrix::zeros(2, 2);
        for rows in gi.all_members() {
            let mut s = [0.0; 2];
            for &i in rows {
                s[0] += x.get(i, 0) * u[i];
                s[1] += x.get(i, 1) * u[i];
            }
            for p in 0..2 {
                for q in 0..2 {
                    meat.set(p, q, meat.get(p, q) + s[p] * s[q]);
                }
            }
        }
        let sand = a.matmul(&meat).unwrap().matmul(&a).unwrap();
        let (n, k, g) = (40.0, 2.0, gi.n_clusters() as f64);
        let f = g * (n - 1.0) / ((g - 1.0) * (n - k));
        for p in 0..2 {
            for q in 0..2 {
                let want = f * sand.get(p, q);
                assert!((v.matrix.get(p, q) - want).abs() <= 1e-10 * want.abs().max(1e-12));
            }
        }
    }

    #[test]
    fn identical_clusterings_give_identical_components() {
        let mut ds = random_ds(30, 2, 5, 5, 3);
        let g = ds.g_labels().clone();
        ds = Dataset::new(ds.y().to_vec(), ds.x().clone(), ds.names().to_vec(), g.clone(), g, 0).unwrap();
        let fit = fit_ols(&ds).unwrap();
        let est = Estimates::compute(&fit).unwrap();
        assert_eq!(est.cv1.g.matrix, est.cv1.h.matrix);
        assert_eq!(est.cv1.i.matrix, est.cv1.g.matrix);
        // Three-term collapses to V_G, two-term doubles it.
        assert!(max_rel_diff(&est.cv1.three.matrix, &est.cv1.g.matrix) <= 1e-12);
        assert!(max_rel_diff(&est.cv1.two.matrix, &est.cv1.g.matrix.scaled(2.0)) <= 1e-15);
        assert!(max_rel_diff(&est.cv3.three.matrix, &est.cv3.g.matrix) <= 1e-12);
    }

    fn refit_without(ds: &Dataset, idx: &ClusterIndex, j: usize) -> Vec<f64> {
        let keep: Vec<usize> = (0..ds.n_obs()).filter(|&i| idx.cluster_of(i) != j).collect();
        let x = ds.x().select_rows(&keep);
        let y: Vec<f64> = keep.iter().map(|&i| ds.y()[i]).collect();
        let gram = crate::dataset::gram_of(&x);
        let xty: Vec<f64> = (0..x.cols())
            .map(|c| keep.iter().enumerate().map(|(r, _)| x.get(r, c) * y[r]).sum())
            .collect();
        Cholesky::factor(&gram).unwrap().solve_vec(&xty)
    }

    #[test]
    fn delete_one_betas_match_refits() {
        let ds = random_ds(50, 3, 5, 4, 4);
        let fit = fit_ols(&ds).unwrap();
        let gi = ds.cluster_index(Dimension::G);
        let jb = delete_one_betas(&cluster_grams(&ds, &gi), fit.gram(), fit.xty(), false).unwrap();
        assert!(!jb.generalized);
        for (j, b) in jb.betas.iter().enumerate() {
            let want = refit_without(&ds, &gi, j);
            for (p, q) in b.iter().zip(&want) {
                assert!((p - q).abs() <= 1e-8 * q.abs().max(1.0));
            }
        }
    }

    #[test]
    fn mirror_clusters_give_the_other_half() {
        let x = vec![1.0, 2.0, 3.0, 1.0, 2.0, 3.0];
        let y = vec![1.5, 1.0, 4.0, 0.5, 3.0, 2.0];
        let g = Categorical::from_labels(&[0, 0, 0, 1, 1, 1]);
        let ds = Dataset::new(y.clone(), Matrix::column(&x), vec!["x".into()], g.clone(), g, 0).unwrap();
        let fit = fit_ols(&ds).unwrap();
        let gi = ds.cluster_index(Dimension::G);
        let jb = delete_one_betas(&cluster_grams(&ds, &gi), fit.gram(), fit.xty(), false).unwrap();
        let ols_on = |rows: std::ops::Range<usize>| {
            let sxy: f64 = rows.clone().map(|i| x[i] * y[i]).sum();
            let sxx: f64 = rows.map(|i| x[i] * x[i]).sum();
            sxy / sxx
        };
        assert!((jb.betas[0][0] - ols_on(3..6)).abs() < 1e-14);
        assert!((jb.betas[1][0] - ols_on(0..3)).abs() < 1e-14);
    }

    #[test]
    fn zero_residuals_leave_betas_unchanged() {
        let mut ds = random_ds(24, 2, 4, 3, 5);
        let y: Vec<f64> = (0..24).map(|i| 2.0 * ds.x().get(i, 0) - ds.x().get(i, 1)).collect();
        ds = ds.with_y(y).unwrap();
        let fit = fit_ols(&ds).unwrap();
        let est = Estimates::compute(&fit).unwrap();
        for jb in &est.jackknife {
            for b in &jb.betas {
                assert!((b[0] - 2.0).abs() < 1e-12 && (b[1] + 1.0).abs() < 1e-12);
            }
        }
        assert!(est.cv3.g.matrix.max_abs() < 1e-20);
    }

    #[test]
    fn cv3_closed_forms() {
        let jb = JackknifeBetas {
            dim: Dimension::G,
            betas: vec![vec![1.0, 2.0], vec![1.0, 2.0]],
            generalized: false,
        };
        let v = cv3_component(&jb, &[1.0, 2.0], 2);
        assert_eq!(v.matrix, SymMatrix::zeros(2));
        assert!(!v.defined);

        let d = [0.3, -0.7];
        let jb = JackknifeBetas {
            dim: Dimension::G,
            betas: vec![vec![1.0 + d[0], 2.0 + d[1]], vec![1.0 - d[0], 2.0 - d[1]]],
            generalized: false,
        };
        let v = cv3_component(&jb, &[1.0, 2.0], 2);
        for p in 0..2 {
            for q in 0..2 {
                assert!((v.matrix.get(p, q) - d[p] * d[q]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn jackknife_equals_score_form() {
        let ds = random_ds(30, 3, 5, 4, 6);
        let fit = fit_ols(&ds).unwrap();
        for idx in ds.cluster_indices() {
            let jb = delete_one_betas(&cluster_grams(&ds, &idx), fit.gram(), fit.xty(), false).unwrap();
            let via_betas = cv3_component(&jb, fit.beta(), 3);
            let ms = modified_scores(&fit, &idx).unwrap();
            let a = fit.gram_inverse();
            let mut v = SymMatrix::zeros(3);
            for s in &ms.scores {
                v.add_outer(&a.mul_vec(s), 1.0);
            }
            let j = idx.n_clusters() as f64;
            let via_scores = v.scaled((j - 1.0) / j);
            assert!(max_rel_diff(&via_betas.matrix, &via_scores) <= 1e-8);
        }
    }

    #[test]
    fn singleton_jackknife_is_hc3() {
        let ds = random_ds(25, 3, 25, 1, 7);
        let fit = fit_ols(&ds).unwrap();
        let gi = ClusterIndex::from_labels(Dimension::G, &(0..25).collect::<Vec<_>>());
        let jb = delete_one_betas(&cluster_grams(&ds, &gi), fit.gram(), fit.xty(), false).unwrap();
        let v = cv3_component(&jb, fit.beta(), 3);
        assert!(max_rel_diff(&v.matrix, &hc3(&fit).matrix) <= 1e-9);
    }

    #[test]
    fn singleton_cv1_is_hc1() {
        let ds = random_ds(25, 3, 25, 1, 8);
        let fit = fit_ols(&ds).unwrap();
        let singletons = ClusterIndex::from_labels(Dimension::G, &(0..25).collect::<Vec<_>>());
        let sc = cluster_scores(&fit, &singletons);
        let v = cv1_component(&fit, &sc).unwrap();
        assert!(max_rel_diff(&v.matrix, &hc1(&fit).matrix) <= 1e-12);
    }

    #[test]
    fn combine_logic() {
        let vg = CrveMatrix::new(SymMatrix::from_diag(&[1.0, 2.0]), Family::Cv1, Arity::OneWayG);
        let vh = CrveMatrix::new(SymMatrix::from_diag(&[1.0, 1.0]), Family::Cv1, Arity::OneWayH);
        let zero = CrveMatrix::new(SymMatrix::zeros(2), Family::Cv1, Arity::OneWayI);
        let two = combine(&vg, &vh, &zero, CombineMode::TwoTerm);
        let three = combine(&vg, &vh, &zero, CombineMode::ThreeTerm);
        assert_eq!(two.matrix, three.matrix);

        let vi = CrveMatrix::new(SymMatrix::from_diag(&[2.5, 0.5]), Family::Cv1, Arity::OneWayI);
        let three = combine(&vg, &vh, &vi, CombineMode::ThreeTerm);
        assert!(!three.defined);
        assert_eq!(three.se(0), None);
        assert_eq!(three.se(1), Some(2.5f64.sqrt()));
    }

    #[test]
    fn eigenfix_cases() {
        let pd = CrveMatrix::new(SymMatrix::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap(), Family::Cv1, Arity::ThreeTerm);
        assert_eq!(eigenfix(&pd, ETA).unwrap().matrix, pd.matrix);

        let indef = CrveMatrix::new(SymMatrix::from_diag(&[1.0, -1.0]), Family::Cv1, Arity::ThreeTerm);
        let fixed = eigenfix(&indef, ETA).unwrap();
        assert_eq!(fixed.matrix, SymMatrix::from_diag(&[1.0, ETA]));
        assert!(fixed.defined);
    }

    #[test]
    fn max_se_selection() {
        assert_eq!(max_se_rule(Some(3.0), Some(2.0), Some(1.0)), (Some(3.0), Some(Component::ThreeTerm)));
        assert_eq!(max_se_rule(Some(1.0), Some(2.0), Some(1.5)), (Some(2.0), Some(Component::G)));
        assert_eq!(max_se_rule(None, Some(2.0), Some(2.5)), (Some(2.5), Some(Component::H)));
        assert_eq!(max_se_rule(None, None, None), (None, None));
    }

    #[test]
    fn twfe_generalized_inverse_matches_refit_without_dummy() {
        let base = random_ds(60, 2, 4, 3, 9);
        let fe = FeSpec::standard(vec![
            ("g".into(), base.g_labels().clone()),
            ("h".into(), base.h_labels().clone()),
        ]);
        let ds = base.expand_fixed_effects(&fe).unwrap();
        let fit = fit_ols(&ds).unwrap();
        let gi = ds.cluster_index(Dimension::G);
        let jb = delete_one_betas(&cluster_grams(&ds, &gi), fit.gram(), fit.xty(), true).unwrap();
        assert!(jb.generalized);
        for (j, b) in jb.betas.iter().enumerate() {
            // The g-th dummy is column 2 + (level of cluster j in the g block).
            let level = ds.g_labels().codes()[gi.members(j)[0]];
            let dead = 2 + level;
            assert_eq!(b[dead], 0.0);
            let keep_rows: Vec<usize> = (0..ds.n_obs()).filter(|&i| gi.cluster_of(i) != j).collect();
            let keep_cols: Vec<usize> = (0..ds.n_cols()).filter(|&c| c != dead).collect();
            let x = ds.x().select_rows(&keep_rows).select_cols(&keep_cols);
            let y: Vec<f64> = keep_rows.iter().map(|&i| ds.y()[i]).collect();
            let gram = crate::dataset::gram_of(&x);
            let xty: Vec<f64> = (0..x.cols()).map(|c| (0..x.rows()).map(|r| x.get(r, c) * y[r]).sum()).collect();
            let refit = Cholesky::factor(&gram).unwrap().solve_vec(&xty);
            for (r, &c) in keep_cols.iter().enumerate() {
                assert!((b[c] - refit[r]).abs() <= 1e-8 * refit[r].abs().max(1.0));
            }
        }
        let est = Estimates::compute(&fit).unwrap();
        assert_eq!(est.cv3.g.dim(), ds.n_cols());
        assert_eq!(est.cv1.g.dim(), ds.n_cols());
    }

    #[test]
    fn menu_has_sixteen_rows_in_fixed_order() {
        let ds = random_ds(80, 2, 5, 4, 10);
        let menu = variance_menu(&ds).unwrap();
        assert_eq!(menu.len(), 16);
        for (r, e) in menu.iter().enumerate() {
            assert_eq!(e.family, if r < 8 { Family::Cv1 } else { Family::Cv3 });
            assert_eq!(e.arity, Arity::ALL[r % 8]);
        }
        for fam in [&menu[..8], &menu[8..]] {
            let max = fam[7].se.unwrap();
            assert!(max >= fam[2].se.unwrap() && max >= fam[3].se.unwrap());
            assert!(fam[4].variance >= fam[5].variance);
        }
    }
}
