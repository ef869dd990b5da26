use super::matrix::{Matrix, SymMatrix};
use super::NumError;

/// Relative pivot threshold below which a column is treated as linearly
/// dependent on the preceding ones.
pub const DEFAULT_PIVOT_TOL: f64 = 1e-12;

/// Relative eigenvalue cutoff for the pseudo-inverse.
pub const DEFAULT_PINV_TOL: f64 = 1e-10;

/// Lower-triangular Cholesky factor `A = L L'`.
#[derive(Clone, Debug)]
pub struct Cholesky {
    dim: usize,
    lower: Vec<f64>,
}

impl Cholesky {
    /// Factors `a`, failing when a pivot is not positive.
    ///
    /// A pivot counts as non-positive when it falls below
    /// `DEFAULT_PIVOT_TOL` times the corresponding original diagonal entry,
    /// i.e. when the column is numerically in the span of earlier columns.
    pub fn factor(a: &SymMatrix) -> Result<Self, NumError> {
        Self::factor_with_tol(a, DEFAULT_PIVOT_TOL)
    }

    pub fn factor_with_tol(a: &SymMatrix, rel_tol: f64) -> Result<Self, NumError> {
        let n = a.dim();
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let ajj = a.get(j, j);
            let mut d = ajj;
            let lj = j * n;
            for k in 0..j {
                d -= l[lj + k] * l[lj + k];
            }
            if d.is_nan() || d <= rel_tol * ajj.abs() || d <= 0.0 {
                return Err(NumError::NotPositiveDefinite { pivot: j });
            }
            let djj = d.sqrt();
            l[lj + j] = djj;
            for i in (j + 1)..n {
                let li = i * n;
                let mut s = a.get(i, j);
                for k in 0..j {
                    s -= l[li + k] * l[lj + k];
                }
                l[li + j] = s / djj;
            }
        }
        Ok(Self { dim: n, lower: l })
    }

    /// Greedy factorization that skips columns whose pivot falls below
    /// `rel_tol` times their diagonal entry. Returns the factor of the
    /// submatrix on the kept columns together with their indices.
    ///
    /// Solving with the result and setting the skipped coordinates to zero
    /// applies a generalized inverse of `a`.
    pub fn factor_dropping(a: &SymMatrix, rel_tol: f64) -> (Self, Vec<usize>) {
        let n = a.dim();
        let mut kept: Vec<usize> = Vec::with_capacity(n);
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
        for j in 0..n {
            let ajj = a.get(j, j);
            let mut lj = Vec::with_capacity(kept.len() + 1);
            for (m, &c) in kept.iter().enumerate() {
                let lm = &rows[m];
                let mut s = a.get(j, c);
                for t in 0..m {
                    s -= lj[t] * lm[t];
                }
                lj.push(s / lm[m]);
            }
            let d = ajj - lj.iter().map(|v| v * v).sum::<f64>();
            if d > rel_tol * ajj.abs() && d > 0.0 {
                lj.push(d.sqrt());
                kept.push(j);
                rows.push(lj);
            }
        }
        let m = kept.len();
        let mut lower = vec![0.0; m * m];
        for (i, r) in rows.iter().enumerate() {
            lower[i * m..i * m + r.len()].copy_from_slice(r);
        }
        (Self { dim: m, lower }, kept)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.dim;
        assert_eq!(b.len(), n, "dimension mismatch in Cholesky solve");
        let l = &self.lower;
        for i in 0..n {
            let li = i * n;
            let mut s = b[i];
            for k in 0..i {
                s -= l[li + k] * b[k];
            }
            b[i] = s / l[li + i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..n {
                s -= l[k * n + i] * b[k];
            }
            b[i] = s / l[i * n + i];
        }
    }

    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_mat(&self, b: &Matrix) -> Result<Matrix, NumError> {
        if b.rows() != self.dim {
            return Err(NumError::DimensionMismatch {
                expected: self.dim,
                found: b.rows(),
            });
        }
        let mut out = Matrix::zeros(b.rows(), b.cols());
        for j in 0..b.cols() {
            let x = self.solve_vec(&b.col_to_vec(j));
            for (i, v) in x.into_iter().enumerate() {
                out.set(i, j, v);
            }
        }
        Ok(out)
    }

    pub fn inverse(&self) -> SymMatrix {
        let n = self.dim;
        let mut inv = SymMatrix::zeros(n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            self.solve_in_place(&mut e);
            for (i, &v) in e.iter().enumerate().skip(j) {
                inv.set(i, j, v);
            }
        }
        inv
    }
}

/// Solves `A X = B` for symmetric positive definite `A`.
pub fn chol_solve(a: &SymMatrix, b: &Matrix) -> Result<Matrix, NumError> {
    Cholesky::factor(a)?.solve_mat(b)
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct EigenDecomp {
    pub values: Vec<f64>,
    /// Column `j` is the eigenvector for `values[j]`.
    pub vectors: Matrix,
}

impl EigenDecomp {
    /// `U diag(values) U'`.
    pub fn reconstruct_with(&self, values: &[f64]) -> SymMatrix {
        let n = self.values.len();
        let u = &self.vectors;
        SymMatrix::from_fn(n, |i, j| (0..n).map(|k| u.get(i, k) * values[k] * u.get(j, k)).sum())
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.reconstruct_with(&self.values)
    }

    pub fn min_value(&self) -> f64 {
        self.values.first().copied().unwrap_or(f64::NAN)
    }
}

/// Cyclic Jacobi eigen-decomposition.
pub fn sym_eigen(a: &SymMatrix) -> Result<EigenDecomp, NumError> {
    if !a.is_finite() {
        return Err(NumError::NonFinite);
    }
    let n = a.dim();
    let mut m = a.as_slice().to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let mut d: Vec<f64> = (0..n).map(|i| m[i * n + i]).collect();
    let mut b = d.clone();
    let mut z = vec![0.0; n];
    let cap = 30 * n.max(1);

    let mut converged = n <= 1;
    for sweep in 0..cap {
        if converged {
            break;
        }
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[p * n + q].abs();
            }
        }
        if off == 0.0 {
            converged = true;
            break;
        }
        let thresh = if sweep < 3 {
            0.2 * off / (n * n) as f64
        } else {
            0.0
        };
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                let g = 100.0 * apq.abs();
                if sweep > 3 && d[p].abs() + g == d[p].abs() && d[q].abs() + g == d[q].abs() {
                    m[p * n + q] = 0.0;
                    m[q * n + p] = 0.0;
                } else if apq.abs() > thresh {
                    let h = d[q] - d[p];
                    let t = if h.abs() + g == h.abs() {
                        apq / h
                    } else {
                        let theta = 0.5 * h / apq;
                        let t = 1.0 / (theta.abs() + (1.0 + theta * theta).sqrt());
                        if theta < 0.0 {
                            -t
                        } else {
                            t
                        }
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    let tau = s / (1.0 + c);
                    let hh = t * apq;
                    z[p] -= hh;
                    z[q] += hh;
                    d[p] -= hh;
                    d[q] += hh;
                    m[p * n + q] = 0.0;
                    m[q * n + p] = 0.0;
                    // Rotate the remaining upper-triangle entries.
                    for j in 0..n {
                        if j == p || j == q {
                            continue;
                        }
                        let (jp, jq) = (idx(n, j, p), idx(n, j, q));
                        let g2 = m[jp];
                        let h2 = m[jq];
                        let new_p = g2 - s * (h2 + g2 * tau);
                        let new_q = h2 + s * (g2 - h2 * tau);
                        m[jp] = new_p;
                        m[jq] = new_q;
                        let (pj, qj) = (idx(n, p, j), idx(n, q, j));
                        m[pj] = new_p;
                        m[qj] = new_q;
                    }
                    for j in 0..n {
                        let g2 = v[j * n + p];
                        let h2 = v[j * n + q];
                        v[j * n + p] = g2 - s * (h2 + g2 * tau);
                        v[j * n + q] = h2 + s * (g2 - h2 * tau);
                    }
                }
            }
        }
        for p in 0..n {
            b[p] += z[p];
            d[p] = b[p];
            z[p] = 0.0;
        }
    }
    if !converged {
        // One last check: the final sweep may have finished the job.
        let off: f64 = (0..n)
            .flat_map(|p| ((p + 1)..n).map(move |q| (p, q)))
            .map(|(p, q)| m[p * n + q].abs())
            .sum();
        if off != 0.0 {
            return Err(NumError::NoConvergence { sweeps: cap });
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
    let values = order.iter().map(|&i| d[i]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (new_col, &old_col) in order.iter().enumerate() {
        for r in 0..n {
            vectors.set(r, new_col, v[r * n + old_col]);
        }
    }
    Ok(EigenDecomp { values, vectors })
}

#[inline]
fn idx(n: usize, i: usize, j: usize) -> usize {
    i * n + j
}

/// Moore-Penrose pseudo-inverse of a symmetric matrix. Eigenvalues with
/// `|lambda| <= tol * max|lambda|` are treated as zero.
pub fn pinv_sym(a: &SymMatrix, tol: f64) -> Result<SymMatrix, NumError> {
    let eig = sym_eigen(a)?;
    let max_abs = eig.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let cutoff = tol * max_abs;
    let recip: Vec<f64> = eig
        .values
        .iter()
        .map(|&l| if l.abs() <= cutoff || l == 0.0 { 0.0 } else { 1.0 / l })
        .collect();
    Ok(eig.reconstruct_with(&recip))
}
