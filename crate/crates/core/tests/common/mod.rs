//! Dense reference implementations used as test oracles. They share no code
//! with the library's linear algebra.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use twoclust::dataset::{Categorical, Dataset};
use twoclust::numkernel::Matrix;

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        b.swap(c, p);
        assert!(a[c][c].abs() > 1e-300, "singular system");
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for j in c..n {
                a[r][j] -= f * a[c][j];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|j| a[r][j] * x[j]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

pub fn inverse(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let cols: Vec<Vec<f64>> = (0..n)
        .map(|j| solve(a.to_vec(), (0..n).map(|i| f64::from(u8::from(i == j))).collect()))
        .collect();
    (0..n).map(|i| (0..n).map(|j| cols[j][i]).collect()).collect()
}

pub fn rows_of(x: &Matrix) -> Vec<Vec<f64>> {
    (0..x.rows()).map(|i| x.row(i).to_vec()).collect()
}

pub fn gram(rows: &[Vec<f64>], k: usize) -> Vec<Vec<f64>> {
    let mut g = vec![vec![0.0; k]; k];
    for r in rows {
        for a in 0..k {
            for b in 0..k {
                g[a][b] += r[a] * r[b];
            }
        }
    }
    g
}

pub fn xty(rows: &[Vec<f64>], y: &[f64], k: usize) -> Vec<f64> {
    let mut v = vec![0.0; k];
    for (r, yi) in rows.iter().zip(y) {
        for a in 0..k {
            v[a] += r[a] * yi;
        }
    }
    v
}

/// OLS on the columns that are linearly independent of earlier ones;
/// dependent columns get coefficient zero.
pub fn ols_dropping(rows: &[Vec<f64>], y: &[f64], k: usize) -> Vec<f64> {
    let mut kept: Vec<usize> = Vec::new();
    for c in 0..k {
        let col: Vec<f64> = rows.iter().map(|r| r[c]).collect();
        let norm2: f64 = col.iter().map(|v| v * v).sum();
        if norm2 == 0.0 {
            continue;
        }
        let resid2 = if kept.is_empty() {
            norm2
        } else {
            let sub: Vec<Vec<f64>> = rows.iter().map(|r| kept.iter().map(|&j| r[j]).collect()).collect();
            let b = solve(gram(&sub, kept.len()), xty(&sub, &col, kept.len()));
            sub.iter()
                .zip(&col)
                .map(|(r, v)| {
                    let fit: f64 = r.iter().zip(&b).map(|(a, c)| a * c).sum();
                    (v - fit).powi(2)
                })
                .sum()
        };
        if resid2 > 1e-9 * norm2 {
            kept.push(c);
        }
    }
    let sub: Vec<Vec<f64>> = rows.iter().map(|r| kept.iter().map(|&j| r[j]).collect()).collect();
    let b = solve(gram(&sub, kept.len()), xty(&sub, y, kept.len()));
    let mut beta = vec![0.0; k];
    for (&j, v) in kept.iter().zip(b) {
        beta[j] = v;
    }
    beta
}

/// Full-sample OLS without any column dropping.
pub fn ols(rows: &[Vec<f64>], y: &[f64], k: usize) -> Vec<f64> {
    solve(gram(rows, k), xty(rows, y, k))
}

/// Random regression data with two cluster dimensions, a constant in the
/// last column and every cluster nonempty.
pub fn random_dataset(seed: u64, n: usize, k: usize, g: usize, h: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(n * k);
    let mut gl = Vec::with_capacity(n);
    let mut hl = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let a = if i < g { i } else { rng.random_range(0..g) };
        let b = if i < h { i } else { rng.random_range(0..h) };
        let shock = 0.5 * (a as f64 - b as f64) / (g + h) as f64;
        for _ in 0..k - 1 {
            data.push(rng.sample::<f64, _>(StandardNormal) + shock);
        }
        data.push(1.0);
        y.push(rng.sample::<f64, _>(StandardNormal) + shock);
        gl.push(a);
        hl.push(b);
    }
    let names = (0..k - 1).map(|j| format!("x{j}")).chain(["_cons".to_string()]).collect();
    Dataset::new(
        y,
        Matrix::from_row_major(n, k, data).unwrap(),
        names,
        Categorical::from_codes(gl),
        Categorical::from_codes(hl),
        0,
    )
    .unwrap()
}

/// Random two-way fixed-effects data: `p` regressors, all G dummies and
/// H-1 dummies.
pub fn random_twfe(seed: u64, n: usize, p: usize, g: usize, h: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = p + g + h - 1;
    let mut data = vec![0.0; n * k];
    let mut gl = Vec::with_capacity(n);
    let mut hl = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        // Cycle through all cells first so every intersection is present.
        let (a, b) = if i < g * h { (i / h, i % h) } else { (rng.random_range(0..g), rng.random_range(0..h)) };
        let row = &mut data[i * k..(i + 1) * k];
        for v in row.iter_mut().take(p) {
            *v = rng.sample::<f64, _>(StandardNormal) + 0.3 * a as f64;
        }
        row[p + a] = 1.0;
        if b > 0 {
            row[p + g + b - 1] = 1.0;
        }
        y.push(rng.sample::<f64, _>(StandardNormal) + 0.2 * b as f64);
        gl.push(a);
        hl.push(b);
    }
    let mut names: Vec<String> = (0..p).map(|j| format!("z{j}")).collect();
    names.extend((0..g).map(|a| format!("g={a}")));
    names.extend((1..h).map(|b| format!("h={b}")));
    Dataset::new(
        y,
        Matrix::from_row_major(n, k, data).unwrap(),
        names,
        Categorical::from_codes(gl),
        Categorical::from_codes(hl),
        0,
    )
    .unwrap()
    .with_fixed_effect_columns(p)
    .unwrap()
}

/// Members of each cluster, indexed by code.
pub fn members(codes: &[usize]) -> Vec<Vec<usize>> {
    let n = codes.iter().max().map_or(0, |m| m + 1);
    let mut out = vec![Vec::new(); n];
    for (i, &c) in codes.iter().enumerate() {
        out[c].push(i);
    }
    out
}

/// Reference CV3 component from refits that leave out one cluster at a
/// time: `(J-1)/J sum_j (b_j - b)(b_j - b)'`.
pub fn jackknife_by_refit(ds: &Dataset, codes: &[usize]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let k = ds.n_cols();
    let rows = rows_of(ds.x());
    let full = ols_dropping(&rows, ds.y(), k);
    let groups = members(codes);
    let betas: Vec<Vec<f64>> = groups
        .iter()
        .map(|m| {
            let keep: Vec<usize> = (0..rows.len()).filter(|i| !m.contains(i)).collect();
            let r: Vec<Vec<f64>> = keep.iter().map(|&i| rows[i].clone()).collect();
            let y: Vec<f64> = keep.iter().map(|&i| ds.y()[i]).collect();
            ols_dropping(&r, &y, k)
        })
        .collect();
    let j = groups.len() as f64;
    let mut v = vec![vec![0.0; k]; k];
    for b in &betas {
        for a in 0..k {
            for c in 0..k {
                v[a][c] += (b[a] - full[a]) * (b[c] - full[c]);
            }
        }
    }
    for row in &mut v {
        for x in row.iter_mut() {
            *x *= (j - 1.0) / j;
        }
    }
    (betas, v)
}

/// Reference CV3 component from the score form
/// `(J-1)/J A (sum_j s_j s_j') A`, `s_j = X_j' M_jj^{-1} u_j`.
pub fn jackknife_by_scores(ds: &Dataset, codes: &[usize]) -> Vec<Vec<f64>> {
    let k = ds.n_cols();
    let rows = rows_of(ds.x());
    let beta = ols(&rows, ds.y(), k);
    let a = inverse(&gram(&rows, k));
    let u: Vec<f64> = rows
        .iter()
        .zip(ds.y())
        .map(|(r, y)| y - r.iter().zip(&beta).map(|(x, b)| x * b).sum::<f64>())
        .collect();
    let groups = members(codes);
    let mut meat = vec![vec![0.0; k]; k];
    for m in &groups {
        let ax: Vec<Vec<f64>> = m
            .iter()
            .map(|&i| (0..k).map(|p| (0..k).map(|q| a[p][q] * rows[i][q]).sum()).collect())
            .collect();
        let mjj: Vec<Vec<f64>> = m
            .iter()
            .enumerate()
            .map(|(r, &i)| {
                (0..m.len())
                    .map(|c| {
                        let h: f64 = (0..k).map(|p| rows[i][p] * ax[c][p]).sum();
                        f64::from(u8::from(r == c)) - h
                    })
                    .collect()
            })
            .collect();
        let w = solve(mjj, m.iter().map(|&i| u[i]).collect());
        let mut s = vec![0.0; k];
        for (&i, wi) in m.iter().zip(&w) {
            for p in 0..k {
                s[p] += rows[i][p] * wi;
            }
        }
        for p in 0..k {
            for q in 0..k {
                meat[p][q] += s[p] * s[q];
            }
        }
    }
    let j = groups.len() as f64;
    let am: Vec<Vec<f64>> = (0..k)
        .map(|p| (0..k).map(|q| (0..k).map(|r| a[p][r] * meat[r][q]).sum()).collect())
        .collect();
    (0..k)
        .map(|p| (0..k).map(|q| (j - 1.0) / j * (0..k).map(|r| am[p][r] * a[r][q]).sum::<f64>()).collect())
        .collect()
}

/// Largest absolute difference relative to the largest absolute entry of
/// the reference.
pub fn max_rel_err(got: impl Fn(usize, usize) -> f64, want: &[Vec<f64>]) -> f64 {
    let scale = want.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut worst = 0.0f64;
    for (i, row) in want.iter().enumerate() {
        for (j, w) in row.iter().enumerate() {
            worst = worst.max((got(i, j) - w).abs() / scale);
        }
    }
    worst
}
