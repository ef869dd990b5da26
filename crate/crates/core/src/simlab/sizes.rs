//! Cluster sizes, intersection allocation and empty-intersection thinning.

use std::collections::VecDeque;

use rand::Rng;

use super::SimError;

/// Sizes proportional to `exp(gamma j / J)`, `j = 1..J`, rounded to the
/// nearest integer; the last cluster takes the remainder.
pub fn cluster_sizes(n: usize, j: usize, gamma: f64) -> Result<Vec<usize>, SimError> {
    if j == 0 || n < j {
        return Err(SimError::InfeasibleSizes(format!("need N >= J >= 1, got N={n}, J={j}")));
    }
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(SimError::InfeasibleSizes(format!("gamma must be finite and >= 0, got {gamma}")));
    }
    let w: Vec<f64> = (1..=j).map(|l| (gamma * l as f64 / j as f64).exp()).collect();
    let total: f64 = w.iter().sum();
    let mut sizes: Vec<usize> = w[..j - 1]
        .iter()
        .map(|wl| (n as f64 * wl / total).round() as usize)
        .collect();
    let used: usize = sizes.iter().sum();
    if used >= n {
        return Err(SimError::InfeasibleSizes("no observations left for the last cluster".into()));
    }
    sizes.push(n - used);
    if sizes.contains(&0) {
        return Err(SimError::InfeasibleSizes(format!(
            "N={n} is too small for J={j} clusters at gamma={gamma}"
        )));
    }
    Ok(sizes)
}

/// Integer `N_gh` close to `N_g N_h / N` with exact margins.
///
/// Floors first, then hands out the missing units by largest remainder
/// subject to the row and column deficits.
pub fn allocate_intersections(sizes_g: &[usize], sizes_h: &[usize]) -> Result<Vec<Vec<usize>>, SimError> {
    let n: usize = sizes_g.iter().sum();
    if n != sizes_h.iter().sum::<usize>() || n == 0 {
        return Err(SimError::InfeasibleSizes("margins do not add up to the same N".into()));
    }
    let (g, h) = (sizes_g.len(), sizes_h.len());
    let mut cells = vec![vec![0usize; h]; g];
    let mut rema = Vec::with_capacity(g * h);
    for a in 0..g {
        for b in 0..h {
            let t = sizes_g[a] as f64 * sizes_h[b] as f64 / n as f64;
            let f = t.floor();
            cells[a][b] = f as usize;
            rema.push((t - f, a, b));
        }
    }
    let mut row_def: Vec<usize> = (0..g).map(|a| sizes_g[a] - cells[a].iter().sum::<usize>()).collect();
    let mut col_def: Vec<usize> = (0..h)
        .map(|b| sizes_h[b] - (0..g).map(|a| cells[a][b]).sum::<usize>())
        .collect();
    rema.sort_by(|x, y| y.0.total_cmp(&x.0).then((x.1, x.2).cmp(&(y.1, y.2))));
    for &(_, a, b) in &rema {
        if row_def[a] > 0 && col_def[b] > 0 {
            cells[a][b] += 1;
            row_def[a] -= 1;
            col_def[b] -= 1;
        }
    }
    // Whatever the greedy pass could not place goes to the best remaining
    // cell of each deficient row.
    for a in 0..g {
        while row_def[a] > 0 {
            let b = rema
                .iter()
                .filter(|r| r.1 == a && col_def[r.2] > 0)
                .map(|r| r.2)
                .next()
                .expect("row and column deficits balance");
            cells[a][b] += 1;
            row_def[a] -= 1;
            col_def[b] -= 1;
        }
    }
    Ok(cells)
}

/// Number of empty cells.
pub fn count_empty(cells: &[Vec<usize>]) -> usize {
    cells.iter().flatten().filter(|&&c| c == 0).count()
}

/// Empties about `target_frac` of the cells while keeping every row and
/// column margin.
///
/// A northwest-corner staircase of `G + H - 1` cells is never emptied, which
/// keeps the support connected (so two-way fixed effects stay identified)
/// and guarantees a feasible allocation. The remaining cells are emptied in
/// random order, small cells first in expectation. Observations are then
/// spread over the kept cells of each row in proportion to the column sizes
/// and moved within rows along augmenting paths until the column margins
/// are exact.
pub fn thin_intersections(
    cells: &[Vec<usize>],
    target_frac: f64,
    rng: &mut impl Rng,
) -> Result<Vec<Vec<usize>>, SimError> {
    let g = cells.len();
    let h = cells.first().map_or(0, Vec::len);
    if target_frac <= 0.0 {
        return Ok(cells.to_vec());
    }
    let total_cells = g * h;
    let max_empty = total_cells - (g + h - 1);
    let target = (target_frac * total_cells as f64).round() as usize;
    if target > max_empty || target_frac >= 1.0 {
        return Err(SimError::InfeasibleThinning(format!(
            "requested {target} empty cells, at most {max_empty} are possible for {g}x{h}"
        )));
    }
    let row_sizes: Vec<usize> = cells.iter().map(|r| r.iter().sum()).collect();
    let col_sizes: Vec<usize> = (0..h).map(|b| cells.iter().map(|r| r[b]).sum()).collect();

    let staircase = northwest_support(&row_sizes, &col_sizes);
    // Priority: exponential race with rate proportional to 1/(size+1), so
    // smaller cells tend to be emptied first.
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for a in 0..g {
        for b in 0..h {
            if !staircase[a][b] {
                let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
                let key = -u.ln() * (cells[a][b] as f64 + 1.0);
                candidates.push((key, a, b));
            }
        }
    }
    candidates.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut keep = vec![vec![true; h]; g];
    for &(_, a, b) in candidates.iter().take(target) {
        keep[a][b] = false;
    }
    // Kept cells must fit at least one observation each.
    for a in 0..g {
        let k = keep[a].iter().filter(|&&k| k).count();
        if k > row_sizes[a] {
            return Err(SimError::InfeasibleThinning(format!("row {a} is too small for its kept cells")));
        }
    }

    let mut out = vec![vec![0usize; h]; g];
    for a in 0..g {
        let kept: Vec<usize> = (0..h).filter(|&b| keep[a][b]).collect();
        let spare = row_sizes[a] - kept.len();
        let wsum: f64 = kept.iter().map(|&b| col_sizes[b] as f64).sum();
        let mut shares: Vec<(f64, usize)> = Vec::with_capacity(kept.len());
        let mut placed = 0;
        for &b in &kept {
            let t = spare as f64 * col_sizes[b] as f64 / wsum;
            let f = t.floor() as usize;
            out[a][b] = 1 + f;
            placed += f;
            shares.push((t - f as f64, b));
        }
        shares.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
        for &(_, b) in shares.iter().take(spare - placed) {
            out[a][b] += 1;
        }
    }
    repair_columns(&mut out, &keep, &col_sizes)?;
    Ok(out)
}

fn northwest_support(rows: &[usize], cols: &[usize]) -> Vec<Vec<bool>> {
    let (g, h) = (rows.len(), cols.len());
    let mut sup = vec![vec![false; h]; g];
    let (mut r, mut c) = (rows.to_vec(), cols.to_vec());
    let (mut a, mut b) = (0, 0);
    while a < g && b < h {
        sup[a][b] = true;
        let m = r[a].min(c[b]);
        r[a] -= m;
        c[b] -= m;
        if a == g - 1 {
            b += 1;
        } else if b == h - 1 || r[a] == 0 {
            a += 1;
        } else {
            b += 1;
        }
    }
    sup
}

/// Moves single observations within rows until every column sum matches.
fn repair_columns(out: &mut [Vec<usize>], keep: &[Vec<bool>], target: &[usize]) -> Result<(), SimError> {
    let (g, h) = (out.len(), target.len());
    loop {
        let sums: Vec<usize> = (0..h).map(|b| out.iter().map(|r| r[b]).sum()).collect();
        let Some(src) = (0..h).find(|&b| sums[b] > target[b]) else {
            return Ok(());
        };
        // BFS over columns; an edge b -> c through row a exists when row a
        // keeps both cells and (a, b) holds more than one observation.
        let mut prev: Vec<Option<(usize, usize)>> = vec![None; h];
        let mut seen = vec![false; h];
        seen[src] = true;
        let mut queue = VecDeque::from([src]);
        let mut sink = None;
        while let Some(b) = queue.pop_front() {
            if sums[b] < target[b] {
                sink = Some(b);
                break;
            }
            for a in 0..g {
                if !keep[a][b] || out[a][b] < 2 {
                    continue;
                }
                for c in 0..h {
                    if keep[a][c] && !seen[c] {
                        seen[c] = true;
                        prev[c] = Some((b, a));
                        queue.push_back(c);
                    }
                }
            }
        }
        let Some(mut c) = sink else {
            return Err(SimError::InfeasibleThinning("cannot rebalance column sizes".into()));
        };
        while let Some((b, a)) = prev[c] {
            out[a][b] -= 1;
            out[a][c] += 1;
            c = b;
        }
    }
}
