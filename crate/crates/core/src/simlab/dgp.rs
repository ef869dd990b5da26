//! Factor-model data generation.

use rand::Rng;
use rand_distr::StandardNormal;

use super::config::{BinaryScope, SimConfig};
use super::rng::{Stream, StreamKey};
use super::sizes::{allocate_intersections, cluster_sizes, count_empty, thin_intersections};
use super::SimError;
use crate::dataset::{Categorical, Dataset};
use crate::numkernel::Matrix;

/// Fixed cluster layout of a design: margins and intersection counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub sizes_g: Vec<usize>,
    pub sizes_h: Vec<usize>,
    /// `cells[g][h]` observations in intersection `(g, h)`.
    pub cells: Vec<Vec<usize>>,
}

impl Layout {
    /// Sizes from the exponential rule, proportional allocation, then
    /// thinning when `empty_frac > 0`. The thinning draws come from the
    /// design's layout stream, so the layout is the same in every
    /// replication.
    pub fn build(cfg: &SimConfig, key: &StreamKey) -> Result<Self, SimError> {
        let sizes_g = cluster_sizes(cfg.n, cfg.g, cfg.gamma_size_g)?;
        let sizes_h = cluster_sizes(cfg.n, cfg.h, cfg.gamma_size_h)?;
        let mut cells = allocate_intersections(&sizes_g, &sizes_h)?;
        if cfg.empty_frac > 0.0 {
            let mut rng = key.rng(0, Stream::Layout);
            cells = thin_intersections(&cells, cfg.empty_frac, &mut rng)?;
        }
        Ok(Self {
            sizes_g,
            sizes_h,
            cells,
        })
    }

    pub fn n_obs(&self) -> usize {
        self.sizes_g.iter().sum()
    }

    pub fn empty_cells(&self) -> usize {
        count_empty(&self.cells)
    }

    /// `(g, h, i)` for every row, in generation order.
    pub fn rows(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.cells.iter().enumerate().flat_map(|(g, row)| {
            row.iter()
                .enumerate()
                .flat_map(move |(h, &m)| (0..m).map(move |i| (g, h, i)))
        })
    }
}

/// `z = s_g xi_g^parity + s_h xi_h^parity + s_e zeta`, with
/// `s_j = sqrt(rho_j / (1 - rho_j))`, `s_e = sqrt(1 - s_g^2 - s_h^2)` and the
/// parity of the within-intersection index choosing the factor draw.
pub fn gen_factor(cells: &[Vec<usize>], rho_g: f64, rho_h: f64, rng: &mut impl Rng) -> Vec<f64> {
    let vg = rho_g / (1.0 - rho_g);
    let vh = rho_h / (1.0 - rho_h);
    let (sg, sh) = (vg.sqrt(), vh.sqrt());
    let se = (1.0 - vg - vh).max(0.0).sqrt();
    let g = cells.len();
    let h = cells.first().map_or(0, Vec::len);
    let mut normal = || -> f64 { rng.sample(StandardNormal) };
    let xi_g: Vec<[f64; 2]> = (0..g).map(|_| [normal(), normal()]).collect();
    let xi_h: Vec<[f64; 2]> = (0..h).map(|_| [normal(), normal()]).collect();
    let n: usize = cells.iter().flatten().sum();
    let mut z = Vec::with_capacity(n);
    for (a, row) in cells.iter().enumerate() {
        for (b, &m) in row.iter().enumerate() {
            for i in 0..m {
                let par = i % 2;
                z.push(sg * xi_g[a][par] + sh * xi_h[b][par] + se * normal());
            }
        }
    }
    z
}

/// One replication's dataset.
///
/// Columns: `p` factor regressors (the first is the coefficient of
/// interest), `q` binary regressors, then either the two-way dummies (all
/// G levels and H-1 levels) or a constant.
pub fn gen_dataset(cfg: &SimConfig, layout: &Layout, key: &StreamKey, rep: u64) -> Result<Dataset, SimError> {
    let n = layout.n_obs();
    let mut rng_x = key.rng(rep, Stream::Regressors);
    let zs: Vec<Vec<f64>> = (0..cfg.p)
        .map(|_| gen_factor(&layout.cells, cfg.rho_gx, cfg.rho_hx, &mut rng_x))
        .collect();
    let mut rng_b = key.rng(rep, Stream::Binary);
    let bs: Vec<Vec<f64>> = (0..cfg.q)
        .map(|_| match cfg.binary_scope {
            BinaryScope::Observation => (0..n)
                .map(|_| if rng_b.random::<f64>() < cfg.binary_prob { 1.0 } else { 0.0 })
                .collect(),
            BinaryScope::Intersection => {
                let mut v = Vec::with_capacity(n);
                for row in &layout.cells {
                    for &m in row {
                        let d = if rng_b.random::<f64>() < cfg.binary_prob { 1.0 } else { 0.0 };
                        v.extend(std::iter::repeat_n(d, m));
                    }
                }
                v
            }
        })
        .collect();
    let mut rng_u = key.rng(rep, Stream::Disturbance);
    let u = gen_factor(&layout.cells, cfg.rho_g, cfg.rho_h, &mut rng_u);
    let y: Vec<f64> = u.iter().zip(&zs[0]).map(|(ui, zi)| ui + cfg.beta1 * zi).collect();

    let (g, h) = (cfg.g, cfg.h);
    let n_primary = cfg.p + cfg.q;
    let k = cfg.n_cols();
    let mut data = vec![0.0; n * k];
    let mut g_codes = Vec::with_capacity(n);
    let mut h_codes = Vec::with_capacity(n);
    for (r, (a, b, _)) in layout.rows().enumerate() {
        let row = &mut data[r * k..(r + 1) * k];
        for (c, z) in zs.iter().enumerate() {
            row[c] = z[r];
        }
        for (c, bcol) in bs.iter().enumerate() {
            row[cfg.p + c] = bcol[r];
        }
        if cfg.fe {
            row[n_primary + a] = 1.0;
            if b > 0 {
                row[n_primary + g + b - 1] = 1.0;
            }
        } else {
            row[n_primary] = 1.0;
        }
        g_codes.push(a);
        h_codes.push(b);
    }
    let mut names: Vec<String> = (1..=cfg.p).map(|j| format!("z{j}")).collect();
    names.extend((1..=cfg.q).map(|j| format!("b{j}")));
    if cfg.fe {
        names.extend((0..g).map(|a| format!("g={a}")));
        names.extend((1..h).map(|b| format!("h={b}")));
    } else {
        names.push("_cons".into());
    }
    let x = Matrix::from_row_major(n, k, data).expect("consistent shape");
    let ds = Dataset::new(y, x, names, Categorical::from_codes(g_codes), Categorical::from_codes(h_codes), 0)?;
    Ok(if cfg.fe {
        ds.with_fixed_effect_columns(n_primary)?
    } else {
        ds
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simlab::config::parse_sweep;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fig1() -> SimConfig {
        parse_sweep(
            "[base]\ng = 15\nh = 12\nn = 10000\ngamma_size_g = 2.0\ngamma_size_h = 2.0\n\
             rho_g = 0.1\nrho_h = 0.1\nrho_gx = 0.2\nrho_hx = 0.2\np = 10\nreplications = 1\n",
        )
        .unwrap()
        .remove(0)
    }

    #[test]
    fn uncorrelated_factor_has_unit_variance() {
        let cells = vec![vec![50_000, 50_000]];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let z = gen_factor(&cells, 0.0, 0.0, &mut rng);
        let mean = z.iter().sum::<f64>() / z.len() as f64;
        let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (z.len() - 1) as f64;
        assert!((var - 1.0).abs() < 0.02, "{var}");
    }

    #[test]
    fn base_design_shape() {
        let cfg = fig1();
        let key = StreamKey::new(cfg.seed, &cfg.stream_label());
        let layout = Layout::build(&cfg, &key).unwrap();
        let ds = gen_dataset(&cfg, &layout, &key, 0).unwrap();
        assert_eq!(ds.n_obs(), 10_000);
        assert_eq!(ds.n_cols(), 36);
        assert_eq!(ds.n_primary(), 10);
        let [gi, hi, ii] = ds.cluster_indices();
        assert_eq!((gi.n_clusters(), hi.n_clusters(), ii.n_clusters()), (15, 12, 180));
    }

    #[test]
    fn zero_slope_outcome_is_disturbance() {
        let mut cfg = fig1();
        cfg.p = 1;
        cfg.n = 600;
        cfg.g = 4;
        cfg.h = 3;
        let key = StreamKey::new(3, &cfg.stream_label());
        let layout = Layout::build(&cfg, &key).unwrap();
        let ds = gen_dataset(&cfg, &layout, &key, 2).unwrap();
        let u = gen_factor(&layout.cells, cfg.rho_g, cfg.rho_h, &mut key.rng(2, Stream::Disturbance));
        assert_eq!(ds.y(), &u[..]);
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = fig1();
        let key = StreamKey::new(9, &cfg.stream_label());
        let layout = Layout::build(&cfg, &key).unwrap();
        let a = gen_dataset(&cfg, &layout, &key, 5).unwrap();
        let b = gen_dataset(&cfg, &layout, &key, 5).unwrap();
        assert_eq!(a.y(), b.y());
        assert_eq!(a.x(), b.x());
    }

    #[test]
    fn intersection_binaries_are_constant_within_cells() {
        let mut cfg = fig1();
        cfg.q = 2;
        cfg.binary_scope = BinaryScope::Intersection;
        let key = StreamKey::new(1, &cfg.stream_label());
        let layout = Layout::build(&cfg, &key).unwrap();
        let ds = gen_dataset(&cfg, &layout, &key, 0).unwrap();
        let ii = ds.cluster_index(crate::dataset::Dimension::I);
        for rows in ii.all_members() {
            let first = ds.x().get(rows[0], cfg.p);
            assert!(rows.iter().all(|&r| ds.x().get(r, cfg.p) == first));
        }
    }

    #[test]
    fn no_fe_design_has_constant() {
        let mut cfg = fig1();
        cfg.fe = false;
        let key = StreamKey::new(1, &cfg.stream_label());
        let layout = Layout::build(&cfg, &key).unwrap();
        let ds = gen_dataset(&cfg, &layout, &key, 0).unwrap();
        assert_eq!(ds.n_cols(), 11);
        assert!(!ds.has_fixed_effects());
        assert!((0..ds.n_obs()).all(|i| ds.x().get(i, 10) == 1.0));
    }
}
