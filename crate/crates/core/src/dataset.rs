//! Tabular input, cluster indices and fixed-effect expansion.

use std::collections::HashMap;
use std::fmt;
use std::hash::Hash;
use std::path::Path;

use crate::numkernel::{Cholesky, Matrix, SymMatrix};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DataError {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}, column `{column}`: {reason}")]
    Parse {
        row: usize,
        column: String,
        reason: String,
    },
    #[error("no observations")]
    EmptyData,
    #[error("design matrix is rank deficient (column `{column}` is collinear with earlier columns)")]
    RankDeficient { column: String },
    #[error("invalid sample filter `{0}`")]
    BadFilter(String),
    #[error("{0}")]
    Invalid(String),
    #[error("i/o error: {0}")]
    Io(String),
}

/// Cluster dimension tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Dimension {
    G,
    H,
    I,
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dimension::G => "G",
            Dimension::H => "H",
            Dimension::I => "I",
        })
    }
}

/// Categorical variable with levels numbered by first appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct Categorical {
    codes: Vec<usize>,
    levels: Vec<String>,
}

impl Categorical {
    pub fn from_labels<T: Hash + Eq + ToString>(labels: &[T]) -> Self {
        let mut map: HashMap<&T, usize> = HashMap::new();
        let mut levels = Vec::new();
        let codes = labels
            .iter()
            .map(|l| {
                *map.entry(l).or_insert_with(|| {
                    levels.push(l.to_string());
                    levels.len() - 1
                })
            })
            .collect();
        Self { codes, levels }
    }

    /// Builds from dense integer codes `0..n_levels`; level names are the
    /// codes themselves.
    pub fn from_codes(codes: Vec<usize>) -> Self {
        let n = codes.iter().map(|&c| c + 1).max().unwrap_or(0);
        let levels = (0..n).map(|c| c.to_string()).collect();
        Self { codes, levels }
    }

    pub fn codes(&self) -> &[usize] {
        &self.codes
    }

    pub fn levels(&self) -> &[String] {
        &self.levels
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }
}

/// Partition of the rows `0..N` into clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterIndex {
    dim: Dimension,
    assignment: Vec<usize>,
    members: Vec<Vec<usize>>,
    parents: Vec<(usize, usize)>,
}

impl ClusterIndex {
    /// Clusters are numbered by first appearance.
    pub fn from_labels<T: Hash + Eq>(dim: Dimension, labels: &[T]) -> Self {
        let mut map: HashMap<&T, usize> = HashMap::new();
        let mut members: Vec<Vec<usize>> = Vec::new();
        let mut assignment = Vec::with_capacity(labels.len());
        for (row, l) in labels.iter().enumerate() {
            let next = members.len();
            let c = *map.entry(l).or_insert(next);
            if c == next {
                members.push(Vec::new());
            }
            members[c].push(row);
            assignment.push(c);
        }
        Self {
            dim,
            assignment,
            members,
            parents: Vec::new(),
        }
    }

    /// Non-empty intersections of two partitions, numbered by first appearance.
    pub fn intersect(gi: &ClusterIndex, hi: &ClusterIndex) -> Self {
        assert_eq!(gi.n_obs(), hi.n_obs(), "indices over different samples");
        let pairs: Vec<(usize, usize)> = gi
            .assignment
            .iter()
            .zip(&hi.assignment)
            .map(|(&g, &h)| (g, h))
            .collect();
        let mut idx = ClusterIndex::from_labels(Dimension::I, &pairs);
        idx.parents = idx.members.iter().map(|m| pairs[m[0]]).collect();
        idx
    }

    pub fn dim(&self) -> Dimension {
        self.dim
    }

    pub fn n_clusters(&self) -> usize {
        self.members.len()
    }

    pub fn n_obs(&self) -> usize {
        self.assignment.len()
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn cluster_of(&self, row: usize) -> usize {
        self.assignment[row]
    }

    pub fn members(&self, j: usize) -> &[usize] {
        &self.members[j]
    }

    pub fn all_members(&self) -> &[Vec<usize>] {
        &self.members
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.members.iter().map(Vec::len).collect()
    }

    /// `(g, h)` parent clusters of each intersection; empty for G and H indices.
    pub fn parents(&self) -> &[(usize, usize)] {
        &self.parents
    }
}

/// How a fixed-effect block avoids collinearity with the others.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropRule {
    None,
    First,
    Last,
}

#[derive(Debug, Clone)]
pub struct FeBlock {
    pub name: String,
    pub values: Categorical,
    pub drop: DropRule,
}

/// Fixed-effect blocks to append to a design.
#[derive(Debug, Clone, Default)]
pub struct FeSpec {
    pub blocks: Vec<FeBlock>,
}

impl FeSpec {
    /// Default rule: no intercept, the first block keeps every level and each
    /// later block drops its first level.
    pub fn standard(blocks: Vec<(String, Categorical)>) -> Self {
        let blocks = blocks
            .into_iter()
            .enumerate()
            .map(|(i, (name, values))| FeBlock {
                name,
                values,
                drop: if i == 0 { DropRule::None } else { DropRule::First },
            })
            .collect();
        Self { blocks }
    }

    /// Number of dummy columns the spec produces.
    pub fn n_columns(&self) -> usize {
        self.blocks
            .iter()
            .map(|b| match b.drop {
                DropRule::None => b.values.n_levels(),
                _ => b.values.n_levels().saturating_sub(1),
            })
            .sum()
    }
}

/// Regression data: outcome, design and the two clustering variables.
///
/// The first `n_primary` columns of `x` are the non-fixed-effect regressors
/// (the `Z` block); any further columns are fixed-effect dummies.
#[derive(Debug, Clone)]
pub struct Dataset {
    y: Vec<f64>,
    x: Matrix,
    names: Vec<String>,
    g: Categorical,
    h: Categorical,
    coef_id: usize,
    n_primary: usize,
}

impl Dataset {
    pub fn new(
        y: Vec<f64>,
        x: Matrix,
        names: Vec<String>,
        g: Categorical,
        h: Categorical,
        coef_id: usize,
    ) -> Result<Self, DataError> {
        let n = y.len();
        if n == 0 {
            return Err(DataError::EmptyData);
        }
        if x.rows() != n || g.len() != n || h.len() != n {
            return Err(DataError::Invalid(format!(
                "length mismatch: y has {n} rows, X {}, g {}, h {}",
                x.rows(),
                g.len(),
                h.len()
            )));
        }
        if names.len() != x.cols() {
            return Err(DataError::Invalid("column name count differs from X".into()));
        }
        let k = x.cols();
        if k == 0 || k > n {
            return Err(DataError::Invalid(format!("need 1 <= k <= N, got k={k}, N={n}")));
        }
        if coef_id >= k {
            return Err(DataError::Invalid(format!("coefficient id {coef_id} out of range")));
        }
        if y.iter().chain(x.as_slice()).any(|v| !v.is_finite()) {
            return Err(DataError::Invalid("non-finite value in y or X".into()));
        }
        Ok(Self {
            y,
            x,
            names,
            g,
            h,
            coef_id,
            n_primary: k,
        })
    }

    pub fn n_obs(&self) -> usize {
        self.y.len()
    }

    pub fn n_cols(&self) -> usize {
        self.x.cols()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn g_labels(&self) -> &Categorical {
        &self.g
    }

    pub fn h_labels(&self) -> &Categorical {
        &self.h
    }

    pub fn coef_id(&self) -> usize {
        self.coef_id
    }

    pub fn coef_name(&self) -> &str {
        &self.names[self.coef_id]
    }

    /// Number of leading non-fixed-effect columns.
    pub fn n_primary(&self) -> usize {
        self.n_primary
    }

    pub fn has_fixed_effects(&self) -> bool {
        self.n_primary < self.x.cols()
    }

    pub fn with_coef_id(mut self, coef_id: usize) -> Result<Self, DataError> {
        if coef_id >= self.n_primary {
            return Err(DataError::Invalid(format!("coefficient id {coef_id} out of range")));
        }
        self.coef_id = coef_id;
        Ok(self)
    }

    /// Declares the columns from `n_primary` on to be fixed-effect dummies
    /// that were built by the caller.
    pub fn with_fixed_effect_columns(mut self, n_primary: usize) -> Result<Self, DataError> {
        if n_primary == 0 || n_primary > self.n_cols() || self.coef_id >= n_primary {
            return Err(DataError::Invalid(format!("invalid primary block size {n_primary}")));
        }
        self.n_primary = n_primary;
        Ok(self)
    }

    pub fn cluster_index(&self, dim: Dimension) -> ClusterIndex {
        match dim {
            Dimension::G => ClusterIndex::from_labels(Dimension::G, self.g.codes()),
            Dimension::H => ClusterIndex::from_labels(Dimension::H, self.h.codes()),
            Dimension::I => ClusterIndex::intersect(
                &self.cluster_index(Dimension::G),
                &self.cluster_index(Dimension::H),
            ),
        }
    }

    /// Indices for G, H and their intersection.
    pub fn cluster_indices(&self) -> [ClusterIndex; 3] {
        let gi = self.cluster_index(Dimension::G);
        let hi = self.cluster_index(Dimension::H);
        let ii = ClusterIndex::intersect(&gi, &hi);
        [gi, hi, ii]
    }

    /// Replaces the outcome, keeping everything else.
    pub fn with_y(mut self, y: Vec<f64>) -> Result<Self, DataError> {
        if y.len() != self.n_obs() {
            return Err(DataError::Invalid("outcome length mismatch".into()));
        }
        self.y = y;
        Ok(self)
    }

    /// Prepends a column to the primary block; it becomes the coefficient of
    /// interest.
    pub fn prepend_column(&self, name: &str, values: &[f64]) -> Result<Self, DataError> {
        let n = self.n_obs();
        if values.len() != n {
            return Err(DataError::Invalid("column length mismatch".into()));
        }
        let k = self.n_cols();
        let mut data = Vec::with_capacity(n * (k + 1));
        for (i, v) in values.iter().enumerate() {
            data.push(*v);
            data.extend_from_slice(self.x.row(i));
        }
        let x = Matrix::from_row_major(n, k + 1, data).expect("consistent shape");
        let mut names = Vec::with_capacity(k + 1);
        names.push(name.to_string());
        names.extend(self.names.iter().cloned());
        Ok(Self {
            y: self.y.clone(),
            x,
            names,
            g: self.g.clone(),
            h: self.h.clone(),
            coef_id: 0,
            n_primary: self.n_primary + 1,
        })
    }

    /// Appends dummy blocks and checks that the full-sample Gram is
    /// nonsingular.
    pub fn expand_fixed_effects(&self, fe: &FeSpec) -> Result<Self, DataError> {
        if self.has_fixed_effects() {
            return Err(DataError::Invalid("fixed effects already expanded".into()));
        }
        let n = self.n_obs();
        let mut cols: Vec<(String, usize, usize)> = Vec::new(); // (name, block, level)
        for (b, block) in fe.blocks.iter().enumerate() {
            if block.values.len() != n {
                return Err(DataError::Invalid(format!(
                    "fixed-effect block `{}` has wrong length",
                    block.name
                )));
            }
            let nl = block.values.n_levels();
            let keep: Vec<usize> = match block.drop {
                DropRule::None => (0..nl).collect(),
                DropRule::First => (1..nl).collect(),
                DropRule::Last => (0..nl.saturating_sub(1)).collect(),
            };
            for lvl in keep {
                cols.push((format!("{}={}", block.name, block.values.levels()[lvl]), b, lvl));
            }
        }
        let k0 = self.n_cols();
        let k = k0 + cols.len();
        if k > n {
            return Err(DataError::Invalid(format!("k={k} exceeds N={n} after expansion")));
        }
        // Map (block, level) to column offset.
        let mut offset: Vec<Vec<Option<usize>>> = fe
            .blocks
            .iter()
            .map(|b| vec![None; b.values.n_levels()])
            .collect();
        for (c, (_, b, lvl)) in cols.iter().enumerate() {
            offset[*b][*lvl] = Some(k0 + c);
        }
        let mut data = vec![0.0; n * k];
        for i in 0..n {
            data[i * k..i * k + k0].copy_from_slice(self.x.row(i));
            for (b, block) in fe.blocks.iter().enumerate() {
                if let Some(c) = offset[b][block.values.codes()[i]] {
                    data[i * k + c] = 1.0;
                }
            }
        }
        let x = Matrix::from_row_major(n, k, data).expect("consistent shape");
        let mut names = self.names.clone();
        names.extend(cols.into_iter().map(|(name, _, _)| name));
        let out = Self {
            y: self.y.clone(),
            x,
            names,
            g: self.g.clone(),
            h: self.h.clone(),
            coef_id: self.coef_id,
            n_primary: k0,
        };
        out.check_rank()?;
        Ok(out)
    }

    /// Fails with `RankDeficient` when `X'X` is numerically singular.
    pub fn check_rank(&self) -> Result<(), DataError> {
        let gram = gram_of(&self.x);
        Cholesky::factor(&gram).map(|_| ()).map_err(|e| match e {
            crate::numkernel::NumError::NotPositiveDefinite { pivot } => DataError::RankDeficient {
                column: self.names[pivot].clone(),
            },
            other => DataError::Invalid(other.to_string()),
        })
    }
}

pub(crate) fn gram_of(x: &Matrix) -> SymMatrix {
    let mut gram = SymMatrix::zeros(x.cols());
    let mut idx = Vec::with_capacity(x.cols());
    let mut vals = Vec::with_capacity(x.cols());
    for i in 0..x.rows() {
        idx.clear();
        vals.clear();
        for (c, &v) in x.row(i).iter().enumerate() {
            if v != 0.0 {
                idx.push(c);
                vals.push(v);
            }
        }
        gram.add_sparse_outer_upper(&idx, &vals, 1.0);
    }
    gram.mirror_upper();
    gram
}

/// Which variables go where in a regression read from a table.
#[derive(Debug, Clone, Default)]
pub struct ModelSpec {
    pub y: String,
    /// Regressors; the first is the coefficient of interest.
    pub x: Vec<String>,
    pub g: String,
    pub h: String,
    pub fevar: Vec<String>,
    /// Adds a constant column when no fixed effects are requested.
    pub constant: bool,
    pub sample: Option<String>,
}

/// A CSV file held as strings, column-major.
#[derive(Debug, Clone)]
pub struct Table {
    headers: Vec<String>,
    columns: Vec<Vec<String>>,
    /// 1-based data row numbers of the retained rows, for error messages.
    row_numbers: Vec<usize>,
}

impl Table {
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self, DataError> {
        let file = std::fs::File::open(path.as_ref())
            .map_err(|e| DataError::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_reader(file)
    }

    pub fn from_reader<R: std::io::Read>(reader: R) -> Result<Self, DataError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|e| DataError::Io(e.to_string()))?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        let mut columns = vec![Vec::new(); headers.len()];
        let mut row_numbers = Vec::new();
        for (r, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| DataError::Parse {
                row: r + 1,
                column: String::new(),
                reason: e.to_string(),
            })?;
            for (c, col) in columns.iter_mut().enumerate() {
                col.push(rec.get(c).unwrap_or("").trim().to_string());
            }
            row_numbers.push(r + 1);
        }
        Ok(Self {
            headers,
            columns,
            row_numbers,
        })
    }

    pub fn headers(&self) -> &[String] {
        &self.headers
    }

    pub fn n_rows(&self) -> usize {
        self.row_numbers.len()
    }

    fn column_id(&self, name: &str) -> Result<usize, DataError> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn(name.to_string()))
    }

    pub fn text_column(&self, name: &str) -> Result<Vec<String>, DataError> {
        let c = self.column_id(name)?;
        for (i, v) in self.columns[c].iter().enumerate() {
            if is_missing(v) {
                return Err(self.missing(i, name));
            }
        }
        Ok(self.columns[c].clone())
    }

    pub fn numeric_column(&self, name: &str) -> Result<Vec<f64>, DataError> {
        let c = self.column_id(name)?;
        self.columns[c]
            .iter()
            .enumerate()
            .map(|(i, v)| {
                if is_missing(v) {
                    return Err(self.missing(i, name));
                }
                v.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| DataError::Parse {
                    row: self.row_numbers[i],
                    column: name.to_string(),
                    reason: format!("cannot parse `{v}` as a number"),
                })
            })
            .collect()
    }

    fn missing(&self, i: usize, name: &str) -> DataError {
        DataError::Parse {
            row: self.row_numbers[i],
            column: name.to_string(),
            reason: "missing value".into(),
        }
    }

    /// Keeps rows satisfying `expr`: comparisons `col OP value` joined by `&`.
    pub fn filter(&self, expr: &str) -> Result<Table, DataError> {
        let conds = parse_filter(expr)?;
        let mut ids = Vec::with_capacity(conds.len());
        for c in &conds {
            ids.push(self.column_id(&c.column)?);
        }
        let mut keep = Vec::new();
        for i in 0..self.n_rows() {
            let mut ok = true;
            for (c, &col) in conds.iter().zip(&ids) {
                let v = &self.columns[col][i];
                if is_missing(v) {
                    return Err(self.missing(i, &c.column));
                }
                if !c.eval(v) {
                    ok = false;
                    break;
                }
            }
            if ok {
                keep.push(i);
            }
        }
        Ok(Table {
            headers: self.headers.clone(),
            columns: self
                .columns
                .iter()
                .map(|col| keep.iter().map(|&i| col[i].clone()).collect())
                .collect(),
            row_numbers: keep.iter().map(|&i| self.row_numbers[i]).collect(),
        })
    }

    /// Builds the regression dataset, expanding fixed effects when requested.
    pub fn to_dataset(&self, spec: &ModelSpec) -> Result<Dataset, DataError> {
        let table = match spec.sample.as_deref().map(str::trim) {
            Some(s) if !s.is_empty() => self.filter(s)?,
            _ => self.clone(),
        };
        if table.n_rows() == 0 {
            return Err(DataError::EmptyData);
        }
        if spec.x.is_empty() {
            return Err(DataError::Invalid("at least one regressor is required".into()));
        }
        let y = table.numeric_column(&spec.y)?;
        let mut cols = Vec::with_capacity(spec.x.len());
        for name in &spec.x {
            cols.push(table.numeric_column(name)?);
        }
        let mut names = spec.x.clone();
        if spec.constant && spec.fevar.is_empty() {
            cols.push(vec![1.0; y.len()]);
            names.push("_cons".into());
        }
        let g = Categorical::from_labels(&table.text_column(&spec.g)?);
        let h = Categorical::from_labels(&table.text_column(&spec.h)?);
        let n = y.len();
        let k = cols.len();
        let mut data = Vec::with_capacity(n * k);
        for i in 0..n {
            data.extend(cols.iter().map(|c| c[i]));
        }
        let x = Matrix::from_row_major(n, k, data).expect("consistent shape");
        let ds = Dataset::new(y, x, names, g, h, 0)?;
        if spec.fevar.is_empty() {
            ds.check_rank()?;
            return Ok(ds);
        }
        let mut blocks = Vec::new();
        for name in &spec.fevar {
            blocks.push((name.clone(), Categorical::from_labels(&table.text_column(name)?)));
        }
        ds.expand_fixed_effects(&FeSpec::standard(blocks))
    }
}

fn is_missing(v: &str) -> bool {
    v.is_empty() || v == "." || v.eq_ignore_ascii_case("na") || v.eq_ignore_ascii_case("nan")
}

/// Reads `y`, one regressor per `x_cols` entry and the two cluster columns.
pub fn load_csv(
    path: impl AsRef<Path>,
    y_col: &str,
    x_cols: &[&str],
    g_col: &str,
    h_col: &str,
) -> Result<Dataset, DataError> {
    let spec = ModelSpec {
        y: y_col.into(),
        x: x_cols.iter().map(|s| s.to_string()).collect(),
        g: g_col.into(),
        h: h_col.into(),
        ..ModelSpec::default()
    };
    Table::read_csv(path)?.to_dataset(&spec)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Debug, Clone)]
struct Condition {
    column: String,
    op: CmpOp,
    value: String,
}

impl Condition {
    fn eval(&self, cell: &str) -> bool {
        let ord = match (cell.parse::<f64>(), self.value.parse::<f64>()) {
            (Ok(a), Ok(b)) => a.partial_cmp(&b),
            _ => Some(cell.cmp(self.value.as_str())),
        };
        let Some(ord) = ord else { return false };
        use std::cmp::Ordering::*;
        match self.op {
            CmpOp::Eq => ord == Equal,
            CmpOp::Ne => ord != Equal,
            CmpOp::Lt => ord == Less,
            CmpOp::Le => ord != Greater,
            CmpOp::Gt => ord == Greater,
            CmpOp::Ge => ord != Less,
        }
    }
}

fn parse_filter(expr: &str) -> Result<Vec<Condition>, DataError> {
    let bad = || DataError::BadFilter(expr.to_string());
    let mut out = Vec::new();
    for part in expr.split('&').map(str::trim).filter(|p| !p.is_empty()) {
        // Two-character operators first.
        let ops = [
            ("==", CmpOp::Eq),
            ("!=", CmpOp::Ne),
            ("<=", CmpOp::Le),
            (">=", CmpOp::Ge),
            ("<", CmpOp::Lt),
            (">", CmpOp::Gt),
            ("=", CmpOp::Eq),
        ];
        let (pos, len, op) = ops
            .iter()
            .filter_map(|(s, op)| part.find(s).map(|p| (p, s.len(), *op)))
            .min_by_key(|(p, len, _)| (*p, usize::MAX - len))
            .ok_or_else(bad)?;
        let column = part[..pos].trim();
        let value = part[pos + len..].trim().trim_matches('"');
        if column.is_empty() || value.is_empty() {
            return Err(bad());
        }
        out.push(Condition {
            column: column.to_string(),
            op,
            value: value.to_string(),
        });
    }
    if out.is_empty() {
        return Err(bad());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_table() -> Table {
        let csv = "y,x,g,h\n1.0,2.0,a,u\n2.0,1.0,a,v\n3.0,5.0,b,u\n4.0,3.0,b,v\n";
        Table::from_reader(csv.as_bytes()).unwrap()
    }

    #[test]
    fn loads_toy_file() {
        let spec = ModelSpec {
            y: "y".into(),
            x: vec!["x".into()],
            g: "g".into(),
            h: "h".into(),
            ..Default::default()
        };
        let ds = toy_table().to_dataset(&spec).unwrap();
        assert_eq!(ds.n_obs(), 4);
        assert_eq!(ds.n_cols(), 1);
        assert_eq!(ds.g_labels().n_levels(), 2);
    }

    #[test]
    fn missing_column_is_reported() {
        let csv = "y,x,g\n1,2,a\n";
        let spec = ModelSpec {
            y: "y".into(),
            x: vec!["x".into()],
            g: "g".into(),
            h: "h".into(),
            ..Default::default()
        };
        let err = Table::from_reader(csv.as_bytes()).unwrap().to_dataset(&spec).unwrap_err();
        assert_eq!(err, DataError::MissingColumn("h".into()));
    }

    #[test]
    fn missing_value_names_row_and_column() {
        let csv = "y,x,g,h\n1,2,a,u\n2,,a,v\n";
        let t = Table::from_reader(csv.as_bytes()).unwrap();
        match t.numeric_column("x") {
            Err(DataError::Parse { row, column, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "x");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_data() {
        let t = Table::from_reader("y,x,g,h\n".as_bytes()).unwrap();
        let spec = ModelSpec {
            y: "y".into(),
            x: vec!["x".into()],
            g: "g".into(),
            h: "h".into(),
            ..Default::default()
        };
        assert_eq!(t.to_dataset(&spec).unwrap_err(), DataError::EmptyData);
    }

    #[test]
    fn filter_grammar() {
        let t = toy_table();
        assert_eq!(t.filter("x>=2 & x<5").unwrap().n_rows(), 2);
        assert_eq!(t.filter("g==a").unwrap().n_rows(), 2);
        assert_eq!(t.filter("g != \"a\"").unwrap().n_rows(), 2);
        assert_eq!(t.filter("y>3").unwrap().n_rows(), 1);
        assert!(t.filter("x").is_err());
        assert!(matches!(t.filter("z==1"), Err(DataError::MissingColumn(_))));
        let kept = t.filter("y>=3").unwrap();
        assert_eq!(kept.row_numbers, vec![3, 4]);
    }

    #[test]
    fn cluster_index_first_appearance() {
        let idx = ClusterIndex::from_labels(Dimension::G, &["a", "a", "b"]);
        assert_eq!(idx.n_clusters(), 2);
        assert_eq!(idx.sizes(), vec![2, 1]);
        let one = ClusterIndex::from_labels(Dimension::G, &[7, 7, 7, 7]);
        assert_eq!(one.n_clusters(), 1);
        assert_eq!(one.sizes(), vec![4]);
        let order = ClusterIndex::from_labels(Dimension::H, &["z", "y", "z", "x"]);
        assert_eq!(order.members(0), &[0, 2]);
        assert_eq!(order.members(2), &[3]);
    }

    #[test]
    fn intersections() {
        let g = ClusterIndex::from_labels(Dimension::G, &[0, 0, 1, 1, 0, 0, 1, 1]);
        let h = ClusterIndex::from_labels(Dimension::H, &[0, 1, 0, 1, 0, 1, 0, 1]);
        let i = ClusterIndex::intersect(&g, &h);
        assert_eq!(i.n_clusters(), 4);
        assert!(i.sizes().iter().all(|&s| s == 2));
        assert_eq!(i.parents(), &[(0, 0), (0, 1), (1, 0), (1, 1)]);

        let same = ClusterIndex::intersect(&g, &g);
        assert_eq!(same.n_clusters(), g.n_clusters());
        assert_eq!(same.sizes(), g.sizes());
    }

    #[test]
    fn fe_column_counts() {
        let n = 6;
        let x = Matrix::column(&[0.3, -1.0, 2.0, 0.7, 1.1, -0.4]);
        let g = Categorical::from_labels(&[0, 1, 2, 0, 1, 2]);
        let h = Categorical::from_labels(&[0, 0, 0, 1, 1, 1]);
        let ds = Dataset::new(vec![0.0; n], x, vec!["x".into()], g.clone(), h.clone(), 0).unwrap();

        let one = FeSpec::standard(vec![("h".into(), h.clone())]);
        assert_eq!(one.n_columns(), 2);
        assert_eq!(ds.expand_fixed_effects(&one).unwrap().n_cols(), 3);

        let two = FeSpec::standard(vec![("g".into(), g), ("h".into(), h)]);
        assert_eq!(two.n_columns(), 4);
        let wide = ds.expand_fixed_effects(&two).unwrap();
        assert_eq!(wide.n_cols(), 5);
        assert_eq!(wide.n_primary(), 1);
        assert!(wide.has_fixed_effects());
    }

    #[test]
    fn fe_without_drop_is_rank_deficient() {
        let x = Matrix::column(&[0.3, -1.0, 2.0, 0.7, 1.5, -0.2]);
        let g = Categorical::from_labels(&[0, 1, 0, 1, 0, 1]);
        let h = Categorical::from_labels(&[0, 0, 1, 1, 0, 1]);
        let ds = Dataset::new(vec![0.0; 6], x, vec!["x".into()], g.clone(), h.clone(), 0).unwrap();
        let spec = FeSpec {
            blocks: vec![
                FeBlock { name: "g".into(), values: g, drop: DropRule::None },
                FeBlock { name: "h".into(), values: h, drop: DropRule::None },
            ],
        };
        assert!(matches!(
            ds.expand_fixed_effects(&spec),
            Err(DataError::RankDeficient { .. })
        ));
    }

    #[test]
    fn constant_added_without_fe() {
        let spec = ModelSpec {
            y: "y".into(),
            x: vec!["x".into()],
            g: "g".into(),
            h: "h".into(),
            constant: true,
            ..Default::default()
        };
        let ds = toy_table().to_dataset(&spec).unwrap();
        assert_eq!(ds.names(), &["x".to_string(), "_cons".to_string()]);
    }

    #[test]
    fn prepend_column_shifts_design() {
        let x = Matrix::column(&[1.0, 2.0, 3.0]);
        let c = Categorical::from_labels(&[0, 1, 2]);
        let ds = Dataset::new(vec![0.0; 3], x, vec!["x".into()], c.clone(), c, 0).unwrap();
        let wider = ds.prepend_column("p", &[9.0, 8.0, 7.0]).unwrap();
        assert_eq!(wider.x().row(1), &[8.0, 2.0]);
        assert_eq!(wider.n_primary(), 2);
        assert_eq!(wider.coef_name(), "p");
    }
}
