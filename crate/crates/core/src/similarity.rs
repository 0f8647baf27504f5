//! Region embeddings, targeted similarity, and similarity kernels.
//!
//! An image is represented by an [`EmbeddingBag`]: one feature row per region
//! (query RoIs for exemplar images, proposals for unlabeled images). The score
//! between a query image and an unlabeled image is the best cosine match over
//! every RoI/proposal pair. Collecting those scores over a query set and an
//! unlabeled pool gives the query-by-unlabeled [`SimilarityKernel`] consumed by
//! the mutual-information objectives.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows whose norm is at or below this are rejected by normalization.
pub const ZERO_NORM_THRESHOLD: f64 = 1e-12;
/// Allowed deviation from unit norm for a normalized bag.
pub const NORM_TOLERANCE: f64 = 1e-5;
/// Allowed asymmetry of a pairwise kernel.
pub const SYMMETRY_TOLERANCE: f32 = 1e-6;

/// Dot product of two `f32` slices accumulated in `f64`.
#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

#[inline]
fn norm(a: &[f32]) -> f64 {
    dot(a, a).sqrt()
}

/// Dense row-major `f32` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimMismatch {
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f32 {
        self.data[i * self.cols + j]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }
}

/// Per-image set of region feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingBag {
    rows: usize,
    dim: usize,
    data: Vec<f32>,
    normalized: bool,
}

impl EmbeddingBag {
    /// Builds an unnormalized bag from row-major data.
    pub fn new(rows: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        if rows == 0 || dim == 0 {
            return Err(Error::InvalidBag(format!(
                "bag must have rows >= 1 and dim >= 1 (got {rows}x{dim})"
            )));
        }
        if data.len() != rows * dim {
            return Err(Error::DimMismatch {
                expected: rows * dim,
                found: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidBag("non-finite feature value".into()));
        }
        Ok(Self {
            rows,
            dim,
            data,
            normalized: false,
        })
    }

    pub fn from_rows<R: AsRef<[f32]>>(rows: &[R]) -> Result<Self> {
        let m = DenseMatrix::from_rows(rows)?;
        Self::new(m.rows, m.cols, m.data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim)
    }

    /// Returns a copy with every row scaled to unit Euclidean norm.
    pub fn l2_normalize(&self) -> Result<EmbeddingBag> {
        let mut data = Vec::with_capacity(self.data.len());
        for (i, row) in self.iter_rows().enumerate() {
            let n = norm(row);
            if n <= ZERO_NORM_THRESHOLD {
                return Err(Error::ZeroVectorRow(i));
            }
            data.extend(row.iter().map(|&v| (v as f64 / n) as f32));
        }
        Ok(EmbeddingBag {
            rows: self.rows,
            dim: self.dim,
            data,
            normalized: true,
        })
    }

    /// Normalized view: borrows when already normalized, copies otherwise.
    pub fn normalized(&self) -> Result<std::borrow::Cow<'_, EmbeddingBag>> {
        if self.normalized {
            Ok(std::borrow::Cow::Borrowed(self))
        } else {
            self.l2_normalize().map(std::borrow::Cow::Owned)
        }
    }

    /// Checks the unit-norm invariant of a bag flagged as normalized.
    pub fn check_normalized(&self) -> Result<()> {
        if !self.normalized {
            return Err(Error::NotNormalized);
        }
        for (i, row) in self.iter_rows().enumerate() {
            if (norm(row) - 1.0).abs() > NORM_TOLERANCE {
                return Err(Error::InvalidBag(format!("row {i} is not unit norm")));
            }
        }
        Ok(())
    }
}

/// Free-function form of [`EmbeddingBag::l2_normalize`].
pub fn l2_normalize(bag: &EmbeddingBag) -> Result<EmbeddingBag> {
    bag.l2_normalize()
}

fn check_pair(query: &EmbeddingBag, unlabeled: &EmbeddingBag) -> Result<()> {
    if query.dim != unlabeled.dim {
        return Err(Error::DimMismatch {
            expected: query.dim,
            found: unlabeled.dim,
        });
    }
    if !query.normalized || !unlabeled.normalized {
        return Err(Error::NotNormalized);
    }
    Ok(())
}

/// RoI-by-proposal cosine score map (`T x P`) of two normalized bags.
pub fn cosine_score_map(query: &EmbeddingBag, unlabeled: &EmbeddingBag) -> Result<DenseMatrix> {
    check_pair(query, unlabeled)?;
    let mut data = Vec::with_capacity(query.rows * unlabeled.rows);
    for q in query.iter_rows() {
        for p in unlabeled.iter_rows() {
            data.push(dot(q, p).clamp(-1.0, 1.0) as f32);
        }
    }
    DenseMatrix::new(query.rows, unlabeled.rows, data)
}

/// Best RoI/proposal cosine match between a query image and an unlabeled image.
pub fn targeted_sim(query: &EmbeddingBag, unlabeled: &EmbeddingBag) -> Result<f32> {
    check_pair(query, unlabeled)?;
    Ok(max_pair_cosine(query, unlabeled))
}

// Callers guarantee both bags are normalized and share a dimension.
fn max_pair_cosine(query: &EmbeddingBag, unlabeled: &EmbeddingBag) -> f32 {
    let mut best = f64::NEG_INFINITY;
    for q in query.iter_rows() {
        for p in unlabeled.iter_rows() {
            best = best.max(dot(q, p));
        }
    }
    best.clamp(-1.0, 1.0) as f32
}

/// How cosine scores are mapped before entering an objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum NonnegMode {
    /// `max(0, cos)`; keeps positive matches, zeroes anti-correlated ones.
    #[default]
    ClampZero,
    /// `(1 + cos) / 2`.
    ShiftRescale,
    /// Cosine passed through unchanged.
    Raw,
}

impl NonnegMode {
    #[inline]
    pub fn apply(self, cos: f32) -> f32 {
        match self {
            NonnegMode::ClampZero => cos.clamp(0.0, 1.0),
            NonnegMode::ShiftRescale => ((1.0 + cos) / 2.0).clamp(0.0, 1.0),
            NonnegMode::Raw => cos.clamp(-1.0, 1.0),
        }
    }

    pub fn is_nonnegative(self) -> bool {
        !matches!(self, NonnegMode::Raw)
    }

    fn range(self) -> (f32, f32) {
        match self {
            NonnegMode::ClampZero | NonnegMode::ShiftRescale => (0.0, 1.0),
            NonnegMode::Raw => (-1.0, 1.0),
        }
    }

    pub fn code(self) -> u8 {
        match self {
            NonnegMode::ClampZero => 0,
            NonnegMode::ShiftRescale => 1,
            NonnegMode::Raw => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(NonnegMode::ClampZero),
            1 => Some(NonnegMode::ShiftRescale),
            2 => Some(NonnegMode::Raw),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelKind {
    /// `|Q| x |U|`: rows are query images, columns unlabeled images.
    QueryByUnlabeled,
    /// `|U| x |U|`, symmetric.
    PairwiseUnlabeled,
}

impl KernelKind {
    pub fn code(self) -> u8 {
        match self {
            KernelKind::QueryByUnlabeled => 0,
            KernelKind::PairwiseUnlabeled => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(KernelKind::QueryByUnlabeled),
            1 => Some(KernelKind::PairwiseUnlabeled),
            _ => None,
        }
    }
}

/// Dense similarity matrix with its kind and nonnegativity transform.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityKernel {
    n_rows: usize,
    n_cols: usize,
    values: Vec<f32>,
    kind: KernelKind,
    nonneg_mode: NonnegMode,
}

impl SimilarityKernel {
    /// Wraps precomputed values, validating shape, range and symmetry.
    pub fn new(
        kind: KernelKind,
        nonneg_mode: NonnegMode,
        n_rows: usize,
        n_cols: usize,
        values: Vec<f32>,
    ) -> Result<Self> {
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::InvalidKernel(format!("empty kernel {n_rows}x{n_cols}")));
        }
        if values.len() != n_rows * n_cols {
            return Err(Error::InvalidKernel(format!(
                "{} values for a {n_rows}x{n_cols} kernel",
                values.len()
            )));
        }
        let (lo, hi) = nonneg_mode.range();
        let eps = 1e-6;
        if let Some(pos) = values
            .iter()
            .position(|v| !v.is_finite() || *v < lo - eps || *v > hi + eps)
        {
            return Err(Error::InvalidKernel(format!(
                "entry {pos} = {} outside [{lo}, {hi}] for {nonneg_mode:?}",
                values[pos]
            )));
        }
        let kernel = Self {
            n_rows,
            n_cols,
            values,
            kind,
            nonneg_mode,
        };
        if kind == KernelKind::PairwiseUnlabeled {
            if n_rows != n_cols {
                return Err(Error::InvalidKernel(format!(
                    "pairwise kernel must be square, got {n_rows}x{n_cols}"
                )));
            }
            for i in 0..n_rows {
                for j in (i + 1)..n_cols {
                    if (kernel.get(i, j) - kernel.get(j, i)).abs() > SYMMETRY_TOLERANCE {
                        return Err(Error::InvalidKernel(format!(
                            "asymmetric at ({i}, {j})"
                        )));
                    }
                }
            }
        }
        Ok(kernel)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn nonneg_mode(&self) -> NonnegMode {
        self.nonneg_mode
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f32 {
        self.values[i * self.n_cols + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    /// Size of the unlabeled ground set indexed by the columns.
    pub fn ground_size(&self) -> usize {
        self.n_cols
    }

    /// Restricts a pairwise kernel to `indices` (in the given order).
    pub fn restrict(&self, indices: &[usize]) -> Result<SimilarityKernel> {
        if self.kind != KernelKind::PairwiseUnlabeled {
            return Err(Error::KernelKindMismatch {
                objective: "restrict",
                expected: "PairwiseUnlabeled",
            });
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.n_cols) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                size: self.n_cols,
            });
        }
        let values = indices
            .iter()
            .flat_map(|&i| indices.iter().map(move |&j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .collect();
        SimilarityKernel::new(
            self.kind,
            self.nonneg_mode,
            indices.len(),
            indices.len(),
            values,
        )
    }
}

/// Query-by-unlabeled kernel: entry `(q, u)` is the targeted similarity of
/// query image `q` and unlabeled image `u`, transformed by `mode`.
///
/// Bags that are not yet normalized are normalized internally. Columns are
/// computed in parallel; each entry is independent so the result does not
/// depend on the thread count.
pub fn build_query_kernel(
    query_bags: &[EmbeddingBag],
    unlabeled_bags: &[EmbeddingBag],
    mode: NonnegMode,
) -> Result<SimilarityKernel> {
    let q: Vec<&EmbeddingBag> = query_bags.iter().collect();
    let u: Vec<&EmbeddingBag> = unlabeled_bags.iter().collect();
    build_query_kernel_refs(&q, &u, mode)
}

/// [`build_query_kernel`] over borrowed bags.
pub fn build_query_kernel_refs(
    query_bags: &[&EmbeddingBag],
    unlabeled_bags: &[&EmbeddingBag],
    mode: NonnegMode,
) -> Result<SimilarityKernel> {
    if query_bags.is_empty() {
        return Err(Error::EmptyInput("query bags"));
    }
    if unlabeled_bags.is_empty() {
        return Err(Error::EmptyInput("unlabeled bags"));
    }
    let dim = query_bags[0].dim();
    for bag in query_bags.iter().chain(unlabeled_bags) {
        if bag.dim() != dim {
            return Err(Error::DimMismatch {
                expected: dim,
                found: bag.dim(),
            });
        }
    }
    let queries = query_bags
        .iter()
        .map(|b| b.normalized())
        .collect::<Result<Vec<_>>>()?;

    let columns: Vec<Vec<f32>> = unlabeled_bags
        .par_iter()
        .map(|bag| {
            let bag = bag.normalized()?;
            Ok(queries
                .iter()
                .map(|q| mode.apply(max_pair_cosine(q, &bag)))
                .collect())
        })
        .collect::<Result<_>>()?;

    let (n_rows, n_cols) = (queries.len(), columns.len());
    let mut values = vec![0.0f32; n_rows * n_cols];
    for (u, col) in columns.iter().enumerate() {
        for (q, &v) in col.iter().enumerate() {
            values[q * n_cols + u] = v;
        }
    }
    SimilarityKernel::new(KernelKind::QueryByUnlabeled, mode, n_rows, n_cols, values)
}

/// Symmetric cosine kernel over one vector per image.
pub fn build_pairwise_kernel(vectors: &DenseMatrix, mode: NonnegMode) -> Result<SimilarityKernel> {
    let n = vectors.rows();
    if n == 0 {
        return Err(Error::EmptyInput("image vectors"));
    }
    let mut unit = Vec::with_capacity(vectors.data().len());
    for (i, row) in vectors.iter_rows().enumerate() {
        let nr = norm(row);
        if nr <= ZERO_NORM_THRESHOLD {
            return Err(Error::ZeroVectorRow(i));
        }
        unit.extend(row.iter().map(|&v| (v as f64 / nr) as f32));
    }
    let unit = DenseMatrix::new(n, vectors.cols(), unit)?;

    let upper: Vec<Vec<f32>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let ri = unit.row(i);
            (i..n)
                .map(|j| {
                    if i == j {
                        mode.apply(1.0)
                    } else {
                        mode.apply(dot(ri, unit.row(j)).clamp(-1.0, 1.0) as f32)
                    }
                })
                .collect()
        })
        .collect();

    let mut values = vec![0.0f32; n * n];
    for (i, row) in upper.iter().enumerate() {
        for (k, &v) in row.iter().enumerate() {
            let j = i + k;
            values[i * n + j] = v;
            values[j * n + i] = v;
        }
    }
    SimilarityKernel::new(KernelKind::PairwiseUnlabeled, mode, n, n, values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PoolMode {
    #[default]
    Mean,
    Max,
}

/// Collapses a bag to a single image-level vector.
pub fn pool_bag(bag: &EmbeddingBag, mode: PoolMode) -> Vec<f32> {
    let dim = bag.dim();
    match mode {
        PoolMode::Mean => {
            let mut acc = vec![0.0f64; dim];
            for row in bag.iter_rows() {
                for (a, &v) in acc.iter_mut().zip(row) {
                    *a += v as f64;
                }
            }
            let n = bag.rows() as f64;
            acc.into_iter().map(|a| (a / n) as f32).collect()
        }
        PoolMode::Max => {
            let mut acc = bag.row(0).to_vec();
            for row in bag.iter_rows().skip(1) {
                for (a, &v) in acc.iter_mut().zip(row) {
                    *a = a.max(v);
                }
            }
            acc
        }
    }
}

/// Pools every bag into one row of a matrix.
pub fn pool_bags(bags: &[&EmbeddingBag], mode: PoolMode) -> Result<DenseMatrix> {
    let rows: Vec<Vec<f32>> = bags.iter().map(|b| pool_bag(b, mode)).collect();
    if rows.is_empty() {
        return Err(Error::EmptyInput("bags to pool"));
    }
    DenseMatrix::from_rows(&rows)
}

#[cfg(test)]
#[allow(clippy::approx_constant)]
mod tests {
    use super::*;

    fn bag(rows: &[&[f32]]) -> EmbeddingBag {
        EmbeddingBag::from_rows(rows).unwrap()
    }

    fn unit(rows: &[&[f32]]) -> EmbeddingBag {
        bag(rows).l2_normalize().unwrap()
    }

    #[test]
    fn normalize_three_four_five() {
        let b = bag(&[&[3.0, 4.0], &[1.0, 0.0]]);
        let n = b.l2_normalize().unwrap();
        assert!(n.is_normalized());
        assert!((n.row(0)[0] - 0.6).abs() < 1e-7);
        assert!((n.row(0)[1] - 0.8).abs() < 1e-7);
        assert_eq!(n.row(1), &[1.0, 0.0]);
        // input untouched
        assert_eq!(b.row(0), &[3.0, 4.0]);
        assert!(!b.is_normalized());
        n.check_normalized().unwrap();
    }

    #[test]
    fn normalize_zero_row_fails() {
        let b = bag(&[&[0.0, 0.0]]);
        assert!(matches!(b.l2_normalize(), Err(Error::ZeroVectorRow(0))));
        let b = bag(&[&[1.0, 0.0], &[0.0, 0.0]]);
        assert!(matches!(b.l2_normalize(), Err(Error::ZeroVectorRow(1))));
    }

    #[test]
    fn bag_rejects_empty_shapes() {
        assert!(EmbeddingBag::new(0, 2, vec![]).is_err());
        assert!(EmbeddingBag::new(1, 0, vec![]).is_err());
        assert!(EmbeddingBag::new(1, 2, vec![1.0]).is_err());
    }

    #[test]
    fn score_map_examples() {
        let q = unit(&[&[1.0, 0.0]]);
        let m = cosine_score_map(&q, &unit(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap();
        assert_eq!(m.data(), &[0.0, 1.0]);

        let m = cosine_score_map(&q, &unit(&[&[0.6, 0.8], &[0.8, 0.6]])).unwrap();
        assert!((m.get(0, 0) - 0.6).abs() < 1e-6);
        assert!((m.get(0, 1) - 0.8).abs() < 1e-6);

        let q2 = unit(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let m = cosine_score_map(&q2, &unit(&[&[1.0, 0.0]])).unwrap();
        assert_eq!((m.rows(), m.cols()), (2, 1));
        assert_eq!(m.data(), &[1.0, 0.0]);
    }

    #[test]
    fn score_map_errors() {
        let q = unit(&[&[1.0, 0.0]]);
        let u3 = unit(&[&[1.0, 0.0, 0.0]]);
        assert!(matches!(
            cosine_score_map(&q, &u3),
            Err(Error::DimMismatch { .. })
        ));
        let raw = bag(&[&[1.0, 0.0]]);
        assert!(matches!(cosine_score_map(&q, &raw), Err(Error::NotNormalized)));
        assert!(matches!(targeted_sim(&raw, &q), Err(Error::NotNormalized)));
    }

    #[test]
    fn targeted_sim_examples() {
        let q = unit(&[&[1.0, 0.0]]);
        assert_eq!(targeted_sim(&q, &unit(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap(), 1.0);
        let s = targeted_sim(&q, &unit(&[&[0.6, 0.8], &[0.8, 0.6]])).unwrap();
        assert!((s - 0.8).abs() < 1e-6);
        let q2 = unit(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let s = targeted_sim(&q2, &unit(&[&[0.7071, 0.7071]])).unwrap();
        assert!((s - 0.7071).abs() < 1e-4);
    }

    fn sims_one_and_minus_half() -> (Vec<EmbeddingBag>, Vec<EmbeddingBag>) {
        // cos(u0) = 1, cos(u1) = -0.5 against the single query RoI.
        let q = vec![bag(&[&[1.0, 0.0]])];
        let u = vec![bag(&[&[2.0, 0.0]]), bag(&[&[-0.5, 0.75f32.sqrt()]])];
        (q, u)
    }

    #[test]
    fn query_kernel_modes() {
        let (q, u) = sims_one_and_minus_half();
        let k = build_query_kernel(&q, &u, NonnegMode::ClampZero).unwrap();
        assert_eq!(k.kind(), KernelKind::QueryByUnlabeled);
        assert_eq!((k.n_rows(), k.n_cols()), (1, 2));
        assert_eq!(k.values(), &[1.0, 0.0]);

        let k = build_query_kernel(&q, &u, NonnegMode::ShiftRescale).unwrap();
        assert!((k.get(0, 0) - 1.0).abs() < 1e-6);
        assert!((k.get(0, 1) - 0.25).abs() < 1e-6);

        let k = build_query_kernel(&q, &u, NonnegMode::Raw).unwrap();
        assert!((k.get(0, 1) + 0.5).abs() < 1e-6);
    }

    #[test]
    fn query_kernel_errors() {
        let (q, u) = sims_one_and_minus_half();
        assert!(matches!(
            build_query_kernel(&[], &u, NonnegMode::ClampZero),
            Err(Error::EmptyInput(_))
        ));
        assert!(matches!(
            build_query_kernel(&q, &[], NonnegMode::ClampZero),
            Err(Error::EmptyInput(_))
        ));
        let odd = vec![bag(&[&[1.0, 0.0, 0.0]])];
        assert!(matches!(
            build_query_kernel(&q, &odd, NonnegMode::ClampZero),
            Err(Error::DimMismatch { .. })
        ));
    }

    #[test]
    fn pairwise_kernel_examples() {
        let v = DenseMatrix::from_rows(&[[1.0f32, 0.0], [1.0, 0.0]]).unwrap();
        let k = build_pairwise_kernel(&v, NonnegMode::ClampZero).unwrap();
        assert_eq!(k.values(), &[1.0, 1.0, 1.0, 1.0]);

        let v = DenseMatrix::from_rows(&[[1.0f32, 0.0], [0.0, 1.0]]).unwrap();
        let k = build_pairwise_kernel(&v, NonnegMode::ClampZero).unwrap();
        assert_eq!(k.values(), &[1.0, 0.0, 0.0, 1.0]);

        let v = DenseMatrix::from_rows(&[[1.0f32, 0.0], [0.6, 0.8]]).unwrap();
        let k = build_pairwise_kernel(&v, NonnegMode::Raw).unwrap();
        assert_eq!(k.kind(), KernelKind::PairwiseUnlabeled);
        assert_eq!(k.get(0, 0), 1.0);
        assert_eq!(k.get(1, 1), 1.0);
        assert!((k.get(0, 1) - 0.6).abs() < 1e-6);
        assert_eq!(k.get(0, 1), k.get(1, 0));

        let v = DenseMatrix::from_rows(&[[1.0f32, 0.0], [0.0, 0.0]]).unwrap();
        assert!(matches!(
            build_pairwise_kernel(&v, NonnegMode::Raw),
            Err(Error::ZeroVectorRow(1))
        ));
    }

    #[test]
    fn kernel_validation() {
        assert!(SimilarityKernel::new(
            KernelKind::QueryByUnlabeled,
            NonnegMode::ClampZero,
            1,
            2,
            vec![0.5, -0.2]
        )
        .is_err());
        assert!(SimilarityKernel::new(
            KernelKind::PairwiseUnlabeled,
            NonnegMode::Raw,
            2,
            2,
            vec![1.0, 0.5, 0.1, 1.0]
        )
        .is_err());
        assert!(SimilarityKernel::new(
            KernelKind::PairwiseUnlabeled,
            NonnegMode::Raw,
            1,
            2,
            vec![1.0, 0.5]
        )
        .is_err());
    }

    #[test]
    fn restrict_pairwise() {
        let v = DenseMatrix::from_rows(&[[1.0f32, 0.0], [0.6, 0.8], [0.0, 1.0]]).unwrap();
        let k = build_pairwise_kernel(&v, NonnegMode::ClampZero).unwrap();
        let r = k.restrict(&[2, 0]).unwrap();
        assert_eq!(r.n_rows(), 2);
        assert_eq!(r.get(0, 0), 1.0);
        assert_eq!(r.get(0, 1), k.get(2, 0));
    }

    #[test]
    fn pooling() {
        let b = bag(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert_eq!(pool_bag(&b, PoolMode::Mean), vec![0.5, 0.5]);
        assert_eq!(pool_bag(&b, PoolMode::Max), vec![1.0, 1.0]);
        let single = bag(&[&[0.3, -2.0]]);
        assert_eq!(pool_bag(&single, PoolMode::Mean), vec![0.3, -2.0]);
        assert_eq!(pool_bag(&single, PoolMode::Max), vec![0.3, -2.0]);
    }
}
