//! Acquisition functions: the targeted SMI selectors and every baseline,
//! behind [`acquire`].
//!
//! All selectors work in local pool coordinates: index `i` refers to the
//! `i`-th unlabeled image handed in, never to a global image id.

use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::maximizer::{maximize, Maximizer, SelectionResult};
use crate::objectives::{ObjectiveKind, ObjectiveState};
use crate::similarity::{
    build_pairwise_kernel, build_query_kernel_refs, pool_bags, DenseMatrix, EmbeddingBag,
    KernelKind, NonnegMode, PoolMode, SimilarityKernel,
};

/// Allowed deviation of a probability row sum from 1.
pub const ROW_SUM_TOLERANCE: f64 = 1e-4;

/// Per-proposal class probabilities for one image, `P x C` row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalScores {
    proposals: usize,
    classes: usize,
    probs: Vec<f64>,
}

impl ProposalScores {
    pub fn new(proposals: usize, classes: usize, probs: Vec<f64>) -> Result<Self> {
        if proposals == 0 || classes == 0 {
            return Err(Error::InvalidScores(format!(
                "shape {proposals}x{classes} is empty"
            )));
        }
        if probs.len() != proposals * classes {
            return Err(Error::DimMismatch {
                expected: proposals * classes,
                found: probs.len(),
            });
        }
        for (r, row) in probs.chunks_exact(classes).enumerate() {
            if let Some(v) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::InvalidScores(format!(
                    "proposal {r} has probability {v} outside [0, 1]"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::InvalidScores(format!(
                    "proposal {r} sums to {sum}"
                )));
            }
        }
        Ok(Self {
            proposals,
            classes,
            probs,
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let classes = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut probs = Vec::with_capacity(rows.len() * classes);
        for r in rows {
            let r = r.as_ref();
            if r.len() != classes {
                return Err(Error::DimMismatch {
                    expected: classes,
                    found: r.len(),
                });
            }
            probs.extend_from_slice(r);
        }
        Self::new(rows.len(), classes, probs)
    }

    pub fn proposals(&self) -> usize {
        self.proposals
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn row(&self, p: usize) -> &[f64] {
        &self.probs[p * self.classes..(p + 1) * self.classes]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.probs.chunks_exact(self.classes)
    }

    /// Mean distribution over proposals.
    pub fn pooled(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.classes];
        for row in self.iter_rows() {
            for (a, &v) in acc.iter_mut().zip(row) {
                *a += v;
            }
        }
        let n = self.proposals as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }
}

/// Binary entropy in nats, with `0 log 0 = 0`.
pub fn binary_entropy(p: f64) -> f64 {
    let term = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.ln() };
    term(p) + term(1.0 - p)
}

/// Mean over proposals of the largest per-class binary entropy.
pub fn entropy_score(scores: &ProposalScores) -> f64 {
    let total: f64 = scores
        .iter_rows()
        .map(|row| row.iter().map(|&p| binary_entropy(p)).fold(0.0, f64::max))
        .sum();
    total / scores.proposals() as f64
}

/// Mean over proposals of the smallest class probability, or of
/// `1 - max` when `conventional` is set.
pub fn least_conf_score(scores: &ProposalScores, conventional: bool) -> f64 {
    let total: f64 = scores
        .iter_rows()
        .map(|row| {
            if conventional {
                1.0 - row.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            } else {
                row.iter().copied().fold(f64::INFINITY, f64::min)
            }
        })
        .sum();
    total / scores.proposals() as f64
}

/// Mean over proposals of top-1 minus top-2 probability.
pub fn margin_score(scores: &ProposalScores) -> Result<f64> {
    if scores.classes() < 2 {
        return Err(Error::TooFewClasses(scores.classes()));
    }
    let total: f64 = scores
        .iter_rows()
        .map(|row| {
            let (mut first, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
            for &p in row {
                if p > first {
                    second = first;
                    first = p;
                } else if p > second {
                    second = p;
                }
            }
            first - second
        })
        .sum();
    Ok(total / scores.proposals() as f64)
}

/// Indices of the `count` largest (or smallest) values; ties go to the lower
/// index.
pub fn rank_indices(values: &[f64], count: usize, largest: bool) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        let c = values[a].total_cmp(&values[b]);
        let c = if largest { c.reverse() } else { c };
        c.then(a.cmp(&b))
    });
    order.truncate(count);
    order
}

fn check_pool(budget: usize, pool: usize) -> Result<()> {
    if budget == 0 {
        return Err(Error::ZeroBudget);
    }
    if budget > pool {
        return Err(Error::BudgetExceedsPool { budget, pool });
    }
    Ok(())
}

pub fn entropy_select(scores: &[ProposalScores], budget: usize) -> Result<Vec<usize>> {
    check_pool(budget, scores.len())?;
    let s: Vec<f64> = scores.par_iter().map(entropy_score).collect();
    Ok(rank_indices(&s, budget, true))
}

/// As printed, keeps the `budget` images with the smallest minimum class
/// probability. The conventional variant keeps the largest `1 - max`.
pub fn least_conf_select(
    scores: &[ProposalScores],
    budget: usize,
    conventional: bool,
) -> Result<Vec<usize>> {
    check_pool(budget, scores.len())?;
    let s: Vec<f64> = scores
        .par_iter()
        .map(|s| least_conf_score(s, conventional))
        .collect();
    Ok(rank_indices(&s, budget, conventional))
}

pub fn margin_select(scores: &[ProposalScores], budget: usize) -> Result<Vec<usize>> {
    check_pool(budget, scores.len())?;
    let s: Vec<f64> = scores.par_iter().map(margin_score).collect::<Result<_>>()?;
    Ok(rank_indices(&s, budget, false))
}

fn entropy_shortlist(scores: &[ProposalScores], budget: usize, k_mult: usize) -> Result<Vec<usize>> {
    check_pool(budget, scores.len())?;
    if k_mult == 0 {
        return Err(Error::InvalidConfig("k_mult must be at least 1".into()));
    }
    let k = (k_mult * budget).min(scores.len());
    entropy_select(scores, k)
}

/// Entropy shortlist of `k_mult * budget` images, reranked by the best
/// query match `max_q S[q][u]`. Ties keep shortlist (entropy) order.
pub fn targeted_entropy_select(
    scores: &[ProposalScores],
    query_kernel: &SimilarityKernel,
    budget: usize,
    k_mult: usize,
) -> Result<Vec<usize>> {
    if query_kernel.kind() != KernelKind::QueryByUnlabeled {
        return Err(Error::InvalidKernel("expected a query-by-unlabeled kernel".into()));
    }
    if query_kernel.n_cols() != scores.len() {
        return Err(Error::DimMismatch {
            expected: scores.len(),
            found: query_kernel.n_cols(),
        });
    }
    let shortlist = entropy_shortlist(scores, budget, k_mult)?;
    let best_match = |u: usize| {
        (0..query_kernel.n_rows())
            .map(|q| query_kernel.get(q, u))
            .fold(f32::NEG_INFINITY, f32::max)
    };
    let mut ranked: Vec<(usize, f32)> = shortlist.iter().map(|&u| (u, best_match(u))).collect();
    // stable sort keeps entropy rank among equal matches
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    Ok(ranked.into_iter().take(budget).map(|(u, _)| u).collect())
}

/// Facility-location greedy over an entropy shortlist. `kernel_for` builds
/// the pairwise kernel for the (ascending) shortlist indices it is given.
pub fn fass_select_with<F>(
    scores: &[ProposalScores],
    budget: usize,
    k_mult: usize,
    maximizer: Maximizer,
    kernel_for: F,
) -> Result<Vec<usize>>
where
    F: FnOnce(&[usize]) -> Result<SimilarityKernel>,
{
    let mut shortlist = entropy_shortlist(scores, budget, k_mult)?;
    shortlist.sort_unstable();
    let kernel = kernel_for(&shortlist)?;
    if kernel.kind() != KernelKind::PairwiseUnlabeled || kernel.n_cols() != shortlist.len() {
        return Err(Error::InvalidKernel(
            "shortlist kernel must be pairwise over the shortlist".into(),
        ));
    }
    let mut state = ObjectiveState::new(ObjectiveKind::FacilityLocation, &kernel)?;
    let picked = maximize(&mut state, budget, maximizer)?;
    Ok(picked.indices.into_iter().map(|i| shortlist[i]).collect())
}

/// FASS with a precomputed pairwise kernel over the whole pool.
pub fn fass_select(
    scores: &[ProposalScores],
    pairwise_kernel: &SimilarityKernel,
    budget: usize,
    k_mult: usize,
    maximizer: Maximizer,
) -> Result<Vec<usize>> {
    if pairwise_kernel.n_cols() != scores.len() {
        return Err(Error::DimMismatch {
            expected: scores.len(),
            found: pairwise_kernel.n_cols(),
        });
    }
    fass_select_with(scores, budget, k_mult, maximizer, |idx| pairwise_kernel.restrict(idx))
}

fn sq_dist(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum()
}

/// Greedy k-center (farthest-first) from the labeled points. With no labeled
/// points every distance is infinite and the first pick is index 0.
pub fn coreset_select(
    unlabeled: &DenseMatrix,
    labeled: &DenseMatrix,
    budget: usize,
) -> Result<Vec<usize>> {
    check_pool(budget, unlabeled.rows())?;
    if labeled.rows() > 0 && labeled.cols() != unlabeled.cols() {
        return Err(Error::DimMismatch {
            expected: unlabeled.cols(),
            found: labeled.cols(),
        });
    }
    let mut nearest: Vec<f64> = (0..unlabeled.rows())
        .into_par_iter()
        .map(|i| {
            let u = unlabeled.row(i);
            labeled
                .iter_rows()
                .map(|l| sq_dist(u, l))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();

    let mut picked = Vec::with_capacity(budget);
    for _ in 0..budget {
        let mut best: Option<usize> = None;
        for (i, &d) in nearest.iter().enumerate() {
            if d.is_nan() {
                continue;
            }
            if best.is_none_or(|b| d > nearest[b]) {
                best = Some(i);
            }
        }
        let Some(c) = best else { break };
        picked.push(c);
        let center = unlabeled.row(c).to_vec();
        nearest.par_iter_mut().enumerate().for_each(|(i, d)| {
            if !d.is_nan() {
                *d = d.min(sq_dist(unlabeled.row(i), &center));
            }
        });
        // NaN marks a selected point
        nearest[c] = f64::NAN;
    }
    Ok(picked)
}

/// `(p - e_argmax) ⊗ x`, flattened class-major.
pub fn gradient_embedding(pooled: &[f64], features: &[f32]) -> Vec<f32> {
    let top = pooled
        .iter()
        .enumerate()
        .fold(0, |best, (c, &p)| if p > pooled[best] { c } else { best });
    let mut out = Vec::with_capacity(pooled.len() * features.len());
    for (c, &p) in pooled.iter().enumerate() {
        let g = p - if c == top { 1.0 } else { 0.0 };
        out.extend(features.iter().map(|&x| (g * x as f64) as f32));
    }
    out
}

/// k-means++ seeding over gradient embeddings. If every remaining point sits
/// on a chosen center, the next one is drawn uniformly from the rest.
pub fn badge_select(embeddings: &DenseMatrix, budget: usize, seed: u64) -> Result<Vec<usize>> {
    let n = embeddings.rows();
    if n == 0 {
        return Err(Error::EmptyInput("gradient embeddings"));
    }
    check_pool(budget, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = vec![false; n];
    let mut d2 = vec![f64::INFINITY; n];
    let mut picked = Vec::with_capacity(budget);

    let mut next = rng.random_range(0..n);
    loop {
        chosen[next] = true;
        picked.push(next);
        if picked.len() == budget {
            break;
        }
        let center = embeddings.row(next).to_vec();
        d2.par_iter_mut().enumerate().for_each(|(i, d)| {
            *d = if chosen[i] {
                0.0
            } else {
                d.min(sq_dist(embeddings.row(i), &center))
            };
        });
        next = if d2.iter().any(|&d| d > 0.0) {
            WeightedIndex::new(&d2)
                .map_err(|e| Error::InvalidConfig(format!("D2 weights: {e}")))?
                .sample(&mut rng)
        } else {
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[rng.random_range(0..free.len())]
        };
    }
    Ok(picked)
}

/// Uniform sample without replacement.
pub fn random_select(pool: usize, budget: usize, seed: u64) -> Result<Vec<usize>> {
    check_pool(budget, pool)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(rand::seq::index::sample(&mut rng, pool, budget).into_vec())
}

/// Greedy FLMI or GCMI maximization over a query kernel.
pub fn smi_select(
    query_kernel: &SimilarityKernel,
    kind: ObjectiveKind,
    budget: usize,
    maximizer: Maximizer,
) -> Result<SelectionResult> {
    if !matches!(kind, ObjectiveKind::Flmi | ObjectiveKind::Gcmi) {
        return Err(Error::InvalidConfig(format!(
            "{} is not a mutual-information objective",
            kind.name()
        )));
    }
    if !query_kernel.nonneg_mode().is_nonnegative() {
        return Err(Error::NonnegativeKernelRequired(kind.name()));
    }
    let mut state = ObjectiveState::new(kind, query_kernel)?;
    maximize(&mut state, budget, maximizer)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AcquisitionMethod {
    #[serde(rename = "FLMI")]
    Flmi,
    #[serde(rename = "GCMI")]
    Gcmi,
    #[serde(rename = "ENTROPY")]
    Entropy,
    #[serde(rename = "TARGETED-ENTROPY")]
    TargetedEntropy,
    #[serde(rename = "LEAST-CONF")]
    LeastConf,
    #[serde(rename = "MARGIN")]
    Margin,
    #[serde(rename = "FASS")]
    Fass,
    #[serde(rename = "CORESET")]
    Coreset,
    #[serde(rename = "BADGE")]
    Badge,
    #[serde(rename = "RANDOM")]
    Random,
}

impl AcquisitionMethod {
    pub const ALL: [AcquisitionMethod; 10] = [
        Self::Flmi,
        Self::Gcmi,
        Self::Entropy,
        Self::TargetedEntropy,
        Self::LeastConf,
        Self::Margin,
        Self::Fass,
        Self::Coreset,
        Self::Badge,
        Self::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Flmi => "FLMI",
            Self::Gcmi => "GCMI",
            Self::Entropy => "ENTROPY",
            Self::TargetedEntropy => "TARGETED-ENTROPY",
            Self::LeastConf => "LEAST-CONF",
            Self::Margin => "MARGIN",
            Self::Fass => "FASS",
            Self::Coreset => "CORESET",
            Self::Badge => "BADGE",
            Self::Random => "RANDOM",
        }
    }

    pub fn needs_scores(self) -> bool {
        matches!(
            self,
            Self::Entropy
                | Self::TargetedEntropy
                | Self::LeastConf
                | Self::Margin
                | Self::Fass
                | Self::Badge
        )
    }

    pub fn needs_query(self) -> bool {
        matches!(self, Self::Flmi | Self::Gcmi | Self::TargetedEntropy)
    }

    /// Output depends on the request seed.
    pub fn is_randomized(self) -> bool {
        matches!(self, Self::Badge | Self::Random)
    }
}

impl fmt::Display for AcquisitionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AcquisitionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_uppercase().replace('_', "-");
        Self::ALL
            .into_iter()
            .find(|m| m.name() == key)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GreedyVariant {
    Naive,
    #[default]
    Lazy,
    Stochastic,
}

impl FromStr for GreedyVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "naive" => Ok(Self::Naive),
            "lazy" => Ok(Self::Lazy),
            "stochastic" => Ok(Self::Stochastic),
            _ => Err(Error::InvalidConfig(format!("unknown maximizer {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcquisitionRequest {
    pub method: AcquisitionMethod,
    pub budget: usize,
    /// Shortlist size multiplier for targeted entropy and FASS.
    pub k_mult: usize,
    pub epsilon: f64,
    pub seed: u64,
    pub nonneg_mode: NonnegMode,
    /// Graph-cut diversity weight.
    pub lambda: f64,
    pub maximizer: GreedyVariant,
    /// Bag pooling for the image-level vectors of FASS, coreset and BADGE.
    pub pool_mode: PoolMode,
    pub leastconf_conventional: bool,
}

impl Default for AcquisitionRequest {
    fn default() -> Self {
        Self {
            method: AcquisitionMethod::Flmi,
            budget: 1,
            k_mult: 4,
            epsilon: Maximizer::DEFAULT_EPSILON,
            seed: 0,
            nonneg_mode: NonnegMode::ClampZero,
            lambda: 1.0,
            maximizer: GreedyVariant::Lazy,
            pool_mode: PoolMode::Mean,
            leastconf_conventional: false,
        }
    }
}

impl AcquisitionRequest {
    pub fn new(method: AcquisitionMethod, budget: usize) -> Self {
        Self {
            method,
            budget,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::ZeroBudget);
        }
        if matches!(
            self.method,
            AcquisitionMethod::TargetedEntropy | AcquisitionMethod::Fass
        ) && self.k_mult < 2
        {
            return Err(Error::InvalidConfig(format!(
                "k_mult must be at least 2, got {}",
                self.k_mult
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "lambda must be finite and nonnegative, got {}",
                self.lambda
            )));
        }
        if self.method.needs_query() && !self.nonneg_mode.is_nonnegative() {
            return Err(Error::NonnegativeKernelRequired(self.method.name()));
        }
        Ok(())
    }

    pub fn maximizer(&self) -> Maximizer {
        match self.maximizer {
            GreedyVariant::Naive => Maximizer::Naive,
            GreedyVariant::Lazy => Maximizer::Lazy,
            GreedyVariant::Stochastic => Maximizer::Stochastic {
                epsilon: self.epsilon,
                seed: self.seed,
            },
        }
    }
}

/// Everything a method may need about the current pool.
#[derive(Debug, Clone, Copy)]
pub struct PoolInputs<'a> {
    pub unlabeled: &'a [&'a EmbeddingBag],
    pub labeled: &'a [&'a EmbeddingBag],
    pub query: &'a [&'a EmbeddingBag],
    /// One entry per unlabeled image.
    pub scores: Option<&'a [ProposalScores]>,
    /// Overrides building the query kernel from `query`.
    pub query_kernel: Option<&'a SimilarityKernel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionOutcome {
    /// Local indices into the unlabeled pool, in pick order.
    pub indices: Vec<usize>,
    /// Set for the SMI methods only.
    pub objective_value: Option<f64>,
    pub evaluations: Option<u64>,
}

impl AcquisitionOutcome {
    fn plain(indices: Vec<usize>) -> Self {
        Self {
            indices,
            objective_value: None,
            evaluations: None,
        }
    }
}

/// Runs one acquisition step. The budget is clamped to the pool size, so the
/// outcome always holds `min(budget, |U|)` distinct indices.
pub fn acquire(req: &AcquisitionRequest, inputs: &PoolInputs<'_>) -> Result<AcquisitionOutcome> {
    req.validate()?;
    let pool = inputs.unlabeled.len();
    let budget = req.budget.min(pool);
    if budget == 0 {
        return Ok(AcquisitionOutcome::plain(Vec::new()));
    }
    let scores = || -> Result<&[ProposalScores]> {
        let s = inputs.scores.ok_or(Error::MissingScores(req.method.name()))?;
        if s.len() != pool {
            return Err(Error::DimMismatch {
                expected: pool,
                found: s.len(),
            });
        }
        Ok(s)
    };
    let built;
    let kernel: Option<&SimilarityKernel> = if req.method.needs_query() {
        match inputs.query_kernel {
            Some(k) => Some(k),
            None => {
                if inputs.query.is_empty() {
                    return Err(Error::EmptyInput("query set"));
                }
                built = build_query_kernel_refs(inputs.query, inputs.unlabeled, req.nonneg_mode)?;
                Some(&built)
            }
        }
    } else {
        None
    };

    let indices = match req.method {
        AcquisitionMethod::Flmi | AcquisitionMethod::Gcmi => {
            let kind = if req.method == AcquisitionMethod::Flmi {
                ObjectiveKind::Flmi
            } else {
                ObjectiveKind::Gcmi
            };
            let r = smi_select(kernel.expect("query kernel"), kind, budget, req.maximizer())?;
            return Ok(AcquisitionOutcome {
                indices: r.indices,
                objective_value: Some(r.objective_value),
                evaluations: Some(r.evaluations),
            });
        }
        AcquisitionMethod::Entropy => entropy_select(scores()?, budget)?,
        AcquisitionMethod::LeastConf => {
            least_conf_select(scores()?, budget, req.leastconf_conventional)?
        }
        AcquisitionMethod::Margin => margin_select(scores()?, budget)?,
        AcquisitionMethod::TargetedEntropy => targeted_entropy_select(
            scores()?,
            kernel.expect("query kernel"),
            budget,
            req.k_mult,
        )?,
        AcquisitionMethod::Fass => {
            let vectors = pool_bags(inputs.unlabeled, req.pool_mode)?;
            fass_select_with(scores()?, budget, req.k_mult, req.maximizer(), |idx| {
                let rows: Vec<&[f32]> = idx.iter().map(|&i| vectors.row(i)).collect();
                build_pairwise_kernel(&DenseMatrix::from_rows(&rows)?, NonnegMode::ClampZero)
            })?
        }
        AcquisitionMethod::Coreset => {
            let u = pool_bags(inputs.unlabeled, req.pool_mode)?;
            let l = if inputs.labeled.is_empty() {
                DenseMatrix::new(0, u.cols(), Vec::new())?
            } else {
                pool_bags(inputs.labeled, req.pool_mode)?
            };
            coreset_select(&u, &l, budget)?
        }
        AcquisitionMethod::Badge => {
            let s = scores()?;
            let vectors = pool_bags(inputs.unlabeled, req.pool_mode)?;
            let rows: Vec<Vec<f32>> = s
                .par_iter()
                .enumerate()
                .map(|(i, sc)| gradient_embedding(&sc.pooled(), vectors.row(i)))
                .collect();
            badge_select(&DenseMatrix::from_rows(&rows)?, budget, req.seed)?
        }
        AcquisitionMethod::Random => random_select(pool, budget, req.seed)?,
    };
    Ok(AcquisitionOutcome::plain(indices))
}

#[cfg(test)]
#[allow(clippy::approx_constant)]
mod tests {
    use super::*;

    fn one(row: &[f64]) -> ProposalScores {
        ProposalScores::from_rows(&[row]).unwrap()
    }

    #[test]
    fn score_validation() {
        assert!(ProposalScores::from_rows(&[[0.5, 0.6]]).is_err());
        assert!(ProposalScores::from_rows(&[[1.2, -0.2]]).is_err());
        assert!(ProposalScores::from_rows(&[[0.5, 0.50005]]).is_ok());
        assert!(ProposalScores::new(0, 2, vec![]).is_err());
    }

    #[test]
    fn entropy_examples() {
        assert!((entropy_score(&one(&[0.5, 0.5])) - 0.6931).abs() < 1e-3);
        assert_eq!(entropy_score(&one(&[1.0, 0.0])), 0.0);
        let two = ProposalScores::from_rows(&[[0.5, 0.5], [1.0, 0.0]]).unwrap();
        assert!((entropy_score(&two) - 0.3466).abs() < 1e-3);
    }

    #[test]
    fn least_conf_examples() {
        assert!((least_conf_score(&one(&[0.7, 0.2, 0.1]), false) - 0.1).abs() < 1e-12);
        let third = 1.0 / 3.0;
        assert!((least_conf_score(&one(&[third; 3]), false) - 0.3333).abs() < 1e-3);
        let two = ProposalScores::from_rows(&[[0.8, 0.1, 0.1], [0.4, 0.3, 0.3]]).unwrap();
        assert!((least_conf_score(&two, false) - 0.2).abs() < 1e-12);
        assert!((least_conf_score(&one(&[0.7, 0.2, 0.1]), true) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn margin_examples() {
        assert!((margin_score(&one(&[0.6, 0.3, 0.1])).unwrap() - 0.3).abs() < 1e-12);
        assert_eq!(margin_score(&one(&[0.25; 4])).unwrap(), 0.0);
        let two = ProposalScores::from_rows(&[[0.6, 0.3, 0.1], [0.4, 0.3, 0.3]]).unwrap();
        assert!((margin_score(&two).unwrap() - 0.2).abs() < 1e-12);
        assert!(matches!(margin_score(&one(&[1.0])), Err(Error::TooFewClasses(1))));
    }

    #[test]
    fn least_conf_selects_bottom_as_printed() {
        let s = vec![one(&[0.7, 0.2, 0.1]), one(&[0.4, 0.3, 0.3]), one(&[0.9, 0.05, 0.05])];
        assert_eq!(least_conf_select(&s, 1, false).unwrap(), vec![2]);
        assert_eq!(least_conf_select(&s, 1, true).unwrap(), vec![1]);
    }

    #[test]
    fn gradient_embedding_examples() {
        assert_eq!(gradient_embedding(&[0.5, 0.5], &[1.0, 0.0]), vec![-0.5, 0.0, 0.5, 0.0]);
        assert!(gradient_embedding(&[0.0, 1.0], &[3.0, 2.0])
            .iter()
            .all(|&v| v == 0.0));
        let norm = |v: Vec<f32>| v.iter().map(|x| x * x).sum::<f32>();
        assert!(
            norm(gradient_embedding(&[0.5, 0.5], &[1.0, 1.0]))
                > norm(gradient_embedding(&[0.9, 0.1], &[1.0, 1.0]))
        );
    }

    #[test]
    fn coreset_examples() {
        let l = DenseMatrix::from_rows(&[[0.0f32]]).unwrap();
        let u = DenseMatrix::from_rows(&[[1.0f32], [5.0]]).unwrap();
        assert_eq!(coreset_select(&u, &l, 1).unwrap(), vec![1]);

        let u = DenseMatrix::from_rows(&[[1.0f32], [2.0]]).unwrap();
        assert_eq!(coreset_select(&u, &l, 2).unwrap(), vec![1, 0]);

        let empty = DenseMatrix::new(0, 1, vec![]).unwrap();
        assert_eq!(coreset_select(&u, &empty, 1).unwrap(), vec![0]);

        let bad = DenseMatrix::from_rows(&[[0.0f32, 0.0]]).unwrap();
        assert!(matches!(coreset_select(&u, &bad, 1), Err(Error::DimMismatch { .. })));
    }

    #[test]
    fn random_examples() {
        let mut all = random_select(7, 7, 3).unwrap();
        all.sort_unstable();
        assert_eq!(all, (0..7).collect::<Vec<_>>());
        assert_eq!(random_select(100, 5, 9).unwrap(), random_select(100, 5, 9).unwrap());
        assert!(matches!(
            random_select(3, 4, 0),
            Err(Error::BudgetExceedsPool { budget: 4, pool: 3 })
        ));
    }

    #[test]
    fn badge_exhausts_and_repeats() {
        let e = DenseMatrix::from_rows(&[[0.0f32, 0.0], [0.0, 0.0], [1.0, 0.0]]).unwrap();
        let mut all = badge_select(&e, 3, 1).unwrap();
        assert_eq!(badge_select(&e, 3, 1).unwrap(), all);
        all.sort_unstable();
        assert_eq!(all, vec![0, 1, 2]);
    }

    #[test]
    fn method_names_round_trip() {
        for m in AcquisitionMethod::ALL {
            assert_eq!(m.name().parse::<AcquisitionMethod>().unwrap(), m);
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(json, format!("\"{}\"", m.name()));
        }
        assert_eq!(
            "targeted_entropy".parse::<AcquisitionMethod>().unwrap(),
            AcquisitionMethod::TargetedEntropy
        );
    }

    #[test]
    fn request_validation() {
        let mut r = AcquisitionRequest::new(AcquisitionMethod::Fass, 5);
        assert!(r.validate().is_ok());
        r.k_mult = 1;
        assert!(r.validate().is_err());
        let mut r = AcquisitionRequest::new(AcquisitionMethod::Gcmi, 5);
        r.nonneg_mode = NonnegMode::Raw;
        assert!(matches!(r.validate(), Err(Error::NonnegativeKernelRequired(_))));
        assert!(matches!(
            AcquisitionRequest::new(AcquisitionMethod::Random, 0).validate(),
            Err(Error::ZeroBudget)
        ));
        let bad: std::result::Result<AcquisitionRequest, _> =
            serde_json::from_str(r#"{"method":"GCMI","budget":3,"bogus":1}"#);
        assert!(bad.is_err());
    }
}
