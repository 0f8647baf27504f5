//! Facility location, graph cut, and their mutual-information variants.
//!
//! | objective | kernel             | value of `A`                                   |
//! |-----------|--------------------|------------------------------------------------|
//! | FL        | pairwise `U x U`   | `sum_{i in U} max_{j in A} S_ij`               |
//! | GC(l)     | pairwise `U x U`   | `sum_{i in A, j in U} S_ij - l sum_{i,j in A} S_ij` |
//! | FLMI      | query `Q x U`      | `sum_{q} max_{j in A} S_qj + sum_{j in A} max_q S_qj` |
//! | GCMI      | query `Q x U`      | `2 sum_{j in A} sum_q S_qj`                    |
//!
//! The maximum over an empty set is taken as 0, so every objective is 0 on the
//! empty set. FL and FLMI reject `Raw` kernels for that reason.
//!
//! [`ObjectiveState`] memoizes per-element aggregates so a marginal gain costs
//! `O(|Q|)` for the mutual-information variants and `O(|U|)` for FL.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::similarity::{KernelKind, SimilarityKernel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ObjectiveKind {
    FacilityLocation,
    GraphCut { lambda: f64 },
    Flmi,
    Gcmi,
}

impl ObjectiveKind {
    /// Graph cut with the default `lambda = 1`.
    pub const GRAPH_CUT: ObjectiveKind = ObjectiveKind::GraphCut { lambda: 1.0 };

    pub fn name(self) -> &'static str {
        match self {
            ObjectiveKind::FacilityLocation => "FL",
            ObjectiveKind::GraphCut { .. } => "GC",
            ObjectiveKind::Flmi => "FLMI",
            ObjectiveKind::Gcmi => "GCMI",
        }
    }

    pub fn required_kernel(self) -> KernelKind {
        match self {
            ObjectiveKind::FacilityLocation | ObjectiveKind::GraphCut { .. } => {
                KernelKind::PairwiseUnlabeled
            }
            ObjectiveKind::Flmi | ObjectiveKind::Gcmi => KernelKind::QueryByUnlabeled,
        }
    }

    /// Gains never change as the selection grows.
    pub fn is_modular(self) -> bool {
        matches!(self, ObjectiveKind::Gcmi)
    }

    /// Graph cut can lose value when `lambda` is large; greedy stops early on
    /// a non-positive best gain for it.
    pub fn may_decrease(self) -> bool {
        matches!(self, ObjectiveKind::GraphCut { .. })
    }

    fn check(self, kernel: &SimilarityKernel) -> Result<()> {
        if let ObjectiveKind::GraphCut { lambda } = self {
            if !(lambda >= 0.0 && lambda.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "graph cut lambda must be >= 0, got {lambda}"
                )));
            }
        }
        let expected = self.required_kernel();
        if kernel.kind() != expected {
            return Err(Error::KernelKindMismatch {
                objective: self.name(),
                expected: match expected {
                    KernelKind::QueryByUnlabeled => "QueryByUnlabeled",
                    KernelKind::PairwiseUnlabeled => "PairwiseUnlabeled",
                },
            });
        }
        if matches!(self, ObjectiveKind::FacilityLocation | ObjectiveKind::Flmi)
            && !kernel.nonneg_mode().is_nonnegative()
        {
            return Err(Error::NonnegativeKernelRequired(self.name()));
        }
        Ok(())
    }
}

fn check_subset(subset: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    for &i in subset {
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, size: n });
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::AlreadySelected(i));
        }
    }
    Ok(())
}

/// Closed-form value of `subset` under `kind`, recomputed from scratch.
pub fn eval(kind: ObjectiveKind, kernel: &SimilarityKernel, subset: &[usize]) -> Result<f64> {
    kind.check(kernel)?;
    check_subset(subset, kernel.ground_size())?;
    let s = |i: usize, j: usize| kernel.get(i, j) as f64;
    let value = match kind {
        ObjectiveKind::FacilityLocation => (0..kernel.n_rows())
            .map(|i| subset.iter().map(|&j| s(i, j)).fold(0.0, f64::max))
            .sum(),
        ObjectiveKind::GraphCut { lambda } => {
            let cut: f64 = subset
                .iter()
                .map(|&i| (0..kernel.n_cols()).map(|j| s(i, j)).sum::<f64>())
                .sum();
            let within: f64 = subset
                .iter()
                .map(|&i| subset.iter().map(|&j| s(i, j)).sum::<f64>())
                .sum();
            cut - lambda * within
        }
        ObjectiveKind::Flmi => {
            let query_side: f64 = (0..kernel.n_rows())
                .map(|q| subset.iter().map(|&j| s(q, j)).fold(0.0, f64::max))
                .sum();
            let set_side: f64 = subset
                .iter()
                .map(|&j| {
                    (0..kernel.n_rows())
                        .map(|q| s(q, j))
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .sum();
            query_side + set_side
        }
        ObjectiveKind::Gcmi => {
            2.0 * subset
                .iter()
                .map(|&j| (0..kernel.n_rows()).map(|q| s(q, j)).sum::<f64>())
                .sum::<f64>()
        }
    };
    Ok(value)
}

/// Variant-specific cached aggregates.
#[derive(Debug, Clone, PartialEq)]
pub enum Memo {
    /// `cover[i] = max_{j in A} S_ij`.
    FacilityLocation { cover: Vec<f64> },
    /// `totals[c] = sum_{j in U} S_cj`; `row_to_set[c] = sum_{j in A} S_cj`;
    /// `col_to_set[c] = sum_{i in A} S_ic`.
    GraphCut {
        totals: Vec<f64>,
        row_to_set: Vec<f64>,
        col_to_set: Vec<f64>,
    },
    /// `query_cover[q] = max_{j in A} S_qj`; `best_query[u] = max_q S_qu`.
    Flmi {
        query_cover: Vec<f64>,
        best_query: Vec<f64>,
    },
    /// `affinity[u] = 2 sum_q S_qu`.
    Gcmi { affinity: Vec<f64> },
}

/// An objective bound to a kernel plus the memoized state of a growing
/// selection.
///
/// `commit` needs exclusive access; `marginal_gain` only reads and is safe to
/// call concurrently on a shared reference.
#[derive(Debug, Clone)]
pub struct ObjectiveState<'k> {
    kind: ObjectiveKind,
    kernel: &'k SimilarityKernel,
    selected: Vec<usize>,
    in_set: Vec<bool>,
    memo: Memo,
}

impl<'k> ObjectiveState<'k> {
    /// Empty selection with precomputed per-element aggregates.
    pub fn new(kind: ObjectiveKind, kernel: &'k SimilarityKernel) -> Result<Self> {
        kind.check(kernel)?;
        let n = kernel.ground_size();
        let memo = match kind {
            ObjectiveKind::FacilityLocation => Memo::FacilityLocation {
                cover: vec![0.0; n],
            },
            ObjectiveKind::GraphCut { .. } => Memo::GraphCut {
                totals: (0..n)
                    .map(|c| kernel.row(c).iter().map(|&v| v as f64).sum())
                    .collect(),
                row_to_set: vec![0.0; n],
                col_to_set: vec![0.0; n],
            },
            ObjectiveKind::Flmi => Memo::Flmi {
                query_cover: vec![0.0; kernel.n_rows()],
                best_query: (0..n)
                    .map(|u| {
                        (0..kernel.n_rows())
                            .map(|q| kernel.get(q, u) as f64)
                            .fold(f64::NEG_INFINITY, f64::max)
                    })
                    .collect(),
            },
            ObjectiveKind::Gcmi => Memo::Gcmi {
                affinity: (0..n)
                    .map(|u| {
                        2.0 * (0..kernel.n_rows())
                            .map(|q| kernel.get(q, u) as f64)
                            .sum::<f64>()
                    })
                    .collect(),
            },
        };
        Ok(Self {
            kind,
            kernel,
            selected: Vec::new(),
            in_set: vec![false; n],
            memo,
        })
    }

    /// State for an existing selection, with the memo built directly from the
    /// set rather than by replaying commits.
    pub fn with_selected(
        kind: ObjectiveKind,
        kernel: &'k SimilarityKernel,
        selected: &[usize],
    ) -> Result<Self> {
        let mut state = Self::new(kind, kernel)?;
        check_subset(selected, kernel.ground_size())?;
        let s = |i: usize, j: usize| kernel.get(i, j) as f64;
        match &mut state.memo {
            Memo::FacilityLocation { cover } => {
                for (i, c) in cover.iter_mut().enumerate() {
                    *c = selected.iter().map(|&j| s(i, j)).fold(0.0, f64::max);
                }
            }
            Memo::GraphCut {
                row_to_set,
                col_to_set,
                ..
            } => {
                for c in 0..row_to_set.len() {
                    row_to_set[c] = selected.iter().map(|&j| s(c, j)).sum();
                    col_to_set[c] = selected.iter().map(|&i| s(i, c)).sum();
                }
            }
            Memo::Flmi { query_cover, .. } => {
                for (q, c) in query_cover.iter_mut().enumerate() {
                    *c = selected.iter().map(|&j| s(q, j)).fold(0.0, f64::max);
                }
            }
            Memo::Gcmi { .. } => {}
        }
        for &i in selected {
            state.in_set[i] = true;
        }
        state.selected = selected.to_vec();
        Ok(state)
    }

    pub fn kind(&self) -> ObjectiveKind {
        self.kind
    }

    pub fn kernel(&self) -> &'k SimilarityKernel {
        self.kernel
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn memo(&self) -> &Memo {
        &self.memo
    }

    pub fn ground_size(&self) -> usize {
        self.in_set.len()
    }

    #[inline]
    pub fn is_selected(&self, i: usize) -> bool {
        self.in_set[i]
    }

    /// Elements not yet selected, in ascending order.
    pub fn remaining(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.in_set.len()).filter(|&i| !self.in_set[i])
    }

    fn check_candidate(&self, candidate: usize) -> Result<()> {
        if candidate >= self.in_set.len() {
            return Err(Error::IndexOutOfRange {
                index: candidate,
                size: self.in_set.len(),
            });
        }
        if self.in_set[candidate] {
            return Err(Error::AlreadySelected(candidate));
        }
        Ok(())
    }

    /// `f(A + candidate) - f(A)` from the memo.
    pub fn marginal_gain(&self, candidate: usize) -> Result<f64> {
        self.check_candidate(candidate)?;
        Ok(self.gain_unchecked(candidate))
    }

    /// Marginal gain without the range and membership checks.
    #[inline]
    pub(crate) fn gain_unchecked(&self, c: usize) -> f64 {
        let k = self.kernel;
        match &self.memo {
            Memo::FacilityLocation { cover } => cover
                .iter()
                .enumerate()
                .map(|(i, &cur)| (k.get(i, c) as f64 - cur).max(0.0))
                .sum(),
            Memo::GraphCut {
                totals,
                row_to_set,
                col_to_set,
            } => {
                let ObjectiveKind::GraphCut { lambda } = self.kind else {
                    unreachable!("graph cut memo on another objective")
                };
                totals[c] - lambda * (row_to_set[c] + col_to_set[c] + k.get(c, c) as f64)
            }
            Memo::Flmi {
                query_cover,
                best_query,
            } => {
                let coverage: f64 = query_cover
                    .iter()
                    .enumerate()
                    .map(|(q, &cur)| (k.get(q, c) as f64 - cur).max(0.0))
                    .sum();
                coverage + best_query[c]
            }
            Memo::Gcmi { affinity } => affinity[c],
        }
    }

    /// Adds `candidate` to the selection and updates the memo in place.
    pub fn commit(&mut self, candidate: usize) -> Result<()> {
        self.check_candidate(candidate)?;
        let k = self.kernel;
        match &mut self.memo {
            Memo::FacilityLocation { cover } => {
                for (i, cur) in cover.iter_mut().enumerate() {
                    *cur = cur.max(k.get(i, candidate) as f64);
                }
            }
            Memo::GraphCut {
                row_to_set,
                col_to_set,
                ..
            } => {
                let row = k.row(candidate);
                for c in 0..row_to_set.len() {
                    row_to_set[c] += k.get(c, candidate) as f64;
                    col_to_set[c] += row[c] as f64;
                }
            }
            Memo::Flmi { query_cover, .. } => {
                for (q, cur) in query_cover.iter_mut().enumerate() {
                    *cur = cur.max(k.get(q, candidate) as f64);
                }
            }
            Memo::Gcmi { .. } => {}
        }
        self.in_set[candidate] = true;
        self.selected.push(candidate);
        Ok(())
    }

    /// Value of the current selection, recomputed from scratch.
    pub fn value(&self) -> f64 {
        eval(self.kind, self.kernel, &self.selected)
            .expect("state invariants guarantee a valid subset")
    }
}

/// Free-function form of [`ObjectiveState::new`].
pub fn init_state(kind: ObjectiveKind, kernel: &SimilarityKernel) -> Result<ObjectiveState<'_>> {
    ObjectiveState::new(kind, kernel)
}
