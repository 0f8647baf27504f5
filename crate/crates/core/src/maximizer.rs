//! Cardinality-constrained greedy maximization.
//!
//! Three variants share one contract: pick up to `budget` elements, each step
//! committing the candidate with the largest marginal gain (lowest index on
//! ties). Naive greedy scans every remaining candidate per step; lazy greedy
//! keeps stale upper bounds in a max-heap and only refreshes the top, which by
//! diminishing returns yields exactly the same picks; stochastic greedy scans a
//! random sample of `ceil(n / budget * ln(1 / epsilon))` candidates per step.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::{eval, ObjectiveKind, ObjectiveState};
use crate::similarity::SimilarityKernel;

/// Largest ground set accepted by [`brute_force_opt`].
pub const BRUTE_FORCE_MAX: usize = 20;

// Candidate scans at least this long are split across threads.
const PARALLEL_SCAN_MIN: usize = 16_384;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    /// Selected ground-set indices in pick order.
    pub indices: Vec<usize>,
    /// Marginal gain of each pick at the time it was made.
    pub gains: Vec<f64>,
    /// Objective value of the state's full selection, recomputed from scratch.
    pub objective_value: f64,
    /// Number of marginal-gain evaluations performed.
    pub evaluations: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub enum Maximizer {
    Naive,
    #[default]
    Lazy,
    Stochastic {
        epsilon: f64,
        seed: u64,
    },
}

impl Maximizer {
    pub const DEFAULT_EPSILON: f64 = 0.1;
}

/// Runs the chosen greedy variant.
pub fn maximize(
    state: &mut ObjectiveState<'_>,
    budget: usize,
    maximizer: Maximizer,
) -> Result<SelectionResult> {
    match maximizer {
        Maximizer::Naive => naive_greedy(state, budget),
        Maximizer::Lazy => lazy_greedy(state, budget),
        Maximizer::Stochastic { epsilon, seed } => stochastic_greedy(state, budget, epsilon, seed),
    }
}

fn check_budget(state: &ObjectiveState<'_>, budget: usize) -> Result<()> {
    if budget == 0 {
        return Err(Error::ZeroBudget);
    }
    let pool = state.ground_size() - state.selected().len();
    if budget > pool {
        return Err(Error::BudgetExceedsPool { budget, pool });
    }
    Ok(())
}

fn check_submodular(state: &ObjectiveState<'_>) -> Result<()> {
    // Graph cut with negative similarities loses diminishing returns.
    if state.kind().may_decrease() && !state.kernel().nonneg_mode().is_nonnegative() {
        return Err(Error::NonnegativeKernelRequired(state.kind().name()));
    }
    Ok(())
}

/// Higher gain wins; equal gains go to the lower index.
#[inline]
fn better(a: (usize, f64), b: (usize, f64)) -> (usize, f64) {
    match a.1.total_cmp(&b.1) {
        Ordering::Greater => a,
        Ordering::Less => b,
        Ordering::Equal => {
            if a.0 <= b.0 {
                a
            } else {
                b
            }
        }
    }
}

fn best_of(state: &ObjectiveState<'_>, candidates: &[usize]) -> Option<(usize, f64)> {
    if candidates.len() >= PARALLEL_SCAN_MIN {
        candidates
            .par_iter()
            .map(|&c| (c, state.gain_unchecked(c)))
            .reduce_with(better)
    } else {
        candidates
            .iter()
            .map(|&c| (c, state.gain_unchecked(c)))
            .reduce(better)
    }
}

fn finish(state: &ObjectiveState<'_>, indices: Vec<usize>, gains: Vec<f64>, evaluations: u64) -> SelectionResult {
    SelectionResult {
        indices,
        gains,
        objective_value: state.value(),
        evaluations,
    }
}

/// Plain greedy: every step evaluates all remaining candidates.
pub fn naive_greedy(state: &mut ObjectiveState<'_>, budget: usize) -> Result<SelectionResult> {
    check_budget(state, budget)?;
    let mut remaining: Vec<usize> = state.remaining().collect();
    let mut indices = Vec::with_capacity(budget);
    let mut gains = Vec::with_capacity(budget);
    let mut evaluations = 0u64;

    for _ in 0..budget {
        evaluations += remaining.len() as u64;
        let Some((pick, gain)) = best_of(state, &remaining) else {
            break;
        };
        if gain <= 0.0 && state.kind().may_decrease() {
            break;
        }
        state.commit(pick)?;
        let pos = remaining.binary_search(&pick).expect("pick comes from remaining");
        remaining.remove(pos);
        indices.push(pick);
        gains.push(gain);
    }
    Ok(finish(state, indices, gains, evaluations))
}

#[derive(Debug, Clone, Copy)]
struct Bound {
    gain: f64,
    index: usize,
    // Number of commits when `gain` was computed.
    stamp: usize,
}

impl PartialEq for Bound {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Bound {}

impl PartialOrd for Bound {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Bound {
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain
            .total_cmp(&other.gain)
            .then_with(|| other.index.cmp(&self.index))
    }
}

/// Lazy greedy over a max-heap of stale upper bounds.
///
/// The popped element is accepted once its bound is fresh for the current
/// step, or after a refresh that still beats the next bound in the heap. For a
/// modular objective the initial gains are exact forever, so no refresh ever
/// happens.
pub fn lazy_greedy(state: &mut ObjectiveState<'_>, budget: usize) -> Result<SelectionResult> {
    check_budget(state, budget)?;
    check_submodular(state)?;
    let modular = state.kind().is_modular();

    let mut heap: BinaryHeap<Bound> = state
        .remaining()
        .map(|index| Bound {
            gain: state.gain_unchecked(index),
            index,
            stamp: 0,
        })
        .collect();
    let mut evaluations = heap.len() as u64;
    let mut indices = Vec::with_capacity(budget);
    let mut gains = Vec::with_capacity(budget);

    for step in 0..budget {
        let chosen = loop {
            let Some(top) = heap.pop() else {
                break None;
            };
            if modular || top.stamp == step {
                break Some(top);
            }
            let fresh = Bound {
                gain: state.gain_unchecked(top.index),
                index: top.index,
                stamp: step,
            };
            evaluations += 1;
            match heap.peek() {
                Some(next) if *next > fresh => heap.push(fresh),
                _ => break Some(fresh),
            }
        };
        let Some(chosen) = chosen else { break };
        if chosen.gain <= 0.0 && state.kind().may_decrease() {
            break;
        }
        state.commit(chosen.index)?;
        indices.push(chosen.index);
        gains.push(chosen.gain);
    }
    Ok(finish(state, indices, gains, evaluations))
}

/// Sample size per step for stochastic greedy.
pub fn stochastic_sample_size(ground: usize, budget: usize, epsilon: f64) -> usize {
    let s = (ground as f64 / budget as f64) * (1.0 / epsilon).ln();
    (s.ceil() as usize).max(1)
}

/// Stochastic ("lazier than lazy") greedy; deterministic for a fixed seed.
pub fn stochastic_greedy(
    state: &mut ObjectiveState<'_>,
    budget: usize,
    epsilon: f64,
    seed: u64,
) -> Result<SelectionResult> {
    check_budget(state, budget)?;
    check_submodular(state)?;
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    let sample = stochastic_sample_size(state.ground_size(), budget, epsilon);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut remaining: Vec<usize> = state.remaining().collect();
    let mut indices = Vec::with_capacity(budget);
    let mut gains = Vec::with_capacity(budget);
    let mut evaluations = 0u64;

    for _ in 0..budget {
        let best = if sample >= remaining.len() {
            evaluations += remaining.len() as u64;
            best_of(state, &remaining)
        } else {
            let mut picks: Vec<usize> = rand::seq::index::sample(&mut rng, remaining.len(), sample)
                .into_iter()
                .map(|p| remaining[p])
                .collect();
            picks.sort_unstable();
            evaluations += picks.len() as u64;
            best_of(state, &picks)
        };
        let Some((pick, gain)) = best else { break };
        if gain <= 0.0 && state.kind().may_decrease() {
            break;
        }
        state.commit(pick)?;
        let pos = remaining.binary_search(&pick).expect("pick comes from remaining");
        remaining.remove(pos);
        indices.push(pick);
        gains.push(gain);
    }
    Ok(finish(state, indices, gains, evaluations))
}

/// Exact optimum over all subsets of size at most `budget`; ties keep the
/// lexicographically first subset found. Ground sets above
/// [`BRUTE_FORCE_MAX`] are refused.
pub fn brute_force_opt(
    kind: ObjectiveKind,
    kernel: &SimilarityKernel,
    budget: usize,
) -> Result<(Vec<usize>, f64)> {
    let n = kernel.ground_size();
    if n > BRUTE_FORCE_MAX {
        return Err(Error::PoolTooLarge {
            size: n,
            max: BRUTE_FORCE_MAX,
        });
    }
    if budget > n {
        return Err(Error::BudgetExceedsPool { budget, pool: n });
    }
    let mut best = (Vec::new(), eval(kind, kernel, &[])?);
    for size in 1..=budget {
        let mut combo: Vec<usize> = (0..size).collect();
        loop {
            let v = eval(kind, kernel, &combo)?;
            if v > best.1 {
                best = (combo.clone(), v);
            }
            // advance to the next combination in lexicographic order
            let Some(i) = (0..size).rev().find(|&i| combo[i] < n - size + i) else {
                break;
            };
            combo[i] += 1;
            for j in (i + 1)..size {
                combo[j] = combo[j - 1] + 1;
            }
        }
    }
    Ok(best)
}
