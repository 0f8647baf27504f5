//! Randomized self-checks of the engine against exhaustive search and
//! from-scratch evaluation.

use std::path::PathBuf;

use clap::Args;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use talisman::maximizer::{brute_force_opt, lazy_greedy, naive_greedy, stochastic_greedy};
use talisman::similarity::{KernelKind, NonnegMode, SimilarityKernel};
use talisman::{eval, ObjectiveKind, ObjectiveState};

use crate::config::{config_hash, to_json_line, write_output};
use crate::error::{CliError, CliResult};

const KINDS: [ObjectiveKind; 4] = [
    ObjectiveKind::FacilityLocation,
    ObjectiveKind::GRAPH_CUT,
    ObjectiveKind::Flmi,
    ObjectiveKind::Gcmi,
];

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    /// Random instances per check.
    #[arg(long, default_value_t = 200)]
    instances: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, short)]
    #[serde(skip)]
    output: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct Check {
    name: &'static str,
    passed: bool,
    detail: String,
}

#[derive(Debug, Serialize)]
struct VerifyReport {
    passed: bool,
    checks: Vec<Check>,
    config_hash: String,
}

fn kernel(r: &mut ChaCha8Rng, kind: ObjectiveKind, n: usize) -> SimilarityKernel {
    match kind.required_kernel() {
        KernelKind::PairwiseUnlabeled => {
            let mut v = vec![0.0f32; n * n];
            for i in 0..n {
                for j in i..n {
                    let x = r.random::<f32>();
                    v[i * n + j] = x;
                    v[j * n + i] = x;
                }
            }
            SimilarityKernel::new(KernelKind::PairwiseUnlabeled, NonnegMode::ClampZero, n, n, v)
        }
        KernelKind::QueryByUnlabeled => {
            let q = r.random_range(1..=5);
            let v = (0..q * n).map(|_| r.random::<f32>()).collect();
            SimilarityKernel::new(KernelKind::QueryByUnlabeled, NonnegMode::ClampZero, q, n, v)
        }
    }
    .expect("values in range")
}

type Outcome = Result<String, String>;
type CheckFn = fn(&mut ChaCha8Rng, usize) -> Outcome;

/// Random subset of `0..n` with between `min` and `n - 1` elements.
fn subset(r: &mut ChaCha8Rng, n: usize, min: usize) -> Vec<usize> {
    let size = r.random_range(min..n.max(min + 1));
    rand::seq::index::sample(r, n, size).into_vec()
}

fn err(e: talisman::Error) -> String {
    e.to_string()
}

fn greedy_bound(r: &mut ChaCha8Rng, instances: usize) -> Outcome {
    let bound = 1.0 - (-1.0f64).exp();
    let mut worst = f64::INFINITY;
    for i in 0..instances {
        for kind in [ObjectiveKind::FacilityLocation, ObjectiveKind::Flmi, ObjectiveKind::Gcmi] {
            let k = kernel(r, kind, 12);
            let g = naive_greedy(&mut ObjectiveState::new(kind, &k).map_err(err)?, 3)
                .map_err(err)?
                .objective_value;
            let (_, opt) = brute_force_opt(kind, &k, 3).map_err(err)?;
            worst = worst.min(g / opt);
            if g < bound * opt - 1e-9 || (kind.is_modular() && (g - opt).abs() > 1e-9) {
                return Err(format!("{} instance {i}: greedy {g}, optimum {opt}", kind.name()));
            }
        }
    }
    Ok(format!("worst greedy/optimum ratio {worst:.4}"))
}

fn lazy_equals_naive(r: &mut ChaCha8Rng, instances: usize) -> Outcome {
    for i in 0..instances {
        let kind = KINDS[i % 4];
        let k = kernel(r, kind, 100);
        let n = naive_greedy(&mut ObjectiveState::new(kind, &k).map_err(err)?, 10).map_err(err)?;
        let l = lazy_greedy(&mut ObjectiveState::new(kind, &k).map_err(err)?, 10).map_err(err)?;
        if n.indices != l.indices || n.gains != l.gains {
            return Err(format!("{} instance {i}: selections differ", kind.name()));
        }
        if l.evaluations > n.evaluations || (!kind.is_modular() && l.evaluations == n.evaluations) {
            return Err(format!(
                "{} instance {i}: lazy {} vs naive {} evaluations",
                kind.name(),
                l.evaluations,
                n.evaluations
            ));
        }
    }
    Ok(format!("{instances} instances identical"))
}

fn memo_matches_eval(r: &mut ChaCha8Rng, instances: usize) -> Outcome {
    let mut worst = 0.0f64;
    for i in 0..instances * 5 {
        let kind = KINDS[i % 4];
        let n = r.random_range(2..30);
        let k = kernel(r, kind, n);
        let mut state = ObjectiveState::new(kind, &k).map_err(err)?;
        for c in subset(r, n, 0) {
            state.commit(c).map_err(err)?;
        }
        let free: Vec<usize> = state.remaining().collect();
        let c = free[r.random_range(0..free.len())];
        let mut with = state.selected().to_vec();
        with.push(c);
        let expected = eval(kind, &k, &with).map_err(err)? - eval(kind, &k, state.selected()).map_err(err)?;
        let got = state.marginal_gain(c).map_err(err)?;
        worst = worst.max((got - expected).abs());
        if (got - expected).abs() > 1e-9 {
            return Err(format!("{} probe {i}: {got} vs {expected}", kind.name()));
        }
    }
    Ok(format!("{} probes, max abs error {worst:.1e}", instances * 5))
}

fn gcmi_identity(r: &mut ChaCha8Rng, instances: usize) -> Outcome {
    for i in 0..instances {
        let (nq, nu) = (r.random_range(1..5), r.random_range(2..12));
        let m = nq + nu;
        let joint = kernel(r, ObjectiveKind::FacilityLocation, m);
        let qk: Vec<f32> = (0..nq).flat_map(|q| (nq..m).map(move |u| (q, u))).map(|(q, u)| joint.get(q, u)).collect();
        let qk = SimilarityKernel::new(KernelKind::QueryByUnlabeled, NonnegMode::ClampZero, nq, nu, qk)
            .map_err(err)?;
        let a_local = subset(r, nu, 1);
        let a: Vec<usize> = a_local.iter().map(|&x| x + nq).collect();
        let q: Vec<usize> = (0..nq).collect();
        let aq: Vec<usize> = a.iter().chain(&q).copied().collect();
        let gc = |s: &[usize]| eval(ObjectiveKind::GRAPH_CUT, &joint, s);
        let mi = gc(&a).map_err(err)? + gc(&q).map_err(err)? - gc(&aq).map_err(err)?;
        let closed = eval(ObjectiveKind::Gcmi, &qk, &a_local).map_err(err)?;
        if (mi - closed).abs() > 1e-9 {
            return Err(format!("instance {i}: {closed} vs {mi}"));
        }
    }
    Ok(format!("{instances} joint ground sets"))
}

fn submodularity(r: &mut ChaCha8Rng, instances: usize) -> Outcome {
    for i in 0..instances * 5 {
        let kind = KINDS[i % 4];
        let n = r.random_range(3..14);
        let k = kernel(r, kind, n);
        let big = subset(r, n, 0);
        let small: Vec<usize> = big.iter().copied().filter(|_| r.random_bool(0.5)).collect();
        let outside: Vec<usize> = (0..n).filter(|x| !big.contains(x)).collect();
        let x = outside[r.random_range(0..outside.len())];
        let gain = |s: &[usize]| -> Result<f64, String> {
            let mut w = s.to_vec();
            w.push(x);
            Ok(eval(kind, &k, &w).map_err(err)? - eval(kind, &k, s).map_err(err)?)
        };
        let (ga, gb) = (gain(&small)?, gain(&big)?);
        if ga + 1e-9 < gb {
            return Err(format!("{} case {i}: {ga} < {gb}", kind.name()));
        }
    }
    Ok(format!("{} nested-set cases", instances * 5))
}

fn stochastic_repeatable(r: &mut ChaCha8Rng, instances: usize) -> Outcome {
    for i in 0..instances.min(50) {
        let kind = KINDS[i % 4];
        let k = kernel(r, kind, 80);
        let seed = r.random();
        let a = stochastic_greedy(&mut ObjectiveState::new(kind, &k).map_err(err)?, 8, 0.1, seed).map_err(err)?;
        let b = stochastic_greedy(&mut ObjectiveState::new(kind, &k).map_err(err)?, 8, 0.1, seed).map_err(err)?;
        if a != b {
            return Err(format!("{} instance {i}: runs differ under one seed", kind.name()));
        }
    }
    Ok("seeded runs identical".into())
}

pub fn run(args: VerifyArgs) -> CliResult<()> {
    if args.instances == 0 {
        return Err(talisman::Error::InvalidConfig("instances must be at least 1".into()).into());
    }
    let suite: [(&'static str, CheckFn); 6] = [
        ("greedy-bound", greedy_bound),
        ("lazy-equals-naive", lazy_equals_naive),
        ("memo-matches-eval", memo_matches_eval),
        ("gcmi-identity", gcmi_identity),
        ("submodularity", submodularity),
        ("stochastic-repeatable", stochastic_repeatable),
    ];
    let checks: Vec<Check> = suite
        .iter()
        .enumerate()
        .map(|(i, (name, f))| {
            let mut r = ChaCha8Rng::seed_from_u64(args.seed.wrapping_add(i as u64));
            let outcome = f(&mut r, args.instances);
            Check {
                name,
                passed: outcome.is_ok(),
                detail: outcome.unwrap_or_else(|e| e),
            }
        })
        .collect();
    let failed = checks.iter().filter(|c| !c.passed).count();
    let report = VerifyReport {
        passed: failed == 0,
        checks,
        config_hash: config_hash(&args)?,
    };
    write_output(args.output.as_deref(), &to_json_line(&report)?)?;
    if failed > 0 {
        return Err(CliError::VerificationFailed(failed));
    }
    Ok(())
}
