mod common;

use common::*;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use talisman::acquisition::{
    acquire, coreset_select, entropy_score, least_conf_score, margin_score, AcquisitionMethod,
    AcquisitionRequest, PoolInputs, ProposalScores,
};
use talisman::maximizer::{lazy_greedy, naive_greedy};
use talisman::objectives::{eval, ObjectiveKind, ObjectiveState};
use talisman::similarity::{
    build_query_kernel, targeted_sim, DenseMatrix, EmbeddingBag, NonnegMode, SimilarityKernel,
};

fn random_scores(r: &mut ChaCha8Rng, proposals: usize, classes: usize) -> ProposalScores {
    let rows: Vec<Vec<f64>> = (0..proposals)
        .map(|_| {
            let raw: Vec<f64> = (0..classes).map(|_| r.random::<f64>().powi(3) + 1e-9).collect();
            let s: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / s).collect()
        })
        .collect();
    ProposalScores::from_rows(&rows).unwrap()
}

fn scaled(k: &SimilarityKernel, c: f32) -> SimilarityKernel {
    let v = k.values().iter().map(|x| x * c).collect();
    SimilarityKernel::new(k.kind(), k.nonneg_mode(), k.n_rows(), k.n_cols(), v).unwrap()
}

fn random_bag(r: &mut ChaCha8Rng, dim: usize) -> EmbeddingBag {
    let rows = r.random_range(1..5);
    bag_of(&random_rows(r, rows, dim))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn objectives_are_submodular(seed in any::<u64>()) {
        submodularity_case(seed).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn monotone_objectives_never_lose_value(seed in any::<u64>()) {
        monotonicity_case(seed).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn positive_scaling(seed in any::<u64>(), c in 0.05f32..2.0, pow in -2i32..=1) {
        let mut r = rng(seed);
        let kind = ALL_KINDS[r.random_range(0..4)];
        let n = r.random_range(3..25);
        let k = random_kernel_for(&mut r, kind, n, 0.5);
        let size = r.random_range(0..n);
        let set = rand::seq::index::sample(&mut r, n, size).into_vec();
        let (base, big) = (eval(kind, &k, &set).unwrap(), eval(kind, &scaled(&k, c), &set).unwrap());
        prop_assert!((big - c as f64 * base).abs() <= 1e-5 * (1.0 + base.abs()));

        // powers of two scale exactly, so every greedy step must agree bit for bit
        let p = 2f32.powi(pow);
        let ks = scaled(&k, p);
        let b = r.random_range(1..=n);
        let a = naive_greedy(&mut ObjectiveState::new(kind, &k).unwrap(), b).unwrap();
        let s = naive_greedy(&mut ObjectiveState::new(kind, &ks).unwrap(), b).unwrap();
        prop_assert_eq!(&a.indices, &s.indices);
        for (x, y) in a.gains.iter().zip(&s.gains) {
            prop_assert_eq!(x * p as f64, *y);
        }
    }

    #[test]
    fn lazy_matches_naive_with_fewer_evaluations(seed in any::<u64>()) {
        let mut r = rng(seed);
        let kind = ALL_KINDS[r.random_range(0..4)];
        let n = r.random_range(2..60);
        let k = random_kernel_for(&mut r, kind, n, 1.0);
        let b = r.random_range(1..=n.min(12));
        let naive = naive_greedy(&mut ObjectiveState::new(kind, &k).unwrap(), b).unwrap();
        let lazy = lazy_greedy(&mut ObjectiveState::new(kind, &k).unwrap(), b).unwrap();
        prop_assert_eq!(&naive.indices, &lazy.indices);
        prop_assert_eq!(&naive.gains, &lazy.gains);
        prop_assert!(lazy.evaluations <= naive.evaluations);
    }

    #[test]
    fn gcmi_greedy_is_top_column_sums(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(1..40);
        let q = r.random_range(1..6);
        let k = random_query(&mut r, q, n, 1.0);
        let b = r.random_range(1..=n);
        let sums: Vec<f64> = (0..n)
            .map(|u| 2.0 * (0..k.n_rows()).map(|q| k.get(q, u) as f64).sum::<f64>())
            .collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&x, &y| sums[y].total_cmp(&sums[x]).then(x.cmp(&y)));
        let got = naive_greedy(&mut ObjectiveState::new(ObjectiveKind::Gcmi, &k).unwrap(), b).unwrap();
        prop_assert_eq!(&got.indices[..], &order[..b]);
    }

    #[test]
    fn targeted_sim_symmetries(seed in any::<u64>()) {
        let mut r = rng(seed);
        let dim = r.random_range(1..16);
        let (q, u) = (random_bag(&mut r, dim), random_bag(&mut r, dim));
        let norm = |b: &EmbeddingBag| b.l2_normalize().unwrap();
        let base = targeted_sim(&norm(&q), &norm(&u)).unwrap();
        // normalization is per row, so shuffling first leaves every row's bits intact
        let shuffle = |b: &EmbeddingBag, r: &mut ChaCha8Rng| {
            let mut rows: Vec<Vec<f32>> = b.iter_rows().map(|x| x.to_vec()).collect();
            rows.shuffle(r);
            norm(&bag_of(&rows))
        };
        let (qs, us) = (shuffle(&q, &mut r), shuffle(&u, &mut r));
        let u = norm(&u);
        prop_assert_eq!(targeted_sim(&qs, &us).unwrap(), base);
        prop_assert!((targeted_sim(&u, &u).unwrap() - 1.0).abs() <= 1e-5);
        prop_assert!((-1.0..=1.0).contains(&base));
    }

    #[test]
    fn kernel_entries_in_range(seed in any::<u64>()) {
        let mut r = rng(seed);
        let dim = r.random_range(1..16);
        let q: Vec<EmbeddingBag> = (0..r.random_range(1..4)).map(|_| random_bag(&mut r, dim)).collect();
        let u: Vec<EmbeddingBag> = (0..r.random_range(1..10)).map(|_| random_bag(&mut r, dim)).collect();
        for (mode, lo) in [(NonnegMode::ClampZero, 0.0), (NonnegMode::ShiftRescale, 0.0), (NonnegMode::Raw, -1.0)] {
            let k = build_query_kernel(&q, &u, mode).unwrap();
            prop_assert!(k.values().iter().all(|&v| (lo..=1.0).contains(&v)));
        }
    }

    #[test]
    fn uncertainty_scores_invariant_and_bounded(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (p, c) = (r.random_range(1..6), r.random_range(2..8));
        let s = random_scores(&mut r, p, c);
        let mut prop_order: Vec<usize> = (0..p).collect();
        let mut class_order: Vec<usize> = (0..c).collect();
        prop_order.shuffle(&mut r);
        class_order.shuffle(&mut r);
        let rows: Vec<Vec<f64>> = prop_order
            .iter()
            .map(|&i| class_order.iter().map(|&j| s.row(i)[j]).collect())
            .collect();
        let t = ProposalScores::from_rows(&rows).unwrap();
        let (e, l, m) = (entropy_score(&s), least_conf_score(&s, false), margin_score(&s).unwrap());
        prop_assert!((entropy_score(&t) - e).abs() < 1e-12);
        prop_assert!((least_conf_score(&t, false) - l).abs() < 1e-12);
        prop_assert!((margin_score(&t).unwrap() - m).abs() < 1e-12);
        prop_assert!((0.0..=std::f64::consts::LN_2 + 1e-12).contains(&e));
        prop_assert!((0.0..=1.0 / c as f64 + 1e-12).contains(&l));
        prop_assert!((0.0..=1.0).contains(&m));
    }

    #[test]
    fn coreset_ignores_labeled_order(seed in any::<u64>()) {
        let mut r = rng(seed);
        let dim = r.random_range(1..6);
        let (nu, nl) = (r.random_range(1..30), r.random_range(0..10));
        let u = DenseMatrix::from_rows(&random_rows(&mut r, nu, dim)).unwrap();
        let mut rows = random_rows(&mut r, nl, dim);
        let to_matrix = |rows: &[Vec<f32>]| {
            if rows.is_empty() {
                DenseMatrix::new(0, dim, Vec::new()).unwrap()
            } else {
                DenseMatrix::from_rows(rows).unwrap()
            }
        };
        let b = r.random_range(1..=nu);
        let first = coreset_select(&u, &to_matrix(&rows), b).unwrap();
        rows.shuffle(&mut r);
        prop_assert_eq!(first, coreset_select(&u, &to_matrix(&rows), b).unwrap());
    }

    #[test]
    fn every_method_returns_min_budget_pool(seed in any::<u64>(), method_ix in 0usize..10, budget in 1usize..40) {
        let mut r = rng(seed);
        let method = AcquisitionMethod::ALL[method_ix];
        let dim = r.random_range(2..8);
        let nu = r.random_range(1..25);
        let u: Vec<EmbeddingBag> = (0..nu).map(|_| random_bag(&mut r, dim)).collect();
        let l: Vec<EmbeddingBag> = (0..r.random_range(0..5)).map(|_| random_bag(&mut r, dim)).collect();
        let q: Vec<EmbeddingBag> = (0..r.random_range(1..4)).map(|_| random_bag(&mut r, dim)).collect();
        let scores: Vec<ProposalScores> = u.iter().map(|b| random_scores(&mut r, b.rows(), 4)).collect();
        let (ur, lr, qr): (Vec<_>, Vec<_>, Vec<_>) = (u.iter().collect(), l.iter().collect(), q.iter().collect());
        let inputs = PoolInputs {
            unlabeled: &ur,
            labeled: &lr,
            query: &qr,
            scores: Some(&scores),
            query_kernel: None,
        };
        let req = AcquisitionRequest { seed, ..AcquisitionRequest::new(method, budget) };
        let out = acquire(&req, &inputs).unwrap();
        prop_assert_eq!(out.indices.len(), budget.min(nu));
        let mut sorted = out.indices.clone();
        sorted.sort_unstable();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), out.indices.len());
        prop_assert!(sorted.iter().all(|&i| i < nu));
        prop_assert_eq!(out, acquire(&req, &inputs).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn simulator_splits_stay_disjoint(seed in 0u64..1_000) {
        disjointness_case(seed).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn simulator_runs_are_reproducible(seed in 0u64..1_000) {
        determinism_case(seed).map_err(TestCaseError::fail)?;
    }
}
