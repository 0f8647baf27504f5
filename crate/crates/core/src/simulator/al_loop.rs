use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{compute_metrics, RoundMetrics};
use super::scenario::{generate_scenario, Scenario, ScenarioConfig};
use super::splits::{build_splits, SplitConfig, Splits};
use super::surrogate::{
    logit_bag, predict_proposal_probs, train_surrogate, EmbeddingSource, SurrogateConfig,
    SurrogateModel,
};
use crate::acquisition::{acquire, AcquisitionMethod, AcquisitionRequest, PoolInputs, ProposalScores};
use crate::error::{Error, Result};
use crate::similarity::{DenseMatrix, EmbeddingBag};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopConfig {
    pub rounds: usize,
    pub surrogate: SurrogateConfig,
    pub embedding: EmbeddingSource,
    /// Off by default so reports stay bit-reproducible.
    pub record_wall_time: bool,
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            rounds: 10,
            surrogate: SurrogateConfig::default(),
            embedding: EmbeddingSource::Raw,
            record_wall_time: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// 0 is the initial model before any acquisition.
    pub round: usize,
    pub labeled_images: usize,
    /// Image ids acquired this round.
    pub selected: Vec<usize>,
    #[serde(flatten)]
    pub metrics: RoundMetrics,
    pub objective_value: Option<f64>,
    pub wall_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ALRunReport {
    pub method: AcquisitionMethod,
    pub seed: u64,
    pub budget: usize,
    pub rounds: Vec<RoundRecord>,
}

impl ALRunReport {
    pub fn last(&self) -> &RoundRecord {
        self.rounds.last().expect("round 0 is always present")
    }
}

/// Derives an independent per-round seed.
pub fn round_seed(seed: u64, round: usize) -> u64 {
    let mut z = seed ^ (round as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn train_on(
    scenario: &Scenario,
    labeled: &[usize],
    cfg: &SurrogateConfig,
    seed: u64,
) -> Result<SurrogateModel> {
    let dim = scenario.config.dim;
    let mut data = Vec::new();
    let mut ys = Vec::new();
    for &i in labeled {
        let img = &scenario.images[i];
        data.extend_from_slice(img.bag.data());
        ys.extend(img.labels.iter().map(|l| l.class));
    }
    let x = DenseMatrix::new(ys.len(), dim, data)?;
    let cfg = SurrogateConfig { seed, ..cfg.clone() };
    train_surrogate(&x, &ys, scenario.n_classes(), &cfg)
}

fn embed(
    model: &SurrogateModel,
    source: EmbeddingSource,
    bags: &[&EmbeddingBag],
) -> Result<Option<Vec<EmbeddingBag>>> {
    match source {
        EmbeddingSource::Raw => Ok(None),
        EmbeddingSource::Logits => bags
            .par_iter()
            .map(|b| logit_bag(model, b))
            .collect::<Result<Vec<_>>>()
            .map(Some),
    }
}

/// Runs `cfg.rounds` rounds of acquire / oracle-label / retrain.
///
/// Round `r` records the batch chosen with the round `r - 1` model and the
/// metrics of the model retrained on it.
pub fn run_al_loop(
    scenario: &Scenario,
    splits: &Splits,
    request: &AcquisitionRequest,
    cfg: &LoopConfig,
) -> Result<ALRunReport> {
    request.validate()?;
    let budget = request.budget;
    let total = cfg.rounds * budget;
    if total > splits.unlabeled.len() {
        return Err(Error::BudgetExceedsPool {
            budget: total,
            pool: splits.unlabeled.len(),
        });
    }
    let query_owned = splits.query_bags(scenario)?;
    let query_raw: Vec<&EmbeddingBag> = query_owned.iter().collect();

    let mut labeled = splits.labeled.clone();
    let mut unlabeled = splits.unlabeled.clone();
    let initial = labeled.len();
    let mut in_labeled = vec![false; scenario.images.len()];
    labeled.iter().for_each(|&i| in_labeled[i] = true);

    let mut model = train_on(scenario, &labeled, &cfg.surrogate, round_seed(cfg.surrogate.seed, 0))?;
    let mut rounds = vec![RoundRecord {
        round: 0,
        labeled_images: initial,
        selected: Vec::new(),
        metrics: compute_metrics(&model, scenario, splits, &[])?,
        objective_value: None,
        wall_ms: None,
    }];

    for round in 1..=cfg.rounds {
        let started = Instant::now();
        let u_raw: Vec<&EmbeddingBag> = unlabeled.iter().map(|&i| &scenario.images[i].bag).collect();
        let l_raw: Vec<&EmbeddingBag> = labeled.iter().map(|&i| &scenario.images[i].bag).collect();

        let u_emb = embed(&model, cfg.embedding, &u_raw)?;
        let l_emb = embed(&model, cfg.embedding, &l_raw)?;
        let q_emb = embed(&model, cfg.embedding, &query_raw)?;
        let u_bags: Vec<&EmbeddingBag> = match &u_emb {
            Some(v) => v.iter().collect(),
            None => u_raw.clone(),
        };
        let l_bags: Vec<&EmbeddingBag> = match &l_emb {
            Some(v) => v.iter().collect(),
            None => l_raw.clone(),
        };
        let q_bags: Vec<&EmbeddingBag> = match &q_emb {
            Some(v) => v.iter().collect(),
            None => query_raw.clone(),
        };

        let scores: Option<Vec<ProposalScores>> = if request.method.needs_scores() {
            Some(
                u_raw
                    .par_iter()
                    .map(|b| predict_proposal_probs(&model, b))
                    .collect::<Result<_>>()?,
            )
        } else {
            None
        };

        let req = AcquisitionRequest {
            seed: round_seed(request.seed, round),
            ..request.clone()
        };
        let outcome = acquire(
            &req,
            &PoolInputs {
                unlabeled: &u_bags,
                labeled: &l_bags,
                query: &q_bags,
                scores: scores.as_deref(),
                query_kernel: None,
            },
        )?;

        let selected: Vec<usize> = outcome.indices.iter().map(|&k| unlabeled[k]).collect();
        assert_eq!(selected.len(), budget, "acquisition returned a short batch");
        for &i in &selected {
            assert!(!in_labeled[i], "image {i} acquired twice");
            in_labeled[i] = true;
        }
        labeled.extend_from_slice(&selected);
        unlabeled.retain(|&i| !in_labeled[i]);
        assert_eq!(labeled.len(), initial + round * budget);

        model = train_on(scenario, &labeled, &cfg.surrogate, round_seed(cfg.surrogate.seed, round))?;
        let metrics = compute_metrics(&model, scenario, splits, &selected)?;
        rounds.push(RoundRecord {
            round,
            labeled_images: labeled.len(),
            selected,
            metrics,
            objective_value: outcome.objective_value,
            wall_ms: cfg
                .record_wall_time
                .then(|| started.elapsed().as_secs_f64() * 1e3),
        });
    }

    Ok(ALRunReport {
        method: request.method,
        seed: request.seed,
        budget,
        rounds,
    })
}

/// A method-by-seed study over freshly generated scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Experiment {
    pub scenario: ScenarioConfig,
    pub splits: SplitConfig,
    #[serde(rename = "loop")]
    pub loop_config: LoopConfig,
    /// Method parameters shared by every run; `method` is overridden.
    pub request: AcquisitionRequest,
    pub methods: Vec<AcquisitionMethod>,
    pub seeds: Vec<u64>,
}

impl Default for Experiment {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::default(),
            splits: SplitConfig::default(),
            loop_config: LoopConfig::default(),
            request: AcquisitionRequest {
                budget: 25,
                ..AcquisitionRequest::default()
            },
            methods: AcquisitionMethod::ALL.to_vec(),
            seeds: vec![0, 1, 2, 3, 4],
        }
    }
}

/// Scenario, splits and model seeds for one run seed.
pub fn seeded_setup(exp: &Experiment, seed: u64) -> Result<(Scenario, Splits)> {
    let scenario = generate_scenario(&ScenarioConfig {
        seed,
        ..exp.scenario.clone()
    })?;
    let splits = build_splits(&scenario, &SplitConfig {
        seed,
        ..exp.splits.clone()
    })?;
    Ok((scenario, splits))
}

/// Runs every (seed, method) pair. Each run seed replaces the seeds of the
/// scenario, the splits, the surrogate and the request, so a run is fully
/// determined by it. Reports come back seed-major in input order.
pub fn run_experiment(exp: &Experiment) -> Result<Vec<ALRunReport>> {
    if exp.methods.is_empty() || exp.seeds.is_empty() {
        return Err(Error::InvalidConfig("experiment needs methods and seeds".into()));
    }
    let per_seed: Vec<Vec<ALRunReport>> = exp
        .seeds
        .par_iter()
        .map(|&seed| {
            let (scenario, splits) = seeded_setup(exp, seed)?;
            let cfg = LoopConfig {
                surrogate: SurrogateConfig {
                    seed,
                    ..exp.loop_config.surrogate.clone()
                },
                ..exp.loop_config.clone()
            };
            exp.methods
                .par_iter()
                .map(|&method| {
                    let req = AcquisitionRequest {
                        method,
                        seed,
                        ..exp.request.clone()
                    };
                    run_al_loop(&scenario, &splits, &req, &cfg)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(per_seed.into_iter().flatten().collect())
}
