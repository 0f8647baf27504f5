use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use serde::{Deserialize, Serialize};
use talisman::acquisition::{
    acquire, smi_select, AcquisitionMethod, AcquisitionRequest, GreedyVariant, PoolInputs,
    ProposalScores,
};
use talisman::similarity::{build_query_kernel_refs, EmbeddingBag, NonnegMode, PoolMode};
use talisman::{Error, ObjectiveKind};

use crate::config::{
    config_hash, load_bags, load_config, load_kernel, parse_enum, read, required, to_json_line,
    write_output,
};
use crate::error::CliResult;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectConfig {
    /// Query bags (TLSM). Needed by the query-driven methods unless a
    /// kernel is given.
    pub query: Option<PathBuf>,
    pub unlabeled: Option<PathBuf>,
    /// Labeled bags, used by coreset.
    pub labeled: Option<PathBuf>,
    /// JSON array with one `[[p_c, ...], ...]` proposal matrix per unlabeled image.
    pub scores: Option<PathBuf>,
    /// Precomputed query kernel (TLKN).
    pub kernel: Option<PathBuf>,
    pub request: AcquisitionRequest,
    pub output: Option<PathBuf>,
    /// Adds wall-clock timings; off so repeated runs are byte-identical.
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// JSON config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    query: Option<PathBuf>,
    #[arg(long)]
    unlabeled: Option<PathBuf>,
    #[arg(long)]
    labeled: Option<PathBuf>,
    #[arg(long)]
    scores: Option<PathBuf>,
    #[arg(long)]
    kernel: Option<PathBuf>,
    #[arg(long)]
    method: Option<AcquisitionMethod>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    k_mult: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, value_parser = parse_enum::<NonnegMode>)]
    nonneg_mode: Option<NonnegMode>,
    #[arg(long)]
    maximizer: Option<GreedyVariant>,
    #[arg(long, value_parser = parse_enum::<PoolMode>)]
    pool_mode: Option<PoolMode>,
    #[arg(long)]
    leastconf_conventional: bool,
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long)]
    timing: bool,
}

impl SelectArgs {
    pub fn resolve(self) -> CliResult<SelectConfig> {
        let mut c: SelectConfig = load_config(self.config.as_deref())?;
        macro_rules! set {
            ($($field:ident),*) => { $(if let Some(v) = self.$field { c.$field = Some(v); })* };
        }
        set!(query, unlabeled, labeled, scores, kernel, output);
        macro_rules! set_req {
            ($($field:ident),*) => { $(if let Some(v) = self.$field { c.request.$field = v; })* };
        }
        set_req!(method, budget, seed, k_mult, epsilon, lambda, nonneg_mode, maximizer, pool_mode);
        c.request.leastconf_conventional |= self.leastconf_conventional;
        c.timing |= self.timing;
        Ok(c)
    }
}

#[derive(Debug, Serialize)]
struct Timing {
    kernel_ms: f64,
    select_ms: f64,
}

#[derive(Debug, Serialize)]
struct SelectOutput {
    method: AcquisitionMethod,
    budget: usize,
    pool_size: usize,
    indices: Vec<usize>,
    gains: Option<Vec<f64>>,
    objective_value: Option<f64>,
    evaluations: Option<u64>,
    timing: Option<Timing>,
    config_hash: String,
}

fn load_scores(path: &Path) -> CliResult<Vec<ProposalScores>> {
    let raw: Vec<Vec<Vec<f64>>> = serde_json::from_slice(&read(path)?)?;
    Ok(raw
        .iter()
        .map(|rows| ProposalScores::from_rows(rows))
        .collect::<talisman::Result<_>>()?)
}

fn load_optional(path: &Option<PathBuf>) -> CliResult<Vec<EmbeddingBag>> {
    Ok(match path {
        Some(p) => load_bags(p)?,
        None => Vec::new(),
    })
}

pub fn run(args: SelectArgs) -> CliResult<()> {
    let cfg = args.resolve()?;
    let req = &cfg.request;
    req.validate()?;
    let unlabeled = load_bags(required(&cfg.unlabeled, "unlabeled")?)?;
    let pool = unlabeled.len();
    if req.budget > pool {
        return Err(Error::BudgetExceedsPool {
            budget: req.budget,
            pool,
        }
        .into());
    }
    let labeled = load_optional(&cfg.labeled)?;
    let query = if req.method.needs_query() && cfg.kernel.is_none() {
        load_optional(&cfg.query)?
    } else {
        Vec::new()
    };
    let scores = cfg.scores.as_deref().map(load_scores).transpose()?;
    let given_kernel = cfg.kernel.as_deref().map(load_kernel).transpose()?;
    if let Some(k) = &given_kernel {
        if k.n_cols() != pool {
            return Err(Error::DimMismatch {
                expected: pool,
                found: k.n_cols(),
            }
            .into());
        }
    }

    let u_refs: Vec<&EmbeddingBag> = unlabeled.iter().collect();
    let l_refs: Vec<&EmbeddingBag> = labeled.iter().collect();
    let q_refs: Vec<&EmbeddingBag> = query.iter().collect();

    let start = Instant::now();
    let built = match (&given_kernel, req.method.needs_query()) {
        (None, true) => {
            if q_refs.is_empty() {
                return Err(Error::EmptyInput("query set").into());
            }
            Some(build_query_kernel_refs(&q_refs, &u_refs, req.nonneg_mode)?)
        }
        _ => None,
    };
    let kernel = given_kernel.as_ref().or(built.as_ref());
    let kernel_ms = start.elapsed().as_secs_f64() * 1e3;

    let start = Instant::now();
    let (indices, gains, objective_value, evaluations) = match req.method {
        AcquisitionMethod::Flmi | AcquisitionMethod::Gcmi => {
            let kind = if req.method == AcquisitionMethod::Flmi {
                ObjectiveKind::Flmi
            } else {
                ObjectiveKind::Gcmi
            };
            let r = smi_select(kernel.expect("query kernel"), kind, req.budget, req.maximizer())?;
            (r.indices, Some(r.gains), Some(r.objective_value), Some(r.evaluations))
        }
        _ => {
            let inputs = PoolInputs {
                unlabeled: &u_refs,
                labeled: &l_refs,
                query: &q_refs,
                scores: scores.as_deref(),
                query_kernel: kernel,
            };
            let out = acquire(req, &inputs)?;
            (out.indices, None, out.objective_value, out.evaluations)
        }
    };
    let select_ms = start.elapsed().as_secs_f64() * 1e3;

    let hashed = SelectConfig {
        output: None,
        ..cfg.clone()
    };
    let out = SelectOutput {
        method: req.method,
        budget: req.budget,
        pool_size: pool,
        indices,
        gains,
        objective_value,
        evaluations,
        timing: cfg.timing.then_some(Timing {
            kernel_ms,
            select_ms,
        }),
        config_hash: config_hash(&hashed)?,
    };
    write_output(cfg.output.as_deref(), &to_json_line(&out)?)
}
