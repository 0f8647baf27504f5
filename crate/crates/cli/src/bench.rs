use std::path::PathBuf;
use std::time::{Duration, Instant};

use clap::Args;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use talisman::acquisition::{smi_select, AcquisitionMethod, GreedyVariant};
use talisman::maximizer::Maximizer;
use talisman::similarity::{build_query_kernel, EmbeddingBag, NonnegMode};
use talisman::{Error, ObjectiveKind};

use crate::config::{config_hash, load_config, to_json_line, write_output};
use crate::error::CliResult;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    /// Unlabeled pool sizes |U|.
    pub sizes: Vec<usize>,
    pub query_size: usize,
    pub dim: usize,
    pub regions_per_bag: usize,
    pub budget: usize,
    pub methods: Vec<AcquisitionMethod>,
    pub maximizer: GreedyVariant,
    pub epsilon: f64,
    pub nonneg_mode: NonnegMode,
    /// Each timing is the best of this many runs.
    pub repeats: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            sizes: vec![1_000, 10_000, 100_000],
            query_size: 5,
            dim: 64,
            regions_per_bag: 1,
            budget: 100,
            methods: vec![AcquisitionMethod::Flmi, AcquisitionMethod::Gcmi],
            maximizer: GreedyVariant::Lazy,
            epsilon: Maximizer::DEFAULT_EPSILON,
            nonneg_mode: NonnegMode::ClampZero,
            repeats: 1,
            seed: 0,
        }
    }
}

impl BenchConfig {
    fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m).into());
        if self.sizes.is_empty() {
            return bad("sizes must not be empty".into());
        }
        if self.sizes.contains(&0) {
            return bad("pool size |U| must be at least 1".into());
        }
        if self.query_size == 0 || self.dim == 0 || self.regions_per_bag == 0 || self.repeats == 0 {
            return bad("query_size, dim, regions_per_bag and repeats must be at least 1".into());
        }
        if self.methods.is_empty() {
            return bad("methods must not be empty".into());
        }
        if let Some(m) = self
            .methods
            .iter()
            .find(|m| !matches!(m, AcquisitionMethod::Flmi | AcquisitionMethod::Gcmi))
        {
            return bad(format!("bench times FLMI and GCMI only, got {m}"));
        }
        if self.budget == 0 {
            return Err(Error::ZeroBudget.into());
        }
        let smallest = *self.sizes.iter().min().unwrap();
        if self.budget > smallest {
            return Err(Error::BudgetExceedsPool {
                budget: self.budget,
                pool: smallest,
            }
            .into());
        }
        Ok(())
    }

    fn maximizer(&self) -> Maximizer {
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

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<AcquisitionMethod>>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    maximizer: Option<GreedyVariant>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct BenchRow {
    size: usize,
    method: AcquisitionMethod,
    kernel_ms: f64,
    select_ms: f64,
    evaluations: u64,
    objective_value: f64,
    /// `|Q| * |U| * 4`.
    kernel_bytes: u64,
    embedding_bytes: u64,
    /// Kernel, embeddings and per-element greedy state.
    est_peak_bytes: u64,
}

#[derive(Debug, Serialize)]
struct Scaling {
    method: AcquisitionMethod,
    from: usize,
    to: usize,
    size_ratio: f64,
    select_time_ratio: f64,
}

#[derive(Debug, Serialize)]
struct BenchReport {
    threads: usize,
    rows: Vec<BenchRow>,
    scaling: Vec<Scaling>,
    config_hash: String,
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn synthetic_bags(rng: &mut ChaCha8Rng, n: usize, rows: usize, dim: usize) -> Vec<EmbeddingBag> {
    (0..n)
        .map(|_| {
            let data = (0..rows * dim).map(|_| rng.random_range(-1.0f32..1.0)).collect();
            EmbeddingBag::new(rows, dim, data).expect("finite synthetic data")
        })
        .collect()
}

pub fn run(args: BenchArgs) -> CliResult<()> {
    let mut cfg: BenchConfig = load_config(args.config.as_deref())?;
    if let Some(s) = args.sizes {
        cfg.sizes = s;
    }
    if let Some(m) = args.methods {
        cfg.methods = m;
    }
    cfg.budget = args.budget.unwrap_or(cfg.budget);
    cfg.maximizer = args.maximizer.unwrap_or(cfg.maximizer);
    cfg.repeats = args.repeats.unwrap_or(cfg.repeats);
    cfg.seed = args.seed.unwrap_or(cfg.seed);
    cfg.validate()?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let query = synthetic_bags(&mut rng, cfg.query_size, cfg.regions_per_bag, cfg.dim);
    let mut rows = Vec::new();
    for &size in &cfg.sizes {
        let pool = synthetic_bags(&mut rng, size, cfg.regions_per_bag, cfg.dim);
        let mut kernel_time = Duration::MAX;
        let mut kernel = None;
        for _ in 0..cfg.repeats {
            let start = Instant::now();
            let k = build_query_kernel(&query, &pool, cfg.nonneg_mode)?;
            kernel_time = kernel_time.min(start.elapsed());
            kernel = Some(k);
        }
        let kernel = kernel.expect("repeats >= 1");
        let kernel_bytes = (cfg.query_size * size * 4) as u64;
        let embedding_bytes = ((cfg.query_size + size) * cfg.regions_per_bag * cfg.dim * 4) as u64;
        for &method in &cfg.methods {
            let kind = if method == AcquisitionMethod::Flmi {
                ObjectiveKind::Flmi
            } else {
                ObjectiveKind::Gcmi
            };
            let mut best = Duration::MAX;
            let mut result = None;
            for _ in 0..cfg.repeats {
                let start = Instant::now();
                let r = smi_select(&kernel, kind, cfg.budget, cfg.maximizer())?;
                best = best.min(start.elapsed());
                result = Some(r);
            }
            let r = result.expect("repeats >= 1");
            // memo vectors plus the lazy heap, all 8-16 bytes per element
            let state_bytes = (size * 24 + cfg.query_size * 8) as u64;
            rows.push(BenchRow {
                size,
                method,
                kernel_ms: ms(kernel_time),
                select_ms: ms(best),
                evaluations: r.evaluations,
                objective_value: r.objective_value,
                kernel_bytes,
                embedding_bytes,
                est_peak_bytes: kernel_bytes + embedding_bytes + state_bytes,
            });
        }
    }

    let mut scaling = Vec::new();
    for &method in &cfg.methods {
        let mine: Vec<&BenchRow> = rows.iter().filter(|r| r.method == method).collect();
        for w in mine.windows(2) {
            scaling.push(Scaling {
                method,
                from: w[0].size,
                to: w[1].size,
                size_ratio: w[1].size as f64 / w[0].size as f64,
                select_time_ratio: w[1].select_ms / w[0].select_ms.max(1e-6),
            });
        }
    }
    let report = BenchReport {
        threads: rayon::current_num_threads(),
        rows,
        scaling,
        config_hash: config_hash(&cfg)?,
    };
    write_output(args.output.as_deref(), &to_json_line(&report)?)
}
