use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use talisman::io::save_kernel;
use talisman::similarity::{
    build_pairwise_kernel, build_query_kernel, pool_bags, EmbeddingBag, KernelKind, NonnegMode,
    PoolMode,
};

use crate::config::{
    at_path, config_hash, file_sha256, load_bags, load_config, parse_enum, required,
    to_json_line, write_output,
};
use crate::error::CliResult;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum KernelMode {
    /// Query-by-unlabeled targeted similarities.
    #[default]
    Query,
    /// Unlabeled-by-unlabeled cosine of pooled image vectors.
    Pairwise,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    pub query: Option<PathBuf>,
    pub unlabeled: Option<PathBuf>,
    pub kind: KernelMode,
    pub nonneg_mode: NonnegMode,
    pub pool_mode: PoolMode,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct KernelArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    query: Option<PathBuf>,
    #[arg(long)]
    unlabeled: Option<PathBuf>,
    #[arg(long, value_enum)]
    kind: Option<KernelMode>,
    #[arg(long, value_parser = parse_enum::<NonnegMode>)]
    nonneg_mode: Option<NonnegMode>,
    #[arg(long, value_parser = parse_enum::<PoolMode>)]
    pool_mode: Option<PoolMode>,
    /// Kernel file; the provenance sidecar goes to `<output>.json`.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct Sidecar {
    kind: KernelKind,
    nonneg_mode: NonnegMode,
    rows: usize,
    cols: usize,
    file_sha256: String,
    config_hash: String,
}

pub fn run(args: KernelArgs) -> CliResult<()> {
    let mut cfg: KernelConfig = load_config(args.config.as_deref())?;
    if args.query.is_some() {
        cfg.query = args.query;
    }
    if args.unlabeled.is_some() {
        cfg.unlabeled = args.unlabeled;
    }
    if args.output.is_some() {
        cfg.output = args.output;
    }
    cfg.kind = args.kind.unwrap_or(cfg.kind);
    cfg.nonneg_mode = args.nonneg_mode.unwrap_or(cfg.nonneg_mode);
    cfg.pool_mode = args.pool_mode.unwrap_or(cfg.pool_mode);

    let output = required(&cfg.output, "output")?.clone();
    let unlabeled = load_bags(required(&cfg.unlabeled, "unlabeled")?)?;
    let kernel = match cfg.kind {
        KernelMode::Query => {
            let query = load_bags(required(&cfg.query, "query")?)?;
            build_query_kernel(&query, &unlabeled, cfg.nonneg_mode)?
        }
        KernelMode::Pairwise => {
            let refs: Vec<&EmbeddingBag> = unlabeled.iter().collect();
            build_pairwise_kernel(&pool_bags(&refs, cfg.pool_mode)?, cfg.nonneg_mode)?
        }
    };
    save_kernel(&output, &kernel).map_err(at_path(&output))?;

    let sidecar = Sidecar {
        kind: kernel.kind(),
        nonneg_mode: kernel.nonneg_mode(),
        rows: kernel.n_rows(),
        cols: kernel.n_cols(),
        file_sha256: file_sha256(&output)?,
        config_hash: config_hash(&KernelConfig {
            output: None,
            ..cfg
        })?,
    };
    let bytes = to_json_line(&sidecar)?;
    let mut side = output.into_os_string();
    side.push(".json");
    std::fs::write(PathBuf::from(side), &bytes)?;
    write_output(None, &bytes)
}
