use std::path::PathBuf;

use clap::Args;
use talisman::acquisition::AcquisitionMethod;
use talisman::io::export_scenario;
use talisman::simulator::{
    run_experiment, seeded_setup, EmbeddingSource, Experiment, ImbalanceSpec, SlicePreset,
};

use crate::config::{config_hash, load_config, parse_enum, write_output};
use crate::error::CliResult;

const COLUMNS: [&str; 10] = [
    "method",
    "seed",
    "round",
    "labeled_size",
    "rare_slice_selected",
    "rare_slice_acc",
    "overall_acc",
    "objective_value",
    "wall_ms",
    "rare_slice_images",
];

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Experiment JSON (scenario, splits, loop, request, methods, seeds).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<AcquisitionMethod>>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long, value_parser = parse_enum::<EmbeddingSource>)]
    embedding: Option<EmbeddingSource>,
    /// Query-set size of a published rare-slice setup, targeting the
    /// scenario's rare cell.
    #[arg(long, value_parser = parse_enum::<SlicePreset>)]
    preset: Option<SlicePreset>,
    /// Fill the wall_ms column (makes the CSV run-dependent).
    #[arg(long)]
    wall_time: bool,
    /// Also write each seed's scenario and splits under this directory.
    #[arg(long)]
    export: Option<PathBuf>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

impl SimulateArgs {
    pub fn resolve(&self) -> CliResult<Experiment> {
        let mut exp: Experiment = load_config(self.config.as_deref())?;
        if let Some(m) = &self.methods {
            exp.methods = m.clone();
        }
        if let Some(s) = &self.seeds {
            exp.seeds = s.clone();
        }
        if let Some(r) = self.rounds {
            exp.loop_config.rounds = r;
        }
        if let Some(b) = self.budget {
            exp.request.budget = b;
        }
        if let Some(e) = self.embedding {
            exp.loop_config.embedding = e;
        }
        if let Some(p) = self.preset {
            exp.splits.imbalance = ImbalanceSpec::rare_slice(exp.scenario.rare_cell);
            exp.splits.query_size = p.query_size();
        }
        exp.loop_config.record_wall_time |= self.wall_time;
        Ok(exp)
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn run(args: SimulateArgs) -> CliResult<()> {
    let exp = args.resolve()?;
    let hash = config_hash(&exp)?;
    let reports = run_experiment(&exp)?;

    if let Some(dir) = &args.export {
        for &seed in &exp.seeds {
            let (scenario, splits) = seeded_setup(&exp, seed)?;
            export_scenario(&dir.join(format!("seed-{seed}")), &scenario, Some(&splits))?;
        }
    }

    // rows are produced after the parallel runs finish, by this one writer
    let mut buf = format!(
        "# config_hash: {hash}\n# rare_slice_acc and overall_acc are region-classification accuracy proxies, not detection AP\n"
    )
    .into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(COLUMNS)?;
        for r in &reports {
            for rec in &r.rounds {
                w.write_record([
                    r.method.name().to_string(),
                    r.seed.to_string(),
                    rec.round.to_string(),
                    rec.labeled_images.to_string(),
                    rec.metrics.rare_slice_objects.to_string(),
                    opt(rec.metrics.rare_slice_accuracy_proxy),
                    rec.metrics.overall_accuracy_proxy.to_string(),
                    opt(rec.objective_value),
                    opt(rec.wall_ms),
                    rec.metrics.rare_slice_images.to_string(),
                ])?;
            }
        }
        w.flush()?;
    }
    write_output(args.output.as_deref(), &buf)
}
