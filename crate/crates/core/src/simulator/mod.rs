//! Synthetic rare-class / rare-slice scenarios and the active-learning loop
//! that runs acquisition methods against them.

pub mod al_loop;
pub mod metrics;
pub mod scenario;
pub mod splits;
pub mod surrogate;

pub use scenario::{generate_scenario, Cell, Image, RegionLabel, Scenario, ScenarioConfig};
pub use splits::{
    build_initial_labeled_rare_class, build_initial_labeled_rare_slice, build_splits,
    ImbalanceSpec, SlicePreset, SplitConfig, SplitReport, Splits,
};
pub use surrogate::{
    logit_bag, predict_proposal_probs, train_surrogate, EmbeddingSource, SurrogateConfig,
    SurrogateModel,
};
pub use metrics::{compute_metrics, RegionClassifier, RoundMetrics};
pub use al_loop::{
    round_seed, run_al_loop, run_experiment, seeded_setup, ALRunReport, Experiment, LoopConfig,
    RoundRecord,
};
