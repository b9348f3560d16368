//! Experiment harness: auditable experiment specs, published benchmark
//! presets, and run-directory orchestration with seed fan-out.
//!
//! A run is described by an [`ExperimentSpec`] — environment, seeding, and
//! the full [`TrainConfig`](crate::trainer::TrainConfig) — stored in a flat
//! key-value text format whose serialization round-trips exactly.
//! [`paper_spec`] builds the published configuration for each benchmark,
//! and [`execute_batch`] trains every seed into its own self-describing
//! run directory.

mod presets;
mod run;
mod spec;

pub use presets::{paper_spec, DEFAULT_LATENT_K};
pub use run::{
    default_out_root, execute_batch, execute_run, export_pf_csv, run_label, BatchSummary,
    RunSummary, OUT_ROOT_ENV,
};
pub use spec::{EnvKind, ExperimentSpec, DEFAULT_LEAF_SEED};
