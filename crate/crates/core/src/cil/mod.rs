//! Class-incremental experiment harness: scenarios, synthetic data, the
//! per-task training loop, baselines, metrics and memory sweeps.

mod config;
mod metrics;
mod run;
mod scenario;
mod sweep;
mod synth;

pub use config::{Binarizer, Method, RunConfig};
pub use metrics::{
    average_incremental_accuracy, summary, write_metrics_csv, GroupAccuracy, MetricsReport,
};
pub use run::{run, run_on, scenario_for, RunData};
pub use scenario::{make_scenario, CilScenario};
pub use sweep::{sweep_memory, write_sweep_csv, SweepAxis, SweepRow};
pub use synth::{synth_dataset, synth_prototypes, SynthKind, SynthSpec, TRAIN_FRACTION};
