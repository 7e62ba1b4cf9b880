//! Experiment plumbing: adversaries, configs, run records, regret fits.

pub mod adversary;
pub mod config;
pub mod experiment;
pub mod fit;
pub mod record;

pub use adversary::{gen_lower_bound_instance, gen_lower_bound_loop_instance, AdversarySpec};
pub use config::{ExperimentConfig, LambdaSpec, LowerBoundSpec, MdpSource};
pub use experiment::{run_experiment, run_single, ExperimentOutput};
pub use fit::{aggregate, fit_regret_slope, AggregateRow, SlopeFit};
pub use record::{Algorithm, RunRecord, StepRow, SummaryRow};
