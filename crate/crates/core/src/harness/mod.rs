//! Experiment configuration, stimulus generation and output files for the CLI.

pub mod config;
pub mod experiments;
pub mod fit;
pub mod output;
pub mod presets;
pub mod resource;
pub mod units;

pub use config::parse_config;
pub use experiments::{
    measure_rate, run_ff_curve, run_montecarlo, run_relu_curve, run_trace, MonteCarloStats,
    RatePoint, ReluCurve, ReluOutput,
};
pub use fit::{linear_fit, LinearFit};
pub use output::{config_hash, Format};
pub use presets::{Biases, ExperimentKind, ExperimentSpec};
pub use resource::{resource_report, ResourceModel, ResourceReport};
