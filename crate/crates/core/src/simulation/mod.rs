//! Monte Carlo designs: covariance structures, planted signal regions and
//! the experiment driver that aggregates error rates and power.

pub mod covariance;
pub mod experiment;
pub mod signals;

pub use covariance::{build_covariance, CovarianceFactor, CovarianceKind, CovarianceSpec};
pub use experiment::{
    default_trunc, run_experiment, simulate_pair, Design, ExperimentConfig, ExperimentResult,
    RunRecord, SimulatedPair,
};
pub use signals::{
    decay_adjust, generate_signal_layout, genotype_code, genotype_transform, inject_signals,
    length_set, sample_mvn, SignalLayout, SignalMode,
};
