//! Benchmark experiments, simulated threshold searches and result files.

pub mod experiment;
pub mod output;
pub mod registry;
pub mod runner;
pub mod search;
pub mod suite;

pub use experiment::{Condition, ExperimentSpec, Paradigm, Probe, Reference, Tracked, TrialSeeds};
pub use runner::{find_thresholds, trading_dprime_curves, RunOptions, SearchMode, ThresholdResult, TradingSurface};
pub use search::{bisect, ProbePoint, SearchOutcome};
pub use suite::{run_experiment, run_suite, score_pairs, ExperimentResult, Score};
