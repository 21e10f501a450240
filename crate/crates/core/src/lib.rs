#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bmfd;
pub mod config;
pub mod decision;
pub mod dsp;
pub mod error;
pub mod features;
pub mod harness;
pub mod model;
pub mod periphery;
pub mod response;
pub mod signal;
pub mod stimuli;
pub mod table;

pub use error::{Error, Result};
pub use signal::{Signal, StereoSignal};
pub use bmfd::{BmfdChannel, ChannelSubset};
pub use config::ModelConfig;
pub use harness::{run_experiment, ExperimentResult, ExperimentSpec, RunOptions};
pub use model::{Decision, Model};
