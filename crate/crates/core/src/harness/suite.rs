//! Running experiments and scoring them against reference data.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::experiment::{ExperimentSpec, Paradigm, Tracked};
use super::registry;
use super::runner::{self, RunOptions, ThresholdResult, TradingSurface};
use crate::bmfd::ChannelSubset;
use crate::config::ModelConfig;
use crate::error::Result;

/// Agreement between predictions and reference values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub subset: ChannelSubset,
    pub points: usize,
    pub rmse: f64,
    /// Squared Pearson correlation.
    pub r2: f64,
}

/// RMSE and squared correlation of `(predicted, reference)` pairs.
pub fn score_pairs(pairs: &[(f64, f64)]) -> (f64, f64) {
    if pairs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = pairs.len() as f64;
    let rmse = (pairs.iter().map(|(p, r)| (p - r) * (p - r)).sum::<f64>() / n).sqrt();
    let mp = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mr = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pairs.iter().map(|(p, r)| (p - mp) * (r - mr)).sum();
    let sxx: f64 = pairs.iter().map(|(p, _)| (p - mp) * (p - mp)).sum();
    let syy: f64 = pairs.iter().map(|(_, r)| (r - mr) * (r - mr)).sum();
    let r2 = if sxx > 0.0 && syy > 0.0 {
        sxy * sxy / (sxx * syy)
    } else {
        f64::NAN
    };
    (rmse, r2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub id: String,
    pub description: String,
    pub tracked: Tracked,
    pub unit: String,
    pub seed: u64,
    pub config_hash: String,
    pub thresholds: Vec<ThresholdResult>,
    pub trading: Vec<TradingSurface>,
    pub scores: Vec<Score>,
    pub assumptions: Vec<String>,
}

impl ExperimentResult {
    pub fn threshold(&self, condition: &str, subset: ChannelSubset) -> Option<&ThresholdResult> {
        self.thresholds
            .iter()
            .find(|t| t.condition == condition && t.subset == subset)
    }

    /// Thresholds of one series and subset, ordered as in the definition.
    pub fn series(&self, series: &str, subset: ChannelSubset) -> Vec<&ThresholdResult> {
        self.thresholds
            .iter()
            .filter(|t| t.series == series && t.subset == subset)
            .collect()
    }
}

fn subsets_of(config: &ModelConfig, opts: &RunOptions) -> Vec<ChannelSubset> {
    if opts.subsets.is_empty() {
        vec![config.bmfd.channel_subset]
    } else {
        opts.subsets.clone()
    }
}

pub fn run_experiment(config: &ModelConfig, spec: &ExperimentSpec, opts: &RunOptions) -> Result<ExperimentResult> {
    spec.validate()?;
    let subsets = subsets_of(config, opts);
    let opts = RunOptions {
        subsets: subsets.clone(),
        ..opts.clone()
    };
    let hash = runner::experiment_config(config, spec)?.hash();
    let mut thresholds = Vec::new();
    let mut trading = Vec::new();
    if matches!(spec.paradigm, Paradigm::Trading { .. }) {
        trading = runner::trading_dprime_curves(config, spec, &opts)?;
    } else {
        let conditions = spec.conditions();
        let selected: Vec<usize> = (0..conditions.len())
            .filter(|&i| opts.only.is_empty() || opts.only.iter().any(|s| conditions[i].label.contains(s.as_str())))
            .collect();
        let per: Vec<Vec<ThresholdResult>> = selected
            .par_iter()
            .map(|&i| runner::find_thresholds(config, spec, i, &opts))
            .collect::<Result<_>>()?;
        thresholds = per.into_iter().flatten().collect();
    }
    let scores = subsets
        .iter()
        .map(|&subset| {
            let pairs: Vec<(f64, f64)> = spec
                .references
                .iter()
                .filter_map(|r| {
                    thresholds
                        .iter()
                        .find(|t| t.condition == r.condition && t.subset == subset)
                        .map(|t| (t.threshold, r.value))
                })
                .collect();
            let (rmse, r2) = score_pairs(&pairs);
            Score {
                subset,
                points: pairs.len(),
                rmse,
                r2,
            }
        })
        .collect();
    Ok(ExperimentResult {
        id: spec.id.clone(),
        description: spec.description.clone(),
        tracked: spec.tracked(),
        unit: spec.tracked().unit().to_string(),
        seed: opts.seed,
        config_hash: hash,
        thresholds,
        trading,
        scores,
        assumptions: spec.assumptions.clone(),
    })
}

/// Runs registered experiments in the given order.
pub fn run_suite(config: &ModelConfig, ids: &[&str], opts: &RunOptions) -> Result<Vec<ExperimentResult>> {
    let specs: Vec<ExperimentSpec> = ids.iter().map(|id| registry::get(id)).collect::<Result<_>>()?;
    specs.iter().map(|s| run_experiment(config, s, opts)).collect()
}
