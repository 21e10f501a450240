//! Model evaluation of experiment conditions.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::experiment::{Condition, ExperimentSpec, Paradigm, Probe, TrialSeeds};
use super::search::{self, ProbePoint, SearchOutcome, StaircaseParams};
use crate::bmfd::{ChannelSubset, Jitter};
use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::features::FeatureSet;
use crate::model::Model;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    Bisection,
    Staircase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub seed: u64,
    /// Overrides the experiment's trial count.
    pub trials: Option<usize>,
    /// Channel subsets evaluated in lockstep. Defaults to the configured subset.
    pub subsets: Vec<ChannelSubset>,
    pub mode: SearchMode,
    /// Restricts the run to conditions whose label contains one of these strings.
    pub only: Vec<String>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            trials: None,
            subsets: Vec::new(),
            mode: SearchMode::Bisection,
            only: Vec::new(),
        }
    }
}

/// Predicted threshold of one condition for one channel subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub experiment: String,
    pub condition: String,
    pub series: String,
    pub abscissa: f64,
    pub subset: ChannelSubset,
    pub threshold: f64,
    /// SD of per-trial threshold estimates.
    pub sd: f64,
    pub bounds: (f64, f64),
    pub trials: usize,
    pub non_monotone: bool,
    /// Set when the bounds did not bracket the criterion; `threshold` then holds the violated bound.
    pub bracket_error: Option<String>,
    pub seed: u64,
    pub config_hash: String,
    pub version: String,
    pub trace: Vec<ProbePoint>,
}

/// Model configuration of an experiment run, with the experiment's overrides applied.
pub fn experiment_config(base: &ModelConfig, spec: &ExperimentSpec) -> Result<ModelConfig> {
    if spec.config_overrides.is_null() {
        Ok(base.clone())
    } else {
        base.merged(&spec.config_overrides)
    }
}

fn union_subset(subsets: &[ChannelSubset]) -> ChannelSubset {
    match subsets {
        [one] => *one,
        _ => ChannelSubset::All5,
    }
}

/// Cached per-trial state of one condition: stimulus factories, jitter draws
/// and masker-alone features.
struct ConditionRunner<'a> {
    model: &'a Model,
    probes: Vec<Probe>,
    jitters: Vec<Jitter>,
    masker_features: Vec<FeatureSet>,
    subsets: Vec<ChannelSubset>,
    memo: HashMap<u64, Vec<Vec<f64>>>,
}

impl<'a> ConditionRunner<'a> {
    fn new(model: &'a Model, spec: &ExperimentSpec, index: usize, trials: usize, seed: u64, subsets: &[ChannelSubset]) -> Result<Self> {
        let per_trial: Vec<(Probe, Jitter, FeatureSet)> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let seeds = TrialSeeds::derive(seed, &spec.id, index, t);
                let probe = spec.probe(index, seeds)?;
                let jitter = model.draw_jitter(&mut seeds.jitter_rng());
                let feats = model.features(probe.masker(), &jitter)?;
                Ok((probe, jitter, feats))
            })
            .collect::<Result<_>>()?;
        let mut probes = Vec::with_capacity(trials);
        let mut jitters = Vec::with_capacity(trials);
        let mut masker_features = Vec::with_capacity(trials);
        for (p, j, f) in per_trial {
            probes.push(p);
            jitters.push(j);
            masker_features.push(f);
        }
        Ok(Self {
            model,
            probes,
            jitters,
            masker_features,
            subsets: subsets.to_vec(),
            memo: HashMap::new(),
        })
    }

    fn trial_dprime(&self, t: usize, value: f64) -> Result<Vec<f64>> {
        let sn = self.probes[t].target_plus_masker(value)?;
        let fsn = self.model.features(&sn, &self.jitters[t])?;
        self.subsets
            .iter()
            .map(|s| Ok(self.model.decide_with(&fsn, &self.masker_features[t], s.channels())?.d_prime()))
            .collect()
    }

    /// Per-subset, per-trial d′ at `value`.
    fn eval(&mut self, value: f64) -> Result<Vec<Vec<f64>>> {
        if let Some(v) = self.memo.get(&value.to_bits()) {
            return Ok(v.clone());
        }
        let by_trial: Vec<Vec<f64>> = (0..self.probes.len())
            .into_par_iter()
            .map(|t| self.trial_dprime(t, value))
            .collect::<Result<_>>()?;
        let by_subset: Vec<Vec<f64>> = (0..self.subsets.len())
            .map(|s| by_trial.iter().map(|d| d[s]).collect())
            .collect();
        self.memo.insert(value.to_bits(), by_subset.clone());
        Ok(by_subset)
    }
}

fn search_all(runner: &mut ConditionRunner, c: &Condition, resolution: f64, criterion: f64) -> Vec<Result<SearchOutcome>> {
    (0..runner.subsets.len())
        .map(|s| search::bisect(|v| Ok(runner.eval(v)?.swap_remove(s)), c.bounds, resolution, criterion))
        .collect()
}

/// Thresholds of one condition for every requested subset.
pub fn find_thresholds(
    model_config: &ModelConfig,
    spec: &ExperimentSpec,
    index: usize,
    opts: &RunOptions,
) -> Result<Vec<ThresholdResult>> {
    let subsets = if opts.subsets.is_empty() {
        vec![model_config.bmfd.channel_subset]
    } else {
        opts.subsets.clone()
    };
    let config = experiment_config(model_config, spec)?.with_subset(union_subset(&subsets));
    let model = Model::new(config.clone())?;
    let conditions = spec.conditions();
    let c = conditions
        .get(index)
        .ok_or_else(|| Error::invalid(format!("{}: no condition {index}", spec.id)))?;
    let tracked = spec.tracked();
    let criterion = config.decision.criterion_dprime();
    let mut trials = opts.trials.unwrap_or(spec.trials).max(1);

    let outcomes: Vec<Result<SearchOutcome>> = match opts.mode {
        SearchMode::Bisection => {
            let mut runner = ConditionRunner::new(&model, spec, index, trials, opts.seed, &subsets)?;
            let mut out = search_all(&mut runner, c, tracked.resolution(), criterion);
            if out.iter().any(|o| matches!(o, Ok(o) if o.non_monotone)) {
                // Retry once with twice the trials; the first half are the same tokens.
                trials *= 2;
                let mut wide = ConditionRunner::new(&model, spec, index, trials, opts.seed, &subsets)?;
                out = search_all(&mut wide, c, tracked.resolution(), criterion);
            }
            out
        }
        SearchMode::Staircase => {
            let runner = ConditionRunner::new(&model, spec, index, trials, opts.seed, &subsets)?;
            let params = StaircaseParams::for_bounds(c.bounds, tracked.resolution());
            (0..subsets.len())
                .map(|s| {
                    search::staircase(
                        |v, step| {
                            let d = runner.trial_dprime(step % trials, v)?[s];
                            Ok((d > criterion, d))
                        },
                        c.bounds,
                        &params,
                    )
                })
                .collect()
        }
    };

    let hash = config.hash();
    subsets
        .iter()
        .zip(outcomes)
        .map(|(&subset, outcome)| {
            let base = ThresholdResult {
                experiment: spec.id.clone(),
                condition: c.label.clone(),
                series: c.series.clone(),
                abscissa: c.abscissa,
                subset,
                threshold: f64::NAN,
                sd: 0.0,
                bounds: c.bounds,
                trials,
                non_monotone: false,
                bracket_error: None,
                seed: opts.seed,
                config_hash: hash.clone(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                trace: Vec::new(),
            };
            match outcome {
                Ok(o) => Ok(ThresholdResult {
                    threshold: o.threshold,
                    sd: o.per_trial_sd(criterion),
                    non_monotone: o.non_monotone,
                    trace: o.trace,
                    ..base
                }),
                Err(Error::NoBracket { lo, hi, detail }) => {
                    // Report the violated bound instead of failing the whole experiment.
                    let at_upper = detail.contains("upper");
                    Ok(ThresholdResult {
                        threshold: if at_upper { hi } else { lo },
                        bracket_error: Some(detail),
                        ..base
                    })
                }
                Err(e) => Err(e),
            }
        })
        .collect()
}

/// Mean d′ for every (ITD, IID) pair of a trading experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradingSurface {
    pub subset: ChannelSubset,
    pub itds: Vec<f64>,
    pub iids_db: Vec<f64>,
    /// `dprime[i][j]` at `itds[i]`, `iids_db[j]`.
    pub dprime: Vec<Vec<f64>>,
    /// IID with the lowest mean d′ for each ITD.
    pub minimizing_iid: Vec<f64>,
}

pub fn trading_dprime_curves(
    model_config: &ModelConfig,
    spec: &ExperimentSpec,
    opts: &RunOptions,
) -> Result<Vec<TradingSurface>> {
    let Paradigm::Trading {
        frequency,
        level_db,
        duration,
        itds,
        iids_db,
    } = &spec.paradigm
    else {
        return Err(Error::invalid(format!("{} is not a trading experiment", spec.id)));
    };
    let subsets = if opts.subsets.is_empty() {
        vec![model_config.bmfd.channel_subset]
    } else {
        opts.subsets.clone()
    };
    let config = experiment_config(model_config, spec)?.with_subset(union_subset(&subsets));
    let model = Model::new(config)?;
    let fs = spec.sample_rate;
    let tone = crate::stimuli::generate(&crate::stimuli::StimulusParams {
        frequency: *frequency,
        level_db: *level_db,
        duration: *duration,
        sample_rate: fs,
        ..crate::stimuli::StimulusParams::default()
    })?;
    let reference = crate::signal::StereoSignal::diotic(tone.clone());
    let trials = opts.trials.unwrap_or(spec.trials).max(1);
    let jitters: Vec<Jitter> = (0..trials)
        .map(|t| model.draw_jitter(&mut TrialSeeds::derive(opts.seed, &spec.id, 0, t).jitter_rng()))
        .collect();
    let ref_feats: Vec<FeatureSet> = jitters
        .par_iter()
        .map(|j| model.features(&reference, j))
        .collect::<Result<_>>()?;

    let grid: Vec<(f64, f64)> = itds.iter().flat_map(|&i| iids_db.iter().map(move |&l| (i, l))).collect();
    // [grid point][subset] mean d'
    let means: Vec<Vec<f64>> = grid
        .par_iter()
        .map(|&(itd, iid)| {
            let test = crate::stimuli::apply_interaural(&tone, itd, iid, crate::stimuli::InterauralPhase::InPhase)?;
            let mut sums = vec![0.0; subsets.len()];
            for (j, rf) in jitters.iter().zip(&ref_feats) {
                let tf = model.features(&test, j)?;
                for (k, s) in subsets.iter().enumerate() {
                    sums[k] += model.decide_with(&tf, rf, s.channels())?.d_prime();
                }
            }
            Ok(sums.into_iter().map(|s| s / trials as f64).collect())
        })
        .collect::<Result<_>>()?;

    Ok(subsets
        .iter()
        .enumerate()
        .map(|(k, &subset)| {
            let dprime: Vec<Vec<f64>> = (0..itds.len())
                .map(|i| (0..iids_db.len()).map(|j| means[i * iids_db.len() + j][k]).collect())
                .collect();
            let minimizing_iid = dprime
                .iter()
                .map(|row| {
                    let j = row
                        .iter()
                        .enumerate()
                        .min_by(|a, b| a.1.total_cmp(b.1))
                        .map_or(0, |(j, _)| j);
                    iids_db[j]
                })
                .collect();
            TradingSurface {
                subset,
                itds: itds.clone(),
                iids_db: iids_db.clone(),
                dprime,
                minimizing_iid,
            }
        })
        .collect())
}
