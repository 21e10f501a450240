//! Steady-state BMFD output of a single auditory channel as a function of
//! interaural phase or level difference. The BMFD is driven by the half-wave
//! rectified channel signals, with adaptation and jitter off.

use serde::{Deserialize, Serialize};

use crate::bmfd::{self, BmfdChannel, ChannelSubset, Jitter};
use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::periphery::{AdaptationMode, FilterbankSpec};
use crate::signal::StereoSignal;
use crate::stimuli::{generate, StimulusParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponsePoint {
    /// IPD in radians or ILD in dB.
    pub x: f64,
    /// Mean-square output per BMFD channel, in `BmfdChannel::ALL` order.
    pub power: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseCurve {
    pub frequency: f64,
    pub level_db: f64,
    pub variable: String,
    pub points: Vec<ResponsePoint>,
}

impl ResponseCurve {
    pub fn channel(&self, which: BmfdChannel) -> Vec<(f64, f64)> {
        let k = BmfdChannel::ALL.iter().position(|c| *c == which).expect("listed channel");
        self.points.iter().map(|p| (p.x, p.power[k])).collect()
    }

    /// Value of `x` at the smallest and largest response of `which`.
    pub fn extrema(&self, which: BmfdChannel) -> (f64, f64) {
        let pts = self.channel(which);
        let min = pts.iter().min_by(|a, b| a.1.total_cmp(&b.1)).map_or(f64::NAN, |p| p.0);
        let max = pts.iter().max_by(|a, b| a.1.total_cmp(&b.1)).map_or(f64::NAN, |p| p.0);
        (min, max)
    }
}

const DURATION: f64 = 0.3;
const SKIP: f64 = 0.05;

fn single_channel_model(config: &ModelConfig, frequency: f64) -> Result<Model> {
    let mut cfg = config.clone().with_jitter(false).with_subset(ChannelSubset::All5);
    cfg.adaptation.mode = AdaptationMode::None;
    cfg.filterbank = FilterbankSpec {
        f_low: frequency,
        f_high: frequency * 1.001,
        ..cfg.filterbank
    };
    let model = Model::new(cfg)?;
    if model.num_channels() != 1 {
        return Err(Error::invalid(format!("could not place a single channel at {frequency} Hz")));
    }
    Ok(model)
}

fn steady_power(model: &Model, stimulus: &StereoSignal) -> Result<Vec<f64>> {
    let l = model.ear(stimulus.left())?;
    let r = model.ear(stimulus.right())?;
    let out = bmfd::binaural_interaction(&l.adapted, &r.adapted, &model.config().bmfd, &Jitter::none(1))?;
    let fs = stimulus.sample_rate() as f64;
    let skip = (SKIP * fs) as usize;
    BmfdChannel::ALL
        .iter()
        .map(|&c| {
            let bank = out.get(c).ok_or_else(|| Error::invalid("missing BMFD channel"))?;
            let x = &bank.channels[0];
            let seg = &x[skip.min(x.len())..x.len().saturating_sub(skip)];
            Ok(seg.iter().map(|v| v * v).sum::<f64>() / seg.len().max(1) as f64)
        })
        .collect()
}

fn tone(frequency: f64, level_db: f64, phase: f64, fs: u32) -> Result<crate::Signal> {
    generate(&StimulusParams {
        frequency,
        level_db,
        duration: DURATION,
        phase,
        sample_rate: fs,
        ..StimulusParams::tone(frequency, level_db, DURATION)
    })
}

/// Output versus IPD = phase(left) - phase(right), in radians.
pub fn response_vs_ipd(config: &ModelConfig, frequency: f64, level_db: f64, ipds: &[f64], sample_rate: u32) -> Result<ResponseCurve> {
    let model = single_channel_model(config, frequency)?;
    let right = tone(frequency, level_db, 0.0, sample_rate)?;
    let points = ipds
        .iter()
        .map(|&ipd| {
            let st = StereoSignal::new(tone(frequency, level_db, ipd, sample_rate)?, right.clone())?;
            Ok(ResponsePoint {
                x: ipd,
                power: steady_power(&model, &st)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ResponseCurve {
        frequency,
        level_db,
        variable: "ipd_rad".into(),
        points,
    })
}

/// Output versus ILD = level(left) - level(right), split symmetrically around `level_db`.
pub fn response_vs_ild(config: &ModelConfig, frequency: f64, level_db: f64, ilds: &[f64], sample_rate: u32) -> Result<ResponseCurve> {
    let model = single_channel_model(config, frequency)?;
    let points = ilds
        .iter()
        .map(|&ild| {
            let st = StereoSignal::new(
                tone(frequency, level_db + ild / 2.0, 0.0, sample_rate)?,
                tone(frequency, level_db - ild / 2.0, 0.0, sample_rate)?,
            )?;
            Ok(ResponsePoint {
                x: ild,
                power: steady_power(&model, &st)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ResponseCurve {
        frequency,
        level_db,
        variable: "ild_db".into(),
        points,
    })
}

/// Evenly spaced grid over [-pi, pi) with the given step in degrees.
pub fn ipd_grid(step_deg: f64) -> Vec<f64> {
    let n = (360.0 / step_deg).round() as usize;
    (0..n).map(|i| (-180.0 + i as f64 * step_deg).to_radians()).collect()
}
