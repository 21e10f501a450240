//! Binaural matrix feature decoder: two better-ear and three binaural-interaction channels.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dsp;
use crate::error::{Error, Result};
use crate::periphery::ChannelBank;

/// Interpolation kernel length for jitter and internal delays.
pub const DELAY_TAPS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BmfdChannel {
    BeL,
    BeR,
    BiL,
    BiC,
    BiR,
}

impl BmfdChannel {
    pub const ALL: [BmfdChannel; 5] = [
        BmfdChannel::BeL,
        BmfdChannel::BeR,
        BmfdChannel::BiL,
        BmfdChannel::BiC,
        BmfdChannel::BiR,
    ];

    pub fn label(self) -> &'static str {
        match self {
            BmfdChannel::BeL => "BE_L",
            BmfdChannel::BeR => "BE_R",
            BmfdChannel::BiL => "BI_L",
            BmfdChannel::BiC => "BI_C",
            BmfdChannel::BiR => "BI_R",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelSubset {
    /// All five outputs.
    All5,
    BiLcr,
    BiLr,
    BiC,
    /// Left better-ear channel alone, the monaural model.
    BeL,
}

impl ChannelSubset {
    pub fn channels(self) -> &'static [BmfdChannel] {
        use BmfdChannel::*;
        match self {
            ChannelSubset::All5 => &BmfdChannel::ALL,
            ChannelSubset::BiLcr => &[BiL, BiC, BiR],
            ChannelSubset::BiLr => &[BiL, BiR],
            ChannelSubset::BiC => &[BiC],
            ChannelSubset::BeL => &[BeL],
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "all5" | "bmfd" => Some(ChannelSubset::All5),
            "lcr" => Some(ChannelSubset::BiLcr),
            "lr" => Some(ChannelSubset::BiLr),
            "c" => Some(ChannelSubset::BiC),
            "bel" => Some(ChannelSubset::BeL),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ChannelSubset::All5 => "all5",
            ChannelSubset::BiLcr => "lcr",
            ChannelSubset::BiLr => "lr",
            ChannelSubset::BiC => "c",
            ChannelSubset::BeL => "bel",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BmfdParams {
    pub alpha: f64,
    /// Internal delay as a phase at each channel's center frequency.
    pub tau_phase: f64,
    pub sigma_eps: f64,
    /// Time-jitter standard deviation in seconds.
    pub sigma_delta: f64,
    pub jitter_enabled: bool,
    /// Bandwidth of the jitter processes. Zero draws one constant value per
    /// channel and evaluation.
    pub jitter_cutoff_hz: f64,
    pub channel_subset: ChannelSubset,
}

impl Default for BmfdParams {
    fn default() -> Self {
        Self {
            alpha: 3.0,
            tau_phase: PI / 4.0,
            sigma_eps: 0.25,
            sigma_delta: 105e-6,
            jitter_enabled: true,
            jitter_cutoff_hz: 0.0,
            channel_subset: ChannelSubset::All5,
        }
    }
}

impl BmfdParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::invalid("alpha must be positive"));
        }
        if !(self.tau_phase > 0.0 && self.tau_phase < PI) {
            return Err(Error::invalid("tau_phase must lie in (0, pi)"));
        }
        if !(self.sigma_eps >= 0.0 && self.sigma_delta >= 0.0) {
            return Err(Error::invalid("jitter deviations must be non-negative"));
        }
        if !(self.jitter_cutoff_hz >= 0.0 && self.jitter_cutoff_hz.is_finite()) {
            return Err(Error::invalid("jitter cutoff must be finite and non-negative"));
        }
        Ok(())
    }

    /// Internal delay of a channel in seconds.
    pub fn tau(&self, center_hz: f64) -> f64 {
        self.tau_phase / (2.0 * PI * center_hz)
    }
}

/// One amplitude factor and one time shift per ear and auditory channel,
/// optionally modulated by low-pass Gaussian processes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Jitter {
    pub gain_left: Vec<f64>,
    pub gain_right: Vec<f64>,
    pub delay_left: Vec<f64>,
    pub delay_right: Vec<f64>,
    pub process: Option<JitterProcess>,
}

/// Time-varying jitter, realized on demand for any signal length. The same
/// process always yields the same tracks for a given length and rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JitterProcess {
    pub seed: u64,
    pub cutoff_hz: f64,
    pub sigma_eps: f64,
    pub sigma_delta: f64,
    /// Set by `Jitter::mirrored` so each ear keeps its own track.
    pub swapped: bool,
}

/// Per-sample gain and delay (seconds) of one ear in one channel.
struct Track {
    gain: Vec<f64>,
    delay: Vec<f64>,
}

impl JitterProcess {
    fn track(&self, channel: usize, right: bool, n: usize, fs: f64) -> Track {
        let ear = (right != self.swapped) as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ ((channel as u64) << 1 | ear).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let a = (-2.0 * PI * self.cutoff_hz / fs).exp();
        // Stationary variance of the one-pole output for unit white input.
        let scale = ((1.0 + a) / (1.0 - a)).sqrt();
        let run = |sigma: f64, rng: &mut ChaCha8Rng| -> Vec<f64> {
            let mut y: f64 = StandardNormal.sample(rng);
            y /= scale;
            (0..n)
                .map(|_| {
                    let w: f64 = StandardNormal.sample(rng);
                    y = a * y + (1.0 - a) * w;
                    sigma * scale * y
                })
                .collect()
        };
        let gain = run(self.sigma_eps, &mut rng).into_iter().map(|e| 1.0 + e).collect();
        let delay = run(self.sigma_delta, &mut rng);
        Track { gain, delay }
    }
}

impl Jitter {
    pub fn none(channels: usize) -> Self {
        Self {
            gain_left: vec![1.0; channels],
            gain_right: vec![1.0; channels],
            delay_left: vec![0.0; channels],
            delay_right: vec![0.0; channels],
            process: None,
        }
    }

    /// Draws a jitter set, or the identity when jitter is disabled.
    pub fn draw<R: Rng + ?Sized>(channels: usize, params: &BmfdParams, rng: &mut R) -> Self {
        if !params.jitter_enabled {
            return Self::none(channels);
        }
        if params.jitter_cutoff_hz > 0.0 {
            return Self {
                process: Some(JitterProcess {
                    seed: rng.random(),
                    cutoff_hz: params.jitter_cutoff_hz,
                    sigma_eps: params.sigma_eps,
                    sigma_delta: params.sigma_delta,
                    swapped: false,
                }),
                ..Self::none(channels)
            };
        }
        let eps = Normal::new(0.0, params.sigma_eps).expect("finite deviation");
        let delta = Normal::new(0.0, params.sigma_delta).expect("finite deviation");
        let gains = |rng: &mut R| -> Vec<f64> { (0..channels).map(|_| 1.0 + eps.sample(rng)).collect() };
        let gain_left = gains(rng);
        let gain_right = gains(rng);
        let delay_left = (0..channels).map(|_| delta.sample(rng)).collect();
        let delay_right = (0..channels).map(|_| delta.sample(rng)).collect();
        Self {
            gain_left,
            gain_right,
            delay_left,
            delay_right,
            process: None,
        }
    }

    pub fn len(&self) -> usize {
        self.gain_left.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gain_left.is_empty()
    }

    /// Swaps the ears.
    pub fn mirrored(&self) -> Self {
        Self {
            gain_left: self.gain_right.clone(),
            gain_right: self.gain_left.clone(),
            delay_left: self.delay_right.clone(),
            delay_right: self.delay_left.clone(),
            process: self.process.map(|p| JitterProcess {
                swapped: !p.swapped,
                ..p
            }),
        }
    }
}

/// Gain and delay applied to a channel, clipped at zero. A track adds its
/// per-sample gain and delay on top of `delay_samples`.
fn jittered(x: &[f64], gain: f64, delay_samples: f64, track: Option<&Track>, fs: f64) -> Vec<f64> {
    let mut y = match track {
        Some(t) => {
            let d: Vec<f64> = t.delay.iter().map(|&v| v * fs + delay_samples).collect();
            let mut y = dsp::variable_delay(x, &d);
            y.iter_mut().zip(&t.gain).for_each(|(v, g)| *v *= gain * g);
            y
        }
        None if delay_samples == 0.0 => x.to_vec(),
        None => dsp::delay(x, delay_samples, DELAY_TAPS),
    };
    if track.is_none() && gain != 1.0 {
        y.iter_mut().for_each(|v| *v *= gain);
    }
    y.iter_mut().for_each(|v| {
        if *v < 0.0 {
            *v = 0.0
        }
    });
    y
}

fn tracks(jitter: &Jitter, p: usize, n: usize, fs: f64) -> (Option<Track>, Option<Track>) {
    match &jitter.process {
        Some(pr) => (Some(pr.track(p, false, n, fs)), Some(pr.track(p, true, n, fs))),
        None => (None, None),
    }
}

pub fn apply_jitter(left: &ChannelBank, right: &ChannelBank, jitter: &Jitter) -> Result<(ChannelBank, ChannelBank)> {
    left.check_compatible(right)?;
    check_jitter(left, jitter)?;
    let fs = left.sample_rate as f64;
    let mut l = left.clone();
    let mut r = right.clone();
    for p in 0..left.num_channels() {
        let (tl, tr) = tracks(jitter, p, left.len(), fs);
        l.channels[p] = jittered(&left.channels[p], jitter.gain_left[p], jitter.delay_left[p] * fs, tl.as_ref(), fs);
        r.channels[p] = jittered(&right.channels[p], jitter.gain_right[p], jitter.delay_right[p] * fs, tr.as_ref(), fs);
    }
    Ok((l, r))
}

fn check_jitter(bank: &ChannelBank, jitter: &Jitter) -> Result<()> {
    if jitter.len() != bank.num_channels() {
        return Err(Error::shape(format!(
            "jitter has {} channels, bank has {}",
            jitter.len(),
            bank.num_channels()
        )));
    }
    Ok(())
}

/// The configured subset of BMFD outputs, in subset order.
#[derive(Debug, Clone, PartialEq)]
pub struct BmfdOutput {
    pub channels: Vec<(BmfdChannel, ChannelBank)>,
    /// Jittered left and right inputs, kept when a BI channel is present so
    /// that BI levels can be referred to the ear levels.
    pub ears: Option<(ChannelBank, ChannelBank)>,
}

impl BmfdOutput {
    pub fn get(&self, which: BmfdChannel) -> Option<&ChannelBank> {
        self.channels.iter().find(|(c, _)| *c == which).map(|(_, b)| b)
    }
}

/// Computes the BMFD outputs from adapted left and right banks. Jitter and
/// the internal delay of the inhibitory input are realized as one combined
/// fractional delay per signal.
pub fn binaural_interaction(
    left: &ChannelBank,
    right: &ChannelBank,
    params: &BmfdParams,
    jitter: &Jitter,
) -> Result<BmfdOutput> {
    params.validate()?;
    left.check_compatible(right)?;
    check_jitter(left, jitter)?;
    let wanted = params.channel_subset.channels();
    let need = |c: BmfdChannel| wanted.contains(&c);
    let fs = left.sample_rate as f64;
    let n = left.len();
    let np = left.num_channels();
    let mut out: Vec<(BmfdChannel, Vec<Vec<f64>>)> =
        wanted.iter().map(|&c| (c, Vec::with_capacity(np))).collect();
    let push = |out: &mut Vec<(BmfdChannel, Vec<Vec<f64>>)>, c: BmfdChannel, v: Vec<f64>| {
        if let Some(slot) = out.iter_mut().find(|(k, _)| *k == c) {
            slot.1.push(v);
        }
    };

    let keep_ears = wanted.iter().any(|c| matches!(c, BmfdChannel::BiL | BmfdChannel::BiC | BmfdChannel::BiR));
    let mut ears = (Vec::new(), Vec::new());

    for p in 0..np {
        let tau = params.tau(left.center_freqs[p]) * fs;
        let (gl, gr) = (jitter.gain_left[p], jitter.gain_right[p]);
        let (dl, dr) = (jitter.delay_left[p] * fs, jitter.delay_right[p] * fs);
        let (tl, tr) = tracks(jitter, p, n, fs);
        let (tl, tr) = (tl.as_ref(), tr.as_ref());
        let l = jittered(&left.channels[p], gl, dl, tl, fs);
        let r = jittered(&right.channels[p], gr, dr, tr, fs);
        if need(BmfdChannel::BiL) {
            let r_tau = jittered(&right.channels[p], gr, dr + tau, tr, fs);
            let v = l
                .iter()
                .zip(&r_tau)
                .map(|(&a, &b)| (a - params.alpha * b).max(0.0))
                .collect();
            push(&mut out, BmfdChannel::BiL, v);
        }
        if need(BmfdChannel::BiR) {
            let l_tau = jittered(&left.channels[p], gl, dl + tau, tl, fs);
            let v = r
                .iter()
                .zip(&l_tau)
                .map(|(&a, &b)| (a - params.alpha * b).max(0.0))
                .collect();
            push(&mut out, BmfdChannel::BiR, v);
        }
        if need(BmfdChannel::BiC) {
            let v = l.iter().zip(&r).map(|(&a, &b)| (a * b).sqrt()).collect();
            push(&mut out, BmfdChannel::BiC, v);
        }
        if keep_ears {
            ears.0.push(l.clone());
            ears.1.push(r.clone());
        }
        if need(BmfdChannel::BeR) {
            push(&mut out, BmfdChannel::BeR, r);
        }
        if need(BmfdChannel::BeL) {
            push(&mut out, BmfdChannel::BeL, l);
        }
    }
    let bank = |channels| ChannelBank {
        channels,
        center_freqs: left.center_freqs.clone(),
        sample_rate: left.sample_rate,
    };
    debug_assert!(out.iter().all(|(_, v)| v.iter().all(|c| c.len() == n)));
    Ok(BmfdOutput {
        channels: out.into_iter().map(|(c, channels)| (c, bank(channels))).collect(),
        ears: keep_ears.then(|| (bank(ears.0), bank(ears.1))),
    })
}
