//! Stimulus generators and interaural manipulations.

mod wav;

pub use wav::{read_wav, write_wav, WavEncoding};

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dsp;
use crate::error::{Error, Result};
use crate::signal::{db_spl_to_rms, rms, Signal, StereoSignal};

pub const DEFAULT_SAMPLE_RATE: u32 = 48_000;
pub const DEFAULT_RAMP: f64 = 0.010;

/// Taps of the windowed-sinc kernel used for sub-sample ITDs.
const ITD_TAPS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StimulusKind {
    Tone,
    GaussianNoise,
    BandNoise,
    SamNoise,
    SquarewaveAm,
    SpeechEnvelopeNoise,
}

/// Modulation depth given either as linear `m` or in dB (20 log10 m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Depth {
    Linear(f64),
    Db(f64),
}

impl Depth {
    pub fn linear(self) -> f64 {
        match self {
            Depth::Linear(m) => m,
            Depth::Db(db) => 10f64.powf(db / 20.0),
        }
    }
}

impl Default for Depth {
    fn default() -> Self {
        Depth::Linear(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StimulusParams {
    pub kind: StimulusKind,
    /// Tone frequency.
    pub frequency: f64,
    /// Lower and upper band edge for noise carriers. `None` means 0 Hz to Nyquist.
    pub band: Option<(f64, f64)>,
    /// Level of the steady portion in dB SPL. For modulated kinds this is the
    /// carrier level unless `equal_power` is set.
    pub level_db: f64,
    pub duration: f64,
    pub modulation_rate: f64,
    pub modulation_depth: Depth,
    /// Renormalize to `level_db` after modulation.
    pub equal_power: bool,
    /// Raised-cosine onset and offset ramp.
    pub ramp: f64,
    /// Starting phase of tones in radians.
    pub phase: f64,
    pub seed: u64,
    pub sample_rate: u32,
}

impl Default for StimulusParams {
    fn default() -> Self {
        Self {
            kind: StimulusKind::Tone,
            frequency: 1000.0,
            band: None,
            level_db: 65.0,
            duration: 0.5,
            modulation_rate: 0.0,
            modulation_depth: Depth::default(),
            equal_power: false,
            ramp: DEFAULT_RAMP,
            phase: 0.0,
            seed: 0,
            sample_rate: DEFAULT_SAMPLE_RATE,
        }
    }
}

impl StimulusParams {
    pub fn tone(frequency: f64, level_db: f64, duration: f64) -> Self {
        Self {
            kind: StimulusKind::Tone,
            frequency,
            level_db,
            duration,
            ..Self::default()
        }
    }

    pub fn band_noise(low: f64, high: f64, level_db: f64, duration: f64, seed: u64) -> Self {
        Self {
            kind: StimulusKind::BandNoise,
            band: Some((low, high)),
            level_db,
            duration,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nyquist = self.sample_rate as f64 / 2.0;
        if self.sample_rate == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if !(self.duration > 0.0) {
            return Err(Error::invalid(format!(
                "duration must be positive, got {}",
                self.duration
            )));
        }
        if !(self.ramp >= 0.0) || 2.0 * self.ramp > self.duration {
            return Err(Error::invalid(format!(
                "ramp {} s does not fit duration {} s",
                self.ramp, self.duration
            )));
        }
        if self.kind == StimulusKind::Tone && !(self.frequency > 0.0 && self.frequency < nyquist) {
            return Err(Error::invalid(format!(
                "tone frequency {} Hz outside (0, {nyquist})",
                self.frequency
            )));
        }
        if let Some((lo, hi)) = self.band {
            if !(lo >= 0.0 && lo < hi) {
                return Err(Error::invalid(format!("band edges not ordered: {lo}..{hi}")));
            }
            if hi >= nyquist {
                return Err(Error::invalid(format!(
                    "band edge {hi} Hz at or above Nyquist {nyquist} Hz"
                )));
            }
        }
        let m = self.modulation_depth.linear();
        if !(0.0..=1.0).contains(&m) {
            return Err(Error::invalid(format!("modulation depth {m} outside [0, 1]")));
        }
        if matches!(
            self.kind,
            StimulusKind::SamNoise | StimulusKind::SquarewaveAm | StimulusKind::SpeechEnvelopeNoise
        ) && !(self.modulation_rate > 0.0)
        {
            return Err(Error::invalid("modulated stimulus needs a positive rate"));
        }
        Ok(())
    }

    fn len(&self) -> usize {
        (self.duration * self.sample_rate as f64).round() as usize
    }
}

pub fn generate(params: &StimulusParams) -> Result<Signal> {
    params.validate()?;
    let fs = params.sample_rate as f64;
    let n = params.len();
    if n == 0 {
        return Err(Error::invalid("duration shorter than one sample"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let target = db_spl_to_rms(params.level_db);
    let m = params.modulation_depth.linear();

    let mut x = match params.kind {
        StimulusKind::Tone => {
            let w = 2.0 * PI * params.frequency / fs;
            // Unit rms.
            (0..n)
                .map(|i| 2f64.sqrt() * (w * i as f64 + params.phase).sin())
                .collect()
        }
        _ => noise_carrier(&mut rng, n, fs, params.band),
    };
    normalize_rms(&mut x, target);

    let envelope: Option<Vec<f64>> = match params.kind {
        StimulusKind::SamNoise => Some(modulator(n, fs, &Modulator::sine(params.modulation_rate, m))),
        StimulusKind::SquarewaveAm => Some(modulator(
            n,
            fs,
            &Modulator {
                shape: ModulatorShape::Square,
                ..Modulator::sine(params.modulation_rate, m)
            },
        )),
        StimulusKind::SpeechEnvelopeNoise => {
            Some(speech_like_envelope(&mut rng, n, fs, params.modulation_rate, m))
        }
        _ => None,
    };
    if let Some(env) = envelope {
        apply_envelope(&mut x, &env, params.equal_power);
    }
    apply_ramps(&mut x, fs, params.ramp);
    Ok(Signal::from_raw(x, params.sample_rate))
}

fn noise_carrier(rng: &mut ChaCha8Rng, n: usize, fs: f64, band: Option<(f64, f64)>) -> Vec<f64> {
    let white: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    match band {
        Some((lo, hi)) => dsp::spectral_band_limit(&white, fs, lo, hi),
        None => white,
    }
}

fn normalize_rms(x: &mut [f64], target: f64) {
    let r = rms(x);
    if r > 0.0 {
        let g = target / r;
        x.iter_mut().for_each(|v| *v *= g);
    }
}

/// Multiplies by `env`; with `equal_power` the result is rescaled to the input rms.
fn apply_envelope(x: &mut [f64], env: &[f64], equal_power: bool) {
    let before = rms(x);
    for (v, e) in x.iter_mut().zip(env) {
        *v *= e;
    }
    if equal_power {
        normalize_rms(x, before);
    }
}

/// Speech-like fluctuations: a low-pass Gaussian process below `rate` Hz,
/// scaled to unit standard deviation times `depth`, offset by one and clipped at zero.
fn speech_like_envelope(rng: &mut ChaCha8Rng, n: usize, fs: f64, rate: f64, depth: f64) -> Vec<f64> {
    let white: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    let mut z = dsp::spectral_band_limit(&white, fs, 0.5, rate);
    let sd = rms(&z);
    if sd > 0.0 {
        z.iter_mut().for_each(|v| *v /= sd);
    }
    z.iter().map(|v| (1.0 + depth * v).max(0.0)).collect()
}

pub fn apply_ramps(x: &mut [f64], fs: f64, ramp: f64) {
    let len = ((ramp * fs).round() as usize).min(x.len() / 2);
    if len == 0 {
        return;
    }
    let n = x.len();
    for i in 0..len {
        let g = (0.5 * PI * (i as f64 + 0.5) / len as f64).sin().powi(2);
        x[i] *= g;
        x[n - 1 - i] *= g;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModulatorShape {
    Sine,
    Square,
}

/// One modulation component `depth * w(2 pi rate t + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Modulator {
    pub rate: f64,
    pub depth: f64,
    pub shape: ModulatorShape,
    pub phase: f64,
}

impl Modulator {
    pub fn sine(rate: f64, depth: f64) -> Self {
        Self {
            rate,
            depth,
            shape: ModulatorShape::Sine,
            phase: 0.0,
        }
    }
}

/// Envelope `1 + d sin(...)` for a single modulator.
fn modulator(n: usize, fs: f64, m: &Modulator) -> Vec<f64> {
    envelope(n, fs, std::slice::from_ref(m))
}

/// Sum envelope `max(0, 1 + sum_i m_i w_i(t))`.
pub fn envelope(n: usize, fs: f64, mods: &[Modulator]) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let t = i as f64 / fs;
            let s: f64 = mods
                .iter()
                .map(|m| {
                    let arg = 2.0 * PI * m.rate * t + m.phase;
                    let w = match m.shape {
                        ModulatorShape::Sine => arg.sin(),
                        ModulatorShape::Square => {
                            if arg.sin() >= 0.0 {
                                1.0
                            } else {
                                -1.0
                            }
                        }
                    };
                    m.depth * w
                })
                .sum();
            (1.0 + s).max(0.0)
        })
        .collect()
}

/// Imposes modulators on an existing signal. With `equal_power` the result keeps
/// the input rms.
pub fn modulate(signal: &Signal, mods: &[Modulator], equal_power: bool) -> Signal {
    let env = envelope(signal.len(), signal.sample_rate() as f64, mods);
    let mut x = signal.samples().to_vec();
    apply_envelope(&mut x, &env, equal_power);
    Signal::from_raw(x, signal.sample_rate())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterauralPhase {
    InPhase,
    AntiPhase,
    MonauralLeft,
    MonauralRight,
}

/// Builds a two-ear signal. Positive `itd` means the left ear leads (the right
/// channel is delayed); `iid` in dB is split as +iid/2 left and -iid/2 right.
pub fn apply_interaural(
    signal: &Signal,
    itd: f64,
    iid: f64,
    phase: InterauralPhase,
) -> Result<StereoSignal> {
    if !(itd.abs() < signal.duration()) {
        return Err(Error::invalid(format!(
            "|itd| = {} s not shorter than signal ({} s)",
            itd.abs(),
            signal.duration()
        )));
    }
    let fs = signal.sample_rate();
    let x = signal.samples();
    let shift = itd * fs as f64;
    let (mut left, mut right) = if shift > 0.0 {
        (x.to_vec(), dsp::delay(x, shift, ITD_TAPS))
    } else if shift < 0.0 {
        (dsp::delay(x, -shift, ITD_TAPS), x.to_vec())
    } else {
        (x.to_vec(), x.to_vec())
    };
    if iid != 0.0 {
        let gl = 10f64.powf(iid / 40.0);
        let gr = 1.0 / gl;
        left.iter_mut().for_each(|v| *v *= gl);
        right.iter_mut().for_each(|v| *v *= gr);
    }
    match phase {
        InterauralPhase::InPhase => {}
        InterauralPhase::AntiPhase => right.iter_mut().for_each(|v| *v = -*v),
        InterauralPhase::MonauralLeft => right.iter_mut().for_each(|v| *v = 0.0),
        InterauralPhase::MonauralRight => left.iter_mut().for_each(|v| *v = 0.0),
    }
    StereoSignal::new(Signal::from_raw(left, fs), Signal::from_raw(right, fs))
}

/// One segment of a phase-transition masker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskerSegment {
    pub phase: InterauralPhase,
    /// Gain relative to the nominal masker level.
    pub gain_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhaseTransitionSpec {
    pub first: MaskerSegment,
    pub second: MaskerSegment,
    pub total_duration: f64,
    /// Start of the second segment. Equal to `total_duration` for a single-segment masker.
    pub transition_time: f64,
    pub band: (f64, f64),
    pub spectral_level_db: f64,
    pub ramp: f64,
    pub seed: u64,
    pub sample_rate: u32,
}

impl Default for PhaseTransitionSpec {
    fn default() -> Self {
        let seg = MaskerSegment {
            phase: InterauralPhase::InPhase,
            gain_db: 0.0,
        };
        Self {
            first: seg,
            second: seg,
            total_duration: 0.75,
            transition_time: 0.375,
            band: (100.0, 2000.0),
            spectral_level_db: 40.0,
            ramp: DEFAULT_RAMP,
            seed: 0,
            sample_rate: DEFAULT_SAMPLE_RATE,
        }
    }
}

/// Band noise from a single token whose interaural phase and/or level switches
/// at `transition_time`.
pub fn phase_transition_masker(spec: &PhaseTransitionSpec) -> Result<StereoSignal> {
    if !(spec.transition_time >= 0.0 && spec.transition_time <= spec.total_duration) {
        return Err(Error::invalid("transition time outside the masker"));
    }
    let (lo, hi) = spec.band;
    let level = crate::signal::spectral_to_overall_level(spec.spectral_level_db, hi - lo);
    let params = StimulusParams {
        kind: StimulusKind::BandNoise,
        band: Some(spec.band),
        level_db: level,
        duration: spec.total_duration,
        ramp: 0.0,
        seed: spec.seed,
        sample_rate: spec.sample_rate,
        ..StimulusParams::default()
    };
    let token = generate(&params)?.into_samples();
    let fs = spec.sample_rate as f64;
    let split = ((spec.transition_time * fs).round() as usize).min(token.len());
    let mut left = token.clone();
    let mut right = token;
    for (i, (l, r)) in left.iter_mut().zip(right.iter_mut()).enumerate() {
        let seg = if i < split { &spec.first } else { &spec.second };
        let g = 10f64.powf(seg.gain_db / 20.0);
        *l *= g;
        *r *= g;
        match seg.phase {
            InterauralPhase::InPhase => {}
            InterauralPhase::AntiPhase => *r = -*r,
            InterauralPhase::MonauralLeft => *r = 0.0,
            InterauralPhase::MonauralRight => *l = 0.0,
        }
    }
    apply_ramps(&mut left, fs, spec.ramp);
    apply_ramps(&mut right, fs, spec.ramp);
    StereoSignal::new(
        Signal::from_raw(left, spec.sample_rate),
        Signal::from_raw(right, spec.sample_rate),
    )
}
