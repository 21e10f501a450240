//! Declarative experiment definitions and their stimulus factories.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{spectral_to_overall_level, Signal, StereoSignal};
use crate::stimuli::{
    self, apply_interaural, generate, InterauralPhase, MaskerSegment, Modulator,
    ModulatorShape, PhaseTransitionSpec, StimulusKind, StimulusParams, DEFAULT_RAMP,
};

/// The variable adjusted by the threshold search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tracked {
    /// Target level in dB SPL.
    LevelDb,
    /// Level increment in dB.
    DeltaLDb,
    /// Interaural time difference in seconds.
    ItdS,
    /// Interaural intensity difference in dB.
    IidDb,
    /// Modulation depth, 20 log10 m.
    ModDepthDb,
    /// Fractional depth increment, 10 log10 m_inc.
    MIncDb,
}

impl Tracked {
    pub fn resolution(self) -> f64 {
        match self {
            Tracked::LevelDb | Tracked::DeltaLDb | Tracked::IidDb => 0.1,
            Tracked::ItdS => 2e-6,
            Tracked::ModDepthDb | Tracked::MIncDb => 0.25,
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Tracked::ItdS => "s",
            _ => "dB",
        }
    }
}

/// A reference data point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub condition: String,
    pub value: f64,
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub id: String,
    pub description: String,
    pub paradigm: Paradigm,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_rate")]
    pub sample_rate: u32,
    /// Partial model configuration applied on top of the run configuration.
    #[serde(default)]
    pub config_overrides: serde_json::Value,
    #[serde(default)]
    pub references: Vec<Reference>,
    /// Stimulus details chosen where the literature leaves them open.
    #[serde(default)]
    pub assumptions: Vec<String>,
}

fn default_trials() -> usize {
    10
}

fn default_rate() -> u32 {
    stimuli::DEFAULT_SAMPLE_RATE
}

/// One point of an experiment's threshold curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    /// Unique within the experiment, e.g. `"N0Spi@500"`.
    pub label: String,
    /// Curve the point belongs to, e.g. `"N0Spi"`.
    pub series: String,
    pub abscissa: f64,
    pub bounds: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CarrierKind {
    Tone { frequency: f64 },
    Noise { low: f64, high: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Carrier {
    pub label: String,
    pub kind: CarrierKind,
    #[serde(default)]
    pub level_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmMaskingConfig {
    pub label: String,
    pub carrier: CarrierKind,
    pub target_rate: f64,
    pub masker_rate: f64,
    pub masker_shape: ModulatorShape,
    /// `None` measures the unmasked detection threshold.
    pub masker_depth_db: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BinauralConfig {
    N0Spi,
    NpiS0,
    N0Sm,
    NpiSm,
    N0S0,
}

impl BinauralConfig {
    fn masker_phase(self) -> InterauralPhase {
        match self {
            BinauralConfig::N0Spi | BinauralConfig::N0Sm | BinauralConfig::N0S0 => InterauralPhase::InPhase,
            _ => InterauralPhase::AntiPhase,
        }
    }

    fn target_phase(self) -> InterauralPhase {
        match self {
            BinauralConfig::N0Spi => InterauralPhase::AntiPhase,
            BinauralConfig::N0Sm | BinauralConfig::NpiSm => InterauralPhase::MonauralLeft,
            _ => InterauralPhase::InPhase,
        }
    }

    fn name(self) -> &'static str {
        match self {
            BinauralConfig::N0Spi => "N0Spi",
            BinauralConfig::NpiS0 => "NpiS0",
            BinauralConfig::N0Sm => "N0Sm",
            BinauralConfig::NpiSm => "NpiSm",
            BinauralConfig::N0S0 => "N0S0",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransitionMasker {
    #[serde(rename = "N0Npi")]
    N0Npi,
    #[serde(rename = "NpiN0")]
    NpiN0,
    #[serde(rename = "NpiNpi-15")]
    NpiNpiAttenuated,
    #[serde(rename = "Npi-15Npi")]
    NpiAttenuatedNpi,
}

impl TransitionMasker {
    fn segments(self) -> (MaskerSegment, MaskerSegment) {
        let seg = |phase, gain_db| MaskerSegment { phase, gain_db };
        use InterauralPhase::*;
        match self {
            TransitionMasker::N0Npi => (seg(InPhase, 0.0), seg(AntiPhase, 0.0)),
            TransitionMasker::NpiN0 => (seg(AntiPhase, 0.0), seg(InPhase, 0.0)),
            TransitionMasker::NpiNpiAttenuated => (seg(AntiPhase, 0.0), seg(AntiPhase, -15.0)),
            TransitionMasker::NpiAttenuatedNpi => (seg(AntiPhase, -15.0), seg(AntiPhase, 0.0)),
        }
    }

    fn name(self) -> &'static str {
        match self {
            TransitionMasker::N0Npi => "N0Npi",
            TransitionMasker::NpiN0 => "NpiN0",
            TransitionMasker::NpiNpiAttenuated => "NpiNpi-15",
            TransitionMasker::NpiAttenuatedNpi => "Npi-15Npi",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaskingCombo {
    /// Tone signal, tone masker.
    TT,
    TN,
    NT,
    NN,
}

/// Stimulus families of the benchmark. Each variant expands into a list of conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Paradigm {
    HearingThreshold {
        frequencies: Vec<f64>,
        duration: f64,
        bounds: (f64, f64),
    },
    IntensityJnd {
        carriers: Vec<Carrier>,
        reference_levels: Vec<f64>,
        duration: f64,
        bounds: (f64, f64),
    },
    ToneInNoise {
        tone_frequency: f64,
        durations: Vec<f64>,
        masker_band: (f64, f64),
        masker_level_db: f64,
        masker_duration: f64,
        signal_ramp: f64,
        bounds: (f64, f64),
    },
    SpectralMasking {
        masker_frequency: f64,
        noise_bandwidth: f64,
        masker_levels: Vec<f64>,
        combos: Vec<MaskingCombo>,
        signal_frequencies: Vec<f64>,
        duration: f64,
        bounds: (f64, f64),
    },
    AmDetection {
        carriers: Vec<Carrier>,
        rates: Vec<f64>,
        equal_power: bool,
        duration: f64,
        bounds: (f64, f64),
    },
    AmDiscrimination {
        carriers: Vec<Carrier>,
        rate: f64,
        standard_depths_db: Vec<f64>,
        level_db: f64,
        duration: f64,
        lower_bound: f64,
    },
    AmMasking {
        configurations: Vec<AmMaskingConfig>,
        level_db: f64,
        duration: f64,
        bounds: (f64, f64),
    },
    Itd {
        frequencies: Vec<f64>,
        level_db: f64,
        duration: f64,
        /// Upper bound as a fraction of the tone period.
        max_period_fraction: f64,
        max_itd: f64,
    },
    Iid {
        frequencies: Vec<f64>,
        level_db: f64,
        duration: f64,
        bounds: (f64, f64),
    },
    WidebandBmld {
        frequencies: Vec<f64>,
        configurations: Vec<BinauralConfig>,
        masker_band: (f64, f64),
        spectral_level_db: f64,
        masker_duration: f64,
        signal_duration: f64,
        bounds: (f64, f64),
    },
    N0SpiDuration {
        frequencies: Vec<f64>,
        durations: Vec<f64>,
        masker_band: (f64, f64),
        spectral_level_db: f64,
        masker_duration: f64,
        signal_ramp: f64,
        bounds: (f64, f64),
    },
    PhaseTransition {
        maskers: Vec<TransitionMasker>,
        /// Signal center relative to the masker transition, in seconds.
        offsets: Vec<f64>,
        signal_frequency: f64,
        signal_duration: f64,
        signal_ramp: f64,
        masker_band: (f64, f64),
        spectral_level_db: f64,
        bounds: (f64, f64),
    },
    Trading {
        frequency: f64,
        level_db: f64,
        duration: f64,
        itds: Vec<f64>,
        iids_db: Vec<f64>,
    },
}

impl ExperimentSpec {
    pub fn tracked(&self) -> Tracked {
        match &self.paradigm {
            Paradigm::IntensityJnd { .. } => Tracked::DeltaLDb,
            Paradigm::AmDetection { .. } | Paradigm::AmMasking { .. } => Tracked::ModDepthDb,
            Paradigm::AmDiscrimination { .. } => Tracked::MIncDb,
            Paradigm::Itd { .. } | Paradigm::Trading { .. } => Tracked::ItdS,
            Paradigm::Iid { .. } => Tracked::IidDb,
            _ => Tracked::LevelDb,
        }
    }

    pub fn is_binaural(&self) -> bool {
        self.id.starts_with("bin-")
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::invalid(format!("{}: trial count must be at least 1", self.id)));
        }
        let conds = self.conditions();
        if conds.is_empty() && !matches!(self.paradigm, Paradigm::Trading { .. }) {
            return Err(Error::invalid(format!("{}: no conditions", self.id)));
        }
        for c in &conds {
            if !(c.bounds.0 < c.bounds.1) {
                return Err(Error::invalid(format!("{}: bounds of {} not ordered", self.id, c.label)));
            }
        }
        let mut labels: Vec<_> = conds.iter().map(|c| &c.label).collect();
        labels.sort();
        labels.dedup();
        if labels.len() != conds.len() {
            return Err(Error::invalid(format!("{}: duplicate condition labels", self.id)));
        }
        Ok(())
    }

    pub fn conditions(&self) -> Vec<Condition> {
        let cond = |series: &str, abscissa: f64, bounds: (f64, f64)| Condition {
            label: format!("{series}@{}", fmt_num(abscissa)),
            series: series.to_string(),
            abscissa,
            bounds,
        };
        match &self.paradigm {
            Paradigm::HearingThreshold { frequencies, bounds, .. } => {
                frequencies.iter().map(|&f| cond("tone", f, *bounds)).collect()
            }
            Paradigm::IntensityJnd {
                carriers,
                reference_levels,
                bounds,
                ..
            } => carriers
                .iter()
                .flat_map(|c| reference_levels.iter().map(move |&l| cond(&c.label, l, *bounds)))
                .collect(),
            Paradigm::ToneInNoise { durations, bounds, .. } => {
                durations.iter().map(|&d| cond("tone", d, *bounds)).collect()
            }
            Paradigm::SpectralMasking {
                masker_levels,
                combos,
                signal_frequencies,
                bounds,
                ..
            } => {
                let mut v = Vec::new();
                for combo in combos {
                    for &l in masker_levels {
                        for &f in signal_frequencies {
                            v.push(cond(&format!("{combo:?}{}", fmt_num(l)), f, *bounds));
                        }
                    }
                }
                v
            }
            Paradigm::AmDetection { carriers, rates, bounds, .. } => carriers
                .iter()
                .flat_map(|c| rates.iter().map(move |&r| cond(&c.label, r, *bounds)))
                .collect(),
            Paradigm::AmDiscrimination {
                carriers,
                standard_depths_db,
                lower_bound,
                ..
            } => carriers
                .iter()
                .flat_map(|c| {
                    standard_depths_db.iter().map(move |&ms| {
                        let m = 10f64.powf(ms / 20.0);
                        // m_c must not exceed 1.
                        let hi = 10.0 * (1.0 / (m * m) - 1.0).log10();
                        cond(&c.label, ms, (*lower_bound, hi))
                    })
                })
                .collect(),
            Paradigm::AmMasking {
                configurations, bounds, ..
            } => configurations
                .iter()
                .map(|c| cond(&c.label, c.masker_depth_db.unwrap_or(f64::NEG_INFINITY), *bounds))
                .map(|mut c| {
                    if c.abscissa == f64::NEG_INFINITY {
                        c.abscissa = -100.0;
                    }
                    c.label = c.series.clone();
                    c
                })
                .collect(),
            Paradigm::Itd {
                frequencies,
                max_period_fraction,
                max_itd,
                ..
            } => frequencies
                .iter()
                .map(|&f| cond("tone", f, (0.0, (max_period_fraction / f).min(*max_itd))))
                .collect(),
            Paradigm::Iid { frequencies, bounds, .. } => {
                frequencies.iter().map(|&f| cond("tone", f, *bounds)).collect()
            }
            Paradigm::WidebandBmld {
                frequencies,
                configurations,
                bounds,
                ..
            } => configurations
                .iter()
                .flat_map(|c| frequencies.iter().map(move |&f| cond(c.name(), f, *bounds)))
                .collect(),
            Paradigm::N0SpiDuration {
                frequencies,
                durations,
                bounds,
                ..
            } => frequencies
                .iter()
                .flat_map(|&f| {
                    durations
                        .iter()
                        .map(move |&d| cond(&format!("N0Spi{}", fmt_num(f)), d, *bounds))
                })
                .collect(),
            Paradigm::PhaseTransition {
                maskers, offsets, bounds, ..
            } => maskers
                .iter()
                .flat_map(|m| offsets.iter().map(move |&o| cond(m.name(), o, *bounds)))
                .collect(),
            Paradigm::Trading { .. } => Vec::new(),
        }
    }

    /// Stimulus factory of condition `index` for one trial.
    pub fn probe(&self, index: usize, seeds: TrialSeeds) -> Result<Probe> {
        let conds = self.conditions();
        let c = conds
            .get(index)
            .ok_or_else(|| Error::invalid(format!("{}: no condition {index}", self.id)))?;
        build_probe(self, c, index, seeds)
    }
}

fn fmt_num(x: f64) -> String {
    let s = format!("{x}");
    s.trim_end_matches(".0").to_string()
}

/// Seeds of the random streams of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialSeeds {
    pub noise: u64,
    pub jitter: u64,
    pub phase: u64,
}

impl TrialSeeds {
    pub fn derive(seed: u64, experiment: &str, condition: usize, trial: usize) -> Self {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update(seed.to_le_bytes());
        h.update(experiment.as_bytes());
        h.update((condition as u64).to_le_bytes());
        h.update((trial as u64).to_le_bytes());
        let d = h.finalize();
        let word = |i: usize| u64::from_le_bytes(d[i * 8..i * 8 + 8].try_into().expect("8 bytes"));
        Self {
            noise: word(0),
            jitter: word(1),
            phase: word(2),
        }
    }

    pub fn jitter_rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.jitter)
    }
}

/// Masker-alone stimulus and a generator of target-plus-masker stimuli for one trial.
pub struct Probe {
    masker: StereoSignal,
    make: Box<dyn Fn(f64) -> Result<StereoSignal> + Send + Sync>,
}

impl Probe {
    pub fn masker(&self) -> &StereoSignal {
        &self.masker
    }

    pub fn target_plus_masker(&self, value: f64) -> Result<StereoSignal> {
        (self.make)(value)
    }
}

fn left(s: &Signal) -> StereoSignal {
    StereoSignal::left_only(s.clone())
}

fn tone(freq: f64, level: f64, duration: f64, ramp: f64, phase: f64, fs: u32) -> Result<Signal> {
    generate(&StimulusParams {
        kind: StimulusKind::Tone,
        frequency: freq,
        level_db: level,
        duration,
        ramp,
        phase,
        sample_rate: fs,
        ..StimulusParams::default()
    })
}

fn noise(band: (f64, f64), level: f64, duration: f64, ramp: f64, seed: u64, fs: u32) -> Result<Signal> {
    let (lo, hi) = band;
    let nyq = fs as f64 / 2.0;
    generate(&StimulusParams {
        kind: StimulusKind::BandNoise,
        band: Some((lo.max(0.0), hi.min(nyq * 0.999))),
        level_db: level,
        duration,
        ramp,
        seed,
        sample_rate: fs,
        ..StimulusParams::default()
    })
}

fn carrier(kind: &CarrierKind, level: f64, duration: f64, seed: u64, fs: u32) -> Result<Signal> {
    match kind {
        CarrierKind::Tone { frequency } => tone(*frequency, level, duration, DEFAULT_RAMP, 0.0, fs),
        CarrierKind::Noise { low, high } => noise((*low, *high), level, duration, DEFAULT_RAMP, seed, fs),
    }
}

/// Embeds `short` into a silent signal of `len` samples starting at `start`.
fn embed(short: &Signal, len: usize, start: usize) -> Signal {
    let mut v = vec![0.0; len];
    for (i, &x) in short.samples().iter().enumerate() {
        if let Some(slot) = v.get_mut(start + i) {
            *slot = x;
        }
    }
    Signal::from_raw(v, short.sample_rate())
}

fn centered_tone(freq: f64, level: f64, duration: f64, ramp: f64, total: usize, phase: f64, fs: u32) -> Result<Signal> {
    let t = tone(freq, level, duration, ramp.min(duration / 2.0), phase, fs)?;
    let start = total.saturating_sub(t.len()) / 2;
    Ok(embed(&t, total, start))
}

fn random_phase(seeds: &TrialSeeds) -> f64 {
    ChaCha8Rng::seed_from_u64(seeds.phase).random::<f64>() * 2.0 * PI
}

fn build_probe(spec: &ExperimentSpec, c: &Condition, index: usize, seeds: TrialSeeds) -> Result<Probe> {
    let fs = spec.sample_rate;
    let x = c.abscissa;
    let probe = |masker: StereoSignal, make: Box<dyn Fn(f64) -> Result<StereoSignal> + Send + Sync>| {
        Ok(Probe { masker, make })
    };
    match &spec.paradigm {
        Paradigm::HearingThreshold { duration, .. } => {
            let d = *duration;
            let n = (d * fs as f64).round() as usize;
            let masker = StereoSignal::left_only(Signal::silence(n, fs));
            probe(masker, Box::new(move |level| Ok(left(&tone(x, level, d, DEFAULT_RAMP, 0.0, fs)?))))
        }
        Paradigm::IntensityJnd {
            carriers,
            reference_levels,
            duration,
            ..
        } => {
            let car = &carriers[index / reference_levels.len()];
            let base = carrier(&car.kind, x, *duration, seeds.noise, fs)?;
            let masker = left(&base);
            probe(
                masker,
                Box::new(move |dl| Ok(left(&base.clone().scaled(10f64.powf(dl / 20.0))))),
            )
        }
        Paradigm::ToneInNoise {
            tone_frequency,
            masker_band,
            masker_level_db,
            masker_duration,
            signal_ramp,
            ..
        } => {
            let m = noise(*masker_band, *masker_level_db, *masker_duration, DEFAULT_RAMP, seeds.noise, fs)?;
            let (f, ramp, total) = (*tone_frequency, *signal_ramp, m.len());
            let masker = left(&m);
            probe(
                masker,
                Box::new(move |level| {
                    let t = centered_tone(f, level, x, ramp, total, 0.0, fs)?;
                    Ok(left(&m.add(&t)?))
                }),
            )
        }
        Paradigm::SpectralMasking {
            masker_frequency,
            noise_bandwidth,
            masker_levels,
            combos,
            signal_frequencies,
            duration,
            ..
        } => {
            let per_combo = masker_levels.len() * signal_frequencies.len();
            let combo = combos[index / per_combo];
            let level = masker_levels[(index % per_combo) / signal_frequencies.len()];
            let (d, bw, fm) = (*duration, *noise_bandwidth, *masker_frequency);
            let fixed = PI / 2.0;
            let masker_phase = if combo == MaskingCombo::TT { fixed } else { random_phase(&seeds) };
            let band = move |f: f64| (f - bw / 2.0, f + bw / 2.0);
            let m = match combo {
                MaskingCombo::TT | MaskingCombo::NT => tone(fm, level, d, DEFAULT_RAMP, masker_phase, fs)?,
                _ => noise(band(fm), level, d, DEFAULT_RAMP, seeds.noise, fs)?,
            };
            let signal_seed = seeds.noise.wrapping_add(0x9e37_79b9_7f4a_7c15);
            let signal_phase = if combo == MaskingCombo::TT {
                fixed
            } else {
                ChaCha8Rng::seed_from_u64(seeds.phase ^ 1).random::<f64>() * 2.0 * PI
            };
            let masker = left(&m);
            probe(
                masker,
                Box::new(move |l| {
                    let s = match combo {
                        MaskingCombo::TT | MaskingCombo::TN => tone(x, l, d, DEFAULT_RAMP, signal_phase, fs)?,
                        _ => noise(band(x), l, d, DEFAULT_RAMP, signal_seed, fs)?,
                    };
                    Ok(left(&m.add(&s)?))
                }),
            )
        }
        Paradigm::AmDetection {
            carriers,
            rates,
            equal_power,
            duration,
            ..
        } => {
            let car = &carriers[index / rates.len()];
            let level = car.level_db.unwrap_or(65.0);
            let base = carrier(&car.kind, level, *duration, seeds.noise, fs)?;
            let eq = *equal_power;
            let masker = left(&base);
            probe(
                masker,
                Box::new(move |depth_db| {
                    let m = 10f64.powf(depth_db / 20.0).min(1.0);
                    Ok(left(&stimuli::modulate(&base, &[Modulator::sine(x, m)], eq)))
                }),
            )
        }
        Paradigm::AmDiscrimination {
            carriers,
            rate,
            standard_depths_db,
            level_db,
            duration,
            ..
        } => {
            let car = &carriers[index / standard_depths_db.len()];
            let base = carrier(&car.kind, *level_db, *duration, seeds.noise, fs)?;
            let ms = 10f64.powf(x / 20.0);
            let r = *rate;
            let masker = left(&stimuli::modulate(&base, &[Modulator::sine(r, ms)], true));
            probe(
                masker,
                Box::new(move |minc_db| {
                    let mc = (ms * (1.0 + 10f64.powf(minc_db / 10.0)).sqrt()).min(1.0);
                    Ok(left(&stimuli::modulate(&base, &[Modulator::sine(r, mc)], true)))
                }),
            )
        }
        Paradigm::AmMasking {
            configurations,
            level_db,
            duration,
            ..
        } => {
            let cfg = configurations[index].clone();
            let base = carrier(&cfg.carrier, *level_db, *duration, seeds.noise, fs)?;
            let masker_mod = cfg.masker_depth_db.map(|d| Modulator {
                rate: cfg.masker_rate,
                depth: 10f64.powf(d / 20.0),
                shape: cfg.masker_shape,
                phase: 0.0,
            });
            let mods: Vec<Modulator> = masker_mod.into_iter().collect();
            let masker = left(&stimuli::modulate(&base, &mods, true));
            probe(
                masker,
                Box::new(move |depth_db| {
                    let mut all = mods.clone();
                    all.push(Modulator::sine(cfg.target_rate, 10f64.powf(depth_db / 20.0)));
                    Ok(left(&stimuli::modulate(&base, &all, true)))
                }),
            )
        }
        Paradigm::Itd { level_db, duration, .. } => {
            let t = tone(x, *level_db, *duration, DEFAULT_RAMP, 0.0, fs)?;
            let masker = StereoSignal::diotic(t.clone());
            probe(
                masker,
                Box::new(move |itd| apply_interaural(&t, itd, 0.0, InterauralPhase::InPhase)),
            )
        }
        Paradigm::Iid { level_db, duration, .. } => {
            let t = tone(x, *level_db, *duration, DEFAULT_RAMP, 0.0, fs)?;
            let masker = StereoSignal::diotic(t.clone());
            probe(
                masker,
                Box::new(move |iid| apply_interaural(&t, 0.0, iid, InterauralPhase::InPhase)),
            )
        }
        Paradigm::WidebandBmld {
            configurations,
            frequencies,
            masker_band,
            spectral_level_db,
            masker_duration,
            signal_duration,
            ..
        } => {
            let cfg = configurations[index / frequencies.len()];
            let level = spectral_to_overall_level(*spectral_level_db, masker_band.1 - masker_band.0);
            let m = noise(*masker_band, level, *masker_duration, DEFAULT_RAMP, seeds.noise, fs)?;
            let masker = apply_interaural(&m, 0.0, 0.0, cfg.masker_phase())?;
            let (sd, total) = (*signal_duration, m.len());
            let nm = masker.clone();
            probe(
                masker,
                Box::new(move |l| {
                    let t = centered_tone(x, l, sd, DEFAULT_RAMP, total, 0.0, fs)?;
                    nm.add(&apply_interaural(&t, 0.0, 0.0, cfg.target_phase())?)
                }),
            )
        }
        Paradigm::N0SpiDuration {
            frequencies,
            durations,
            masker_band,
            spectral_level_db,
            masker_duration,
            signal_ramp,
            ..
        } => {
            let f = frequencies[index / durations.len()];
            let level = spectral_to_overall_level(*spectral_level_db, masker_band.1 - masker_band.0);
            let m = noise(*masker_band, level, *masker_duration, DEFAULT_RAMP, seeds.noise, fs)?;
            let masker = StereoSignal::diotic(m.clone());
            let (ramp, total) = (*signal_ramp, m.len());
            let nm = masker.clone();
            probe(
                masker,
                Box::new(move |l| {
                    let t = centered_tone(f, l, x, ramp, total, 0.0, fs)?;
                    nm.add(&apply_interaural(&t, 0.0, 0.0, InterauralPhase::AntiPhase)?)
                }),
            )
        }
        Paradigm::PhaseTransition {
            maskers,
            offsets,
            signal_frequency,
            signal_duration,
            signal_ramp,
            masker_band,
            spectral_level_db,
            ..
        } => {
            let which = maskers[index / offsets.len()];
            let (first, second) = which.segments();
            let pt = PhaseTransitionSpec {
                first,
                second,
                band: *masker_band,
                spectral_level_db: *spectral_level_db,
                seed: seeds.noise,
                sample_rate: fs,
                ..PhaseTransitionSpec::default()
            };
            let masker = stimuli::phase_transition_masker(&pt)?;
            let total = masker.len();
            let (sf, sd, ramp) = (*signal_frequency, *signal_duration, *signal_ramp);
            let center = ((pt.transition_time + x) * fs as f64).round() as isize;
            let nm = masker.clone();
            probe(
                masker,
                Box::new(move |l| {
                    let t = tone(sf, l, sd, ramp.min(sd / 2.0), 0.0, fs)?;
                    let start = (center - t.len() as isize / 2).max(0) as usize;
                    let t = embed(&t, total, start);
                    nm.add(&apply_interaural(&t, 0.0, 0.0, InterauralPhase::AntiPhase)?)
                }),
            )
        }
        Paradigm::Trading { .. } => Err(Error::invalid("the trading experiment has no threshold conditions")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(paradigm: Paradigm) -> ExperimentSpec {
        ExperimentSpec {
            id: "test".into(),
            description: String::new(),
            paradigm,
            trials: 2,
            sample_rate: 48_000,
            config_overrides: serde_json::Value::Null,
            references: Vec::new(),
            assumptions: Vec::new(),
        }
    }

    #[test]
    fn seeds_are_deterministic_and_distinct() {
        let a = TrialSeeds::derive(1, "x", 0, 0);
        assert_eq!(a, TrialSeeds::derive(1, "x", 0, 0));
        assert_ne!(a, TrialSeeds::derive(1, "x", 0, 1));
        assert_ne!(a, TrialSeeds::derive(1, "y", 0, 0));
        assert_ne!(a, TrialSeeds::derive(2, "x", 0, 0));
    }

    #[test]
    fn bmld_probe_shares_masker_token() {
        let s = spec(Paradigm::WidebandBmld {
            frequencies: vec![500.0],
            configurations: vec![BinauralConfig::N0Spi],
            masker_band: (20.0, 8000.0),
            spectral_level_db: 40.0,
            masker_duration: 0.4,
            signal_duration: 0.3,
            bounds: (30.0, 90.0),
        });
        let p = s.probe(0, TrialSeeds::derive(0, "t", 0, 0)).unwrap();
        let sn = p.target_plus_masker(-200.0).unwrap();
        let diff: f64 = sn
            .left()
            .samples()
            .iter()
            .zip(p.masker().left().samples())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-9);
        // Target is interaurally inverted: L - R of the sum contains only the target.
        let sn = p.target_plus_masker(70.0).unwrap();
        let m = p.masker();
        let l: f64 = sn.left().samples().iter().zip(m.left().samples()).map(|(a, b)| a - b).map(|v| v * v).sum();
        let r: f64 = sn.right().samples().iter().zip(m.right().samples()).map(|(a, b)| a - b).map(|v| v * v).sum();
        assert!((l / r - 1.0).abs() < 1e-9);
    }

    #[test]
    fn am_discrimination_bounds_keep_depth_below_one() {
        let s = spec(Paradigm::AmDiscrimination {
            carriers: vec![Carrier {
                label: "tone".into(),
                kind: CarrierKind::Tone { frequency: 4000.0 },
                level_db: None,
            }],
            rate: 16.0,
            standard_depths_db: vec![-3.0],
            level_db: 65.0,
            duration: 0.5,
            lower_bound: -30.0,
        });
        let c = &s.conditions()[0];
        let ms = 10f64.powf(-3.0 / 20.0);
        let mc = ms * (1.0 + 10f64.powf(c.bounds.1 / 10.0)).sqrt();
        assert!((mc - 1.0).abs() < 1e-12);
    }
}
