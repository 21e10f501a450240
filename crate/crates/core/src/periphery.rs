//! Monaural front end: ear weighting, gammatone filterbank, rectification and adaptation.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::dsp::{self, OnePoleLowpass};
use crate::error::{Error, Result};
use crate::signal::Signal;
use crate::table::FrequencyTable;

const ISO_389_7: &str = include_str!("../data/iso389_7_free_field.txt");

/// Nominal one-third-octave band centers (IEC 61260).
pub const THIRD_OCTAVE_CENTERS: [f64; 31] = [
    20.0, 25.0, 31.5, 40.0, 50.0, 63.0, 80.0, 100.0, 125.0, 160.0, 200.0, 250.0, 315.0, 400.0,
    500.0, 630.0, 800.0, 1000.0, 1250.0, 1600.0, 2000.0, 2500.0, 3150.0, 4000.0, 5000.0, 6300.0,
    8000.0, 10000.0, 12500.0, 16000.0, 20000.0,
];

/// Built-in free-field hearing threshold curve.
pub fn default_threshold_curve() -> &'static FrequencyTable {
    static CURVE: OnceLock<FrequencyTable> = OnceLock::new();
    CURVE.get_or_init(|| {
        FrequencyTable::parse(ISO_389_7, "built-in threshold table")
            .expect("built-in threshold table is well formed")
    })
}

/// Equivalent rectangular bandwidth of the normal auditory filter (Glasberg & Moore).
pub fn erb_n(freq_hz: f64) -> f64 {
    24.7 * (4.37 * freq_hz / 1000.0 + 1.0)
}

/// Weighting gain in dB at `freq_hz`: minus the threshold relative to its minimum.
pub fn ear_weighting_gain_db(curve: &FrequencyTable, freq_hz: f64) -> f64 {
    -(curve.at(freq_hz.max(1.0)) - curve.min_value())
}

/// Applies the threshold-in-quiet weighting as a zero-phase filter.
pub fn ear_weighting(signal: &Signal, curve: &FrequencyTable) -> Signal {
    let fs = signal.sample_rate() as f64;
    let tmin = curve.min_value();
    let pad = (0.05 * fs) as usize;
    let y = dsp::zero_phase_filter(signal.samples(), fs, pad, |f| {
        10f64.powf(-(curve.at(f.max(1.0)) - tmin) / 20.0)
    });
    Signal::from_raw(y, signal.sample_rate())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterbankSpec {
    pub f_low: f64,
    pub f_high: f64,
    pub order: usize,
    /// Bandwidth parameter b as a multiple of ERB_N. 1.019 gives an
    /// equivalent rectangular bandwidth of one ERB_N for order 4.
    pub bandwidth_factor: f64,
}

impl Default for FilterbankSpec {
    fn default() -> Self {
        Self {
            f_low: 63.0,
            f_high: 12500.0,
            order: 4,
            bandwidth_factor: 1.019,
        }
    }
}

impl FilterbankSpec {
    pub fn new(f_low: f64, f_high: f64) -> Self {
        Self {
            f_low,
            f_high,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f_low > 0.0 && self.f_low < self.f_high) {
            return Err(Error::invalid(format!(
                "filterbank range {}..{} Hz is not ordered",
                self.f_low, self.f_high
            )));
        }
        if self.order != 4 {
            return Err(Error::invalid(format!("gammatone order must be 4, got {}", self.order)));
        }
        if !(self.bandwidth_factor > 0.0) {
            return Err(Error::invalid("bandwidth factor must be positive"));
        }
        Ok(())
    }

    /// Nominal third-octave centers within the range (2% slack at the edges).
    pub fn center_freqs(&self) -> Vec<f64> {
        THIRD_OCTAVE_CENTERS
            .iter()
            .copied()
            .filter(|&f| f >= self.f_low * 0.98 && f <= self.f_high * 1.02)
            .collect()
    }
}

/// Per-channel time signals sharing one length and rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelBank {
    pub channels: Vec<Vec<f64>>,
    pub center_freqs: Vec<f64>,
    pub sample_rate: u32,
}

impl ChannelBank {
    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            channels: vec![vec![0.0; self.len()]; self.num_channels()],
            center_freqs: self.center_freqs.clone(),
            sample_rate: self.sample_rate,
        }
    }

    pub fn check_compatible(&self, other: &ChannelBank) -> Result<()> {
        if self.center_freqs != other.center_freqs
            || self.sample_rate != other.sample_rate
            || self.len() != other.len()
        {
            return Err(Error::shape(format!(
                "channel banks differ: {} ch x {} @ {} Hz vs {} ch x {} @ {} Hz",
                self.num_channels(),
                self.len(),
                self.sample_rate,
                other.num_channels(),
                other.len(),
                other.sample_rate
            )));
        }
        Ok(())
    }
}

/// Fourth-order all-pole gammatone filter as a cascade of complex one-pole
/// sections, normalized to 0 dB at the center frequency.
#[derive(Debug, Clone, Copy)]
struct Gammatone {
    re: f64,
    im: f64,
    gain: f64,
    order: usize,
}

impl Gammatone {
    fn new(fc: f64, bw: f64, fs: f64, order: usize) -> Self {
        let r = (-2.0 * PI * bw / fs).exp();
        let theta = 2.0 * PI * fc / fs;
        Self {
            re: r * theta.cos(),
            im: r * theta.sin(),
            gain: 1.0 - r,
            order,
        }
    }

    fn filter(&self, x: &[f64], out: &mut Vec<f64>) {
        let n = x.len();
        let mut yr = vec![0.0; n];
        let mut yi = vec![0.0; n];
        // First section has real input.
        let (mut pr, mut pi) = (0.0, 0.0);
        for i in 0..n {
            let nr = self.gain * x[i] + self.re * pr - self.im * pi;
            let ni = self.re * pi + self.im * pr;
            yr[i] = nr;
            yi[i] = ni;
            pr = nr;
            pi = ni;
        }
        for _ in 1..self.order {
            let (mut pr, mut pi) = (0.0, 0.0);
            for i in 0..n {
                let nr = self.gain * yr[i] + self.re * pr - self.im * pi;
                let ni = self.gain * yi[i] + self.re * pi + self.im * pr;
                yr[i] = nr;
                yi[i] = ni;
                pr = nr;
                pi = ni;
            }
        }
        out.clear();
        out.extend(yr.iter().map(|v| 2.0 * v));
    }

    /// Magnitude response of the real output at `f` Hz.
    fn magnitude(&self, f: f64, fs: f64) -> f64 {
        use rustfft::num_complex::Complex;
        let z1 = Complex::from_polar(1.0, -2.0 * PI * f / fs);
        let p = Complex::new(self.re, self.im);
        let stage = |pole: Complex<f64>| Complex::new(self.gain, 0.0) / (Complex::new(1.0, 0.0) - pole * z1);
        let h = stage(p).powu(self.order as u32) + stage(p.conj()).powu(self.order as u32);
        h.norm()
    }
}

pub fn gammatone_bank(signal: &Signal, spec: &FilterbankSpec) -> Result<ChannelBank> {
    spec.validate()?;
    let fs = signal.sample_rate() as f64;
    let centers = spec.center_freqs();
    if centers.is_empty() {
        return Err(Error::invalid("filterbank range contains no third-octave center"));
    }
    if let Some(&top) = centers.last() {
        if top >= fs / 2.0 / 1.1 {
            return Err(Error::invalid(format!(
                "center {top} Hz too close to Nyquist at {fs} Hz"
            )));
        }
    }
    let channels = centers
        .iter()
        .map(|&fc| {
            let g = Gammatone::new(fc, spec.bandwidth_factor * erb_n(fc), fs, spec.order);
            let mut out = Vec::with_capacity(signal.len());
            g.filter(signal.samples(), &mut out);
            out
        })
        .collect();
    Ok(ChannelBank {
        channels,
        center_freqs: centers,
        sample_rate: signal.sample_rate(),
    })
}

/// Magnitude response of channel `fc` of the bank at `f` Hz.
pub fn gammatone_magnitude(spec: &FilterbankSpec, fc: f64, f: f64, sample_rate: f64) -> f64 {
    Gammatone::new(fc, spec.bandwidth_factor * erb_n(fc), sample_rate, spec.order).magnitude(f, sample_rate)
}

pub fn half_wave_rectify(bank: &mut ChannelBank) {
    for ch in &mut bank.channels {
        for v in ch.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
    }
}

/// How the 500 Hz integrator of the adaptation stage is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdaptationMode {
    /// The rectified signal is passed on unchanged.
    None,
    /// The rectified signal is passed through the integrator.
    Lowpass,
    /// The rectified signal is divided by its integrated version.
    Divide,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaptationParams {
    pub mode: AdaptationMode,
    pub cutoff_hz: f64,
    /// In `Divide` mode the signal is divided by the low-passed signal raised
    /// to this power. 1 is a full divisive normalization, 0 disables the stage.
    pub exponent: f64,
    pub floor: f64,
}

impl Default for AdaptationParams {
    fn default() -> Self {
        Self {
            mode: AdaptationMode::Lowpass,
            cutoff_hz: 500.0,
            exponent: 1.0,
            floor: 1e-6,
        }
    }
}

/// Feed-forward adaptation. `Lowpass`: `out = lp(in)`. `Divide`:
/// `out = in / max(lp(in), floor)^exponent`.
pub fn adaptation(bank: &mut ChannelBank, params: &AdaptationParams) {
    let lp = OnePoleLowpass::new(params.cutoff_hz, bank.sample_rate as f64);
    match params.mode {
        AdaptationMode::None => {}
        AdaptationMode::Lowpass => {
            for ch in &mut bank.channels {
                lp.filter_in_place(ch);
            }
        }
        AdaptationMode::Divide => {
            if params.exponent == 0.0 {
                return;
            }
            for ch in &mut bank.channels {
                let den = lp.filter(ch);
                for (v, d) in ch.iter_mut().zip(den) {
                    *v /= d.max(params.floor).powf(params.exponent);
                }
            }
        }
    }
}
