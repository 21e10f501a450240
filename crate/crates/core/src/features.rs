//! Short-time power and envelope-power features of the BMFD outputs.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::bmfd::{BmfdChannel, BmfdOutput};
use crate::dsp::{Biquad, Cascade, OnePoleLowpass};
use crate::error::{Error, Result};
use crate::periphery::ChannelBank;
use crate::table::FrequencyTable;

const ANSI_S3_5_TABLE3: &str = include_str!("../data/ansi_s3_5_table3.txt");

pub fn default_band_importance_table() -> &'static FrequencyTable {
    static TABLE: OnceLock<FrequencyTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        FrequencyTable::parse(ANSI_S3_5_TABLE3, "built-in band importance table")
            .expect("built-in band importance table is well formed")
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureParams {
    pub envelope_cutoff_hz: f64,
    /// Target rate of the decimated envelope.
    pub envelope_rate_hz: f64,
    /// Power-frame duration at the lowest channel.
    pub dc_window_low: f64,
    /// Power-frame duration at the highest channel.
    pub dc_window_high: f64,
    pub dc_floor: f64,
    pub env_floor_db: f64,
    pub mod_lowpass_hz: f64,
    pub mod_centers: Vec<f64>,
    pub mod_q: f64,
    /// Modulation channels above this fraction of the carrier are dropped.
    pub mod_max_ratio: f64,
    /// Envelope SNRs of frames below this level are attenuated.
    pub level_weight_knee_db: f64,
    /// Charges BI outputs with their own level rather than the ear level, so
    /// that nearly inhibited outputs fall under the hearing threshold.
    pub bi_own_level: bool,
    pub band_importance: bool,
}

impl Default for FeatureParams {
    fn default() -> Self {
        Self {
            envelope_cutoff_hz: 150.0,
            envelope_rate_hz: 3000.0,
            dc_window_low: 0.045,
            dc_window_high: 0.008,
            dc_floor: 1e-10,
            env_floor_db: -27.0,
            mod_lowpass_hz: 1.0,
            mod_centers: vec![2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0],
            mod_q: 1.0,
            mod_max_ratio: 0.25,
            level_weight_knee_db: 35.0,
            bi_own_level: true,
            band_importance: false,
        }
    }
}

impl FeatureParams {
    pub fn env_floor(&self) -> f64 {
        10f64.powf(self.env_floor_db / 10.0)
    }

    /// Level weight for envelope SNRs: unity from the knee up, falling 20 dB per
    /// 20 dB below it.
    pub fn level_weight(&self, level_db: f64) -> f64 {
        if level_db >= self.level_weight_knee_db {
            1.0
        } else {
            10f64.powf((level_db - self.level_weight_knee_db) / 20.0)
        }
    }

    pub fn decimation(&self, sample_rate: u32) -> usize {
        ((sample_rate as f64 / self.envelope_rate_hz).round() as usize).max(1)
    }

    /// Power-frame duration for a channel, log-frequency interpolated between
    /// the lowest and highest channel.
    pub fn dc_window(&self, fc: f64, f_lowest: f64, f_highest: f64) -> f64 {
        if f_highest <= f_lowest {
            return self.dc_window_low;
        }
        let t = ((fc / f_lowest).ln() / (f_highest / f_lowest).ln()).clamp(0.0, 1.0);
        self.dc_window_low * (self.dc_window_high / self.dc_window_low).powf(t)
    }

    /// Modulation channels of a carrier: `None` denotes the low-pass channel.
    pub fn mod_channels(&self, fc: f64) -> Vec<ModChannel> {
        let mut v = vec![ModChannel {
            center: self.mod_lowpass_hz,
            lowpass: true,
        }];
        v.extend(
            self.mod_centers
                .iter()
                .filter(|&&f| f <= fc * self.mod_max_ratio)
                .map(|&center| ModChannel {
                    center,
                    lowpass: false,
                }),
        );
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModChannel {
    pub center: f64,
    pub lowpass: bool,
}

impl ModChannel {
    fn filter(&self, q: f64, fs: f64) -> Cascade {
        if self.lowpass {
            Cascade::butterworth3_lowpass(self.center, fs)
        } else {
            Cascade(vec![Biquad::bandpass(self.center, q, fs)])
        }
    }
}

/// Splits `len` samples into frames of `frame` samples. A trailing partial frame
/// is kept (extended to the end) only if it is at least half a frame long.
pub fn tile_frames(len: usize, frame: usize) -> Vec<(usize, usize)> {
    let frame = frame.max(1);
    let mut out = Vec::new();
    let mut start = 0;
    while start + frame <= len {
        out.push((start, start + frame));
        start += frame;
    }
    let rest = len - start;
    if rest > 0 && 2 * rest >= frame {
        out.push((start, len));
    } else if rest > 0 {
        if let Some(last) = out.last_mut() {
            last.1 = len;
        }
    }
    out
}

/// Frame boundaries of all channels, in decimated samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameLayout {
    pub center_freqs: Vec<f64>,
    pub rate: f64,
    pub len: usize,
    pub dc_frames: Vec<Vec<(usize, usize)>>,
    pub mod_channels: Vec<Vec<ModChannel>>,
    pub env_frames: Vec<Vec<Vec<(usize, usize)>>>,
}

impl FrameLayout {
    pub fn new(center_freqs: &[f64], rate: f64, len: usize, params: &FeatureParams) -> Result<Self> {
        let lo = *center_freqs.first().ok_or_else(|| Error::invalid("no channels"))?;
        let hi = *center_freqs.last().unwrap_or(&lo);
        let mut dc_frames = Vec::new();
        let mut mod_channels = Vec::new();
        let mut env_frames = Vec::new();
        for &fc in center_freqs {
            let frame = (params.dc_window(fc, lo, hi) * rate).round() as usize;
            if len < frame {
                return Err(Error::SignalTooShort(format!(
                    "{:.1} ms is shorter than the {:.1} ms power frame at {fc} Hz",
                    len as f64 / rate * 1e3,
                    frame as f64 / rate * 1e3
                )));
            }
            dc_frames.push(tile_frames(len, frame));
            let mods = params.mod_channels(fc);
            env_frames.push(
                mods.iter()
                    .map(|m| {
                        let frame = (rate / m.center).round() as usize;
                        if len * 2 < frame {
                            Vec::new()
                        } else {
                            tile_frames(len, frame)
                        }
                    })
                    .collect(),
            );
            mod_channels.push(mods);
        }
        Ok(Self {
            center_freqs: center_freqs.to_vec(),
            rate,
            len,
            dc_frames,
            mod_channels,
            env_frames,
        })
    }
}

/// Prefix sums of block energies of a pre-adaptation bank, for frame levels.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelTrack {
    /// Per channel, cumulative sum of squared samples at block boundaries.
    prefix: Vec<Vec<f64>>,
    block: usize,
}

impl LevelTrack {
    pub fn new(bank: &ChannelBank, decimation: usize) -> Self {
        let prefix = bank
            .channels
            .iter()
            .map(|ch| {
                let mut acc = 0.0;
                let mut v = Vec::with_capacity(ch.len() / decimation + 2);
                v.push(0.0);
                for block in ch.chunks(decimation) {
                    acc += block.iter().map(|x| x * x).sum::<f64>();
                    v.push(acc);
                }
                v
            })
            .collect();
        Self {
            prefix,
            block: decimation,
        }
    }

    /// Level in dB SPL of channel `p` over decimated samples `[a, b)`.
    pub fn level_db(&self, p: usize, a: usize, b: usize) -> f64 {
        let pre = &self.prefix[p];
        let b = b.min(pre.len() - 1);
        let energy = pre[b] - pre[a.min(b)];
        let ms = energy / ((b - a).max(1) * self.block) as f64;
        if ms > 0.0 {
            crate::signal::power_to_db_spl(ms)
        } else {
            f64::NEG_INFINITY
        }
    }
}

/// Frame powers of one BMFD output channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelPowers {
    pub channel: BmfdChannel,
    /// P_DC per (p, j).
    pub dc: Vec<Vec<f64>>,
    pub dc_levels: Vec<Vec<f64>>,
    /// P_env per (p, n, i).
    pub env: Vec<Vec<Vec<f64>>>,
    pub env_levels: Vec<Vec<Vec<f64>>>,
}

/// Powers of all BMFD channels of one stimulus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSet {
    pub layout: FrameLayout,
    pub channels: Vec<ChannelPowers>,
}

/// First-order low-pass followed by block-mean decimation.
pub fn envelope_lowpass(x: &[f64], cutoff_hz: f64, sample_rate: f64, decimation: usize) -> Vec<f64> {
    let y = OnePoleLowpass::new(cutoff_hz, sample_rate).filter(x);
    y.chunks(decimation)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect()
}

/// P_DC = (frame mean)^2 / 2, replaced by the floor below `threshold_db`.
pub fn dc_power(frame: &[f64], level_db: f64, threshold_db: f64, floor: f64) -> f64 {
    if !(level_db >= threshold_db) || frame.is_empty() {
        return floor;
    }
    let mean = frame.iter().sum::<f64>() / frame.len() as f64;
    (mean * mean / 2.0).max(floor)
}

/// AC power of `filtered` over the frame normalized by the frame's DC power
/// `2 * max(mean(env)^2 / 2, dc_floor)`, so that nearly silent outputs do not
/// produce arbitrarily large normalized modulation power.
pub fn env_power(filtered: &[f64], env: &[f64], floor: f64, dc_floor: f64) -> f64 {
    let n = filtered.len();
    if n == 0 || env.is_empty() {
        return floor;
    }
    let dc = env.iter().sum::<f64>() / env.len() as f64;
    let norm = (dc * dc).max(2.0 * dc_floor);
    let mean = filtered.iter().sum::<f64>() / n as f64;
    let var = filtered.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    (var / norm).max(floor)
}

/// Level of a BI output frame relative to the ear level it is charged with:
/// the dB ratio of its mean envelope to that of the ipsilateral ear (the
/// louder ear for BI_C). Zero for the better-ear channels.
fn bi_level_offset(c: BmfdChannel, e: &[f64], left: &[f64], right: &[f64]) -> f64 {
    let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len().max(1) as f64;
    let reference = match c {
        BmfdChannel::BeL | BmfdChannel::BeR => return 0.0,
        BmfdChannel::BiL => mean(left),
        BmfdChannel::BiR => mean(right),
        BmfdChannel::BiC => mean(left).max(mean(right)),
    };
    let own = mean(e);
    if own == reference {
        0.0
    } else if own > 0.0 && reference > 0.0 {
        20.0 * (own / reference).log10()
    } else {
        f64::NEG_INFINITY
    }
}

/// Per-channel levels of the ears feeding each BMFD output.
pub struct EarLevels<'a> {
    pub left: &'a LevelTrack,
    pub right: &'a LevelTrack,
}

impl EarLevels<'_> {
    fn level(&self, c: BmfdChannel, p: usize, a: usize, b: usize) -> f64 {
        match c {
            BmfdChannel::BeL => self.left.level_db(p, a, b),
            BmfdChannel::BeR => self.right.level_db(p, a, b),
            _ => self.left.level_db(p, a, b).max(self.right.level_db(p, a, b)),
        }
    }
}

/// Envelope extraction and frame powers for a BMFD output.
/// `thresholds_db` gives the per-channel level below which P_DC is floored.
pub fn extract(
    bmfd: &BmfdOutput,
    levels: &EarLevels<'_>,
    thresholds_db: &[f64],
    params: &FeatureParams,
) -> Result<FeatureSet> {
    let first = &bmfd
        .channels
        .first()
        .ok_or_else(|| Error::invalid("empty BMFD output"))?
        .1;
    let fs = first.sample_rate as f64;
    let dec = params.decimation(first.sample_rate);
    let rate = fs / dec as f64;
    let len = first.len().div_ceil(dec);
    let layout = FrameLayout::new(&first.center_freqs, rate, len, params)?;
    if thresholds_db.len() != first.num_channels() {
        return Err(Error::shape("one threshold per auditory channel required"));
    }
    let floor_env = params.env_floor();
    let ear_env: Option<Vec<(Vec<f64>, Vec<f64>)>> = match (&bmfd.ears, params.bi_own_level) {
        (Some((l, r)), true) => Some(
            l.channels
                .iter()
                .zip(&r.channels)
                .map(|(a, b)| {
                    (
                        envelope_lowpass(a, params.envelope_cutoff_hz, fs, dec),
                        envelope_lowpass(b, params.envelope_cutoff_hz, fs, dec),
                    )
                })
                .collect(),
        ),
        _ => None,
    };

    let channels = bmfd
        .channels
        .iter()
        .map(|(c, bank)| {
            let mut dc = Vec::with_capacity(bank.num_channels());
            let mut dc_levels = Vec::with_capacity(bank.num_channels());
            let mut env = Vec::with_capacity(bank.num_channels());
            let mut env_levels = Vec::with_capacity(bank.num_channels());
            for (p, x) in bank.channels.iter().enumerate() {
                let e = envelope_lowpass(x, params.envelope_cutoff_hz, fs, dec);
                let refs = ear_env.as_ref().map(|v| (&v[p].0, &v[p].1));
                let level = |a: usize, b: usize| {
                    let l = levels.level(*c, p, a, b);
                    match refs {
                        Some((el, er)) => l + bi_level_offset(*c, &e[a..b], &el[a..b], &er[a..b]),
                        None => l,
                    }
                };
                let mut pd = Vec::new();
                let mut ld = Vec::new();
                for &(a, b) in &layout.dc_frames[p] {
                    let l = level(a, b);
                    ld.push(l);
                    pd.push(dc_power(&e[a..b], l, thresholds_db[p], params.dc_floor));
                }
                dc.push(pd);
                dc_levels.push(ld);

                // AC coupling ahead of the modulation filters keeps the DC step
                // at signal start out of their outputs.
                let mean = e.iter().sum::<f64>() / e.len().max(1) as f64;
                let ac: Vec<f64> = e.iter().map(|v| v - mean).collect();
                let mut pe = Vec::new();
                let mut le = Vec::new();
                for (m, frames) in layout.mod_channels[p].iter().zip(&layout.env_frames[p]) {
                    let mut y = ac.clone();
                    m.filter(params.mod_q, rate).filter_in_place(&mut y);
                    pe.push(
                        frames
                            .iter()
                            .map(|&(a, b)| env_power(&y[a..b], &e[a..b], floor_env, params.dc_floor))
                            .collect(),
                    );
                    le.push(frames.iter().map(|&(a, b)| level(a, b)).collect());
                }
                env.push(pe);
                env_levels.push(le);
            }
            ChannelPowers {
                channel: *c,
                dc,
                dc_levels,
                env,
                env_levels,
            }
        })
        .collect();
    Ok(FeatureSet { layout, channels })
}

/// Per-channel band-importance weights normalized to a maximum of 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandImportance {
    pub weights: Vec<f64>,
}

impl BandImportance {
    pub fn new(table: &FrequencyTable, center_freqs: &[f64]) -> Self {
        let max = table.max_value();
        Self {
            weights: center_freqs.iter().map(|&f| table.at(f) / max).collect(),
        }
    }

    pub fn uniform(channels: usize) -> Self {
        Self {
            weights: vec![1.0; channels],
        }
    }
}

/// Power SNR: `max((P_SN - P_N) / P_N, 0)`.
pub fn snr_dc_value(p_sn: f64, p_n: f64) -> f64 {
    ((p_sn - p_n) / p_n).max(0.0)
}

/// Envelope-power SNR with the denominator floored.
pub fn snr_env_value(p_sn: f64, p_n: f64, floor: f64) -> f64 {
    (p_sn - p_n).max(0.0) / p_n.max(floor)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcFeatureGrid {
    /// SNR_DC per (c, p, j).
    pub snr: Vec<Vec<Vec<f64>>>,
    pub channels: Vec<BmfdChannel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvFeatureGrid {
    /// SNR_env per (c, p, n, i).
    pub snr: Vec<Vec<Vec<Vec<f64>>>>,
    pub channels: Vec<BmfdChannel>,
    pub mod_channels: Vec<Vec<ModChannel>>,
}

fn check_sets(sn: &FeatureSet, n: &FeatureSet) -> Result<()> {
    if sn.layout != n.layout {
        return Err(Error::shape("feature layouts of the two stimuli differ"));
    }
    let a: Vec<_> = sn.channels.iter().map(|c| c.channel).collect();
    let b: Vec<_> = n.channels.iter().map(|c| c.channel).collect();
    if a != b {
        return Err(Error::shape("BMFD channel sets differ"));
    }
    Ok(())
}

pub fn snr_dc(sn: &FeatureSet, n: &FeatureSet, bif: Option<&BandImportance>) -> Result<DcFeatureGrid> {
    check_sets(sn, n)?;
    if let Some(b) = bif {
        if b.weights.len() != sn.layout.center_freqs.len() {
            return Err(Error::shape("band importance length differs from channel count"));
        }
    }
    let snr = sn
        .channels
        .iter()
        .zip(&n.channels)
        .map(|(a, b)| {
            a.dc.iter()
                .zip(&b.dc)
                .enumerate()
                .map(|(p, (x, y))| {
                    let w = bif.map_or(1.0, |b| b.weights[p]);
                    x.iter().zip(y).map(|(&s, &m)| w * snr_dc_value(s, m)).collect()
                })
                .collect()
        })
        .collect();
    Ok(DcFeatureGrid {
        snr,
        channels: sn.channels.iter().map(|c| c.channel).collect(),
    })
}

pub fn snr_env(sn: &FeatureSet, n: &FeatureSet, params: &FeatureParams) -> Result<EnvFeatureGrid> {
    check_sets(sn, n)?;
    let floor = params.env_floor();
    let snr = sn
        .channels
        .iter()
        .zip(&n.channels)
        .map(|(a, b)| {
            a.env
                .iter()
                .zip(&b.env)
                .zip(&a.env_levels)
                .map(|((xs, ys), ls)| {
                    xs.iter()
                        .zip(ys)
                        .zip(ls)
                        .map(|((x, y), l)| {
                            x.iter()
                                .zip(y)
                                .zip(l)
                                .map(|((&s, &m), &lev)| snr_env_value(s, m, floor) * params.level_weight(lev))
                                .collect()
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    Ok(EnvFeatureGrid {
        snr,
        channels: sn.channels.iter().map(|c| c.channel).collect(),
        mod_channels: sn.layout.mod_channels.clone(),
    })
}
