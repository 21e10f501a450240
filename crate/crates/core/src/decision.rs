//! Across-channel combination, the detection criterion and the speech observer.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::features::{DcFeatureGrid, EnvFeatureGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecisionParams {
    /// Weight of the envelope-power domain.
    pub beta: f64,
    /// Weight of the power domain.
    pub gamma: f64,
    /// Detection requires the combined SNR to exceed this power ratio.
    pub criterion: f64,
}

impl Default for DecisionParams {
    fn default() -> Self {
        Self {
            beta: 0.21,
            gamma: 0.45,
            criterion: 0.25,
        }
    }
}

impl DecisionParams {
    /// d' at the detection criterion.
    pub fn criterion_dprime(&self) -> f64 {
        dprime_from_snr(self.criterion)
    }
}

pub fn dprime_from_snr(snr: f64) -> f64 {
    (2.0 * snr).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Envelope,
    Power,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinedSnr {
    /// Time-averaged envelope SNR per (p, n).
    pub snr_env: Vec<Vec<f64>>,
    /// Time-averaged power SNR per p.
    pub snr_dc: Vec<f64>,
    pub overall_snr: f64,
    pub d_prime: f64,
    pub winning_domain: Domain,
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Frame-wise maximum over the BMFD channels of a (c, p, frame) grid.
fn max_over_channels(grids: &[&Vec<Vec<f64>>]) -> Result<Vec<Vec<f64>>> {
    let first = grids.first().ok_or_else(|| Error::invalid("no BMFD channels"))?;
    let mut out: Vec<Vec<f64>> = (*first).clone();
    for g in &grids[1..] {
        if g.len() != out.len() || g.iter().zip(&out).any(|(a, b)| a.len() != b.len()) {
            return Err(Error::shape("BMFD channel grids differ in shape"));
        }
        for (o, x) in out.iter_mut().zip(g.iter()) {
            for (a, &b) in o.iter_mut().zip(x) {
                if b > *a {
                    *a = b;
                }
            }
        }
    }
    Ok(out)
}

/// Frame-wise max over BMFD channels, then the mean over frames.
pub fn combine_channels(dc: &DcFeatureGrid, env: &EnvFeatureGrid) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let dc_refs: Vec<_> = dc.snr.iter().collect();
    let snr_dc = max_over_channels(&dc_refs)?.iter().map(|f| mean(f)).collect();

    let np = env.snr.first().map_or(0, Vec::len);
    let mut snr_env = Vec::with_capacity(np);
    for p in 0..np {
        let refs: Vec<_> = env.snr.iter().map(|c| &c[p]).collect();
        if refs.iter().any(|r| r.len() != refs[0].len()) {
            return Err(Error::shape("modulation channel count differs across BMFD channels"));
        }
        snr_env.push(max_over_channels(&refs)?.iter().map(|f| mean(f)).collect());
    }
    Ok((snr_env, snr_dc))
}

pub fn combine_domains(snr_env: Vec<Vec<f64>>, snr_dc: Vec<f64>, params: &DecisionParams) -> CombinedSnr {
    let env_norm = snr_env.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
    let dc_norm = snr_dc.iter().map(|v| v * v).sum::<f64>().sqrt();
    let e = params.beta * env_norm;
    let d = params.gamma * dc_norm;
    let (overall, winning_domain) = if e >= d {
        (e, Domain::Envelope)
    } else {
        (d, Domain::Power)
    };
    CombinedSnr {
        snr_env,
        snr_dc,
        overall_snr: overall,
        d_prime: dprime_from_snr(overall),
        winning_domain,
    }
}

pub fn detect(combined: &CombinedSnr, params: &DecisionParams) -> bool {
    combined.overall_snr > params.criterion
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObserverParams {
    pub k: f64,
    pub q: f64,
    /// Number of response alternatives.
    pub m: u32,
    pub sigma_s: f64,
}

impl Default for ObserverParams {
    fn default() -> Self {
        Self {
            k: 0.6,
            q: 0.5,
            m: 50,
            sigma_s: 0.6,
        }
    }
}

impl ObserverParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0 && self.q > 0.0 && self.m >= 2 && self.sigma_s >= 0.0) {
            return Err(Error::invalid(format!("invalid observer parameters {self:?}")));
        }
        Ok(())
    }
}

pub fn si_dprime(overall_snr: f64, obs: &ObserverParams) -> f64 {
    obs.k * overall_snr.max(0.0).powf(obs.q)
}

/// Mean and standard deviation of the maximum of `n` independent standard normals,
/// by Simpson quadrature over the order-statistic density.
pub fn max_normal_moments(n: u32) -> (f64, f64) {
    let std = Normal::standard();
    let n = n as f64;
    let (lo, hi) = (-12.0, 12.0);
    let steps = 24_000;
    let h = (hi - lo) / steps as f64;
    let mut m1 = 0.0;
    let mut m2 = 0.0;
    for i in 0..=steps {
        let x = lo + i as f64 * h;
        let w = if i == 0 || i == steps {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let dens = n * std.pdf(x) * std.cdf(x).powf(n - 1.0);
        m1 += w * x * dens;
        m2 += w * x * x * dens;
    }
    m1 *= h / 3.0;
    m2 *= h / 3.0;
    (m1, (m2 - m1 * m1).max(0.0).sqrt())
}

/// Probability correct of an m-alternative ideal observer with response noise.
pub fn percent_correct(d_prime: f64, obs: &ObserverParams) -> f64 {
    let (mu, sigma) = max_normal_moments(obs.m - 1);
    percent_correct_with(d_prime, mu, sigma, obs.sigma_s)
}

pub fn percent_correct_with(d_prime: f64, mu_n: f64, sigma_n: f64, sigma_s: f64) -> f64 {
    Normal::standard().cdf((d_prime - mu_n) / (sigma_n * sigma_n + sigma_s * sigma_s).sqrt())
}

/// Simulated overall SNR of a reference condition as a function of level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsychometricSample {
    pub levels: Vec<f64>,
    pub overall_snr: Vec<f64>,
}

impl PsychometricSample {
    fn check(&self) -> Result<()> {
        if self.levels.len() != self.overall_snr.len() || self.levels.len() < 2 {
            return Err(Error::shape("psychometric sample needs matching levels and SNRs"));
        }
        if self.levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("levels must increase"));
        }
        if let Some(i) = self.overall_snr.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::NonMonotone(format!(
                "SNR falls from {} to {} between {} and {} dB",
                self.overall_snr[i],
                self.overall_snr[i + 1],
                self.levels[i],
                self.levels[i + 1]
            )));
        }
        Ok(())
    }

    /// SNR at `level`, interpolated linearly in level.
    fn snr_at(&self, level: f64) -> Result<f64> {
        let (lo, hi) = (self.levels[0], self.levels[self.levels.len() - 1]);
        if !(level >= lo && level <= hi) {
            return Err(Error::NoBracket {
                lo,
                hi,
                detail: format!("target {level} dB outside the simulated range"),
            });
        }
        let i = self.levels.partition_point(|&l| l <= level).clamp(1, self.levels.len() - 1);
        let (l0, l1) = (self.levels[i - 1], self.levels[i]);
        let (s0, s1) = (self.overall_snr[i - 1], self.overall_snr[i]);
        Ok(s0 + (level - l0) / (l1 - l0) * (s1 - s0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KCalibration {
    pub k_mean: f64,
    pub k_sd: f64,
    pub ks: Vec<f64>,
}

/// Finds k per repetition so that the observer reaches 50 % correct at
/// `target_srt`, and averages over repetitions.
pub fn calibrate_k(samples: &[PsychometricSample], target_srt: f64, obs: &ObserverParams) -> Result<KCalibration> {
    obs.validate()?;
    if samples.is_empty() {
        return Err(Error::invalid("no psychometric samples"));
    }
    let (mu, sigma) = max_normal_moments(obs.m - 1);
    let mut ks = Vec::with_capacity(samples.len());
    for s in samples {
        s.check()?;
        let snr = s.snr_at(target_srt)?;
        if !(snr > 0.0) {
            return Err(Error::NoBracket {
                lo: s.levels[0],
                hi: s.levels[s.levels.len() - 1],
                detail: "zero SNR at the target level".into(),
            });
        }
        let pc = |k: f64| percent_correct_with(k * snr.powf(obs.q), mu, sigma, obs.sigma_s) - 0.5;
        let (mut lo, mut hi) = (1e-6, 1.0);
        while pc(hi) < 0.0 {
            hi *= 2.0;
            if hi > 1e9 {
                return Err(Error::NoBracket {
                    lo,
                    hi,
                    detail: "no k reaches 50 % correct".into(),
                });
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if pc(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-12 * hi {
                break;
            }
        }
        ks.push(0.5 * (lo + hi));
    }
    let k_mean = ks.iter().sum::<f64>() / ks.len() as f64;
    let k_sd = if ks.len() > 1 {
        (ks.iter().map(|k| (k - k_mean).powi(2)).sum::<f64>() / (ks.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(KCalibration { k_mean, k_sd, ks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bmfd::BmfdChannel;

    fn grids(dc: Vec<Vec<Vec<f64>>>, env: Vec<Vec<Vec<Vec<f64>>>>) -> (DcFeatureGrid, EnvFeatureGrid) {
        let channels = vec![BmfdChannel::BeL; dc.len()];
        (
            DcFeatureGrid {
                snr: dc,
                channels: channels.clone(),
            },
            EnvFeatureGrid {
                snr: env,
                channels,
                mod_channels: Vec::new(),
            },
        )
    }

    #[test]
    fn antiphase_alternation_keeps_max() {
        let a = vec![vec![1.0, 0.0, 1.0, 0.0]];
        let b = vec![vec![0.0, 1.0, 0.0, 1.0]];
        let (dc, env) = grids(vec![a.clone(), b.clone()], vec![vec![a], vec![b]]);
        let (e, d) = combine_channels(&dc, &env).unwrap();
        assert_eq!(d, vec![1.0]);
        assert_eq!(e, vec![vec![1.0]]);
    }

    #[test]
    fn domain_weights() {
        let p = DecisionParams::default();
        let c = combine_domains(vec![vec![1.0, 0.0]], vec![0.0], &p);
        assert_eq!(c.overall_snr, 0.21);
        assert_eq!(c.winning_domain, Domain::Envelope);
        let c = combine_domains(vec![vec![0.0]], vec![1.0, 0.0], &p);
        assert_eq!(c.overall_snr, 0.45);
        assert_eq!(c.winning_domain, Domain::Power);
        let c = combine_domains(vec![vec![0.0]], vec![0.0], &p);
        assert_eq!(c.d_prime, 0.0);
        assert!(!detect(&c, &p));
    }

    #[test]
    fn strict_criterion() {
        let p = DecisionParams::default();
        let mk = |s: f64| CombinedSnr {
            snr_env: vec![],
            snr_dc: vec![],
            overall_snr: s,
            d_prime: dprime_from_snr(s),
            winning_domain: Domain::Power,
        };
        assert!(!detect(&mk(0.25), &p));
        assert!(detect(&mk(0.26), &p));
        assert!((p.criterion_dprime() - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn observer_values() {
        let o = ObserverParams::default();
        assert!((si_dprime(1.0, &o) - 0.6).abs() < 1e-15);
        assert_eq!(si_dprime(0.0, &o), 0.0);
        assert!(percent_correct(0.0, &o) < 0.05);
        let (mu, _) = max_normal_moments(o.m - 1);
        assert!((percent_correct(mu, &o) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn max_of_one_and_two_normals() {
        let (m, s) = max_normal_moments(1);
        assert!(m.abs() < 1e-9 && (s - 1.0).abs() < 1e-9);
        // E[max(X1, X2)] = 1/sqrt(pi), Var = 1 - 1/pi.
        let (m, s) = max_normal_moments(2);
        assert!((m - 1.0 / std::f64::consts::PI.sqrt()).abs() < 1e-9);
        assert!((s - (1.0 - 1.0 / std::f64::consts::PI).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn calibrate_recovers_known_k() {
        let truth = ObserverParams {
            k: 0.8,
            ..ObserverParams::default()
        };
        // snr(L) = 10^(L/10); SRT is where k snr^q equals mu_N.
        let (mu, _) = max_normal_moments(truth.m - 1);
        let srt = 10.0 * ((mu / truth.k).powf(1.0 / truth.q)).log10();
        let levels: Vec<f64> = (-200..=200).map(|i| i as f64 * 0.05).collect();
        let sample = PsychometricSample {
            overall_snr: levels.iter().map(|l| 10f64.powf(l / 10.0)).collect(),
            levels,
        };
        let cal = calibrate_k(&[sample.clone(), sample.clone()], srt, &ObserverParams::default()).unwrap();
        assert!((cal.k_mean / 0.8 - 1.0).abs() < 0.01, "{cal:?}");
        assert!(matches!(
            calibrate_k(&[sample], 50.0, &ObserverParams::default()),
            Err(Error::NoBracket { .. })
        ));
        let bumpy = PsychometricSample {
            levels: vec![0.0, 1.0, 2.0],
            overall_snr: vec![1.0, 0.5, 2.0],
        };
        assert!(matches!(
            calibrate_k(&[bumpy], 1.0, &ObserverParams::default()),
            Err(Error::NonMonotone(_))
        ));
    }
}
