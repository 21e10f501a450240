//! End-to-end pipeline from two-ear signals to the decision variable.

use rand::Rng;

use crate::bmfd::{self, BmfdChannel, ChannelSubset, Jitter};
use crate::config::ModelConfig;
use crate::decision::{self, CombinedSnr};
use crate::error::{Error, Result};
use crate::features::{self, BandImportance, EarLevels, FeatureSet, LevelTrack};
use crate::periphery::{self, ChannelBank};
use crate::signal::{Signal, StereoSignal};

/// Output of the monaural front end of one ear.
#[derive(Debug, Clone)]
pub struct EarResponse {
    pub adapted: ChannelBank,
    pub levels: LevelTrack,
}

#[derive(Debug, Clone)]
pub struct Model {
    config: ModelConfig,
    centers: Vec<f64>,
    thresholds_db: Vec<f64>,
    band_importance: Option<BandImportance>,
}

impl Model {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let centers = config.filterbank.center_freqs();
        if centers.is_empty() {
            return Err(Error::invalid("filterbank has no channels"));
        }
        let curve = periphery::default_threshold_curve();
        // After ear weighting every channel's threshold sits at the curve minimum.
        let thresholds_db = centers
            .iter()
            .map(|&f| if config.ear_weighting { curve.min_value() } else { curve.at(f) })
            .collect();
        let band_importance = config
            .features
            .band_importance
            .then(|| BandImportance::new(features::default_band_importance_table(), &centers));
        Ok(Self {
            config,
            centers,
            thresholds_db,
            band_importance,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn center_freqs(&self) -> &[f64] {
        &self.centers
    }

    pub fn num_channels(&self) -> usize {
        self.centers.len()
    }

    pub fn subset(&self) -> ChannelSubset {
        self.config.bmfd.channel_subset
    }

    pub fn thresholds_db(&self) -> &[f64] {
        &self.thresholds_db
    }

    /// Draws the jitter of one evaluation.
    pub fn draw_jitter<R: Rng + ?Sized>(&self, rng: &mut R) -> Jitter {
        Jitter::draw(self.num_channels(), &self.config.bmfd, rng)
    }

    pub fn ear(&self, signal: &Signal) -> Result<EarResponse> {
        let dec = self.config.features.decimation(signal.sample_rate());
        let silent = signal.samples().iter().all(|&v| v == 0.0);
        let mut bank = if silent {
            // Every stage maps silence to silence.
            periphery::gammatone_bank(&Signal::silence(0, signal.sample_rate()), &self.config.filterbank)
                .map(|b| ChannelBank {
                    channels: vec![vec![0.0; signal.len()]; b.num_channels()],
                    ..b
                })?
        } else if self.config.ear_weighting {
            let w = periphery::ear_weighting(signal, periphery::default_threshold_curve());
            periphery::gammatone_bank(&w, &self.config.filterbank)?
        } else {
            periphery::gammatone_bank(signal, &self.config.filterbank)?
        };
        let levels = LevelTrack::new(&bank, dec);
        if !silent {
            periphery::half_wave_rectify(&mut bank);
            periphery::adaptation(&mut bank, &self.config.adaptation);
        }
        Ok(EarResponse { adapted: bank, levels })
    }

    /// Frame powers of all channels of the configured subset.
    pub fn features(&self, stimulus: &StereoSignal, jitter: &Jitter) -> Result<FeatureSet> {
        let left = self.ear(stimulus.left())?;
        let right = self.ear(stimulus.right())?;
        self.features_from_ears(&left, &right, jitter)
    }

    pub fn features_from_ears(&self, left: &EarResponse, right: &EarResponse, jitter: &Jitter) -> Result<FeatureSet> {
        let out = bmfd::binaural_interaction(&left.adapted, &right.adapted, &self.config.bmfd, jitter)?;
        features::extract(
            &out,
            &EarLevels {
                left: &left.levels,
                right: &right.levels,
            },
            &self.thresholds_db,
            &self.config.features,
        )
    }

    /// Decision variable from target-plus-masker and masker features, using
    /// only the BMFD channels in `channels`.
    pub fn decide_with(&self, sn: &FeatureSet, n: &FeatureSet, channels: &[BmfdChannel]) -> Result<Decision> {
        let sn = select(sn, channels)?;
        let n = select(n, channels)?;
        let dc = features::snr_dc(&sn, &n, self.band_importance.as_ref())?;
        let env = features::snr_env(&sn, &n, &self.config.features)?;
        let (snr_env, snr_dc) = decision::combine_channels(&dc, &env)?;
        let combined = decision::combine_domains(snr_env, snr_dc, &self.config.decision);
        let detected = decision::detect(&combined, &self.config.decision);
        Ok(Decision {
            combined,
            detected,
            dc,
            env,
        })
    }

    pub fn decide(&self, sn: &FeatureSet, n: &FeatureSet) -> Result<Decision> {
        self.decide_with(sn, n, self.subset().channels())
    }

    /// One evaluation: a single jitter draw shared by both stimuli.
    pub fn compare<R: Rng + ?Sized>(&self, sn: &StereoSignal, n: &StereoSignal, rng: &mut R) -> Result<Decision> {
        sn.check_compatible(n)?;
        let jitter = self.draw_jitter(rng);
        let fsn = self.features(sn, &jitter)?;
        let fn_ = self.features(n, &jitter)?;
        self.decide(&fsn, &fn_)
    }
}

/// Result of one model evaluation with the per-channel SNR grids.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Decision {
    pub combined: CombinedSnr,
    pub detected: bool,
    pub dc: features::DcFeatureGrid,
    pub env: features::EnvFeatureGrid,
}

impl Decision {
    pub fn d_prime(&self) -> f64 {
        self.combined.d_prime
    }
}

fn select(set: &FeatureSet, channels: &[BmfdChannel]) -> Result<FeatureSet> {
    let chosen: Vec<_> = channels
        .iter()
        .map(|c| {
            set.channels
                .iter()
                .find(|p| p.channel == *c)
                .cloned()
                .ok_or_else(|| Error::invalid(format!("channel {} was not computed", c.label())))
        })
        .collect::<Result<_>>()?;
    Ok(FeatureSet {
        layout: set.layout.clone(),
        channels: chosen,
    })
}
