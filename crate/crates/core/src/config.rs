//! Model configuration. Every field has a default, so JSON files may override
//! any subset of them.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bmfd::{BmfdParams, ChannelSubset};
use crate::decision::{DecisionParams, ObserverParams};
use crate::error::{Error, Result};
use crate::features::FeatureParams;
use crate::periphery::{AdaptationParams, FilterbankSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub ear_weighting: bool,
    pub filterbank: FilterbankSpec,
    pub adaptation: AdaptationParams,
    pub bmfd: BmfdParams,
    pub features: FeatureParams,
    pub decision: DecisionParams,
    pub observer: ObserverParams,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            ear_weighting: true,
            filterbank: FilterbankSpec::default(),
            adaptation: AdaptationParams::default(),
            bmfd: BmfdParams::default(),
            features: FeatureParams::default(),
            decision: DecisionParams::default(),
            observer: ObserverParams::default(),
        }
    }
}

impl ModelConfig {
    /// Speech configuration: 63 Hz to 8 kHz channels and band importance on.
    pub fn speech() -> Self {
        let mut c = Self {
            filterbank: FilterbankSpec::new(63.0, 8000.0),
            ..Self::default()
        };
        c.features.band_importance = true;
        c
    }

    pub fn with_subset(mut self, subset: ChannelSubset) -> Self {
        self.bmfd.channel_subset = subset;
        self
    }

    pub fn with_jitter(mut self, enabled: bool) -> Self {
        self.bmfd.jitter_enabled = enabled;
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Applies a partial JSON object on top of this configuration.
    pub fn merged(&self, overrides: &serde_json::Value) -> Result<Self> {
        let mut base = serde_json::to_value(self)?;
        merge(&mut base, overrides);
        let c: Self = serde_json::from_value(base)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.filterbank.validate()?;
        self.bmfd.validate()?;
        self.observer.validate()?;
        if !(self.adaptation.exponent >= 0.0 && self.adaptation.floor > 0.0) {
            return Err(Error::invalid("adaptation exponent must be >= 0 and floor > 0"));
        }
        let f = &self.features;
        if !(f.dc_window_low > 0.0 && f.dc_window_high > 0.0 && f.envelope_rate_hz > 0.0 && f.mod_q > 0.0) {
            return Err(Error::invalid("feature windows, rate and Q must be positive"));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn merge(base: &mut serde_json::Value, over: &serde_json::Value) {
    match (base, over) {
        (serde_json::Value::Object(b), serde_json::Value::Object(o)) => {
            for (k, v) in o {
                merge(b.entry(k.clone()).or_insert(serde_json::Value::Null), v);
            }
        }
        (b, o) => *b = o.clone(),
    }
}
