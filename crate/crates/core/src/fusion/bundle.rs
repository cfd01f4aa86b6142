use serde::{Deserialize, Serialize};

use super::{AttentionParams, FusionConfig, FusionNetwork, UkfConfig, MODALITIES};
use crate::error::{Error, Result};
use crate::nnet::{ModelDocument, ModelMetadata, StandardizedNetwork};

pub const BUNDLE_FORMAT: &str = "climbloc-fusion";
pub const BUNDLE_VERSION: u32 = 1;

/// Everything the fusion stage needs at run time, as one JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionBundle {
    pub format: String,
    pub version: u32,
    pub config: FusionConfig,
    pub ukf: UkfConfig,
    /// UWB, GPS/INS, baro.
    pub encoders: Vec<ModelDocument>,
    pub attention: AttentionParams,
    pub lambda: f64,
    pub metadata: ModelMetadata,
}

impl FusionBundle {
    pub fn new(
        net: &FusionNetwork,
        config: &FusionConfig,
        ukf: &UkfConfig,
        metadata: ModelMetadata,
    ) -> Self {
        Self {
            format: BUNDLE_FORMAT.into(),
            version: BUNDLE_VERSION,
            config: config.clone(),
            ukf: *ukf,
            encoders: net.encoders.iter().map(|e| e.to_document()).collect(),
            attention: net.attention.clone(),
            lambda: net.lambda,
            metadata,
        }
    }

    pub fn network(&self) -> Result<FusionNetwork> {
        if self.encoders.len() != MODALITIES {
            return Err(Error::Dimension {
                expected: MODALITIES,
                got: self.encoders.len(),
            });
        }
        let enc: Vec<StandardizedNetwork> = self
            .encoders
            .iter()
            .cloned()
            .map(StandardizedNetwork::from_document)
            .collect::<Result<_>>()?;
        let [a, b, c]: [StandardizedNetwork; MODALITIES] = enc.try_into().expect("length checked");
        let net = FusionNetwork {
            encoders: [a, b, c],
            attention: self.attention.clone(),
            lambda: self.lambda,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let b: FusionBundle = serde_json::from_str(s)
            .map_err(|e| Error::Config(format!("fusion bundle JSON: {e}")))?;
        if b.format != BUNDLE_FORMAT {
            return Err(Error::Config(format!(
                "not a fusion bundle (format '{}')",
                b.format
            )));
        }
        if b.version != BUNDLE_VERSION {
            return Err(Error::Config(format!(
                "unsupported fusion bundle version {}",
                b.version
            )));
        }
        b.network()?;
        Ok(b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundle_round_trip_is_exact() {
        let cfg = FusionConfig {
            window: 3,
            hidden: 5,
            embedding_dim: 4,
            key_dim: 2,
            ..FusionConfig::default()
        };
        let net = FusionNetwork::init(&cfg, 12).unwrap();
        let b = FusionBundle::new(&net, &cfg, &UkfConfig::default(), ModelMetadata::default());
        let json = b.to_json().unwrap();
        let back = FusionBundle::from_json(&json).unwrap();
        assert_eq!(back, b);
        assert_eq!(back.network().unwrap(), net);
        assert_eq!(back.to_json().unwrap(), json);
    }

    #[test]
    fn rejects_wrong_version() {
        let cfg = FusionConfig {
            window: 2,
            hidden: 3,
            embedding_dim: 2,
            key_dim: 2,
            ..FusionConfig::default()
        };
        let net = FusionNetwork::init(&cfg, 1).unwrap();
        let mut b = FusionBundle::new(&net, &cfg, &UkfConfig::default(), ModelMetadata::default());
        b.version = 99;
        assert!(FusionBundle::from_json(&b.to_json().unwrap()).is_err());
    }
}
