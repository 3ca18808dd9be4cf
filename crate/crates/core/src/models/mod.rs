//! The three statement classifiers: a vanilla GRU encoder, a GRU with
//! global attention over the merged representation channels, and a
//! hierarchical model that attends within each channel first and then
//! across the per-channel representations.

mod forward;
mod params;

pub use forward::{
    classify, encode_sequence, forward, global_attention, gru_step, merge_channels, predict,
    AttentionTrace, ForwardPass, Prediction, DEFAULT_THRESHOLD,
};
pub use params::{
    AttentionParams, BoundAttention, BoundEncoder, BoundGru, BoundParams, ChannelMap,
    EncoderParams, GruParams, ModelParams,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::NumericsError;
use crate::text_repr::{Channel, TextError};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model configuration: {what}")]
    Config { what: String },
    #[error("degenerate input: {what}")]
    DegenerateInput { what: String },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Text(#[from] TextError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    Vanilla,
    GlobalAttention,
    HierarchicalAttention,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightSharing {
    #[default]
    Separate,
    SharePosLiwc,
    ShareAll,
}

fn default_dim() -> usize {
    100
}

fn default_max_len() -> usize {
    crate::text_repr::DEFAULT_MAX_LEN
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub architecture: Architecture,
    /// Channels in use, always containing `word`. Mirrors the w / wp / wl /
    /// wpl setups.
    pub channels: Vec<Channel>,
    #[serde(default = "default_dim")]
    pub embedding_dim: usize,
    #[serde(default = "default_dim")]
    pub hidden_dim: usize,
    #[serde(default = "default_dim")]
    pub attn_dim: usize,
    #[serde(default = "default_max_len")]
    pub max_len: usize,
    #[serde(default)]
    pub weight_sharing: WeightSharing,
    /// Load word vectors from a file and freeze them, instead of training
    /// word embeddings jointly.
    #[serde(default)]
    pub pretrained_words: bool,
    #[serde(default)]
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(architecture: Architecture, channels: &[Channel], seed: u64) -> Self {
        ModelConfig {
            architecture,
            channels: channels.to_vec(),
            embedding_dim: default_dim(),
            hidden_dim: default_dim(),
            attn_dim: default_dim(),
            max_len: default_max_len(),
            weight_sharing: WeightSharing::Separate,
            pretrained_words: false,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let cfg = |what: String| Err(ModelError::Config { what });
        if self.channels.is_empty() || !self.channels.contains(&Channel::Word) {
            return cfg("channels must be non-empty and contain `word`".into());
        }
        let mut ordered = self.channels.clone();
        ordered.sort_unstable();
        ordered.dedup();
        if ordered != self.channels {
            return cfg("channels must be unique and in word, pos, liwc order".into());
        }
        if self.architecture == Architecture::HierarchicalAttention && self.channels.len() < 2 {
            return cfg("hierarchical attention needs at least two channels".into());
        }
        match self.weight_sharing {
            WeightSharing::Separate => {}
            WeightSharing::SharePosLiwc => {
                if !(self.channels.contains(&Channel::Pos) && self.channels.contains(&Channel::Liwc))
                {
                    return cfg("share-pos-liwc requires both pos and liwc channels".into());
                }
            }
            WeightSharing::ShareAll => {
                if self.channels.len() < 2 {
                    return cfg("share-all requires at least two channels".into());
                }
                if self.pretrained_words {
                    return cfg(
                        "share-all cannot be combined with frozen pretrained word vectors".into(),
                    );
                }
            }
        }
        if self.embedding_dim == 0 || self.hidden_dim == 0 || self.attn_dim == 0 || self.max_len == 0
        {
            return cfg("dimensions must be positive".into());
        }
        Ok(())
    }

    /// Input width of the merged-channel encoder.
    pub fn merged_input_dim(&self) -> usize {
        self.embedding_dim * self.channels.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wl(arch: Architecture) -> ModelConfig {
        ModelConfig::new(arch, &[Channel::Word, Channel::Liwc], 1)
    }

    #[test]
    fn valid_configs_pass() {
        wl(Architecture::Vanilla).validate().unwrap();
        wl(Architecture::GlobalAttention).validate().unwrap();
        wl(Architecture::HierarchicalAttention).validate().unwrap();
        ModelConfig::new(Architecture::Vanilla, &[Channel::Word], 0)
            .validate()
            .unwrap();
    }

    #[test]
    fn word_channel_is_mandatory() {
        let cfg = ModelConfig::new(Architecture::Vanilla, &[Channel::Pos], 0);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn hierarchical_needs_two_channels() {
        let cfg = ModelConfig::new(Architecture::HierarchicalAttention, &[Channel::Word], 0);
        assert!(matches!(cfg.validate(), Err(ModelError::Config { .. })));
    }

    #[test]
    fn sharing_scenarios_are_validated() {
        let mut cfg = wl(Architecture::Vanilla);
        cfg.weight_sharing = WeightSharing::SharePosLiwc;
        assert!(cfg.validate().is_err(), "wl has no pos channel");

        let mut cfg = ModelConfig::new(
            Architecture::Vanilla,
            &[Channel::Word, Channel::Pos, Channel::Liwc],
            0,
        );
        cfg.weight_sharing = WeightSharing::SharePosLiwc;
        cfg.validate().unwrap();

        cfg.weight_sharing = WeightSharing::ShareAll;
        cfg.validate().unwrap();
        cfg.pretrained_words = true;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn channel_order_is_enforced() {
        let cfg = ModelConfig::new(Architecture::Vanilla, &[Channel::Liwc, Channel::Word], 0);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn config_serde_round_trip() {
        let cfg = wl(Architecture::HierarchicalAttention);
        let json = serde_json::to_string(&cfg).unwrap();
        let back: ModelConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(cfg, back);
        assert!(json.contains("hierarchical_attention"));
    }
}
