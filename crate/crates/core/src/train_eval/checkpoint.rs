//! Self-describing model checkpoints.
//!
//! The tensor container comes from `numerics::checkpoint`; the manifest
//! carries everything else needed to classify raw text with a loaded model:
//! the model config, both vocabularies, the category lexicon, and the
//! channel-to-slot row maps. Descriptiveness is recomputed from the lexicon
//! on load, which is deterministic, so a round-trip reproduces forwards
//! bit-exactly.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::models::{
    AttentionParams, ChannelMap, EncoderParams, GruParams, ModelConfig, ModelParams,
};
use crate::numerics::{checkpoint as container, Tensor};
use crate::text_repr::{
    compute_descriptiveness, CategoryLexicon, Channel, EmbeddingMatrix, LexiconPattern,
    TextPipeline, Vocabulary,
};

#[derive(Clone, Debug)]
pub struct TrainedModel {
    pub params: ModelParams,
    pub pipeline: TextPipeline,
}

#[derive(Serialize, Deserialize)]
struct ModelManifest {
    kind: String,
    config: ModelConfig,
    pipeline: PipelineManifest,
    embedding_slots: Vec<SlotManifest>,
    channel_maps: Vec<MapManifest>,
}

#[derive(Serialize, Deserialize)]
struct PipelineManifest {
    word_vocab: Vec<String>,
    pos_vocab: Vec<String>,
    lexicon_categories: Vec<String>,
    lexicon_patterns: Vec<PatternManifest>,
    max_len: usize,
}

#[derive(Serialize, Deserialize)]
struct PatternManifest {
    pattern: String,
    wildcard: bool,
    /// Indices into `lexicon_categories`.
    categories: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct SlotManifest {
    name: String,
    dim: usize,
    trainable: bool,
}

#[derive(Serialize, Deserialize)]
struct MapManifest {
    channel: Channel,
    slot: usize,
    rows: Vec<usize>,
}

const MANIFEST_KIND: &str = "biaslang-model";

pub fn checkpoint_save(model: &TrainedModel, path: &Path) -> Result<(), TrainError> {
    let manifest = ModelManifest {
        kind: MANIFEST_KIND.to_string(),
        config: model.params.config.clone(),
        pipeline: PipelineManifest {
            word_vocab: model.pipeline.word_vocab.entries().to_vec(),
            pos_vocab: model.pipeline.pos_vocab.entries().to_vec(),
            lexicon_categories: model.pipeline.lexicon.category_list.clone(),
            lexicon_patterns: model
                .pipeline
                .lexicon
                .patterns
                .iter()
                .map(|p| PatternManifest {
                    pattern: p.pattern.clone(),
                    wildcard: p.wildcard,
                    categories: p.categories.clone(),
                })
                .collect(),
            max_len: model.pipeline.max_len,
        },
        embedding_slots: model
            .params
            .embeddings
            .iter()
            .map(|e| SlotManifest {
                name: e.name.clone(),
                dim: e.dim,
                trainable: e.trainable,
            })
            .collect(),
        channel_maps: model
            .params
            .channel_maps
            .iter()
            .map(|m| MapManifest {
                channel: m.channel,
                slot: m.slot,
                rows: m.rows.clone(),
            })
            .collect(),
    };
    let extra = serde_json::to_value(&manifest).map_err(|e| TrainError::Manifest {
        what: format!("encode: {e}"),
    })?;
    let named = model.params.named_tensors();
    let tensors: Vec<(String, &Tensor)> = named.into_iter().collect();
    container::save(path, extra, &tensors)?;
    Ok(())
}

pub fn checkpoint_load(path: &Path) -> Result<TrainedModel, TrainError> {
    let (extra, tensor_list) = container::load(path)?;
    let manifest: ModelManifest =
        serde_json::from_value(extra).map_err(|e| TrainError::Manifest {
            what: format!("decode: {e}"),
        })?;
    if manifest.kind != MANIFEST_KIND {
        return Err(TrainError::Manifest {
            what: format!("unexpected kind `{}`", manifest.kind),
        });
    }
    manifest.config.validate()?;

    let lexicon = CategoryLexicon {
        category_list: manifest.pipeline.lexicon_categories,
        patterns: manifest
            .pipeline
            .lexicon_patterns
            .into_iter()
            .map(|p| LexiconPattern {
                pattern: p.pattern,
                wildcard: p.wildcard,
                categories: p.categories,
            })
            .collect(),
    };
    let descriptiveness = compute_descriptiveness(&lexicon);
    let pipeline = TextPipeline {
        word_vocab: Vocabulary::from_entries(manifest.pipeline.word_vocab),
        pos_vocab: Vocabulary::from_entries(manifest.pipeline.pos_vocab),
        liwc_vocab: Vocabulary::for_categories(&lexicon.category_list),
        lexicon,
        descriptiveness,
        max_len: manifest.pipeline.max_len,
    };

    let mut tensors: HashMap<String, Tensor> = tensor_list.into_iter().collect();
    fn take(tensors: &mut HashMap<String, Tensor>, name: String) -> Result<Tensor, TrainError> {
        tensors.remove(&name).ok_or_else(|| TrainError::Manifest {
            what: format!("missing tensor `{name}`"),
        })
    }
    fn take_gru(
        tensors: &mut HashMap<String, Tensor>,
        prefix: &str,
    ) -> Result<GruParams, TrainError> {
        Ok(GruParams {
            w_z: take(tensors, format!("{prefix}.w_z"))?,
            u_z: take(tensors, format!("{prefix}.u_z"))?,
            b_z: take(tensors, format!("{prefix}.b_z"))?,
            w_r: take(tensors, format!("{prefix}.w_r"))?,
            u_r: take(tensors, format!("{prefix}.u_r"))?,
            b_r: take(tensors, format!("{prefix}.b_r"))?,
            w_h: take(tensors, format!("{prefix}.w_h"))?,
            u_h: take(tensors, format!("{prefix}.u_h"))?,
            b_h: take(tensors, format!("{prefix}.b_h"))?,
        })
    }
    fn take_attn(
        tensors: &mut HashMap<String, Tensor>,
        prefix: &str,
    ) -> Result<AttentionParams, TrainError> {
        Ok(AttentionParams {
            w_emb: take(tensors, format!("{prefix}.w_emb"))?,
            b_emb: take(tensors, format!("{prefix}.b_emb"))?,
            context: take(tensors, format!("{prefix}.context"))?,
        })
    }

    let mut embeddings = Vec::with_capacity(manifest.embedding_slots.len());
    for (i, slot) in manifest.embedding_slots.iter().enumerate() {
        embeddings.push(EmbeddingMatrix {
            name: slot.name.clone(),
            dim: slot.dim,
            weights: take(&mut tensors, format!("emb.{i}"))?,
            trainable: slot.trainable,
        });
    }
    let channel_maps = manifest
        .channel_maps
        .into_iter()
        .map(|m| ChannelMap {
            channel: m.channel,
            slot: m.slot,
            rows: m.rows,
        })
        .collect();

    use crate::models::Architecture;
    let encoder = match manifest.config.architecture {
        Architecture::Vanilla => EncoderParams::Flat {
            gru: take_gru(&mut tensors, "gru")?,
            attention: None,
        },
        Architecture::GlobalAttention => EncoderParams::Flat {
            gru: take_gru(&mut tensors, "gru")?,
            attention: Some(take_attn(&mut tensors, "attn")?),
        },
        Architecture::HierarchicalAttention => {
            let mut channel_grus = Vec::new();
            let mut channel_attention = Vec::new();
            for ch in &manifest.config.channels {
                channel_grus.push(take_gru(&mut tensors, &format!("gru.{}", ch.name()))?);
            }
            for ch in &manifest.config.channels {
                channel_attention.push(take_attn(&mut tensors, &format!("attn.{}", ch.name()))?);
            }
            EncoderParams::Hierarchical {
                channel_grus,
                channel_attention,
                top_gru: take_gru(&mut tensors, "top_gru")?,
                top_attention: take_attn(&mut tensors, "top_attn")?,
            }
        }
    };

    let params = ModelParams {
        config: manifest.config,
        embeddings,
        channel_maps,
        encoder,
        output_weight: take(&mut tensors, "out.weight".to_string())?,
        output_bias: take(&mut tensors, "out.bias".to_string())?,
    };
    Ok(TrainedModel { params, pipeline })
}

impl TrainedModel {
    pub fn save(&self, path: &Path) -> Result<(), TrainError> {
        checkpoint_save(self, path)
    }

    pub fn load(path: &Path) -> Result<TrainedModel, TrainError> {
        checkpoint_load(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::ExecMode;
    use crate::models::Architecture;
    use crate::text_repr::Channel;

    fn fixture_model(seed: u64, arch: Architecture) -> TrainedModel {
        let lexicon = CategoryLexicon::from_entries(&[
            ("bright*", &["glow"]),
            ("dark*", &["shadow", "glow"]),
        ]);
        let texts = ["bright things shine", "dark corners hide", "things hide corners"];
        let pipeline = TextPipeline::build(texts.iter().map(|t| (*t, None)), lexicon, 6);
        let mut cfg = ModelConfig::new(arch, &[Channel::Word, Channel::Liwc], seed);
        cfg.embedding_dim = 4;
        cfg.hidden_dim = 4;
        cfg.attn_dim = 3;
        cfg.max_len = 6;
        let params = ModelParams::init(&cfg, &pipeline, None).unwrap();
        TrainedModel { params, pipeline }
    }

    #[test]
    fn round_trip_reproduces_tensors_bit_exactly() {
        for arch in [
            Architecture::Vanilla,
            Architecture::GlobalAttention,
            Architecture::HierarchicalAttention,
        ] {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("model.blc");
            let model = fixture_model(21, arch);
            model.save(&path).unwrap();
            let loaded = TrainedModel::load(&path).unwrap();
            assert_eq!(loaded.params.config, model.params.config);
            let a = model.params.named_tensors();
            let b = loaded.params.named_tensors();
            assert_eq!(a.len(), b.len());
            for ((n1, t1), (n2, t2)) in a.iter().zip(&b) {
                assert_eq!(n1, n2);
                assert_eq!(t1.shape(), t2.shape());
                let bits1: Vec<u64> = t1.data().iter().map(|v| v.to_bits()).collect();
                let bits2: Vec<u64> = t2.data().iter().map(|v| v.to_bits()).collect();
                assert_eq!(bits1, bits2, "{n1} changed across the round trip");
            }
        }
    }

    #[test]
    fn round_trip_preserves_predictions() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.blc");
        let model = fixture_model(5, Architecture::GlobalAttention);
        let enc = model.pipeline.encode("bright dark things", None).unwrap();
        let before = crate::models::predict(&model.params, &enc).unwrap().probability;
        model.save(&path).unwrap();
        let loaded = TrainedModel::load(&path).unwrap();
        let enc2 = loaded.pipeline.encode("bright dark things", None).unwrap();
        assert_eq!(enc, enc2);
        let after = crate::models::predict(&loaded.params, &enc2).unwrap().probability;
        assert_eq!(before.to_bits(), after.to_bits());
    }

    #[test]
    fn evaluation_is_identical_after_reload() {
        use crate::corpus::{Label, LabeledStatement, Source};
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.blc");
        let model = fixture_model(8, Architecture::HierarchicalAttention);
        let stmts: Vec<LabeledStatement> = [
            ("a", "bright things shine", Label::Biased),
            ("b", "dark corners hide", Label::Neutral),
            ("c", "things hide", Label::Neutral),
        ]
        .iter()
        .map(|(id, text, label)| LabeledStatement {
            id: id.to_string(),
            text: text.to_string(),
            label: *label,
            confidence: 1.0,
            article_type: String::new(),
            source: Source::CrowdPov,
            pos: None,
        })
        .collect();
        let before = super::super::evaluate(&model, &stmts, ExecMode::default()).unwrap();
        model.save(&path).unwrap();
        let loaded = TrainedModel::load(&path).unwrap();
        let after = super::super::evaluate(&loaded, &stmts, ExecMode::default()).unwrap();
        assert_eq!(before, after);
    }

    #[test]
    fn foreign_container_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("other.blc");
        let t = Tensor::scalar(1.0);
        container::save(
            &path,
            serde_json::json!({"kind": "something-else"}),
            &[("a".into(), &t)],
        )
        .unwrap();
        assert!(matches!(
            TrainedModel::load(&path),
            Err(TrainError::Manifest { .. })
        ));
    }
}
