//! Parameter containers, initialization, and tape binding.
//!
//! The tensor inventory depends on the architecture: the flat models own one
//! GRU over the merged channels (plus one attention head for the global
//! model); the hierarchical model owns a GRU and attention head per channel,
//! a top-level GRU and a top-level attention head. `visit` fixes one global
//! tensor order used everywhere: checkpoints, Adam state, and gradient
//! extraction all align through it.

use std::io::BufRead;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;

use super::{Architecture, ModelConfig, ModelError, WeightSharing};
use crate::numerics::{Gradients, Tape, Tensor, ValueId};
use crate::text_repr::{load_embeddings, Channel, EmbeddingMatrix, TextPipeline, INIT_RANGE};

#[derive(Clone, Debug)]
pub struct GruParams {
    pub w_z: Tensor,
    pub u_z: Tensor,
    pub b_z: Tensor,
    pub w_r: Tensor,
    pub u_r: Tensor,
    pub b_r: Tensor,
    pub w_h: Tensor,
    pub u_h: Tensor,
    pub b_h: Tensor,
}

impl GruParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        GruParams {
            w_z: Tensor::zeros(&[hidden_dim, input_dim]),
            u_z: Tensor::zeros(&[hidden_dim, hidden_dim]),
            b_z: Tensor::zeros(&[hidden_dim]),
            w_r: Tensor::zeros(&[hidden_dim, input_dim]),
            u_r: Tensor::zeros(&[hidden_dim, hidden_dim]),
            b_r: Tensor::zeros(&[hidden_dim]),
            w_h: Tensor::zeros(&[hidden_dim, input_dim]),
            u_h: Tensor::zeros(&[hidden_dim, hidden_dim]),
            b_h: Tensor::zeros(&[hidden_dim]),
        }
    }

    fn glorot(input_dim: usize, hidden_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        GruParams {
            w_z: glorot(hidden_dim, input_dim, rng),
            u_z: glorot(hidden_dim, hidden_dim, rng),
            b_z: Tensor::zeros(&[hidden_dim]),
            w_r: glorot(hidden_dim, input_dim, rng),
            u_r: glorot(hidden_dim, hidden_dim, rng),
            b_r: Tensor::zeros(&[hidden_dim]),
            w_h: glorot(hidden_dim, input_dim, rng),
            u_h: glorot(hidden_dim, hidden_dim, rng),
            b_h: Tensor::zeros(&[hidden_dim]),
        }
    }

    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor, bool)) {
        f(format!("{prefix}.w_z"), &self.w_z, true);
        f(format!("{prefix}.u_z"), &self.u_z, true);
        f(format!("{prefix}.b_z"), &self.b_z, true);
        f(format!("{prefix}.w_r"), &self.w_r, true);
        f(format!("{prefix}.u_r"), &self.u_r, true);
        f(format!("{prefix}.b_r"), &self.b_r, true);
        f(format!("{prefix}.w_h"), &self.w_h, true);
        f(format!("{prefix}.u_h"), &self.u_h, true);
        f(format!("{prefix}.b_h"), &self.b_h, true);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Tensor, bool)) {
        f(&mut self.w_z, true);
        f(&mut self.u_z, true);
        f(&mut self.b_z, true);
        f(&mut self.w_r, true);
        f(&mut self.u_r, true);
        f(&mut self.b_r, true);
        f(&mut self.w_h, true);
        f(&mut self.u_h, true);
        f(&mut self.b_h, true);
    }
}

#[derive(Clone, Debug)]
pub struct AttentionParams {
    /// Projection `[attn_dim, hidden_dim]` producing u_t.
    pub w_emb: Tensor,
    pub b_emb: Tensor,
    /// Learned context vector scored against u_t.
    pub context: Tensor,
}

impl AttentionParams {
    fn init(hidden_dim: usize, attn_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        AttentionParams {
            w_emb: glorot(attn_dim, hidden_dim, rng),
            b_emb: Tensor::zeros(&[attn_dim]),
            context: uniform(&[attn_dim], INIT_RANGE, rng),
        }
    }

    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor, bool)) {
        f(format!("{prefix}.w_emb"), &self.w_emb, true);
        f(format!("{prefix}.b_emb"), &self.b_emb, true);
        f(format!("{prefix}.context"), &self.context, true);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Tensor, bool)) {
        f(&mut self.w_emb, true);
        f(&mut self.b_emb, true);
        f(&mut self.context, true);
    }
}

#[derive(Clone, Debug)]
pub enum EncoderParams {
    Flat {
        gru: GruParams,
        attention: Option<AttentionParams>,
    },
    Hierarchical {
        /// Aligned with `config.channels`.
        channel_grus: Vec<GruParams>,
        channel_attention: Vec<AttentionParams>,
        top_gru: GruParams,
        top_attention: AttentionParams,
    },
}

/// How a channel's vocabulary ids map into an embedding slot.
#[derive(Clone, Debug)]
pub struct ChannelMap {
    pub channel: Channel,
    pub slot: usize,
    /// Channel vocabulary id -> row in the slot matrix.
    pub rows: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct ModelParams {
    pub config: ModelConfig,
    /// Embedding slots; under weight sharing several channels point at the
    /// same slot, so mutating it is visible through every sharing channel.
    pub embeddings: Vec<EmbeddingMatrix>,
    pub channel_maps: Vec<ChannelMap>,
    pub encoder: EncoderParams,
    /// `[hidden_dim]`, applied as a dot product.
    pub output_weight: Tensor,
    /// Scalar.
    pub output_bias: Tensor,
}

fn glorot(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    uniform(&[rows, cols], limit, rng)
}

fn uniform(shape: &[usize], limit: f64, rng: &mut ChaCha8Rng) -> Tensor {
    let len: usize = shape.iter().product();
    let data: Vec<f64> = (0..len).map(|_| rng.gen_range(-limit..=limit)).collect();
    Tensor::new(shape.to_vec(), data).expect("uniform init shape")
}

/// Union of vocabulary entry lists, deduplicated, preserving first-seen
/// order. Entry 0 stays the padding token.
fn union_entries(parts: &[&[String]]) -> (Vec<String>, Vec<Vec<usize>>) {
    let mut combined: Vec<String> = Vec::new();
    let mut index: std::collections::HashMap<String, usize> = std::collections::HashMap::new();
    let mut maps = Vec::with_capacity(parts.len());
    for entries in parts {
        let mut rows = Vec::with_capacity(entries.len());
        for e in entries.iter() {
            let row = *index.entry(e.clone()).or_insert_with(|| {
                combined.push(e.clone());
                combined.len() - 1
            });
            rows.push(row);
        }
        maps.push(rows);
    }
    (combined, maps)
}

impl ModelParams {
    /// Initialize all weights from the config seed. `word_vectors` must be
    /// given exactly when `pretrained_words` is set; those rows are loaded
    /// from the file and frozen.
    pub fn init(
        config: &ModelConfig,
        pipeline: &TextPipeline,
        word_vectors: Option<&mut dyn BufRead>,
    ) -> Result<ModelParams, ModelError> {
        config.validate()?;
        if config.pretrained_words && word_vectors.is_none() {
            return Err(ModelError::Config {
                what: "pretrained_words requires a word-vector file".into(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let dim = config.embedding_dim;
        let mut word_vectors = word_vectors;

        let mut embeddings = Vec::new();
        let mut channel_maps = Vec::new();
        match config.weight_sharing {
            WeightSharing::Separate => {
                for &ch in &config.channels {
                    let vocab = pipeline.vocab(ch);
                    let matrix = if ch == Channel::Word && config.pretrained_words {
                        let reader = word_vectors.take().expect("checked above");
                        let mut m = load_embeddings(reader, vocab, dim, &mut rng, false)?;
                        m.name = ch.name().to_string();
                        m
                    } else {
                        EmbeddingMatrix::random_init(ch.name(), vocab.len(), dim, &mut rng, true)
                    };
                    embeddings.push(matrix);
                    channel_maps.push(identity_map(ch, embeddings.len() - 1, vocab.len()));
                }
            }
            WeightSharing::SharePosLiwc => {
                let word_vocab = pipeline.vocab(Channel::Word);
                let word_matrix = match (config.pretrained_words, word_vectors.take()) {
                    (true, Some(reader)) => {
                        let mut m = load_embeddings(reader, word_vocab, dim, &mut rng, false)?;
                        m.name = "word".to_string();
                        m
                    }
                    _ => EmbeddingMatrix::random_init(
                        "word",
                        word_vocab.len(),
                        dim,
                        &mut rng,
                        true,
                    ),
                };
                embeddings.push(word_matrix);
                channel_maps.push(identity_map(Channel::Word, 0, word_vocab.len()));

                let (combined, maps) = union_entries(&[
                    pipeline.vocab(Channel::Pos).entries(),
                    pipeline.vocab(Channel::Liwc).entries(),
                ]);
                embeddings.push(EmbeddingMatrix::random_init(
                    "pos+liwc",
                    combined.len(),
                    dim,
                    &mut rng,
                    true,
                ));
                channel_maps.push(ChannelMap {
                    channel: Channel::Pos,
                    slot: 1,
                    rows: maps[0].clone(),
                });
                channel_maps.push(ChannelMap {
                    channel: Channel::Liwc,
                    slot: 1,
                    rows: maps[1].clone(),
                });
            }
            WeightSharing::ShareAll => {
                let parts: Vec<&[String]> = config
                    .channels
                    .iter()
                    .map(|&c| pipeline.vocab(c).entries())
                    .collect();
                let (combined, maps) = union_entries(&parts);
                embeddings.push(EmbeddingMatrix::random_init(
                    "word+pos+liwc",
                    combined.len(),
                    dim,
                    &mut rng,
                    true,
                ));
                for (i, &ch) in config.channels.iter().enumerate() {
                    channel_maps.push(ChannelMap {
                        channel: ch,
                        slot: 0,
                        rows: maps[i].clone(),
                    });
                }
            }
        }
        Self::finish(config, pipeline, rng, (embeddings, channel_maps))
    }

    fn finish(
        config: &ModelConfig,
        _pipeline: &TextPipeline,
        mut rng: ChaCha8Rng,
        (embeddings, channel_maps): (Vec<EmbeddingMatrix>, Vec<ChannelMap>),
    ) -> Result<ModelParams, ModelError> {
        let hidden = config.hidden_dim;
        let encoder = match config.architecture {
            Architecture::Vanilla => EncoderParams::Flat {
                gru: GruParams::glorot(config.merged_input_dim(), hidden, &mut rng),
                attention: None,
            },
            Architecture::GlobalAttention => EncoderParams::Flat {
                gru: GruParams::glorot(config.merged_input_dim(), hidden, &mut rng),
                attention: Some(AttentionParams::init(hidden, config.attn_dim, &mut rng)),
            },
            Architecture::HierarchicalAttention => {
                let channel_grus = config
                    .channels
                    .iter()
                    .map(|_| GruParams::glorot(config.embedding_dim, hidden, &mut rng))
                    .collect();
                let channel_attention = config
                    .channels
                    .iter()
                    .map(|_| AttentionParams::init(hidden, config.attn_dim, &mut rng))
                    .collect();
                EncoderParams::Hierarchical {
                    channel_grus,
                    channel_attention,
                    top_gru: GruParams::glorot(hidden, hidden, &mut rng),
                    top_attention: AttentionParams::init(hidden, config.attn_dim, &mut rng),
                }
            }
        };
        let output_weight = {
            let limit = (6.0 / (hidden + 1) as f64).sqrt();
            uniform(&[hidden], limit, &mut rng)
        };
        Ok(ModelParams {
            config: config.clone(),
            embeddings,
            channel_maps,
            encoder,
            output_weight,
            output_bias: Tensor::scalar(0.0),
        })
    }

    pub fn channel_map(&self, channel: Channel) -> &ChannelMap {
        self.channel_maps
            .iter()
            .find(|m| m.channel == channel)
            .expect("channel present in a validated model")
    }

    /// Walk every tensor in the fixed global order. `trainable` is false
    /// for frozen (pretrained) embedding slots.
    pub fn visit<'a>(&'a self, f: &mut dyn FnMut(String, &'a Tensor, bool)) {
        for (i, emb) in self.embeddings.iter().enumerate() {
            f(format!("emb.{i}"), &emb.weights, emb.trainable);
        }
        match &self.encoder {
            EncoderParams::Flat { gru, attention } => {
                gru.visit("gru", f);
                if let Some(attn) = attention {
                    attn.visit("attn", f);
                }
            }
            EncoderParams::Hierarchical {
                channel_grus,
                channel_attention,
                top_gru,
                top_attention,
            } => {
                for (ch, gru) in self.config.channels.iter().zip(channel_grus) {
                    gru.visit(&format!("gru.{}", ch.name()), f);
                }
                for (ch, attn) in self.config.channels.iter().zip(channel_attention) {
                    attn.visit(&format!("attn.{}", ch.name()), f);
                }
                top_gru.visit("top_gru", f);
                top_attention.visit("top_attn", f);
            }
        }
        f("out.weight".to_string(), &self.output_weight, true);
        f("out.bias".to_string(), &self.output_bias, true);
    }

    /// Same order as `visit`, mutable.
    pub fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Tensor, bool)) {
        for emb in &mut self.embeddings {
            f(&mut emb.weights, emb.trainable);
        }
        match &mut self.encoder {
            EncoderParams::Flat { gru, attention } => {
                gru.visit_mut(f);
                if let Some(attn) = attention {
                    attn.visit_mut(f);
                }
            }
            EncoderParams::Hierarchical {
                channel_grus,
                channel_attention,
                top_gru,
                top_attention,
            } => {
                for gru in channel_grus {
                    gru.visit_mut(f);
                }
                for attn in channel_attention {
                    attn.visit_mut(f);
                }
                top_gru.visit_mut(f);
                top_attention.visit_mut(f);
            }
        }
        f(&mut self.output_weight, true);
        f(&mut self.output_bias, true);
    }

    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        self.visit(&mut |name, t, _| out.push((name, t)));
        out
    }

    pub fn trainable_shapes(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        self.visit(&mut |_, t, trainable| {
            if trainable {
                out.push(t.shape().to_vec());
            }
        });
        out
    }

    /// Bind every tensor onto a tape as leaves. Insertion follows `visit`
    /// order so gradient extraction and Adam state line up by index.
    pub fn bind(&self, tape: &mut Tape) -> BoundParams {
        let mut ordered = Vec::new();
        let mut insert = |tape: &mut Tape, t: &Tensor, trainable: bool| {
            let id = tape.leaf(t.clone());
            if trainable {
                ordered.push(id);
            }
            id
        };

        let emb: Vec<ValueId> = self
            .embeddings
            .iter()
            .map(|e| insert(tape, &e.weights, e.trainable))
            .collect();
        let encoder = match &self.encoder {
            EncoderParams::Flat { gru, attention } => BoundEncoder::Flat {
                gru: BoundGru::insert(tape, gru, &mut insert),
                attention: attention
                    .as_ref()
                    .map(|a| BoundAttention::insert(tape, a, &mut insert)),
            },
            EncoderParams::Hierarchical {
                channel_grus,
                channel_attention,
                top_gru,
                top_attention,
            } => BoundEncoder::Hierarchical {
                channel_grus: channel_grus
                    .iter()
                    .map(|g| BoundGru::insert(tape, g, &mut insert))
                    .collect(),
                channel_attention: channel_attention
                    .iter()
                    .map(|a| BoundAttention::insert(tape, a, &mut insert))
                    .collect(),
                top_gru: BoundGru::insert(tape, top_gru, &mut insert),
                top_attention: BoundAttention::insert(tape, top_attention, &mut insert),
            },
        };
        let out_w = insert(tape, &self.output_weight, true);
        let out_b = insert(tape, &self.output_bias, true);
        BoundParams {
            emb,
            encoder,
            out_w,
            out_b,
            trainable_ids: ordered,
        }
    }
}

fn identity_map(channel: Channel, slot: usize, vocab_len: usize) -> ChannelMap {
    ChannelMap {
        channel,
        slot,
        rows: (0..vocab_len).collect(),
    }
}

#[derive(Clone, Copy, Debug)]
pub struct BoundGru {
    pub w_z: ValueId,
    pub u_z: ValueId,
    pub b_z: ValueId,
    pub w_r: ValueId,
    pub u_r: ValueId,
    pub b_r: ValueId,
    pub w_h: ValueId,
    pub u_h: ValueId,
    pub b_h: ValueId,
}

impl BoundGru {
    fn insert(
        tape: &mut Tape,
        p: &GruParams,
        insert: &mut impl FnMut(&mut Tape, &Tensor, bool) -> ValueId,
    ) -> Self {
        BoundGru {
            w_z: insert(tape, &p.w_z, true),
            u_z: insert(tape, &p.u_z, true),
            b_z: insert(tape, &p.b_z, true),
            w_r: insert(tape, &p.w_r, true),
            u_r: insert(tape, &p.u_r, true),
            b_r: insert(tape, &p.b_r, true),
            w_h: insert(tape, &p.w_h, true),
            u_h: insert(tape, &p.u_h, true),
            b_h: insert(tape, &p.b_h, true),
        }
    }

    /// Bind standalone GRU parameters (tests and oracles).
    pub fn bind(tape: &mut Tape, p: &GruParams) -> Self {
        let mut insert =
            |tape: &mut Tape, t: &Tensor, _trainable: bool| tape.leaf(t.clone());
        Self::insert(tape, p, &mut insert)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct BoundAttention {
    pub w_emb: ValueId,
    pub b_emb: ValueId,
    pub context: ValueId,
}

impl BoundAttention {
    fn insert(
        tape: &mut Tape,
        p: &AttentionParams,
        insert: &mut impl FnMut(&mut Tape, &Tensor, bool) -> ValueId,
    ) -> Self {
        BoundAttention {
            w_emb: insert(tape, &p.w_emb, true),
            b_emb: insert(tape, &p.b_emb, true),
            context: insert(tape, &p.context, true),
        }
    }

    pub fn bind(tape: &mut Tape, p: &AttentionParams) -> Self {
        let mut insert =
            |tape: &mut Tape, t: &Tensor, _trainable: bool| tape.leaf(t.clone());
        Self::insert(tape, p, &mut insert)
    }
}

#[derive(Clone, Debug)]
pub enum BoundEncoder {
    Flat {
        gru: BoundGru,
        attention: Option<BoundAttention>,
    },
    Hierarchical {
        channel_grus: Vec<BoundGru>,
        channel_attention: Vec<BoundAttention>,
        top_gru: BoundGru,
        top_attention: BoundAttention,
    },
}

#[derive(Clone, Debug)]
pub struct BoundParams {
    pub emb: Vec<ValueId>,
    pub encoder: BoundEncoder,
    pub out_w: ValueId,
    pub out_b: ValueId,
    trainable_ids: Vec<ValueId>,
}

impl BoundParams {
    /// Gradients of the trainable tensors in visitation order; zeros where
    /// a tensor did not influence the loss. Frozen embedding rows (padding)
    /// accumulate nothing because padded positions are never gathered.
    pub fn trainable_gradients(&self, grads: &Gradients, shapes: &[Vec<usize>]) -> Vec<Tensor> {
        assert_eq!(self.trainable_ids.len(), shapes.len(), "inventory drift");
        self.trainable_ids
            .iter()
            .zip(shapes)
            .map(|(&id, shape)| grads.get_or_zeros(id, shape))
            .collect()
    }
}

