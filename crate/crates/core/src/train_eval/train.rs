//! The mini-batch training loop.
//!
//! Batches shuffle under the run seed each epoch. Within a batch every
//! example runs on its own tape; per-example gradients are summed chunk by
//! chunk in a fixed order (see `exec::fold_chunked`), so a training run is
//! bit-deterministic in both exec modes. The parameters returned are those
//! of the epoch with the best validation accuracy, later epochs winning
//! ties.

use std::io::BufRead;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::TrainedModel;
use super::metrics::evaluate_encoded;
use super::TrainError;
use crate::corpus::{DatasetSplit, Label, LabeledStatement};
use crate::exec::{fold_chunked, map_ordered, ExecMode};
use crate::models::{forward, ModelConfig, ModelError, ModelParams};
use crate::numerics::{AdamHyper, AdamState, Tape, Tensor};
use crate::text_repr::{CategoryLexicon, EncodedStatement, TextPipeline};

fn default_epochs() -> usize {
    10
}

fn default_batch_size() -> usize {
    100
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default)]
    pub optimizer: AdamHyper,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub shuffle_each_epoch: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: default_epochs(),
            batch_size: default_batch_size(),
            optimizer: AdamHyper::default(),
            seed: 0,
            shuffle_each_epoch: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: f64,
}

fn target_of(label: Label) -> f64 {
    match label {
        Label::Biased => 1.0,
        Label::Neutral => 0.0,
    }
}

fn encode_set(
    pipeline: &TextPipeline,
    statements: &[LabeledStatement],
) -> Result<Vec<(EncodedStatement, Label)>, TrainError> {
    let mut out = Vec::with_capacity(statements.len());
    for s in statements {
        let enc = pipeline.encode(&s.text, s.pos.as_deref())?;
        if enc.length == 0 {
            return Err(TrainError::EmptyStatement { id: s.id.clone() });
        }
        out.push((enc, s.label));
    }
    Ok(out)
}

/// Loss and trainable-parameter gradients for one example.
fn example_pass(
    params: &ModelParams,
    shapes: &[Vec<usize>],
    enc: &EncodedStatement,
    target: f64,
) -> Result<(f64, Vec<Tensor>), ModelError> {
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape);
    let pass = forward(&mut tape, params, &bound, enc)?;
    let loss = tape.bce(pass.probability, target)?;
    let loss_value = tape.value(loss).item();
    let grads = tape.backward(loss)?;
    Ok((loss_value, bound.trainable_gradients(&grads, shapes)))
}

fn add_assign_all(acc: &mut [Tensor], other: &[Tensor]) {
    for (a, o) in acc.iter_mut().zip(other) {
        let d = a.data_mut();
        for (x, y) in d.iter_mut().zip(o.data()) {
            *x += y;
        }
    }
}

/// Mean loss and mean gradients over one batch.
fn batch_pass(
    params: &ModelParams,
    shapes: &[Vec<usize>],
    batch: &[(EncodedStatement, Label)],
    mode: ExecMode,
) -> Result<(f64, Vec<Tensor>), ModelError> {
    type ChunkResult = Result<(f64, Vec<Tensor>), ModelError>;
    let folded: ChunkResult = fold_chunked(
        mode,
        batch,
        |chunk| -> ChunkResult {
            let mut loss_sum = 0.0;
            let mut grad_sum: Option<Vec<Tensor>> = None;
            for (enc, label) in chunk {
                let (loss, grads) = example_pass(params, shapes, enc, target_of(*label))?;
                loss_sum += loss;
                match &mut grad_sum {
                    None => grad_sum = Some(grads),
                    Some(acc) => add_assign_all(acc, &grads),
                }
            }
            Ok((loss_sum, grad_sum.expect("non-empty chunk")))
        },
        |a, b| {
            let (mut a, b) = (a?, b?);
            a.0 += b.0;
            add_assign_all(&mut a.1, &b.1);
            Ok(a)
        },
    )
    .expect("non-empty batch");
    let (loss_sum, mut grads) = folded?;
    let scale = 1.0 / batch.len() as f64;
    for g in &mut grads {
        for v in g.data_mut() {
            *v *= scale;
        }
    }
    Ok((loss_sum * scale, grads))
}

/// Train a model on the split. Vocabularies are built from the training set
/// only; `word_vectors` feeds pretrained word embeddings when the model
/// config asks for them.
pub fn train(
    model_config: &ModelConfig,
    train_config: &TrainConfig,
    lexicon: CategoryLexicon,
    word_vectors: Option<&mut dyn BufRead>,
    split: &DatasetSplit,
    mode: ExecMode,
) -> Result<(TrainedModel, Vec<EpochLog>), TrainError> {
    if split.train.is_empty() || split.validation.is_empty() {
        return Err(TrainError::Degenerate {
            what: "training needs non-empty train and validation splits".into(),
        });
    }
    let pipeline = TextPipeline::build(
        split
            .train
            .iter()
            .map(|s| (s.text.as_str(), s.pos.as_deref())),
        lexicon,
        model_config.max_len,
    );
    let mut params = ModelParams::init(model_config, &pipeline, word_vectors)?;
    let shapes = params.trainable_shapes();
    let mut adam = AdamState::new(&shapes, train_config.optimizer);

    let train_set = encode_set(&pipeline, &split.train)?;
    let val_set = encode_set(&pipeline, &split.validation)?;

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(train_config.seed);
    let mut best: Option<(f64, usize, ModelParams)> = None;
    let mut log = Vec::with_capacity(train_config.epochs);

    for epoch in 1..=train_config.epochs {
        if train_config.shuffle_each_epoch || epoch == 1 {
            order.shuffle(&mut rng);
        }
        let mut epoch_loss_sum = 0.0;
        for (batch_idx, batch_ids) in order.chunks(train_config.batch_size).enumerate() {
            let batch: Vec<(EncodedStatement, Label)> = batch_ids
                .iter()
                .map(|&i| train_set[i].clone())
                .collect();
            let (mean_loss, grads) =
                batch_pass(&params, &shapes, &batch, mode).map_err(|source| TrainError::Step {
                    epoch,
                    batch: batch_idx,
                    source,
                })?;
            epoch_loss_sum += mean_loss * batch.len() as f64;

            adam.begin_step(&grads)?;
            let mut gi = 0;
            params.visit_mut(&mut |t, trainable| {
                if trainable {
                    adam.update(gi, t, &grads[gi]);
                    gi += 1;
                }
            });
            debug_assert_eq!(gi, grads.len());
        }
        let train_loss = epoch_loss_sum / train_set.len() as f64;
        if !train_loss.is_finite() {
            return Err(TrainError::Step {
                epoch,
                batch: 0,
                source: ModelError::Numerics(crate::numerics::NumericsError::NumericFault {
                    op: "epoch loss",
                }),
            });
        }
        let val_accuracy = evaluate_encoded(&params, &val_set, mode)?.accuracy;
        log.push(EpochLog {
            epoch,
            train_loss,
            val_accuracy,
        });
        let improved = best
            .as_ref()
            .map(|(acc, _, _)| val_accuracy >= *acc)
            .unwrap_or(true);
        if improved {
            best = Some((val_accuracy, epoch, params.clone()));
        }
    }

    let (_, _, best_params) = best.expect("at least one epoch");
    Ok((
        TrainedModel {
            params: best_params,
            pipeline,
        },
        log,
    ))
}

/// Holdover check: forwards of the training set under a given parameter
/// snapshot, as mean loss. Used by tests.
pub(crate) fn mean_loss(
    params: &ModelParams,
    data: &[(EncodedStatement, Label)],
    mode: ExecMode,
) -> Result<f64, TrainError> {
    let losses = map_ordered(mode, data, |(enc, label)| -> Result<f64, ModelError> {
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape);
        let pass = forward(&mut tape, params, &bound, enc)?;
        let loss = tape.bce(pass.probability, target_of(*label))?;
        Ok(tape.value(loss).item())
    });
    let mut total = 0.0;
    for l in losses {
        total += l?;
    }
    Ok(total / data.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Source;
    use crate::models::Architecture;
    use crate::text_repr::Channel;

    fn lexicon() -> CategoryLexicon {
        CategoryLexicon::from_entries(&[
            ("spark*", &["marker"]),
            ("gleam*", &["marker"]),
            ("stone*", &["filler"]),
            ("cloud*", &["filler"]),
        ])
    }

    fn stmt(id: usize, text: &str, label: Label) -> LabeledStatement {
        LabeledStatement {
            id: format!("s{id}"),
            text: text.to_string(),
            label,
            confidence: 1.0,
            article_type: "T".into(),
            source: Source::CrowdPov,
            pos: None,
        }
    }

    /// Tiny separable corpus: biased statements contain "spark" or "gleam".
    fn tiny_corpus(n: usize) -> Vec<LabeledStatement> {
        let fillers = ["stone", "cloud", "river", "field", "house"];
        (0..n)
            .map(|i| {
                let mut words: Vec<String> = (0..6)
                    .map(|j| fillers[(i * 7 + j * 3) % fillers.len()].to_string())
                    .collect();
                if i % 2 == 0 {
                    words[i % 6] = if i % 4 == 0 { "spark" } else { "gleam" }.to_string();
                    stmt(i, &words.join(" "), Label::Biased)
                } else {
                    stmt(i, &words.join(" "), Label::Neutral)
                }
            })
            .collect()
    }

    fn tiny_split(n: usize, seed: u64) -> DatasetSplit {
        crate::corpus::split(&tiny_corpus(n), seed).unwrap()
    }

    fn tiny_model(seed: u64) -> ModelConfig {
        let mut cfg = ModelConfig::new(
            Architecture::GlobalAttention,
            &[Channel::Word, Channel::Liwc],
            seed,
        );
        cfg.embedding_dim = 8;
        cfg.hidden_dim = 8;
        cfg.attn_dim = 8;
        cfg.max_len = 8;
        cfg
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let split = tiny_split(20, 3);
        let mut tc = TrainConfig {
            epochs: 3,
            batch_size: 4,
            ..TrainConfig::default()
        };
        tc.optimizer.lr = 0.0;
        let (model, log) = train(&tiny_model(5), &tc, lexicon(), None, &split, ExecMode::default())
            .unwrap();

        // Parameters equal a fresh initialization.
        let pipeline = TextPipeline::build(
            split.train.iter().map(|s| (s.text.as_str(), None)),
            lexicon(),
            8,
        );
        let fresh = ModelParams::init(&tiny_model(5), &pipeline, None).unwrap();
        let got = model.params.named_tensors();
        let want = fresh.named_tensors();
        assert_eq!(got.len(), want.len());
        for ((n1, t1), (n2, t2)) in got.iter().zip(&want) {
            assert_eq!(n1, n2);
            assert_eq!(t1.data(), t2.data(), "{n1} drifted under lr=0");
        }
        // Losses constant across epochs.
        assert!(log.windows(2).all(|w| w[0].train_loss == w[1].train_loss));
    }

    #[test]
    fn same_seed_and_data_give_bit_identical_trajectories() {
        let split = tiny_split(24, 9);
        let tc = TrainConfig {
            epochs: 2,
            batch_size: 5,
            ..TrainConfig::default()
        };
        let run = || {
            let (model, log) =
                train(&tiny_model(7), &tc, lexicon(), None, &split, ExecMode::default()).unwrap();
            let tensors: Vec<Vec<u64>> = model
                .params
                .named_tensors()
                .into_iter()
                .map(|(_, t)| t.data().iter().map(|v| v.to_bits()).collect())
                .collect();
            (tensors, log)
        };
        let (t1, l1) = run();
        let (t2, l2) = run();
        assert_eq!(t1, t2);
        assert_eq!(l1, l2);
    }

    #[test]
    fn sequential_mode_matches_parallel_mode_bitwise() {
        let split = tiny_split(20, 2);
        let tc = TrainConfig {
            epochs: 2,
            batch_size: 6,
            ..TrainConfig::default()
        };
        let run = |mode: ExecMode| {
            let (model, log) = train(&tiny_model(7), &tc, lexicon(), None, &split, mode).unwrap();
            let bits: Vec<u64> = model
                .params
                .named_tensors()
                .into_iter()
                .flat_map(|(_, t)| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>())
                .collect();
            (bits, log)
        };
        let seq = run(ExecMode::Sequential);
        let def = run(ExecMode::default());
        assert_eq!(seq.0, def.0);
        assert_eq!(seq.1, def.1);
    }

    #[test]
    fn separable_corpus_trains_to_high_validation_accuracy() {
        let split = tiny_split(60, 4);
        let tc = TrainConfig {
            epochs: 12,
            batch_size: 10,
            ..TrainConfig::default()
        };
        let (_, log) = train(&tiny_model(11), &tc, lexicon(), None, &split, ExecMode::default())
            .unwrap();
        let best = log.iter().map(|e| e.val_accuracy).fold(0.0, f64::max);
        assert!(best >= 0.8, "validation accuracy only reached {best}");
        // Loss must be finite every epoch.
        assert!(log.iter().all(|e| e.train_loss.is_finite()));
    }

    #[test]
    fn best_epoch_parameters_are_returned() {
        let split = tiny_split(30, 6);
        let tc = TrainConfig {
            epochs: 4,
            batch_size: 8,
            ..TrainConfig::default()
        };
        let (model, log) =
            train(&tiny_model(13), &tc, lexicon(), None, &split, ExecMode::default()).unwrap();
        let best_acc = log.iter().map(|e| e.val_accuracy).fold(0.0, f64::max);
        let val_set = encode_set(
            &model.pipeline,
            &split.validation,
        )
        .unwrap();
        let acc = evaluate_encoded(&model.params, &val_set, ExecMode::default())
            .unwrap()
            .accuracy;
        assert_eq!(acc, best_acc);
    }

    #[test]
    fn last_short_batch_is_kept() {
        // 14 training statements with batch 4 -> 4 batches, the last of 2.
        let split = tiny_split(20, 1);
        assert_eq!(split.train.len(), 14);
        let tc = TrainConfig {
            epochs: 1,
            batch_size: 4,
            ..TrainConfig::default()
        };
        // Passing means no example was dropped (loss averages over all 14).
        let (_, log) = train(&tiny_model(3), &tc, lexicon(), None, &split, ExecMode::default())
            .unwrap();
        assert_eq!(log.len(), 1);
    }
}
