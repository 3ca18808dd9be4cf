//! Forward passes on the autodiff tape.
//!
//! Padding is handled by skipping: the recurrence only runs over real-token
//! positions and carries the state through padded ones, and attention only
//! scores real positions. Appending padding therefore changes nothing, and
//! the padding embedding row is never gathered, so it never receives
//! gradient.

use super::params::{BoundAttention, BoundEncoder, BoundGru, BoundParams, ModelParams};
use super::{Architecture, ModelError};
use crate::corpus::Label;
use crate::numerics::{NumericsError, Tape, Tensor, ValueId};
use crate::text_repr::{Channel, EncodedStatement};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Biased is the positive class; the boundary itself classifies as biased.
pub fn classify(probability: f64, threshold: f64) -> Label {
    if probability >= threshold {
        Label::Biased
    } else {
        Label::Neutral
    }
}

/// One GRU recurrence step:
/// z = sigmoid(W_z x + U_z h + b_z), r = sigmoid(W_r x + U_r h + b_r),
/// cand = tanh(W_h x + r * (U_h h + b_h)), h' = (1 - z) * h + z * cand.
pub fn gru_step(
    tape: &mut Tape,
    x: ValueId,
    h_prev: ValueId,
    gru: &BoundGru,
    ones: ValueId,
) -> Result<ValueId, NumericsError> {
    let gate = |tape: &mut Tape, w, u, b| -> Result<ValueId, NumericsError> {
        let wx = tape.matmul(w, x)?;
        let uh = tape.matmul(u, h_prev)?;
        let s = tape.add(wx, uh)?;
        tape.add(s, b)
    };
    let z = {
        let pre = gate(tape, gru.w_z, gru.u_z, gru.b_z)?;
        tape.sigmoid(pre)?
    };
    let r = {
        let pre = gate(tape, gru.w_r, gru.u_r, gru.b_r)?;
        tape.sigmoid(pre)?
    };
    let candidate = {
        let wx = tape.matmul(gru.w_h, x)?;
        let uh = tape.matmul(gru.u_h, h_prev)?;
        let uh_b = tape.add(uh, gru.b_h)?;
        let gated = tape.hadamard(r, uh_b)?;
        let pre = tape.add(wx, gated)?;
        tape.tanh(pre)?
    };
    let keep = tape.sub(ones, z)?;
    let carried = tape.hadamard(keep, h_prev)?;
    let update = tape.hadamard(z, candidate)?;
    tape.add(carried, update)
}

/// Run the recurrence over a masked sequence from a zero initial state.
/// Padded positions carry the previous state through unchanged, so the
/// returned list always has one state per position.
pub fn encode_sequence(
    tape: &mut Tape,
    inputs: &[ValueId],
    mask: &[bool],
    gru: &BoundGru,
    hidden_dim: usize,
) -> Result<Vec<ValueId>, NumericsError> {
    debug_assert_eq!(inputs.len(), mask.len());
    let ones = tape.leaf(Tensor::filled(&[hidden_dim], 1.0));
    let mut h = tape.leaf(Tensor::zeros(&[hidden_dim]));
    let mut states = Vec::with_capacity(inputs.len());
    for (t, &x) in inputs.iter().enumerate() {
        if mask[t] {
            h = gru_step(tape, x, h, gru, ones)?;
        }
        states.push(h);
    }
    Ok(states)
}

/// Attention pooling: u_t = tanh(W_emb h_t + b_emb), alpha = softmax over
/// unmasked positions of u_t . c, s_rep = sum alpha_t h_t.
///
/// Returns the pooled representation and the full-length alpha vector with
/// exact zeros at masked positions.
pub fn global_attention(
    tape: &mut Tape,
    states: &[ValueId],
    mask: &[bool],
    attn: &BoundAttention,
) -> Result<(ValueId, Vec<f64>), ModelError> {
    debug_assert_eq!(states.len(), mask.len());
    let live: Vec<usize> = (0..states.len()).filter(|&t| mask[t]).collect();
    if live.is_empty() {
        return Err(ModelError::DegenerateInput {
            what: "attention over a fully masked sequence".into(),
        });
    }
    let mut scores = Vec::with_capacity(live.len());
    for &t in &live {
        let proj = tape.matmul(attn.w_emb, states[t])?;
        let pre = tape.add(proj, attn.b_emb)?;
        let u = tape.tanh(pre)?;
        scores.push(tape.dot(u, attn.context)?);
    }
    let score_vec = tape.stack(&scores)?;
    let alpha = tape.softmax(score_vec, None)?;
    let live_states: Vec<ValueId> = live.iter().map(|&t| states[t]).collect();
    let s_rep = tape.weighted_sum(&live_states, alpha)?;

    let mut alpha_full = vec![0.0; states.len()];
    for (i, &t) in live.iter().enumerate() {
        alpha_full[t] = tape.value(alpha).data()[i];
    }
    Ok((s_rep, alpha_full))
}

/// Per-position embedding row for one channel, mapped through the channel's
/// slot rows. Only real-token positions are gathered.
fn channel_rows(
    tape: &mut Tape,
    params: &ModelParams,
    bound: &BoundParams,
    enc: &EncodedStatement,
    channel: Channel,
) -> Result<Vec<ValueId>, ModelError> {
    let map = params.channel_map(channel);
    let ids: Vec<usize> = enc.ids(channel)[..enc.length]
        .iter()
        .map(|&id| map.rows[id])
        .collect();
    let gathered = tape.gather(bound.emb[map.slot], &ids)?;
    let mut rows = Vec::with_capacity(enc.length);
    for t in 0..enc.length {
        rows.push(tape.row(gathered, t)?);
    }
    Ok(rows)
}

/// Concatenated per-position input vectors in fixed channel order
/// (word, then pos, then liwc), one per real-token position.
pub fn merge_channels(
    tape: &mut Tape,
    params: &ModelParams,
    bound: &BoundParams,
    enc: &EncodedStatement,
) -> Result<Vec<ValueId>, ModelError> {
    let mut per_channel = Vec::with_capacity(params.config.channels.len());
    for &ch in &params.config.channels {
        per_channel.push(channel_rows(tape, params, bound, enc, ch)?);
    }
    let mut merged = Vec::with_capacity(enc.length);
    for t in 0..enc.length {
        let mut x = per_channel[0][t];
        for rows in &per_channel[1..] {
            x = tape.concat(x, rows[t], 0)?;
        }
        merged.push(x);
    }
    Ok(merged)
}

/// Attention read-out of one forward pass. Empty collections mean the
/// architecture has no such level.
#[derive(Clone, Debug, Default)]
pub struct AttentionTrace {
    /// Global attention over the merged sequence, padded to max_len.
    pub global: Option<Vec<f64>>,
    /// Hierarchical word-level attention per channel, padded to max_len.
    pub word_level: Vec<(Channel, Vec<f64>)>,
    /// Hierarchical channel-level attention.
    pub channel_level: Vec<(Channel, f64)>,
}

pub struct ForwardPass {
    /// Scalar probability node (sigmoid output), ready for a loss op.
    pub probability: ValueId,
    pub trace: AttentionTrace,
}

/// Forward pass for whichever architecture the parameters carry.
pub fn forward(
    tape: &mut Tape,
    params: &ModelParams,
    bound: &BoundParams,
    enc: &EncodedStatement,
) -> Result<ForwardPass, ModelError> {
    if enc.length == 0 {
        return Err(ModelError::DegenerateInput {
            what: "empty statement".into(),
        });
    }
    let hidden = params.config.hidden_dim;
    let live_mask = vec![true; enc.length];

    let (pooled, trace) = match (&params.config.architecture, &bound.encoder) {
        (Architecture::Vanilla, BoundEncoder::Flat { gru, .. }) => {
            let inputs = merge_channels(tape, params, bound, enc)?;
            let states = encode_sequence(tape, &inputs, &live_mask, gru, hidden)?;
            let last = *states.last().expect("length >= 1");
            (last, AttentionTrace::default())
        }
        (Architecture::GlobalAttention, BoundEncoder::Flat { gru, attention }) => {
            let inputs = merge_channels(tape, params, bound, enc)?;
            let states = encode_sequence(tape, &inputs, &live_mask, gru, hidden)?;
            let attn = attention.as_ref().expect("global model has attention");
            let (s_rep, alpha) = global_attention(tape, &states, &live_mask, attn)?;
            let mut alpha_padded = alpha;
            alpha_padded.resize(enc.max_len(), 0.0);
            (
                s_rep,
                AttentionTrace {
                    global: Some(alpha_padded),
                    ..AttentionTrace::default()
                },
            )
        }
        (
            Architecture::HierarchicalAttention,
            BoundEncoder::Hierarchical {
                channel_grus,
                channel_attention,
                top_gru,
                top_attention,
            },
        ) => {
            let mut reps = Vec::with_capacity(params.config.channels.len());
            let mut word_level = Vec::new();
            for (i, &ch) in params.config.channels.iter().enumerate() {
                let rows = channel_rows(tape, params, bound, enc, ch)?;
                let states =
                    encode_sequence(tape, &rows, &live_mask, &channel_grus[i], hidden)?;
                let (rep, alpha) =
                    global_attention(tape, &states, &live_mask, &channel_attention[i])?;
                let mut alpha_padded = alpha;
                alpha_padded.resize(enc.max_len(), 0.0);
                word_level.push((ch, alpha_padded));
                reps.push(rep);
            }
            // The channel representations form a length-|channels| sequence
            // for the top-level encoder.
            let top_mask = vec![true; reps.len()];
            let tops = encode_sequence(tape, &reps, &top_mask, top_gru, hidden)?;
            let (joint, channel_alpha) =
                global_attention(tape, &tops, &top_mask, top_attention)?;
            let channel_level = params
                .config
                .channels
                .iter()
                .copied()
                .zip(channel_alpha)
                .collect();
            (
                joint,
                AttentionTrace {
                    global: None,
                    word_level,
                    channel_level,
                },
            )
        }
        _ => {
            return Err(ModelError::Config {
                what: "parameter inventory does not match the architecture".into(),
            })
        }
    };

    let logit = {
        let d = tape.dot(bound.out_w, pooled)?;
        tape.add(d, bound.out_b)?
    };
    let probability = tape.sigmoid(logit)?;
    Ok(ForwardPass { probability, trace })
}

#[derive(Clone, Debug)]
pub struct Prediction {
    pub probability: f64,
    pub label: Label,
    pub attention: AttentionTrace,
}

/// Inference entry point: forward on a fresh tape, no gradients.
pub fn predict(params: &ModelParams, enc: &EncodedStatement) -> Result<Prediction, ModelError> {
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape);
    let pass = forward(&mut tape, params, &bound, enc)?;
    let probability = tape.value(pass.probability).item();
    Ok(Prediction {
        probability,
        label: classify(probability, DEFAULT_THRESHOLD),
        attention: pass.trace,
    })
}
