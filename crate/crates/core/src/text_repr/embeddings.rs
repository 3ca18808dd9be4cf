use std::io::BufRead;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::vocab::{Vocabulary, PAD_ID};
use super::TextError;
use crate::numerics::Tensor;

/// Range for randomly initialized embedding rows.
pub const INIT_RANGE: f64 = 0.05;

#[derive(Clone, Debug)]
pub struct EmbeddingMatrix {
    /// Which channel(s) this matrix backs, e.g. "word" or "word+pos+liwc"
    /// under weight sharing.
    pub name: String,
    pub dim: usize,
    /// `|vocab| x dim`; row 0 (padding) is all-zero and never updated.
    pub weights: Tensor,
    pub trainable: bool,
}

impl EmbeddingMatrix {
    /// All rows drawn uniformly from `[-INIT_RANGE, INIT_RANGE]` except the
    /// zero padding row.
    pub fn random_init(
        name: &str,
        vocab_size: usize,
        dim: usize,
        rng: &mut ChaCha8Rng,
        trainable: bool,
    ) -> Self {
        let mut data = vec![0.0; vocab_size * dim];
        for v in data.iter_mut().skip(dim) {
            *v = rng.gen_range(-INIT_RANGE..=INIT_RANGE);
        }
        EmbeddingMatrix {
            name: name.to_string(),
            dim,
            weights: Tensor::new(vec![vocab_size, dim], data).expect("embedding shape"),
            trainable,
        }
    }
}

/// Load word vectors in GloVe text format (`<token> <f1> ... <fdim>`) for
/// the given vocabulary. Rows for vocabulary words found in the file are
/// copied bit-exactly; missing words are drawn uniformly from
/// `[-INIT_RANGE, INIT_RANGE]` in vocabulary order, and the padding row
/// stays zero.
pub fn load_embeddings(
    reader: impl BufRead,
    vocab: &Vocabulary,
    dim: usize,
    rng: &mut ChaCha8Rng,
    trainable: bool,
) -> Result<EmbeddingMatrix, TextError> {
    let mut data = vec![0.0; vocab.len() * dim];
    let mut found = vec![false; vocab.len()];
    found[PAD_ID] = true;

    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| TextError::EmbeddingFormat {
            line: lineno + 1,
            what: e.to_string(),
        })?;
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let token = match parts.next() {
            Some(t) => t,
            None => continue,
        };
        if !vocab.contains(token) {
            continue;
        }
        let id = vocab.lookup(token);
        if id == PAD_ID {
            continue;
        }
        let row = &mut data[id * dim..(id + 1) * dim];
        let mut count = 0;
        for (i, p) in parts.enumerate() {
            if i >= dim {
                count = i + 1;
                break;
            }
            row[i] = p.parse().map_err(|e| TextError::EmbeddingFormat {
                line: lineno + 1,
                what: format!("bad float `{p}`: {e}"),
            })?;
            count = i + 1;
        }
        if count != dim {
            return Err(TextError::EmbeddingFormat {
                line: lineno + 1,
                what: format!("expected {dim} components, found {count}"),
            });
        }
        found[id] = true;
    }

    for id in 0..vocab.len() {
        if !found[id] {
            let row = &mut data[id * dim..(id + 1) * dim];
            for v in row.iter_mut() {
                *v = rng.gen_range(-INIT_RANGE..=INIT_RANGE);
            }
        }
    }

    Ok(EmbeddingMatrix {
        name: "word".to_string(),
        dim,
        weights: Tensor::new(vec![vocab.len(), dim], data).expect("embedding shape"),
        trainable,
    })
}
