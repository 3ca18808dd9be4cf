//! Statement representations: every statement becomes three aligned index
//! sequences (words, POS tags, word-function categories) plus a padding
//! mask, backed by one embedding matrix per channel.

mod embeddings;
mod lexicon;
mod pos;
mod tokenize;
mod vocab;

pub use embeddings::{load_embeddings, EmbeddingMatrix, INIT_RANGE};
pub use lexicon::{assign_category, compute_descriptiveness, CategoryLexicon, LexiconPattern};
pub use pos::{PosTagger, RuleTagger};
pub use tokenize::tokenize;
pub use vocab::{UnkPolicy, Vocabulary, NO_CATEGORY_TOKEN, PAD_ID, PAD_TOKEN, UNK_ID, UNK_TOKEN};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TextError {
    #[error("embedding file line {line}: {what}")]
    EmbeddingFormat { line: usize, what: String },
    #[error("lexicon file line {line}: {what}")]
    LexiconFormat { line: usize, what: String },
    #[error("pos tags do not align with tokens: {tokens} tokens, {tags} tags")]
    TagAlignment { tokens: usize, tags: usize },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Representation channels in their fixed merge order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Word,
    Pos,
    Liwc,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::Word, Channel::Pos, Channel::Liwc];

    pub fn name(self) -> &'static str {
        match self {
            Channel::Word => "word",
            Channel::Pos => "pos",
            Channel::Liwc => "liwc",
        }
    }
}

/// Aligned index sequences for one statement, padded or truncated to a
/// fixed length. `mask[t]` is true exactly at real-token positions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedStatement {
    pub word_ids: Vec<usize>,
    pub pos_ids: Vec<usize>,
    pub liwc_ids: Vec<usize>,
    pub mask: Vec<bool>,
    /// Number of real tokens kept (<= max_len).
    pub length: usize,
}

impl EncodedStatement {
    pub fn max_len(&self) -> usize {
        self.mask.len()
    }

    pub fn ids(&self, channel: Channel) -> &[usize] {
        match channel {
            Channel::Word => &self.word_ids,
            Channel::Pos => &self.pos_ids,
            Channel::Liwc => &self.liwc_ids,
        }
    }
}

pub const DEFAULT_MAX_LEN: usize = 64;

/// Everything needed to turn raw text into an `EncodedStatement`:
/// vocabularies for the three channels, the category lexicon with its
/// precomputed descriptiveness, and the padding length.
#[derive(Clone, Debug)]
pub struct TextPipeline {
    pub word_vocab: Vocabulary,
    pub pos_vocab: Vocabulary,
    pub liwc_vocab: Vocabulary,
    pub lexicon: CategoryLexicon,
    pub descriptiveness: Vec<f64>,
    pub max_len: usize,
}

impl TextPipeline {
    /// Build vocabularies from training statements only. `texts` yields the
    /// statement text and, when the corpus is pre-tagged, its POS tags.
    pub fn build<'a, I>(texts: I, lexicon: CategoryLexicon, max_len: usize) -> Self
    where
        I: IntoIterator<Item = (&'a str, Option<&'a [String]>)>,
    {
        let tagger = RuleTagger;
        let mut word_forms = Vec::new();
        let mut tag_forms = Vec::new();
        for (text, pretagged) in texts {
            let tokens = tokenize(text);
            let tags = match pretagged {
                Some(tags) if tags.len() == tokens.len() => tags.to_vec(),
                _ => tagger.tag(&tokens),
            };
            word_forms.extend(tokens.iter().map(|t| t.to_lowercase()));
            tag_forms.extend(tags);
        }
        let descriptiveness = compute_descriptiveness(&lexicon);
        TextPipeline {
            word_vocab: Vocabulary::build(word_forms),
            pos_vocab: Vocabulary::build(tag_forms),
            liwc_vocab: Vocabulary::for_categories(&lexicon.category_list),
            lexicon,
            descriptiveness,
            max_len,
        }
    }

    /// Encode one statement. Pre-supplied POS tags bypass the built-in
    /// tagger and must align one-to-one with the tokens.
    pub fn encode(
        &self,
        text: &str,
        pretagged: Option<&[String]>,
    ) -> Result<EncodedStatement, TextError> {
        let tokens = tokenize(text);
        let tags: Vec<String> = match pretagged {
            Some(tags) => {
                if tags.len() != tokens.len() {
                    return Err(TextError::TagAlignment {
                        tokens: tokens.len(),
                        tags: tags.len(),
                    });
                }
                tags.to_vec()
            }
            None => RuleTagger.tag(&tokens),
        };

        let length = tokens.len().min(self.max_len);
        let mut enc = EncodedStatement {
            word_ids: vec![PAD_ID; self.max_len],
            pos_ids: vec![PAD_ID; self.max_len],
            liwc_ids: vec![PAD_ID; self.max_len],
            mask: vec![false; self.max_len],
            length,
        };
        for t in 0..length {
            let lower = tokens[t].to_lowercase();
            enc.word_ids[t] = self.word_vocab.lookup(&lower);
            enc.pos_ids[t] = self.pos_vocab.lookup(&tags[t]);
            enc.liwc_ids[t] = match assign_category(&lower, &self.lexicon, &self.descriptiveness) {
                // Vocabulary layout: 0 = padding, 1 = no-category, then the
                // lexicon categories in order.
                Some(cat) => cat + 2,
                None => UNK_ID,
            };
            enc.mask[t] = true;
        }
        Ok(enc)
    }

    pub fn vocab_size(&self, channel: Channel) -> usize {
        match channel {
            Channel::Word => self.word_vocab.len(),
            Channel::Pos => self.pos_vocab.len(),
            Channel::Liwc => self.liwc_vocab.len(),
        }
    }

    pub fn vocab(&self, channel: Channel) -> &Vocabulary {
        match channel {
            Channel::Word => &self.word_vocab,
            Channel::Pos => &self.pos_vocab,
            Channel::Liwc => &self.liwc_vocab,
        }
    }
}
