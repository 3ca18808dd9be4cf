use std::collections::HashMap;

use serde::{Deserialize, Serialize};

/// Index 0 is the padding entry in every vocabulary.
pub const PAD_ID: usize = 0;
/// Index 1 is the unknown-form entry (word and POS vocabularies) or the
/// no-category entry (category vocabulary).
pub const UNK_ID: usize = 1;

pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";
pub const NO_CATEGORY_TOKEN: &str = "<none>";

/// How forms unseen in the embedding file are initialized.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum UnkPolicy {
    #[default]
    RandomInit,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Vocabulary {
    entries: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
    pub unk_policy: UnkPolicy,
}

impl Vocabulary {
    /// Vocabulary over `forms` in first-seen order, after the reserved
    /// padding and unknown entries.
    pub fn build<I, S>(forms: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut vocab = Vocabulary::with_reserved(&[PAD_TOKEN, UNK_TOKEN]);
        for form in forms {
            vocab.intern(form.as_ref());
        }
        vocab
    }

    /// Category vocabulary: padding, the no-category entry, then the given
    /// category names in order.
    pub fn for_categories(categories: &[String]) -> Self {
        let mut vocab = Vocabulary::with_reserved(&[PAD_TOKEN, NO_CATEGORY_TOKEN]);
        for c in categories {
            vocab.intern(c);
        }
        vocab
    }

    fn with_reserved(reserved: &[&str]) -> Self {
        let mut vocab = Vocabulary {
            entries: Vec::new(),
            index: HashMap::new(),
            unk_policy: UnkPolicy::RandomInit,
        };
        for r in reserved {
            vocab.intern(r);
        }
        vocab
    }

    fn intern(&mut self, form: &str) -> usize {
        match self.index.get(form) {
            Some(&i) => i,
            None => {
                let i = self.entries.len();
                self.entries.push(form.to_string());
                self.index.insert(form.to_string(), i);
                i
            }
        }
    }

    /// Rebuild the lookup index after deserialization.
    pub fn reindex(&mut self) {
        self.index = self
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.clone(), i))
            .collect();
    }

    pub fn from_entries(entries: Vec<String>) -> Self {
        let mut v = Vocabulary {
            entries,
            index: HashMap::new(),
            unk_policy: UnkPolicy::RandomInit,
        };
        v.reindex();
        v
    }

    pub fn lookup(&self, form: &str) -> usize {
        self.index.get(form).copied().unwrap_or(UNK_ID)
    }

    pub fn contains(&self, form: &str) -> bool {
        self.index.contains_key(form)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    pub fn entry(&self, id: usize) -> &str {
        &self.entries[id]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reserved_entries_come_first() {
        let v = Vocabulary::build(["cat", "sat", "cat"]);
        assert_eq!(v.entries(), &["<pad>", "<unk>", "cat", "sat"]);
        assert_eq!(v.lookup("cat"), 2);
        assert_eq!(v.lookup("dog"), UNK_ID);
        assert_eq!(v.lookup(PAD_TOKEN), PAD_ID);
    }

    #[test]
    fn index_is_inverse_of_entries() {
        let v = Vocabulary::build(["a", "b", "c"]);
        for (i, e) in v.entries().iter().enumerate() {
            assert_eq!(v.lookup(e), i);
        }
    }

    #[test]
    fn reindex_restores_lookup_after_roundtrip() {
        let v = Vocabulary::build(["x", "y"]);
        let json = serde_json::to_string(&v).unwrap();
        let mut back: Vocabulary = serde_json::from_str(&json).unwrap();
        back.reindex();
        assert_eq!(back.lookup("y"), v.lookup("y"));
        assert_eq!(back.entries(), v.entries());
    }
}
