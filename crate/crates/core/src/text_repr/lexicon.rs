//! Pluggable word-function category lexicon (LIWC-compatible format).
//!
//! The lexicon file is TSV: `pattern<TAB>cat1,cat2,...`. A trailing `*` on a
//! pattern makes it a prefix wildcard. A token can match several categories;
//! the encoder picks the most descriptive one, where descriptiveness of a
//! category is `ln(P / n_c)` for P total patterns and n_c patterns carrying
//! that category — rarer categories are preferred.

use std::io::BufRead;

use super::TextError;

#[derive(Clone, Debug)]
pub struct LexiconPattern {
    pub pattern: String,
    pub wildcard: bool,
    /// Indices into `category_list`.
    pub categories: Vec<usize>,
}

#[derive(Clone, Debug, Default)]
pub struct CategoryLexicon {
    pub patterns: Vec<LexiconPattern>,
    /// Category names in first-appearance order; downstream tie-breaks use
    /// this order.
    pub category_list: Vec<String>,
}

impl CategoryLexicon {
    pub fn from_tsv(reader: impl BufRead) -> Result<Self, TextError> {
        let mut lexicon = CategoryLexicon::default();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| TextError::LexiconFormat {
                line: lineno + 1,
                what: e.to_string(),
            })?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (pattern_raw, cats_raw) =
                trimmed
                    .split_once('\t')
                    .ok_or_else(|| TextError::LexiconFormat {
                        line: lineno + 1,
                        what: "expected `pattern<TAB>categories`".into(),
                    })?;
            let pattern_raw = pattern_raw.trim();
            if pattern_raw.is_empty() {
                return Err(TextError::LexiconFormat {
                    line: lineno + 1,
                    what: "empty pattern".into(),
                });
            }
            let (pattern, wildcard) = match pattern_raw.strip_suffix('*') {
                Some(prefix) => (prefix.to_lowercase(), true),
                None => (pattern_raw.to_lowercase(), false),
            };
            let mut categories = Vec::new();
            for name in cats_raw.split(',') {
                let name = name.trim();
                if name.is_empty() {
                    continue;
                }
                let idx = lexicon.intern_category(name);
                if !categories.contains(&idx) {
                    categories.push(idx);
                }
            }
            if categories.is_empty() {
                return Err(TextError::LexiconFormat {
                    line: lineno + 1,
                    what: "no categories".into(),
                });
            }
            lexicon.patterns.push(LexiconPattern {
                pattern,
                wildcard,
                categories,
            });
        }
        Ok(lexicon)
    }

    pub fn from_entries(entries: &[(&str, &[&str])]) -> Self {
        let mut lexicon = CategoryLexicon::default();
        for (pattern_raw, cats) in entries {
            let (pattern, wildcard) = match pattern_raw.strip_suffix('*') {
                Some(prefix) => (prefix.to_lowercase(), true),
                None => (pattern_raw.to_lowercase(), false),
            };
            let categories = cats.iter().map(|c| lexicon.intern_category(c)).collect();
            lexicon.patterns.push(LexiconPattern {
                pattern,
                wildcard,
                categories,
            });
        }
        lexicon
    }

    fn intern_category(&mut self, name: &str) -> usize {
        match self.category_list.iter().position(|c| c == name) {
            Some(idx) => idx,
            None => {
                self.category_list.push(name.to_string());
                self.category_list.len() - 1
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    /// Category indices matched by a (lowercased) token, ascending.
    pub fn matching_categories(&self, token_lower: &str) -> Vec<usize> {
        let mut matched = Vec::new();
        for p in &self.patterns {
            let hit = if p.wildcard {
                token_lower.starts_with(&p.pattern)
            } else {
                token_lower == p.pattern
            };
            if hit {
                for &c in &p.categories {
                    if !matched.contains(&c) {
                        matched.push(c);
                    }
                }
            }
        }
        matched.sort_unstable();
        matched
    }
}

/// `ln(P / n_c)` per category index; categories carried by no pattern are
/// excluded (NaN-free by construction).
pub fn compute_descriptiveness(lexicon: &CategoryLexicon) -> Vec<f64> {
    let total = lexicon.patterns.len() as f64;
    let mut counts = vec![0usize; lexicon.category_list.len()];
    for p in &lexicon.patterns {
        for &c in &p.categories {
            counts[c] += 1;
        }
    }
    counts
        .iter()
        .map(|&n| if n == 0 { f64::NEG_INFINITY } else { (total / n as f64).ln() })
        .collect()
}

/// Most descriptive category for a token, or `None` when nothing matches.
/// Ties break toward the earlier entry in `category_list`.
pub fn assign_category(
    token_lower: &str,
    lexicon: &CategoryLexicon,
    descriptiveness: &[f64],
) -> Option<usize> {
    let matched = lexicon.matching_categories(token_lower);
    let mut best: Option<usize> = None;
    for c in matched {
        match best {
            None => best = Some(c),
            Some(b) if descriptiveness[c] > descriptiveness[b] => best = Some(c),
            _ => {}
        }
    }
    best
}
