//! Part-of-speech tagging for the POS representation channel.
//!
//! The built-in tagger is a closed-class lexicon plus suffix rules with an
//! NN default. It exists to feed the POS channel, not to compete with real
//! taggers; corpora that care about tag quality supply a `pos` array per
//! statement and bypass it entirely.

/// One Penn-Treebank-style tag per token.
pub trait PosTagger {
    fn tag(&self, tokens: &[String]) -> Vec<String>;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RuleTagger;

const CLOSED_CLASS: &[(&str, &str)] = &[
    // determiners
    ("the", "DT"),
    ("a", "DT"),
    ("an", "DT"),
    ("this", "DT"),
    ("that", "DT"),
    ("these", "DT"),
    ("those", "DT"),
    ("each", "DT"),
    ("every", "DT"),
    ("some", "DT"),
    ("any", "DT"),
    ("no", "DT"),
    ("all", "DT"),
    ("both", "DT"),
    // pronouns
    ("i", "PRP"),
    ("you", "PRP"),
    ("he", "PRP"),
    ("she", "PRP"),
    ("it", "PRP"),
    ("we", "PRP"),
    ("they", "PRP"),
    ("me", "PRP"),
    ("him", "PRP"),
    ("her", "PRP"),
    ("us", "PRP"),
    ("them", "PRP"),
    ("himself", "PRP"),
    ("herself", "PRP"),
    ("itself", "PRP"),
    ("themselves", "PRP"),
    ("my", "PRP$"),
    ("your", "PRP$"),
    ("his", "PRP$"),
    ("its", "PRP$"),
    ("our", "PRP$"),
    ("their", "PRP$"),
    // prepositions / subordinating conjunctions
    ("of", "IN"),
    ("in", "IN"),
    ("on", "IN"),
    ("at", "IN"),
    ("by", "IN"),
    ("for", "IN"),
    ("with", "IN"),
    ("from", "IN"),
    ("into", "IN"),
    ("about", "IN"),
    ("against", "IN"),
    ("between", "IN"),
    ("through", "IN"),
    ("during", "IN"),
    ("under", "IN"),
    ("over", "IN"),
    ("after", "IN"),
    ("before", "IN"),
    ("until", "IN"),
    ("since", "IN"),
    ("because", "IN"),
    ("while", "IN"),
    ("although", "IN"),
    ("though", "IN"),
    ("if", "IN"),
    ("as", "IN"),
    ("than", "IN"),
    // coordinating conjunctions
    ("and", "CC"),
    ("or", "CC"),
    ("but", "CC"),
    ("nor", "CC"),
    ("yet", "CC"),
    ("so", "CC"),
    // modals
    ("can", "MD"),
    ("could", "MD"),
    ("may", "MD"),
    ("might", "MD"),
    ("must", "MD"),
    ("shall", "MD"),
    ("should", "MD"),
    ("will", "MD"),
    ("would", "MD"),
    // be / have / do
    ("be", "VB"),
    ("am", "VBP"),
    ("is", "VBZ"),
    ("are", "VBP"),
    ("was", "VBD"),
    ("were", "VBD"),
    ("been", "VBN"),
    ("being", "VBG"),
    ("have", "VBP"),
    ("has", "VBZ"),
    ("had", "VBD"),
    ("having", "VBG"),
    ("do", "VBP"),
    ("does", "VBZ"),
    ("did", "VBD"),
    ("done", "VBN"),
    // wh-words
    ("who", "WP"),
    ("whom", "WP"),
    ("whose", "WP$"),
    ("which", "WDT"),
    ("what", "WP"),
    ("when", "WRB"),
    ("where", "WRB"),
    ("why", "WRB"),
    ("how", "WRB"),
    // particles and misc function words
    ("to", "TO"),
    ("not", "RB"),
    ("n't", "RB"),
    ("there", "EX"),
    ("very", "RB"),
    ("too", "RB"),
    ("also", "RB"),
    ("only", "RB"),
    ("just", "RB"),
    ("never", "RB"),
    ("always", "RB"),
    ("often", "RB"),
    ("still", "RB"),
    ("then", "RB"),
    ("now", "RB"),
    ("here", "RB"),
    ("more", "JJR"),
    ("most", "JJS"),
    ("less", "JJR"),
    ("least", "JJS"),
    ("one", "CD"),
    ("two", "CD"),
    ("three", "CD"),
];

fn punct_tag(token: &str) -> Option<&'static str> {
    match token {
        "." | "!" | "?" => Some("."),
        "," => Some(","),
        ":" | ";" => Some(":"),
        "(" | "[" | "{" => Some("-LRB-"),
        ")" | "]" | "}" => Some("-RRB-"),
        "\"" | "'" | "\u{201c}" | "\u{201d}" | "\u{2018}" | "\u{2019}" => Some("''"),
        "$" => Some("$"),
        _ => None,
    }
}

fn is_number(token: &str) -> bool {
    !token.is_empty()
        && token
            .chars()
            .all(|c| c.is_ascii_digit() || c == '.' || c == ',' || c == '-')
        && token.chars().any(|c| c.is_ascii_digit())
}

fn suffix_tag(lower: &str) -> Option<&'static str> {
    // Ordered: earlier rules win.
    const RULES: &[(&str, &str)] = &[
        ("ing", "VBG"),
        ("ed", "VBD"),
        ("ly", "RB"),
        ("tion", "NN"),
        ("sion", "NN"),
        ("ment", "NN"),
        ("ness", "NN"),
        ("ity", "NN"),
        ("ous", "JJ"),
        ("ful", "JJ"),
        ("ive", "JJ"),
        ("able", "JJ"),
        ("ible", "JJ"),
        ("ical", "JJ"),
        ("est", "JJS"),
        ("s", "NNS"),
    ];
    for (suffix, tag) in RULES {
        if lower.len() > suffix.len() + 1 && lower.ends_with(suffix) {
            if *suffix == "s" && lower.ends_with("ss") {
                continue;
            }
            return Some(tag);
        }
    }
    None
}

impl PosTagger for RuleTagger {
    fn tag(&self, tokens: &[String]) -> Vec<String> {
        tokens
            .iter()
            .map(|token| {
                if let Some(tag) = punct_tag(token) {
                    return tag.to_string();
                }
                let lower = token.to_lowercase();
                if let Some(&(_, tag)) = CLOSED_CLASS.iter().find(|(w, _)| *w == lower) {
                    return tag.to_string();
                }
                if is_number(token) {
                    return "CD".to_string();
                }
                if token.chars().next().is_some_and(|c| c.is_uppercase()) {
                    return "NNP".to_string();
                }
                suffix_tag(&lower).unwrap_or("NN").to_string()
            })
            .collect()
    }
}
