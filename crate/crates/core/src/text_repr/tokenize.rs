/// Characters split off as their own tokens when they lead or trail a
/// whitespace-separated chunk. Interior punctuation (hyphens, apostrophes,
/// abbreviation dots) stays attached.
const DETACH: &[char] = &[
    '.', ',', ';', ':', '!', '?', '"', '\'', '(', ')', '[', ']', '{', '}', '\u{201c}', '\u{201d}',
    '\u{2018}', '\u{2019}',
];

/// Whitespace tokenization with leading/trailing punctuation detached.
/// Case is preserved; vocabulary lookups lowercase on their side.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for chunk in text.split_whitespace() {
        let chars: Vec<char> = chunk.chars().collect();
        let mut start = 0;
        let mut end = chars.len();
        let mut leading = Vec::new();
        while start < end && DETACH.contains(&chars[start]) {
            leading.push(chars[start].to_string());
            start += 1;
        }
        let mut trailing = Vec::new();
        while end > start && DETACH.contains(&chars[end - 1]) {
            trailing.push(chars[end - 1].to_string());
            end -= 1;
        }
        tokens.extend(leading);
        if start < end {
            tokens.push(chars[start..end].iter().collect());
        }
        tokens.extend(trailing.into_iter().rev());
    }
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn final_punctuation_is_detached() {
        assert_eq!(
            tokenize("He was convicted of murder."),
            vec!["He", "was", "convicted", "of", "murder", "."]
        );
    }

    #[test]
    fn empty_text_yields_no_tokens() {
        assert_eq!(tokenize(""), Vec::<String>::new());
        assert_eq!(tokenize("   \t\n"), Vec::<String>::new());
    }

    #[test]
    fn quotes_are_separate_tokens() {
        assert_eq!(
            tokenize("the \"death tax\" lie"),
            vec!["the", "\"", "death", "tax", "\"", "lie"]
        );
    }

    #[test]
    fn interior_punctuation_is_kept() {
        assert_eq!(tokenize("don't stop"), vec!["don't", "stop"]);
        assert_eq!(tokenize("state-of-the-art"), vec!["state-of-the-art"]);
    }

    #[test]
    fn tokenization_is_deterministic() {
        let text = "A (quoted) phrase, twice!";
        assert_eq!(tokenize(text), tokenize(text));
    }
}
