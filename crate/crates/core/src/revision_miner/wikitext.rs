//! Wikitext stripping and sentence segmentation.
//!
//! Stripping keeps the surface sentence text an annotator would read:
//! templates and refs disappear, links reduce to their display text, bold
//! and italic quoting is dropped. Regions that cannot be parsed (an
//! unclosed template or ref) are dropped to the end of the text and counted
//! in the diagnostics counter instead of failing the whole revision.

use super::Statement;

/// Sentence-final period abbreviations that must not end a sentence.
/// Compared case-insensitively; single letters ("F.") are always treated
/// as abbreviations.
const ABBREVIATIONS: &[&str] = &[
    "mr.", "mrs.", "ms.", "dr.", "prof.", "st.", "sr.", "jr.", "vs.", "etc.", "e.g.", "i.e.",
    "cf.", "u.s.", "u.k.", "u.n.", "no.", "mt.", "ft.", "co.", "inc.", "ltd.", "gen.", "col.",
    "capt.", "lt.", "sgt.", "rev.", "hon.", "jan.", "feb.", "mar.", "apr.", "jun.", "jul.",
    "aug.", "sep.", "sept.", "oct.", "nov.", "dec.", "ca.", "approx.",
];

/// Remove markup, returning the surface text and the number of dropped
/// unparseable regions.
pub fn strip_markup(wikitext: &str) -> (String, u64) {
    let mut dropped = 0;
    let text = strip_comments(wikitext, &mut dropped);
    let text = strip_refs(&text, &mut dropped);
    let text = strip_templates(&text, &mut dropped);
    let text = strip_links(&text);
    let text = strip_quotes(&text);
    let text = strip_tags(&text);
    (decode_entities(&text), dropped)
}

fn strip_comments(text: &str, dropped: &mut u64) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(start) = rest.find("<!--") {
        out.push_str(&rest[..start]);
        match rest[start..].find("-->") {
            Some(end) => rest = &rest[start + end + 3..],
            None => {
                *dropped += 1;
                return out;
            }
        }
    }
    out.push_str(rest);
    out
}

fn strip_refs(text: &str, dropped: &mut u64) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(start) = find_ci(rest, "<ref") {
        out.push_str(&rest[..start]);
        let tail = &rest[start..];
        // Self-closing <ref ... /> or a full <ref>...</ref> pair.
        let open_end = match tail.find('>') {
            Some(i) => i,
            None => {
                *dropped += 1;
                return out;
            }
        };
        if tail[..open_end].ends_with('/') {
            rest = &tail[open_end + 1..];
            continue;
        }
        match find_ci(tail, "</ref>") {
            Some(close) => rest = &tail[close + 6..],
            None => {
                *dropped += 1;
                return out;
            }
        }
    }
    out.push_str(rest);
    out
}

/// Case-insensitive find for an ASCII needle; the offset is a char boundary
/// because the match starts on an ASCII byte.
fn find_ci(haystack: &str, needle: &str) -> Option<usize> {
    let nb = needle.as_bytes();
    if haystack.len() < nb.len() {
        return None;
    }
    haystack
        .as_bytes()
        .windows(nb.len())
        .position(|w| w.eq_ignore_ascii_case(nb))
}

fn strip_templates(text: &str, dropped: &mut u64) -> String {
    let mut out = String::with_capacity(text.len());
    let bytes = text.as_bytes();
    let mut depth = 0usize;
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i..].starts_with(b"{{") {
            depth += 1;
            i += 2;
        } else if bytes[i..].starts_with(b"}}") && depth > 0 {
            depth -= 1;
            i += 2;
        } else if depth == 0 {
            let ch = text[i..].chars().next().expect("in bounds");
            out.push(ch);
            i += ch.len_utf8();
        } else {
            let ch = text[i..].chars().next().expect("in bounds");
            i += ch.len_utf8();
        }
    }
    if depth > 0 {
        *dropped += 1;
    }
    out
}

fn strip_links(text: &str) -> String {
    // Innermost-first so nested links ([[File:...|[[a|b]]]]) resolve.
    let mut current = text.to_string();
    loop {
        let mut replaced = false;
        let mut out = String::with_capacity(current.len());
        let mut rest = current.as_str();
        while let Some(start) = rest.find("[[") {
            // Innermost: no further "[[" before the closing "]]".
            let after = &rest[start + 2..];
            let close = match after.find("]]") {
                Some(c) => c,
                None => break,
            };
            if let Some(inner) = after[..close].find("[[") {
                // Descend into the nested link first.
                out.push_str(&rest[..start + 2 + inner]);
                rest = &rest[start + 2 + inner..];
                continue;
            }
            let body = &after[..close];
            out.push_str(&rest[..start]);
            let lower = body.to_lowercase();
            let is_media = lower.starts_with("file:")
                || lower.starts_with("image:")
                || lower.starts_with("category:");
            if !is_media {
                let display = body.rsplit('|').next().unwrap_or(body);
                out.push_str(display);
            }
            rest = &after[close + 2..];
            replaced = true;
        }
        out.push_str(rest);
        if !replaced {
            return out;
        }
        current = out;
    }
}

fn strip_quotes(text: &str) -> String {
    // Runs of two or more apostrophes are bold/italic markers.
    let mut out = String::with_capacity(text.len());
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        if chars[i] == '\'' {
            let mut j = i;
            while j < chars.len() && chars[j] == '\'' {
                j += 1;
            }
            if j - i >= 2 {
                i = j;
                continue;
            }
        }
        out.push(chars[i]);
        i += 1;
    }
    out
}

fn strip_tags(text: &str) -> String {
    // Remaining html-ish tags: drop the tag markers, keep inner text.
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(start) = rest.find('<') {
        let tail = &rest[start..];
        match tail.find('>') {
            Some(end) if end <= 120 => {
                out.push_str(&rest[..start]);
                rest = &tail[end + 1..];
            }
            _ => {
                // A bare '<' in prose; keep it.
                out.push_str(&rest[..start + 1]);
                rest = &tail[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

fn decode_entities(text: &str) -> String {
    text.replace("&nbsp;", " ")
        .replace("&amp;", "&")
        .replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&quot;", "\"")
        .replace("&#39;", "'")
}

fn heading_of(line: &str) -> Option<String> {
    let trimmed = line.trim();
    if trimmed.len() >= 4 && trimmed.starts_with("==") && trimmed.ends_with("==") {
        let inner = trimmed.trim_matches('=').trim();
        if !inner.is_empty() {
            return Some(inner.to_string());
        }
    }
    None
}

/// Markup-stripped statements with their section headings plus the count of
/// dropped unparseable regions.
pub fn segment_statements_counted(wikitext: &str) -> (Vec<Statement>, u64) {
    let (stripped, dropped) = strip_markup(wikitext);
    let mut statements = Vec::new();
    let mut section = String::new();
    let mut block = String::new();
    let mut in_table = false;

    let flush = |block: &mut String, section: &str, out: &mut Vec<Statement>| {
        if block.trim().is_empty() {
            block.clear();
            return;
        }
        for sentence in split_sentences(block) {
            let trimmed = sentence.trim();
            if !trimmed.is_empty() {
                out.push(Statement::new(trimmed, section));
            }
        }
        block.clear();
    };

    for line in stripped.lines() {
        let trimmed = line.trim();
        if let Some(heading) = heading_of(trimmed) {
            flush(&mut block, &section, &mut statements);
            section = heading;
            continue;
        }
        if trimmed.starts_with("{|") {
            flush(&mut block, &section, &mut statements);
            in_table = true;
            continue;
        }
        if in_table {
            if trimmed.starts_with("|}") {
                in_table = false;
            }
            continue;
        }
        if trimmed.is_empty() {
            flush(&mut block, &section, &mut statements);
            continue;
        }
        // List items are their own blocks.
        let content = trimmed.trim_start_matches(['*', '#', ':', ';']).trim();
        let is_list_item = content.len() != trimmed.len();
        if is_list_item {
            flush(&mut block, &section, &mut statements);
            let mut item = content.to_string();
            flush(&mut item, &section, &mut statements);
            continue;
        }
        if !block.is_empty() {
            block.push(' ');
        }
        block.push_str(trimmed);
    }
    flush(&mut block, &section, &mut statements);
    (statements, dropped)
}

pub fn segment_statements(wikitext: &str) -> Vec<Statement> {
    segment_statements_counted(wikitext).0
}

/// Split on `.`, `!`, `?` followed by whitespace and an uppercase letter or
/// end of text. An abbreviation list (plus single capital letters) keeps
/// periods like "St." from splitting.
fn split_sentences(block: &str) -> Vec<String> {
    let chars: Vec<char> = block.chars().collect();
    let mut sentences = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '.' || c == '!' || c == '?' {
            // Include closing quotes/brackets right after the terminal.
            let mut end = i + 1;
            while end < chars.len() && matches!(chars[end], '"' | '\'' | ')' | ']' | '\u{201d}') {
                end += 1;
            }
            let at_eot = end >= chars.len();
            let splits_here = if at_eot {
                true
            } else {
                let mut k = end;
                let mut saw_ws = false;
                while k < chars.len() && chars[k].is_whitespace() {
                    saw_ws = true;
                    k += 1;
                }
                saw_ws && k < chars.len() && chars[k].is_uppercase()
            };
            let abbreviation = c == '.' && is_abbreviation(&chars[..=i]);
            if splits_here && !abbreviation {
                let sentence: String = chars[start..end].iter().collect();
                sentences.push(sentence);
                i = end;
                while i < chars.len() && chars[i].is_whitespace() {
                    i += 1;
                }
                start = i;
                continue;
            }
        }
        i += 1;
    }
    if start < chars.len() {
        let tail: String = chars[start..].iter().collect();
        if !tail.trim().is_empty() {
            sentences.push(tail);
        }
    }
    sentences
}

/// The token ending at the final `.` of `prefix`, checked against the
/// abbreviation list.
fn is_abbreviation(prefix: &[char]) -> bool {
    debug_assert_eq!(*prefix.last().expect("non-empty"), '.');
    let mut word_start = prefix.len() - 1;
    while word_start > 0 {
        let c = prefix[word_start - 1];
        if c.is_alphanumeric() || c == '.' {
            word_start -= 1;
        } else {
            break;
        }
    }
    let token: String = prefix[word_start..].iter().collect();
    let lower = token.to_lowercase();
    if ABBREVIATIONS.contains(&lower.as_str()) {
        return true;
    }
    // Single-letter initials: "John F. Kennedy".
    let letters: Vec<char> = token.chars().filter(|c| c.is_alphabetic()).collect();
    letters.len() == 1 && token.len() == 2
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heading_lines_set_the_section() {
        let (stmts, _) =
            segment_statements_counted("== History ==\nIt was built in 1901. It burned down.");
        assert_eq!(stmts.len(), 2);
        assert_eq!(stmts[0].text, "It was built in 1901.");
        assert_eq!(stmts[0].section, "History");
        assert_eq!(stmts[1].text, "It burned down.");
        assert_eq!(stmts[1].section, "History");
    }

    #[test]
    fn empty_text_has_no_statements() {
        assert!(segment_statements("").is_empty());
        assert!(segment_statements("   \n\n").is_empty());
    }

    #[test]
    fn abbreviations_do_not_split() {
        let stmts = segment_statements("He lived in St. Petersburg until 1917.");
        assert_eq!(stmts.len(), 1);
        assert_eq!(stmts[0].text, "He lived in St. Petersburg until 1917.");
        assert_eq!(stmts[0].section, "");
    }

    #[test]
    fn initials_do_not_split() {
        let stmts = segment_statements("John F. Kennedy spoke. The crowd listened.");
        assert_eq!(stmts.len(), 2);
        assert_eq!(stmts[0].text, "John F. Kennedy spoke.");
    }

    #[test]
    fn lead_text_has_empty_section() {
        let stmts = segment_statements("Lead sentence here.\n\n== Later ==\nSection sentence.");
        assert_eq!(stmts[0].section, "");
        assert_eq!(stmts[1].section, "Later");
    }

    #[test]
    fn templates_and_refs_are_removed() {
        let text = "{{Infobox town|name=X}}\nThe town is old.<ref>Cite {{sfn|A}} here</ref> It is small.";
        let stmts = segment_statements(text);
        assert_eq!(stmts.len(), 2);
        assert_eq!(stmts[0].text, "The town is old.");
        assert_eq!(stmts[1].text, "It is small.");
    }

    #[test]
    fn links_reduce_to_display_text() {
        let stmts = segment_statements("The [[Rhine|river]] flows through [[Bonn]].");
        assert_eq!(stmts[0].text, "The river flows through Bonn.");
    }

    #[test]
    fn bold_and_italics_are_dropped() {
        let stmts = segment_statements("He was '''very''' ''important'' indeed.");
        assert_eq!(stmts[0].text, "He was very important indeed.");
    }

    #[test]
    fn unclosed_template_is_dropped_and_counted() {
        let (stmts, dropped) = segment_statements_counted("Good sentence first. {{broken forever");
        assert_eq!(dropped, 1);
        assert_eq!(stmts.len(), 1);
        assert_eq!(stmts[0].text, "Good sentence first.");
    }

    #[test]
    fn unclosed_ref_is_dropped_and_counted() {
        let (stmts, dropped) = segment_statements_counted("Keep this. <ref>dangling");
        assert_eq!(dropped, 1);
        assert_eq!(stmts.len(), 1);
    }

    #[test]
    fn tables_are_skipped() {
        let text = "Before the table.\n{|\n|-\n| cell || cell\n|}\nAfter the table.";
        let stmts = segment_statements(text);
        assert_eq!(stmts.len(), 2);
        assert_eq!(stmts[0].text, "Before the table.");
        assert_eq!(stmts[1].text, "After the table.");
    }

    #[test]
    fn list_items_are_separate_statements() {
        let text = "* First item has words.\n* Second item too.";
        let stmts = segment_statements(text);
        assert_eq!(stmts.len(), 2);
        assert_eq!(stmts[0].text, "First item has words.");
    }

    #[test]
    fn media_links_are_dropped_entirely() {
        let stmts = segment_statements("[[File:X.jpg|thumb|A caption]]\nThe text remains.");
        assert_eq!(stmts.len(), 1);
        assert_eq!(stmts[0].text, "The text remains.");
    }

    #[test]
    fn segmentation_is_deterministic() {
        let text = "== A ==\nOne sentence. Two sentence. e.g. not a split.";
        assert_eq!(segment_statements(text), segment_statements(text));
    }

    #[test]
    fn question_and_exclamation_terminate() {
        let stmts = segment_statements("Is it biased? It is! Really.");
        assert_eq!(stmts.len(), 3);
    }
}
