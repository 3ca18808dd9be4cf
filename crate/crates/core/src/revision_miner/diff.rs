//! Statement-level diffing between a revision and its parent.
//!
//! A revision is kept only when exactly one old statement was modified; a
//! tag in the revision comment cannot be attributed when several statements
//! changed at once. The modified statement is then classified as moved
//! (identical text under a different section), updated (an added statement
//! with Jaccard similarity at or above the threshold), or deleted.

use std::collections::BTreeSet;

use super::{EditType, RevisionRecord, Statement, StatementDiff};
use crate::revision_miner::wikitext::segment_statements;

/// Jaccard similarity at or above this value makes an edit an update.
pub const UPDATE_THRESHOLD: f64 = 0.7;

/// Set-overlap ratio of the two statements' token sets; 1.0 when both are
/// empty.
pub fn jaccard(a: &Statement, b: &Statement) -> f64 {
    let sa = a.token_set();
    let sb = b.token_set();
    if sa.is_empty() && sb.is_empty() {
        return 1.0;
    }
    let intersection = sa.intersection(sb).count();
    let union = sa.len() + sb.len() - intersection;
    intersection as f64 / union as f64
}

/// Classify a statement that is gone from its original section. Moved wins
/// over Updated: identical text elsewhere would trivially clear the Jaccard
/// threshold, so it is checked first against every statement of the new
/// revision (added or retained). Updated considers added statements only.
pub fn classify_edit<'a>(
    old_stmt: &Statement,
    added: &'a [Statement],
    all_new: &'a [Statement],
) -> (EditType, Option<&'a Statement>) {
    if let Some(moved) = all_new
        .iter()
        .find(|s| s.text == old_stmt.text && s.section != old_stmt.section)
    {
        return (EditType::Moved, Some(moved));
    }
    let mut best: Option<(&Statement, f64)> = None;
    for candidate in added {
        let sim = jaccard(old_stmt, candidate);
        if best.map_or(true, |(_, b)| sim > b) {
            best = Some((candidate, sim));
        }
    }
    match best {
        Some((stmt, sim)) if sim >= UPDATE_THRESHOLD => (EditType::Updated, Some(stmt)),
        _ => (EditType::Deleted, None),
    }
}

/// Diff two already segmented revisions. Returns the single-statement edit,
/// or `None` when zero or several old statements were modified.
pub fn diff_segmented(
    old_stmts: &[Statement],
    new_stmts: &[Statement],
    revision_id: u64,
    comment: &str,
) -> Option<StatementDiff> {
    let key = |s: &Statement| (s.text.clone(), s.section.clone());
    let old_keys: BTreeSet<_> = old_stmts.iter().map(key).collect();
    let new_keys: BTreeSet<_> = new_stmts.iter().map(key).collect();

    let mut removed = old_stmts
        .iter()
        .filter(|s| !new_keys.contains(&key(s)))
        .map(key)
        .collect::<BTreeSet<_>>()
        .into_iter();
    let removed_key = removed.next()?;
    if removed.next().is_some() {
        return None;
    }
    let old_stmt = old_stmts
        .iter()
        .find(|s| key(s) == removed_key)
        .expect("key came from old_stmts");

    let added: Vec<Statement> = new_stmts
        .iter()
        .filter(|s| !old_keys.contains(&key(s)))
        .cloned()
        .collect();

    let (edit_type, matched) = classify_edit(old_stmt, &added, new_stmts);
    Some(StatementDiff {
        old_statement: old_stmt.clone(),
        new_statement: matched.cloned(),
        edit_type,
        revision_id,
        comment: comment.to_string(),
    })
}

/// Segment both revisions and diff them. The caller must pass a revision
/// and its parent.
pub fn diff_revisions(old: &RevisionRecord, new: &RevisionRecord) -> Option<StatementDiff> {
    debug_assert_eq!(new.parent_revision_id, Some(old.revision_id));
    let old_stmts = segment_statements(&old.wikitext);
    let new_stmts = segment_statements(&new.wikitext);
    diff_segmented(&old_stmts, &new_stmts, new.revision_id, &new.comment)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(text: &str, section: &str) -> Statement {
        Statement::new(text, section)
    }

    fn record(id: u64, parent: Option<u64>, comment: &str, wikitext: &str) -> RevisionRecord {
        RevisionRecord {
            page_id: 1,
            page_title: "T".into(),
            revision_id: id,
            parent_revision_id: parent,
            timestamp: String::new(),
            comment: comment.into(),
            wikitext: wikitext.into(),
        }
    }

    #[test]
    fn jaccard_identity_and_disjoint() {
        let a = st("the cat sat", "");
        assert_eq!(jaccard(&a, &a), 1.0);
        let b = st("dogs run fast", "");
        assert_eq!(jaccard(&a, &b), 0.0);
    }

    #[test]
    fn jaccard_half_overlap() {
        // {the, cat, sat} vs {the, cat, ran}: |I|=2, |U|=4.
        let a = st("the cat sat", "");
        let b = st("the cat ran", "");
        assert_eq!(jaccard(&a, &b), 0.5);
    }

    #[test]
    fn jaccard_of_two_empty_token_sets_is_one() {
        let a = st("???", "");
        let b = st("!!!", "");
        assert!(a.token_set().is_empty());
        assert_eq!(jaccard(&a, &b), 1.0);
    }

    #[test]
    fn jaccard_is_symmetric_and_bounded() {
        let pairs = [
            ("one two three", "two three four"),
            ("a b", "c d e"),
            ("same same", "same"),
        ];
        for (x, y) in pairs {
            let a = st(x, "");
            let b = st(y, "");
            let ab = jaccard(&a, &b);
            let ba = jaccard(&b, &a);
            assert_eq!(ab, ba);
            assert!((0.0..=1.0).contains(&ab));
        }
        // 1.0 iff equal token sets.
        let a = st("The CAT sat!", "");
        let b = st("the cat sat", "");
        assert_eq!(jaccard(&a, &b), 1.0);
    }

    #[test]
    fn identical_text_different_section_is_moved() {
        let old = st("The claim was disputed.", "Lead");
        let new = [st("The claim was disputed.", "Controversy")];
        let (et, matched) = classify_edit(&old, &new, &new);
        assert_eq!(et, EditType::Moved);
        assert_eq!(matched.unwrap().section, "Controversy");
    }

    #[test]
    fn moved_wins_over_a_perfect_jaccard_update() {
        let old = st("The claim was disputed.", "Lead");
        let added = [st("The claim was disputed by many.", "Lead")];
        let all_new = [
            added[0].clone(),
            st("The claim was disputed.", "Controversy"),
        ];
        let (et, _) = classify_edit(&old, &added, &all_new);
        assert_eq!(et, EditType::Moved);
    }

    #[test]
    fn threshold_rule_updated_at_075() {
        // 3 shared of 4 union = 0.75.
        let old = st("alpha beta gamma", "");
        let added = [st("alpha beta gamma delta", "")];
        let (et, m) = classify_edit(&old, &added, &added);
        assert_eq!(et, EditType::Updated);
        assert!(m.is_some());
    }

    #[test]
    fn threshold_rule_deleted_at_05() {
        let old = st("alpha beta", "");
        let added = [st("alpha delta", "")];
        let (et, m) = classify_edit(&old, &added, &added);
        assert_eq!(et, EditType::Deleted);
        assert!(m.is_none());
    }

    #[test]
    fn no_candidates_is_deleted() {
        let old = st("gone forever", "");
        let (et, m) = classify_edit(&old, &[], &[]);
        assert_eq!(et, EditType::Deleted);
        assert!(m.is_none());
    }

    #[test]
    fn identical_revisions_diff_to_nothing() {
        let text = "One sentence here. Another sentence there.";
        let old = record(1, None, "", text);
        let new = record(2, Some(1), "NPOV; noop", text);
        assert!(diff_revisions(&old, &new).is_none());
    }

    #[test]
    fn single_deletion_yields_a_deleted_diff() {
        let old = record(1, None, "", "Keep me alpha. Drop the partisan slur. Keep me beta.");
        let new = record(2, Some(1), "NPOV; cut", "Keep me alpha. Keep me beta.");
        let diff = diff_revisions(&old, &new).unwrap();
        assert_eq!(diff.edit_type, EditType::Deleted);
        assert_eq!(diff.old_statement.text, "Drop the partisan slur.");
        assert!(diff.new_statement.is_none());
        assert_eq!(diff.revision_id, 2);
    }

    #[test]
    fn two_deletions_yield_nothing() {
        let old = record(1, None, "", "First stays. Second goes away. Third goes too.");
        let new = record(2, Some(1), "pov", "First stays.");
        assert!(diff_revisions(&old, &new).is_none());
    }

    #[test]
    fn single_update_yields_an_updated_diff() {
        let old = record(
            1,
            None,
            "",
            "The bridge uses a remarkably bold cantilever design from 1910. Engineers praised it.",
        );
        let new = record(
            2,
            Some(1),
            "pov: softened",
            "The bridge uses a cantilever design from 1910. Engineers praised it.",
        );
        let diff = diff_revisions(&old, &new).unwrap();
        assert_eq!(diff.edit_type, EditType::Updated);
        assert_eq!(
            diff.new_statement.unwrap().text,
            "The bridge uses a cantilever design from 1910."
        );
    }

    #[test]
    fn pure_insertion_yields_nothing() {
        let old = record(1, None, "", "Only sentence.");
        let new = record(2, Some(1), "pov", "Only sentence. Brand new claim appears.");
        assert!(diff_revisions(&old, &new).is_none());
    }
}
