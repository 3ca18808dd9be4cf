//! Mining statement-level edits from encyclopedia revision histories.
//!
//! The dump is streamed page by page. Within a page, every revision whose
//! comment carries a POV tag is diffed against its parent revision; a diff
//! survives only when exactly one statement was modified. Segmentation and
//! diffing of independent revision pairs run in parallel under the
//! `parallel` feature, and output is re-serialized in document order, so
//! the emitted JSONL is byte-identical in both modes.

mod diff;
mod dump;
mod wikitext;

pub use diff::{classify_edit, diff_revisions, diff_segmented, jaccard, UPDATE_THRESHOLD};
pub use dump::{parse_dump, DumpParser};
pub use wikitext::{segment_statements, segment_statements_counted, strip_markup};

use std::collections::{BTreeSet, HashMap};
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{map_ordered, ExecMode};

#[derive(Debug, Error)]
pub enum MinerError {
    #[error("xml parse error at byte {offset}: {source}")]
    Xml {
        offset: u64,
        source: Box<quick_xml::Error>,
    },
    #[error("dump truncated at byte {offset} inside <{inside}>")]
    Truncated { offset: u64, inside: String },
    #[error("invalid {field} `{value}` at byte {offset}")]
    NumericField {
        field: &'static str,
        value: String,
        offset: u64,
    },
    #[error("missing {field} at byte {offset}")]
    MissingField {
        field: &'static str,
        offset: u64,
    },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// One `<revision>` element of a pages-meta-history export.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RevisionRecord {
    pub page_id: u64,
    pub page_title: String,
    pub revision_id: u64,
    pub parent_revision_id: Option<u64>,
    pub timestamp: String,
    pub comment: String,
    pub wikitext: String,
}

/// A single segmented sentence with its section heading. The token set
/// (lowercased, split on non-alphanumeric runs) is derived from the text at
/// construction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Statement {
    pub text: String,
    pub section: String,
    token_set: BTreeSet<String>,
}

impl Statement {
    pub fn new(text: &str, section: &str) -> Self {
        let token_set = text
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(|t| t.to_lowercase())
            .collect();
        Statement {
            text: text.to_string(),
            section: section.to_string(),
            token_set,
        }
    }

    pub fn token_set(&self) -> &BTreeSet<String> {
        &self.token_set
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditType {
    Deleted,
    Moved,
    Updated,
}

/// One statement-level edit between a revision and its parent.
#[derive(Clone, Debug)]
pub struct StatementDiff {
    pub old_statement: Statement,
    /// Absent exactly when the edit is a deletion.
    pub new_statement: Option<Statement>,
    pub edit_type: EditType,
    pub revision_id: u64,
    pub comment: String,
}

/// True when the comment mentions a POV tag, matched as a case-insensitive
/// substring so "NPOV" comments count too.
pub fn is_pov_tagged(comment: &str) -> bool {
    let c = comment.as_bytes();
    c.windows(3).any(|w| w.eq_ignore_ascii_case(b"pov"))
}

/// One output line of the mining JSONL format.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiffRecord {
    pub page_id: u64,
    pub page_title: String,
    pub revision_id: u64,
    pub comment: String,
    pub edit_type: EditType,
    pub old_text: String,
    pub new_text: Option<String>,
    pub section: String,
}

/// Counts reported after a mining run, shaped like the deleted/moved/updated
/// breakdown.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MineSummary {
    pub revisions: u64,
    pub pov_tagged: u64,
    pub diffs: u64,
    pub deleted: u64,
    pub moved: u64,
    pub updated: u64,
    /// Unparseable markup regions dropped during segmentation.
    pub dropped_regions: u64,
}

/// Stream a dump and hand every mined diff to `sink` in document order.
pub fn mine<R, F, E>(input: R, mode: ExecMode, mut sink: F) -> Result<MineSummary, MineFailure<E>>
where
    R: BufRead,
    F: FnMut(&DiffRecord) -> Result<(), E>,
{
    let mut summary = MineSummary::default();
    let mut page: Vec<RevisionRecord> = Vec::new();

    let flush_page = |page: &mut Vec<RevisionRecord>,
                          summary: &mut MineSummary|
     -> Result<Vec<DiffRecord>, MineFailure<E>> {
        let records = std::mem::take(page);
        Ok(mine_page(&records, mode, summary))
    };

    for record in parse_dump(input) {
        let record = record.map_err(MineFailure::Miner)?;
        summary.revisions += 1;
        if is_pov_tagged(&record.comment) {
            summary.pov_tagged += 1;
        }
        if let Some(last) = page.last() {
            if last.page_id != record.page_id {
                for diff in flush_page(&mut page, &mut summary)? {
                    sink(&diff).map_err(MineFailure::Sink)?;
                }
            }
        }
        page.push(record);
    }
    for diff in flush_page(&mut page, &mut summary)? {
        sink(&diff).map_err(MineFailure::Sink)?;
    }
    Ok(summary)
}

/// Either a parse failure or an error from the output sink.
#[derive(Debug)]
pub enum MineFailure<E> {
    Miner(MinerError),
    Sink(E),
}

impl<E: std::fmt::Display> std::fmt::Display for MineFailure<E> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MineFailure::Miner(e) => e.fmt(f),
            MineFailure::Sink(e) => write!(f, "output error: {e}"),
        }
    }
}

impl<E: std::fmt::Display + std::fmt::Debug> std::error::Error for MineFailure<E> {}

fn mine_page(
    records: &[RevisionRecord],
    mode: ExecMode,
    summary: &mut MineSummary,
) -> Vec<DiffRecord> {
    let by_id: HashMap<u64, usize> = records
        .iter()
        .enumerate()
        .map(|(i, r)| (r.revision_id, i))
        .collect();

    // (parent index, revision index) pairs worth diffing, in document order.
    let candidates: Vec<(usize, usize)> = records
        .iter()
        .enumerate()
        .filter(|(_, r)| is_pov_tagged(&r.comment))
        .filter_map(|(i, r)| {
            let parent = r.parent_revision_id?;
            Some((*by_id.get(&parent)?, i))
        })
        .collect();
    if candidates.is_empty() {
        return Vec::new();
    }

    // Segment each involved revision once, in parallel.
    let mut involved: Vec<usize> = candidates.iter().flat_map(|&(a, b)| [a, b]).collect();
    involved.sort_unstable();
    involved.dedup();
    let segmented = map_ordered(mode, &involved, |&idx| {
        segment_statements_counted(&records[idx].wikitext)
    });
    let seg_of: HashMap<usize, &Vec<Statement>> = involved
        .iter()
        .zip(&segmented)
        .map(|(&idx, (stmts, _))| (idx, stmts))
        .collect();
    summary.dropped_regions += segmented.iter().map(|(_, d)| d).sum::<u64>();

    let diffs = map_ordered(mode, &candidates, |&(old_idx, new_idx)| {
        let new_rec = &records[new_idx];
        diff_segmented(
            seg_of[&old_idx],
            seg_of[&new_idx],
            new_rec.revision_id,
            &new_rec.comment,
        )
        .map(|d| (new_idx, d))
    });

    let mut out = Vec::new();
    for (new_idx, diff) in diffs.into_iter().flatten() {
        summary.diffs += 1;
        match diff.edit_type {
            EditType::Deleted => summary.deleted += 1,
            EditType::Moved => summary.moved += 1,
            EditType::Updated => summary.updated += 1,
        }
        let rec = &records[new_idx];
        out.push(DiffRecord {
            page_id: rec.page_id,
            page_title: rec.page_title.clone(),
            revision_id: diff.revision_id,
            comment: diff.comment,
            edit_type: diff.edit_type,
            old_text: diff.old_statement.text,
            new_text: diff.new_statement.map(|s| s.text),
            section: diff.old_statement.section,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pov_tag_matching_is_case_insensitive_substring() {
        assert!(is_pov_tagged("reverted POV pushing"));
        assert!(!is_pov_tagged("fixed typo"));
        assert!(is_pov_tagged("NPOV; the CS Monitor accusations are not relevant here"));
        assert!(is_pov_tagged("pov"));
        assert!(!is_pov_tagged(""));
        assert!(!is_pov_tagged("po v"));
    }

    #[test]
    fn statement_token_set_is_lowercased_alphanumeric_runs() {
        let s = Statement::new("The CAT, the \"cat\"! (1901)", "");
        let tokens: Vec<&str> = s.token_set().iter().map(|t| t.as_str()).collect();
        assert_eq!(tokens, vec!["1901", "cat", "the"]);
    }

    fn fixture_xml() -> String {
        std::fs::read_to_string(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/../../data/fixtures/mini_dump.xml"
        ))
        .expect("fixture dump present")
    }

    #[test]
    fn fixture_dump_has_five_revisions_two_pov_tagged() {
        let xml = fixture_xml();
        let records: Vec<_> = parse_dump(xml.as_bytes()).map(|r| r.unwrap()).collect();
        assert_eq!(records.len(), 5);
        let pov = records.iter().filter(|r| is_pov_tagged(&r.comment)).count();
        assert_eq!(pov, 2);
    }

    #[test]
    fn fixture_dump_mines_one_deleted_and_one_updated_diff() {
        let xml = fixture_xml();
        let mut diffs = Vec::new();
        let summary = mine(xml.as_bytes(), ExecMode::default(), |d| {
            diffs.push(d.clone());
            Ok::<(), std::io::Error>(())
        })
        .unwrap();
        assert_eq!(summary.revisions, 5);
        assert_eq!(summary.pov_tagged, 2);
        assert_eq!(summary.diffs, 2);
        assert_eq!(summary.deleted, 1);
        assert_eq!(summary.moved, 0);
        assert_eq!(summary.updated, 1);
        assert_eq!(diffs.len(), 2);
        assert_eq!(diffs[0].edit_type, EditType::Deleted);
        assert_eq!(diffs[0].section, "History");
        assert!(diffs[0].new_text.is_none());
        assert_eq!(diffs[1].edit_type, EditType::Updated);
        assert!(diffs[1].new_text.is_some());
    }

    #[test]
    fn mining_twice_is_byte_identical() {
        let xml = fixture_xml();
        let run = || {
            let mut out = Vec::new();
            mine(xml.as_bytes(), ExecMode::default(), |d| {
                out.extend_from_slice(serde_json::to_string(d).unwrap().as_bytes());
                out.push(b'\n');
                Ok::<(), std::io::Error>(())
            })
            .unwrap();
            out
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn sequential_and_default_modes_agree() {
        let xml = fixture_xml();
        let run = |mode: ExecMode| {
            let mut out = String::new();
            mine(xml.as_bytes(), mode, |d| {
                out.push_str(&serde_json::to_string(d).unwrap());
                out.push('\n');
                Ok::<(), std::io::Error>(())
            })
            .unwrap();
            out
        };
        assert_eq!(run(ExecMode::Sequential), run(ExecMode::default()));
    }

    #[test]
    fn at_most_one_diff_per_revision_pair() {
        // A page where one revision edits two statements and another edits one.
        let xml = r#"<mediawiki>
<page><title>T</title><ns>0</ns><id>1</id>
<revision><id>1</id><timestamp>t</timestamp>
<text>Alpha stays here. Beta is long and detailed enough. Gamma closes the text.</text></revision>
<revision><id>2</id><parentid>1</parentid><timestamp>t</timestamp><comment>pov double edit</comment>
<text>Alpha stays here.</text></revision>
<revision><id>3</id><parentid>2</parentid><timestamp>t</timestamp><comment>pov single</comment>
<text>Alpha stays here, now reworded a bit.</text></revision>
</page></mediawiki>"#;
        let mut diffs = Vec::new();
        mine(xml.as_bytes(), ExecMode::default(), |d| {
            diffs.push(d.clone());
            Ok::<(), std::io::Error>(())
        })
        .unwrap();
        // Revision 2 modified two statements: discarded. Revision 3 modified
        // exactly one.
        assert_eq!(diffs.len(), 1);
        assert_eq!(diffs[0].revision_id, 3);
    }
}
