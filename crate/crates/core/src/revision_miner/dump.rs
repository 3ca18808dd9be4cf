//! Streaming parser for MediaWiki XML exports (pages-meta-history schema).
//!
//! Yields one `RevisionRecord` per `<revision>` in document order with
//! constant memory in the number of revisions. Only the elements we need are
//! tracked; everything else is skipped by position, so `<id>` inside
//! `<contributor>` does not clobber the revision id.

use std::io::BufRead;

use quick_xml::events::Event;
use quick_xml::Reader;

use super::{MinerError, RevisionRecord};

pub fn parse_dump<R: BufRead>(input: R) -> DumpParser<R> {
    let mut reader = Reader::from_reader(input);
    reader.config_mut().trim_text(false);
    DumpParser {
        reader,
        buf: Vec::new(),
        path: Vec::new(),
        page: PageContext::default(),
        revision: RevisionContext::default(),
        text_target: None,
        finished: false,
    }
}

#[derive(Default)]
struct PageContext {
    id: Option<u64>,
    title: String,
}

#[derive(Default)]
struct RevisionContext {
    id: Option<u64>,
    parent_id: Option<u64>,
    timestamp: String,
    comment: String,
    text: String,
}

/// Which leaf element's character data we are currently collecting.
#[derive(Clone, Copy, PartialEq, Eq)]
enum TextTarget {
    PageTitle,
    PageId,
    RevisionId,
    ParentId,
    Timestamp,
    Comment,
    WikiText,
}

pub struct DumpParser<R: BufRead> {
    reader: Reader<R>,
    buf: Vec<u8>,
    /// Local element names from the root down to the current position.
    path: Vec<Vec<u8>>,
    page: PageContext,
    revision: RevisionContext,
    text_target: Option<TextTarget>,
    finished: bool,
}

impl<R: BufRead> DumpParser<R> {
    fn offset(&self) -> u64 {
        self.reader.buffer_position() as u64
    }

    fn target_for_path(&self) -> Option<TextTarget> {
        let names: Vec<&[u8]> = self.path.iter().map(|p| p.as_slice()).collect();
        match names.as_slice() {
            [_, b"page", b"title"] => Some(TextTarget::PageTitle),
            [_, b"page", b"id"] => Some(TextTarget::PageId),
            [_, b"page", b"revision", b"id"] => Some(TextTarget::RevisionId),
            [_, b"page", b"revision", b"parentid"] => Some(TextTarget::ParentId),
            [_, b"page", b"revision", b"timestamp"] => Some(TextTarget::Timestamp),
            [_, b"page", b"revision", b"comment"] => Some(TextTarget::Comment),
            [_, b"page", b"revision", b"text"] => Some(TextTarget::WikiText),
            _ => None,
        }
    }

    fn collect(&mut self, target: TextTarget, chunk: &str) -> Result<(), MinerError> {
        let numeric = |field: &'static str, chunk: &str, offset: u64| -> Result<u64, MinerError> {
            chunk
                .trim()
                .parse()
                .map_err(|_| MinerError::NumericField {
                    field,
                    value: chunk.trim().to_string(),
                    offset,
                })
        };
        match target {
            TextTarget::PageTitle => self.page.title.push_str(chunk),
            TextTarget::PageId => {
                self.page.id = Some(numeric("page id", chunk, self.offset())?);
            }
            TextTarget::RevisionId => {
                self.revision.id = Some(numeric("revision id", chunk, self.offset())?);
            }
            TextTarget::ParentId => {
                self.revision.parent_id = Some(numeric("parent id", chunk, self.offset())?);
            }
            TextTarget::Timestamp => self.revision.timestamp.push_str(chunk),
            TextTarget::Comment => self.revision.comment.push_str(chunk),
            TextTarget::WikiText => self.revision.text.push_str(chunk),
        }
        Ok(())
    }

    fn finish_revision(&mut self) -> Result<RevisionRecord, MinerError> {
        let rev = std::mem::take(&mut self.revision);
        let revision_id = rev.id.ok_or(MinerError::MissingField {
            field: "revision id",
            offset: self.offset(),
        })?;
        let page_id = self.page.id.ok_or(MinerError::MissingField {
            field: "page id",
            offset: self.offset(),
        })?;
        Ok(RevisionRecord {
            page_id,
            page_title: self.page.title.clone(),
            revision_id,
            parent_revision_id: rev.parent_id,
            timestamp: rev.timestamp,
            comment: rev.comment,
            wikitext: rev.text,
        })
    }
}

impl<R: BufRead> Iterator for DumpParser<R> {
    type Item = Result<RevisionRecord, MinerError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.finished {
            return None;
        }
        loop {
            self.buf.clear();
            let event = match self.reader.read_event_into(&mut self.buf) {
                Ok(ev) => ev,
                Err(source) => {
                    self.finished = true;
                    return Some(Err(MinerError::Xml {
                        offset: self.offset(),
                        source: Box::new(source),
                    }));
                }
            };
            match event {
                Event::Start(ref e) => {
                    let name = e.name().as_ref().to_vec();
                    self.path.push(name);
                    self.text_target = self.target_for_path();
                }
                Event::Empty(_) => {}
                Event::Text(ref e) => {
                    if let Some(target) = self.text_target {
                        let chunk = match e.unescape() {
                            Ok(c) => c.into_owned(),
                            Err(source) => {
                                self.finished = true;
                                return Some(Err(MinerError::Xml {
                                    offset: self.offset(),
                                    source: Box::new(source),
                                }));
                            }
                        };
                        if let Err(err) = self.collect(target, &chunk) {
                            self.finished = true;
                            return Some(Err(err));
                        }
                    }
                }
                Event::End(ref e) => {
                    let name = e.name().as_ref().to_vec();
                    self.path.pop();
                    self.text_target = None;
                    if name == b"revision" {
                        match self.finish_revision() {
                            Ok(record) => return Some(Ok(record)),
                            Err(err) => {
                                self.finished = true;
                                return Some(Err(err));
                            }
                        }
                    } else if name == b"page" {
                        self.page = PageContext::default();
                    }
                }
                Event::Eof => {
                    self.finished = true;
                    if !self.path.is_empty() {
                        let inside = self
                            .path
                            .iter()
                            .map(|p| String::from_utf8_lossy(p).into_owned())
                            .collect::<Vec<_>>()
                            .join("/");
                        return Some(Err(MinerError::Truncated {
                            offset: self.offset(),
                            inside,
                        }));
                    }
                    return None;
                }
                _ => {}
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dump(body: &str) -> String {
        format!("<mediawiki xmlns=\"http://www.mediawiki.org/xml/export-0.10/\">{body}</mediawiki>")
    }

    fn page(id: u64, title: &str, revisions: &str) -> String {
        format!("<page><title>{title}</title><ns>0</ns><id>{id}</id>{revisions}</page>")
    }

    fn revision(id: u64, parent: Option<u64>, comment: Option<&str>, text: &str) -> String {
        let parent = parent.map(|p| format!("<parentid>{p}</parentid>")).unwrap_or_default();
        let comment = comment.map(|c| format!("<comment>{c}</comment>")).unwrap_or_default();
        format!(
            "<revision><id>{id}</id>{parent}<timestamp>2006-01-01T00:00:00Z</timestamp>\
             <contributor><username>ed</username><id>7</id></contributor>{comment}\
             <text xml:space=\"preserve\">{text}</text></revision>"
        )
    }

    #[test]
    fn two_pages_three_revisions_each_in_document_order() {
        let xml = dump(&format!(
            "{}{}",
            page(
                1,
                "One",
                &format!(
                    "{}{}{}",
                    revision(10, None, Some("start"), "a"),
                    revision(11, Some(10), None, "b"),
                    revision(12, Some(11), Some("more"), "c"),
                )
            ),
            page(
                2,
                "Two",
                &format!(
                    "{}{}{}",
                    revision(20, None, None, "x"),
                    revision(21, Some(20), Some("NPOV; fix"), "y"),
                    revision(22, Some(21), None, "z"),
                )
            ),
        ));
        let records: Vec<_> = parse_dump(xml.as_bytes()).map(|r| r.unwrap()).collect();
        assert_eq!(records.len(), 6);
        let ids: Vec<u64> = records.iter().map(|r| r.revision_id).collect();
        assert_eq!(ids, vec![10, 11, 12, 20, 21, 22]);
        assert_eq!(records[0].page_title, "One");
        assert_eq!(records[0].parent_revision_id, None);
        assert_eq!(records[2].parent_revision_id, Some(11));
        assert_eq!(records[3].page_id, 2);
        assert_eq!(records[4].comment, "NPOV; fix");
        assert_eq!(records[5].wikitext, "z");
    }

    #[test]
    fn empty_mediawiki_element_yields_nothing() {
        let mut parser = parse_dump("<mediawiki></mediawiki>".as_bytes());
        assert!(parser.next().is_none());
    }

    #[test]
    fn missing_comment_becomes_empty_string() {
        let xml = dump(&page(1, "One", &revision(10, None, None, "body")));
        let records: Vec<_> = parse_dump(xml.as_bytes()).map(|r| r.unwrap()).collect();
        assert_eq!(records[0].comment, "");
    }

    #[test]
    fn contributor_id_does_not_clobber_revision_id() {
        let xml = dump(&page(5, "P", &revision(50, None, None, "t")));
        let records: Vec<_> = parse_dump(xml.as_bytes()).map(|r| r.unwrap()).collect();
        assert_eq!(records[0].revision_id, 50);
        assert_eq!(records[0].page_id, 5);
    }

    #[test]
    fn malformed_xml_reports_an_offset() {
        let xml = "<mediawiki><page><title>T</mediawiki>";
        let results: Vec<_> = parse_dump(xml.as_bytes()).collect();
        let err = results.into_iter().find_map(|r| r.err()).expect("an error");
        match err {
            MinerError::Xml { offset, .. } => assert!(offset > 0),
            MinerError::Truncated { .. } => {}
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn truncated_stream_errors_after_yielding_complete_records() {
        let full = dump(&page(
            1,
            "One",
            &format!(
                "{}{}",
                revision(10, None, None, "a"),
                revision(11, Some(10), None, "b"),
            ),
        ));
        // Cut inside the second revision.
        let cut = &full[..full.find("<text xml:space=\"preserve\">b").unwrap() + 5];
        let mut results = parse_dump(cut.as_bytes());
        let first = results.next().unwrap().unwrap();
        assert_eq!(first.revision_id, 10);
        let err = results
            .find_map(|r| r.err())
            .expect("truncation must surface");
        assert!(matches!(err, MinerError::Truncated { .. } | MinerError::Xml { .. }));
    }

    #[test]
    fn entities_in_comments_are_unescaped() {
        let xml = dump(&page(
            1,
            "One",
            &revision(10, None, Some("NPOV; &quot;loaded&quot; words"), "a"),
        ));
        let records: Vec<_> = parse_dump(xml.as_bytes()).map(|r| r.unwrap()).collect();
        assert_eq!(records[0].comment, "NPOV; \"loaded\" words");
    }
}
