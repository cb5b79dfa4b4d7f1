use std::path::Path;

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use super::{tokenize, Label, LabeledDocument};
use crate::{Error, Result};

/// An annotated character span from an annotation export.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedSpan {
    pub start: usize,
    pub end: usize,
    pub label: Label,
}

/// Reads annotation spans from XML.
///
/// Two element shapes are recognized:
/// `<span start="0" end="10" label="Demographics"/>`, and MAE-style exports
/// where the element name is the label and offsets come from
/// `spans="0~10"`. Offsets are character offsets.
pub fn read_spans(xml: &str) -> Result<Vec<AnnotatedSpan>> {
    let mut reader = Reader::from_str(xml);
    let mut spans = Vec::new();
    loop {
        let event = reader
            .read_event()
            .map_err(|e| Error::Annotation(format!("at byte {}: {e}", reader.buffer_position())))?;
        match event {
            Event::Empty(ref e) | Event::Start(ref e) => {
                if let Some(span) = span_from_element(e)? {
                    spans.push(span);
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }
    Ok(spans)
}

fn span_from_element(e: &BytesStart) -> Result<Option<AnnotatedSpan>> {
    let mut start = None;
    let mut end = None;
    let mut label = None;
    let mut mae_spans = None;
    for attr in e.attributes() {
        let attr = attr.map_err(|err| Error::Annotation(err.to_string()))?;
        let value = attr
            .unescape_value()
            .map_err(|err| Error::Annotation(err.to_string()))?
            .into_owned();
        match attr.key.as_ref() {
            b"start" => start = Some(parse_offset(&value)?),
            b"end" => end = Some(parse_offset(&value)?),
            b"label" => label = Some(value),
            b"spans" => mae_spans = Some(value),
            _ => {}
        }
    }

    let name = String::from_utf8_lossy(e.name().as_ref()).into_owned();
    if name == "span" {
        let (Some(start), Some(end), Some(label)) = (start, end, label) else {
            return Err(Error::Annotation(
                "<span> needs start, end and label attributes".into(),
            ));
        };
        return Ok(Some(AnnotatedSpan {
            start,
            end,
            label: Label::parse(&label)?,
        }));
    }

    // MAE export: <Demographics id="D0" spans="0~10" text="..."/>
    if let Some(spans) = mae_spans {
        // discontinuous spans ("0~4,9~12") collapse to their hull
        let mut lo = usize::MAX;
        let mut hi = 0;
        for piece in spans.split(',') {
            let (a, b) = piece
                .split_once('~')
                .ok_or_else(|| Error::Annotation(format!("bad spans attribute {spans:?}")))?;
            lo = lo.min(parse_offset(a)?);
            hi = hi.max(parse_offset(b)?);
        }
        return Ok(Some(AnnotatedSpan {
            start: lo,
            end: hi,
            label: Label::parse(label.as_deref().unwrap_or(&name))?,
        }));
    }
    Ok(None)
}

fn parse_offset(s: &str) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| Error::Annotation(format!("offset {s:?} is not a non-negative integer")))
}

/// Tokenizes `text` and labels each token from the annotation spans.
///
/// A token takes the label of a span containing its midpoint. When several
/// spans contain it the one starting last wins, and among equal starts the
/// one appearing last in the file. Uncovered tokens are [`Label::Other`].
pub fn parse_annotations(doc_id: &str, xml: &str, text: &str) -> Result<LabeledDocument> {
    let spans = read_spans(xml)?;
    label_tokens(doc_id, &spans, text)
}

pub fn label_tokens(doc_id: &str, spans: &[AnnotatedSpan], text: &str) -> Result<LabeledDocument> {
    let len = text.chars().count();
    for s in spans {
        if s.start > s.end || s.end > len {
            return Err(Error::SpanOutOfBounds {
                start: s.start,
                end: s.end,
                len,
            });
        }
    }

    let tokens = tokenize(text);
    let labels = tokens
        .iter()
        .map(|tok| {
            // midpoint test in doubled coordinates: 2s <= start+end < 2e
            let mid2 = tok.start + tok.end;
            spans
                .iter()
                .enumerate()
                .filter(|(_, s)| 2 * s.start <= mid2 && mid2 < 2 * s.end)
                .max_by_key(|(i, s)| (s.start, *i))
                .map_or(Label::Other, |(_, s)| s.label)
        })
        .collect();
    LabeledDocument::new(doc_id, tokens, labels)
}

/// Loads `<stem>.xml` with its sibling `<stem>.txt`.
pub fn load_annotated(xml_path: &Path) -> Result<LabeledDocument> {
    let text_path = xml_path.with_extension("txt");
    let xml = std::fs::read_to_string(xml_path).map_err(|e| Error::io(xml_path, e))?;
    let text = std::fs::read_to_string(&text_path).map_err(|e| Error::io(&text_path, e))?;
    let doc_id = xml_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_annotations(&doc_id, &xml, &text)
}

/// Loads every `*.xml` annotation in a directory, sorted by file name.
pub fn load_annotated_dir(dir: &Path) -> Result<Vec<LabeledDocument>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "xml"))
        .collect();
    paths.sort();
    paths.iter().map(|p| load_annotated(p)).collect()
}

/// Serializes labeled spans back into the `<span .../>` XML shape, merging
/// runs of equal labels into one span per run.
pub fn write_spans(doc: &LabeledDocument) -> String {
    let mut out = String::from("<annotations>\n");
    let mut i = 0;
    while i < doc.tokens.len() {
        let label = doc.labels[i];
        let mut j = i;
        while j + 1 < doc.tokens.len() && doc.labels[j + 1] == label {
            j += 1;
        }
        if label != Label::Other {
            out.push_str(&format!(
                "  <span start=\"{}\" end=\"{}\" label=\"{}\"/>\n",
                doc.tokens[i].start,
                doc.tokens[j].end,
                label.name()
            ));
        }
        i = j + 1;
    }
    out.push_str("</annotations>\n");
    out
}
