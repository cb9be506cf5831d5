//! The on-disk corpus format: one `surface<TAB>label` line per token, with a
//! blank line terminating each document.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::{Error, Result};

use super::{Document, LabeledToken, PunctClass, Source};

/// Serializes documents to the TSV corpus format.
pub fn save_tsv(docs: &[Document], path: &Path) -> Result<()> {
    let out = to_tsv_string(docs);
    let mut file = fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}

/// The TSV corpus serialization as an in-memory string.
pub fn to_tsv_string(docs: &[Document]) -> String {
    let mut out = String::new();
    write_tsv(docs, &mut out);
    out
}

pub(crate) fn write_tsv(docs: &[Document], out: &mut String) {
    for doc in docs {
        for tok in &doc.tokens {
            out.push_str(tok.surface());
            out.push('\t');
            out.push_str(tok.label().name());
            out.push('\n');
        }
        out.push('\n');
    }
}

/// Loads a TSV corpus. Documents are assigned sequential ids (`doc0`,
/// `doc1`, ...) and the `Other` source tag; the format itself carries only
/// tokens and labels.
pub fn load_tsv(path: &Path) -> Result<Vec<Document>> {
    let text = fs::read_to_string(path)?;
    parse_tsv(&text)
}

/// Parses the TSV corpus format from memory; inverse of [`to_tsv_string`].
pub fn from_tsv_string(text: &str) -> Result<Vec<Document>> {
    parse_tsv(text)
}

pub(crate) fn parse_tsv(text: &str) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    let mut tokens: Vec<LabeledToken> = Vec::new();
    let mut saw_line_in_doc = false;
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.is_empty() {
            docs.push(Document::new(
                format!("doc{}", docs.len()),
                Source::Other,
                std::mem::take(&mut tokens),
            ));
            saw_line_in_doc = false;
            continue;
        }
        saw_line_in_doc = true;
        let mut fields = line.split('\t');
        let surface = fields.next().unwrap_or("");
        let label = fields
            .next()
            .ok_or_else(|| Error::parse(lineno, "expected two tab-separated fields"))?;
        if fields.next().is_some() {
            return Err(Error::parse(lineno, "expected two tab-separated fields"));
        }
        let class = PunctClass::parse_name(label)
            .ok_or_else(|| Error::parse(lineno, format!("unknown label {label:?}")))?;
        let tok =
            LabeledToken::new(surface, class).map_err(|e| Error::parse(lineno, e.to_string()))?;
        tokens.push(tok);
    }
    if saw_line_in_doc {
        // file ended without the terminating blank line
        docs.push(Document::new(
            format!("doc{}", docs.len()),
            Source::Other,
            tokens,
        ));
    }
    Ok(docs)
}
