//! Corpus handling: normalization, punctuation-to-label conversion, the TSV
//! on-disk format, dataset statistics, and synthetic corpus generation.

mod synth;
mod tsv;

pub use synth::generate_synthetic;
pub use tsv::{from_tsv_string, load_tsv, save_tsv, to_tsv_string};

use std::fmt;

use unicode_normalization::UnicodeNormalization;

use crate::{Error, Result};

/// Number of corpus-level label classes.
pub const NUM_CLASSES: usize = 5;

/// The label alphabet: which punctuation mark (if any) follows a token.
///
/// Non-final subword pieces and special/pad positions use `Option<PunctClass>`
/// with `None` standing for the ignore sentinel; `None` never appears in
/// corpus files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PunctClass {
    Period,
    Comma,
    Question,
    Exclamation,
    O,
}

/// Label carried by one subword position: `None` marks positions excluded
/// from loss and metrics (non-final pieces, BOS/EOS, padding).
pub type SeqLabel = Option<PunctClass>;

impl PunctClass {
    pub const ALL: [PunctClass; NUM_CLASSES] = [
        PunctClass::Period,
        PunctClass::Comma,
        PunctClass::Question,
        PunctClass::Exclamation,
        PunctClass::O,
    ];

    /// Dense class index, also the output-neuron index of the tagger.
    pub fn index(self) -> usize {
        match self {
            PunctClass::Period => 0,
            PunctClass::Comma => 1,
            PunctClass::Question => 2,
            PunctClass::Exclamation => 3,
            PunctClass::O => 4,
        }
    }

    pub fn from_index(idx: usize) -> Option<PunctClass> {
        PunctClass::ALL.get(idx).copied()
    }

    /// The surface character rendered after a token, empty for `O`.
    pub fn surface(self) -> &'static str {
        match self {
            PunctClass::Period => "\u{964}", // danda
            PunctClass::Comma => ",",
            PunctClass::Question => "?",
            PunctClass::Exclamation => "!",
            PunctClass::O => "",
        }
    }

    /// Label name used in TSV corpora and reports.
    pub fn name(self) -> &'static str {
        match self {
            PunctClass::Period => "PERIOD",
            PunctClass::Comma => "COMMA",
            PunctClass::Question => "QUESTION",
            PunctClass::Exclamation => "EXCLAMATION",
            PunctClass::O => "O",
        }
    }

    pub fn parse_name(s: &str) -> Option<PunctClass> {
        match s {
            "PERIOD" => Some(PunctClass::Period),
            "COMMA" => Some(PunctClass::Comma),
            "QUESTION" => Some(PunctClass::Question),
            "EXCLAMATION" => Some(PunctClass::Exclamation),
            "O" => Some(PunctClass::O),
            _ => None,
        }
    }

    fn from_mark(c: char) -> Option<PunctClass> {
        match c {
            '\u{964}' => Some(PunctClass::Period),
            ',' => Some(PunctClass::Comma),
            '?' => Some(PunctClass::Question),
            '!' => Some(PunctClass::Exclamation),
            _ => None,
        }
    }
}

impl fmt::Display for PunctClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// True for the four characters that carry a label.
pub fn is_target_mark(c: char) -> bool {
    PunctClass::from_mark(c).is_some()
}

/// One surface token plus the punctuation that follows it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledToken {
    surface: String,
    label: PunctClass,
}

impl LabeledToken {
    /// Builds a token, rejecting surfaces with whitespace or target marks.
    pub fn new(surface: impl Into<String>, label: PunctClass) -> Result<LabeledToken> {
        let surface = surface.into();
        if surface.is_empty() {
            return Err(Error::Data("empty token surface".into()));
        }
        if let Some(c) = surface
            .chars()
            .find(|&c| c.is_whitespace() || is_target_mark(c))
        {
            return Err(Error::Data(format!(
                "token surface {surface:?} contains forbidden character {c:?}"
            )));
        }
        Ok(LabeledToken { surface, label })
    }

    pub fn surface(&self) -> &str {
        &self.surface
    }

    pub fn label(&self) -> PunctClass {
        self.label
    }
}

/// Origin tag for a document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Source {
    News,
    Ref,
    Asr,
    Synthetic,
    #[default]
    Other,
}

/// A sequence of labeled tokens from one source text.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Document {
    pub id: String,
    pub source: Source,
    pub tokens: Vec<LabeledToken>,
}

impl Document {
    pub fn new(id: impl Into<String>, source: Source, tokens: Vec<LabeledToken>) -> Document {
        Document {
            id: id.into(),
            source,
            tokens,
        }
    }
}

/// Per-class token counts for a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DatasetStats {
    pub total: u64,
    pub per_class: [u64; NUM_CLASSES],
}

impl DatasetStats {
    pub fn count(&self, class: PunctClass) -> u64 {
        self.per_class[class.index()]
    }
}

impl fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "total {}", self.total)?;
        for class in PunctClass::ALL {
            write!(f, "  {} {}", class.name(), self.count(class))?;
        }
        Ok(())
    }
}

// Punctuation that is neither a target mark nor wanted in surfaces. ASCII
// punctuation is stripped wholesale (target marks are checked first); the
// rest is a fixed list of common typographic marks seen in web corpora.
fn is_strippable(c: char) -> bool {
    if is_target_mark(c) {
        return false;
    }
    c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{965}'            // double danda
            | '\u{2010}'..='\u{2015}' // hyphens and dashes
            | '\u{2018}'..='\u{201F}' // curly quotes
            | '\u{2026}'         // ellipsis
            | '\u{2032}' | '\u{2033}' // primes
            | '\u{00AB}' | '\u{00BB}' // guillemets
            | '\u{2039}' | '\u{203A}'
            | '\u{00B7}' | '\u{2022}' // middle dot, bullet
            | '\u{060C}' | '\u{061B}' | '\u{061F}' // Arabic comma/semicolon/question
            | '\u{3001}' | '\u{3002}' // CJK comma, full stop
            | '\u{FF0C}' | '\u{FF0E}' // fullwidth comma, full stop
        )
}

/// Cleans raw text ahead of label conversion.
///
/// NFC-normalizes so lookalike codepoints resolve to their canonical forms,
/// maps the ASCII full stop to the danda so both sentence terminators land
/// in the single period class, strips non-target punctuation, and collapses
/// whitespace runs to single spaces.
///
/// A second NFC pass runs at the end: stripping can make combining marks
/// adjacent, and renormalizing keeps the function idempotent.
pub fn normalize_text(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut pending_space = false;
    let mut started = false;
    for c in raw.nfc() {
        let c = if c == '.' { '\u{964}' } else { c };
        if c.is_whitespace() {
            pending_space = started;
            continue;
        }
        if is_strippable(c) {
            continue;
        }
        if pending_space {
            out.push(' ');
            pending_space = false;
        }
        out.push(c);
        started = true;
    }
    out.nfc().collect()
}

/// Converts normalized text into a document of labeled tokens.
///
/// Target marks attach to the immediately preceding token; a token already
/// carrying a mark keeps its first one, and marks with no preceding token
/// are dropped.
pub fn parse_labeled(normalized: &str) -> Document {
    let mut tokens: Vec<LabeledToken> = Vec::new();
    let mut cur = String::new();
    for c in normalized.chars() {
        if let Some(class) = PunctClass::from_mark(c) {
            if !cur.is_empty() {
                tokens.push(LabeledToken {
                    surface: std::mem::take(&mut cur),
                    label: class,
                });
            } else if let Some(last) = tokens.last_mut() {
                if last.label == PunctClass::O {
                    last.label = class;
                }
                // already punctuated: later marks in the run are dropped
            }
            // no preceding token: dropped
        } else if c.is_whitespace() {
            if !cur.is_empty() {
                tokens.push(LabeledToken {
                    surface: std::mem::take(&mut cur),
                    label: PunctClass::O,
                });
            }
        } else {
            cur.push(c);
        }
    }
    if !cur.is_empty() {
        tokens.push(LabeledToken {
            surface: cur,
            label: PunctClass::O,
        });
    }
    Document::new("", Source::Other, tokens)
}

/// Inverse of [`parse_labeled`]: tokens joined by spaces, each immediately
/// followed by its label's surface character.
pub fn render(doc: &Document) -> String {
    let mut out = String::new();
    for (i, tok) in doc.tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&tok.surface);
        out.push_str(tok.label.surface());
    }
    out
}

/// Counts tokens by label across a corpus.
pub fn stats(docs: &[Document]) -> DatasetStats {
    let mut s = DatasetStats::default();
    for doc in docs {
        for tok in &doc.tokens {
            s.per_class[tok.label.index()] += 1;
            s.total += 1;
        }
    }
    s
}
