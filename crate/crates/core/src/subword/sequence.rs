//! Fixed-length model inputs: word pieces with labels aligned to final
//! pieces, framed by BOS/EOS and padded.

use crate::corpus::{Document, LabeledToken, PunctClass, SeqLabel, Source};
use crate::{Error, Result};

use super::{strip_marker, BpeModel, BOS_ID, EOS_ID, PAD_ID};

/// One model input window of fixed length: piece ids, per-position labels
/// (`None` = excluded from loss and metrics), and an attention mask that is
/// false exactly at padding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubwordSequence {
    pub ids: Vec<u32>,
    pub labels: Vec<SeqLabel>,
    pub mask: Vec<bool>,
}

impl SubwordSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Positions carrying a real label (final pieces of words).
    pub fn label_slots(&self) -> impl Iterator<Item = (usize, PunctClass)> + '_ {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, l)| l.map(|c| (i, c)))
    }
}

/// Encodes a document into its unframed piece stream: each word's label sits
/// on its final piece, earlier pieces are `None`.
pub fn piece_stream(bpe: &BpeModel, doc: &Document) -> Vec<(u32, SeqLabel)> {
    let mut stream = Vec::new();
    for tok in &doc.tokens {
        let pieces = bpe.encode_word(tok.surface());
        let last = pieces.len() - 1;
        for (i, piece) in pieces.iter().enumerate() {
            let label = if i == last { Some(tok.label()) } else { None };
            stream.push((bpe.piece_id(piece), label));
        }
    }
    stream
}

/// Encodes a document into framed windows of length `seq_len`, never
/// splitting a word across windows.
pub fn encode_document(
    bpe: &BpeModel,
    doc: &Document,
    seq_len: usize,
) -> Result<Vec<SubwordSequence>> {
    check_seq_len(seq_len)?;
    let budget = seq_len - 2;
    for tok in &doc.tokens {
        let n = bpe.encode_word(tok.surface()).len();
        if n > budget {
            return Err(Error::Data(format!(
                "word {:?} encodes to {n} pieces, exceeding the window budget of {budget}",
                tok.surface()
            )));
        }
    }
    frame_stream(&piece_stream(bpe, doc), seq_len)
}

fn check_seq_len(seq_len: usize) -> Result<()> {
    if seq_len < 3 {
        return Err(Error::Config(format!(
            "sequence length must be at least 3, got {seq_len}"
        )));
    }
    Ok(())
}

/// Chunks an unframed piece stream into framed windows of length `seq_len`.
///
/// Chunk boundaries fall between label units (a run of unlabeled pieces plus
/// the labeled piece that closes it), so intact words are never split. A
/// unit longer than the window budget — possible only in augmented streams
/// where deletions removed label slots — is split hard.
pub fn frame_stream(stream: &[(u32, SeqLabel)], seq_len: usize) -> Result<Vec<SubwordSequence>> {
    check_seq_len(seq_len)?;
    let budget = seq_len - 2;

    let mut units: Vec<&[(u32, SeqLabel)]> = Vec::new();
    let mut start = 0;
    for (i, (_, label)) in stream.iter().enumerate() {
        if label.is_some() {
            units.push(&stream[start..=i]);
            start = i + 1;
        }
    }
    if start < stream.len() {
        units.push(&stream[start..]);
    }

    let mut windows = Vec::new();
    let mut cur: Vec<(u32, SeqLabel)> = Vec::new();
    for unit in units {
        if unit.len() > budget {
            // oversized unit: flush and split hard
            if !cur.is_empty() {
                windows.push(frame(&cur, seq_len));
                cur.clear();
            }
            for chunk in unit.chunks(budget) {
                if chunk.len() == budget {
                    windows.push(frame(chunk, seq_len));
                } else {
                    cur.extend_from_slice(chunk);
                }
            }
            continue;
        }
        if cur.len() + unit.len() > budget {
            windows.push(frame(&cur, seq_len));
            cur.clear();
        }
        cur.extend_from_slice(unit);
    }
    if !cur.is_empty() {
        windows.push(frame(&cur, seq_len));
    }
    Ok(windows)
}

fn frame(payload: &[(u32, SeqLabel)], seq_len: usize) -> SubwordSequence {
    let mut ids = Vec::with_capacity(seq_len);
    let mut labels = Vec::with_capacity(seq_len);
    let mut mask = Vec::with_capacity(seq_len);
    ids.push(BOS_ID);
    labels.push(None);
    mask.push(true);
    for &(id, label) in payload {
        ids.push(id);
        labels.push(label);
        mask.push(true);
    }
    ids.push(EOS_ID);
    labels.push(None);
    mask.push(true);
    while ids.len() < seq_len {
        ids.push(PAD_ID);
        labels.push(None);
        mask.push(false);
    }
    SubwordSequence { ids, labels, mask }
}

/// Rebuilds a document from encoded windows and one predicted class per
/// label slot, in stream order.
pub fn decode_predictions(
    bpe: &BpeModel,
    windows: &[SubwordSequence],
    predicted: &[PunctClass],
) -> Result<Document> {
    let slots: usize = windows.iter().map(|w| w.label_slots().count()).sum();
    if slots != predicted.len() {
        return Err(Error::Data(format!(
            "{} predictions supplied for {slots} label slots",
            predicted.len()
        )));
    }
    let mut tokens: Vec<LabeledToken> = Vec::new();
    let mut next = 0;
    for window in windows {
        let mut word_pieces: Vec<u32> = Vec::new();
        for (pos, &id) in window.ids.iter().enumerate() {
            if id == BOS_ID || id == EOS_ID || id == PAD_ID {
                continue;
            }
            word_pieces.push(id);
            if window.labels[pos].is_some() {
                let surface = join_pieces(bpe, &word_pieces)?;
                tokens.push(
                    LabeledToken::new(surface, predicted[next])
                        .map_err(|e| Error::Data(format!("decoded surface invalid: {e}")))?,
                );
                next += 1;
                word_pieces.clear();
            }
        }
        // pieces after the window's last label slot belong to no word;
        // encode_document never produces them, augmented streams may
        word_pieces.clear();
    }
    Ok(Document::new("", Source::Other, tokens))
}

fn join_pieces(bpe: &BpeModel, ids: &[u32]) -> Result<String> {
    let last = ids.len() - 1;
    let mut surface = String::new();
    for (i, &id) in ids.iter().enumerate() {
        let piece = bpe
            .id_piece(id)
            .ok_or_else(|| Error::Data(format!("piece id {id} out of range")))?;
        if i < last {
            surface.push_str(strip_marker(piece));
        } else {
            surface.push_str(piece);
        }
    }
    Ok(surface)
}
