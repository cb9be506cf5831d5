//! Sliding-window punctuation restoration for texts of any length.
//!
//! Words are encoded once; overlapping windows of `seq_len` pieces with
//! stride `seq_len / 2` cover the stream, and each word takes its prediction
//! from the window where its final piece sits most centrally.

use dari_core::corpus::{PunctClass, SeqLabel, NUM_CLASSES};
use dari_core::net::{forward, ModelParams};
use dari_core::subword::{BpeModel, SubwordSequence, BOS_ID, EOS_ID, PAD_ID};
use dari_core::{Error, Result};

/// Window geometry for restoration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RestoreRequest {
    pub seq_len: usize,
    pub stride: usize,
}

impl RestoreRequest {
    /// Stride defaults to half the window, clamped into `1..=seq_len - 2`.
    pub fn new(seq_len: usize) -> Result<RestoreRequest> {
        if seq_len < 3 {
            return Err(Error::Config(format!(
                "window length must be at least 3, got {seq_len}"
            )));
        }
        let stride = (seq_len / 2).clamp(1, seq_len - 2);
        Ok(RestoreRequest { seq_len, stride })
    }
}

/// One encoded word awaiting a label.
struct EncodedWord {
    /// Index of the word's final piece in the flat stream.
    final_piece: usize,
}

/// Restores one label per word using `score` to produce per-position logits
/// for each window. `score` receives the absolute stream offset of the
/// window's first payload piece.
pub fn restore_labels<F>(
    words: &[String],
    bpe: &BpeModel,
    req: &RestoreRequest,
    mut score: F,
) -> Result<Vec<PunctClass>>
where
    F: FnMut(usize, &SubwordSequence) -> Result<Vec<[f64; NUM_CLASSES]>>,
{
    if words.is_empty() {
        return Ok(Vec::new());
    }
    let mut stream: Vec<u32> = Vec::new();
    let mut slots: Vec<bool> = Vec::new();
    let mut encoded: Vec<EncodedWord> = Vec::with_capacity(words.len());
    for word in words {
        let pieces = bpe.encode_word(word);
        if pieces.is_empty() {
            return Err(Error::Data(format!("word {word:?} encodes to no pieces")));
        }
        for (i, piece) in pieces.iter().enumerate() {
            stream.push(bpe.piece_id(piece));
            slots.push(i + 1 == pieces.len());
        }
        encoded.push(EncodedWord {
            final_piece: stream.len() - 1,
        });
    }

    let cap = req.seq_len - 2;
    let mut best: Vec<Option<(f64, PunctClass)>> = vec![None; words.len()];
    let mut start = 0;
    loop {
        let end = (start + cap).min(stream.len());
        let window = frame_restore_window(&stream[start..end], &slots[start..end], req.seq_len);
        let logits = score(start, &window)?;
        if logits.len() != window.ids.len() {
            return Err(Error::Data(format!(
                "scorer returned {} positions for a window of {}",
                logits.len(),
                window.ids.len()
            )));
        }
        let center = start as f64 + (end - start) as f64 / 2.0;
        for (word_idx, word) in encoded.iter().enumerate() {
            let p = word.final_piece;
            if p < start || p >= end {
                continue;
            }
            let window_pos = p - start + 1; // skip BOS
            let class = argmax(&logits[window_pos]);
            let distance = (p as f64 + 0.5 - center).abs();
            // strictly closer wins; ties keep the earlier window
            if best[word_idx].as_ref().is_none_or(|(d, _)| distance < *d) {
                best[word_idx] = Some((distance, class));
            }
        }
        if end == stream.len() {
            break;
        }
        start += req.stride;
    }

    best.into_iter()
        .enumerate()
        .map(|(i, slot)| {
            slot.map(|(_, class)| class)
                .ok_or_else(|| Error::Data(format!("word {i} was not covered by any window")))
        })
        .collect()
}

fn frame_restore_window(ids: &[u32], slots: &[bool], seq_len: usize) -> SubwordSequence {
    let mut out_ids = Vec::with_capacity(seq_len);
    let mut labels: Vec<SeqLabel> = Vec::with_capacity(seq_len);
    let mut mask = Vec::with_capacity(seq_len);
    out_ids.push(BOS_ID);
    labels.push(None);
    mask.push(true);
    for (&id, &is_final) in ids.iter().zip(slots) {
        out_ids.push(id);
        // mark word-final pieces so downstream consumers can find slots
        labels.push(if is_final { Some(PunctClass::O) } else { None });
        mask.push(true);
    }
    out_ids.push(EOS_ID);
    labels.push(None);
    mask.push(true);
    while out_ids.len() < seq_len {
        out_ids.push(PAD_ID);
        labels.push(None);
        mask.push(false);
    }
    SubwordSequence {
        ids: out_ids,
        labels,
        mask,
    }
}

fn argmax(logits: &[f64; NUM_CLASSES]) -> PunctClass {
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate().skip(1) {
        if v > logits[best] {
            best = i;
        }
    }
    PunctClass::from_index(best).expect("class index in range")
}

/// Model-backed scorer for [`restore_labels`].
pub fn model_scorer(
    params: &ModelParams,
) -> impl FnMut(usize, &SubwordSequence) -> Result<Vec<[f64; NUM_CLASSES]>> + '_ {
    move |_start, window| {
        let out = forward(params, std::slice::from_ref(window))?;
        Ok(out
            .logits
            .into_iter()
            .next()
            .expect("one sequence in, one out"))
    }
}
