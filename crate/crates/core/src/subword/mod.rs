//! Byte-pair-encoding subword model: training, word segmentation, and the
//! text serialization format.

mod sequence;

pub use sequence::{
    decode_predictions, encode_document, frame_stream, piece_stream, SubwordSequence,
};

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::{Error, Result};

/// Suffix carried by every non-final piece of a word.
pub const CONTINUATION: &str = "@@";

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const BOS_ID: u32 = 2;
pub const EOS_ID: u32 = 3;

const SPECIAL_PIECES: [&str; 4] = ["<pad>", "<unk>", "<s>", "</s>"];

/// A trained BPE model: ordered merge rules plus a dense piece vocabulary
/// with the four special ids reserved below all learned ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BpeModel {
    merges: Vec<(String, String)>,
    pieces: Vec<String>,
    ids: HashMap<String, u32>,
}

impl BpeModel {
    /// Learns `num_merges` greedy merges from a corpus of whitespace-free
    /// words. Ties on pair frequency go to the lexicographically smallest
    /// pair; training stops early once no adjacent pair repeats.
    pub fn train<I, S>(corpus: I, num_merges: usize) -> Result<BpeModel>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut word_freq: BTreeMap<String, u64> = BTreeMap::new();
        for word in corpus {
            let word = word.as_ref();
            if word.is_empty() || word.chars().any(|c| c.is_whitespace()) {
                return Err(Error::Data(format!("invalid corpus word {word:?}")));
            }
            *word_freq.entry(word.to_string()).or_insert(0) += 1;
        }
        if word_freq.is_empty() {
            return Err(Error::Data("cannot train BPE on an empty corpus".into()));
        }

        let mut words: Vec<(Vec<String>, u64)> =
            word_freq.iter().map(|(w, &f)| (decompose(w), f)).collect();

        let mut initial_symbols: BTreeSet<String> = BTreeSet::new();
        for (symbols, _) in &words {
            initial_symbols.extend(symbols.iter().cloned());
        }

        let mut merges = Vec::with_capacity(num_merges);
        for _ in 0..num_merges {
            let Some(best) = best_pair(&words) else {
                break;
            };
            for (symbols, _) in &mut words {
                merge_in_place(symbols, &best);
            }
            merges.push(best);
        }

        let mut pieces: Vec<String> = SPECIAL_PIECES.iter().map(|s| s.to_string()).collect();
        pieces.extend(initial_symbols);
        for (left, right) in &merges {
            pieces.push(join_pair(left, right));
        }
        let ids = pieces
            .iter()
            .enumerate()
            .map(|(i, p)| (p.clone(), i as u32))
            .collect();
        Ok(BpeModel {
            merges,
            pieces,
            ids,
        })
    }

    /// Segments a word by applying the learned merges in training order.
    /// The returned pieces carry the continuation suffix on all but the
    /// last; stripping the markers and concatenating reproduces the word.
    pub fn encode_word(&self, word: &str) -> Vec<String> {
        let mut symbols = decompose(word);
        if symbols.is_empty() {
            return symbols;
        }
        let ranks: HashMap<(&str, &str), usize> = self
            .merges
            .iter()
            .enumerate()
            .map(|(i, (l, r))| ((l.as_str(), r.as_str()), i))
            .collect();
        loop {
            let mut best: Option<(usize, (String, String))> = None;
            for pair in symbols.windows(2) {
                if let Some(&rank) = ranks.get(&(pair[0].as_str(), pair[1].as_str())) {
                    if best.as_ref().is_none_or(|(r, _)| rank < *r) {
                        best = Some((rank, (pair[0].clone(), pair[1].clone())));
                    }
                }
            }
            match best {
                Some((_, pair)) => merge_in_place(&mut symbols, &pair),
                None => break,
            }
        }
        symbols
    }

    /// Id for a piece, falling back to the unknown id.
    pub fn piece_id(&self, piece: &str) -> u32 {
        self.ids.get(piece).copied().unwrap_or(UNK_ID)
    }

    /// Piece string for an id.
    pub fn id_piece(&self, id: u32) -> Option<&str> {
        self.pieces.get(id as usize).map(String::as_str)
    }

    pub fn vocab_size(&self) -> usize {
        self.pieces.len()
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    /// FNV-1a hash over the vocabulary in id order, used to detect
    /// checkpoint/tokenizer mismatches.
    pub fn vocab_hash(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        for piece in &self.pieces {
            for &b in piece.as_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
            h ^= 0xff;
            h = h.wrapping_mul(0x100000001b3);
        }
        h
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str(&format!("BPE v1 {}\n", self.merges.len()));
        for (left, right) in &self.merges {
            out.push_str(&format!("{left} {right}\n"));
        }
        out.push_str("VOCAB\n");
        for (id, piece) in self.pieces.iter().enumerate() {
            out.push_str(&format!("{piece}\t{id}\n"));
        }
        let mut file = fs::File::create(path)?;
        file.write_all(out.as_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<BpeModel> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text)
    }

    fn parse(text: &str) -> Result<BpeModel> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(1, "empty BPE file"))?;
        let num_merges: usize = header
            .strip_prefix("BPE v1 ")
            .and_then(|n| n.parse().ok())
            .ok_or_else(|| Error::parse(1, format!("bad header {header:?}")))?;

        let mut merges = Vec::with_capacity(num_merges);
        for _ in 0..num_merges {
            let (idx, line) = lines
                .next()
                .ok_or_else(|| Error::parse(num_merges + 1, "truncated merge list"))?;
            let (left, right) = line
                .split_once(' ')
                .ok_or_else(|| Error::parse(idx + 1, format!("bad merge line {line:?}")))?;
            if left.is_empty() || right.is_empty() || right.contains(' ') {
                return Err(Error::parse(idx + 1, format!("bad merge line {line:?}")));
            }
            merges.push((left.to_string(), right.to_string()));
        }
        match lines.next() {
            Some((_, "VOCAB")) => {}
            Some((idx, line)) => {
                return Err(Error::parse(
                    idx + 1,
                    format!("expected VOCAB, got {line:?}"),
                ))
            }
            None => return Err(Error::parse(num_merges + 2, "missing VOCAB section")),
        }

        let mut pieces: Vec<String> = Vec::new();
        for (idx, line) in lines {
            let (piece, id) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(idx + 1, format!("bad vocab line {line:?}")))?;
            let id: usize = id
                .parse()
                .map_err(|_| Error::parse(idx + 1, format!("bad vocab id {id:?}")))?;
            if id != pieces.len() {
                return Err(Error::parse(
                    idx + 1,
                    format!("vocab ids must be dense, expected {}", pieces.len()),
                ));
            }
            pieces.push(piece.to_string());
        }
        for (i, name) in SPECIAL_PIECES.iter().enumerate() {
            if pieces.get(i).map(String::as_str) != Some(*name) {
                return Err(Error::Data(format!(
                    "BPE vocab is missing special piece {name:?} at id {i}"
                )));
            }
        }
        let ids: HashMap<String, u32> = pieces
            .iter()
            .enumerate()
            .map(|(i, p)| (p.clone(), i as u32))
            .collect();
        if ids.len() != pieces.len() {
            return Err(Error::Data("duplicate piece in BPE vocab".into()));
        }
        Ok(BpeModel {
            merges,
            pieces,
            ids,
        })
    }
}

/// Splits a word into single-character symbols, continuation-marked on all
/// but the last.
fn decompose(word: &str) -> Vec<String> {
    let chars: Vec<char> = word.chars().collect();
    let last = chars.len().saturating_sub(1);
    chars
        .iter()
        .enumerate()
        .map(|(i, c)| {
            if i < last {
                format!("{c}{CONTINUATION}")
            } else {
                c.to_string()
            }
        })
        .collect()
}

/// Concatenation of a merged pair: the left symbol sheds its continuation
/// marker, the right keeps its final/non-final status.
fn join_pair(left: &str, right: &str) -> String {
    let core = left.strip_suffix(CONTINUATION).unwrap_or(left);
    format!("{core}{right}")
}

/// Most frequent adjacent pair across all decomposed words, weighted by
/// word frequency; `None` when no pair occurs twice.
fn best_pair(words: &[(Vec<String>, u64)]) -> Option<(String, String)> {
    let mut counts: HashMap<(&str, &str), u64> = HashMap::new();
    for (symbols, freq) in words {
        for pair in symbols.windows(2) {
            *counts
                .entry((pair[0].as_str(), pair[1].as_str()))
                .or_insert(0) += freq;
        }
    }
    let mut best: Option<((&str, &str), u64)> = None;
    for (pair, count) in counts {
        let better = match &best {
            None => true,
            Some((bp, bc)) => count > *bc || (count == *bc && pair < *bp),
        };
        if better {
            best = Some((pair, count));
        }
    }
    match best {
        Some(((l, r), count)) if count >= 2 => Some((l.to_string(), r.to_string())),
        _ => None,
    }
}

/// Replaces occurrences of `pair` left to right, non-overlapping.
fn merge_in_place(symbols: &mut Vec<String>, pair: &(String, String)) {
    let mut out = Vec::with_capacity(symbols.len());
    let mut i = 0;
    while i < symbols.len() {
        if i + 1 < symbols.len() && symbols[i] == pair.0 && symbols[i + 1] == pair.1 {
            out.push(join_pair(&pair.0, &pair.1));
            i += 2;
        } else {
            out.push(std::mem::take(&mut symbols[i]));
            i += 1;
        }
    }
    *symbols = out;
}

/// Strips the continuation marker from a non-final piece.
pub fn strip_marker(piece: &str) -> &str {
    piece.strip_suffix(CONTINUATION).unwrap_or(piece)
}
