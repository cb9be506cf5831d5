//! Punctuation restoration toolkit for low-resource text.
//!
//! The pipeline: punctuated raw text is converted into token/label corpora
//! ([`corpus`]), segmented into subword pieces with labels aligned to final
//! pieces ([`subword`]), optionally perturbed with simulated ASR errors
//! ([`augment`]), tagged by a BiLSTM over embeddings ([`net`]) trained with
//! Adam ([`train`]), and scored with per-class precision/recall/F1 and
//! confusion matrices ([`eval`]).

pub mod augment;
pub mod corpus;
pub mod eval;
pub mod net;
pub mod subword;
pub mod train;

mod error;

pub use error::{Error, ErrorKind, Result};
