//! Model checkpoint file: a `PNKT1` magic line, a UTF-8 metadata block, and
//! the parameter payload as little-endian 32-bit floats in group order
//! (embedding, forward LSTM, backward LSTM, projection).

use std::fs;
use std::path::Path;

use crate::{Error, Result};

use super::{Dims, ModelParams};

const MAGIC: &str = "PNKT1";

/// Metadata stored alongside the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointMeta {
    /// Hash of the tokenizer vocabulary the model was trained with.
    pub vocab_hash: u64,
    pub epoch: usize,
    pub dev_score: f64,
    /// Free-form one-line echo of the training configuration.
    pub config: String,
}

pub fn save_checkpoint(params: &ModelParams, meta: &CheckpointMeta, path: &Path) -> Result<()> {
    if meta.config.contains('\n') {
        return Err(Error::Config(
            "checkpoint config echo must be one line".into(),
        ));
    }
    let mut header = String::new();
    header.push_str(MAGIC);
    header.push('\n');
    header.push_str(&format!("vocab {}\n", params.dims.vocab));
    header.push_str(&format!("embed {}\n", params.dims.embed));
    header.push_str(&format!("hidden {}\n", params.dims.hidden));
    header.push_str(&format!("vocab_hash {:016x}\n", meta.vocab_hash));
    header.push_str(&format!("epoch {}\n", meta.epoch));
    header.push_str(&format!("dev_score {}\n", meta.dev_score));
    header.push_str(&format!("config {}\n", meta.config));
    header.push_str(&format!("PAYLOAD {}\n", params.param_count()));

    let mut bytes = header.into_bytes();
    bytes.reserve(params.param_count() * 4);
    for (_, group) in params.groups() {
        for &v in group {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, bytes)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(ModelParams, CheckpointMeta)> {
    let bytes = fs::read(path)?;
    parse_checkpoint(&bytes)
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    line_no: usize,
}

impl<'a> HeaderCursor<'a> {
    fn next_line(&mut self) -> Result<&'a str> {
        self.line_no += 1;
        let rest = &self.bytes[self.pos..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::parse(self.line_no, "truncated checkpoint header"))?;
        let line = std::str::from_utf8(&rest[..end])
            .map_err(|_| Error::parse(self.line_no, "header is not UTF-8"))?;
        self.pos += end + 1;
        Ok(line)
    }

    fn field(&mut self, key: &str) -> Result<&'a str> {
        let line = self.next_line()?;
        line.strip_prefix(key)
            .and_then(|rest| rest.strip_prefix(' '))
            .ok_or_else(|| Error::Data(format!("checkpoint header missing {key:?}")))
    }
}

fn parse_checkpoint(bytes: &[u8]) -> Result<(ModelParams, CheckpointMeta)> {
    let mut cur = HeaderCursor {
        bytes,
        pos: 0,
        line_no: 0,
    };
    if cur.next_line()? != MAGIC {
        return Err(Error::Data("not a checkpoint file (bad magic)".into()));
    }
    let vocab: usize = parse_num(cur.field("vocab")?, "vocab")?;
    let embed: usize = parse_num(cur.field("embed")?, "embed")?;
    let hidden: usize = parse_num(cur.field("hidden")?, "hidden")?;
    let vocab_hash = u64::from_str_radix(cur.field("vocab_hash")?, 16)
        .map_err(|_| Error::Data("bad vocab_hash in checkpoint".into()))?;
    let epoch: usize = parse_num(cur.field("epoch")?, "epoch")?;
    let dev_score: f64 = cur
        .field("dev_score")?
        .parse()
        .map_err(|_| Error::Data("bad dev_score in checkpoint".into()))?;
    let config = cur.field("config")?.to_string();
    let declared: usize = parse_num(cur.field("PAYLOAD")?, "PAYLOAD")?;
    let pos = cur.pos;

    if vocab == 0 || embed == 0 || hidden == 0 {
        return Err(Error::Data("checkpoint dims must be positive".into()));
    }
    let dims = Dims {
        vocab,
        embed,
        hidden,
    };
    let mut params = ModelParams::zeros(dims);
    let expected = params.param_count();
    if declared != expected {
        return Err(Error::Data(format!(
            "checkpoint declares {declared} parameters but dims imply {expected}"
        )));
    }
    let payload = &bytes[pos..];
    if payload.len() != expected * 4 {
        return Err(Error::Data(format!(
            "checkpoint payload is {} bytes, expected {}",
            payload.len(),
            expected * 4
        )));
    }
    let mut offset = 0;
    for (name, group) in params.groups_mut() {
        for v in group.iter_mut() {
            let raw: [u8; 4] = payload[offset..offset + 4]
                .try_into()
                .expect("length checked");
            *v = f32::from_le_bytes(raw);
            if !v.is_finite() {
                return Err(Error::Data(format!(
                    "non-finite value in checkpoint group {name}"
                )));
            }
            offset += 4;
        }
    }
    Ok((
        params,
        CheckpointMeta {
            vocab_hash,
            epoch,
            dev_score,
            config,
        },
    ))
}

fn parse_num(s: &str, key: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| Error::Data(format!("bad {key} in checkpoint header")))
}
