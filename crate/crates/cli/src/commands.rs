//! Implementations behind the `dari` subcommands.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use dari_core::augment::{augment_dataset, AugmentConfig};
use dari_core::corpus::{
    self, load_tsv, normalize_text, parse_labeled, render, save_tsv, stats, Document, Source,
    NUM_CLASSES,
};
use dari_core::eval::{ablation_table, ablation_table_tsv, AblationCell, EvalReport};
use dari_core::net::{load_checkpoint, predict, save_checkpoint, CheckpointMeta, ModelParams};
use dari_core::subword::{piece_stream, BpeModel};
use dari_core::train::{self, prepare_eval_sequences, RunConfig, TrainHistory};
use dari_core::{Error, Result};

use crate::restore::{model_scorer, restore_labels, RestoreRequest};

pub fn prepare(input: &Path, out_tsv: &Path) -> Result<()> {
    let raw = fs::read_to_string(input)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", input.display())))?;
    let docs = documents_from_raw(&raw);
    save_tsv(&docs, out_tsv)?;
    let s = stats(&docs);
    println!("prepared {} documents: {s}", docs.len());
    Ok(())
}

/// Blank-line-separated paragraphs become documents. Lines within a
/// paragraph are joined by spaces; CRLF endings are handled.
fn documents_from_raw(raw: &str) -> Vec<Document> {
    let mut paragraphs: Vec<String> = Vec::new();
    let mut current = String::new();
    for line in raw.lines() {
        if line.trim().is_empty() {
            if !current.is_empty() {
                paragraphs.push(std::mem::take(&mut current));
            }
        } else {
            if !current.is_empty() {
                current.push(' ');
            }
            current.push_str(line);
        }
    }
    if !current.is_empty() {
        paragraphs.push(current);
    }
    paragraphs
        .iter()
        .map(|p| normalize_text(p))
        .filter(|p| !p.is_empty())
        .enumerate()
        .map(|(i, para)| {
            let mut doc = parse_labeled(&para);
            doc.id = format!("doc{i}");
            doc
        })
        .collect()
}

pub fn synth(gen_seed: u64, tokens: usize, priors: &str, out_tsv: &Path) -> Result<()> {
    let parts: Vec<f64> = priors
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad prior value {p:?}")))
        })
        .collect::<Result<_>>()?;
    let priors: [f64; NUM_CLASSES] = parts
        .try_into()
        .map_err(|_| Error::Config("expected five comma-separated priors".into()))?;
    let docs = corpus::generate_synthetic(gen_seed, tokens, priors)?;
    save_tsv(&docs, out_tsv)?;
    let s = stats(&docs);
    println!("generated {} documents: {s}", docs.len());
    Ok(())
}

pub fn train_bpe(input: &Path, merges: usize, out_model: &Path) -> Result<()> {
    let docs = load_tsv(input)?;
    let words = surfaces(&docs)?;
    let bpe = BpeModel::train(&words, merges)?;
    bpe.save(out_model)?;
    println!(
        "trained BPE model: {} merges, vocabulary of {}",
        bpe.merges().len(),
        bpe.vocab_size()
    );
    Ok(())
}

fn surfaces(docs: &[Document]) -> Result<Vec<String>> {
    let words: Vec<String> = docs
        .iter()
        .flat_map(|d| d.tokens.iter().map(|t| t.surface().to_string()))
        .collect();
    if words.is_empty() {
        return Err(Error::Data("corpus has no tokens".into()));
    }
    Ok(words)
}

pub fn augment(
    input: &Path,
    bpe_path: &Path,
    alpha: f64,
    sub_prob: f64,
    del_prob: f64,
    seed: Option<u64>,
    out_pieces: &Path,
) -> Result<()> {
    let docs = load_tsv(input)?;
    let bpe = BpeModel::load(bpe_path)?;
    let cfg = AugmentConfig::new(alpha, sub_prob, del_prob, seed.unwrap_or(0))?;
    let streams: Vec<_> = docs.iter().map(|d| piece_stream(&bpe, d)).collect();
    let augmented = augment_dataset(&streams, &cfg)?;

    let mut out = String::new();
    for stream in &augmented {
        for &(id, label) in stream {
            let piece = bpe
                .id_piece(id)
                .ok_or_else(|| Error::Data(format!("piece id {id} out of range")))?;
            let name = label.map_or("IGNORE", |c| c.name());
            let _ = writeln!(out, "{piece}\t{name}");
        }
        out.push('\n');
    }
    fs::write(out_pieces, out)?;

    let before: usize = streams.iter().map(Vec::len).sum();
    let after: usize = augmented.iter().map(Vec::len).sum();
    println!("augmented {before} pieces into {after} (alpha {alpha})");
    Ok(())
}

fn load_run_config(
    config: Option<&Path>,
    seed: Option<u64>,
    out: Option<&Path>,
) -> Result<RunConfig> {
    let mut cfg = match config {
        Some(path) => RunConfig::load(path)?,
        None => return Err(Error::Config("--config is required".into())),
    };
    if let Some(seed) = seed {
        cfg.train.seed = seed;
        if let Some(aug) = &mut cfg.train.augment {
            aug.seed = seed;
        }
    }
    if let Some(out) = out {
        cfg.out_dir = Some(out.to_path_buf());
    }
    Ok(cfg)
}

struct RunData {
    train_docs: Vec<Document>,
    dev_docs: Vec<Document>,
    bpe: BpeModel,
}

fn load_run_data(cfg: &RunConfig, out_dir: &Path) -> Result<RunData> {
    let train_path = cfg
        .train_tsv
        .as_ref()
        .ok_or_else(|| Error::Config("config must set train_tsv".into()))?;
    let dev_path = cfg
        .dev_tsv
        .as_ref()
        .ok_or_else(|| Error::Config("config must set dev_tsv".into()))?;
    let train_docs = load_tsv(train_path)?;
    let dev_docs = load_tsv(dev_path)?;
    let bpe = match &cfg.bpe_model {
        Some(path) => BpeModel::load(path)?,
        None => {
            let words = surfaces(&train_docs)?;
            let bpe = BpeModel::train(&words, cfg.num_merges)?;
            bpe.save(&out_dir.join("model.bpe"))?;
            bpe
        }
    };
    Ok(RunData {
        train_docs,
        dev_docs,
        bpe,
    })
}

fn history_tsv(history: &TrainHistory) -> String {
    let mut out = String::from(
        "epoch\ttrain_loss\tdev_precision\tdev_recall\tdev_f1\tdev_accuracy\tselected\n",
    );
    for (e, record) in history.epochs.iter().enumerate() {
        let o = &record.dev.overall_micro;
        let _ = writeln!(
            out,
            "{e}\t{}\t{}\t{}\t{}\t{}\t{}",
            record.train_loss,
            o.precision,
            o.recall,
            o.f1,
            record.dev.accuracy,
            if history.selected == Some(e) { 1 } else { 0 },
        );
    }
    out
}

/// Trains per the run config; writes the BPE model (when freshly trained),
/// the best checkpoint, the history table, and the selected epoch's dev
/// report into the output directory.
pub fn train(config: Option<&Path>, seed: Option<u64>, out: Option<&Path>) -> Result<()> {
    let cfg = load_run_config(config, seed, out)?;
    let out_dir = cfg.out_dir.clone().unwrap_or_else(|| "out".into());
    fs::create_dir_all(&out_dir)?;
    let data = load_run_data(&cfg, &out_dir)?;

    let (params, history) = train::train(&data.train_docs, &data.dev_docs, &data.bpe, &cfg.train)?;
    write_run_outputs(&cfg, &data, &params, &history, &out_dir)?;

    for (e, record) in history.epochs.iter().enumerate() {
        println!(
            "epoch {e}: train loss {:.6}, dev punctuation F1 {:.4}{}",
            record.train_loss,
            record.dev.overall_micro.f1,
            if history.selected == Some(e) {
                "  <- selected"
            } else {
                ""
            },
        );
    }
    if history.diverged {
        eprintln!("warning: training diverged; kept the last good checkpoint");
    }
    println!("wrote {}", out_dir.join("model.pnkt").display());
    Ok(())
}

fn write_run_outputs(
    cfg: &RunConfig,
    data: &RunData,
    params: &ModelParams,
    history: &TrainHistory,
    out_dir: &Path,
) -> Result<()> {
    let (epoch, dev_score) = match history.selected {
        Some(e) => (e, history.dev_metric(e)),
        None => (0, 0.0),
    };
    let meta = CheckpointMeta {
        vocab_hash: data.bpe.vocab_hash(),
        epoch,
        dev_score,
        config: cfg.echo(),
    };
    save_checkpoint(params, &meta, &out_dir.join("model.pnkt"))?;
    fs::write(out_dir.join("history.tsv"), history_tsv(history))?;
    if let Some(selected) = history.selected {
        let report = &history.epochs[selected].dev;
        fs::write(out_dir.join("dev_report.txt"), report.render())?;
        fs::write(out_dir.join("dev_report.tsv"), report.render_tsv())?;
    }
    Ok(())
}

fn check_compat(bpe: &BpeModel, params: &ModelParams, meta: &CheckpointMeta) -> Result<()> {
    if meta.vocab_hash != bpe.vocab_hash() {
        return Err(Error::Data(
            "checkpoint was trained with a different BPE model (vocabulary hash mismatch)".into(),
        ));
    }
    if params.dims.vocab != bpe.vocab_size() {
        return Err(Error::Data(format!(
            "checkpoint vocabulary size {} does not match BPE model {}",
            params.dims.vocab,
            bpe.vocab_size()
        )));
    }
    Ok(())
}

pub fn evaluate(
    checkpoint: &Path,
    bpe_path: &Path,
    test: &Path,
    name: &str,
    out: Option<&Path>,
) -> Result<()> {
    let (params, meta) = load_checkpoint(checkpoint)?;
    let bpe = BpeModel::load(bpe_path)?;
    check_compat(&bpe, &params, &meta)?;
    let docs = load_tsv(test)?;
    let report = evaluate_docs(&params, &bpe, &docs, seq_len_from(&meta))?;

    print!("{}", report.render());
    if let Some(out_dir) = out {
        fs::create_dir_all(out_dir)?;
        fs::write(out_dir.join(format!("{name}_report.txt")), report.render())?;
        fs::write(
            out_dir.join(format!("{name}_report.tsv")),
            report.render_tsv(),
        )?;
    }
    Ok(())
}

fn evaluate_docs(
    params: &ModelParams,
    bpe: &BpeModel,
    docs: &[Document],
    seq_len: usize,
) -> Result<EvalReport> {
    let (sequences, gold) = prepare_eval_sequences(docs, bpe, seq_len)?;
    let pred = predict(params, &sequences)?;
    EvalReport::from_labels(&gold, &pred)
}

// the checkpoint config echo carries seq_len=<n>; fall back to the default
fn seq_len_from(meta: &CheckpointMeta) -> usize {
    meta.config
        .split_whitespace()
        .find_map(|kv| kv.strip_prefix("seq_len=").and_then(|v| v.parse().ok()))
        .unwrap_or(256)
}

pub fn restore(
    checkpoint: &Path,
    bpe_path: &Path,
    input: &Path,
    out_text: Option<&Path>,
    seq_len: usize,
) -> Result<()> {
    let (params, meta) = load_checkpoint(checkpoint)?;
    let bpe = BpeModel::load(bpe_path)?;
    check_compat(&bpe, &params, &meta)?;
    let raw = fs::read_to_string(input)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", input.display())))?;

    let req = RestoreRequest::new(seq_len)?;
    let mut restored = Vec::new();
    for doc in documents_from_raw(&raw) {
        let words: Vec<String> = doc.tokens.iter().map(|t| t.surface().to_string()).collect();
        let labels = restore_labels(&words, &bpe, &req, model_scorer(&params))?;
        let tokens = words
            .into_iter()
            .zip(labels)
            .map(|(w, l)| corpus::LabeledToken::new(w, l))
            .collect::<Result<Vec<_>>>()?;
        restored.push(render(&Document::new(doc.id, Source::Other, tokens)));
    }
    let text = restored.join("\n");
    match out_text {
        Some(path) => fs::write(path, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(())
}

/// Parses the `--alphas` grid: `none` or an alpha in [0, 1] per entry.
fn parse_alpha_grid(alphas: &str) -> Result<Vec<Option<f64>>> {
    alphas
        .split(',')
        .map(|entry| {
            let entry = entry.trim();
            if entry.eq_ignore_ascii_case("none") {
                Ok(None)
            } else {
                entry
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad alpha {entry:?}")))
                    .map(Some)
            }
        })
        .collect()
}

fn alpha_dir_name(alpha: Option<f64>) -> String {
    match alpha {
        None => "alpha-none".to_string(),
        Some(a) => format!("alpha-{a:.2}"),
    }
}

/// Trains one model per grid cell with shared seeds and evaluates each on
/// every configured test set. Failed cells are reported and the completed
/// ones still emitted.
pub fn ablate(
    config: Option<&Path>,
    alphas: &str,
    seed: Option<u64>,
    out: Option<&Path>,
) -> Result<()> {
    let base = load_run_config(config, seed, out)?;
    if base.test_sets.is_empty() {
        return Err(Error::Config("config must set test_tsv for ablate".into()));
    }
    let grid = parse_alpha_grid(alphas)?;
    if grid.is_empty() {
        return Err(Error::Config("alpha grid is empty".into()));
    }
    let out_dir = base.out_dir.clone().unwrap_or_else(|| "out".into());
    fs::create_dir_all(&out_dir)?;

    let (sub_prob, del_prob) = match &base.train.augment {
        Some(a) => (a.p_sub, a.p_del),
        None => (0.4, 0.4),
    };

    let mut cells: Vec<AblationCell> = Vec::new();
    let mut failures: Vec<(String, Error)> = Vec::new();
    for alpha in grid {
        let mut cfg = base.clone();
        cfg.train.augment = match alpha {
            None => None,
            Some(a) => Some(AugmentConfig::new(a, sub_prob, del_prob, cfg.train.seed)?),
        };
        let cell_dir = out_dir.join(alpha_dir_name(alpha));
        match run_cell(&cfg, alpha, &cell_dir) {
            Ok(mut reports) => cells.append(&mut reports),
            Err(err) => {
                eprintln!("cell {}: failed: {err}", alpha_dir_name(alpha));
                failures.push((alpha_dir_name(alpha), err));
            }
        }
    }

    let table = ablation_table(&cells);
    print!("{table}");
    fs::write(out_dir.join("ablation.txt"), &table)?;
    fs::write(out_dir.join("ablation.tsv"), ablation_table_tsv(&cells))?;

    match failures.into_iter().next() {
        Some((name, err)) => Err(Error::Data(format!("cell {name} failed: {err}"))),
        None => Ok(()),
    }
}

fn run_cell(cfg: &RunConfig, alpha: Option<f64>, cell_dir: &Path) -> Result<Vec<AblationCell>> {
    fs::create_dir_all(cell_dir)?;
    let data = load_run_data(cfg, cell_dir)?;
    let (params, history) = train::train(&data.train_docs, &data.dev_docs, &data.bpe, &cfg.train)?;
    write_run_outputs(cfg, &data, &params, &history, cell_dir)?;

    let mut cells = Vec::new();
    for (name, path) in &cfg.test_sets {
        let docs = load_tsv(path)?;
        let report = evaluate_docs(&params, &data.bpe, &docs, cfg.train.seq_len)?;
        fs::write(cell_dir.join(format!("{name}_report.txt")), report.render())?;
        fs::write(
            cell_dir.join(format!("{name}_report.tsv")),
            report.render_tsv(),
        )?;
        cells.push(AblationCell {
            alpha,
            test_set: name.clone(),
            report,
        });
    }
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use dari_core::corpus::PunctClass;

    #[test]
    fn alpha_grid_parses_the_standard_sweep() {
        let grid = parse_alpha_grid("none,0.10,0.15,0.20").unwrap();
        assert_eq!(grid, vec![None, Some(0.10), Some(0.15), Some(0.20)]);
        assert!(parse_alpha_grid("none,abc").is_err());
    }

    #[test]
    fn raw_paragraphs_become_documents() {
        let docs = documents_from_raw("ami bhalo achi.\n\nke? tumi!\n\n\n");
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[0].tokens.len(), 3);
        assert_eq!(docs[0].tokens[2].label(), PunctClass::Period);
        assert_eq!(docs[1].tokens[0].label(), PunctClass::Question);
    }

    #[test]
    fn crlf_and_multiline_paragraphs_parse() {
        let docs = documents_from_raw("ami bhalo\r\nachi.\r\n\r\nke?\r\n");
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[0].tokens.len(), 3);
        assert_eq!(docs[0].tokens[2].label(), PunctClass::Period);
        assert_eq!(docs[1].tokens.len(), 1);
    }

    #[test]
    fn seq_len_recovered_from_checkpoint_echo() {
        let meta = CheckpointMeta {
            vocab_hash: 0,
            epoch: 0,
            dev_score: 0.0,
            config: "lr=0.001 seq_len=64 emb_dim=32".into(),
        };
        assert_eq!(seq_len_from(&meta), 64);
        let empty = CheckpointMeta {
            vocab_hash: 0,
            epoch: 0,
            dev_score: 0.0,
            config: String::new(),
        };
        assert_eq!(seq_len_from(&empty), 256);
    }
}
