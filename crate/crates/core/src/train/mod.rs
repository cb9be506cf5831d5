//! Training orchestration: epoch loop with per-epoch shuffling, Adam updates
//! with gradient clipping, and best-epoch selection on the dev split.

mod config;

pub use config::RunConfig;

use std::time::Instant;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::augment::{augment_dataset, AugmentConfig};
use crate::corpus::{Document, PunctClass};
use crate::eval::EvalReport;
use crate::net::{init_params, loss_and_grad, predict, Gradients, ModelParams};
use crate::subword::{encode_document, frame_stream, piece_stream, BpeModel, SubwordSequence};
use crate::{Error, Result};

/// Hyperparameters for one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seq_len: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub clip_norm: f64,
    pub emb_dim: usize,
    pub hidden_dim: usize,
    /// Seeds parameter init and augmentation.
    pub seed: u64,
    pub shuffle_seed: u64,
    pub augment: Option<AugmentConfig>,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            // from-scratch desk-scale default; pretrained-regime rates like
            // 5e-6 remain valid config inputs
            learning_rate: 1e-3,
            batch_size: 8,
            epochs: 10,
            seq_len: 256,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            clip_norm: 5.0,
            emb_dim: 128,
            hidden_dim: 128,
            seed: 0,
            shuffle_seed: 0,
            augment: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if self.seq_len < 3 {
            return Err(Error::Config(format!(
                "sequence length must be at least 3, got {}",
                self.seq_len
            )));
        }
        if self.emb_dim == 0 || self.hidden_dim == 0 {
            return Err(Error::Config("model dimensions must be positive".into()));
        }
        if let Some(aug) = &self.augment {
            aug.validate()?;
        }
        Ok(())
    }
}

/// One epoch's record. Wall time is informational and never serialized, so
/// artifacts stay byte-identical across runs.
#[derive(Debug, Clone)]
pub struct EpochRecord {
    pub train_loss: f64,
    pub dev: EvalReport,
    pub wall_secs: f64,
}

/// Full training trajectory plus the index of the selected epoch.
#[derive(Debug, Clone, Default)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch with the best dev metric; ties go to the earliest. `None` when
    /// no epoch ran.
    pub selected: Option<usize>,
    /// True when training aborted on a non-finite loss or gradient.
    pub diverged: bool,
}

impl TrainHistory {
    /// Dev selection metric per epoch: micro-F1 over the punctuation classes.
    pub fn dev_metric(&self, epoch: usize) -> f64 {
        self.epochs[epoch].dev.overall_micro.f1
    }
}

/// Deterministic per-epoch batching: a seeded permutation chunked into
/// batches, the final short batch kept.
pub fn make_batches(
    n_sequences: usize,
    batch_size: usize,
    shuffle_seed: u64,
    epoch: u64,
) -> Vec<Vec<usize>> {
    assert!(batch_size > 0, "batch size must be positive");
    let mut order: Vec<usize> = (0..n_sequences).collect();
    let mut rng = epoch_rng(shuffle_seed, epoch);
    // Fisher-Yates
    for i in (1..order.len()).rev() {
        let j = rand::Rng::random_range(&mut rng, 0..=i);
        order.swap(i, j);
    }
    order
        .chunks(batch_size)
        .map(|chunk| chunk.to_vec())
        .collect()
}

fn epoch_rng(seed: u64, epoch: u64) -> ChaCha12Rng {
    let mut bytes = [0u8; 32];
    bytes[..8].copy_from_slice(&seed.to_le_bytes());
    bytes[8..16].copy_from_slice(&epoch.to_le_bytes());
    bytes[16..24].copy_from_slice(b"shuffle\0");
    ChaCha12Rng::from_seed(bytes)
}

/// Adam first/second moment estimates, shaped like the parameters and kept
/// in 64-bit precision.
#[derive(Debug, Clone)]
pub struct Moments {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Moments {
    pub fn zeros(params: &ModelParams) -> Moments {
        let shape: Vec<Vec<f64>> = params
            .groups()
            .iter()
            .map(|(_, g)| vec![0.0; g.len()])
            .collect();
        Moments {
            m: shape.clone(),
            v: shape,
        }
    }
}

/// One Adam update with bias correction. `t` is the 1-based step count.
/// Non-finite gradients abort with an error instead of poisoning the
/// parameters.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &Gradients,
    moments: &mut Moments,
    t: usize,
    cfg: &TrainConfig,
) -> Result<()> {
    if t == 0 {
        return Err(Error::Config("Adam step count starts at 1".into()));
    }
    for (name, group) in grads.groups() {
        if group.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite gradient in group {name}"
            )));
        }
    }
    let bias1 = 1.0 - cfg.beta1.powi(t as i32);
    let bias2 = 1.0 - cfg.beta2.powi(t as i32);
    let grad_groups = grads.groups();
    for (gi, (_, group)) in params.groups_mut().into_iter().enumerate() {
        let g = grad_groups[gi].1;
        let m = &mut moments.m[gi];
        let v = &mut moments.v[gi];
        for i in 0..group.len() {
            let grad = g[i] as f64;
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad * grad;
            let m_hat = m[i] / bias1;
            let v_hat = v[i] / bias2;
            let update = cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
            group[i] = (group[i] as f64 - update) as f32;
        }
    }
    Ok(())
}

/// Scales gradients down to `max_norm` when their global L2 norm exceeds it.
/// Returns the pre-clip norm.
pub fn clip_gradients(grads: &mut Gradients, max_norm: f64) -> f64 {
    let mut sq = 0.0f64;
    for (_, group) in grads.groups() {
        for &g in group {
            sq += g as f64 * g as f64;
        }
    }
    let norm = sq.sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = (max_norm / norm) as f32;
        for (_, group) in grads.groups_mut() {
            for g in group.iter_mut() {
                *g *= scale;
            }
        }
    }
    norm
}

/// Encodes the training split into framed windows, applying augmentation
/// first when configured. Dev and test splits never pass through here.
pub fn prepare_train_sequences(
    docs: &[Document],
    bpe: &BpeModel,
    seq_len: usize,
    augment: Option<&AugmentConfig>,
) -> Result<Vec<SubwordSequence>> {
    // enforce the window budget on intact words up front
    let budget = seq_len.saturating_sub(2);
    for doc in docs {
        for tok in doc.tokens.iter() {
            let n = bpe.encode_word(tok.surface()).len();
            if n > budget {
                return Err(Error::Data(format!(
                    "word {:?} encodes to {n} pieces, exceeding the window budget of {budget}",
                    tok.surface()
                )));
            }
        }
    }
    let mut streams: Vec<_> = docs.iter().map(|d| piece_stream(bpe, d)).collect();
    if let Some(aug) = augment {
        streams = augment_dataset(&streams, aug)?;
    }
    let mut sequences = Vec::new();
    for stream in &streams {
        sequences.extend(frame_stream(stream, seq_len)?);
    }
    Ok(sequences)
}

/// Encodes an evaluation split and returns its windows plus gold labels in
/// slot order.
pub fn prepare_eval_sequences(
    docs: &[Document],
    bpe: &BpeModel,
    seq_len: usize,
) -> Result<(Vec<SubwordSequence>, Vec<PunctClass>)> {
    let mut sequences = Vec::new();
    for doc in docs {
        sequences.extend(encode_document(bpe, doc, seq_len)?);
    }
    let gold = sequences
        .iter()
        .flat_map(|s| s.label_slots().map(|(_, c)| c))
        .collect();
    Ok((sequences, gold))
}

/// Trains the tagger: optional augmentation of the train split, a fixed
/// number of epochs with per-epoch dev evaluation, and selection of the
/// best epoch by punctuation micro-F1. On divergence the loop aborts and
/// the best parameters so far are returned with the history flagged.
pub fn train(
    train_docs: &[Document],
    dev_docs: &[Document],
    bpe: &BpeModel,
    cfg: &TrainConfig,
) -> Result<(ModelParams, TrainHistory)> {
    cfg.validate()?;
    if train_docs.iter().all(|d| d.tokens.is_empty()) {
        return Err(Error::Data("training split is empty".into()));
    }
    if dev_docs.iter().all(|d| d.tokens.is_empty()) {
        return Err(Error::Data("dev split is empty".into()));
    }

    let train_seqs = prepare_train_sequences(train_docs, bpe, cfg.seq_len, cfg.augment.as_ref())?;
    let (dev_seqs, dev_gold) = prepare_eval_sequences(dev_docs, bpe, cfg.seq_len)?;

    let mut params = init_params(bpe.vocab_size(), cfg.emb_dim, cfg.hidden_dim, cfg.seed)?;
    let mut moments = Moments::zeros(&params);
    let mut history = TrainHistory::default();
    let mut best: Option<(ModelParams, f64)> = None;
    let mut step = 0usize;

    'epochs: for epoch in 0..cfg.epochs {
        let started = Instant::now();
        let batches = make_batches(
            train_seqs.len(),
            cfg.batch_size,
            cfg.shuffle_seed,
            epoch as u64,
        );
        let mut loss_sum = 0.0f64;
        let mut batch_count = 0usize;
        for batch_indices in &batches {
            let batch: Vec<SubwordSequence> = batch_indices
                .iter()
                .map(|&i| train_seqs[i].clone())
                .filter(|s| s.label_slots().next().is_some())
                .collect();
            if batch.is_empty() {
                continue;
            }
            let (loss, mut grads) = loss_and_grad(&params, &batch)?;
            if !loss.is_finite() {
                history.diverged = true;
                break 'epochs;
            }
            clip_gradients(&mut grads, cfg.clip_norm);
            step += 1;
            if let Err(err) = adam_step(&mut params, &grads, &mut moments, step, cfg) {
                if err.kind() == crate::ErrorKind::Numeric {
                    history.diverged = true;
                    break 'epochs;
                }
                return Err(err);
            }
            loss_sum += loss;
            batch_count += 1;
        }

        let dev_pred = predict(&params, &dev_seqs)?;
        let dev_report = EvalReport::from_labels(&dev_gold, &dev_pred)?;
        let metric = dev_report.overall_micro.f1;
        if best.as_ref().is_none_or(|(_, b)| metric > *b) {
            best = Some((params.clone(), metric));
            history.selected = Some(epoch);
        }
        history.epochs.push(EpochRecord {
            train_loss: if batch_count > 0 {
                loss_sum / batch_count as f64
            } else {
                f64::NAN
            },
            dev: dev_report,
            wall_secs: started.elapsed().as_secs_f64(),
        });
    }

    let final_params = match best {
        Some((p, _)) => p,
        None => params, // zero epochs or divergence before the first eval
    };
    Ok((final_params, history))
}

/// Token accuracy of the model on already-encoded sequences; used by the
/// overfit smoke experiment.
pub fn token_accuracy(
    params: &ModelParams,
    sequences: &[SubwordSequence],
    gold: &[PunctClass],
) -> Result<f64> {
    let pred = predict(params, sequences)?;
    let report = EvalReport::from_labels(gold, &pred)?;
    Ok(report.accuracy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::generate_synthetic;

    fn tiny_setup() -> (Vec<Document>, Vec<Document>, BpeModel) {
        let priors = [0.10, 0.06, 0.02, 0.02, 0.80];
        let train = generate_synthetic(1, 600, priors).unwrap();
        let dev = generate_synthetic(2, 150, priors).unwrap();
        let words: Vec<String> = train
            .iter()
            .chain(&dev)
            .flat_map(|d| d.tokens.iter().map(|t| t.surface().to_string()))
            .collect();
        let bpe = BpeModel::train(&words, 300).unwrap();
        (train, dev, bpe)
    }

    fn tiny_config() -> TrainConfig {
        TrainConfig {
            epochs: 2,
            seq_len: 32,
            emb_dim: 12,
            hidden_dim: 12,
            seed: 7,
            shuffle_seed: 7,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn batches_partition_all_sequences() {
        let batches = make_batches(23, 8, 5, 0);
        assert_eq!(batches.len(), 3);
        assert_eq!(batches.last().unwrap().len(), 7);
        let mut seen: Vec<usize> = batches.into_iter().flatten().collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..23).collect::<Vec<_>>());
    }

    #[test]
    fn single_batch_when_batch_size_covers_all() {
        let batches = make_batches(5, 16, 1, 3);
        assert_eq!(batches.len(), 1);
        assert_eq!(batches[0].len(), 5);
    }

    #[test]
    fn batch_order_is_seeded() {
        assert_eq!(make_batches(50, 8, 11, 2), make_batches(50, 8, 11, 2));
        assert_ne!(make_batches(50, 8, 11, 2), make_batches(50, 8, 11, 3));
        assert_ne!(make_batches(50, 8, 11, 2), make_batches(50, 8, 12, 2));
    }

    #[test]
    fn adam_zero_gradient_leaves_params() {
        let mut params = init_params(6, 4, 4, 0).unwrap();
        let before = params.clone();
        let grads = ModelParams::zeros(params.dims);
        let mut moments = Moments::zeros(&params);
        adam_step(&mut params, &grads, &mut moments, 1, &tiny_config()).unwrap();
        assert_eq!(params, before);
    }

    #[test]
    fn adam_single_step_matches_hand_computation() {
        // scalar case: theta = 0, g = 1, lr = 0.1, t = 1
        // m = 0.1, v = 0.001, m_hat = 1, v_hat = 1
        // theta' = -0.1 * 1 / (1 + 1e-8) ~= -0.09999999900
        let mut params = ModelParams::zeros(crate::net::Dims {
            vocab: 1,
            embed: 1,
            hidden: 1,
        });
        let mut grads = ModelParams::zeros(params.dims);
        grads.embedding[0] = 1.0;
        let mut moments = Moments::zeros(&params);
        let cfg = TrainConfig {
            learning_rate: 0.1,
            ..TrainConfig::default()
        };
        adam_step(&mut params, &grads, &mut moments, 1, &cfg).unwrap();
        // params are stored as f32, so compare at f32 resolution
        let expected = -0.1f64 / (1.0 + 1e-8);
        assert!(
            (params.embedding[0] as f64 - expected).abs() < 1e-7,
            "got {}",
            params.embedding[0]
        );
    }

    #[test]
    fn adam_update_is_sign_symmetric() {
        let cfg = TrainConfig {
            learning_rate: 0.05,
            ..TrainConfig::default()
        };
        let dims = crate::net::Dims {
            vocab: 2,
            embed: 3,
            hidden: 2,
        };
        let mut grads = ModelParams::zeros(dims);
        for (i, g) in grads.embedding.iter_mut().enumerate() {
            *g = 0.3 + 0.1 * i as f32;
        }
        let mut pos = ModelParams::zeros(dims);
        let mut m_pos = Moments::zeros(&pos);
        adam_step(&mut pos, &grads, &mut m_pos, 1, &cfg).unwrap();

        for g in grads.embedding.iter_mut() {
            *g = -*g;
        }
        let mut neg = ModelParams::zeros(dims);
        let mut m_neg = Moments::zeros(&neg);
        adam_step(&mut neg, &grads, &mut m_neg, 1, &cfg).unwrap();

        for (a, b) in pos.embedding.iter().zip(&neg.embedding) {
            assert!((a + b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn adam_rejects_nonfinite_gradients() {
        let mut params = init_params(6, 4, 4, 0).unwrap();
        let mut grads = ModelParams::zeros(params.dims);
        grads.proj_bias[0] = f32::NAN;
        let mut moments = Moments::zeros(&params);
        let err = adam_step(&mut params, &grads, &mut moments, 1, &tiny_config()).unwrap_err();
        assert_eq!(err.kind(), crate::ErrorKind::Numeric);
    }

    #[test]
    fn clipping_caps_global_norm() {
        let dims = crate::net::Dims {
            vocab: 2,
            embed: 2,
            hidden: 2,
        };
        let mut grads = ModelParams::zeros(dims);
        for g in grads.embedding.iter_mut() {
            *g = 10.0;
        }
        let before = clip_gradients(&mut grads, 5.0);
        assert!(before > 5.0);
        let after = clip_gradients(&mut grads, 5.0);
        assert!((after - 5.0).abs() < 1e-3);
    }

    #[test]
    fn zero_epochs_returns_initial_params() {
        let (train_docs, dev_docs, bpe) = tiny_setup();
        let cfg = TrainConfig {
            epochs: 0,
            ..tiny_config()
        };
        let (params, history) = train(&train_docs, &dev_docs, &bpe, &cfg).unwrap();
        let initial = init_params(bpe.vocab_size(), cfg.emb_dim, cfg.hidden_dim, cfg.seed).unwrap();
        assert_eq!(params, initial);
        assert!(history.epochs.is_empty());
        assert_eq!(history.selected, None);
    }

    #[test]
    fn training_is_deterministic() {
        let (train_docs, dev_docs, bpe) = tiny_setup();
        let cfg = tiny_config();
        let (p1, h1) = train(&train_docs, &dev_docs, &bpe, &cfg).unwrap();
        let (p2, h2) = train(&train_docs, &dev_docs, &bpe, &cfg).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(h1.selected, h2.selected);
        for (a, b) in h1.epochs.iter().zip(&h2.epochs) {
            assert_eq!(a.train_loss, b.train_loss);
            assert_eq!(a.dev, b.dev);
        }
    }

    #[test]
    fn selected_epoch_has_best_dev_metric() {
        let (train_docs, dev_docs, bpe) = tiny_setup();
        let cfg = TrainConfig {
            epochs: 3,
            ..tiny_config()
        };
        let (_, history) = train(&train_docs, &dev_docs, &bpe, &cfg).unwrap();
        let selected = history.selected.unwrap();
        for e in 0..history.epochs.len() {
            assert!(history.dev_metric(selected) >= history.dev_metric(e));
            if history.dev_metric(e) == history.dev_metric(selected) {
                assert!(selected <= e, "ties must pick the earliest epoch");
            }
        }
    }

    #[test]
    fn loss_decreases_after_one_step_on_tiny_problem() {
        let (train_docs, dev_docs, bpe) = tiny_setup();
        let _ = dev_docs;
        let cfg = TrainConfig {
            learning_rate: 1e-2,
            ..tiny_config()
        };
        let seqs = prepare_train_sequences(&train_docs, &bpe, cfg.seq_len, None).unwrap();
        let batch: Vec<SubwordSequence> = seqs.iter().take(4).cloned().collect();
        let mut params = init_params(bpe.vocab_size(), cfg.emb_dim, cfg.hidden_dim, 3).unwrap();
        let mut moments = Moments::zeros(&params);
        let (loss_before, mut grads) = loss_and_grad(&params, &batch).unwrap();
        clip_gradients(&mut grads, cfg.clip_norm);
        adam_step(&mut params, &grads, &mut moments, 1, &cfg).unwrap();
        let (loss_after, _) = loss_and_grad(&params, &batch).unwrap();
        assert!(
            loss_after < loss_before,
            "{loss_after} not below {loss_before}"
        );
    }

    #[test]
    fn augmentation_leaves_dev_untouched() {
        let (train_docs, dev_docs, bpe) = tiny_setup();
        let fingerprint = crate::corpus::to_tsv_string;
        let before = fingerprint(&dev_docs);
        let cfg = TrainConfig {
            epochs: 1,
            augment: Some(AugmentConfig::new(0.3, 0.4, 0.4, 9).unwrap()),
            ..tiny_config()
        };
        let _ = train(&train_docs, &dev_docs, &bpe, &cfg).unwrap();
        assert_eq!(fingerprint(&dev_docs), before);
    }

    #[test]
    fn augmented_training_differs_from_clean() {
        let (train_docs, dev_docs, bpe) = tiny_setup();
        let clean = train(&train_docs, &dev_docs, &bpe, &tiny_config()).unwrap();
        let cfg = TrainConfig {
            augment: Some(AugmentConfig::new(0.3, 0.4, 0.4, 7).unwrap()),
            ..tiny_config()
        };
        let aug = train(&train_docs, &dev_docs, &bpe, &cfg).unwrap();
        assert_ne!(clean.0, aug.0);
    }
}
