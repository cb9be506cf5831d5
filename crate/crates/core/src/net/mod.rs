//! The trainable tagger: embedding lookup, bidirectional LSTM, and a 5-way
//! linear classifier, with exact backpropagation through time.
//!
//! Parameters are stored as 32-bit floats; all activations and reductions
//! run in 64-bit arithmetic.

// the recurrence and backprop walk several parallel buffers by index
#![allow(clippy::needless_range_loop)]

mod checkpoint;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::corpus::{PunctClass, NUM_CLASSES};
use crate::subword::SubwordSequence;
use crate::{Error, Result};

/// Model dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub vocab: usize,
    pub embed: usize,
    pub hidden: usize,
}

/// One direction's LSTM weights. Gate rows are ordered input, forget, cell
/// candidate, output; each block is `hidden` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmWeights {
    /// 4h x d, row-major.
    pub w_input: Vec<f32>,
    /// 4h x h, row-major.
    pub w_recurrent: Vec<f32>,
    /// 4h.
    pub bias: Vec<f32>,
}

impl LstmWeights {
    fn zeros(dims: Dims) -> LstmWeights {
        LstmWeights {
            w_input: vec![0.0; 4 * dims.hidden * dims.embed],
            w_recurrent: vec![0.0; 4 * dims.hidden * dims.hidden],
            bias: vec![0.0; 4 * dims.hidden],
        }
    }
}

/// All trainable parameters. Also used for gradients, which share the shape.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub dims: Dims,
    /// vocab x d, row-major.
    pub embedding: Vec<f32>,
    pub fwd: LstmWeights,
    pub bwd: LstmWeights,
    /// NUM_CLASSES x 2h, row-major, over the concatenated [fwd; bwd] state.
    pub proj_weight: Vec<f32>,
    /// NUM_CLASSES.
    pub proj_bias: Vec<f32>,
}

/// Gradients are laid out exactly like the parameters.
pub type Gradients = ModelParams;

impl ModelParams {
    pub fn zeros(dims: Dims) -> ModelParams {
        ModelParams {
            dims,
            embedding: vec![0.0; dims.vocab * dims.embed],
            fwd: LstmWeights::zeros(dims),
            bwd: LstmWeights::zeros(dims),
            proj_weight: vec![0.0; NUM_CLASSES * 2 * dims.hidden],
            proj_bias: vec![0.0; NUM_CLASSES],
        }
    }

    /// Named parameter groups in checkpoint payload order.
    pub fn groups(&self) -> [(&'static str, &[f32]); 9] {
        [
            ("embedding", &self.embedding),
            ("fwd.w_input", &self.fwd.w_input),
            ("fwd.w_recurrent", &self.fwd.w_recurrent),
            ("fwd.bias", &self.fwd.bias),
            ("bwd.w_input", &self.bwd.w_input),
            ("bwd.w_recurrent", &self.bwd.w_recurrent),
            ("bwd.bias", &self.bwd.bias),
            ("proj_weight", &self.proj_weight),
            ("proj_bias", &self.proj_bias),
        ]
    }

    pub fn groups_mut(&mut self) -> [(&'static str, &mut [f32]); 9] {
        [
            ("embedding", &mut self.embedding),
            ("fwd.w_input", &mut self.fwd.w_input),
            ("fwd.w_recurrent", &mut self.fwd.w_recurrent),
            ("fwd.bias", &mut self.fwd.bias),
            ("bwd.w_input", &mut self.bwd.w_input),
            ("bwd.w_recurrent", &mut self.bwd.w_recurrent),
            ("bwd.bias", &mut self.bwd.bias),
            ("proj_weight", &mut self.proj_weight),
            ("proj_bias", &mut self.proj_bias),
        ]
    }

    pub fn param_count(&self) -> usize {
        self.groups().iter().map(|(_, g)| g.len()).sum()
    }
}

/// Random initialization: weights uniform in (-0.1, 0.1), forget-gate bias
/// slices set to 1. Deterministic per seed.
pub fn init_params(vocab: usize, embed: usize, hidden: usize, seed: u64) -> Result<ModelParams> {
    if vocab == 0 || embed == 0 || hidden == 0 {
        return Err(Error::Config(format!(
            "model dimensions must be positive, got vocab={vocab} embed={embed} hidden={hidden}"
        )));
    }
    let dims = Dims {
        vocab,
        embed,
        hidden,
    };
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut params = ModelParams::zeros(dims);
    for (_, group) in params.groups_mut() {
        for v in group.iter_mut() {
            *v = rng.random_range(-0.1f32..0.1);
        }
    }
    for dir in [&mut params.fwd, &mut params.bwd] {
        for v in &mut dir.bias[hidden..2 * hidden] {
            *v = 1.0;
        }
    }
    Ok(params)
}

/// Per-position, per-direction activations cached for backpropagation.
struct DirCache {
    /// T x 4h: post-activation gate values (i, f, g, o blocks).
    gates: Vec<f64>,
    /// T x h.
    cell: Vec<f64>,
    /// T x h.
    cell_tanh: Vec<f64>,
    /// T x h.
    hidden: Vec<f64>,
}

struct SeqCache {
    fwd: DirCache,
    bwd: DirCache,
}

/// Output of the forward pass over a batch, keeping the activations needed
/// for the backward pass.
pub struct Forward {
    /// Per sequence, per position: unnormalized class scores.
    pub logits: Vec<Vec<[f64; NUM_CLASSES]>>,
    caches: Vec<SeqCache>,
}

/// Runs the BiLSTM over a batch. Pad positions carry the recurrent state
/// through unchanged in both directions; their logits are computed but
/// ignored downstream.
pub fn forward(params: &ModelParams, batch: &[SubwordSequence]) -> Result<Forward> {
    let h = params.dims.hidden;
    let mut logits = Vec::with_capacity(batch.len());
    let mut caches = Vec::with_capacity(batch.len());
    for seq in batch {
        for &id in &seq.ids {
            if id as usize >= params.dims.vocab {
                return Err(Error::Data(format!(
                    "piece id {id} out of range for vocabulary of {}",
                    params.dims.vocab
                )));
            }
        }
        let t_len = seq.ids.len();
        let fwd = run_direction(params, &params.fwd, seq, (0..t_len).collect());
        let bwd = run_direction(params, &params.bwd, seq, (0..t_len).rev().collect());

        let mut seq_logits = vec![[0.0f64; NUM_CLASSES]; t_len];
        for t in 0..t_len {
            for class in 0..NUM_CLASSES {
                let row = &params.proj_weight[class * 2 * h..(class + 1) * 2 * h];
                let mut acc = params.proj_bias[class] as f64;
                for j in 0..h {
                    acc += row[j] as f64 * fwd.hidden[t * h + j];
                    acc += row[h + j] as f64 * bwd.hidden[t * h + j];
                }
                seq_logits[t][class] = acc;
            }
        }
        logits.push(seq_logits);
        caches.push(SeqCache { fwd, bwd });
    }
    Ok(Forward { logits, caches })
}

/// The LSTM recurrence along one direction, `order` giving the time indices
/// in processing order.
fn run_direction(
    params: &ModelParams,
    w: &LstmWeights,
    seq: &SubwordSequence,
    order: Vec<usize>,
) -> DirCache {
    let Dims {
        embed: d,
        hidden: h,
        ..
    } = params.dims;
    let t_len = seq.ids.len();
    let mut cache = DirCache {
        gates: vec![0.0; t_len * 4 * h],
        cell: vec![0.0; t_len * h],
        cell_tanh: vec![0.0; t_len * h],
        hidden: vec![0.0; t_len * h],
    };
    let mut h_prev = vec![0.0f64; h];
    let mut c_prev = vec![0.0f64; h];
    let mut pre = vec![0.0f64; 4 * h];
    for &t in &order {
        if !seq.mask[t] {
            // padding: state passes through unchanged
            cache.hidden[t * h..(t + 1) * h].copy_from_slice(&h_prev);
            cache.cell[t * h..(t + 1) * h].copy_from_slice(&c_prev);
            for j in 0..h {
                cache.cell_tanh[t * h + j] = c_prev[j].tanh();
            }
            continue;
        }
        let x = &params.embedding[seq.ids[t] as usize * d..(seq.ids[t] as usize + 1) * d];
        for r in 0..4 * h {
            let mut acc = w.bias[r] as f64;
            let wi = &w.w_input[r * d..(r + 1) * d];
            for j in 0..d {
                acc += wi[j] as f64 * x[j] as f64;
            }
            let wr = &w.w_recurrent[r * h..(r + 1) * h];
            for j in 0..h {
                acc += wr[j] as f64 * h_prev[j];
            }
            pre[r] = acc;
        }
        for j in 0..h {
            let gi = sigmoid(pre[j]);
            let gf = sigmoid(pre[h + j]);
            let gg = pre[2 * h + j].tanh();
            let go = sigmoid(pre[3 * h + j]);
            let c = gf * c_prev[j] + gi * gg;
            let ct = c.tanh();
            cache.gates[t * 4 * h + j] = gi;
            cache.gates[t * 4 * h + h + j] = gf;
            cache.gates[t * 4 * h + 2 * h + j] = gg;
            cache.gates[t * 4 * h + 3 * h + j] = go;
            cache.cell[t * h + j] = c;
            cache.cell_tanh[t * h + j] = ct;
            cache.hidden[t * h + j] = go * ct;
        }
        h_prev.copy_from_slice(&cache.hidden[t * h..(t + 1) * h]);
        c_prev.copy_from_slice(&cache.cell[t * h..(t + 1) * h]);
    }
    cache
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Mean softmax cross-entropy over label slots plus exact gradients for
/// every parameter. Errors when the batch has no labeled position.
pub fn loss_and_grad(params: &ModelParams, batch: &[SubwordSequence]) -> Result<(f64, Gradients)> {
    let fwd_pass = forward(params, batch)?;
    let counted: usize = batch.iter().map(|s| s.label_slots().count()).sum();
    if counted == 0 {
        return Err(Error::Data(
            "batch has no labeled positions to train on".into(),
        ));
    }

    let h = params.dims.hidden;
    let mut acc = GradAcc::zeros(params.dims);
    let mut loss = 0.0f64;

    for (seq_idx, seq) in batch.iter().enumerate() {
        let t_len = seq.ids.len();
        let logits = &fwd_pass.logits[seq_idx];
        let cache = &fwd_pass.caches[seq_idx];

        // d loss / d logits, then split into the two hidden streams
        let mut dh_fwd = vec![0.0f64; t_len * h];
        let mut dh_bwd = vec![0.0f64; t_len * h];
        for (t, gold) in seq.label_slots() {
            let probs = softmax(&logits[t]);
            loss -= probs[gold.index()].max(f64::MIN_POSITIVE).ln();
            for class in 0..NUM_CLASSES {
                let mut dlogit = probs[class];
                if class == gold.index() {
                    dlogit -= 1.0;
                }
                dlogit /= counted as f64;
                acc.proj_bias[class] += dlogit;
                let row = &params.proj_weight[class * 2 * h..(class + 1) * 2 * h];
                let grow = &mut acc.proj_weight[class * 2 * h..(class + 1) * 2 * h];
                for j in 0..h {
                    grow[j] += dlogit * cache.fwd.hidden[t * h + j];
                    grow[h + j] += dlogit * cache.bwd.hidden[t * h + j];
                    dh_fwd[t * h + j] += dlogit * row[j] as f64;
                    dh_bwd[t * h + j] += dlogit * row[h + j] as f64;
                }
            }
        }

        let order: Vec<usize> = (0..t_len).collect();
        backprop_direction(
            params,
            &params.fwd,
            seq,
            &cache.fwd,
            &dh_fwd,
            &order,
            &mut acc.fwd,
            &mut acc.embedding,
        );
        let rev: Vec<usize> = (0..t_len).rev().collect();
        backprop_direction(
            params,
            &params.bwd,
            seq,
            &cache.bwd,
            &dh_bwd,
            &rev,
            &mut acc.bwd,
            &mut acc.embedding,
        );
    }

    Ok((loss / counted as f64, acc.into_grads(params.dims)))
}

/// f64 accumulation buffers, converted to the f32 gradient layout at the end.
struct GradAcc {
    embedding: Vec<f64>,
    fwd: DirGradAcc,
    bwd: DirGradAcc,
    proj_weight: Vec<f64>,
    proj_bias: Vec<f64>,
}

struct DirGradAcc {
    w_input: Vec<f64>,
    w_recurrent: Vec<f64>,
    bias: Vec<f64>,
}

impl GradAcc {
    fn zeros(dims: Dims) -> GradAcc {
        let dir = || DirGradAcc {
            w_input: vec![0.0; 4 * dims.hidden * dims.embed],
            w_recurrent: vec![0.0; 4 * dims.hidden * dims.hidden],
            bias: vec![0.0; 4 * dims.hidden],
        };
        GradAcc {
            embedding: vec![0.0; dims.vocab * dims.embed],
            fwd: dir(),
            bwd: dir(),
            proj_weight: vec![0.0; NUM_CLASSES * 2 * dims.hidden],
            proj_bias: vec![0.0; NUM_CLASSES],
        }
    }

    fn into_grads(self, dims: Dims) -> Gradients {
        let dir = |d: DirGradAcc| LstmWeights {
            w_input: d.w_input.iter().map(|&v| v as f32).collect(),
            w_recurrent: d.w_recurrent.iter().map(|&v| v as f32).collect(),
            bias: d.bias.iter().map(|&v| v as f32).collect(),
        };
        Gradients {
            dims,
            embedding: self.embedding.iter().map(|&v| v as f32).collect(),
            fwd: dir(self.fwd),
            bwd: dir(self.bwd),
            proj_weight: self.proj_weight.iter().map(|&v| v as f32).collect(),
            proj_bias: self.proj_bias.iter().map(|&v| v as f32).collect(),
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn backprop_direction(
    params: &ModelParams,
    w: &LstmWeights,
    seq: &SubwordSequence,
    cache: &DirCache,
    dh_pos: &[f64],
    order: &[usize],
    acc: &mut DirGradAcc,
    d_embedding: &mut [f64],
) {
    let Dims {
        embed: d,
        hidden: h,
        ..
    } = params.dims;
    let mut dh_carry = vec![0.0f64; h];
    let mut dc_carry = vec![0.0f64; h];
    let mut dpre = vec![0.0f64; 4 * h];
    // walk the processing order backwards
    for (step_idx, &t) in order.iter().enumerate().rev() {
        if !seq.mask[t] {
            // identity carry-through: gradients pass to the previous state;
            // pad logits receive no loss so dh_pos is zero here
            continue;
        }
        // previous state along the processing order
        let prev_t = if step_idx == 0 {
            None
        } else {
            Some(order[step_idx - 1])
        };
        let (h_prev, c_prev): (&[f64], &[f64]) = match prev_t {
            Some(p) => (
                &cache.hidden[p * h..(p + 1) * h],
                &cache.cell[p * h..(p + 1) * h],
            ),
            None => (&[], &[]),
        };

        for j in 0..h {
            let gi = cache.gates[t * 4 * h + j];
            let gf = cache.gates[t * 4 * h + h + j];
            let gg = cache.gates[t * 4 * h + 2 * h + j];
            let go = cache.gates[t * 4 * h + 3 * h + j];
            let ct = cache.cell_tanh[t * h + j];
            let cp = if c_prev.is_empty() { 0.0 } else { c_prev[j] };

            let dh = dh_pos[t * h + j] + dh_carry[j];
            let dgo = dh * ct;
            let dc = dh * go * (1.0 - ct * ct) + dc_carry[j];
            let dgi = dc * gg;
            let dgf = dc * cp;
            let dgg = dc * gi;

            dpre[j] = dgi * gi * (1.0 - gi);
            dpre[h + j] = dgf * gf * (1.0 - gf);
            dpre[2 * h + j] = dgg * (1.0 - gg * gg);
            dpre[3 * h + j] = dgo * go * (1.0 - go);

            dc_carry[j] = dc * gf;
        }

        let id = seq.ids[t] as usize;
        let x = &params.embedding[id * d..(id + 1) * d];
        let de = &mut d_embedding[id * d..(id + 1) * d];
        dh_carry.iter_mut().for_each(|v| *v = 0.0);
        for r in 0..4 * h {
            let g = dpre[r];
            acc.bias[r] += g;
            let wi_acc = &mut acc.w_input[r * d..(r + 1) * d];
            let wi = &w.w_input[r * d..(r + 1) * d];
            for j in 0..d {
                wi_acc[j] += g * x[j] as f64;
                de[j] += g * wi[j] as f64;
            }
            let wr_acc = &mut acc.w_recurrent[r * h..(r + 1) * h];
            let wr = &w.w_recurrent[r * h..(r + 1) * h];
            if !h_prev.is_empty() {
                for j in 0..h {
                    wr_acc[j] += g * h_prev[j];
                    dh_carry[j] += g * wr[j] as f64;
                }
            } else {
                for j in 0..h {
                    dh_carry[j] += g * wr[j] as f64;
                }
            }
        }
    }
}

pub(crate) fn softmax(logits: &[f64; NUM_CLASSES]) -> [f64; NUM_CLASSES] {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out = [0.0; NUM_CLASSES];
    let mut sum = 0.0;
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = (l - max).exp();
        sum += *o;
    }
    for o in &mut out {
        *o /= sum;
    }
    out
}

/// Argmax class at every label slot of every sequence, in stream order.
/// Ties go to the lowest class index.
pub fn predict(params: &ModelParams, sequences: &[SubwordSequence]) -> Result<Vec<PunctClass>> {
    let mut out = Vec::new();
    for seq in sequences {
        let fwd_pass = forward(params, std::slice::from_ref(seq))?;
        for (t, _) in seq.label_slots() {
            out.push(argmax_class(&fwd_pass.logits[0][t]));
        }
    }
    Ok(out)
}

pub(crate) fn argmax_class(logits: &[f64; NUM_CLASSES]) -> PunctClass {
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate().skip(1) {
        if v > logits[best] {
            best = i;
        }
    }
    PunctClass::from_index(best).expect("class index in range")
}
