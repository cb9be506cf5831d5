//! Simulated ASR noise on subword piece streams: substitution, deletion,
//! and insertion of unknown tokens.
//!
//! Each piece is perturbed with probability `alpha`; a perturbation is a
//! substitution with probability `p_sub`, a deletion with `p_del`, and
//! otherwise an insertion (the remainder `1 - p_sub - p_del`). Substitution
//! replaces the piece id with the unknown id but keeps its label; deletion
//! drops piece and label; insertion emits an unknown piece labeled `O`
//! before the current piece, which is then copied unchanged.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::corpus::{PunctClass, SeqLabel};
use crate::subword::UNK_ID;
use crate::{Error, Result};

/// Augmentation parameters. The insertion probability is not stored: it is
/// the remainder after substitution and deletion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentConfig {
    pub alpha: f64,
    pub p_sub: f64,
    pub p_del: f64,
    pub seed: u64,
}

impl AugmentConfig {
    pub fn new(alpha: f64, p_sub: f64, p_del: f64, seed: u64) -> Result<AugmentConfig> {
        let cfg = AugmentConfig {
            alpha,
            p_sub,
            p_del,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("alpha", self.alpha),
            ("sub_prob", self.p_sub),
            ("del_prob", self.p_del),
        ] {
            if !(0.0..=1.0).contains(&p) || !p.is_finite() {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if self.p_sub + self.p_del > 1.0 {
            return Err(Error::Config(format!(
                "sub_prob + del_prob must not exceed 1, got {}",
                self.p_sub + self.p_del
            )));
        }
        Ok(())
    }

    pub fn p_ins(&self) -> f64 {
        1.0 - self.p_sub - self.p_del
    }
}

/// Applies the three noise operations to one unframed piece stream.
/// Deterministic given the input and the RNG state.
pub fn augment_stream(
    pieces: &[(u32, SeqLabel)],
    cfg: &AugmentConfig,
    rng: &mut ChaCha12Rng,
) -> Result<Vec<(u32, SeqLabel)>> {
    cfg.validate()?;
    let mut out = Vec::with_capacity(pieces.len());
    for &(id, label) in pieces {
        if rng.random::<f64>() >= cfg.alpha {
            out.push((id, label));
            continue;
        }
        let v = rng.random::<f64>();
        if v < cfg.p_sub {
            out.push((UNK_ID, label));
        } else if v < cfg.p_sub + cfg.p_del {
            // piece and label dropped
        } else {
            out.push((UNK_ID, Some(PunctClass::O)));
            out.push((id, label));
        }
    }
    Ok(out)
}

/// Augments every document stream with an independent RNG substream derived
/// from the config seed and the document index, so results do not depend on
/// iteration order.
pub fn augment_dataset(
    streams: &[Vec<(u32, SeqLabel)>],
    cfg: &AugmentConfig,
) -> Result<Vec<Vec<(u32, SeqLabel)>>> {
    cfg.validate()?;
    streams
        .iter()
        .enumerate()
        .map(|(idx, stream)| {
            let mut rng = substream_rng(cfg.seed, idx as u64);
            augment_stream(stream, cfg, &mut rng)
        })
        .collect()
}

/// RNG for one document substream.
pub fn substream_rng(seed: u64, index: u64) -> ChaCha12Rng {
    let mut bytes = [0u8; 32];
    bytes[..8].copy_from_slice(&seed.to_le_bytes());
    bytes[8..16].copy_from_slice(&index.to_le_bytes());
    bytes[16..24].copy_from_slice(b"augment\0");
    ChaCha12Rng::from_seed(bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(n: usize) -> Vec<(u32, SeqLabel)> {
        (0..n)
            .map(|i| {
                let label = match i % 4 {
                    0 => None,
                    1 => Some(PunctClass::O),
                    2 => Some(PunctClass::Period),
                    _ => Some(PunctClass::Comma),
                };
                (10 + (i % 50) as u32, label)
            })
            .collect()
    }

    fn rng(seed: u64) -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(seed)
    }

    #[test]
    fn alpha_zero_is_identity() {
        let cfg = AugmentConfig::new(0.0, 0.4, 0.4, 9).unwrap();
        let input = stream(500);
        let out = augment_stream(&input, &cfg, &mut rng(9)).unwrap();
        assert_eq!(out, input);
    }

    #[test]
    fn all_substitution_preserves_labels_and_length() {
        let cfg = AugmentConfig::new(1.0, 1.0, 0.0, 9).unwrap();
        let input = stream(200);
        let out = augment_stream(&input, &cfg, &mut rng(1)).unwrap();
        assert_eq!(out.len(), input.len());
        for (got, want) in out.iter().zip(&input) {
            assert_eq!(got.0, UNK_ID);
            assert_eq!(got.1, want.1);
        }
    }

    #[test]
    fn all_deletion_empties_the_stream() {
        let cfg = AugmentConfig::new(1.0, 0.0, 1.0, 9).unwrap();
        let out = augment_stream(&stream(200), &cfg, &mut rng(2)).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn all_insertion_doubles_with_o_labels() {
        let cfg = AugmentConfig::new(1.0, 0.0, 0.0, 9).unwrap();
        let input = stream(100);
        let out = augment_stream(&input, &cfg, &mut rng(3)).unwrap();
        assert_eq!(out.len(), 2 * input.len());
        for (i, &(id, label)) in input.iter().enumerate() {
            assert_eq!(out[2 * i], (UNK_ID, Some(PunctClass::O)));
            assert_eq!(out[2 * i + 1], (id, label));
        }
    }

    #[test]
    fn invalid_config_rejected() {
        assert!(AugmentConfig::new(0.2, 0.7, 0.5, 0).is_err());
        assert!(AugmentConfig::new(1.5, 0.1, 0.1, 0).is_err());
        assert!(AugmentConfig::new(0.2, -0.1, 0.1, 0).is_err());
    }

    #[test]
    fn deterministic_per_config() {
        let cfg = AugmentConfig::new(0.3, 0.4, 0.4, 77).unwrap();
        let input = stream(1000);
        let a = augment_stream(&input, &cfg, &mut rng(77)).unwrap();
        let b = augment_stream(&input, &cfg, &mut rng(77)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dataset_substreams_are_order_independent() {
        let cfg = AugmentConfig::new(0.25, 0.4, 0.4, 5).unwrap();
        let docs = vec![stream(80), stream(120), stream(40)];
        let all = augment_dataset(&docs, &cfg).unwrap();
        // augmenting document 1 alone (same index) gives the same result
        let mut solo_rng = substream_rng(cfg.seed, 1);
        let solo = augment_stream(&docs[1], &cfg, &mut solo_rng).unwrap();
        assert_eq!(all[1], solo);
    }

    #[test]
    fn length_law_holds() {
        // output length = input - deletions + insertions, checked by tallying
        let cfg = AugmentConfig::new(0.5, 0.3, 0.3, 13).unwrap();
        let input = stream(5_000);
        let out = augment_stream(&input, &cfg, &mut rng(13)).unwrap();

        // replay the rng to tally operations independently
        let mut replay = rng(13);
        let (mut subs, mut dels, mut inss) = (0usize, 0usize, 0usize);
        for _ in &input {
            if replay.random::<f64>() >= cfg.alpha {
                continue;
            }
            let v = replay.random::<f64>();
            if v < cfg.p_sub {
                subs += 1;
            } else if v < cfg.p_sub + cfg.p_del {
                dels += 1;
            } else {
                inss += 1;
            }
        }
        assert_eq!(out.len(), input.len() - dels + inss);
        assert!(subs > 0 && dels > 0 && inss > 0);
    }

    #[test]
    fn modification_rates_converge() {
        // n = 1e5 at the ablation operating point: alpha 0.20, rates 0.4/0.4
        let n = 100_000;
        let cfg = AugmentConfig::new(0.2, 0.4, 0.4, 20).unwrap();
        let input = stream(n);
        let out = augment_stream(&input, &cfg, &mut rng(20)).unwrap();

        let mut replay = rng(20);
        let (mut subs, mut dels, mut inss) = (0usize, 0usize, 0usize);
        for _ in &input {
            if replay.random::<f64>() >= cfg.alpha {
                continue;
            }
            let v = replay.random::<f64>();
            if v < cfg.p_sub {
                subs += 1;
            } else if v < cfg.p_sub + cfg.p_del {
                dels += 1;
            } else {
                inss += 1;
            }
        }
        assert_eq!(out.len(), input.len() - dels + inss);

        let modified = (subs + dels + inss) as f64 / n as f64;
        assert!((0.195..=0.205).contains(&modified), "modified {modified}");
        let total = (subs + dels + inss) as f64;
        for (share, want) in [
            (subs as f64 / total, 0.4),
            (dels as f64 / total, 0.4),
            (inss as f64 / total, 0.2),
        ] {
            assert!((share - want).abs() <= 0.01, "share {share} vs {want}");
        }
    }

    #[test]
    fn labels_only_change_by_deletion_or_insertion() {
        // exact conservation law: per-class output count equals the input
        // count minus deletions of that class, plus insertions for O only
        let cfg = AugmentConfig::new(0.4, 0.5, 0.2, 31).unwrap();
        let input = stream(2_000);
        let out = augment_stream(&input, &cfg, &mut rng(31)).unwrap();

        let mut replay = rng(31);
        let mut deleted = std::collections::HashMap::new();
        let mut deleted_ignore = 0usize;
        let mut insertions = 0usize;
        for &(_, label) in &input {
            if replay.random::<f64>() >= cfg.alpha {
                continue;
            }
            let v = replay.random::<f64>();
            if v < cfg.p_sub {
                // substitution keeps the label
            } else if v < cfg.p_sub + cfg.p_del {
                match label {
                    Some(class) => *deleted.entry(class).or_insert(0usize) += 1,
                    None => deleted_ignore += 1,
                }
            } else {
                insertions += 1;
            }
        }

        let count =
            |s: &[(u32, SeqLabel)], label: SeqLabel| s.iter().filter(|(_, l)| *l == label).count();
        for class in PunctClass::ALL {
            let want = count(&input, Some(class)) - deleted.get(&class).copied().unwrap_or(0)
                + if class == PunctClass::O {
                    insertions
                } else {
                    0
                };
            assert_eq!(count(&out, Some(class)), want, "class {class}");
        }
        assert_eq!(count(&out, None), count(&input, None) - deleted_ignore);
    }
}
