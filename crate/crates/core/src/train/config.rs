//! Flat `key=value` run configuration files.
//!
//! Recognized keys: `lr`, `batch_size`, `epochs`, `seq_len`, `shuffle_seed`,
//! `alpha`, `sub_prob`, `del_prob`, `seed`, `emb_dim`, `hidden_dim`,
//! `num_merges`, plus the paths `train_tsv`, `dev_tsv`, `test_tsv`,
//! `bpe_model`, `out_dir`. Unknown keys are errors. Blank lines and lines
//! starting with `#` are skipped.

use std::fs;
use std::path::{Path, PathBuf};

use crate::augment::AugmentConfig;
use crate::{Error, Result};

use super::TrainConfig;

/// A parsed run configuration: hyperparameters plus file locations.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub num_merges: usize,
    pub train_tsv: Option<PathBuf>,
    pub dev_tsv: Option<PathBuf>,
    /// Named test sets; a bare `test_tsv` path gets the name `test`.
    pub test_sets: Vec<(String, PathBuf)>,
    pub bpe_model: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        RunConfig {
            train: TrainConfig::default(),
            num_merges: 4000,
            train_tsv: None,
            dev_tsv: None,
            test_sets: Vec::new(),
            bpe_model: None,
            out_dir: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path)?;
        RunConfig::parse(&text)
    }

    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        let mut alpha: Option<f64> = None;
        let mut sub_prob = 0.4;
        let mut del_prob = 0.4;

        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(lineno, format!("expected key=value, got {raw:?}")))?;
            let key = key.trim();
            let value = value.trim();
            match key {
                "lr" => cfg.train.learning_rate = num(value, key, lineno)?,
                "batch_size" => cfg.train.batch_size = num(value, key, lineno)?,
                "epochs" => cfg.train.epochs = num(value, key, lineno)?,
                "seq_len" => cfg.train.seq_len = num(value, key, lineno)?,
                "shuffle_seed" => cfg.train.shuffle_seed = num(value, key, lineno)?,
                "seed" => cfg.train.seed = num(value, key, lineno)?,
                "emb_dim" => cfg.train.emb_dim = num(value, key, lineno)?,
                "hidden_dim" => cfg.train.hidden_dim = num(value, key, lineno)?,
                "alpha" => alpha = Some(num(value, key, lineno)?),
                "sub_prob" => sub_prob = num(value, key, lineno)?,
                "del_prob" => del_prob = num(value, key, lineno)?,
                "num_merges" => cfg.num_merges = num(value, key, lineno)?,
                "train_tsv" => cfg.train_tsv = Some(PathBuf::from(value)),
                "dev_tsv" => cfg.dev_tsv = Some(PathBuf::from(value)),
                "test_tsv" => cfg.test_sets = parse_test_sets(value),
                "bpe_model" => cfg.bpe_model = Some(PathBuf::from(value)),
                "out_dir" => cfg.out_dir = Some(PathBuf::from(value)),
                _ => {
                    return Err(Error::Config(format!(
                        "unknown config key {key:?} on line {lineno}"
                    )))
                }
            }
        }

        if let Some(alpha) = alpha {
            cfg.train.augment = Some(AugmentConfig::new(
                alpha,
                sub_prob,
                del_prob,
                cfg.train.seed,
            )?);
        }
        cfg.train.validate()?;
        Ok(cfg)
    }

    /// One-line echo of the hyperparameters, stored in checkpoints.
    pub fn echo(&self) -> String {
        let t = &self.train;
        let aug = match &t.augment {
            Some(a) => format!(
                " alpha={} sub_prob={} del_prob={}",
                a.alpha, a.p_sub, a.p_del
            ),
            None => String::new(),
        };
        format!(
            "lr={} batch_size={} epochs={} seq_len={} emb_dim={} hidden_dim={} seed={} shuffle_seed={} num_merges={}{aug}",
            t.learning_rate,
            t.batch_size,
            t.epochs,
            t.seq_len,
            t.emb_dim,
            t.hidden_dim,
            t.seed,
            t.shuffle_seed,
            self.num_merges,
        )
    }
}

// `test_tsv` accepts either a bare path or a comma-separated list of
// `name:path` entries.
fn parse_test_sets(value: &str) -> Vec<(String, PathBuf)> {
    if !value.contains(':') {
        return vec![("test".to_string(), PathBuf::from(value))];
    }
    value
        .split(',')
        .filter(|entry| !entry.trim().is_empty())
        .map(|entry| match entry.trim().split_once(':') {
            Some((name, path)) => (name.trim().to_string(), PathBuf::from(path.trim())),
            None => ("test".to_string(), PathBuf::from(entry.trim())),
        })
        .collect()
}

fn num<T: std::str::FromStr>(value: &str, key: &str, lineno: usize) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::parse(lineno, format!("bad value {value:?} for key {key:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_hyperparameters() {
        let cfg = RunConfig::parse("").unwrap();
        assert_eq!(cfg.train.batch_size, 8);
        assert_eq!(cfg.train.epochs, 10);
        assert_eq!(cfg.train.seq_len, 256);
        assert_eq!(cfg.train.beta1, 0.9);
        assert_eq!(cfg.train.beta2, 0.999);
        assert_eq!(cfg.train.epsilon, 1e-8);
        assert_eq!(cfg.num_merges, 4000);
        assert!(cfg.train.augment.is_none());
    }

    #[test]
    fn full_config_parses() {
        let text = "\
# run settings
lr = 0.001
batch_size=4
epochs=3
seq_len=64
seed=11
shuffle_seed=12
emb_dim=32
hidden_dim=32
alpha=0.2
sub_prob=0.4
del_prob=0.4
num_merges=500
train_tsv=data/train.tsv
dev_tsv=data/dev.tsv
test_tsv=news:data/news.tsv, asr:data/asr.tsv
bpe_model=out/model.bpe
out_dir=out
";
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.train.learning_rate, 0.001);
        assert_eq!(cfg.train.batch_size, 4);
        let aug = cfg.train.augment.unwrap();
        assert_eq!(aug.alpha, 0.2);
        assert_eq!(aug.seed, 11);
        assert_eq!(
            cfg.test_sets,
            vec![
                ("news".to_string(), PathBuf::from("data/news.tsv")),
                ("asr".to_string(), PathBuf::from("data/asr.tsv")),
            ]
        );
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = RunConfig::parse("warmup=10\n").unwrap_err();
        assert!(err.to_string().contains("warmup"), "{err}");
    }

    #[test]
    fn malformed_line_reports_number() {
        let err = RunConfig::parse("lr=0.001\nnonsense\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn bad_augment_probabilities_are_rejected() {
        assert!(RunConfig::parse("alpha=0.2\nsub_prob=0.8\ndel_prob=0.5\n").is_err());
    }

    #[test]
    fn bare_test_path_gets_default_name() {
        let cfg = RunConfig::parse("test_tsv=data/test.tsv\n").unwrap();
        assert_eq!(
            cfg.test_sets,
            vec![("test".to_string(), PathBuf::from("data/test.tsv"))]
        );
    }

    #[test]
    fn alpha_zero_still_builds_identity_augment() {
        let cfg = RunConfig::parse("alpha=0\n").unwrap();
        assert_eq!(cfg.train.augment.unwrap().alpha, 0.0);
    }
}
