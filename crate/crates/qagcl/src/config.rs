//! Training configuration: defaults, flat-file parsing, and hashing.
//!
//! One flat `key = value` format serves config files and experiment plans.
//! Unknown keys are hard errors so a typo in a hyperparameter name cannot
//! silently fall back to a default. The config hash is a truncated SHA-256
//! over canonically sorted `key=value` lines, which makes it independent of
//! key order in the source file.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::augment::AugOp;
use crate::error::{Error, Result};

/// Which scoring model a run trains or evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Qagcl,
    LightGcn,
    BprMf,
    UMean,
    IMean,
}

impl ModelKind {
    /// True when the model goes through the training loop at all.
    pub fn is_trained(self) -> bool {
        !matches!(self, ModelKind::UMean | ModelKind::IMean)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Qagcl => "qagcl",
            ModelKind::LightGcn => "lightgcn",
            ModelKind::BprMf => "bprmf",
            ModelKind::UMean => "umean",
            ModelKind::IMean => "imean",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "qagcl" => Ok(ModelKind::Qagcl),
            "lightgcn" => Ok(ModelKind::LightGcn),
            "bprmf" | "bpr-mf" | "bpr_mf" => Ok(ModelKind::BprMf),
            "umean" => Ok(ModelKind::UMean),
            "imean" => Ok(ModelKind::IMean),
            other => Err(Error::Config(format!(
                "unknown model {other:?}, expected qagcl, lightgcn, bprmf, umean or imean"
            ))),
        }
    }
}

/// Every tunable of the pipeline, from thresholding to optimization.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Response-time threshold in seconds; `rt < gamma` is a positive.
    pub gamma: f64,
    /// Minimum interactions per user during core filtering.
    pub core: usize,
    /// Fraction of each user's positives held out for test.
    pub split_ratio: f64,
    /// Propagation depth L.
    pub layers: usize,
    /// Embedding width D.
    pub embed_dim: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// InfoNCE temperature.
    pub tau: f64,
    /// Contrastive loss weight.
    pub lambda1: f64,
    /// L2 weight on batch-touched embedding rows.
    pub lambda2: f64,
    /// Distance cutoff for the HD view, fraction of the longest edge.
    pub kappa: f64,
    /// Dropout rate for ED and ND views.
    pub rho: f64,
    pub seed: u64,
    /// Operators behind the two augmented views.
    pub aug_a: AugOp,
    pub aug_b: AugOp,
    /// Rebuild stochastic masks every epoch instead of once per run.
    pub resample_ed_per_epoch: bool,
    /// Contrast users and services in one pooled set instead of per type.
    pub infonce_mixed: bool,
    /// Cutoffs reported by evaluation.
    pub ks: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            gamma: 0.05,
            core: 10,
            split_ratio: 0.2,
            layers: 3,
            embed_dim: 64,
            lr: 1e-3,
            epochs: 100,
            batch_size: 2048,
            tau: 0.2,
            lambda1: 0.5,
            lambda2: 1e-6,
            kappa: 0.3,
            rho: 0.2,
            seed: 42,
            aug_a: AugOp::Hd,
            aug_b: AugOp::Ed,
            resample_ed_per_epoch: false,
            infonce_mixed: false,
            ks: vec![20, 40],
        }
    }
}

pub const CONFIG_KEYS: &[&str] = &[
    "aug_a",
    "aug_b",
    "batch_size",
    "core",
    "embed_dim",
    "epochs",
    "gamma",
    "infonce_mixed",
    "kappa",
    "ks",
    "lambda1",
    "lambda2",
    "layers",
    "lr",
    "resample_ed_per_epoch",
    "rho",
    "seed",
    "split_ratio",
    "tau",
];

impl TrainConfig {
    /// Applies one `key = value` assignment; unknown keys and unparsable
    /// values are errors.
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::Config(format!("bad value for {what}: {value:?}"));
        match key {
            "gamma" => self.gamma = value.parse().map_err(|_| bad("gamma"))?,
            "core" => self.core = value.parse().map_err(|_| bad("core"))?,
            "split_ratio" => self.split_ratio = value.parse().map_err(|_| bad("split_ratio"))?,
            "layers" => self.layers = value.parse().map_err(|_| bad("layers"))?,
            "embed_dim" => self.embed_dim = value.parse().map_err(|_| bad("embed_dim"))?,
            "lr" => self.lr = value.parse().map_err(|_| bad("lr"))?,
            "epochs" => self.epochs = value.parse().map_err(|_| bad("epochs"))?,
            "batch_size" => self.batch_size = value.parse().map_err(|_| bad("batch_size"))?,
            "tau" => self.tau = value.parse().map_err(|_| bad("tau"))?,
            "lambda1" => self.lambda1 = value.parse().map_err(|_| bad("lambda1"))?,
            "lambda2" => self.lambda2 = value.parse().map_err(|_| bad("lambda2"))?,
            "kappa" => self.kappa = value.parse().map_err(|_| bad("kappa"))?,
            "rho" => self.rho = value.parse().map_err(|_| bad("rho"))?,
            "seed" => self.seed = value.parse().map_err(|_| bad("seed"))?,
            "aug_a" => self.aug_a = value.parse()?,
            "aug_b" => self.aug_b = value.parse()?,
            "resample_ed_per_epoch" => {
                self.resample_ed_per_epoch = parse_bool(value).ok_or_else(|| bad(key))?
            }
            "infonce_mixed" => self.infonce_mixed = parse_bool(value).ok_or_else(|| bad(key))?,
            "ks" => self.ks = parse_usize_list(value).ok_or_else(|| bad("ks"))?,
            other => {
                return Err(Error::Config(format!(
                    "unknown config key {other:?} (known keys: {})",
                    CONFIG_KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Hard preconditions; grid membership is not enforced, explicit values
    /// always win.
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(msg.to_string()))
            }
        };
        check(self.gamma > 0.0, "gamma must be positive")?;
        check(self.core >= 1, "core must be at least 1")?;
        check(
            self.split_ratio > 0.0 && self.split_ratio < 1.0,
            "split_ratio must be in (0, 1)",
        )?;
        check(self.embed_dim >= 1, "embed_dim must be at least 1")?;
        check(self.lr > 0.0 && self.lr.is_finite(), "lr must be positive")?;
        check(self.batch_size >= 1, "batch_size must be at least 1")?;
        check(self.tau > 0.0, "tau must be positive")?;
        check(self.lambda1 >= 0.0, "lambda1 must be nonnegative")?;
        check(self.lambda2 >= 0.0, "lambda2 must be nonnegative")?;
        check(
            (0.0..=1.0).contains(&self.kappa),
            "kappa must be in [0, 1]",
        )?;
        check((0.0..1.0).contains(&self.rho), "rho must be in [0, 1)")?;
        check(!self.ks.is_empty(), "ks must not be empty")?;
        check(self.ks.iter().all(|&k| k >= 1), "every K must be at least 1")?;
        Ok(())
    }

    /// Canonical sorted `key=value` lines covering every key.
    pub fn canonical_lines(&self) -> String {
        let mut pairs: Vec<(String, String)> = vec![
            ("aug_a".into(), self.aug_a.to_string()),
            ("aug_b".into(), self.aug_b.to_string()),
            ("batch_size".into(), self.batch_size.to_string()),
            ("core".into(), self.core.to_string()),
            ("embed_dim".into(), self.embed_dim.to_string()),
            ("epochs".into(), self.epochs.to_string()),
            ("gamma".into(), self.gamma.to_string()),
            ("infonce_mixed".into(), self.infonce_mixed.to_string()),
            ("kappa".into(), self.kappa.to_string()),
            (
                "ks".into(),
                self.ks
                    .iter()
                    .map(|k| k.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            ),
            ("lambda1".into(), self.lambda1.to_string()),
            ("lambda2".into(), self.lambda2.to_string()),
            ("layers".into(), self.layers.to_string()),
            ("lr".into(), self.lr.to_string()),
            (
                "resample_ed_per_epoch".into(),
                self.resample_ed_per_epoch.to_string(),
            ),
            ("rho".into(), self.rho.to_string()),
            ("seed".into(), self.seed.to_string()),
            ("split_ratio".into(), self.split_ratio.to_string()),
            ("tau".into(), self.tau.to_string()),
        ];
        pairs.sort();
        pairs
            .into_iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    /// Truncated SHA-256 of the canonical lines, 16 hex characters.
    pub fn config_hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_lines().as_bytes());
        hex_prefix(&digest, 16)
    }

    /// Rewrites the config so training realizes a baseline:
    /// LightGCN drops the contrastive term and neutralizes both
    /// augmentations; BPR-MF additionally removes propagation.
    pub fn apply_model_preset(&mut self, model: ModelKind) {
        match model {
            ModelKind::Qagcl | ModelKind::UMean | ModelKind::IMean => {}
            ModelKind::LightGcn => {
                self.lambda1 = 0.0;
                self.kappa = 1.0;
                self.rho = 0.0;
            }
            ModelKind::BprMf => {
                self.lambda1 = 0.0;
                self.kappa = 1.0;
                self.rho = 0.0;
                self.layers = 0;
            }
        }
    }
}

pub fn hex_prefix(bytes: &[u8], chars: usize) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s.truncate(chars);
    s
}

fn parse_bool(v: &str) -> Option<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Some(true),
        "false" | "0" | "no" => Some(false),
        _ => None,
    }
}

pub fn parse_usize_list(v: &str) -> Option<Vec<usize>> {
    let items: Vec<usize> = v
        .split(',')
        .map(|t| t.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .ok()?;
    if items.is_empty() {
        None
    } else {
        Some(items)
    }
}

pub fn parse_u64_list(v: &str) -> Option<Vec<u64>> {
    let items: Vec<u64> = v
        .split(',')
        .map(|t| t.trim().parse::<u64>())
        .collect::<std::result::Result<_, _>>()
        .ok()?;
    if items.is_empty() {
        None
    } else {
        Some(items)
    }
}

/// A parsed config file: the training config plus optional plan-level keys
/// (`name`, `model`, `seeds`) used by the experiment drivers.
#[derive(Debug, Clone)]
pub struct ConfigFile {
    pub config: TrainConfig,
    pub name: Option<String>,
    pub model: Option<ModelKind>,
    pub seeds: Option<Vec<u64>>,
}

/// Parses a flat config file: `key = value` per line, `#` comments, blank
/// lines ignored.
pub fn parse_config_file(path: &Path) -> Result<ConfigFile> {
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = ConfigFile {
        config: TrainConfig::default(),
        name: None,
        model: None,
        seeds: None,
    };
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| Error::format(path, i + 1, format!("expected key = value, got {raw:?}")))?;
        match key {
            "name" => out.name = Some(value.to_string()),
            "model" => out.model = Some(value.parse()?),
            "seeds" => {
                out.seeds = Some(parse_u64_list(value).ok_or_else(|| {
                    Error::format(path, i + 1, format!("bad seed list {value:?}"))
                })?)
            }
            _ => out
                .config
                .apply_kv(key, value)
                .map_err(|e| Error::format(path, i + 1, e.to_string()))?,
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn defaults_validate() {
        TrainConfig::default().validate().unwrap();
    }

    #[test]
    fn hash_is_stable_under_key_reordering() {
        let mut a = tempfile::NamedTempFile::new().unwrap();
        writeln!(a, "tau = 0.1\nlayers = 2").unwrap();
        let mut b = tempfile::NamedTempFile::new().unwrap();
        writeln!(b, "layers = 2\n# comment\n\ntau = 0.1").unwrap();
        let ca = parse_config_file(a.path()).unwrap().config;
        let cb = parse_config_file(b.path()).unwrap().config;
        assert_eq!(ca.config_hash(), cb.config_hash());
        assert_eq!(ca.config_hash().len(), 16);
    }

    #[test]
    fn hash_changes_with_any_value() {
        let base = TrainConfig::default();
        let mut other = base.clone();
        other.rho = 0.25;
        assert_ne!(base.config_hash(), other.config_hash());
    }

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "tau = 0.2\nlearning_rate = 0.01").unwrap();
        let err = parse_config_file(f.path()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains(":2:"), "{msg}");
        assert!(msg.contains("unknown config key"), "{msg}");
    }

    #[test]
    fn plan_keys_parse() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(
            f,
            "name = warm-start\nmodel = lightgcn\nseeds = 1, 2, 3\ngamma = 0.05"
        )
        .unwrap();
        let cf = parse_config_file(f.path()).unwrap();
        assert_eq!(cf.name.as_deref(), Some("warm-start"));
        assert_eq!(cf.model, Some(ModelKind::LightGcn));
        assert_eq!(cf.seeds, Some(vec![1, 2, 3]));
    }

    #[test]
    fn apply_kv_covers_every_key() {
        let mut cfg = TrainConfig::default();
        for key in CONFIG_KEYS {
            let value = match *key {
                "aug_a" | "aug_b" => "nd",
                "ks" => "5,10",
                "resample_ed_per_epoch" | "infonce_mixed" => "true",
                "gamma" | "split_ratio" | "lr" | "tau" | "lambda1" | "lambda2" | "kappa"
                | "rho" => "0.125",
                _ => "7",
            };
            cfg.apply_kv(key, value).unwrap();
        }
        assert_eq!(cfg.ks, vec![5, 10]);
        assert_eq!(cfg.aug_b, AugOp::Nd);
        assert!(cfg.infonce_mixed);
        assert!(cfg.apply_kv("tau", "not-a-number").is_err());
    }

    #[test]
    fn validate_rejects_out_of_range() {
        let cases: &[(&str, &str)] = &[
            ("gamma", "0"),
            ("tau", "0"),
            ("rho", "1.0"),
            ("kappa", "1.5"),
            ("split_ratio", "1.0"),
            ("lambda1", "-0.1"),
            ("ks", "0"),
        ];
        for (key, value) in cases {
            let mut cfg = TrainConfig::default();
            if cfg.apply_kv(key, value).is_ok() {
                assert!(cfg.validate().is_err(), "{key}={value} should not validate");
            }
        }
    }

    #[test]
    fn model_presets_reduce_the_objective() {
        let mut lg = TrainConfig::default();
        lg.apply_model_preset(ModelKind::LightGcn);
        assert_eq!((lg.lambda1, lg.kappa, lg.rho), (0.0, 1.0, 0.0));
        assert_eq!(lg.layers, TrainConfig::default().layers);
        let mut mf = TrainConfig::default();
        mf.apply_model_preset(ModelKind::BprMf);
        assert_eq!(mf.layers, 0);
        assert_eq!(mf.lambda1, 0.0);
        assert!(!ModelKind::UMean.is_trained());
        assert!(ModelKind::BprMf.is_trained());
    }

    #[test]
    fn model_names_round_trip() {
        for m in [
            ModelKind::Qagcl,
            ModelKind::LightGcn,
            ModelKind::BprMf,
            ModelKind::UMean,
            ModelKind::IMean,
        ] {
            assert_eq!(m.to_string().parse::<ModelKind>().unwrap(), m);
        }
        assert!("svd".parse::<ModelKind>().is_err());
    }
}
