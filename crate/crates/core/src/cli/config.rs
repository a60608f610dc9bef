//! Experiment configuration: flat `key = value` lines, `#` starts a comment.
//!
//! ```text
//! data.source = synthetic
//! data.depth = 4
//! code.strategy = spectral
//! code.bits = 8
//! train.epochs = 30
//! output.dir = runs/spectral
//! ```
//!
//! [`ExperimentConfig::echo`] renders every key, defaults included, in a
//! fixed order; parsing the echo reproduces the configuration exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::codes::{default_code_length, Binarization, CodeKind, DEFAULT_DENSE_CANDIDATES};
use crate::data::SynthConfig;
use crate::error::{EcocError, Result};
use crate::nn::TrainConfig;

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synthetic(SynthConfig),
    Csv { path: PathBuf, attributes: Option<PathBuf>, n_classes: Option<usize> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodeSpec {
    pub strategy: CodeKind,
    /// `None` picks `n` for one-hot and `floor(10 log2 n)` otherwise
    /// (capped at `n - 1` for spectral codes).
    pub bits: Option<usize>,
    pub binarization: Binarization,
    pub seed: u64,
    pub candidates: usize,
    /// `None` keeps the code kind's default.
    pub normalize_rows: Option<bool>,
}

impl CodeSpec {
    pub fn new(strategy: CodeKind, bits: Option<usize>) -> Self {
        Self {
            strategy,
            bits,
            binarization: Binarization::Raw,
            seed: 0,
            candidates: DEFAULT_DENSE_CANDIDATES,
            normalize_rows: None,
        }
    }

    /// Concrete bit count for `n` classes, checked against the strategy.
    pub fn resolve_bits(&self, n: usize) -> Result<usize> {
        let k = match (self.strategy, self.bits) {
            (_, Some(k)) => k,
            (CodeKind::OneHot, None) => n,
            (CodeKind::Spectral, None) => default_code_length(n).min(n.saturating_sub(1)),
            (_, None) => default_code_length(n),
        };
        if k == 0 {
            return Err(EcocError::Config("code.bits must be at least 1".into()));
        }
        match self.strategy {
            CodeKind::OneHot if k != n => {
                Err(EcocError::Config(format!("code.bits = {k}: a one-hot code over {n} classes has {n} bits")))
            }
            CodeKind::Spectral if k > n.saturating_sub(1) => Err(EcocError::Config(format!(
                "code.bits = {k}: a spectral code over {n} classes allows bits <= {}",
                n.saturating_sub(1)
            ))),
            _ => Ok(k),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub train_fraction: f64,
    pub split_seed: u64,
    pub code: CodeSpec,
    pub hidden: Vec<usize>,
    pub net_seed: u64,
    pub train: TrainConfig,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| EcocError::Parse { line: idx + 1, msg: format!("expected `key = value`, got `{line}`") })?;
            let key = key.trim().to_string();
            if map.insert(key.clone(), (idx + 1, value.trim().to_string())).is_some() {
                return Err(EcocError::Parse { line: idx + 1, msg: format!("duplicate key `{key}`") });
            }
        }
        let mut keys = Keys { map };
        let cfg = Self::from_keys(&mut keys)?;
        if let Some((key, (line, _))) = keys.map.into_iter().next() {
            return Err(EcocError::Parse { line, msg: format!("unknown key `{key}`") });
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn from_keys(k: &mut Keys) -> Result<Self> {
        let source = k.take_or("data.source", "synthetic".to_string())?;
        let data = match source.as_str() {
            "synthetic" => DataSource::Synthetic(SynthConfig {
                depth: k.take_or("data.depth", 4)?,
                branching: k.take_or("data.branching", 2)?,
                samples_per_class: k.take_or("data.samples_per_class", 40)?,
                class_sep: k.take_or("data.class_sep", 4.0)?,
                noise_sigma: k.take_or("data.noise_sigma", 1.0)?,
                dim: k.take_or("data.dim", 16)?,
                seed: k.take_or("data.seed", 0)?,
            }),
            "csv" => DataSource::Csv {
                path: k.take::<String>("data.path")?.map(PathBuf::from).ok_or_else(|| {
                    EcocError::Config("data.source = csv requires data.path".into())
                })?,
                attributes: k.take_optional::<String>("data.attributes")?.map(PathBuf::from),
                n_classes: k.take_optional("data.classes")?,
            },
            other => return Err(EcocError::Config(format!("data.source `{other}` is neither synthetic nor csv"))),
        };
        let code = CodeSpec {
            strategy: k.take_or("code.strategy", CodeKind::Gaussian)?,
            bits: k.take_optional("code.bits")?,
            binarization: k.take_or("code.binarization", Binarization::Raw)?,
            seed: k.take_or("code.seed", 0)?,
            candidates: k.take_or("code.candidates", DEFAULT_DENSE_CANDIDATES)?,
            normalize_rows: match k.take_or("code.normalize_rows", "auto".to_string())?.as_str() {
                "auto" => None,
                "true" | "on" => Some(true),
                "false" | "off" => Some(false),
                other => return Err(EcocError::Config(format!("code.normalize_rows `{other}` is not auto/true/false"))),
            },
        };
        let defaults = TrainConfig::default();
        let train = TrainConfig {
            epochs: k.take_or("train.epochs", defaults.epochs)?,
            batch_size: k.take_or("train.batch_size", defaults.batch_size)?,
            learning_rate: k.take_or("train.learning_rate", defaults.learning_rate)?,
            lr_decay_epoch: k.take_optional("train.lr_decay_epoch")?,
            lr_decay_factor: k.take_or("train.lr_decay_factor", defaults.lr_decay_factor)?,
            momentum: k.take_or("train.momentum", defaults.momentum)?,
            seed: k.take_or("train.seed", defaults.seed)?,
            shuffle: k.take_or("train.shuffle", defaults.shuffle)?,
        };
        let hidden = match k.take_or("net.hidden", "32".to_string())?.as_str() {
            "" | "none" => Vec::new(),
            list => list
                .split(',')
                .map(|s| s.trim().parse::<usize>().map_err(|_| EcocError::Config(format!("net.hidden entry `{s}` is not a count"))))
                .collect::<Result<_>>()?,
        };
        Ok(Self {
            data,
            train_fraction: k.take_or("data.train_fraction", 0.5)?,
            split_seed: k.take_or("data.split_seed", 0)?,
            code,
            hidden,
            net_seed: k.take_or("net.seed", 0)?,
            train,
            output_dir: PathBuf::from(k.take_or("output.dir", "out".to_string())?),
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(EcocError::Config("data.train_fraction must lie strictly between 0 and 1".into()));
        }
        if self.hidden.contains(&0) {
            return Err(EcocError::Config("net.hidden sizes must be positive".into()));
        }
        if self.code.candidates == 0 {
            return Err(EcocError::Config("code.candidates must be positive".into()));
        }
        if self.code.strategy == CodeKind::OneHot && self.code.binarization != Binarization::Raw {
            return Err(EcocError::Config("code.binarization must be raw for one-hot codes".into()));
        }
        match &self.data {
            DataSource::Synthetic(s) => {
                self.code.resolve_bits(s.n_classes())?;
            }
            DataSource::Csv { path, attributes, n_classes } => {
                for p in std::iter::once(path).chain(attributes) {
                    if !p.exists() {
                        return Err(EcocError::Config(format!("{} does not exist", p.display())));
                    }
                }
                if let Some(n) = n_classes {
                    self.code.resolve_bits(*n)?;
                }
            }
        }
        Ok(())
    }

    /// Every setting, one `key = value` per line, in a fixed order.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        let mut put = |key: &str, value: String| {
            let _ = writeln!(out, "{key} = {value}");
        };
        match &self.data {
            DataSource::Synthetic(s) => {
                put("data.source", "synthetic".into());
                put("data.depth", s.depth.to_string());
                put("data.branching", s.branching.to_string());
                put("data.samples_per_class", s.samples_per_class.to_string());
                put("data.class_sep", fmt_f64(s.class_sep));
                put("data.noise_sigma", fmt_f64(s.noise_sigma));
                put("data.dim", s.dim.to_string());
                put("data.seed", s.seed.to_string());
            }
            DataSource::Csv { path, attributes, n_classes } => {
                put("data.source", "csv".into());
                put("data.path", path.display().to_string());
                if let Some(a) = attributes {
                    put("data.attributes", a.display().to_string());
                }
                if let Some(n) = n_classes {
                    put("data.classes", n.to_string());
                }
            }
        }
        put("data.train_fraction", fmt_f64(self.train_fraction));
        put("data.split_seed", self.split_seed.to_string());
        put("code.strategy", self.code.strategy.to_string());
        if let Some(b) = self.code.bits {
            put("code.bits", b.to_string());
        }
        put("code.binarization", self.code.binarization.to_string());
        put("code.seed", self.code.seed.to_string());
        put("code.candidates", self.code.candidates.to_string());
        put(
            "code.normalize_rows",
            match self.code.normalize_rows {
                None => "auto".into(),
                Some(b) => b.to_string(),
            },
        );
        put(
            "net.hidden",
            if self.hidden.is_empty() {
                "none".into()
            } else {
                self.hidden.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
            },
        );
        put("net.seed", self.net_seed.to_string());
        put("train.epochs", self.train.epochs.to_string());
        put("train.batch_size", self.train.batch_size.to_string());
        put("train.learning_rate", fmt_f64(self.train.learning_rate));
        if let Some(e) = self.train.lr_decay_epoch {
            put("train.lr_decay_epoch", e.to_string());
        }
        put("train.lr_decay_factor", fmt_f64(self.train.lr_decay_factor));
        put("train.momentum", fmt_f64(self.train.momentum));
        put("train.seed", self.train.seed.to_string());
        put("train.shuffle", self.train.shuffle.to_string());
        put("output.dir", self.output_dir.display().to_string());
        out
    }
}

/// Shortest representation that parses back to the same `f64`.
fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

struct Keys {
    map: BTreeMap<String, (usize, String)>,
}

impl Keys {
    fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.map.remove(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| EcocError::Parse { line, msg: format!("invalid value `{v}` for {key}") }),
        }
    }

    fn take_or<T: FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        Ok(self.take(key)?.unwrap_or(default))
    }

    /// Like [`Keys::take`], treating `none` as absent.
    fn take_optional<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        if self.map.get(key).is_some_and(|(_, v)| v == "none") {
            self.map.remove(key);
            return Ok(None);
        }
        self.take(key)
    }
}
