//! Flat `key = value` experiment configuration.
//!
//! Every key has a default; a file only needs the keys it changes. Ranges
//! are written as `lo,hi`. [`ExperimentConfig::to_text`] emits every key in
//! a fixed order, and parsing that text gives back an equal config.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::workload::{SubstrateConfig, VnrConfig};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{key}`: cannot parse `{value}`")]
    BadValue { key: String, value: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("cannot read config {path}: {message}")]
    Read { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolicyKind {
    Hfl,
    NodeRank,
    Random,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [PolicyKind::Hfl, PolicyKind::NodeRank, PolicyKind::Random];
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolicyKind::Hfl => "hfl",
            PolicyKind::NodeRank => "noderank",
            PolicyKind::Random => "random",
        })
    }
}

impl FromStr for PolicyKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hfl" => Ok(PolicyKind::Hfl),
            "noderank" => Ok(PolicyKind::NodeRank),
            "random" => Ok(PolicyKind::Random),
            _ => Err(ConfigError::BadValue {
                key: "policy".into(),
                value: s.into(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub substrate: SubstrateConfig,
    pub vnr: VnrConfig,
    pub train_size: usize,
    pub test_size: usize,
    pub learning_rate: f64,
    /// Completed episodes per domain before a local training step.
    pub batch_size: usize,
    /// Passes over the training split.
    pub epochs: usize,
    pub reject_penalty: f64,
    /// Spacing of metric samples in the emitted time series.
    pub sample_interval: f64,
    pub policy: PolicyKind,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            substrate: SubstrateConfig::default(),
            vnr: VnrConfig::default(),
            train_size: 1000,
            test_size: 1000,
            learning_rate: 5.0,
            batch_size: 50,
            epochs: 30,
            reject_penalty: 0.0,
            sample_interval: 100.0,
            policy: PolicyKind::Hfl,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue {
        key: key.into(),
        value: value.into(),
    })
}

fn parse_range<T: FromStr>(key: &str, value: &str) -> Result<(T, T), ConfigError> {
    let (lo, hi) = value.split_once(',').ok_or_else(|| ConfigError::BadValue {
        key: key.into(),
        value: value.into(),
    })?;
    Ok((parse(key, lo.trim())?, parse(key, hi.trim())?))
}

/// Derived seeds for the independent random streams of one experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seeds {
    pub substrate: u64,
    pub workload: u64,
    pub policy: u64,
    pub exploration: u64,
}

impl ExperimentConfig {
    pub const KEYS: [&'static str; 22] = [
        "seed",
        "num_domains",
        "nodes_per_domain",
        "total_links",
        "inter_link_fraction",
        "node_cpu",
        "link_bw",
        "grid_size",
        "vnr_count",
        "train_size",
        "test_size",
        "vnodes",
        "vnode_cpu",
        "vlink_bw",
        "link_probability",
        "arrival_rate",
        "mean_lifetime",
        "learning_rate",
        "batch_size",
        "epochs",
        "reject_penalty",
        "sample_interval",
    ];

    pub fn seeds(&self) -> Seeds {
        let mix = |tag: u64| self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ tag.wrapping_mul(0xBF58_476D_1CE4_E5B9);
        Seeds {
            substrate: mix(1),
            workload: mix(2),
            policy: mix(3),
            exploration: mix(4),
        }
    }

    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value.trim();
        match key.trim() {
            "seed" => self.seed = parse(key, v)?,
            "num_domains" => self.substrate.num_domains = parse(key, v)?,
            "nodes_per_domain" => self.substrate.nodes_per_domain = parse(key, v)?,
            "total_links" => self.substrate.total_links = parse(key, v)?,
            "inter_link_fraction" => self.substrate.inter_link_fraction = parse(key, v)?,
            "node_cpu" => self.substrate.cpu_range = parse_range(key, v)?,
            "link_bw" => self.substrate.bw_range = parse_range(key, v)?,
            "grid_size" => self.substrate.grid_size = parse(key, v)?,
            "vnr_count" => self.vnr.count = parse(key, v)?,
            "train_size" => self.train_size = parse(key, v)?,
            "test_size" => self.test_size = parse(key, v)?,
            "vnodes" => self.vnr.vnode_range = parse_range(key, v)?,
            "vnode_cpu" => self.vnr.cpu_range = parse_range(key, v)?,
            "vlink_bw" => self.vnr.bw_range = parse_range(key, v)?,
            "link_probability" => self.vnr.link_probability = parse(key, v)?,
            "arrival_rate" => self.vnr.arrival_rate = parse(key, v)?,
            "mean_lifetime" => self.vnr.mean_lifetime = parse(key, v)?,
            "learning_rate" => self.learning_rate = parse(key, v)?,
            "batch_size" => self.batch_size = parse(key, v)?,
            "epochs" => self.epochs = parse(key, v)?,
            "reject_penalty" => self.reject_penalty = parse(key, v)?,
            "sample_interval" => self.sample_interval = parse(key, v)?,
            "policy" => self.policy = v.parse()?,
            other => return Err(ConfigError::UnknownKey(other.into())),
        }
        Ok(())
    }

    /// Applies a `key=value` override as given on the command line.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or(ConfigError::Syntax { line: 0 })?;
        self.set(k, v)
    }

    /// Parses a config file body on top of the defaults and validates it.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or(ConfigError::Syntax { line: i + 1 })?;
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    /// Every key, one per line, in [`Self::KEYS`] order followed by `policy`.
    pub fn to_text(&self) -> String {
        let s = &self.substrate;
        let v = &self.vnr;
        let values = [
            self.seed.to_string(),
            s.num_domains.to_string(),
            s.nodes_per_domain.to_string(),
            s.total_links.to_string(),
            s.inter_link_fraction.to_string(),
            format!("{},{}", s.cpu_range.0, s.cpu_range.1),
            format!("{},{}", s.bw_range.0, s.bw_range.1),
            s.grid_size.to_string(),
            v.count.to_string(),
            self.train_size.to_string(),
            self.test_size.to_string(),
            format!("{},{}", v.vnode_range.0, v.vnode_range.1),
            format!("{},{}", v.cpu_range.0, v.cpu_range.1),
            format!("{},{}", v.bw_range.0, v.bw_range.1),
            v.link_probability.to_string(),
            v.arrival_rate.to_string(),
            v.mean_lifetime.to_string(),
            self.learning_rate.to_string(),
            self.batch_size.to_string(),
            self.epochs.to_string(),
            self.reject_penalty.to_string(),
            self.sample_interval.to_string(),
        ];
        let mut out = String::new();
        for (k, val) in Self::KEYS.iter().zip(values) {
            out.push_str(&format!("{k} = {val}\n"));
        }
        out.push_str(&format!("policy = {}\n", self.policy));
        out
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        let s = &self.substrate;
        let v = &self.vnr;
        for (name, n) in [
            ("num_domains", s.num_domains),
            ("nodes_per_domain", s.nodes_per_domain),
            ("batch_size", self.batch_size),
            ("epochs", self.epochs),
        ] {
            if n == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        for (name, (lo, hi)) in [
            ("node_cpu", s.cpu_range),
            ("link_bw", s.bw_range),
            ("vnode_cpu", v.cpu_range),
            ("vlink_bw", v.bw_range),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
                return bad(format!("{name} range {lo},{hi} must satisfy 0 < lo <= hi"));
            }
            if lo.ceil() > hi.floor() {
                return bad(format!("{name} range {lo},{hi} contains no integer"));
            }
        }
        if v.vnode_range.0 == 0 || v.vnode_range.0 > v.vnode_range.1 {
            return bad(format!(
                "vnodes range {},{} must satisfy 1 <= lo <= hi",
                v.vnode_range.0, v.vnode_range.1
            ));
        }
        if self.train_size + self.test_size > v.count {
            return bad(format!(
                "train_size + test_size = {} exceeds vnr_count {}",
                self.train_size + self.test_size,
                v.count
            ));
        }
        for (name, x) in [
            ("inter_link_fraction", s.inter_link_fraction),
            ("link_probability", v.link_probability),
        ] {
            if !(0.0..=1.0).contains(&x) {
                return bad(format!("{name} must lie in [0, 1]"));
            }
        }
        for (name, x) in [
            ("grid_size", s.grid_size),
            ("arrival_rate", v.arrival_rate),
            ("mean_lifetime", v.mean_lifetime),
            ("learning_rate", self.learning_rate),
            ("sample_interval", self.sample_interval),
        ] {
            if !(x.is_finite() && x > 0.0) {
                return bad(format!("{name} must be positive"));
            }
        }
        if !(self.reject_penalty.is_finite() && self.reject_penalty >= 0.0) {
            return bad("reject_penalty must be non-negative".into());
        }
        Ok(())
    }
}
