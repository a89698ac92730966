//! The merged run configuration.
//!
//! Sources are layered: built-in defaults, then a flat `key = value` file,
//! then command-line overrides (applied through [`RunConfig::set`] as
//! well). Text from `#` to the end of a line is a comment. Keys:
//!
//! | key | value |
//! |---|---|
//! | `seed` | unsigned integer |
//! | `delta` | bin width, 1..=255 |
//! | `component_count_cap` | normalizer of the per-bin count feature |
//! | `size` | canonical image side |
//! | `equalization` | `stretch` or `histogram` |
//! | `reflect_threshold` | 0..=255, or `off` |
//! | `alpha` | `1/5` .. `1/10`, or `none` |
//! | `node_cap` | positive integer |
//! | `split` | `train/val/test` fractions, e.g. `0.6/0.2/0.2` |
//! | `learning_rate`, `batch_size`, `max_epochs`, `patience` | training |
//! | `adjacency` | `binary` or `weighted` |
//! | `combine` | `absolute` or `signed` |
//! | `gcn`, `embedding`, `head` | layer widths, e.g. `gcn = 500,200` |
//! | `users` | users for the first two experiments |
//! | `node_caps` | comma-separated caps |
//! | `alphas` | comma-separated filters |
//! | `user_counts` | comma-separated user counts |
//! | `retention_floor` | fraction in [0, 1] |
//! | `strength`, `images_per_user` | synthetic corpus |

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::SplitRatios;
use crate::error::{Error, Result};
use crate::experiments::{
    Exp1Params, Exp2Params, Exp3Params, Pipeline, DEFAULT_NODE_CAPS, DEFAULT_RETENTION_FLOOR,
    DEFAULT_USER_COUNTS,
};
use crate::graph_extract::{ExtractOptions, DEFAULT_COMPONENT_COUNT_CAP, DEFAULT_DELTA};
use crate::gsnn::{AdjacencyMode, Architecture, Combine, TrainConfig};
use crate::imaging::{Equalization, PreprocessOptions, SpectralFilter, CANONICAL_SIZE, DEFAULT_REFLECT_THRESHOLD};
use crate::experiments::synthetic::DEFAULT_STRENGTH;

pub const DEFAULT_NODE_CAP: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub delta: u8,
    pub component_count_cap: usize,
    pub size: usize,
    pub equalization: Equalization,
    pub reflect_threshold: Option<u8>,
    pub alpha: Option<SpectralFilter>,
    pub node_cap: usize,
    pub split: SplitRatios,
    pub train: TrainConfig,
    pub users: usize,
    pub node_caps: Vec<usize>,
    pub alphas: Vec<SpectralFilter>,
    pub user_counts: Vec<usize>,
    pub retention_floor: f64,
    pub strength: f64,
    pub images_per_user: usize,
    /// Input and output locations of the command, by role.
    pub paths: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            delta: DEFAULT_DELTA,
            component_count_cap: DEFAULT_COMPONENT_COUNT_CAP,
            size: CANONICAL_SIZE,
            equalization: Equalization::Stretch,
            reflect_threshold: Some(DEFAULT_REFLECT_THRESHOLD),
            alpha: None,
            node_cap: DEFAULT_NODE_CAP,
            split: SplitRatios::default(),
            train: TrainConfig::default(),
            users: 10,
            node_caps: DEFAULT_NODE_CAPS.to_vec(),
            alphas: SpectralFilter::all(),
            user_counts: DEFAULT_USER_COUNTS.to_vec(),
            retention_floor: DEFAULT_RETENTION_FLOOR,
            strength: DEFAULT_STRENGTH,
            images_per_user: 20,
            paths: BTreeMap::new(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| Error::Config(format!("{key}: cannot parse {value:?}: {e}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn parse_widths<const N: usize>(key: &str, value: &str) -> Result<[usize; N]> {
    let v: Vec<usize> = parse_list(key, value)?;
    v.try_into()
        .map_err(|_| Error::Config(format!("{key}: expected {N} comma-separated widths")))
}

fn parse_alpha(key: &str, value: &str) -> Result<Option<SpectralFilter>> {
    match value.trim() {
        "none" | "" => Ok(None),
        other => parse(key, other).map(Some),
    }
}

fn parse_enum<T: serde::de::DeserializeOwned>(key: &str, value: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(value.trim().to_lowercase()))
        .map_err(|_| Error::Config(format!("{key}: unknown value {value:?}")))
}

impl RunConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim();
        match key {
            "seed" => self.seed = parse(key, value)?,
            "delta" => self.delta = parse(key, value)?,
            "component_count_cap" => self.component_count_cap = parse(key, value)?,
            "size" => self.size = parse(key, value)?,
            "equalization" => self.equalization = parse(key, value)?,
            "reflect_threshold" => {
                self.reflect_threshold = match value.trim() {
                    "off" | "none" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "alpha" => self.alpha = parse_alpha(key, value)?,
            "node_cap" => self.node_cap = parse(key, value)?,
            "split" => {
                let parts: Vec<f64> = value.split('/').map(|s| parse(key, s)).collect::<Result<_>>()?;
                let [train, val, test] = parts[..] else {
                    return Err(Error::Config("split: expected train/val/test".into()));
                };
                self.split = SplitRatios { train, val, test };
            }
            "learning_rate" => self.train.learning_rate = parse(key, value)?,
            "batch_size" => self.train.batch_size = parse(key, value)?,
            "max_epochs" => self.train.max_epochs = parse(key, value)?,
            "patience" => self.train.patience = parse(key, value)?,
            "adjacency" => self.train.adjacency = parse_enum::<AdjacencyMode>(key, value)?,
            "combine" => self.train.combine = parse_enum::<Combine>(key, value)?,
            "gcn" => self.train.architecture.gcn = parse_widths(key, value)?,
            "embedding" => self.train.architecture.embedding = parse(key, value)?,
            "head" => self.train.architecture.head = parse_widths(key, value)?,
            "users" => self.users = parse(key, value)?,
            "node_caps" => self.node_caps = parse_list(key, value)?,
            "alphas" => self.alphas = parse_list(key, value)?,
            "user_counts" => self.user_counts = parse_list(key, value)?,
            "retention_floor" => self.retention_floor = parse(key, value)?,
            "strength" => self.strength = parse(key, value)?,
            "images_per_user" => self.images_per_user = parse(key, value)?,
            other => return Err(Error::Config(format!("unknown configuration key {other:?}"))),
        }
        Ok(())
    }

    /// Applies every setting of a `key = value` text.
    pub fn merge_str(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            self.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn merge_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.merge_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.delta == 0 {
            return Err(Error::Config("delta must be positive".into()));
        }
        if self.node_cap == 0 || self.node_caps.contains(&0) {
            return Err(Error::Config("node caps must be positive".into()));
        }
        if self.size == 0 || self.component_count_cap == 0 {
            return Err(Error::Config("size and component_count_cap must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.retention_floor) {
            return Err(Error::Config("retention_floor must lie in [0, 1]".into()));
        }
        let a = &self.train.architecture;
        if a.gcn.contains(&0) || a.head.contains(&0) || a.embedding == 0 {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        self.split.validate()?;
        self.train.validate()
    }

    pub fn preprocess_options(&self) -> PreprocessOptions {
        PreprocessOptions {
            size: self.size,
            equalization: self.equalization,
            reflect_threshold: self.reflect_threshold,
            filter: self.alpha,
        }
    }

    pub fn extract_options(&self) -> ExtractOptions {
        ExtractOptions {
            delta: self.delta,
            component_count_cap: self.component_count_cap,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train.clone()
        }
    }

    pub fn architecture(&self) -> Architecture {
        self.train.architecture
    }

    pub fn pipeline(&self) -> Pipeline {
        Pipeline {
            seed: self.seed,
            ratios: self.split,
            preprocess: self.preprocess_options(),
            extract: self.extract_options(),
            train: self.train_config(),
        }
    }

    pub fn exp1(&self) -> Exp1Params {
        Exp1Params {
            users: self.users,
            node_caps: self.node_caps.clone(),
        }
    }

    pub fn exp2(&self) -> Exp2Params {
        Exp2Params {
            users: self.users,
            alphas: self.alphas.clone(),
            node_caps: self.node_caps.clone(),
            retention_floor: self.retention_floor,
        }
    }

    /// The two user-scaling configurations; explicit `alpha`/`node_cap`
    /// settings are not used here.
    pub fn exp3(&self) -> Exp3Params {
        Exp3Params {
            user_counts: self.user_counts.clone(),
            ..Exp3Params::default()
        }
    }

    /// Tool name and version plus the resolved configuration, for
    /// embedding in written artifacts.
    pub fn provenance(&self, command: &str) -> serde_json::Value {
        serde_json::json!({
            "tool": "irisgraph",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "config": self,
        })
    }
}
