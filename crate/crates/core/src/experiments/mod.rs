//! The three experiment protocols: node-cap sweep, spectral filter by
//! node-cap grid, and user-count scaling. Each runs the full pipeline from
//! a manifest: select users, split per user, preprocess, extract graphs,
//! filter by node cap, pad, pair, train and evaluate.
//!
//! Determinism rules:
//! - users are chosen by shuffling the sorted user list under the seed and
//!   taking a prefix, so smaller user sets are nested in larger ones;
//! - the split is computed once per user set and reused across caps and filters;
//! - pair seeds depend on the seed and the part, training seeds on the
//!   seed and the node cap only, so the unfiltered grid row of the second
//!   protocol reproduces the first protocol cell by cell.

pub mod reference;
mod report;
pub mod synthetic;

use std::collections::BTreeSet;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{
    filter_by_node_cap, pad_graph, split_by_user, Manifest, ManifestEntry, PairDataset, Split, SplitRatios,
};
use crate::error::{Error, Result};
use crate::graph_extract::{extract_graph, ExtractOptions, IrisGraph, SourceId};
use crate::gsnn::{evaluate, train, Metrics, TrainConfig, DEFAULT_THRESHOLD};
use crate::imaging::{load_mask, load_pnm, preprocess, PreprocessOptions, SpectralFilter};
use crate::seed::{derive_seed, rng_for};

pub use report::{write_reports, ExperimentReport, ReferenceComparison, ReportFiles, Timings};

/// Settings shared by every cell of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pipeline {
    pub seed: u64,
    pub ratios: SplitRatios,
    /// Its `filter` field is replaced per configuration.
    pub preprocess: PreprocessOptions,
    pub extract: ExtractOptions,
    /// Its `seed` field is replaced per cell.
    pub train: TrainConfig,
}

impl Default for Pipeline {
    fn default() -> Self {
        Pipeline {
            seed: 0,
            ratios: SplitRatios::default(),
            preprocess: PreprocessOptions::default(),
            extract: ExtractOptions::default(),
            train: TrainConfig::default(),
        }
    }
}

pub const DEFAULT_NODE_CAPS: [usize; 5] = [100, 150, 200, 250, 300];
pub const DEFAULT_USER_COUNTS: [usize; 5] = [10, 20, 30, 40, 50];
pub const DEFAULT_RETENTION_FLOOR: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exp1Params {
    pub users: usize,
    pub node_caps: Vec<usize>,
}

impl Default for Exp1Params {
    fn default() -> Self {
        Exp1Params {
            users: 10,
            node_caps: DEFAULT_NODE_CAPS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exp2Params {
    pub users: usize,
    pub alphas: Vec<SpectralFilter>,
    pub node_caps: Vec<usize>,
    pub retention_floor: f64,
}

impl Default for Exp2Params {
    fn default() -> Self {
        Exp2Params {
            users: 10,
            alphas: SpectralFilter::all(),
            node_caps: DEFAULT_NODE_CAPS.to_vec(),
            retention_floor: DEFAULT_RETENTION_FLOOR,
        }
    }
}

/// One filter and node-cap configuration of the user-scaling protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellConfig {
    pub alpha: Option<SpectralFilter>,
    pub node_cap: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exp3Params {
    pub configs: Vec<CellConfig>,
    pub user_counts: Vec<usize>,
}

impl Default for Exp3Params {
    fn default() -> Self {
        let alpha = |k| Some(SpectralFilter::new(k).expect("supported denominator"));
        Exp3Params {
            configs: vec![
                CellConfig {
                    alpha: alpha(7),
                    node_cap: 200,
                },
                CellConfig {
                    alpha: alpha(5),
                    node_cap: 250,
                },
            ],
            user_counts: DEFAULT_USER_COUNTS.to_vec(),
        }
    }
}

/// One configuration's outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub alpha: Option<SpectralFilter>,
    pub node_cap: usize,
    pub users: usize,
    /// Graphs dropped by the node cap.
    pub graphs_removed: usize,
    pub graphs_used: usize,
    /// Graphs without any node, dropped before the cap.
    pub graphs_unusable: usize,
    /// `used / (used + removed)`.
    pub retention: f64,
    pub trained: bool,
    /// Why an untrained row was skipped.
    pub note: Option<String>,
    pub train_seed: u64,
    pub best_epoch: Option<usize>,
    pub epochs_run: Option<usize>,
    pub val: Option<Metrics>,
    pub test: Option<Metrics>,
}

/// Users of the manifest in sorted order, shuffled under `seed`; the first
/// `n` are selected, so selections for growing `n` are nested.
pub fn select_users(manifest: &Manifest, n: usize, seed: u64) -> Result<Vec<String>> {
    let mut users = manifest.users();
    if users.len() < n {
        return Err(Error::InsufficientUsers {
            needed: n,
            available: users.len(),
        });
    }
    users.shuffle(&mut rng_for(seed, "users", 0));
    users.truncate(n);
    Ok(users)
}

/// Graphs of one user set under one preprocessing configuration.
#[derive(Debug, Clone)]
pub struct ExtractedSplit {
    pub graphs: Split<IrisGraph>,
    pub unusable: usize,
}

/// Per-user split of the chosen users' manifest entries.
pub fn split_users(manifest: &Manifest, users: &[String], pipeline: &Pipeline) -> Result<Split<ManifestEntry>> {
    let chosen: BTreeSet<&str> = users.iter().map(String::as_str).collect();
    let entries: Vec<ManifestEntry> = manifest
        .entries
        .iter()
        .filter(|e| chosen.contains(e.user_id.as_str()))
        .cloned()
        .collect();
    split_by_user(&entries, |e| e.user_id.as_str(), pipeline.ratios, pipeline.seed)
}

/// Loads, preprocesses and converts one manifest entry.
pub fn entry_graph(
    entry: &ManifestEntry,
    index: usize,
    preprocess_opts: &PreprocessOptions,
    extract: &ExtractOptions,
) -> Result<IrisGraph> {
    let raster = load_pnm(&entry.image_path)?;
    let mask = entry.mask_path.as_ref().map(load_mask).transpose()?;
    let image = preprocess(&raster, mask.as_ref(), preprocess_opts)?;
    let source = SourceId {
        user: entry.user_id.clone(),
        session: 0,
        index: index as u32,
    };
    extract_graph(&image, source, extract)
}

/// Extracts graphs for every part of `split`, dropping unusable ones.
pub fn extract_split(split: &Split<ManifestEntry>, pipeline: &Pipeline, alpha: Option<SpectralFilter>) -> Result<ExtractedSplit> {
    let opts = PreprocessOptions {
        filter: alpha,
        ..pipeline.preprocess
    };
    let mut unusable = 0;
    let mut parts = Vec::with_capacity(3);
    for (_, entries) in split.parts() {
        let graphs = entries
            .par_iter()
            .enumerate()
            .map(|(i, e)| entry_graph(e, i, &opts, &pipeline.extract))
            .collect::<Result<Vec<_>>>()?;
        let before = graphs.len();
        let usable: Vec<IrisGraph> = graphs.into_iter().filter(IrisGraph::is_usable).collect();
        unusable += before - usable.len();
        parts.push(usable);
    }
    let test = parts.pop().expect("three parts");
    let val = parts.pop().expect("three parts");
    let train = parts.pop().expect("three parts");
    Ok(ExtractedSplit {
        graphs: Split { train, val, test },
        unusable,
    })
}

pub fn train_seed(seed: u64, node_cap: usize) -> u64 {
    derive_seed(seed, "train", node_cap as u64)
}

fn pair_dataset(graphs: Vec<IrisGraph>, cap: usize, seed: u64, part: &str) -> Result<PairDataset> {
    let padded = graphs.iter().map(|g| pad_graph(g, cap)).collect::<Result<Vec<_>>>()?;
    Ok(PairDataset::build(padded, derive_seed(seed, &format!("pairs/{part}"), 0)))
}

/// Filters, pads, pairs, trains and evaluates one configuration. With a
/// retention floor, configurations keeping fewer graphs are reported
/// without training.
pub fn run_cell(
    extracted: &ExtractedSplit,
    config: CellConfig,
    users: usize,
    pipeline: &Pipeline,
    retention_floor: Option<f64>,
) -> Result<ReportRow> {
    let cap = config.node_cap;
    let mut kept = Vec::with_capacity(3);
    let mut removed = 0;
    for (_, part) in extracted.graphs.parts() {
        let filtered = filter_by_node_cap(part.to_vec(), cap)?;
        removed += filtered.removed;
        kept.push(filtered.kept);
    }
    let used: usize = kept.iter().map(Vec::len).sum();
    let retention = if used + removed == 0 {
        1.0
    } else {
        used as f64 / (used + removed) as f64
    };
    let seed = train_seed(pipeline.seed, cap);
    let mut row = ReportRow {
        alpha: config.alpha,
        node_cap: cap,
        users,
        graphs_removed: removed,
        graphs_used: used,
        graphs_unusable: extracted.unusable,
        retention,
        trained: false,
        note: None,
        train_seed: seed,
        best_epoch: None,
        epochs_run: None,
        val: None,
        test: None,
    };
    if let Some(floor) = retention_floor {
        if retention < floor {
            row.note = Some(format!("retention {:.2}% below floor {:.2}%", retention * 100.0, floor * 100.0));
            return Ok(row);
        }
    }

    let test = pair_dataset(kept.pop().expect("three parts"), cap, pipeline.seed, "test")?;
    let val = pair_dataset(kept.pop().expect("three parts"), cap, pipeline.seed, "val")?;
    let train_set = pair_dataset(kept.pop().expect("three parts"), cap, pipeline.seed, "train")?;
    for (name, set) in [("training", &train_set), ("validation", &val)] {
        if set.is_empty() {
            row.note = Some(format!("no {name} pairs after filtering"));
            return Ok(row);
        }
    }
    let config = TrainConfig {
        seed,
        ..pipeline.train.clone()
    };
    let outcome = train(&train_set, &val, &config)?;
    let options = config.options();
    row.trained = true;
    row.best_epoch = Some(outcome.best_epoch);
    row.epochs_run = Some(outcome.history.len());
    row.val = Some(outcome.best_val);
    row.test = if test.is_empty() {
        row.note = Some("no test pairs after filtering".into());
        None
    } else {
        Some(evaluate(&outcome.params, &test, &options, DEFAULT_THRESHOLD)?)
    };
    Ok(row)
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> Result<(T, f64)> {
    let start = Instant::now();
    let value = f()?;
    Ok((value, start.elapsed().as_secs_f64()))
}

fn describe(row: &ReportRow) -> String {
    let alpha = row.alpha.map_or("none".to_string(), |a| a.to_string());
    format!("users={} alpha={alpha} cap={}", row.users, row.node_cap)
}

fn log_row(row: &ReportRow) {
    match (&row.val, &row.test) {
        (Some(v), t) => log::info!(
            "{}: used {} removed {} val acc {:.4} f1 {:.4} test f1 {}",
            describe(row),
            row.graphs_used,
            row.graphs_removed,
            v.accuracy,
            v.f1,
            t.map_or("-".into(), |t| format!("{:.4}", t.f1))
        ),
        _ => log::info!("{}: not trained ({})", describe(row), row.note.as_deref().unwrap_or("")),
    }
}

/// Node-cap sweep on unfiltered images.
pub fn run_experiment1(manifest: &Manifest, params: &Exp1Params, pipeline: &Pipeline) -> Result<(ExperimentReport, Timings)> {
    let users = select_users(manifest, params.users, pipeline.seed)?;
    let split = split_users(manifest, &users, pipeline)?;
    let extracted = extract_split(&split, pipeline, None)?;
    let mut rows = Vec::new();
    let mut timings = Vec::new();
    for &cap in &params.node_caps {
        let cell = CellConfig {
            alpha: None,
            node_cap: cap,
        };
        let (row, secs) = timed(|| run_cell(&extracted, cell, users.len(), pipeline, None))?;
        log_row(&row);
        rows.push(row);
        timings.push(secs);
    }
    Ok((ExperimentReport::new(1, rows), Timings::new(1, timings)))
}

/// Filter by node-cap grid plus the unfiltered baseline. Filtered
/// configurations below the retention floor are listed untrained; the
/// baseline is always trained.
pub fn run_experiment2(manifest: &Manifest, params: &Exp2Params, pipeline: &Pipeline) -> Result<(ExperimentReport, Timings)> {
    if !(0.0..=1.0).contains(&params.retention_floor) {
        return Err(Error::Config("retention floor must lie in [0, 1]".into()));
    }
    let users = select_users(manifest, params.users, pipeline.seed)?;
    let split = split_users(manifest, &users, pipeline)?;
    let mut rows = Vec::new();
    let mut timings = Vec::new();
    let filters = std::iter::once(None).chain(params.alphas.iter().copied().map(Some));
    for alpha in filters {
        let extracted = extract_split(&split, pipeline, alpha)?;
        let floor = alpha.map(|_| params.retention_floor);
        for &cap in &params.node_caps {
            let cell = CellConfig { alpha, node_cap: cap };
            let (row, secs) = timed(|| run_cell(&extracted, cell, users.len(), pipeline, floor))?;
            log_row(&row);
            rows.push(row);
            timings.push(secs);
        }
    }
    Ok((ExperimentReport::new(2, rows), Timings::new(2, timings)))
}

/// Retrains every configuration for each nested user set.
pub fn run_experiment3(manifest: &Manifest, params: &Exp3Params, pipeline: &Pipeline) -> Result<(ExperimentReport, Timings)> {
    let largest = params.user_counts.iter().copied().max().unwrap_or(0);
    select_users(manifest, largest, pipeline.seed)?;
    let mut rows = Vec::new();
    let mut timings = Vec::new();
    for config in &params.configs {
        for &n in &params.user_counts {
            let users = select_users(manifest, n, pipeline.seed)?;
            let split = split_users(manifest, &users, pipeline)?;
            let (row, secs) = timed(|| {
                let extracted = extract_split(&split, pipeline, config.alpha)?;
                run_cell(&extracted, *config, n, pipeline, None)
            })?;
            log_row(&row);
            rows.push(row);
            timings.push(secs);
        }
    }
    Ok((ExperimentReport::new(3, rows), Timings::new(3, timings)))
}
