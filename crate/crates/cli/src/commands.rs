use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;

use irisgraph::dataset::{
    filter_by_node_cap, load_dataset, load_graph_archive, pad_graph, save_dataset, save_graph_archive, split_by_user,
    Manifest, ManifestEntry, PairDataset,
};
use irisgraph::experiments::synthetic::{write_corpus, SyntheticSpec};
use irisgraph::experiments::{
    entry_graph, run_experiment1, run_experiment2, run_experiment3, write_reports, ExperimentReport, Timings,
};
use irisgraph::graph_extract::extract_graph;
use irisgraph::gsnn::{
    evaluate, load_checkpoint, save_checkpoint, train_from, write_history, Checkpoint, ModelParams,
};
use irisgraph::imaging::{load_mask, load_pgm, load_pnm, preprocess, save_pgm};
use irisgraph::seed::{derive_seed, rng_for};
use irisgraph::{RunConfig, SourceId};

use crate::args::{Cli, Command, ExperimentArgs, ExtractArgs, GlobalArgs, PreprocessArgs, TrainArgs};

/// A command-line problem detected after argument parsing.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(message: impl Into<String>) -> anyhow::Error {
    UsageError(message.into()).into()
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.global.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs as usize)
            .build_global()
            .context("configuring the worker pool")?;
    }
    let g = &cli.global;
    match cli.command {
        Command::Preprocess { manifest, out, preprocess } => {
            let config = resolve(g, "preprocess", |c| {
                apply_preprocess(c, &preprocess)?;
                path(c, "manifest", &manifest);
                path(c, "out", &out);
                Ok(())
            })?;
            cmd_preprocess(&config, &manifest, &out)
        }
        Command::Extract { manifest, out, preprocessed, extract, preprocess } => {
            let config = resolve(g, "extract", |c| {
                apply_preprocess(c, &preprocess)?;
                apply_extract(c, &extract)?;
                path(c, "manifest", &manifest);
                path(c, "out", &out);
                Ok(())
            })?;
            cmd_extract(&config, &manifest, &out, preprocessed)
        }
        Command::Dataset { graphs, out, node_cap } => {
            let config = resolve(g, "dataset", |c| {
                set_opt(c, "node_cap", node_cap)?;
                path(c, "graphs", &graphs);
                path(c, "out", &out);
                Ok(())
            })?;
            cmd_dataset(&config, &graphs, &out)
        }
        Command::Train { train, val, out, train_args } => {
            let config = resolve(g, "train", |c| {
                apply_train(c, &train_args)?;
                path(c, "train", &train);
                path(c, "val", &val);
                path(c, "out", &out);
                Ok(())
            })?;
            cmd_train(&config, &train, &val, &out)
        }
        Command::Eval { checkpoint, data, threshold, out } => {
            if !(0.0..=1.0).contains(&threshold) {
                return Err(usage("--threshold must lie in [0, 1]"));
            }
            let config = resolve(g, "eval", |c| {
                path(c, "checkpoint", &checkpoint);
                path(c, "data", &data);
                if let Some(out) = &out {
                    path(c, "out", out);
                }
                Ok(())
            })?;
            cmd_eval(&config, &checkpoint, &data, threshold, out.as_deref())
        }
        Command::Exp1 { exp } => {
            let config = resolve(g, "exp1", |c| apply_experiment(c, &exp))?;
            run_experiment(&config, &exp, 1)
        }
        Command::Exp2 { exp, alphas, retention_floor } => {
            let config = resolve(g, "exp2", |c| {
                apply_experiment(c, &exp)?;
                set_opt(c, "alphas", alphas.as_ref())?;
                set_opt(c, "retention_floor", retention_floor)
            })?;
            run_experiment(&config, &exp, 2)
        }
        Command::Exp3 { exp, user_counts } => {
            let config = resolve(g, "exp3", |c| {
                apply_experiment(c, &exp)?;
                set_opt(c, "user_counts", user_counts.as_ref())
            })?;
            run_experiment(&config, &exp, 3)
        }
        Command::Synth { out, users, images, strength, size } => {
            let config = resolve(g, "synth", |c| {
                set_opt(c, "users", users)?;
                set_opt(c, "images_per_user", images)?;
                set_opt(c, "strength", strength)?;
                set_opt(c, "size", size)?;
                path(c, "out", &out);
                Ok(())
            })?;
            cmd_synth(&config, &out)
        }
    }
}

/// Defaults, then the config file, then `--set`, then the dedicated flags;
/// `--seed` (or IRISGRAPH_SEED) last.
fn resolve(g: &GlobalArgs, command: &str, flags: impl FnOnce(&mut RunConfig) -> Result<()>) -> Result<RunConfig> {
    let mut config = RunConfig::default();
    if let Some(file) = &g.config {
        config
            .merge_file(file)
            .with_context(|| format!("reading configuration {}", file.display()))?;
        config.paths.insert("config".into(), file.display().to_string());
    }
    for kv in &g.set {
        let (key, value) = kv
            .split_once('=')
            .ok_or_else(|| usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        config.set(key, value)?;
    }
    flags(&mut config)?;
    if let Some(seed) = g.seed {
        config.seed = seed;
    }
    config.validate()?;
    log::info!("{command}: {}", serde_json::to_string(&config)?);
    Ok(config)
}

fn set_opt<T: ToString>(config: &mut RunConfig, key: &str, value: Option<T>) -> Result<()> {
    if let Some(v) = value {
        config.set(key, &v.to_string())?;
    }
    Ok(())
}

fn path(config: &mut RunConfig, role: &str, p: &Path) {
    config.paths.insert(role.into(), p.display().to_string());
}

fn apply_preprocess(c: &mut RunConfig, a: &PreprocessArgs) -> Result<()> {
    set_opt(c, "alpha", a.alpha.as_ref())?;
    set_opt(c, "reflect_threshold", a.reflect_threshold)?;
    if a.no_reflect {
        c.set("reflect_threshold", "off")?;
    }
    set_opt(c, "equalization", a.equalize.as_ref())
}

fn apply_extract(c: &mut RunConfig, a: &ExtractArgs) -> Result<()> {
    set_opt(c, "delta", a.delta)
}

fn apply_train(c: &mut RunConfig, a: &TrainArgs) -> Result<()> {
    set_opt(c, "max_epochs", a.epochs)?;
    set_opt(c, "batch_size", a.batch_size)?;
    set_opt(c, "learning_rate", a.learning_rate)?;
    set_opt(c, "patience", a.patience)?;
    set_opt(c, "adjacency", a.adjacency.as_ref())?;
    set_opt(c, "combine", a.combine.as_ref())
}

fn apply_experiment(c: &mut RunConfig, e: &ExperimentArgs) -> Result<()> {
    apply_preprocess(c, &e.preprocess)?;
    apply_extract(c, &e.extract)?;
    apply_train(c, &e.train)?;
    set_opt(c, "users", e.users)?;
    set_opt(c, "node_caps", e.node_caps.as_ref())?;
    path(c, "manifest", &e.manifest);
    path(c, "out", &e.out);
    Ok(())
}

fn provenance(config: &RunConfig, command: &str) -> String {
    config.provenance(command).to_string()
}

fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

/// Refuses to write over any input file.
fn guard_outputs<'a>(inputs: impl IntoIterator<Item = &'a Path>, outputs: &[PathBuf]) -> Result<()> {
    let inputs: HashSet<PathBuf> = inputs
        .into_iter()
        .map(|p| p.canonicalize().unwrap_or_else(|_| absolute(p)))
        .collect();
    for out in outputs {
        let resolved = out.canonicalize().unwrap_or_else(|_| absolute(out));
        if inputs.contains(&resolved) {
            return Err(usage(format!("output {} would overwrite an input", out.display())));
        }
    }
    Ok(())
}

fn cmd_preprocess(config: &RunConfig, manifest_path: &Path, out: &Path) -> Result<()> {
    let manifest = Manifest::load(manifest_path)?;
    let out_manifest = out.join("manifest.csv");
    let names: Vec<PathBuf> = manifest
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let stem = e.image_path.file_stem().map_or("image".into(), |s| s.to_string_lossy());
            PathBuf::from(&e.user_id).join(format!("{i:05}_{stem}.pgm"))
        })
        .collect();
    let mut outputs: Vec<PathBuf> = names.iter().map(|n| out.join(n)).collect();
    outputs.push(out_manifest.clone());
    let mut inputs: Vec<&Path> = vec![manifest_path];
    for e in &manifest.entries {
        inputs.push(&e.image_path);
        inputs.extend(e.mask_path.as_deref());
    }
    guard_outputs(inputs, &outputs)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    if manifest.is_empty() {
        log::warn!("manifest {} lists no images", manifest_path.display());
    }
    let comments = vec![provenance(config, "preprocess")];
    let options = config.preprocess_options();
    let results: Vec<Result<()>> = manifest
        .entries
        .par_iter()
        .zip(&outputs)
        .map(|(e, target)| {
            let raster = load_pnm(&e.image_path)?;
            let mask = e.mask_path.as_ref().map(load_mask).transpose()?;
            let image = preprocess(&raster, mask.as_ref(), &options)?;
            let dir = target.parent().expect("output inside a user directory");
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            save_pgm(target, &image, &comments)?;
            Ok(())
        })
        .collect();

    let mut entries = Vec::new();
    let mut failed = 0;
    for ((e, name), result) in manifest.entries.iter().zip(&names).zip(results) {
        match result {
            Ok(()) => entries.push(ManifestEntry {
                user_id: e.user_id.clone(),
                image_path: name.clone(),
                mask_path: None,
                distance_m: e.distance_m,
            }),
            Err(err) => {
                failed += 1;
                log::error!("{}: {err:#}", e.image_path.display());
            }
        }
    }
    Manifest::new(entries)?.save(&out_manifest)?;
    if failed > 0 {
        bail!("{failed} of {} images failed to preprocess", manifest.len());
    }
    println!("preprocessed {} images into {}", manifest.len(), out.display());
    Ok(())
}

fn cmd_extract(config: &RunConfig, manifest_path: &Path, out: &Path, preprocessed: bool) -> Result<()> {
    let manifest = Manifest::load(manifest_path)?;
    let mut inputs: Vec<&Path> = vec![manifest_path];
    inputs.extend(manifest.entries.iter().map(|e| e.image_path.as_path()));
    guard_outputs(inputs, &[out.to_path_buf()])?;
    let preprocess_opts = config.preprocess_options();
    let extract_opts = config.extract_options();
    let graphs = manifest
        .entries
        .par_iter()
        .enumerate()
        .map(|(i, e)| {
            let graph = if preprocessed {
                let source = SourceId {
                    user: e.user_id.clone(),
                    session: 0,
                    index: i as u32,
                };
                extract_graph(&load_pgm(&e.image_path)?, source, &extract_opts)
            } else {
                entry_graph(e, i, &preprocess_opts, &extract_opts)
            };
            graph.with_context(|| format!("extracting {}", e.image_path.display()))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut histogram: BTreeMap<usize, usize> = BTreeMap::new();
    for g in &graphs {
        *histogram.entry(g.node_count()).or_default() += 1;
    }
    let usable: Vec<_> = graphs.into_iter().filter(|g| g.is_usable()).collect();
    let unusable = manifest.len() - usable.len();
    if unusable > 0 {
        log::warn!("{unusable} images produced graphs without nodes and were excluded");
    }
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    save_graph_archive(out, &usable, &provenance(config, "extract"))?;

    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    writeln!(w, "node_count,graphs")?;
    for (nodes, count) in &histogram {
        writeln!(w, "{nodes},{count}")?;
    }
    log::info!("wrote {} graphs to {}, {unusable} unusable", usable.len(), out.display());
    Ok(())
}

fn cmd_dataset(config: &RunConfig, graphs_path: &Path, out: &Path) -> Result<()> {
    let (graphs, _) = load_graph_archive(graphs_path)?;
    let targets: Vec<PathBuf> = ["train", "val", "test"].iter().map(|p| out.join(format!("{p}.igds"))).collect();
    guard_outputs([graphs_path], &targets)?;
    let split = split_by_user(&graphs, |g| g.source.user.as_str(), config.split, config.seed)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let prov = provenance(config, "dataset");
    let mut summary = Vec::new();
    for ((part, items), target) in split.parts().into_iter().zip(&targets) {
        let filtered = filter_by_node_cap(items.to_vec(), config.node_cap)?;
        let padded = filtered
            .kept
            .iter()
            .map(|g| pad_graph(g, config.node_cap))
            .collect::<irisgraph::Result<Vec<_>>>()?;
        let dataset = PairDataset::build(padded, derive_seed(config.seed, &format!("pairs/{part}"), 0));
        save_dataset(target, &dataset, &prov)?;
        summary.push(serde_json::json!({
            "part": part,
            "graphs_kept": filtered.kept.len(),
            "graphs_removed": filtered.removed,
            "pairs": dataset.len(),
            "positives": dataset.positives(),
        }));
    }
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn cmd_train(config: &RunConfig, train_path: &Path, val_path: &Path, out: &Path) -> Result<()> {
    let history_path = PathBuf::from(format!("{}.history.csv", out.display()));
    guard_outputs([train_path, val_path], &[out.to_path_buf(), history_path.clone()])?;
    let (train_set, _) = load_dataset(train_path)?;
    let (val_set, _) = load_dataset(val_path)?;
    let train_config = config.train_config();
    let init = ModelParams::init(train_config.architecture, &mut rng_for(train_config.seed, "init", 0));
    let outcome = train_from(init, &train_set, &val_set, &train_config, |r| {
        log::info!(
            "epoch {}: loss {:.5} val acc {:.4} f1 {:.4}",
            r.epoch,
            r.train_loss,
            r.val_accuracy,
            r.val_f1
        )
    })?;

    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let prov = provenance(config, "train");
    save_checkpoint(
        out,
        &Checkpoint {
            params: outcome.params,
            options: train_config.options(),
            provenance: prov.clone(),
        },
    )?;
    let mut file = std::fs::File::create(&history_path)
        .with_context(|| format!("creating {}", history_path.display()))?;
    writeln!(file, "# {prov}")?;
    write_history(file, &outcome.history)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&serde_json::json!({
            "best_epoch": outcome.best_epoch,
            "epochs_run": outcome.history.len(),
            "val": outcome.best_val,
        }))?
    );
    Ok(())
}

fn cmd_eval(config: &RunConfig, checkpoint: &Path, data: &Path, threshold: f64, out: Option<&Path>) -> Result<()> {
    if let Some(out) = out {
        guard_outputs([checkpoint, data], &[out.to_path_buf()])?;
    }
    let ck = load_checkpoint(checkpoint)?;
    let (dataset, _) = load_dataset(data)?;
    let metrics = evaluate(&ck.params, &dataset, &ck.options, threshold)?;
    let text = serde_json::to_string_pretty(&metrics)?;
    if let Some(out) = out {
        let doc = serde_json::json!({
            "provenance": config.provenance("eval"),
            "threshold": threshold,
            "metrics": metrics,
        });
        std::fs::write(out, serde_json::to_string_pretty(&doc)? + "\n")
            .with_context(|| format!("writing {}", out.display()))?;
    }
    println!("{text}");
    Ok(())
}

fn run_experiment(config: &RunConfig, exp: &ExperimentArgs, which: u8) -> Result<()> {
    let manifest = Manifest::load(&exp.manifest)?;
    let stem = format!("exp{which}");
    let targets: Vec<PathBuf> = ["csv", "txt", "json", "timings.json"]
        .iter()
        .map(|ext| exp.out.join(format!("{stem}.{ext}")))
        .collect();
    guard_outputs([exp.manifest.as_path()], &targets)?;
    let pipeline = config.pipeline();
    let (report, timings): (ExperimentReport, Timings) = match which {
        1 => run_experiment1(&manifest, &config.exp1(), &pipeline)?,
        2 => run_experiment2(&manifest, &config.exp2(), &pipeline)?,
        _ => run_experiment3(&manifest, &config.exp3(), &pipeline)?,
    };
    let report = report.with_provenance(config.provenance(&stem));
    let files = write_reports(&report, &timings, &exp.out, &stem)?;
    print!("{}", report.to_text());
    log::info!("reports written to {}", files.csv.parent().unwrap_or(Path::new(".")).display());
    Ok(())
}

fn cmd_synth(config: &RunConfig, out: &Path) -> Result<()> {
    let spec = SyntheticSpec {
        n_users: config.users,
        images_per_user: config.images_per_user,
        image_size: config.size,
        strength: config.strength,
        seed: config.seed,
    };
    let manifest = write_corpus(&spec, out, &provenance(config, "synth"))?;
    println!("wrote {} images for {} users to {}", manifest.len(), spec.n_users, out.display());
    Ok(())
}
