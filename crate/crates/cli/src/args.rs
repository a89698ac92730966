use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "irisgraph", version, about = "Iris images to component graphs and siamese graph verification")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Worker thread cap; results do not depend on it.
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: Option<u16>,
    /// Flat `key = value` configuration file, applied over the defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Base seed; overrides the config file.
    #[arg(long, global = true, env = "IRISGRAPH_SEED")]
    pub seed: Option<u64>,
    /// Any configuration key, applied last; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// More log output on standard error (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Args, Default)]
pub struct PreprocessArgs {
    /// Spectral filter weight, `1/5` to `1/10`, or `none`.
    #[arg(long)]
    pub alpha: Option<String>,
    /// Intensity at or above which pixels count as specular reflections.
    #[arg(long)]
    pub reflect_threshold: Option<u8>,
    /// Skip reflection removal.
    #[arg(long, conflicts_with = "reflect_threshold")]
    pub no_reflect: bool,
    /// Contrast enhancement.
    #[arg(long, value_parser = ["stretch", "histogram"])]
    pub equalize: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct ExtractArgs {
    /// Intensity bin width.
    #[arg(long)]
    pub delta: Option<u8>,
}

#[derive(Debug, Args, Default)]
pub struct TrainArgs {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// Adjacency used by the graph convolutions.
    #[arg(long, value_parser = ["binary", "weighted"])]
    pub adjacency: Option<String>,
    /// How two embeddings are combined before the head.
    #[arg(long, value_parser = ["absolute", "signed"])]
    pub combine: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Preprocess every manifest image into a canonical graymap.
    Preprocess {
        #[arg(long)]
        manifest: PathBuf,
        /// Output directory; receives the images and a new manifest.csv.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        preprocess: PreprocessArgs,
    },
    /// Convert manifest images to a graph archive; prints a node-count histogram.
    Extract {
        #[arg(long)]
        manifest: PathBuf,
        /// Graph archive to write.
        #[arg(long)]
        out: PathBuf,
        /// The manifest lists outputs of `preprocess`; use them as they are.
        #[arg(long)]
        preprocessed: bool,
        #[command(flatten)]
        extract: ExtractArgs,
        #[command(flatten)]
        preprocess: PreprocessArgs,
    },
    /// Split a graph archive by user, apply the node cap and build pair datasets.
    Dataset {
        /// Graph archive from `extract`.
        #[arg(long)]
        graphs: PathBuf,
        /// Directory receiving train.igds, val.igds and test.igds.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        node_cap: Option<usize>,
    },
    /// Train the siamese network; writes a checkpoint and its epoch history.
    Train {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        val: PathBuf,
        /// Checkpoint to write; the history goes next to it as `<out>.history.csv`.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        train_args: TrainArgs,
    },
    /// Evaluate a checkpoint on a pair dataset; prints metrics as JSON.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Decision threshold on the match probability.
        #[arg(long, default_value_t = irisgraph::gsnn::DEFAULT_THRESHOLD)]
        threshold: f64,
        /// Also write the metrics, with provenance, to this JSON file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Node-cap sweep without spectral filtering.
    Exp1 {
        #[command(flatten)]
        exp: ExperimentArgs,
    },
    /// Spectral filter by node cap grid.
    Exp2 {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Comma-separated filters, e.g. `1/10,1/7`.
        #[arg(long)]
        alphas: Option<String>,
        /// Configurations keeping a smaller fraction of graphs are not trained.
        #[arg(long)]
        retention_floor: Option<f64>,
    },
    /// User-count scaling for the two selected configurations.
    Exp3 {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Comma-separated user counts.
        #[arg(long)]
        user_counts: Option<String>,
    },
    /// Write a synthetic corpus with a manifest.
    Synth {
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        users: Option<usize>,
        #[arg(long)]
        images: Option<usize>,
        /// Per-image perturbation amplitude in [0, 1].
        #[arg(long)]
        strength: Option<f64>,
        /// Image side length.
        #[arg(long)]
        size: Option<usize>,
    },
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Report directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Number of users drawn from the manifest.
    #[arg(long)]
    pub users: Option<usize>,
    /// Comma-separated node caps.
    #[arg(long)]
    pub node_caps: Option<String>,
    #[command(flatten)]
    pub preprocess: PreprocessArgs,
    #[command(flatten)]
    pub extract: ExtractArgs,
    #[command(flatten)]
    pub train: TrainArgs,
}
