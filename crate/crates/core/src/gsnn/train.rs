use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::metrics::{Metrics, DEFAULT_THRESHOLD};
use super::model::{batch_gradient, pair_probabilities, prepare_all, AdjacencyMode, Combine, ModelOptions, PreparedGraph};
use super::params::{Architecture, ModelParams};
use crate::dataset::{PairDataset, PairIndex};
use crate::error::{Error, Result};
use crate::seed::rng_for;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a strict validation-F1 improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    pub adjacency: AdjacencyMode,
    pub combine: Combine,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub architecture: Architecture,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 32,
            max_epochs: 100,
            patience: 10,
            seed: 0,
            adjacency: AdjacencyMode::Binary,
            combine: Combine::Absolute,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            architecture: Architecture::default(),
        }
    }
}

impl TrainConfig {
    pub fn options(&self) -> ModelOptions {
        ModelOptions {
            adjacency: self.adjacency,
            combine: self.combine,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = self.learning_rate > 0.0
            && self.batch_size > 0
            && self.max_epochs > 0
            && self.patience > 0
            && self.epsilon > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2);
        if !positive {
            return Err(Error::Config(format!("invalid training configuration {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: f64,
    pub val_f1: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters of the best-validation-F1 epoch.
    pub params: ModelParams,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val: Metrics,
}

/// A dataset with its parameter-independent graph operands.
pub struct PreparedDataset<'a> {
    pub dataset: &'a PairDataset,
    pub graphs: Vec<PreparedGraph>,
}

impl<'a> PreparedDataset<'a> {
    pub fn new(dataset: &'a PairDataset, mode: AdjacencyMode) -> Self {
        PreparedDataset {
            dataset,
            graphs: prepare_all(&dataset.graphs, mode),
        }
    }

    pub fn probabilities(&self, params: &ModelParams, combine: Combine) -> Result<Vec<f64>> {
        pair_probabilities(&self.graphs, &self.dataset.pairs, params, combine)
    }

    pub fn evaluate(&self, params: &ModelParams, combine: Combine, threshold: f64) -> Result<Metrics> {
        if self.dataset.is_empty() {
            return Err(Error::Empty("evaluation pair set".into()));
        }
        let probs = self.probabilities(params, combine)?;
        let labels: Vec<bool> = self.dataset.pairs.iter().map(|p| p.label).collect();
        Ok(Metrics::from_probabilities(&probs, &labels, threshold))
    }
}

/// Metrics of `params` on every pair of `dataset`.
pub fn evaluate(params: &ModelParams, dataset: &PairDataset, options: &ModelOptions, threshold: f64) -> Result<Metrics> {
    PreparedDataset::new(dataset, options.adjacency).evaluate(params, options.combine, threshold)
}

/// Mini-batch Adam on binary cross-entropy with early stopping on
/// validation F1. The result depends only on the inputs and `config`.
pub fn train(train_set: &PairDataset, val_set: &PairDataset, config: &TrainConfig) -> Result<TrainOutcome> {
    let init = ModelParams::init(config.architecture, &mut rng_for(config.seed, "init", 0));
    train_from(init, train_set, val_set, config, |_| {})
}

/// [`train`] from given initial parameters, reporting each epoch.
pub fn train_from(
    init: ModelParams,
    train_set: &PairDataset,
    val_set: &PairDataset,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::Empty("training pair set".into()));
    }
    if val_set.is_empty() {
        return Err(Error::Empty("validation pair set".into()));
    }
    let train_prep = PreparedDataset::new(train_set, config.adjacency);
    let val_prep = PreparedDataset::new(val_set, config.adjacency);

    let mut params = init;
    let mut adam = Adam::new(&params, config.learning_rate, config.beta1, config.beta2, config.epsilon);
    let mut order: Vec<PairIndex> = train_set.pairs.clone();
    let mut history = Vec::new();
    let mut best: Option<(ModelParams, usize, Metrics)> = None;
    let mut stale = 0;

    for epoch in 1..=config.max_epochs {
        order.clone_from(&train_set.pairs);
        order.shuffle(&mut rng_for(config.seed, "shuffle", epoch as u64));
        let mut loss_sum = 0.0;
        for (batch, chunk) in order.chunks(config.batch_size).enumerate() {
            let g = batch_gradient(&train_prep.graphs, chunk, &params, config.combine)?;
            let batch_loss: f64 = g.losses.iter().sum();
            if !batch_loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    batch,
                    loss: batch_loss / chunk.len() as f64,
                });
            }
            loss_sum += batch_loss;
            adam.update(&mut params, &g.grads);
            if !params.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    batch,
                    loss: f64::NAN,
                });
            }
        }
        let val = val_prep.evaluate(&params, config.combine, DEFAULT_THRESHOLD)?;
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / order.len() as f64,
            val_accuracy: val.accuracy,
            val_f1: val.f1,
        };
        log::info!(
            "epoch {epoch}: loss {:.6} val acc {:.4} f1 {:.4}",
            record.train_loss,
            val.accuracy,
            val.f1
        );
        on_epoch(&record);
        history.push(record);

        let improved = best.as_ref().map_or(true, |(_, _, m)| val.f1 > m.f1);
        if improved {
            best = Some((params.clone(), epoch, val));
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                log::info!("early stop after epoch {epoch}");
                break;
            }
        }
    }
    let (params, best_epoch, best_val) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        params,
        history,
        best_epoch,
        best_val,
    })
}

pub const HISTORY_HEADER: &str = "epoch,train_loss,val_accuracy,val_f1";

pub fn write_history<W: Write>(w: W, history: &[EpochRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in history {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_history(path: impl AsRef<Path>, history: &[EpochRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_history(file, history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::PaddedGraph;
    use crate::graph_extract::{Edge, SourceId};
    use ndarray::Array2;

    fn tiny_arch() -> Architecture {
        Architecture {
            features: 7,
            gcn: [16, 12],
            embedding: 12,
            head: [16, 8, 6],
        }
    }

    /// Users differ in a feature level; graphs within a user vary slightly.
    fn separable(users: usize, per_user: usize, seed: u64) -> PairDataset {
        let mut graphs = Vec::new();
        for u in 0..users {
            for k in 0..per_user {
                let level = 0.15 + 0.7 * u as f64 / users as f64;
                let n = 3 + (k + u) % 3;
                let feats = Array2::from_shape_fn((n, 7), |(i, f)| {
                    let jitter = ((i * 7 + f + k * 13) % 5) as f64 * 0.01;
                    if f % 2 == u % 2 {
                        level + jitter
                    } else {
                        1.0 - level - jitter
                    }
                });
                let edges = (1..n).map(|j| Edge { i: j - 1, j, weight: 1.0 }).collect();
                let source = SourceId {
                    user: format!("u{u}"),
                    session: 1,
                    index: k as u32,
                };
                graphs.push(PaddedGraph::from_parts(10, format!("u{u}"), source, feats, edges).unwrap());
            }
        }
        PairDataset::build(graphs, seed)
    }

    fn config() -> TrainConfig {
        TrainConfig {
            architecture: tiny_arch(),
            learning_rate: 5e-3,
            batch_size: 8,
            max_epochs: 5,
            seed: 4,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn one_batch_one_epoch_changes_params() {
        let ds = separable(2, 3, 1);
        let cfg = TrainConfig {
            max_epochs: 1,
            batch_size: 1000,
            ..config()
        };
        let init = ModelParams::init(cfg.architecture, &mut rng_for(cfg.seed, "init", 0));
        let out = train(&ds, &ds, &cfg).unwrap();
        assert_ne!(out.params, init);
        assert!(out.history[0].train_loss.is_finite());
        assert_eq!(out.history.len(), 1);
    }

    #[test]
    fn deterministic_history() {
        let ds = separable(3, 4, 2);
        let a = train(&ds, &ds, &config()).unwrap();
        let b = train(&ds, &ds, &config()).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn loss_decreases_on_separable_pairs() {
        let ds = separable(4, 5, 3);
        let out = train(&ds, &ds, &config()).unwrap();
        let losses: Vec<f64> = out.history.iter().map(|r| r.train_loss).collect();
        assert_eq!(losses.len(), 5);
        assert!(losses.windows(2).all(|w| w[1] < w[0]), "{losses:?}");
    }

    #[test]
    fn rejects_empty_sets() {
        let ds = separable(2, 3, 1);
        assert!(matches!(train(&PairDataset::default(), &ds, &config()), Err(Error::Empty(_))));
        assert!(matches!(train(&ds, &PairDataset::default(), &config()), Err(Error::Empty(_))));
    }

    #[test]
    fn history_csv() {
        let mut buf = Vec::new();
        let rec = EpochRecord {
            epoch: 1,
            train_loss: 0.5,
            val_accuracy: 0.75,
            val_f1: 0.8,
        };
        write_history(&mut buf, &[rec]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{HISTORY_HEADER}\n1,0.5,0.75,0.8\n"));
    }
}
