//! Central finite-difference check of [`backward`] over every parameter.
//!
//! Each perturbed loss is recomputed from the first layer the parameter
//! touches onward; upstream activations come from an unperturbed pass.
//! A parameter feeding a single unit recomputes that unit directly and
//! passes its change to the next layer as a rank-one update.

use ndarray::{Array1, Axis};

use super::model::{
    affine, backward, bce_loss, branch_trace, combine, head_forward, output_probability, BranchTrace, Combine, HeadTrace,
    ModelOptions, PreparedGraph,
};
use super::params::{Dense, ModelParams, LAYER_NAMES};
use crate::dataset::GraphPair;
use crate::error::Result;

/// Denominator floor of the relative error, so that gradients that are
/// zero up to rounding compare on an absolute scale.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    pub tensor: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub checked: usize,
    pub max_relative_error: f64,
    pub worst: Option<Mismatch>,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_ERROR_FLOOR)
}

struct Evaluator<'a> {
    graphs: [PreparedGraph; 2],
    traces: [BranchTrace; 2],
    head: HeadTrace,
    options: &'a ModelOptions,
    label: bool,
}

fn relu(v: f64) -> f64 {
    v.max(0.0)
}

impl Evaluator<'_> {
    fn head_layers<'p>(params: &'p ModelParams) -> [&'p Dense; 3] {
        [&params.head1, &params.head2, &params.head3]
    }

    /// Activation feeding hidden layer `k + 1` (`k = 0` is the head input).
    fn head_activation(&self, k: usize) -> &Array1<f64> {
        if k == 0 {
            &self.head.input
        } else {
            &self.head.post[k - 1]
        }
    }

    /// Loss given the full activation after hidden layer `k`.
    fn finish_head(&self, params: &ModelParams, k: usize, mut act: Array1<f64>) -> f64 {
        for d in &Self::head_layers(params)[k..] {
            act = affine(&act, d).mapv(relu);
        }
        let logit = act.dot(&params.output.weight.column(0)) + params.output.bias[0];
        bce_loss(output_probability(logit), self.label)
    }

    /// Loss when only unit `j` of the activation after hidden layer `k`
    /// takes `value`; the next pre-activation gets a rank-one update.
    fn head_unit_changed(&self, params: &ModelParams, k: usize, j: usize, value: f64) -> f64 {
        let delta = value - self.head_activation(k)[j];
        if k == 3 {
            let logit = self.head.logit + delta * params.output.weight[[j, 0]];
            return bce_loss(output_probability(logit), self.label);
        }
        let mut z = self.head.pre[k].clone();
        z.scaled_add(delta, &Self::head_layers(params)[k].weight.row(j));
        self.finish_head(params, k + 1, z.mapv(relu))
    }

    fn loss_full(&self, params: &ModelParams) -> Result<f64> {
        let ta = branch_trace(&self.graphs[0], params)?;
        let tb = branch_trace(&self.graphs[1], params)?;
        Ok(self.finish_head(params, 0, combine(&ta.embedding, &tb.embedding, self.options.combine)))
    }

    /// Loss after recomputing column `col` of the second convolution layer.
    fn loss_gcn2_column(&self, params: &ModelParams, col: usize) -> f64 {
        let embeddings: Vec<Array1<f64>> = (0..2)
            .map(|b| {
                let (g, t) = (&self.graphs[b], &self.traces[b]);
                let hw = t.h1.dot(&params.gcn2.weight.column(col));
                let z = g.a_hat.dot(&hw) + params.gcn2.bias[col];
                let pooled = z.mapv(f64::tanh).sum() / g.real_nodes() as f64;
                let mut pre = t.embed_pre.clone();
                pre.scaled_add(pooled - t.pooled[col], &params.embed.weight.row(col));
                pre.mapv(relu)
            })
            .collect();
        self.finish_head(params, 0, combine(&embeddings[0], &embeddings[1], self.options.combine))
    }

    /// Loss after recomputing unit `col` of the embedding layer.
    fn loss_embed_column(&self, params: &ModelParams, col: usize) -> f64 {
        let unit = |t: &BranchTrace| relu(t.pooled.dot(&params.embed.weight.column(col)) + params.embed.bias[col]);
        let (a, b) = (unit(&self.traces[0]), unit(&self.traces[1]));
        let d = match self.options.combine {
            Combine::Absolute => (a - b).abs(),
            Combine::Signed => a - b,
        };
        self.head_unit_changed(params, 0, col, d)
    }

    /// Loss after recomputing unit `col` of hidden head layer `layer` (1..=3).
    fn loss_head_column(&self, params: &ModelParams, layer: usize, col: usize) -> f64 {
        let d = Self::head_layers(params)[layer - 1];
        let z = self.head_activation(layer - 1).dot(&d.weight.column(col)) + d.bias[col];
        self.head_unit_changed(params, layer, col, relu(z))
    }

    fn loss_output(&self, params: &ModelParams) -> f64 {
        self.finish_head(params, 3, self.head.post[2].clone())
    }
}

/// Compares [`backward`] against central differences with step `step` on
/// every parameter of `params`.
pub fn check_pair(pair: GraphPair<'_>, params: &ModelParams, options: &ModelOptions, step: f64) -> Result<GradCheck> {
    let analytic = backward(pair, params, options)?.grads;
    let graphs = [
        PreparedGraph::new(pair.a, options.adjacency),
        PreparedGraph::new(pair.b, options.adjacency),
    ];
    let traces = [branch_trace(&graphs[0], params)?, branch_trace(&graphs[1], params)?];
    let head = head_forward(combine(&traces[0].embedding, &traces[1].embedding, options.combine), params);
    let eval = Evaluator {
        graphs,
        traces,
        head,
        options,
        label: pair.label,
    };

    let mut work = params.clone();
    let analytic_tensors = analytic.tensors();
    let originals = params.tensors();
    let mut report = GradCheck {
        checked: 0,
        max_relative_error: 0.0,
        worst: None,
    };
    for (t, (name, grad)) in analytic_tensors.iter().enumerate() {
        let layer = t / 2;
        let is_weight = t % 2 == 0;
        let out_width = params.arch.layer_shapes()[layer].1;
        for index in 0..grad.len() {
            let original = originals[t].1[index];
            let col = if is_weight { index % out_width } else { index };
            let mut loss_at = |value: f64| -> Result<f64> {
                set_entry(&mut work, t, index, value);
                Ok(match LAYER_NAMES[layer] {
                    "gcn1" => eval.loss_full(&work)?,
                    "gcn2" => eval.loss_gcn2_column(&work, col),
                    "embed" => eval.loss_embed_column(&work, col),
                    "head1" => eval.loss_head_column(&work, 1, col),
                    "head2" => eval.loss_head_column(&work, 2, col),
                    "head3" => eval.loss_head_column(&work, 3, col),
                    _ => eval.loss_output(&work),
                })
            };
            let plus = loss_at(original + step)?;
            let minus = loss_at(original - step)?;
            set_entry(&mut work, t, index, original);
            let numeric = (plus - minus) / (2.0 * step);
            let err = relative_error(grad[index], numeric);
            report.checked += 1;
            if err > report.max_relative_error || report.worst.is_none() {
                report.max_relative_error = report.max_relative_error.max(err);
                report.worst = Some(Mismatch {
                    tensor: name.clone(),
                    index,
                    analytic: grad[index],
                    numeric,
                });
            }
        }
    }
    Ok(report)
}

fn set_entry(params: &mut ModelParams, tensor: usize, index: usize, value: f64) {
    let layer = &mut params.layers_mut()[tensor / 2];
    if tensor % 2 == 0 {
        let cols = layer.weight.len_of(Axis(1));
        layer.weight[[index / cols, index % cols]] = value;
    } else {
        layer.bias[index] = value;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::PaddedGraph;
    use crate::graph_extract::{Edge, SourceId};
    use crate::gsnn::params::Architecture;
    use crate::gsnn::{AdjacencyMode, Combine};
    use crate::seed::rng_for;
    use ndarray::Array2;
    use rand::Rng;

    fn random_graph(rng: &mut impl Rng, n: usize, user: &str) -> PaddedGraph {
        let feats = Array2::from_shape_simple_fn((n, 7), || rng.gen_range(0.0..1.0));
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.gen_bool(0.5) {
                    edges.push(Edge {
                        i,
                        j,
                        weight: rng.gen_range(0.0..30.0),
                    });
                }
            }
        }
        PaddedGraph::from_parts(n, user.into(), SourceId::default(), feats, edges).unwrap()
    }

    fn tiny() -> Architecture {
        Architecture {
            features: 7,
            gcn: [11, 7],
            embedding: 7,
            head: [13, 7, 5],
        }
    }

    #[test]
    fn tiny_full_check_all_modes() {
        for (seed, mode, comb) in [
            (1, AdjacencyMode::Binary, Combine::Absolute),
            (2, AdjacencyMode::Weighted, Combine::Absolute),
            (3, AdjacencyMode::Binary, Combine::Signed),
        ] {
            let mut rng = rng_for(seed, "gradcheck", 0);
            let a = random_graph(&mut rng, 5, "x");
            let b = random_graph(&mut rng, 4, "y");
            let mut params = ModelParams::init(tiny(), &mut rng);
            for layer in params.layers_mut() {
                layer.bias.mapv_inplace(|_| rng.gen_range(-0.1..0.1));
            }
            let options = ModelOptions {
                adjacency: mode,
                combine: comb,
            };
            let pair = GraphPair { a: &a, b: &b, label: seed % 2 == 0 };
            let report = check_pair(pair, &params, &options, 1e-5).unwrap();
            assert_eq!(report.checked, tiny().parameter_count());
            assert!(report.max_relative_error <= 1e-4, "{report:?}");
        }
    }

    #[test]
    fn identical_zero_feature_pair_has_zero_branch_gradients() {
        let g = PaddedGraph::from_parts(
            4,
            "u".into(),
            SourceId::default(),
            Array2::zeros((3, 7)),
            vec![Edge { i: 0, j: 2, weight: 1.0 }],
        )
        .unwrap();
        let params = ModelParams::init(tiny(), &mut rng_for(5, "init", 0));
        let grads = backward(GraphPair { a: &g, b: &g, label: true }, &params, &ModelOptions::default())
            .unwrap()
            .grads;
        for layer in [&grads.gcn1, &grads.gcn2, &grads.embed] {
            assert!(layer.weight.iter().chain(layer.bias.iter()).all(|&v| v == 0.0));
        }
    }
}
