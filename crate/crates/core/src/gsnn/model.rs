//! Forward and backward passes of the graph siamese network.
//!
//! Each branch computes, over the real-node block of a graph,
//!
//! ```text
//! H1 = tanh(Â X W1 + b1)
//! H2 = tanh(Â H1 W2 + b2)
//! e  = relu(mean_rows(H2) W3 + b3)
//! ```
//!
//! and the head maps `|e_a - e_b|` through three ReLU layers and a single
//! sigmoid unit. Padded rows of `Â` are zero, so they never feed the real
//! rows and are excluded from pooling; computing on the real block alone is
//! therefore exact and makes embeddings independent of the padding cap.

use std::collections::HashMap;

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView1, Axis, Zip};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::params::{Architecture, Dense, ModelParams};
use crate::dataset::{GraphPair, PaddedGraph, PairIndex};
use crate::error::{Error, Result};

/// How edges enter the adjacency matrix before normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdjacencyMode {
    /// Every edge contributes 1.
    #[default]
    Binary,
    /// Edges contribute their center distance.
    Weighted,
}

/// How the two branch embeddings are merged before the head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Combine {
    /// `|e_a - e_b|`, symmetric in the pair order.
    #[default]
    Absolute,
    /// `e_a - e_b`.
    Signed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ModelOptions {
    pub adjacency: AdjacencyMode,
    pub combine: Combine,
}

/// Probability clamp applied inside the loss.
pub const LOSS_CLAMP: f64 = 1e-12;

/// Real-block adjacency (`real_nodes x real_nodes`) without self-loops.
pub fn adjacency_block(graph: &PaddedGraph, mode: AdjacencyMode) -> Array2<f64> {
    let n = graph.real_nodes();
    let mut a = Array2::zeros((n, n));
    for e in graph.edges() {
        let w = match mode {
            AdjacencyMode::Binary => 1.0,
            AdjacencyMode::Weighted => e.weight,
        };
        a[[e.i, e.j]] = w;
        a[[e.j, e.i]] = w;
    }
    a
}

/// `D^-1/2 (A + I) D^-1/2` where every row of `a` is a real node.
fn normalize_block(a: &Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    let inv_sqrt: Vec<f64> = (0..n).map(|i| 1.0 / (1.0 + a.row(i).sum()).sqrt()).collect();
    Array2::from_shape_fn((n, n), |(i, j)| {
        let v = a[[i, j]] + if i == j { 1.0 } else { 0.0 };
        v * (inv_sqrt[i] * inv_sqrt[j])
    })
}

/// Normalizes a full padded adjacency matrix whose first `real_nodes`
/// rows are real. Self-loops are added on real rows only; padded rows and
/// columns stay zero.
pub fn normalize_dense(adjacency: &Array2<f64>, real_nodes: usize) -> Result<Array2<f64>> {
    let (rows, cols) = adjacency.dim();
    if rows != cols || real_nodes > rows {
        return Err(Error::Dimension(format!(
            "adjacency {rows}x{cols} with {real_nodes} real nodes"
        )));
    }
    for i in 0..rows {
        for j in 0..=i {
            let (x, y) = (adjacency[[i, j]], adjacency[[j, i]]);
            if x != y || x < 0.0 {
                return Err(Error::Dimension(format!(
                    "adjacency must be symmetric and non-negative; ({i},{j})={x}, ({j},{i})={y}"
                )));
            }
            if (i >= real_nodes || j >= real_nodes) && x != 0.0 {
                return Err(Error::Dimension(format!("padded entry ({i},{j}) is non-zero")));
            }
        }
    }
    let block = adjacency.slice(s![..real_nodes, ..real_nodes]).to_owned();
    let mut out = Array2::zeros((rows, rows));
    out.slice_mut(s![..real_nodes, ..real_nodes]).assign(&normalize_block(&block));
    Ok(out)
}

/// Normalized `cap x cap` operator of a padded graph.
pub fn normalize_adjacency(graph: &PaddedGraph, mode: AdjacencyMode) -> Array2<f64> {
    let n = graph.real_nodes();
    let mut out = Array2::zeros((graph.cap, graph.cap));
    out.slice_mut(s![..n, ..n]).assign(&normalize_block(&adjacency_block(graph, mode)));
    out
}

/// One graph-convolution layer: `tanh(Â H W + bias)`.
pub fn gcn_forward(a_hat: &Array2<f64>, h: &Array2<f64>, weight: &Array2<f64>, bias: &Array1<f64>) -> Result<Array2<f64>> {
    if a_hat.ncols() != h.nrows() || h.ncols() != weight.nrows() || weight.ncols() != bias.len() {
        return Err(Error::Dimension(format!(
            "gcn operands {:?} x {:?} x {:?} + {}",
            a_hat.dim(),
            h.dim(),
            weight.dim(),
            bias.len()
        )));
    }
    let mut z = a_hat.dot(h).dot(weight);
    z += bias;
    Ok(z.mapv_into(f64::tanh))
}

/// Column means over the first `real_nodes` rows.
pub fn masked_mean_pool(h: &Array2<f64>, real_nodes: usize) -> Result<Array1<f64>> {
    if real_nodes == 0 {
        return Err(Error::UnusableGraph);
    }
    if real_nodes > h.nrows() {
        return Err(Error::Dimension(format!("{real_nodes} real nodes in {} rows", h.nrows())));
    }
    Ok(h.slice(s![..real_nodes, ..]).sum_axis(Axis(0)) / real_nodes as f64)
}

/// Parameter-independent per-graph operands, computed once per dataset.
#[derive(Debug, Clone)]
pub struct PreparedGraph {
    pub a_hat: Array2<f64>,
    /// `Â X` over the real block.
    pub ax: Array2<f64>,
}

impl PreparedGraph {
    pub fn new(graph: &PaddedGraph, mode: AdjacencyMode) -> Self {
        let a_hat = normalize_block(&adjacency_block(graph, mode));
        let ax = a_hat.dot(graph.node_features());
        PreparedGraph { a_hat, ax }
    }

    pub fn real_nodes(&self) -> usize {
        self.a_hat.nrows()
    }
}

pub fn prepare_all(graphs: &[PaddedGraph], mode: AdjacencyMode) -> Vec<PreparedGraph> {
    graphs.par_iter().map(|g| PreparedGraph::new(g, mode)).collect()
}

/// Intermediate activations of one branch pass.
#[derive(Debug, Clone)]
pub struct BranchTrace {
    pub h1: Array2<f64>,
    pub h2: Array2<f64>,
    pub pooled: Array1<f64>,
    pub embed_pre: Array1<f64>,
    pub embedding: Array1<f64>,
}

fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Sigmoid kept strictly inside (0, 1) even when it saturates.
pub(crate) fn output_probability(logit: f64) -> f64 {
    sigmoid(logit).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `x W + b` accumulated row by row over contiguous weight rows.
pub(crate) fn affine(x: &Array1<f64>, layer: &Dense) -> Array1<f64> {
    let mut y = layer.bias.clone();
    for (xk, row) in x.iter().zip(layer.weight.rows()) {
        if *xk != 0.0 {
            y.scaled_add(*xk, &row);
        }
    }
    y
}

pub fn branch_trace(graph: &PreparedGraph, params: &ModelParams) -> Result<BranchTrace> {
    let n = graph.real_nodes();
    if n == 0 {
        return Err(Error::UnusableGraph);
    }
    if graph.ax.ncols() != params.arch.features {
        return Err(Error::Dimension(format!(
            "graph has {} features, model expects {}",
            graph.ax.ncols(),
            params.arch.features
        )));
    }
    let mut z1 = graph.ax.dot(&params.gcn1.weight);
    z1 += &params.gcn1.bias;
    let h1 = z1.mapv_into(f64::tanh);

    let mut z2 = graph.a_hat.dot(&h1.dot(&params.gcn2.weight));
    z2 += &params.gcn2.bias;
    let h2 = z2.mapv_into(f64::tanh);

    let pooled = masked_mean_pool(&h2, n)?;
    let embed_pre = affine(&pooled, &params.embed);
    let embedding = embed_pre.mapv(relu);
    Ok(BranchTrace {
        h1,
        h2,
        pooled,
        embed_pre,
        embedding,
    })
}

/// Gradients of the three branch layers.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchGrads {
    pub gcn1: Dense,
    pub gcn2: Dense,
    pub embed: Dense,
}

impl BranchGrads {
    pub fn zeros(arch: &Architecture) -> Self {
        let [l1, l2, l3, ..] = arch.layer_shapes();
        BranchGrads {
            gcn1: Dense::zeros(l1.0, l1.1),
            gcn2: Dense::zeros(l2.0, l2.1),
            embed: Dense::zeros(l3.0, l3.1),
        }
    }

    pub fn add_into(&self, grads: &mut ModelParams) {
        grads.gcn1.add_assign(&self.gcn1);
        grads.gcn2.add_assign(&self.gcn2);
        grads.embed.add_assign(&self.embed);
    }
}

fn outer_accumulate(target: &mut Array2<f64>, left: ArrayView1<f64>, right: ArrayView1<f64>) {
    let l = left.insert_axis(Axis(1));
    let r = right.insert_axis(Axis(0));
    general_mat_mul(1.0, &l, &r, 1.0, target);
}

/// Accumulates branch gradients given `d_embedding = dL/de`.
pub fn branch_backward(
    graph: &PreparedGraph,
    trace: &BranchTrace,
    d_embedding: &Array1<f64>,
    params: &ModelParams,
    grads: &mut BranchGrads,
) {
    let n = graph.real_nodes() as f64;

    let mut d_pre = d_embedding.clone();
    Zip::from(&mut d_pre).and(&trace.embed_pre).for_each(|d, &z| {
        if z <= 0.0 {
            *d = 0.0;
        }
    });
    outer_accumulate(&mut grads.embed.weight, trace.pooled.view(), d_pre.view());
    grads.embed.bias += &d_pre;
    let d_pooled = params.embed.weight.dot(&d_pre) / n;

    // dZ2 = (1 - H2^2) * broadcast(dpooled / n)
    let mut dz2 = trace.h2.mapv(|h| 1.0 - h * h);
    dz2 *= &d_pooled;
    grads.gcn2.bias += &dz2.sum_axis(Axis(0));
    // Â is symmetric, so Â^T dZ2 = Â dZ2.
    let m = graph.a_hat.dot(&dz2);
    general_mat_mul(1.0, &trace.h1.t(), &m, 1.0, &mut grads.gcn2.weight);

    let mut dz1 = m.dot(&params.gcn2.weight.t());
    Zip::from(&mut dz1).and(&trace.h1).for_each(|d, &h| *d *= 1.0 - h * h);
    grads.gcn1.bias += &dz1.sum_axis(Axis(0));
    general_mat_mul(1.0, &graph.ax.t(), &dz1, 1.0, &mut grads.gcn1.weight);
}

/// Activations of the similarity head.
#[derive(Debug, Clone)]
pub struct HeadTrace {
    pub input: Array1<f64>,
    pub pre: [Array1<f64>; 3],
    pub post: [Array1<f64>; 3],
    pub logit: f64,
    pub probability: f64,
}

pub fn combine(a: &Array1<f64>, b: &Array1<f64>, mode: Combine) -> Array1<f64> {
    match mode {
        Combine::Absolute => Zip::from(a).and(b).map_collect(|&x, &y| (x - y).abs()),
        Combine::Signed => a - b,
    }
}

/// Splits `dL/d(input)` into the two embedding gradients. The absolute
/// value takes subgradient 0 where the embeddings coincide.
fn combine_backward(a: &Array1<f64>, b: &Array1<f64>, d_input: &Array1<f64>, mode: Combine) -> (Array1<f64>, Array1<f64>) {
    match mode {
        Combine::Absolute => {
            let da = Zip::from(a).and(b).and(d_input).map_collect(|&x, &y, &d| {
                if x > y {
                    d
                } else if x < y {
                    -d
                } else {
                    0.0
                }
            });
            let db = da.mapv(|v| -v);
            (da, db)
        }
        Combine::Signed => (d_input.clone(), d_input.mapv(|v| -v)),
    }
}

pub fn head_forward(input: Array1<f64>, params: &ModelParams) -> HeadTrace {
    let z1 = affine(&input, &params.head1);
    let a1 = z1.mapv(relu);
    let z2 = affine(&a1, &params.head2);
    let a2 = z2.mapv(relu);
    let z3 = affine(&a2, &params.head3);
    let a3 = z3.mapv(relu);
    let logit = a3.dot(&params.output.weight.column(0)) + params.output.bias[0];
    let probability = output_probability(logit);
    HeadTrace {
        input,
        pre: [z1, z2, z3],
        post: [a1, a2, a3],
        logit,
        probability,
    }
}

/// Backpropagates `dL/dlogit` through the head; returns `dL/d(input)`.
fn head_backward(trace: &HeadTrace, d_logit: f64, params: &ModelParams, grads: &mut ModelParams) -> Array1<f64> {
    let [a1, a2, a3] = &trace.post;
    grads
        .output
        .weight
        .column_mut(0)
        .scaled_add(d_logit, a3);
    grads.output.bias[0] += d_logit;
    let mut d_post = params.output.weight.column(0).to_owned() * d_logit;

    let inputs = [&trace.input, a1, a2];
    let layers = [&params.head1, &params.head2, &params.head3];
    for k in (0..3).rev() {
        let mut dz = d_post;
        Zip::from(&mut dz).and(&trace.pre[k]).for_each(|d, &z| {
            if z <= 0.0 {
                *d = 0.0;
            }
        });
        let grad = match k {
            0 => &mut grads.head1,
            1 => &mut grads.head2,
            _ => &mut grads.head3,
        };
        outer_accumulate(&mut grad.weight, inputs[k].view(), dz.view());
        grad.bias += &dz;
        d_post = layers[k].weight.dot(&dz);
    }
    d_post
}

/// Binary cross-entropy with the probability clamped to `[1e-12, 1 - 1e-12]`.
pub fn bce_loss(probability: f64, label: bool) -> f64 {
    let p = probability.clamp(LOSS_CLAMP, 1.0 - LOSS_CLAMP);
    if label {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// `dL/dlogit` of [`bce_loss`] through the sigmoid; zero where the clamp is active.
fn bce_logit_gradient(probability: f64, label: bool) -> f64 {
    if !(LOSS_CLAMP..=1.0 - LOSS_CLAMP).contains(&probability) {
        return 0.0;
    }
    probability - if label { 1.0 } else { 0.0 }
}

pub fn embed(graph: &PaddedGraph, params: &ModelParams, options: &ModelOptions) -> Result<Array1<f64>> {
    branch_forward(graph, params, options.adjacency)
}

/// The branch embedding of one padded graph.
pub fn branch_forward(graph: &PaddedGraph, params: &ModelParams, mode: AdjacencyMode) -> Result<Array1<f64>> {
    Ok(branch_trace(&PreparedGraph::new(graph, mode), params)?.embedding)
}

/// Same-user probability of a pair.
pub fn siamese_forward(pair: GraphPair<'_>, params: &ModelParams, options: &ModelOptions) -> Result<f64> {
    let ea = embed(pair.a, params, options)?;
    let eb = embed(pair.b, params, options)?;
    Ok(head_forward(combine(&ea, &eb, options.combine), params).probability)
}

/// Loss, probability and parameter gradients of one pair.
#[derive(Debug, Clone)]
pub struct PairGradient {
    pub loss: f64,
    pub probability: f64,
    pub grads: ModelParams,
}

/// Analytic gradient of `scale * bce_loss` for one pair. Both branches
/// accumulate into the same shared-layer gradients.
pub fn backward_scaled(pair: GraphPair<'_>, params: &ModelParams, options: &ModelOptions, scale: f64) -> Result<PairGradient> {
    let ga = PreparedGraph::new(pair.a, options.adjacency);
    let gb = PreparedGraph::new(pair.b, options.adjacency);
    let ta = branch_trace(&ga, params)?;
    let tb = branch_trace(&gb, params)?;
    let head = head_forward(combine(&ta.embedding, &tb.embedding, options.combine), params);
    let mut grads = ModelParams::zeros(params.arch);
    let d_logit = scale * bce_logit_gradient(head.probability, pair.label);
    let d_input = head_backward(&head, d_logit, params, &mut grads);
    let (da, db) = combine_backward(&ta.embedding, &tb.embedding, &d_input, options.combine);
    let mut branch = BranchGrads::zeros(&params.arch);
    branch_backward(&ga, &ta, &da, params, &mut branch);
    branch_backward(&gb, &tb, &db, params, &mut branch);
    branch.add_into(&mut grads);
    Ok(PairGradient {
        loss: scale * bce_loss(head.probability, pair.label),
        probability: head.probability,
        grads,
    })
}

pub fn backward(pair: GraphPair<'_>, params: &ModelParams, options: &ModelOptions) -> Result<PairGradient> {
    backward_scaled(pair, params, options, 1.0)
}

/// Distinct graph ids of a pair list in first-appearance order, and the
/// slot of each id.
fn unique_graphs(pairs: &[PairIndex]) -> (Vec<usize>, HashMap<usize, usize>) {
    let mut order = Vec::new();
    let mut slot = HashMap::new();
    for p in pairs {
        for g in [p.a, p.b] {
            slot.entry(g).or_insert_with(|| {
                order.push(g);
                order.len() - 1
            });
        }
    }
    (order, slot)
}

/// Mean-loss gradient of a mini-batch.
#[derive(Debug, Clone)]
pub struct BatchGradient {
    pub grads: ModelParams,
    pub losses: Vec<f64>,
}

/// Gradient of the mean loss over `pairs`.
///
/// Each distinct graph is embedded once and backpropagated once with the
/// sum of its upstream gradients. Per-graph work may run in parallel; all
/// reductions happen serially in a fixed order, so the result does not
/// depend on the number of worker threads.
pub fn batch_gradient(graphs: &[PreparedGraph], pairs: &[PairIndex], params: &ModelParams, combine_mode: Combine) -> Result<BatchGradient> {
    if pairs.is_empty() {
        return Err(Error::Empty("batch has no pairs".into()));
    }
    let (order, slot) = unique_graphs(pairs);
    let traces = order
        .par_iter()
        .map(|&g| branch_trace(&graphs[g], params))
        .collect::<Result<Vec<_>>>()?;

    let scale = 1.0 / pairs.len() as f64;
    let mut grads = ModelParams::zeros(params.arch);
    let mut d_embed: Vec<Array1<f64>> = vec![Array1::zeros(params.arch.embedding); order.len()];
    let mut losses = Vec::with_capacity(pairs.len());
    for p in pairs {
        let (sa, sb) = (slot[&p.a], slot[&p.b]);
        let (ea, eb) = (&traces[sa].embedding, &traces[sb].embedding);
        let head = head_forward(combine(ea, eb, combine_mode), params);
        losses.push(bce_loss(head.probability, p.label));
        let d_logit = scale * bce_logit_gradient(head.probability, p.label);
        let d_input = head_backward(&head, d_logit, params, &mut grads);
        let (da, db) = combine_backward(ea, eb, &d_input, combine_mode);
        d_embed[sa] += &da;
        d_embed[sb] += &db;
    }

    let branch: Vec<BranchGrads> = (0..order.len())
        .into_par_iter()
        .map(|s| {
            let mut g = BranchGrads::zeros(&params.arch);
            if d_embed[s].iter().any(|&v| v != 0.0) {
                branch_backward(&graphs[order[s]], &traces[s], &d_embed[s], params, &mut g);
            }
            g
        })
        .collect();
    for g in &branch {
        g.add_into(&mut grads);
    }
    Ok(BatchGradient { grads, losses })
}

/// Same-user probabilities for every pair, embedding each graph once.
pub fn pair_probabilities(graphs: &[PreparedGraph], pairs: &[PairIndex], params: &ModelParams, combine_mode: Combine) -> Result<Vec<f64>> {
    let (order, slot) = unique_graphs(pairs);
    let embeddings = order
        .par_iter()
        .map(|&g| branch_trace(&graphs[g], params).map(|t| t.embedding))
        .collect::<Result<Vec<_>>>()?;
    Ok(pairs
        .par_iter()
        .map(|p| {
            let input = combine(&embeddings[slot[&p.a]], &embeddings[slot[&p.b]], combine_mode);
            head_forward(input, params).probability
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::PaddedGraph;
    use crate::graph_extract::{Edge, SourceId};
    use crate::seed::rng_for;
    use approx::assert_abs_diff_eq;
    use ndarray::{arr1, arr2};

    fn graph(features: Array2<f64>, edges: &[(usize, usize, f64)], cap: usize) -> PaddedGraph {
        let edges = edges.iter().map(|&(i, j, weight)| Edge { i, j, weight }).collect();
        PaddedGraph::from_parts(cap, "u".into(), SourceId::default(), features, edges).unwrap()
    }

    #[test]
    fn single_node_normalizes_to_one() {
        let g = graph(Array2::zeros((1, 7)), &[], 3);
        let a = normalize_adjacency(&g, AdjacencyMode::Binary);
        let mut expect = Array2::zeros((3, 3));
        expect[[0, 0]] = 1.0;
        assert_eq!(a, expect);
    }

    #[test]
    fn two_nodes_one_edge() {
        let g = graph(Array2::zeros((2, 7)), &[(0, 1, 2.828)], 4);
        let a = normalize_adjacency(&g, AdjacencyMode::Binary);
        for v in a.slice(s![..2, ..2]) {
            assert_abs_diff_eq!(*v, 0.5, epsilon = 1e-15);
        }
        assert!(a.slice(s![2.., ..]).iter().all(|&v| v == 0.0));
        assert!(a.slice(s![.., 2..]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn all_padding_is_zero() {
        let g = graph(Array2::zeros((0, 7)), &[], 3);
        assert_eq!(normalize_adjacency(&g, AdjacencyMode::Weighted), Array2::<f64>::zeros((3, 3)));
    }

    #[test]
    fn zero_weight_edges_survive_binary_mode() {
        let g = graph(Array2::zeros((2, 7)), &[(0, 1, 0.0)], 2);
        let binary = normalize_adjacency(&g, AdjacencyMode::Binary);
        let weighted = normalize_adjacency(&g, AdjacencyMode::Weighted);
        assert_abs_diff_eq!(binary[[0, 1]], 0.5, epsilon = 1e-15);
        assert_eq!(weighted[[0, 1]], 0.0);
    }

    #[test]
    fn dense_normalization_checks_symmetry() {
        let asym = arr2(&[[0.0, 1.0], [0.0, 0.0]]);
        assert!(normalize_dense(&asym, 2).is_err());
        let padded_edge = arr2(&[[0.0, 1.0], [1.0, 0.0]]);
        assert!(normalize_dense(&padded_edge, 1).is_err());
        let ok = normalize_dense(&arr2(&[[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]), 2).unwrap();
        assert_abs_diff_eq!(ok[[0, 1]], 0.5, epsilon = 1e-15);
        assert_eq!(ok[[2, 2]], 0.0);
    }

    #[test]
    fn gcn_identity_and_zero() {
        let h = arr2(&[[0.3, -1.2], [2.0, 0.1]]);
        let eye = Array2::eye(2);
        let out = gcn_forward(&eye, &h, &eye, &Array1::zeros(2)).unwrap();
        assert_eq!(out, h.mapv(f64::tanh));
        let zero = gcn_forward(&eye, &Array2::zeros((2, 2)), &eye, &Array1::zeros(2)).unwrap();
        assert_eq!(zero, Array2::<f64>::zeros((2, 2)));
        assert!(gcn_forward(&eye, &h, &Array2::eye(3), &Array1::zeros(3)).is_err());
    }

    #[test]
    fn gcn_two_node_matches_hand_arithmetic() {
        let a_hat = arr2(&[[0.5, 0.5], [0.5, 0.5]]);
        let h = Array2::from_shape_fn((2, 7), |(i, k)| (i * 7 + k) as f64 * 0.1);
        let w = Array2::from_shape_fn((7, 2), |(k, j)| if (k + j) % 2 == 0 { 0.2 } else { -0.1 });
        let bias = arr1(&[0.05, -0.05]);
        let out = gcn_forward(&a_hat, &h, &w, &bias).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = bias[j];
                for m in 0..2 {
                    for k in 0..7 {
                        acc += a_hat[[i, m]] * h[[m, k]] * w[[k, j]];
                    }
                }
                assert_abs_diff_eq!(out[[i, j]], acc.tanh(), epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn pooling_cases() {
        let h = arr2(&[[1.0, 3.0], [3.0, 1.0], [0.0, 0.0], [0.0, 0.0]]);
        assert_eq!(masked_mean_pool(&h, 2).unwrap(), arr1(&[2.0, 2.0]));
        assert_eq!(masked_mean_pool(&h.slice(s![..2, ..]).to_owned(), 2).unwrap(), arr1(&[2.0, 2.0]));
        assert_eq!(masked_mean_pool(&h, 1).unwrap(), arr1(&[1.0, 3.0]));
        assert!(matches!(masked_mean_pool(&h, 0), Err(Error::UnusableGraph)));
    }

    #[test]
    fn loss_values() {
        assert_abs_diff_eq!(bce_loss(0.5, true), std::f64::consts::LN_2, epsilon = 1e-15);
        assert_abs_diff_eq!(bce_loss(0.5, false), std::f64::consts::LN_2, epsilon = 1e-15);
        assert_abs_diff_eq!(bce_loss(1.0 - 1e-12, true), 1e-12, epsilon = 1e-15);
        assert_abs_diff_eq!(bce_loss(0.9, false), -(0.1f64).ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(bce_loss(0.9, false), 2.302585, epsilon = 1e-6);
        assert!(bce_loss(0.0, true).is_finite());
    }

    #[test]
    fn zero_features_give_zero_embedding() {
        let arch = Architecture {
            features: 7,
            gcn: [6, 5],
            embedding: 4,
            head: [5, 4, 3],
        };
        let params = ModelParams::init(arch, &mut rng_for(0, "t", 0));
        let g = graph(Array2::zeros((3, 7)), &[(0, 1, 1.0)], 5);
        let e = branch_forward(&g, &params, AdjacencyMode::Binary).unwrap();
        assert_eq!(e, Array1::<f64>::zeros(4));
    }

    #[test]
    fn unusable_graph_cannot_be_embedded() {
        let params = ModelParams::init(Architecture::default(), &mut rng_for(0, "t", 0));
        let g = graph(Array2::zeros((0, 7)), &[], 5);
        assert!(matches!(
            branch_forward(&g, &params, AdjacencyMode::Binary),
            Err(Error::UnusableGraph)
        ));
    }
}
