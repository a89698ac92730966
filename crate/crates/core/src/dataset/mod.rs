//! Splits, node caps, padding and pair generation.

mod io;
mod manifest;
mod split;

use std::collections::BTreeMap;

use ndarray::Array2;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph_extract::{Edge, IrisGraph, SourceId, FEATURE_COUNT};
use crate::seed::rng_for;

pub use io::{
    load_dataset, load_graph_archive, read_dataset, read_graph_archive, save_dataset, save_graph_archive,
    write_dataset, write_graph_archive, ARCHIVE_MAGIC, DATASET_MAGIC, DATASET_VERSION,
};
pub use manifest::{Manifest, ManifestEntry, MANIFEST_HEADER};
pub use split::{split_by_user, split_corpus, Split, SplitRatios, MIN_IMAGES_PER_USER};

/// Outcome of [`filter_by_node_cap`].
#[derive(Debug, Clone, PartialEq)]
pub struct CapFilter<T> {
    pub kept: Vec<T>,
    pub removed: usize,
}

impl<T> CapFilter<T> {
    /// Fraction of graphs kept; 1 for an empty input.
    pub fn retention(&self) -> f64 {
        let total = self.kept.len() + self.removed;
        if total == 0 {
            1.0
        } else {
            self.kept.len() as f64 / total as f64
        }
    }
}

/// Keeps graphs with at most `cap` nodes.
pub fn filter_by_node_cap(graphs: Vec<IrisGraph>, cap: usize) -> Result<CapFilter<IrisGraph>> {
    if cap == 0 {
        return Err(Error::Config("node cap must be positive".into()));
    }
    let before = graphs.len();
    let kept: Vec<IrisGraph> = graphs.into_iter().filter(|g| g.node_count() <= cap).collect();
    Ok(CapFilter {
        removed: before - kept.len(),
        kept,
    })
}

/// A graph padded to a fixed node cap.
///
/// Only the real block is stored; [`PaddedGraph::adjacency`] and
/// [`PaddedGraph::features`] materialize the zero-padded `cap x cap` and
/// `cap x F` matrices on demand. Edges are kept as a list so that
/// zero-weight edges (coincident box centers) survive binarization.
#[derive(Debug, Clone, PartialEq)]
pub struct PaddedGraph {
    pub cap: usize,
    pub label_user: String,
    pub source: SourceId,
    node_features: Array2<f64>,
    edges: Vec<Edge>,
}

impl PaddedGraph {
    pub fn from_parts(
        cap: usize,
        label_user: String,
        source: SourceId,
        node_features: Array2<f64>,
        edges: Vec<Edge>,
    ) -> Result<Self> {
        let n = node_features.nrows();
        if n > cap {
            return Err(Error::CapViolation { nodes: n, cap });
        }
        if node_features.ncols() != FEATURE_COUNT {
            return Err(Error::Dimension(format!(
                "feature matrix has {} columns, expected {FEATURE_COUNT}",
                node_features.ncols()
            )));
        }
        for e in &edges {
            if e.i >= n || e.j >= n || e.i == e.j || !(e.weight >= 0.0) {
                return Err(Error::Dimension(format!("invalid edge ({}, {}, {})", e.i, e.j, e.weight)));
            }
        }
        Ok(PaddedGraph {
            cap,
            label_user,
            source,
            node_features,
            edges,
        })
    }

    pub fn real_nodes(&self) -> usize {
        self.node_features.nrows()
    }

    /// Features of the real nodes only (`real_nodes x F`).
    pub fn node_features(&self) -> &Array2<f64> {
        &self.node_features
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Zero-padded `cap x cap` weighted adjacency.
    pub fn adjacency(&self) -> Array2<f64> {
        let mut a = Array2::zeros((self.cap, self.cap));
        for e in &self.edges {
            a[[e.i, e.j]] = e.weight;
            a[[e.j, e.i]] = e.weight;
        }
        a
    }

    /// Zero-padded `cap x F` feature matrix.
    pub fn features(&self) -> Array2<f64> {
        let mut f = Array2::zeros((self.cap, FEATURE_COUNT));
        f.slice_mut(ndarray::s![..self.real_nodes(), ..]).assign(&self.node_features);
        f
    }

    /// Same graph with a different cap.
    pub fn repad(&self, cap: usize) -> Result<Self> {
        PaddedGraph::from_parts(
            cap,
            self.label_user.clone(),
            self.source.clone(),
            self.node_features.clone(),
            self.edges.clone(),
        )
    }
}

/// Pads an extracted graph to `cap` nodes.
pub fn pad_graph(graph: &IrisGraph, cap: usize) -> Result<PaddedGraph> {
    let n = graph.node_count();
    if n > cap {
        return Err(Error::CapViolation { nodes: n, cap });
    }
    let mut features = Array2::zeros((n, FEATURE_COUNT));
    for (i, node) in graph.nodes.iter().enumerate() {
        for (k, &v) in node.features.iter().enumerate() {
            features[[i, k]] = v;
        }
    }
    PaddedGraph::from_parts(
        cap,
        graph.source.user.clone(),
        graph.source.clone(),
        features,
        graph.edges.clone(),
    )
}

/// Indices into a graph table plus the same-user label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PairIndex {
    pub a: usize,
    pub b: usize,
    pub label: bool,
}

/// A borrowed view of one pair.
#[derive(Debug, Clone, Copy)]
pub struct GraphPair<'a> {
    pub a: &'a PaddedGraph,
    pub b: &'a PaddedGraph,
    pub label: bool,
}

/// Graphs stored once, pairs referring to them by index.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PairDataset {
    pub graphs: Vec<PaddedGraph>,
    pub pairs: Vec<PairIndex>,
}

impl PairDataset {
    pub fn new(graphs: Vec<PaddedGraph>, pairs: Vec<PairIndex>) -> Result<Self> {
        for p in &pairs {
            if p.a >= graphs.len() || p.b >= graphs.len() {
                return Err(Error::Dimension(format!(
                    "pair ({}, {}) indexes past {} graphs",
                    p.a,
                    p.b,
                    graphs.len()
                )));
            }
            if p.label != (graphs[p.a].label_user == graphs[p.b].label_user) {
                return Err(Error::Dimension(format!("pair ({}, {}) has a wrong label", p.a, p.b)));
            }
        }
        Ok(PairDataset { graphs, pairs })
    }

    /// Pairs every graph with its same-user successors and an equal number
    /// of graphs from other users; see [`make_pairs`].
    pub fn build(graphs: Vec<PaddedGraph>, seed: u64) -> Self {
        let pairs = make_pairs(&graphs, seed);
        PairDataset { graphs, pairs }
    }

    pub fn pair(&self, i: usize) -> GraphPair<'_> {
        let p = self.pairs[i];
        GraphPair {
            a: &self.graphs[p.a],
            b: &self.graphs[p.b],
            label: p.label,
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.pairs.iter().filter(|p| p.label).count()
    }
}

/// Builds verification pairs from one split.
///
/// Positives: every unordered pair of distinct graphs of the same user,
/// anchored at the earlier graph. Negatives: for each anchor, as many
/// graphs of other users as it anchors positives, drawn without
/// replacement (with replacement only if the other-user pool is too
/// small). Positives do not depend on `seed`.
pub fn make_pairs(graphs: &[PaddedGraph], seed: u64) -> Vec<PairIndex> {
    let mut by_user: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, g) in graphs.iter().enumerate() {
        by_user.entry(g.label_user.as_str()).or_default().push(i);
    }
    if by_user.len() < 2 {
        log::warn!("pair generation needs at least two users, found {}", by_user.len());
    }
    for (user, idx) in &by_user {
        if idx.len() == 1 {
            log::warn!("user {user} has a single graph and contributes no positive pairs");
        }
    }

    let mut rng = rng_for(seed, "pairs", 0);
    let mut pairs = Vec::new();
    for (i, g) in graphs.iter().enumerate() {
        let later_same: Vec<usize> = by_user[g.label_user.as_str()]
            .iter()
            .copied()
            .filter(|&j| j > i)
            .collect();
        pairs.extend(later_same.iter().map(|&j| PairIndex {
            a: i,
            b: j,
            label: true,
        }));
        let wanted = later_same.len();
        if wanted == 0 {
            continue;
        }
        let pool: Vec<usize> = (0..graphs.len())
            .filter(|&j| graphs[j].label_user != g.label_user)
            .collect();
        if pool.is_empty() {
            continue;
        }
        if pool.len() >= wanted {
            for k in sample(&mut rng, pool.len(), wanted).into_iter() {
                pairs.push(PairIndex {
                    a: i,
                    b: pool[k],
                    label: false,
                });
            }
        } else {
            log::info!(
                "graph {i}: other-user pool of {} is smaller than {wanted}; sampling with replacement",
                pool.len()
            );
            for _ in 0..wanted {
                pairs.push(PairIndex {
                    a: i,
                    b: pool[rng.gen_range(0..pool.len())],
                    label: false,
                });
            }
        }
    }
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_extract::{BBox, ComponentNode};
    use std::collections::HashSet;

    fn graph(user: &str, index: u32, nodes: usize) -> IrisGraph {
        let node = |k: usize| ComponentNode {
            bin: 1,
            bbox: BBox::point(k, k),
            pixel_count: 1,
            features: [0.1 * (k + 1) as f64; FEATURE_COUNT],
        };
        IrisGraph {
            source: SourceId {
                user: user.into(),
                session: 0,
                index,
            },
            width: 10,
            height: 10,
            delta: 20,
            nodes: (0..nodes).map(node).collect(),
            edges: Vec::new(),
        }
    }

    fn padded(user: &str, index: u32) -> PaddedGraph {
        pad_graph(&graph(user, index, 2), 4).unwrap()
    }

    #[test]
    fn cap_filter_boundary_inclusive() {
        let gs = vec![graph("a", 0, 50), graph("a", 1, 100), graph("a", 2, 150)];
        let f = filter_by_node_cap(gs.clone(), 100).unwrap();
        assert_eq!(f.kept.iter().map(|g| g.node_count()).collect::<Vec<_>>(), vec![50, 100]);
        assert_eq!(f.removed, 1);
        assert!((f.retention() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(filter_by_node_cap(gs, 150).unwrap().removed, 0);
    }

    #[test]
    fn pad_empty_graph() {
        let p = pad_graph(&graph("a", 0, 0), 4).unwrap();
        assert_eq!(p.real_nodes(), 0);
        assert_eq!(p.adjacency(), Array2::<f64>::zeros((4, 4)));
        assert_eq!(p.features(), Array2::<f64>::zeros((4, FEATURE_COUNT)));
    }

    #[test]
    fn pad_places_weights_symmetrically() {
        let mut g = graph("a", 0, 2);
        let w = 8f64.sqrt();
        g.edges.push(Edge { i: 0, j: 1, weight: w });
        let p = pad_graph(&g, 3).unwrap();
        let a = p.adjacency();
        let expect = ndarray::arr2(&[[0.0, w, 0.0], [w, 0.0, 0.0], [0.0, 0.0, 0.0]]);
        assert_eq!(a, expect);
        let f = p.features();
        assert_eq!(f.row(2).iter().copied().collect::<Vec<_>>(), vec![0.0; FEATURE_COUNT]);
        assert_eq!(f.row(1)[0], 0.2);
    }

    #[test]
    fn pad_exact_cap_and_violation() {
        let g = graph("a", 0, 3);
        let p = pad_graph(&g, 3).unwrap();
        assert_eq!(p.features().nrows(), p.real_nodes());
        assert!(matches!(pad_graph(&g, 2), Err(Error::CapViolation { nodes: 3, cap: 2 })));
    }

    #[test]
    fn three_graphs_give_three_positives() {
        let gs = vec![padded("a", 0), padded("a", 1), padded("a", 2), padded("b", 0)];
        let pairs = make_pairs(&gs, 1);
        let pos: Vec<_> = pairs.iter().filter(|p| p.label).collect();
        assert_eq!(pos.len(), 3);
    }

    #[test]
    fn two_by_two_is_balanced() {
        let gs = vec![padded("a", 0), padded("a", 1), padded("b", 0), padded("b", 1)];
        let pairs = make_pairs(&gs, 9);
        let pos = pairs.iter().filter(|p| p.label).count();
        let neg = pairs.len() - pos;
        assert_eq!(pos, 2);
        assert_eq!(neg, 2);
    }

    #[test]
    fn pairs_deterministic_positives_seed_free() {
        let gs: Vec<_> = (0..6).flat_map(|i| [padded("a", i), padded("b", i), padded("c", i)]).collect();
        let p1 = make_pairs(&gs, 4);
        assert_eq!(p1, make_pairs(&gs, 4));
        let p2 = make_pairs(&gs, 5);
        let positives = |ps: &[PairIndex]| ps.iter().filter(|p| p.label).copied().collect::<Vec<_>>();
        assert_eq!(positives(&p1), positives(&p2));
        assert_ne!(p1, p2);
    }

    #[test]
    fn pair_invariants() {
        let gs: Vec<_> = (0..5)
            .flat_map(|i| [padded("a", i), padded("b", i), padded("c", i), padded("d", i)])
            .collect();
        let pairs = make_pairs(&gs, 17);
        let mut seen = HashSet::new();
        for p in &pairs {
            assert_ne!(p.a, p.b);
            assert_eq!(p.label, gs[p.a].label_user == gs[p.b].label_user);
            if p.label {
                assert!(seen.insert((p.a.min(p.b), p.a.max(p.b))));
            }
        }
        let pos = pairs.iter().filter(|p| p.label).count();
        assert_eq!(pos, 4 * 10);
        assert_eq!(pairs.len(), 2 * pos);
        assert!(PairDataset::new(gs, pairs).is_ok());
    }

    #[test]
    fn tiny_pool_falls_back_to_replacement() {
        let gs: Vec<_> = (0..4).map(|i| padded("a", i)).chain([padded("b", 0)]).collect();
        let pairs = make_pairs(&gs, 2);
        let pos = pairs.iter().filter(|p| p.label).count();
        assert_eq!(pos, 6);
        assert_eq!(pairs.len() - pos, 6);
    }

    #[test]
    fn dataset_rejects_wrong_labels() {
        let gs = vec![padded("a", 0), padded("b", 0)];
        let bad = vec![PairIndex { a: 0, b: 1, label: true }];
        assert!(PairDataset::new(gs, bad).is_err());
    }
}
