//! Image-to-graph conversion.
//!
//! An image is discretized into intensity bins of width `delta`. Every bin
//! except the first yields a binary image, whose 8-connected components
//! become graph nodes. Two nodes are linked when their bounding boxes
//! intersect, weighted by the distance between box centers.

mod codec;
mod labeling;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::Image;

pub use codec::{decode_graph, encode_graph, read_graph, write_graph, GRAPH_MAGIC, GRAPH_VERSION};
pub use labeling::{connected_components, BBox, BinaryImage, Component};

pub const DEFAULT_DELTA: u8 = 20;

/// Number of node features.
pub const FEATURE_COUNT: usize = 7;

/// Default normalization cap for the per-bin component count feature.
pub const DEFAULT_COMPONENT_COUNT_CAP: usize = 64;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "size_ratio_image",
    "size_ratio_bbox",
    "center_x_norm",
    "center_y_norm",
    "height_norm",
    "width_norm",
    "components_in_bin_norm",
];

/// Number of bins for a bin width: `ceil(255 / delta)`.
pub fn bin_count(delta: u8) -> usize {
    255usize.div_ceil(delta as usize)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscretizedImage {
    pub width: usize,
    pub height: usize,
    pub delta: u8,
    pub bins: usize,
    pub bin_index: Vec<u8>,
}

impl DiscretizedImage {
    /// The representative intensity of each pixel (the bin's lower edge).
    pub fn values(&self) -> Vec<u8> {
        self.bin_index.iter().map(|&b| b * self.delta).collect()
    }
}

pub fn bin_of(intensity: u8, delta: u8) -> u8 {
    let last = bin_count(delta) - 1;
    ((intensity / delta) as usize).min(last) as u8
}

pub fn discretize(image: &Image, delta: u8) -> Result<DiscretizedImage> {
    if delta == 0 {
        return Err(Error::Config("bin width must be in 1..=255".into()));
    }
    Ok(DiscretizedImage {
        width: image.width(),
        height: image.height(),
        delta,
        bins: bin_count(delta),
        bin_index: image.pixels().iter().map(|&v| bin_of(v, delta)).collect(),
    })
}

/// One binary image per bin `1..bins`; bin 0 is excluded.
pub fn binarize(disc: &DiscretizedImage) -> Vec<BinaryImage> {
    (1..disc.bins)
        .map(|bin| {
            let bits = disc.bin_index.iter().map(|&b| b as usize == bin).collect();
            BinaryImage::new(disc.width, disc.height, bits)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentNode {
    pub bin: usize,
    pub bbox: BBox,
    pub pixel_count: usize,
    pub features: [f64; FEATURE_COUNT],
}

/// Node features in the order of [`FEATURE_NAMES`].
///
/// Centers use the pixel-center convention (`(min+max)/2 + 0.5`) so every
/// geometric feature lies in `(0, 1]`. The component count is divided by
/// `count_cap` and clamped to 1.
pub fn component_features(
    component: &Component,
    components_in_bin: usize,
    width: usize,
    height: usize,
    count_cap: usize,
) -> [f64; FEATURE_COUNT] {
    let bbox = &component.bbox;
    let (center_row, center_col) = bbox.center();
    let pixels = component.pixel_count as f64;
    [
        pixels / (width * height) as f64,
        pixels / bbox.area() as f64,
        (center_col + 0.5) / width as f64,
        (center_row + 0.5) / height as f64,
        bbox.height() as f64 / height as f64,
        bbox.width() as f64 / width as f64,
        (components_in_bin as f64 / count_cap as f64).min(1.0),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

/// Links every pair of nodes whose boxes intersect. Edges come out with
/// `i < j`, sorted lexicographically.
///
/// Sort-and-sweep along rows: a node only needs testing against boxes whose
/// row span is still open when its own span begins.
pub fn build_edges(boxes: &[BBox]) -> Vec<Edge> {
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by_key(|&i| (boxes[i].min_row, i));
    let mut active: Vec<usize> = Vec::new();
    let mut edges = Vec::new();
    for &i in &order {
        let b = &boxes[i];
        active.retain(|&a| boxes[a].max_row >= b.min_row);
        for &a in &active {
            let other = &boxes[a];
            if other.min_col <= b.max_col && b.min_col <= other.max_col {
                let (lo, hi) = if a < i { (a, i) } else { (i, a) };
                edges.push(Edge {
                    i: lo,
                    j: hi,
                    weight: boxes[lo].center_distance(&boxes[hi]),
                });
            }
        }
        active.push(i);
    }
    edges.sort_by_key(|e| (e.i, e.j));
    edges
}

/// Identifies the image a graph came from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct SourceId {
    pub user: String,
    pub session: u32,
    pub index: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrisGraph {
    pub source: SourceId,
    pub width: usize,
    pub height: usize,
    pub delta: u8,
    pub nodes: Vec<ComponentNode>,
    pub edges: Vec<Edge>,
}

impl IrisGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// A graph without nodes cannot be embedded and is excluded from datasets.
    pub fn is_usable(&self) -> bool {
        !self.nodes.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractOptions {
    pub delta: u8,
    pub component_count_cap: usize,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions {
            delta: DEFAULT_DELTA,
            component_count_cap: DEFAULT_COMPONENT_COUNT_CAP,
        }
    }
}

/// Discretize, binarize, label each bin, attach features and link
/// intersecting boxes. Nodes are ordered by bin, then component order.
pub fn extract_graph(image: &Image, source: SourceId, options: &ExtractOptions) -> Result<IrisGraph> {
    if options.component_count_cap == 0 {
        return Err(Error::Config("component count cap must be positive".into()));
    }
    let disc = discretize(image, options.delta)?;
    let (w, h) = (image.width(), image.height());
    let mut nodes = Vec::new();
    for (offset, binary) in binarize(&disc).iter().enumerate() {
        let bin = offset + 1;
        let components = connected_components(binary);
        let in_bin = components.len();
        nodes.extend(components.iter().map(|c| ComponentNode {
            bin,
            bbox: c.bbox,
            pixel_count: c.pixel_count,
            features: component_features(c, in_bin, w, h, options.component_count_cap),
        }));
    }
    let boxes: Vec<BBox> = nodes.iter().map(|n| n.bbox).collect();
    let edges = build_edges(&boxes);
    Ok(IrisGraph {
        source,
        width: w,
        height: h,
        delta: options.delta,
        nodes,
        edges,
    })
}

/// Tab-separated feature table followed by the edge list, for inspection.
pub fn debug_dump(graph: &IrisGraph) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# source={} session={} index={} size={}x{} delta={} nodes={} edges={}",
        graph.source.user,
        graph.source.session,
        graph.source.index,
        graph.width,
        graph.height,
        graph.delta,
        graph.nodes.len(),
        graph.edges.len()
    );
    let _ = writeln!(
        out,
        "node\tbin\tmin_row\tmin_col\tmax_row\tmax_col\tpixels\t{}",
        FEATURE_NAMES.join("\t")
    );
    for (i, n) in graph.nodes.iter().enumerate() {
        let feats: Vec<String> = n.features.iter().map(|f| format!("{f:.6}")).collect();
        let _ = writeln!(
            out,
            "{i}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            n.bin,
            n.bbox.min_row,
            n.bbox.min_col,
            n.bbox.max_row,
            n.bbox.max_col,
            n.pixel_count,
            feats.join("\t")
        );
    }
    let _ = writeln!(out, "edge_i\tedge_j\tweight");
    for e in &graph.edges {
        let _ = writeln!(out, "{}\t{}\t{:.6}", e.i, e.j, e.weight);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bb(min_row: usize, min_col: usize, max_row: usize, max_col: usize) -> BBox {
        BBox {
            min_row,
            min_col,
            max_row,
            max_col,
        }
    }

    #[test]
    fn default_delta_gives_thirteen_bins() {
        assert_eq!(bin_count(20), 13);
        assert_eq!(bin_count(1), 255);
        assert_eq!(bin_count(255), 1);
    }

    #[test]
    fn discretize_examples() {
        let image = Image::new(3, 1, vec![0, 37, 255]).unwrap();
        let disc = discretize(&image, 20).unwrap();
        assert_eq!(disc.bin_index, vec![0, 1, 12]);
        assert_eq!(disc.values(), vec![0, 20, 240]);
        assert!(discretize(&image, 0).is_err());
    }

    #[test]
    fn binarize_counts_and_occupancy() {
        let zero = Image::filled(5, 5, 0).unwrap();
        let bins = binarize(&discretize(&zero, 20).unwrap());
        assert_eq!(bins.len(), 12);
        assert!(bins.iter().all(|b| b.count_ones() == 0));

        let band = Image::from_fn(6, 4, |r, c| (20 + (r * 6 + c) % 20) as u8).unwrap();
        let bins = binarize(&discretize(&band, 20).unwrap());
        assert_eq!(bins[0].count_ones(), 24);
        assert!(bins[1..].iter().all(|b| b.count_ones() == 0));
    }

    #[test]
    fn feature_examples() {
        let full = Component {
            bbox: bb(0, 0, 9, 9),
            pixel_count: 100,
            first_pixel: 0,
        };
        let f = component_features(&full, 1, 10, 10, 64);
        assert_eq!(f[0], 1.0);
        assert_eq!(f[1], 1.0);

        let dot = Component {
            bbox: bb(0, 0, 0, 0),
            pixel_count: 1,
            first_pixel: 0,
        };
        let f = component_features(&dot, 3, 10, 10, 64);
        assert_eq!(f[0], 0.01);
        assert_eq!(f[4], 0.1);
        assert_eq!(f[5], 0.1);
        assert_eq!(f[2], 0.05);
        assert_eq!(f[6], 3.0 / 64.0);

        // L-shaped tromino in a 2x2 box: 3 of 4 pixels.
        let ell = Component {
            bbox: bb(4, 4, 5, 5),
            pixel_count: 3,
            first_pixel: 0,
        };
        let counted = [(4, 4), (5, 4), (5, 5)].len();
        let f = component_features(&ell, 1, 10, 10, 64);
        assert_eq!(f[1], counted as f64 / 4.0);
        assert_eq!(f[1], 0.75);

        let crowded = component_features(&dot, 500, 10, 10, 64);
        assert_eq!(crowded[6], 1.0);
    }

    #[test]
    fn edge_examples() {
        assert!(build_edges(&[bb(0, 0, 1, 1), bb(5, 5, 6, 6)]).is_empty());

        let same = build_edges(&[bb(2, 3, 4, 5), bb(2, 3, 4, 5)]);
        assert_eq!(same.len(), 1);
        assert_eq!(same[0].weight, 0.0);

        let corner = build_edges(&[bb(0, 0, 2, 2), bb(2, 2, 4, 4)]);
        assert_eq!(corner.len(), 1);
        assert!((corner[0].weight - 2.0 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn extract_examples() {
        let src = SourceId::default;
        let opts = ExtractOptions::default();

        let zero = extract_graph(&Image::filled(8, 8, 0).unwrap(), src(), &opts).unwrap();
        assert!(zero.nodes.is_empty());
        assert!(!zero.is_usable());

        let thirty = extract_graph(&Image::filled(8, 8, 30).unwrap(), src(), &opts).unwrap();
        assert_eq!(thirty.nodes.len(), 1);
        assert_eq!(thirty.nodes[0].bin, 1);
        assert_eq!(thirty.nodes[0].pixel_count, 64);
        assert!(thirty.edges.is_empty());

        let bands = Image::from_fn(8, 8, |r, _| if r < 4 { 30 } else { 90 }).unwrap();
        let g = extract_graph(&bands, src(), &opts).unwrap();
        assert_eq!(g.nodes.iter().map(|n| n.bin).collect::<Vec<_>>(), vec![1, 4]);
        assert_eq!(g.nodes[0].bbox, bb(0, 0, 3, 7));
        assert_eq!(g.nodes[1].bbox, bb(4, 0, 7, 7));
        assert!(g.edges.is_empty());
    }

    #[test]
    fn debug_dump_lists_everything() {
        let image = Image::from_fn(4, 4, |r, c| if r == c { 100 } else { 30 }).unwrap();
        let g = extract_graph(&image, SourceId::default(), &ExtractOptions::default()).unwrap();
        let dump = debug_dump(&g);
        assert_eq!(dump.lines().count(), 1 + 1 + g.nodes.len() + 1 + g.edges.len());
    }
}
