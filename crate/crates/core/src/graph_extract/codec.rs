//! Binary graph record. All integers are little-endian.
//!
//! ```text
//! magic      4 bytes  "IRGR"
//! version    u16      1
//! user       u32 length + utf-8 bytes
//! session    u32
//! index      u32
//! width      u32
//! height     u32
//! delta      u8
//! nodes      u32
//! edges      u32
//! per node:  bin u16, min_row u32, min_col u32, max_row u32, max_col u32,
//!            pixel_count u32, 7 x f64 features
//! per edge:  i u32, j u32, weight f64
//! ```

use std::io::{Read, Write};

use byteorder::{LittleEndian as LE, WriteBytesExt};

use super::{BBox, ComponentNode, Edge, IrisGraph, SourceId, FEATURE_COUNT};
use crate::binio::*;
use crate::error::{Error, Result};

pub const GRAPH_MAGIC: &[u8; 4] = b"IRGR";
pub const GRAPH_VERSION: u16 = 1;

pub fn write_graph<W: Write>(w: &mut W, graph: &IrisGraph) -> Result<()> {
    w.write_all(GRAPH_MAGIC)?;
    w.write_u16::<LE>(GRAPH_VERSION)?;
    write_string(w, &graph.source.user)?;
    w.write_u32::<LE>(graph.source.session)?;
    w.write_u32::<LE>(graph.source.index)?;
    write_u32(w, graph.width)?;
    write_u32(w, graph.height)?;
    w.write_u8(graph.delta)?;
    write_u32(w, graph.nodes.len())?;
    write_u32(w, graph.edges.len())?;
    for node in &graph.nodes {
        let bin = u16::try_from(node.bin).map_err(|_| Error::format("node.bin", "exceeds u16"))?;
        w.write_u16::<LE>(bin)?;
        write_u32(w, node.bbox.min_row)?;
        write_u32(w, node.bbox.min_col)?;
        write_u32(w, node.bbox.max_row)?;
        write_u32(w, node.bbox.max_col)?;
        write_u32(w, node.pixel_count)?;
        write_f64s(w, &node.features)?;
    }
    for edge in &graph.edges {
        write_u32(w, edge.i)?;
        write_u32(w, edge.j)?;
        w.write_f64::<LE>(edge.weight)?;
    }
    Ok(())
}

pub fn read_graph<R: Read>(r: &mut R) -> Result<IrisGraph> {
    expect_magic(r, GRAPH_MAGIC)?;
    expect_version(r, GRAPH_VERSION)?;
    let user = read_string(r, "source.user")?;
    let session = read_u32(r, "source.session")?;
    let index = read_u32(r, "source.index")?;
    let width = read_u32(r, "width")? as usize;
    let height = read_u32(r, "height")? as usize;
    let delta = read_u8(r, "delta")?;
    let node_count = read_u32(r, "node_count")? as usize;
    let edge_count = read_u32(r, "edge_count")? as usize;

    let mut nodes = Vec::with_capacity(node_count.min(1 << 20));
    for _ in 0..node_count {
        let bin = read_u16(r, "node.bin")? as usize;
        let bbox = BBox {
            min_row: read_u32(r, "node.bbox")? as usize,
            min_col: read_u32(r, "node.bbox")? as usize,
            max_row: read_u32(r, "node.bbox")? as usize,
            max_col: read_u32(r, "node.bbox")? as usize,
        };
        if bbox.min_row > bbox.max_row || bbox.min_col > bbox.max_col {
            return Err(Error::format("node.bbox", "min exceeds max"));
        }
        let pixel_count = read_u32(r, "node.pixel_count")? as usize;
        let values = read_f64s(r, FEATURE_COUNT, "node.features")?;
        let mut features = [0.0; FEATURE_COUNT];
        features.copy_from_slice(&values);
        nodes.push(ComponentNode {
            bin,
            bbox,
            pixel_count,
            features,
        });
    }
    let mut edges = Vec::with_capacity(edge_count.min(1 << 20));
    for _ in 0..edge_count {
        let i = read_u32(r, "edge.i")? as usize;
        let j = read_u32(r, "edge.j")? as usize;
        let weight = read_f64(r, "edge.weight")?;
        if i >= node_count || j >= node_count || i == j {
            return Err(Error::format("edge", format!("invalid endpoints ({i}, {j})")));
        }
        edges.push(Edge { i, j, weight });
    }
    Ok(IrisGraph {
        source: SourceId {
            user,
            session,
            index,
        },
        width,
        height,
        delta,
        nodes,
        edges,
    })
}

pub fn encode_graph(graph: &IrisGraph) -> Vec<u8> {
    let mut buf = Vec::new();
    write_graph(&mut buf, graph).expect("in-memory write");
    buf
}

pub fn decode_graph(bytes: &[u8]) -> Result<IrisGraph> {
    let mut cursor = bytes;
    read_graph(&mut cursor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_extract::{extract_graph, ExtractOptions};
    use crate::imaging::Image;

    fn sample() -> IrisGraph {
        let image = Image::from_fn(12, 9, |r, c| ((r * 31 + c * 17) % 200) as u8 + 20).unwrap();
        let source = SourceId {
            user: "u07".into(),
            session: 2,
            index: 5,
        };
        extract_graph(&image, source, &ExtractOptions::default()).unwrap()
    }

    #[test]
    fn round_trip() {
        let graph = sample();
        assert!(!graph.edges.is_empty());
        assert_eq!(decode_graph(&encode_graph(&graph)).unwrap(), graph);
    }

    #[test]
    fn header_layout_is_little_endian() {
        let bytes = encode_graph(&sample());
        assert_eq!(&bytes[..4], b"IRGR");
        assert_eq!(&bytes[4..6], &[1, 0]);
        assert_eq!(&bytes[6..10], &[3, 0, 0, 0]);
        assert_eq!(&bytes[10..13], b"u07");
    }

    #[test]
    fn corruption_is_detected() {
        let mut bytes = encode_graph(&sample());
        let truncated = &bytes[..bytes.len() - 3];
        assert!(matches!(decode_graph(truncated), Err(Error::Format { .. })));
        bytes[0] = b'X';
        assert!(matches!(decode_graph(&bytes), Err(Error::Format { field, .. }) if field == "magic"));
    }
}
