//! Graph archives and pair dataset files. Little-endian throughout.
//!
//! Graph archive:
//! ```text
//! magic "IGAR" | version u16 | provenance (u32 len + utf-8 json)
//! count u32 | count graph records (see graph_extract codec)
//! ```
//!
//! Pair dataset:
//! ```text
//! magic "IGDS" | version u16 | provenance (u32 len + utf-8 json)
//! graph count u32, then per graph:
//!   cap u32 | label_user str | source user str | session u32 | index u32
//!   real_nodes u32 | real_nodes x 7 f64 features (row-major)
//!   edge count u32 | per edge: i u32, j u32, weight f64
//! pair count u32, then per pair: a u32 | b u32 | label u8
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, WriteBytesExt};
use ndarray::Array2;

use super::{PairDataset, PairIndex, PaddedGraph};
use crate::binio::*;
use crate::error::{Error, Result};
use crate::graph_extract::{read_graph, write_graph, Edge, IrisGraph, SourceId, FEATURE_COUNT};

pub const ARCHIVE_MAGIC: &[u8; 4] = b"IGAR";
pub const DATASET_MAGIC: &[u8; 4] = b"IGDS";
pub const ARCHIVE_VERSION: u16 = 1;
pub const DATASET_VERSION: u16 = 1;

pub fn write_graph_archive<W: Write>(w: &mut W, graphs: &[IrisGraph], provenance: &str) -> Result<()> {
    w.write_all(ARCHIVE_MAGIC)?;
    w.write_u16::<LE>(ARCHIVE_VERSION)?;
    write_string(w, provenance)?;
    write_u32(w, graphs.len())?;
    for g in graphs {
        write_graph(w, g)?;
    }
    Ok(())
}

/// Returns the graphs and the embedded provenance string.
pub fn read_graph_archive<R: Read>(r: &mut R) -> Result<(Vec<IrisGraph>, String)> {
    expect_magic(r, ARCHIVE_MAGIC)?;
    expect_version(r, ARCHIVE_VERSION)?;
    let provenance = read_string(r, "provenance")?;
    let count = read_u32(r, "graph_count")? as usize;
    let graphs = (0..count).map(|_| read_graph(r)).collect::<Result<_>>()?;
    Ok((graphs, provenance))
}

pub fn save_graph_archive(path: impl AsRef<Path>, graphs: &[IrisGraph], provenance: &str) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    write_graph_archive(&mut w, graphs, provenance)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_graph_archive(path: impl AsRef<Path>) -> Result<(Vec<IrisGraph>, String)> {
    let path = path.as_ref();
    let mut r = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    read_graph_archive(&mut r)
}

pub fn write_dataset<W: Write>(w: &mut W, dataset: &PairDataset, provenance: &str) -> Result<()> {
    w.write_all(DATASET_MAGIC)?;
    w.write_u16::<LE>(DATASET_VERSION)?;
    write_string(w, provenance)?;
    write_u32(w, dataset.graphs.len())?;
    for g in &dataset.graphs {
        write_u32(w, g.cap)?;
        write_string(w, &g.label_user)?;
        write_string(w, &g.source.user)?;
        w.write_u32::<LE>(g.source.session)?;
        w.write_u32::<LE>(g.source.index)?;
        write_u32(w, g.real_nodes())?;
        for row in g.node_features().rows() {
            for &v in row {
                w.write_f64::<LE>(v)?;
            }
        }
        write_u32(w, g.edges().len())?;
        for e in g.edges() {
            write_u32(w, e.i)?;
            write_u32(w, e.j)?;
            w.write_f64::<LE>(e.weight)?;
        }
    }
    write_u32(w, dataset.pairs.len())?;
    for p in &dataset.pairs {
        write_u32(w, p.a)?;
        write_u32(w, p.b)?;
        w.write_u8(p.label as u8)?;
    }
    Ok(())
}

pub fn read_dataset<R: Read>(r: &mut R) -> Result<(PairDataset, String)> {
    expect_magic(r, DATASET_MAGIC)?;
    expect_version(r, DATASET_VERSION)?;
    let provenance = read_string(r, "provenance")?;
    let graph_count = read_u32(r, "graph_count")? as usize;
    let mut graphs = Vec::with_capacity(graph_count.min(1 << 16));
    for _ in 0..graph_count {
        let cap = read_u32(r, "graph.cap")? as usize;
        let label_user = read_string(r, "graph.label_user")?;
        let source = SourceId {
            user: read_string(r, "graph.source.user")?,
            session: read_u32(r, "graph.source.session")?,
            index: read_u32(r, "graph.source.index")?,
        };
        let real = read_u32(r, "graph.real_nodes")? as usize;
        let values = read_f64s(r, real * FEATURE_COUNT, "graph.features")?;
        let features = Array2::from_shape_vec((real, FEATURE_COUNT), values).expect("shape from length");
        let edge_count = read_u32(r, "graph.edge_count")? as usize;
        let mut edges = Vec::with_capacity(edge_count.min(1 << 20));
        for _ in 0..edge_count {
            edges.push(Edge {
                i: read_u32(r, "edge.i")? as usize,
                j: read_u32(r, "edge.j")? as usize,
                weight: read_f64(r, "edge.weight")?,
            });
        }
        let graph = PaddedGraph::from_parts(cap, label_user, source, features, edges)
            .map_err(|e| Error::format("graph", e.to_string()))?;
        graphs.push(graph);
    }
    let pair_count = read_u32(r, "pair_count")? as usize;
    let mut pairs = Vec::with_capacity(pair_count.min(1 << 20));
    for _ in 0..pair_count {
        let a = read_u32(r, "pair.a")? as usize;
        let b = read_u32(r, "pair.b")? as usize;
        let label = match read_u8(r, "pair.label")? {
            0 => false,
            1 => true,
            other => return Err(Error::format("pair.label", format!("invalid label byte {other}"))),
        };
        pairs.push(PairIndex { a, b, label });
    }
    let dataset = PairDataset::new(graphs, pairs).map_err(|e| Error::format("pairs", e.to_string()))?;
    Ok((dataset, provenance))
}

pub fn save_dataset(path: impl AsRef<Path>, dataset: &PairDataset, provenance: &str) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    write_dataset(&mut w, dataset, provenance)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<(PairDataset, String)> {
    let path = path.as_ref();
    let mut r = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    read_dataset(&mut r)
}
