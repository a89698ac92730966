//! Model checkpoints. Little-endian:
//!
//! ```text
//! magic "IGCK" | version u16 | provenance (u32 len + utf-8)
//! architecture: features, gcn1, gcn2, embedding, head1, head2, head3 (u32 each)
//! adjacency u8 (0 binary, 1 weighted) | combine u8 (0 absolute, 1 signed)
//! tensor count u32, then per tensor:
//!   name (u32 len + utf-8) | rank u8 | rank x u32 dims | product(dims) f64 values
//! ```
//!
//! Tensors appear in layer order, weight before bias. Loading checks every
//! name and shape against the architecture in the header.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, WriteBytesExt};

use super::model::{AdjacencyMode, Combine, ModelOptions};
use super::params::{Architecture, ModelParams};
use crate::binio::*;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"IGCK";
pub const CHECKPOINT_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub options: ModelOptions,
    pub provenance: String,
}

fn tensor_dims(params: &ModelParams) -> Vec<(String, Vec<usize>)> {
    params
        .layers()
        .into_iter()
        .zip(super::params::LAYER_NAMES)
        .flat_map(|(l, name)| {
            [
                (format!("{name}.weight"), l.weight.shape().to_vec()),
                (format!("{name}.bias"), l.bias.shape().to_vec()),
            ]
        })
        .collect()
}

pub fn write_checkpoint<W: Write>(w: &mut W, ck: &Checkpoint) -> Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_u16::<LE>(CHECKPOINT_VERSION)?;
    write_string(w, &ck.provenance)?;
    let a = ck.params.arch;
    for v in [a.features, a.gcn[0], a.gcn[1], a.embedding, a.head[0], a.head[1], a.head[2]] {
        write_u32(w, v)?;
    }
    w.write_u8(match ck.options.adjacency {
        AdjacencyMode::Binary => 0,
        AdjacencyMode::Weighted => 1,
    })?;
    w.write_u8(match ck.options.combine {
        Combine::Absolute => 0,
        Combine::Signed => 1,
    })?;
    let dims = tensor_dims(&ck.params);
    write_u32(w, dims.len())?;
    for ((name, shape), (_, values)) in dims.iter().zip(ck.params.tensors()) {
        write_string(w, name)?;
        w.write_u8(shape.len() as u8)?;
        for &d in shape {
            write_u32(w, d)?;
        }
        write_f64s(w, values)?;
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(r: &mut R) -> Result<Checkpoint> {
    expect_magic(r, CHECKPOINT_MAGIC)?;
    expect_version(r, CHECKPOINT_VERSION)?;
    let provenance = read_string(r, "provenance")?;
    let mut arch_fields = [0usize; 7];
    for v in arch_fields.iter_mut() {
        *v = read_u32(r, "architecture")? as usize;
    }
    if arch_fields.contains(&0) {
        return Err(Error::format("architecture", "layer width of zero"));
    }
    let [features, g1, g2, embedding, h1, h2, h3] = arch_fields;
    let arch = Architecture {
        features,
        gcn: [g1, g2],
        embedding,
        head: [h1, h2, h3],
    };
    let adjacency = match read_u8(r, "adjacency")? {
        0 => AdjacencyMode::Binary,
        1 => AdjacencyMode::Weighted,
        b => return Err(Error::format("adjacency", format!("unknown mode {b}"))),
    };
    let combine = match read_u8(r, "combine")? {
        0 => Combine::Absolute,
        1 => Combine::Signed,
        b => return Err(Error::format("combine", format!("unknown mode {b}"))),
    };

    let mut params = ModelParams::zeros(arch);
    let expected = tensor_dims(&params);
    let count = read_u32(r, "tensor_count")? as usize;
    if count != expected.len() {
        return Err(Error::format(
            "tensor_count",
            format!("expected {} tensors, found {count}", expected.len()),
        ));
    }
    for ((name, shape), (_, slot)) in expected.iter().zip(params.tensors_mut()) {
        let found_name = read_string(r, "tensor.name")?;
        if &found_name != name {
            return Err(Error::format("tensor.name", format!("expected {name}, found {found_name}")));
        }
        let rank = read_u8(r, "tensor.rank")? as usize;
        let found: Vec<usize> = (0..rank)
            .map(|_| read_u32(r, "tensor.dims").map(|d| d as usize))
            .collect::<Result<_>>()?;
        if &found != shape {
            return Err(Error::Shape {
                tensor: name.clone(),
                expected: shape.clone(),
                found,
            });
        }
        slot.copy_from_slice(&read_f64s(r, slot.len(), "tensor.values")?);
    }
    if !params.is_finite() {
        return Err(Error::format("tensor.values", "non-finite parameter"));
    }
    Ok(Checkpoint {
        params,
        options: ModelOptions { adjacency, combine },
        provenance,
    })
}

pub fn save_checkpoint(path: impl AsRef<Path>, ck: &Checkpoint) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    write_checkpoint(&mut w, ck)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let mut r = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    read_checkpoint(&mut r)
}

/// Loads a checkpoint and requires a specific architecture.
pub fn load_checkpoint_for(path: impl AsRef<Path>, arch: &Architecture) -> Result<Checkpoint> {
    let ck = load_checkpoint(path)?;
    if ck.params.arch != *arch {
        let flat = |a: &Architecture| vec![a.features, a.gcn[0], a.gcn[1], a.embedding, a.head[0], a.head[1], a.head[2]];
        return Err(Error::Shape {
            tensor: "architecture".into(),
            expected: flat(arch),
            found: flat(&ck.params.arch),
        });
    }
    Ok(ck)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_for;

    fn small() -> Checkpoint {
        let arch = Architecture {
            features: 7,
            gcn: [5, 4],
            embedding: 3,
            head: [4, 3, 2],
        };
        Checkpoint {
            params: ModelParams::init(arch, &mut rng_for(9, "init", 0)),
            options: ModelOptions {
                adjacency: AdjacencyMode::Weighted,
                combine: Combine::Absolute,
            },
            provenance: "{}".into(),
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let ck = small();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &ck).unwrap();
        assert_eq!(read_checkpoint(&mut buf.as_slice()).unwrap(), ck);
    }

    #[test]
    fn rejects_shape_mismatch() {
        let ck = small();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &ck).unwrap();
        // architecture starts after magic, version and the provenance string
        let gcn1_offset = 4 + 2 + 4 + 2 + 4;
        buf[gcn1_offset] = 6;
        assert!(matches!(read_checkpoint(&mut buf.as_slice()), Err(Error::Shape { .. })));
    }

    #[test]
    fn rejects_other_architecture_and_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ck");
        save_checkpoint(&path, &small()).unwrap();
        assert!(matches!(
            load_checkpoint_for(&path, &Architecture::default()),
            Err(Error::Shape { .. })
        ));
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 3);
        assert!(matches!(read_checkpoint(&mut bytes.as_slice()), Err(Error::Format { .. })));
        bytes[0] = b'X';
        assert!(matches!(read_checkpoint(&mut bytes.as_slice()), Err(Error::Format { .. })));
    }
}
