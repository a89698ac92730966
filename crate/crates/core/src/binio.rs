//! Little-endian record helpers shared by the binary file formats.

use std::io::{Read, Write};

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};

/// Maps a short read onto a format error naming the field being read.
pub(crate) fn truncated(field: &str) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::format(field, "truncated file")
        } else {
            Error::Stream(e)
        }
    }
}

pub(crate) fn read_u8<R: Read>(r: &mut R, field: &str) -> Result<u8> {
    r.read_u8().map_err(truncated(field))
}

pub(crate) fn read_u16<R: Read>(r: &mut R, field: &str) -> Result<u16> {
    r.read_u16::<LE>().map_err(truncated(field))
}

pub(crate) fn read_u32<R: Read>(r: &mut R, field: &str) -> Result<u32> {
    r.read_u32::<LE>().map_err(truncated(field))
}

pub(crate) fn read_f64<R: Read>(r: &mut R, field: &str) -> Result<f64> {
    r.read_f64::<LE>().map_err(truncated(field))
}

pub(crate) fn read_f64s<R: Read>(r: &mut R, n: usize, field: &str) -> Result<Vec<f64>> {
    let mut out = vec![0.0; n];
    r.read_f64_into::<LE>(&mut out).map_err(truncated(field))?;
    Ok(out)
}

pub(crate) fn read_string<R: Read>(r: &mut R, field: &str) -> Result<String> {
    let len = read_u32(r, field)? as usize;
    let mut buf = vec![0; len];
    r.read_exact(&mut buf).map_err(truncated(field))?;
    String::from_utf8(buf).map_err(|_| Error::format(field, "invalid utf-8"))
}

pub(crate) fn expect_magic<R: Read>(r: &mut R, magic: &[u8; 4]) -> Result<()> {
    let mut found = [0u8; 4];
    r.read_exact(&mut found).map_err(truncated("magic"))?;
    if &found != magic {
        return Err(Error::format(
            "magic",
            format!(
                "expected {:?}, found {:?}",
                String::from_utf8_lossy(magic),
                String::from_utf8_lossy(&found)
            ),
        ));
    }
    Ok(())
}

pub(crate) fn expect_version<R: Read>(r: &mut R, version: u16) -> Result<()> {
    let found = read_u16(r, "version")?;
    if found != version {
        return Err(Error::format(
            "version",
            format!("unsupported version {found}, expected {version}"),
        ));
    }
    Ok(())
}

pub(crate) fn write_u32<W: Write>(w: &mut W, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::format("u32", format!("{v} does not fit in 32 bits")))?;
    w.write_u32::<LE>(v)?;
    Ok(())
}

pub(crate) fn write_f64s<W: Write>(w: &mut W, values: &[f64]) -> Result<()> {
    for &v in values {
        w.write_f64::<LE>(v)?;
    }
    Ok(())
}

pub(crate) fn write_string<W: Write>(w: &mut W, s: &str) -> Result<()> {
    write_u32(w, s.len())?;
    w.write_all(s.as_bytes())?;
    Ok(())
}
