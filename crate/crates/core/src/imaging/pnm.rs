//! Netpbm graymap and pixmap codec (P2, P3, P5, P6), 8-bit only.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{Image, Mask, RgbImage};
use crate::error::{Error, Result};

/// A decoded raster before grayscale conversion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Raster {
    Gray(Image),
    Rgb(RgbImage),
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_whitespace_and_comments(&mut self) {
        while self.pos < self.data.len() {
            match self.data[self.pos] {
                b'#' => {
                    while self.pos < self.data.len() && self.data[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn token(&mut self, field: &str) -> Result<&'a str> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.pos < self.data.len() && !self.data[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::format(field, "unexpected end of data"));
        }
        std::str::from_utf8(&self.data[start..self.pos]).map_err(|_| Error::format(field, "not ascii"))
    }

    fn number(&mut self, field: &str) -> Result<usize> {
        let tok = self.token(field)?;
        tok.parse()
            .map_err(|_| Error::format(field, format!("expected an unsigned integer, found {tok:?}")))
    }
}

/// Decodes an in-memory netpbm file.
pub fn decode_pnm(data: &[u8]) -> Result<Raster> {
    let mut cur = Cursor { data, pos: 0 };
    let magic = cur.token("magic")?;
    let (channels, binary) = match magic {
        "P2" => (1, false),
        "P5" => (1, true),
        "P3" => (3, false),
        "P6" => (3, true),
        other => return Err(Error::format("magic", format!("unsupported netpbm type {other:?}"))),
    };
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::format("width/height", format!("{width}x{height} is empty")));
    }
    if maxval == 0 || maxval > 255 {
        return Err(Error::format(
            "maxval",
            format!("{maxval} is not an 8-bit depth (expected 1..=255)"),
        ));
    }
    let count = width * height * channels;
    let samples: Vec<u8> = if binary {
        // exactly one whitespace byte separates the header from the raster
        let start = cur.pos + 1;
        let end = start + count;
        if end > data.len() {
            return Err(Error::format(
                "raster",
                format!("expected {count} bytes, found {}", data.len().saturating_sub(start)),
            ));
        }
        data[start..end].to_vec()
    } else {
        (0..count)
            .map(|_| {
                let v = cur.number("raster")?;
                u8::try_from(v).map_err(|_| Error::format("raster", format!("sample {v} exceeds 255")))
            })
            .collect::<Result<_>>()?
    };
    if let Some(&bad) = samples.iter().find(|&&v| v as usize > maxval) {
        return Err(Error::format("raster", format!("sample {bad} exceeds maxval {maxval}")));
    }
    // Rescale to the full 8-bit range when the file uses a smaller maxval.
    let scale = |v: u8| -> u8 {
        if maxval == 255 {
            v
        } else {
            ((v as usize * 255 + maxval / 2) / maxval) as u8
        }
    };
    if channels == 1 {
        Ok(Raster::Gray(Image::new(width, height, samples.into_iter().map(scale).collect())?))
    } else {
        let pixels = samples
            .chunks_exact(3)
            .map(|c| [scale(c[0]), scale(c[1]), scale(c[2])])
            .collect();
        Ok(Raster::Rgb(RgbImage::new(width, height, pixels)?))
    }
}

pub fn load_pnm(path: impl AsRef<Path>) -> Result<Raster> {
    let path = path.as_ref();
    let data = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pnm(&data)
}

/// Loads a graymap; pixmaps are rejected.
pub fn load_pgm(path: impl AsRef<Path>) -> Result<Image> {
    match load_pnm(path)? {
        Raster::Gray(image) => Ok(image),
        Raster::Rgb(_) => Err(Error::format("magic", "expected a graymap, found a pixmap")),
    }
}

/// Loads a mask stored as a graymap; any non-zero pixel is an iris pixel.
pub fn load_mask(path: impl AsRef<Path>) -> Result<Mask> {
    let image = load_pgm(path)?;
    let bits = image.pixels().iter().map(|&v| v != 0).collect();
    Mask::new(image.width(), image.height(), bits)
}

/// Encodes a binary P5 graymap. Each comment line is written into the header.
pub fn write_pgm<W: Write>(mut out: W, image: &Image, comments: &[String]) -> std::io::Result<()> {
    writeln!(out, "P5")?;
    for comment in comments {
        for line in comment.lines() {
            writeln!(out, "# {line}")?;
        }
    }
    write!(out, "{} {}\n255\n", image.width(), image.height())?;
    out.write_all(image.pixels())
}

pub fn save_pgm(path: impl AsRef<Path>, image: &Image, comments: &[String]) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_pgm(&mut buf, image, comments)?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}
