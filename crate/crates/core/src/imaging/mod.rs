//! Image preprocessing: grayscale conversion, mask cropping, resizing,
//! contrast enhancement, reflection inpainting and the cross-shaped
//! spectral filter.

mod pnm;

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use pnm::{decode_pnm, load_mask, load_pgm, load_pnm, save_pgm, write_pgm, Raster};

/// Side length of the square images fed to graph extraction.
pub const CANONICAL_SIZE: usize = 200;

/// Default intensity at or above which a pixel counts as a specular reflection.
pub const DEFAULT_REFLECT_THRESHOLD: u8 = 250;

/// 8-bit grayscale raster, row-major.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Image {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl fmt::Debug for Image {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Image")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl Image {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimension(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::Dimension(format!(
                "{width}x{height} image needs {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        Ok(Image {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Image::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                pixels.push(f(row, col));
            }
        }
        Image::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: u8) {
        self.pixels[row * self.width + col] = value;
    }
}

/// 8-bit RGB raster, row-major interleaved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(Error::Dimension(format!(
                "{width}x{height} rgb image with {} pixels",
                pixels.len()
            )));
        }
        Ok(RgbImage {
            width,
            height,
            pixels,
        })
    }

    /// Assembles an image from three separate channel planes.
    pub fn from_planes(width: usize, height: usize, red: &[u8], green: &[u8], blue: &[u8]) -> Result<Self> {
        let n = width * height;
        if red.len() != n || green.len() != n || blue.len() != n {
            return Err(Error::Dimension(format!(
                "channel planes have lengths {}/{}/{}, expected {n}",
                red.len(),
                green.len(),
                blue.len()
            )));
        }
        let pixels = (0..n).map(|i| [red[i], green[i], blue[i]]).collect();
        RgbImage::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }
}

/// Iris mask; `true` marks iris pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::Dimension(format!(
                "{width}x{height} mask with {} bits",
                bits.len()
            )));
        }
        Ok(Mask {
            width,
            height,
            bits,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Result<Self> {
        let mut bits = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                bits.push(f(row, col));
            }
        }
        Mask::new(width, height, bits)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }
}

/// Contrast enhancement variant applied after resizing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Equalization {
    #[default]
    Stretch,
    Histogram,
}

impl FromStr for Equalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stretch" => Ok(Equalization::Stretch),
            "histogram" => Ok(Equalization::Histogram),
            other => Err(Error::Config(format!(
                "unknown equalization {other:?}, expected stretch or histogram"
            ))),
        }
    }
}

impl fmt::Display for Equalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Equalization::Stretch => "stretch",
            Equalization::Histogram => "histogram",
        })
    }
}

/// The 3x3 cross kernel `[[0,a,0],[a,1,a],[0,a,0]]` with `a = 1/denominator`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct SpectralFilter {
    denominator: u32,
}

impl SpectralFilter {
    pub const SUPPORTED_DENOMINATORS: [u32; 6] = [10, 9, 8, 7, 6, 5];

    pub fn new(denominator: u32) -> Result<Self> {
        if Self::SUPPORTED_DENOMINATORS.contains(&denominator) {
            Ok(SpectralFilter { denominator })
        } else {
            Err(Error::Config(format!(
                "unsupported filter weight 1/{denominator}; expected one of 1/10..1/5"
            )))
        }
    }

    /// All six filters in ascending order of alpha.
    pub fn all() -> Vec<SpectralFilter> {
        Self::SUPPORTED_DENOMINATORS
            .iter()
            .map(|&denominator| SpectralFilter { denominator })
            .collect()
    }

    pub fn denominator(&self) -> u32 {
        self.denominator
    }

    pub fn alpha(&self) -> f64 {
        1.0 / self.denominator as f64
    }
}

impl FromStr for SpectralFilter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let denominator = s
            .strip_prefix("1/")
            .and_then(|d| d.trim().parse::<u32>().ok())
            .ok_or_else(|| Error::Config(format!("filter weight {s:?} is not of the form 1/k")))?;
        SpectralFilter::new(denominator)
    }
}

impl fmt::Display for SpectralFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "1/{}", self.denominator)
    }
}

impl TryFrom<String> for SpectralFilter {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        value.parse()
    }
}

impl From<SpectralFilter> for String {
    fn from(value: SpectralFilter) -> Self {
        value.to_string()
    }
}

#[inline]
fn round_clamp(value: f64) -> u8 {
    value.round().clamp(0.0, 255.0) as u8
}

/// ITU-R BT.601 luma. Grayscale rasters pass through unchanged.
pub fn to_grayscale(raster: &Raster) -> Image {
    match raster {
        Raster::Gray(image) => image.clone(),
        Raster::Rgb(rgb) => {
            let pixels = rgb
                .pixels()
                .iter()
                .map(|&[r, g, b]| round_clamp(0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64))
                .collect();
            Image {
                width: rgb.width(),
                height: rgb.height(),
                pixels,
            }
        }
    }
}

/// Zeroes every pixel outside the mask and crops to the mask's bounding rectangle.
pub fn apply_mask_and_crop(image: &Image, mask: &Mask) -> Result<Image> {
    if mask.width != image.width || mask.height != image.height {
        return Err(Error::Dimension(format!(
            "mask is {}x{}, image is {}x{}",
            mask.width, mask.height, image.width, image.height
        )));
    }
    let mut bounds: Option<(usize, usize, usize, usize)> = None;
    for row in 0..mask.height {
        for col in 0..mask.width {
            if mask.get(row, col) {
                bounds = Some(match bounds {
                    None => (row, col, row, col),
                    Some((r0, c0, r1, c1)) => (r0.min(row), c0.min(col), r1.max(row), c1.max(col)),
                });
            }
        }
    }
    let (r0, c0, r1, c1) = bounds.ok_or(Error::EmptyMask)?;
    Image::from_fn(c1 - c0 + 1, r1 - r0 + 1, |row, col| {
        let (sr, sc) = (row + r0, col + c0);
        if mask.get(sr, sc) {
            image.get(sr, sc)
        } else {
            0
        }
    })
}

/// Bilinear resampling with corner-aligned sample positions.
pub fn resize_bilinear(image: &Image, width: usize, height: usize) -> Result<Image> {
    if width == 0 || height == 0 {
        return Err(Error::Dimension(format!("target size {width}x{height}")));
    }
    if width == image.width && height == image.height {
        return Ok(image.clone());
    }
    let scale = |src: usize, dst: usize| {
        if dst > 1 {
            (src - 1) as f64 / (dst - 1) as f64
        } else {
            0.0
        }
    };
    let sy = scale(image.height, height);
    let sx = scale(image.width, width);
    Image::from_fn(width, height, |row, col| {
        let y = row as f64 * sy;
        let x = col as f64 * sx;
        let y0 = (y.floor() as usize).min(image.height - 1);
        let x0 = (x.floor() as usize).min(image.width - 1);
        let y1 = (y0 + 1).min(image.height - 1);
        let x1 = (x0 + 1).min(image.width - 1);
        let fy = y - y0 as f64;
        let fx = x - x0 as f64;
        let p = |r: usize, c: usize| image.get(r, c) as f64;
        let top = p(y0, x0) * (1.0 - fx) + p(y0, x1) * fx;
        let bottom = p(y1, x0) * (1.0 - fx) + p(y1, x1) * fx;
        round_clamp(top * (1.0 - fy) + bottom * fy)
    })
}

/// Linear min-max stretch onto `[0, 255]`. A constant image maps to all zeros.
pub fn stretch_contrast(image: &Image) -> Image {
    let min = *image.pixels.iter().min().expect("non-empty image");
    let max = *image.pixels.iter().max().expect("non-empty image");
    let range = (max - min) as f64;
    let pixels = image
        .pixels
        .iter()
        .map(|&v| {
            if range == 0.0 {
                0
            } else {
                round_clamp((v - min) as f64 * 255.0 / range)
            }
        })
        .collect();
    Image {
        pixels,
        ..image.clone()
    }
}

/// Cumulative-histogram equalization. A constant image maps to all zeros.
pub fn equalize_histogram(image: &Image) -> Image {
    let mut hist = [0usize; 256];
    for &v in &image.pixels {
        hist[v as usize] += 1;
    }
    let mut cdf = [0usize; 256];
    let mut acc = 0;
    for (i, &h) in hist.iter().enumerate() {
        acc += h;
        cdf[i] = acc;
    }
    let total = image.pixels.len();
    let cdf_min = cdf.iter().copied().find(|&c| c > 0).unwrap_or(0);
    let denom = (total - cdf_min) as f64;
    let pixels = image
        .pixels
        .iter()
        .map(|&v| {
            if denom == 0.0 {
                0
            } else {
                round_clamp((cdf[v as usize] - cdf_min) as f64 * 255.0 / denom)
            }
        })
        .collect();
    Image {
        pixels,
        ..image.clone()
    }
}

pub fn enhance_contrast(image: &Image, mode: Equalization) -> Image {
    match mode {
        Equalization::Stretch => stretch_contrast(image),
        Equalization::Histogram => equalize_histogram(image),
    }
}

/// Result of [`remove_reflections`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReflectionRemoval {
    pub image: Image,
    pub regions_filled: usize,
    /// Every pixel was at or above the threshold; the image is returned unchanged.
    pub saturated: bool,
}

const NEIGHBORS_8: [(isize, isize); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

/// Fills each 8-connected bright region (pixels `>= threshold`) with the
/// rounded mean of its one-pixel outer boundary.
pub fn remove_reflections(image: &Image, threshold: u8) -> ReflectionRemoval {
    let (w, h) = (image.width, image.height);
    if image.pixels.iter().all(|&v| v >= threshold) {
        log::warn!("every pixel is at or above the reflection threshold {threshold}; skipping");
        return ReflectionRemoval {
            image: image.clone(),
            regions_filled: 0,
            saturated: true,
        };
    }

    let mut out = image.clone();
    let mut visited = vec![false; w * h];
    // Boundary pixels are tagged with the id of the last region that counted them,
    // so a pixel bordering a region at several points is summed once.
    let mut boundary_tag = vec![usize::MAX; w * h];
    let mut region = Vec::new();
    let mut queue = VecDeque::new();
    let mut regions_filled = 0;

    for start in 0..w * h {
        if visited[start] || image.pixels[start] < threshold {
            continue;
        }
        region.clear();
        visited[start] = true;
        queue.push_back(start);
        let (mut sum, mut count) = (0u64, 0u64);
        while let Some(idx) = queue.pop_front() {
            region.push(idx);
            let (row, col) = ((idx / w) as isize, (idx % w) as isize);
            for (dr, dc) in NEIGHBORS_8 {
                let (r, c) = (row + dr, col + dc);
                if r < 0 || c < 0 || r >= h as isize || c >= w as isize {
                    continue;
                }
                let n = r as usize * w + c as usize;
                if image.pixels[n] >= threshold {
                    if !visited[n] {
                        visited[n] = true;
                        queue.push_back(n);
                    }
                } else if boundary_tag[n] != start {
                    boundary_tag[n] = start;
                    sum += image.pixels[n] as u64;
                    count += 1;
                }
            }
        }
        // count > 0: the image is not saturated, so every maximal bright region
        // borders at least one darker pixel.
        let fill = round_clamp(sum as f64 / count as f64);
        for &idx in &region {
            out.pixels[idx] = fill;
        }
        regions_filled += 1;
    }

    ReflectionRemoval {
        image: out,
        regions_filled,
        saturated: false,
    }
}

/// Convolves with the cross kernel using replicate border padding; results
/// are rounded, then clamped to `[0, 255]`.
pub fn spectral_filter(image: &Image, filter: SpectralFilter) -> Image {
    let (w, h) = (image.width, image.height);
    let alpha = filter.alpha();
    let at = |r: isize, c: isize| {
        let r = r.clamp(0, h as isize - 1) as usize;
        let c = c.clamp(0, w as isize - 1) as usize;
        image.get(r, c) as f64
    };
    let mut pixels = Vec::with_capacity(w * h);
    for row in 0..h as isize {
        for col in 0..w as isize {
            let cross = at(row - 1, col) + at(row + 1, col) + at(row, col - 1) + at(row, col + 1);
            pixels.push(round_clamp(at(row, col) + alpha * cross));
        }
    }
    Image {
        width: w,
        height: h,
        pixels,
    }
}

/// Preprocessing settings for one image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessOptions {
    pub size: usize,
    pub equalization: Equalization,
    /// `None` disables reflection removal.
    pub reflect_threshold: Option<u8>,
    pub filter: Option<SpectralFilter>,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        PreprocessOptions {
            size: CANONICAL_SIZE,
            equalization: Equalization::Stretch,
            reflect_threshold: Some(DEFAULT_REFLECT_THRESHOLD),
            filter: None,
        }
    }
}

/// Mask-crop, resize, enhance contrast, remove reflections and optionally
/// apply the spectral filter.
pub fn preprocess(raster: &Raster, mask: Option<&Mask>, options: &PreprocessOptions) -> Result<Image> {
    let gray = to_grayscale(raster);
    let cropped = match mask {
        Some(mask) => apply_mask_and_crop(&gray, mask)?,
        None => gray,
    };
    let resized = resize_bilinear(&cropped, options.size, options.size)?;
    let enhanced = enhance_contrast(&resized, options.equalization);
    let cleaned = match options.reflect_threshold {
        Some(threshold) => remove_reflections(&enhanced, threshold).image,
        None => enhanced,
    };
    Ok(match options.filter {
        Some(filter) => spectral_filter(&cleaned, filter),
        None => cleaned,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn img(w: usize, h: usize, px: &[u8]) -> Image {
        Image::new(w, h, px.to_vec()).unwrap()
    }

    #[test]
    fn image_rejects_bad_lengths() {
        assert!(Image::new(2, 2, vec![0; 3]).is_err());
        assert!(Image::new(0, 2, vec![]).is_err());
    }

    #[test]
    fn grayscale_luma() {
        let rgb = RgbImage::new(3, 1, vec![[255, 255, 255], [255, 0, 0], [0, 0, 0]]).unwrap();
        let gray = to_grayscale(&Raster::Rgb(rgb));
        assert_eq!(gray.pixels(), &[255, 76, 0]);

        let g = img(2, 1, &[9, 200]);
        assert_eq!(to_grayscale(&Raster::Gray(g.clone())), g);
    }

    #[test]
    fn rgb_planes_must_agree() {
        assert!(RgbImage::from_planes(2, 1, &[1, 2], &[1, 2], &[1]).is_err());
        let rgb = RgbImage::from_planes(1, 1, &[1], &[2], &[3]).unwrap();
        assert_eq!(rgb.pixels(), &[[1, 2, 3]]);
    }

    #[test]
    fn crop_all_true_is_identity() {
        let image = img(3, 2, &[1, 2, 3, 4, 5, 6]);
        let mask = Mask::from_fn(3, 2, |_, _| true).unwrap();
        assert_eq!(apply_mask_and_crop(&image, &mask).unwrap(), image);
    }

    #[test]
    fn crop_single_pixel() {
        let image = img(3, 3, &[1, 2, 3, 4, 5, 6, 7, 8, 9]);
        let mask = Mask::from_fn(3, 3, |r, c| r == 1 && c == 1).unwrap();
        assert_eq!(apply_mask_and_crop(&image, &mask).unwrap(), img(1, 1, &[5]));
    }

    #[test]
    fn crop_l_shape_matches_brute_force() {
        let image = Image::from_fn(4, 4, |r, c| (10 * r + c + 1) as u8).unwrap();
        // L: column 1 rows 1..=3, plus row 3 columns 1..=2
        let on = |r: usize, c: usize| (c == 1 && r >= 1) || (r == 3 && (1..=2).contains(&c));
        let mask = Mask::from_fn(4, 4, on).unwrap();
        let cropped = apply_mask_and_crop(&image, &mask).unwrap();

        let coords: Vec<(usize, usize)> = (0..4)
            .flat_map(|r| (0..4).map(move |c| (r, c)))
            .filter(|&(r, c)| on(r, c))
            .collect();
        let r0 = coords.iter().map(|p| p.0).min().unwrap();
        let r1 = coords.iter().map(|p| p.0).max().unwrap();
        let c0 = coords.iter().map(|p| p.1).min().unwrap();
        let c1 = coords.iter().map(|p| p.1).max().unwrap();
        assert_eq!((cropped.width(), cropped.height()), (c1 - c0 + 1, r1 - r0 + 1));
        for r in 0..cropped.height() {
            for c in 0..cropped.width() {
                let want = if on(r + r0, c + c0) { image.get(r + r0, c + c0) } else { 0 };
                assert_eq!(cropped.get(r, c), want);
            }
        }
        assert_eq!(cropped.pixels(), &[12, 0, 22, 0, 32, 33]);
    }

    #[test]
    fn crop_rejects_empty_and_mismatched_masks() {
        let image = img(2, 2, &[1, 2, 3, 4]);
        let empty = Mask::from_fn(2, 2, |_, _| false).unwrap();
        assert!(matches!(apply_mask_and_crop(&image, &empty), Err(Error::EmptyMask)));
        let small = Mask::from_fn(1, 2, |_, _| true).unwrap();
        assert!(matches!(apply_mask_and_crop(&image, &small), Err(Error::Dimension(_))));
    }

    #[test]
    fn resize_cases() {
        let big = Image::from_fn(200, 200, |r, c| ((r * 7 + c * 3) % 256) as u8).unwrap();
        assert_eq!(resize_bilinear(&big, 200, 200).unwrap(), big);

        let constant = Image::filled(37, 11, 50).unwrap();
        let out = resize_bilinear(&constant, 200, 200).unwrap();
        assert!(out.pixels().iter().all(|&v| v == 50));

        let small = img(2, 2, &[0, 100, 100, 200]);
        let up = resize_bilinear(&small, 3, 3).unwrap();
        assert_eq!(up.get(1, 1), 100);
        assert_eq!(up.pixels(), &[0, 50, 100, 50, 100, 150, 100, 150, 200]);
    }

    #[test]
    fn resize_to_single_pixel_samples_origin() {
        let small = img(2, 2, &[7, 100, 100, 200]);
        assert_eq!(resize_bilinear(&small, 1, 1).unwrap().pixels(), &[7]);
    }

    #[test]
    fn stretch_cases() {
        let image = Image::from_fn(101, 1, |_, c| (50 + c) as u8).unwrap();
        let out = stretch_contrast(&image);
        assert_eq!(out.get(0, 0), 0);
        assert_eq!(out.get(0, 100), 255);
        assert_eq!(out.get(0, 50), 128);

        let full = Image::from_fn(256, 1, |_, c| c as u8).unwrap();
        assert_eq!(stretch_contrast(&full), full);

        let constant = Image::filled(4, 4, 90).unwrap();
        assert!(stretch_contrast(&constant).pixels().iter().all(|&v| v == 0));
    }

    #[test]
    fn histogram_equalization_spans_range() {
        let image = img(4, 1, &[10, 10, 20, 30]);
        let out = equalize_histogram(&image);
        assert_eq!(out.pixels(), &[0, 0, 128, 255]);
    }

    #[test]
    fn reflections_untouched_when_dim() {
        let image = Image::from_fn(5, 5, |r, c| (r * 40 + c) as u8).unwrap();
        let out = remove_reflections(&image, 250);
        assert_eq!(out.image, image);
        assert_eq!(out.regions_filled, 0);
    }

    #[test]
    fn reflection_single_pixel() {
        let mut image = Image::filled(3, 3, 100).unwrap();
        image.set(1, 1, 255);
        let out = remove_reflections(&image, 250);
        assert_eq!(out.image, Image::filled(3, 3, 100).unwrap());
        assert_eq!(out.regions_filled, 1);
    }

    #[test]
    fn reflection_block_uses_ring_mean() {
        // 2x2 bright block at rows/cols 1..=2, ring alternating 80/120 around it.
        let image = Image::from_fn(4, 4, |r, c| {
            if (1..=2).contains(&r) && (1..=2).contains(&c) {
                255
            } else if (r + c) % 2 == 0 {
                80
            } else {
                120
            }
        })
        .unwrap();
        let ring: Vec<u32> = (0..4)
            .flat_map(|r| (0..4).map(move |c| (r, c)))
            .filter(|&(r, c)| !((1..=2).contains(&r) && (1..=2).contains(&c)))
            .map(|(r, c)| image.get(r, c) as u32)
            .collect();
        let expect = (ring.iter().sum::<u32>() as f64 / ring.len() as f64).round() as u8;
        assert_eq!(expect, 100);
        let out = remove_reflections(&image, 250);
        for r in 1..=2 {
            for c in 1..=2 {
                assert_eq!(out.image.get(r, c), expect);
            }
        }
    }

    #[test]
    fn reflection_at_border_uses_available_neighbors() {
        let image = img(3, 1, &[255, 40, 60]);
        let out = remove_reflections(&image, 250);
        assert_eq!(out.image.pixels(), &[40, 40, 60]);
    }

    #[test]
    fn saturated_image_is_flagged() {
        let image = Image::filled(3, 3, 252).unwrap();
        let out = remove_reflections(&image, 250);
        assert!(out.saturated);
        assert_eq!(out.image, image);
    }

    #[test]
    fn spectral_filter_cases() {
        let f5 = SpectralFilter::new(5).unwrap();
        for v in [0u8, 10, 100, 141, 200] {
            let out = spectral_filter(&Image::filled(5, 5, v).unwrap(), f5);
            let want = (v as f64 * 1.8).round().min(255.0) as u8;
            assert!(out.pixels().iter().all(|&p| p == want), "v={v}");
        }

        for f in SpectralFilter::all() {
            let out = spectral_filter(&Image::filled(4, 4, 0).unwrap(), f);
            assert!(out.pixels().iter().all(|&p| p == 0));
        }

        let mut image = Image::filled(3, 3, 0).unwrap();
        image.set(1, 1, 100);
        let out = spectral_filter(&image, SpectralFilter::new(7).unwrap());
        assert_eq!(out.pixels(), &[0, 14, 0, 14, 100, 14, 0, 14, 0]);
    }

    #[test]
    fn filter_parsing() {
        assert_eq!("1/7".parse::<SpectralFilter>().unwrap().denominator(), 7);
        assert!("1/4".parse::<SpectralFilter>().is_err());
        assert!("0.2".parse::<SpectralFilter>().is_err());
        assert_eq!(SpectralFilter::new(9).unwrap().to_string(), "1/9");
    }

    fn arb_image() -> impl Strategy<Value = Image> {
        (1usize..12, 1usize..12).prop_flat_map(|(w, h)| {
            proptest::collection::vec(any::<u8>(), w * h).prop_map(move |px| Image::new(w, h, px).unwrap())
        })
    }

    proptest! {
        #[test]
        fn stretch_is_idempotent(image in arb_image()) {
            let once = stretch_contrast(&image);
            prop_assert_eq!(stretch_contrast(&once), once);
        }

        #[test]
        fn reflections_leave_dark_pixels(image in arb_image(), threshold in 1u8..=255) {
            let out = remove_reflections(&image, threshold);
            for (a, b) in image.pixels().iter().zip(out.image.pixels()) {
                if *a < threshold {
                    prop_assert_eq!(a, b);
                }
            }
        }

        #[test]
        fn filter_linear_up_to_rounding(
            (a, b) in (1usize..8, 1usize..8).prop_flat_map(|(w, h)| {
                let px = proptest::collection::vec(0u8..70, w * h);
                (px.clone(), px).prop_map(move |(a, b)| (Image::new(w, h, a).unwrap(), Image::new(w, h, b).unwrap()))
            }),
            denom in 5u32..=10,
        ) {
            // Inputs below 70 keep a+b below 140 and the filtered sum below 255: no clamp fires.
            let f = SpectralFilter::new(denom).unwrap();
            let sum = Image::new(a.width(), a.height(),
                a.pixels().iter().zip(b.pixels()).map(|(x, y)| x + y).collect()).unwrap();
            let fs = spectral_filter(&sum, f);
            let fa = spectral_filter(&a, f);
            let fb = spectral_filter(&b, f);
            for i in 0..fs.pixels().len() {
                let lhs = fs.pixels()[i] as i32;
                let rhs = fa.pixels()[i] as i32 + fb.pixels()[i] as i32;
                prop_assert!((lhs - rhs).abs() <= 1);
            }
        }

        #[test]
        fn crop_dims_match_mask_extent(
            (w, h, bits) in (1usize..10, 1usize..10).prop_flat_map(|(w, h)| {
                (Just(w), Just(h), proptest::collection::vec(any::<bool>(), w * h))
            })
        ) {
            prop_assume!(bits.iter().any(|&b| b));
            let image = Image::filled(w, h, 9).unwrap();
            let mask = Mask::new(w, h, bits.clone()).unwrap();
            let cropped = apply_mask_and_crop(&image, &mask).unwrap();
            let on: Vec<(usize, usize)> = (0..h).flat_map(|r| (0..w).map(move |c| (r, c)))
                .filter(|&(r, c)| bits[r * w + c]).collect();
            let rows = on.iter().map(|p| p.0).max().unwrap() - on.iter().map(|p| p.0).min().unwrap() + 1;
            let cols = on.iter().map(|p| p.1).max().unwrap() - on.iter().map(|p| p.1).min().unwrap() + 1;
            prop_assert_eq!((cropped.height(), cropped.width()), (rows, cols));
        }
    }
}
