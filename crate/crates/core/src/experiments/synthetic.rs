//! Synthetic iris-like corpora for exercising the pipeline without the
//! license-restricted capture data.
//!
//! Every user owns a two-octave value-noise texture whose lattice
//! frequency and phase are drawn from the user's seed stream, blended with
//! a radial ramp in a user-specific proportion. An image is
//! the user texture sampled through a small random affine jitter, plus a
//! smooth value-noise perturbation, quantized to 8 bits. Perturbation
//! amplitude and jitter both scale with `strength`; at strength 0 all
//! images of a user are identical.

use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Manifest, ManifestEntry};
use crate::error::{Error, Result};
use crate::imaging::{save_pgm, Image, CANONICAL_SIZE};
use crate::seed::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub n_users: usize,
    pub images_per_user: usize,
    /// Side length of the square images.
    pub image_size: usize,
    /// Perturbation amplitude on the unit intensity scale.
    pub strength: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_users: 10,
            images_per_user: 20,
            image_size: CANONICAL_SIZE,
            strength: DEFAULT_STRENGTH,
            seed: 0,
        }
    }
}

pub const DEFAULT_STRENGTH: f64 = 0.1;

/// Largest translation, as a fraction of the image side, at strength 1.
const SHIFT_PER_STRENGTH: f64 = 0.05;
/// Largest rotation in radians at strength 1.
const ROTATION_PER_STRENGTH: f64 = 0.1;
const PERTURB_CELLS: usize = 3;

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_users < 2 {
            return Err(Error::Config("synthetic corpus needs at least 2 users".into()));
        }
        if self.images_per_user < 5 {
            return Err(Error::Config("synthetic corpus needs at least 5 images per user".into()));
        }
        if self.image_size < 8 {
            return Err(Error::Config("synthetic image size must be at least 8".into()));
        }
        if !(0.0..=1.0).contains(&self.strength) {
            return Err(Error::Config("perturbation strength must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn user_id(&self, user: usize) -> String {
        let width = self.n_users.saturating_sub(1).to_string().len().max(3);
        format!("u{user:0width$}")
    }
}

/// Periodic value noise with smoothstep interpolation over a square lattice.
#[derive(Debug, Clone)]
struct ValueNoise {
    cells: usize,
    values: Vec<f64>,
    phase: (f64, f64),
}

impl ValueNoise {
    fn new<R: Rng>(cells: usize, rng: &mut R) -> Self {
        let values = (0..cells * cells).map(|_| rng.gen::<f64>()).collect();
        let phase = (rng.gen::<f64>() * cells as f64, rng.gen::<f64>() * cells as f64);
        ValueNoise { cells, values, phase }
    }

    /// Samples at unit coordinates; the lattice wraps around.
    fn sample(&self, x: f64, y: f64) -> f64 {
        let n = self.cells as f64;
        let (gx, gy) = (x * n + self.phase.0, y * n + self.phase.1);
        let (fx, fy) = (gx.floor(), gy.floor());
        let (tx, ty) = (smoothstep(gx - fx), smoothstep(gy - fy));
        let wrap = |v: f64| v.rem_euclid(n) as usize;
        let (x0, y0) = (wrap(fx), wrap(fy));
        let (x1, y1) = ((x0 + 1) % self.cells, (y0 + 1) % self.cells);
        let at = |cx: usize, cy: usize| self.values[cy * self.cells + cx];
        let top = at(x0, y0) * (1.0 - tx) + at(x1, y0) * tx;
        let bottom = at(x0, y1) * (1.0 - tx) + at(x1, y1) * tx;
        top * (1.0 - ty) + bottom * ty
    }
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// A user's base texture.
#[derive(Debug, Clone)]
struct UserTexture {
    coarse: ValueNoise,
    fine: ValueNoise,
    /// Weight of the fine octave.
    detail: f64,
    /// Share of the noise texture against a radial ramp; low values give
    /// ring-like images with few components.
    texture: f64,
}

impl UserTexture {
    fn new(seed: u64, user: usize) -> Self {
        let mut rng = rng_for(seed, "synth/user", user as u64);
        let cells = rng.gen_range(2..=3);
        let detail = rng.gen_range(0.0..0.3);
        let texture = rng.gen_range(0.35..1.0);
        UserTexture {
            coarse: ValueNoise::new(cells, &mut rng),
            fine: ValueNoise::new(2 * cells + 1, &mut rng),
            detail,
            texture,
        }
    }

    fn sample(&self, x: f64, y: f64) -> f64 {
        let noise = (self.coarse.sample(x, y) + self.detail * self.fine.sample(x, y)) / (1.0 + self.detail);
        let ramp = ((x - 0.5).powi(2) + (y - 0.5).powi(2)).sqrt() * std::f64::consts::SQRT_2;
        self.texture * noise + (1.0 - self.texture) * ramp
    }
}

/// Image `index` of `user`.
pub fn synthesize_image(spec: &SyntheticSpec, user: usize, index: usize) -> Image {
    let texture = UserTexture::new(spec.seed, user);
    render(spec, &texture, user, index)
}

fn render(spec: &SyntheticSpec, texture: &UserTexture, user: usize, index: usize) -> Image {
    let mut rng = rng_for(spec.seed, &format!("synth/image/{user}"), index as u64);
    let s = spec.strength;
    let shift = (
        rng.gen_range(-1.0..=1.0) * s * SHIFT_PER_STRENGTH,
        rng.gen_range(-1.0..=1.0) * s * SHIFT_PER_STRENGTH,
    );
    let angle: f64 = rng.gen_range(-1.0..=1.0) * s * ROTATION_PER_STRENGTH;
    let perturb = ValueNoise::new(PERTURB_CELLS, &mut rng);
    let (sin, cos) = angle.sin_cos();
    let size = spec.image_size;
    Image::from_fn(size, size, |row, col| {
        let x = (col as f64 + 0.5) / size as f64 - 0.5;
        let y = (row as f64 + 0.5) / size as f64 - 0.5;
        let (u, v) = (cos * x - sin * y + 0.5 + shift.0, sin * x + cos * y + 0.5 + shift.1);
        let mut value = texture.sample(u, v);
        if s > 0.0 {
            value += s * (2.0 * perturb.sample(x + 0.5, y + 0.5) - 1.0);
        }
        (value.clamp(0.0, 1.0) * 255.0).round() as u8
    })
    .expect("positive image size")
}

/// All images in user-major order as `(user_id, index, image)`.
pub fn synthesize(spec: &SyntheticSpec) -> Result<Vec<(String, usize, Image)>> {
    spec.validate()?;
    let mut out = Vec::with_capacity(spec.n_users * spec.images_per_user);
    for user in 0..spec.n_users {
        let texture = UserTexture::new(spec.seed, user);
        for index in 0..spec.images_per_user {
            out.push((spec.user_id(user), index, render(spec, &texture, user, index)));
        }
    }
    Ok(out)
}

pub const MANIFEST_FILE: &str = "manifest.csv";

/// Writes `<user>/<user>_<index>.pgm` files and `manifest.csv` under
/// `dir`; returns the manifest with absolute image paths.
pub fn write_corpus(spec: &SyntheticSpec, dir: &Path, provenance: &str) -> Result<Manifest> {
    let images = synthesize(spec)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let comments = vec![provenance.to_string()];
    let mut entries = Vec::with_capacity(images.len());
    let mut relative = Vec::with_capacity(images.len());
    for (user, index, image) in images {
        let user_dir = dir.join(&user);
        std::fs::create_dir_all(&user_dir).map_err(|e| Error::io(&user_dir, e))?;
        let name = PathBuf::from(&user).join(format!("{user}_{index:03}.pgm"));
        save_pgm(dir.join(&name), &image, &comments)?;
        relative.push(ManifestEntry {
            user_id: user.clone(),
            image_path: name.clone(),
            mask_path: None,
            distance_m: None,
        });
        entries.push(ManifestEntry {
            user_id: user,
            image_path: dir.join(name),
            mask_path: None,
            distance_m: None,
        });
    }
    Manifest::new(relative)?.save(dir.join(MANIFEST_FILE))?;
    Manifest::new(entries)
}

/// Mean absolute pixel difference of two equally sized images.
pub fn mean_abs_diff(a: &Image, b: &Image) -> f64 {
    let sum: u64 = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .map(|(&x, &y)| (x as i32 - y as i32).unsigned_abs() as u64)
        .sum();
    sum as f64 / a.pixels().len() as f64
}

/// Corpus-average pixel difference of same-user and different-user image
/// pairs, over all unordered pairs.
pub fn contrast(images: &[(String, usize, Image)]) -> (f64, f64) {
    let (mut intra, mut ni, mut inter, mut nx) = (0.0, 0usize, 0.0, 0usize);
    for i in 0..images.len() {
        for j in i + 1..images.len() {
            let d = mean_abs_diff(&images[i].2, &images[j].2);
            if images[i].0 == images[j].0 {
                intra += d;
                ni += 1;
            } else {
                inter += d;
                nx += 1;
            }
        }
    }
    (intra / ni.max(1) as f64, inter / nx.max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(strength: f64) -> SyntheticSpec {
        SyntheticSpec {
            n_users: 3,
            images_per_user: 5,
            image_size: 48,
            strength,
            seed: 11,
        }
    }

    #[test]
    fn zero_strength_repeats_user_image() {
        let images = synthesize(&small(0.0)).unwrap();
        for w in images.windows(2).filter(|w| w[0].0 == w[1].0) {
            assert_eq!(w[0].2, w[1].2);
        }
        assert_ne!(images[0].2, images[5].2);
    }

    #[test]
    fn intra_user_difference_is_smaller() {
        let (intra, inter) = contrast(&synthesize(&small(DEFAULT_STRENGTH)).unwrap());
        assert!(intra < inter, "{intra} vs {inter}");
    }

    #[test]
    fn deterministic_on_disk() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        write_corpus(&small(0.2), a.path(), "p").unwrap();
        write_corpus(&small(0.2), b.path(), "p").unwrap();
        for rel in ["manifest.csv", "u000/u000_000.pgm", "u002/u002_004.pgm"] {
            assert_eq!(std::fs::read(a.path().join(rel)).unwrap(), std::fs::read(b.path().join(rel)).unwrap());
        }
        let m = Manifest::load(a.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(m.len(), 15);
        assert!(m.entries[0].image_path.is_absolute());
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(synthesize(&SyntheticSpec { n_users: 1, ..small(0.1) }).is_err());
        assert!(synthesize(&SyntheticSpec { images_per_user: 4, ..small(0.1) }).is_err());
        assert!(synthesize(&SyntheticSpec { strength: 2.0, ..small(0.1) }).is_err());
    }
}
