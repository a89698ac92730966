use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::manifest::{Manifest, ManifestEntry};
use crate::error::{Error, Result};
use crate::seed::rng_for;

/// Minimum number of images per user for a three-way split.
pub const MIN_IMAGES_PER_USER: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.6,
            val: 0.2,
            test: 0.2,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let all = [self.train, self.val, self.test];
        if all.iter().any(|r| !(0.0..=1.0).contains(r)) || ((all.iter().sum::<f64>()) - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split ratios {}/{}/{} must be in [0,1] and sum to 1",
                self.train, self.val, self.test
            )));
        }
        Ok(())
    }

    /// Train takes the ceiling of its share, validation the ceiling of its
    /// share of what is left, test the remainder.
    pub fn counts(&self, n: usize) -> (usize, usize, usize) {
        let ceil = |x: f64| (x - 1e-9).ceil().max(0.0) as usize;
        let train = ceil(self.train * n as f64).min(n);
        let val = ceil(self.val * n as f64).min(n - train);
        (train, val, n - train - val)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split<T> {
    pub train: Vec<T>,
    pub val: Vec<T>,
    pub test: Vec<T>,
}

impl<T> Split<T> {
    pub fn parts(&self) -> [(&'static str, &[T]); 3] {
        [("train", &self.train), ("val", &self.val), ("test", &self.test)]
    }
}

/// Per-user stratified split. Each user's items are shuffled by a stream
/// derived from `seed` and the user id, so a user's assignment does not
/// depend on which other users are present. Output keeps input order
/// within each part.
pub fn split_by_user<T: Clone>(
    items: &[T],
    user_of: impl Fn(&T) -> &str,
    ratios: SplitRatios,
    seed: u64,
) -> Result<Split<T>> {
    ratios.validate()?;
    let mut by_user: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, item) in items.iter().enumerate() {
        by_user.entry(user_of(item)).or_default().push(i);
    }
    let short: Vec<String> = by_user
        .iter()
        .filter(|(_, idx)| idx.len() < MIN_IMAGES_PER_USER)
        .map(|(u, _)| u.to_string())
        .collect();
    if !short.is_empty() {
        return Err(Error::TooFewImages {
            min: MIN_IMAGES_PER_USER,
            users: short,
        });
    }

    let mut part_of = vec![0u8; items.len()];
    for (user, indices) in &by_user {
        let mut shuffled = indices.clone();
        shuffled.shuffle(&mut rng_for(seed, &format!("split/{user}"), 0));
        let (train, val, _) = ratios.counts(shuffled.len());
        for (rank, &i) in shuffled.iter().enumerate() {
            part_of[i] = if rank < train {
                0
            } else if rank < train + val {
                1
            } else {
                2
            };
        }
    }
    let mut split = Split {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for (item, part) in items.iter().zip(part_of) {
        match part {
            0 => split.train.push(item.clone()),
            1 => split.val.push(item.clone()),
            _ => split.test.push(item.clone()),
        }
    }
    Ok(split)
}

pub fn split_corpus(manifest: &Manifest, ratios: SplitRatios, seed: u64) -> Result<Split<ManifestEntry>> {
    split_by_user(&manifest.entries, |e| e.user_id.as_str(), ratios, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest(sizes: &[(&str, usize)]) -> Manifest {
        let entries = sizes
            .iter()
            .flat_map(|&(u, n)| {
                (0..n).map(move |i| ManifestEntry {
                    user_id: u.to_string(),
                    image_path: format!("{u}_{i}.pgm").into(),
                    mask_path: None,
                    distance_m: None,
                })
            })
            .collect();
        Manifest::new(entries).unwrap()
    }

    #[test]
    fn rounding_rule() {
        let r = SplitRatios::default();
        assert_eq!(r.counts(20), (12, 4, 4));
        assert_eq!(r.counts(23), (14, 5, 4));
        assert_eq!(r.counts(5), (3, 1, 1));
        assert_eq!(r.counts(15), (9, 3, 3));
    }

    #[test]
    fn split_counts_per_user() {
        let m = manifest(&[("a", 20), ("b", 23)]);
        let s = split_corpus(&m, SplitRatios::default(), 3).unwrap();
        let count = |part: &[ManifestEntry], u: &str| part.iter().filter(|e| e.user_id == u).count();
        assert_eq!((count(&s.train, "a"), count(&s.val, "a"), count(&s.test, "a")), (12, 4, 4));
        assert_eq!((count(&s.train, "b"), count(&s.val, "b"), count(&s.test, "b")), (14, 5, 4));
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let m = manifest(&[("a", 10), ("b", 10)]);
        let s1 = split_corpus(&m, SplitRatios::default(), 11).unwrap();
        let s2 = split_corpus(&m, SplitRatios::default(), 11).unwrap();
        assert_eq!(s1, s2);
        let s3 = split_corpus(&m, SplitRatios::default(), 12).unwrap();
        assert_ne!(s1, s3);
    }

    #[test]
    fn user_assignment_independent_of_other_users() {
        let small = split_corpus(&manifest(&[("a", 10)]), SplitRatios::default(), 5).unwrap();
        let large = split_corpus(&manifest(&[("a", 10), ("b", 7)]), SplitRatios::default(), 5).unwrap();
        let only_a = |v: &[ManifestEntry]| v.iter().filter(|e| e.user_id == "a").cloned().collect::<Vec<_>>();
        assert_eq!(small.train, only_a(&large.train));
        assert_eq!(small.test, only_a(&large.test));
    }

    #[test]
    fn too_few_images_lists_users() {
        let m = manifest(&[("a", 10), ("b", 4), ("c", 2)]);
        match split_corpus(&m, SplitRatios::default(), 0) {
            Err(Error::TooFewImages { users, .. }) => assert_eq!(users, vec!["b", "c"]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_ratios_rejected() {
        let m = manifest(&[("a", 10)]);
        let r = SplitRatios {
            train: 0.5,
            val: 0.2,
            test: 0.2,
        };
        assert!(matches!(split_corpus(&m, r, 0), Err(Error::Config(_))));
    }
}
