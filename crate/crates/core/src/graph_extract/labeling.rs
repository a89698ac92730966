//! Two-pass 8-connected component labeling over a union-find forest.

use serde::{Deserialize, Serialize};

/// Inclusive pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BBox {
    pub min_row: usize,
    pub min_col: usize,
    pub max_row: usize,
    pub max_col: usize,
}

impl BBox {
    pub fn point(row: usize, col: usize) -> Self {
        BBox {
            min_row: row,
            min_col: col,
            max_row: row,
            max_col: col,
        }
    }

    pub fn height(&self) -> usize {
        self.max_row - self.min_row + 1
    }

    pub fn width(&self) -> usize {
        self.max_col - self.min_col + 1
    }

    pub fn area(&self) -> usize {
        self.height() * self.width()
    }

    /// Center in continuous coordinates `((min+max)/2)` as `(row, col)`.
    pub fn center(&self) -> (f64, f64) {
        (
            (self.min_row + self.max_row) as f64 / 2.0,
            (self.min_col + self.max_col) as f64 / 2.0,
        )
    }

    /// Inclusive rectangle intersection; touching edges or corners count.
    pub fn intersects(&self, other: &BBox) -> bool {
        self.min_row <= other.max_row
            && other.min_row <= self.max_row
            && self.min_col <= other.max_col
            && other.min_col <= self.max_col
    }

    pub fn center_distance(&self, other: &BBox) -> f64 {
        let (r0, c0) = self.center();
        let (r1, c1) = other.center();
        (r0 - r1).hypot(c0 - c1)
    }

    fn include(&mut self, row: usize, col: usize) {
        self.min_row = self.min_row.min(row);
        self.min_col = self.min_col.min(col);
        self.max_row = self.max_row.max(row);
        self.max_col = self.max_col.max(col);
    }
}

/// A maximal 8-connected set of foreground pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Component {
    pub bbox: BBox,
    pub pixel_count: usize,
    /// Raster index of the component's first pixel; final ordering tie-break.
    pub first_pixel: usize,
}

/// Row-major boolean raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

impl BinaryImage {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Self {
        assert_eq!(bits.len(), width * height, "binary image size");
        BinaryImage { width, height, bits }
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

struct DisjointSet {
    parent: Vec<u32>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new() -> Self {
        DisjointSet {
            parent: Vec::new(),
            rank: Vec::new(),
        }
    }

    fn make_set(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        self.rank.push(0);
        id
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grandparent = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grandparent;
            x = grandparent;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra as usize].cmp(&self.rank[rb as usize]) {
            std::cmp::Ordering::Less => self.parent[ra as usize] = rb,
            std::cmp::Ordering::Greater => self.parent[rb as usize] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb as usize] = ra;
                self.rank[ra as usize] += 1;
            }
        }
    }
}

const NO_LABEL: u32 = u32::MAX;

/// Labels 8-connected foreground regions and returns them ordered by
/// `(min_row, min_col, pixel_count)`, ties broken by first raster pixel.
pub fn connected_components(image: &BinaryImage) -> Vec<Component> {
    let (w, h) = (image.width, image.height);
    let mut labels = vec![NO_LABEL; w * h];
    let mut sets = DisjointSet::new();

    for row in 0..h {
        for col in 0..w {
            let idx = row * w + col;
            if !image.bits[idx] {
                continue;
            }
            // Already-visited neighbors: W, NW, N, NE.
            let mut current = NO_LABEL;
            let mut visit = |n: usize, sets: &mut DisjointSet| {
                let l = labels[n];
                if l == NO_LABEL {
                    return;
                }
                if current == NO_LABEL {
                    current = l;
                } else {
                    sets.union(current, l);
                }
            };
            if col > 0 {
                visit(idx - 1, &mut sets);
            }
            if row > 0 {
                let up = idx - w;
                if col > 0 {
                    visit(up - 1, &mut sets);
                }
                visit(up, &mut sets);
                if col + 1 < w {
                    visit(up + 1, &mut sets);
                }
            }
            labels[idx] = if current == NO_LABEL { sets.make_set() } else { current };
        }
    }

    // Second pass: resolve roots and accumulate statistics per root.
    let mut slot_of_root = vec![NO_LABEL; sets.parent.len()];
    let mut components: Vec<Component> = Vec::new();
    for row in 0..h {
        for col in 0..w {
            let idx = row * w + col;
            let l = labels[idx];
            if l == NO_LABEL {
                continue;
            }
            let root = sets.find(l) as usize;
            if slot_of_root[root] == NO_LABEL {
                slot_of_root[root] = components.len() as u32;
                components.push(Component {
                    bbox: BBox::point(row, col),
                    pixel_count: 0,
                    first_pixel: idx,
                });
            }
            let comp = &mut components[slot_of_root[root] as usize];
            comp.bbox.include(row, col);
            comp.pixel_count += 1;
        }
    }

    components.sort_by_key(|c| (c.bbox.min_row, c.bbox.min_col, c.pixel_count, c.first_pixel));
    components
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from_rows(rows: &[&str]) -> BinaryImage {
        let h = rows.len();
        let w = rows[0].len();
        let bits = rows.iter().flat_map(|r| r.bytes().map(|b| b == b'#')).collect();
        BinaryImage::new(w, h, bits)
    }

    #[test]
    fn empty_image_has_no_components() {
        let image = BinaryImage::new(4, 3, vec![false; 12]);
        assert!(connected_components(&image).is_empty());
    }

    #[test]
    fn diagonal_pixels_join() {
        let image = from_rows(&["#.", ".#"]);
        let comps = connected_components(&image);
        assert_eq!(comps.len(), 1);
        assert_eq!(comps[0].pixel_count, 2);
        assert_eq!(
            comps[0].bbox,
            BBox {
                min_row: 0,
                min_col: 0,
                max_row: 1,
                max_col: 1
            }
        );
    }

    #[test]
    fn u_shape_merges_late() {
        // The two arms get separate provisional labels and merge on the last row.
        let image = from_rows(&["#..#", "#..#", "####", "....", ".##."]);
        let comps = connected_components(&image);
        assert_eq!(comps.len(), 2);
        assert_eq!(comps[0].pixel_count, 8);
        assert_eq!(comps[1].pixel_count, 2);
        assert_eq!(comps[1].bbox.min_row, 4);
    }

    #[test]
    fn anti_diagonal_via_north_east() {
        let image = from_rows(&[".#", "#."]);
        assert_eq!(connected_components(&image).len(), 1);
    }

    #[test]
    fn bbox_geometry() {
        let a = BBox {
            min_row: 0,
            min_col: 0,
            max_row: 2,
            max_col: 2,
        };
        let b = BBox {
            min_row: 2,
            min_col: 2,
            max_row: 4,
            max_col: 4,
        };
        assert!(a.intersects(&b));
        assert!((a.center_distance(&b) - 8f64.sqrt()).abs() < 1e-12);
        assert_eq!(a.area(), 9);
    }
}
