use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::graph_extract::FEATURE_COUNT;

/// Layer widths of the siamese network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub features: usize,
    /// Widths of the two graph-convolution layers.
    pub gcn: [usize; 2],
    /// Width of the dense embedding layer closing each branch.
    pub embedding: usize,
    /// Hidden widths of the similarity head; a single sigmoid unit follows.
    pub head: [usize; 3],
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture {
            features: FEATURE_COUNT,
            gcn: [500, 200],
            embedding: 200,
            head: [400, 200, 100],
        }
    }
}

impl Architecture {
    /// `(fan_in, fan_out)` of every layer in [`LAYER_NAMES`] order.
    pub fn layer_shapes(&self) -> [(usize, usize); 7] {
        [
            (self.features, self.gcn[0]),
            (self.gcn[0], self.gcn[1]),
            (self.gcn[1], self.embedding),
            (self.embedding, self.head[0]),
            (self.head[0], self.head[1]),
            (self.head[1], self.head[2]),
            (self.head[2], 1),
        ]
    }

    pub fn parameter_count(&self) -> usize {
        self.layer_shapes().iter().map(|(i, o)| i * o + o).sum()
    }
}

pub const LAYER_NAMES: [&str; 7] = ["gcn1", "gcn2", "embed", "head1", "head2", "head3", "output"];

/// Weight matrix (`fan_in x fan_out`) and bias of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Dense {
            weight: Array2::zeros((fan_in, fan_out)),
            bias: Array1::zeros(fan_out),
        }
    }

    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero bias.
    pub fn glorot<R: Rng>(fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let limit = glorot_limit(fan_in, fan_out);
        let weight = Array2::from_shape_simple_fn((fan_in, fan_out), || rng.gen_range(-limit..limit));
        Dense {
            weight,
            bias: Array1::zeros(fan_out),
        }
    }

    pub fn add_assign(&mut self, other: &Dense) {
        self.weight += &other.weight;
        self.bias += &other.bias;
    }
}

pub fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// All trainable tensors. Both branches read the same `gcn1`, `gcn2` and
/// `embed` layers.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub arch: Architecture,
    pub gcn1: Dense,
    pub gcn2: Dense,
    pub embed: Dense,
    pub head1: Dense,
    pub head2: Dense,
    pub head3: Dense,
    pub output: Dense,
}

impl ModelParams {
    fn build(arch: Architecture, mut make: impl FnMut(usize, usize) -> Dense) -> Self {
        let [l1, l2, l3, l4, l5, l6, l7] = arch.layer_shapes();
        ModelParams {
            arch,
            gcn1: make(l1.0, l1.1),
            gcn2: make(l2.0, l2.1),
            embed: make(l3.0, l3.1),
            head1: make(l4.0, l4.1),
            head2: make(l5.0, l5.1),
            head3: make(l6.0, l6.1),
            output: make(l7.0, l7.1),
        }
    }

    pub fn init<R: Rng>(arch: Architecture, rng: &mut R) -> Self {
        ModelParams::build(arch, |i, o| Dense::glorot(i, o, rng))
    }

    pub fn zeros(arch: Architecture) -> Self {
        ModelParams::build(arch, Dense::zeros)
    }

    pub fn layers(&self) -> [&Dense; 7] {
        [
            &self.gcn1,
            &self.gcn2,
            &self.embed,
            &self.head1,
            &self.head2,
            &self.head3,
            &self.output,
        ]
    }

    pub fn layers_mut(&mut self) -> [&mut Dense; 7] {
        [
            &mut self.gcn1,
            &mut self.gcn2,
            &mut self.embed,
            &mut self.head1,
            &mut self.head2,
            &mut self.head3,
            &mut self.output,
        ]
    }

    /// Flat views of every tensor, weights before biases, in layer order.
    pub fn tensors(&self) -> Vec<(String, &[f64])> {
        self.layers()
            .into_iter()
            .zip(LAYER_NAMES)
            .flat_map(|(layer, name)| {
                [
                    (format!("{name}.weight"), layer.weight.as_slice().expect("standard layout")),
                    (format!("{name}.bias"), layer.bias.as_slice().expect("standard layout")),
                ]
            })
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        self.layers_mut()
            .into_iter()
            .zip(LAYER_NAMES)
            .flat_map(|(layer, name)| {
                let Dense { weight, bias } = layer;
                [
                    (format!("{name}.weight"), weight.as_slice_mut().expect("standard layout")),
                    (format!("{name}.bias"), bias.as_slice_mut().expect("standard layout")),
                ]
            })
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }

    pub fn add_assign(&mut self, other: &ModelParams) {
        for (mine, theirs) in self.layers_mut().into_iter().zip(other.layers()) {
            mine.add_assign(theirs);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for layer in self.layers_mut() {
            layer.weight *= factor;
            layer.bias *= factor;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_for;

    #[test]
    fn default_shapes() {
        let p = ModelParams::init(Architecture::default(), &mut rng_for(1, "init", 0));
        assert_eq!(p.gcn1.weight.dim(), (7, 500));
        assert_eq!(p.gcn2.weight.dim(), (500, 200));
        assert_eq!(p.embed.weight.dim(), (200, 200));
        assert_eq!(p.head1.weight.dim(), (200, 400));
        assert_eq!(p.head2.weight.dim(), (400, 200));
        assert_eq!(p.head3.weight.dim(), (200, 100));
        assert_eq!(p.output.weight.dim(), (100, 1));
        assert_eq!(
            p.tensors().iter().map(|(_, t)| t.len()).sum::<usize>(),
            Architecture::default().parameter_count()
        );
    }

    #[test]
    fn glorot_ranges_and_zero_bias() {
        let p = ModelParams::init(Architecture::default(), &mut rng_for(2, "init", 0));
        for (layer, (fan_in, fan_out)) in p.layers().into_iter().zip(p.arch.layer_shapes()) {
            let limit = glorot_limit(fan_in, fan_out);
            assert!(layer.weight.iter().all(|w| w.abs() <= limit));
            assert!(layer.weight.iter().any(|w| w.abs() > limit * 0.9));
            assert!(layer.bias.iter().all(|&b| b == 0.0));
        }
        assert!(p.is_finite());
    }

    #[test]
    fn init_is_seeded() {
        let arch = Architecture::default();
        let a = ModelParams::init(arch, &mut rng_for(3, "init", 0));
        let b = ModelParams::init(arch, &mut rng_for(3, "init", 0));
        let c = ModelParams::init(arch, &mut rng_for(4, "init", 0));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
