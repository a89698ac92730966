use super::params::ModelParams;

/// Adaptive-moment optimizer state.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: i32,
    m: ModelParams,
    v: ModelParams,
}

impl Adam {
    pub fn new(params: &ModelParams, learning_rate: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Adam {
            learning_rate,
            beta1,
            beta2,
            epsilon,
            step: 0,
            m: ModelParams::zeros(params.arch),
            v: ModelParams::zeros(params.arch),
        }
    }

    pub fn steps(&self) -> i32 {
        self.step
    }

    pub fn update(&mut self, params: &mut ModelParams, grads: &ModelParams) {
        self.step += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.step);
        let c2 = 1.0 - b2.powi(self.step);
        let lr = self.learning_rate;
        let eps = self.epsilon;
        let grads = grads.tensors();
        let ms = self.m.tensors_mut();
        let vs = self.v.tensors_mut();
        for ((((_, p), (_, g)), (_, m)), (_, v)) in params.tensors_mut().into_iter().zip(grads).zip(ms).zip(vs) {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gsnn::params::Architecture;
    use approx::assert_abs_diff_eq;

    fn tiny() -> Architecture {
        Architecture {
            features: 7,
            gcn: [3, 2],
            embedding: 2,
            head: [2, 2, 2],
        }
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = ModelParams::zeros(tiny());
        let mut g = ModelParams::zeros(tiny());
        g.gcn1.weight[[0, 0]] = 5.0;
        g.output.bias[0] = -0.01;
        let mut adam = Adam::new(&p, 1e-3, 0.9, 0.999, 1e-8);
        adam.update(&mut p, &g);
        assert_abs_diff_eq!(p.gcn1.weight[[0, 0]], -1e-3, epsilon = 1e-9);
        assert_abs_diff_eq!(p.output.bias[0], 1e-3, epsilon = 1e-8);
        assert_eq!(p.gcn2.weight[[0, 0]], 0.0);
        assert_eq!(adam.steps(), 1);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut p = ModelParams::zeros(tiny());
        p.embed.bias[0] = 3.0;
        let mut adam = Adam::new(&p, 0.05, 0.9, 0.999, 1e-8);
        for _ in 0..500 {
            let mut g = ModelParams::zeros(tiny());
            g.embed.bias[0] = 2.0 * p.embed.bias[0];
            adam.update(&mut p, &g);
        }
        assert!(p.embed.bias[0].abs() < 0.05);
    }
}
