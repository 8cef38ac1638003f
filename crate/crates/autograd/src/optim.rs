use std::collections::BTreeMap;

use crate::{ParamId, ParamStore, Tensor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 2e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

/// Adam with bias correction, restricted to a fixed group of parameters.
pub struct Adam {
    config: AdamConfig,
    group: Vec<ParamId>,
    step: u64,
    state: BTreeMap<ParamId, Moments>,
}

impl Adam {
    pub fn new(config: AdamConfig, group: impl IntoIterator<Item = ParamId>) -> Self {
        let mut group: Vec<_> = group.into_iter().collect();
        group.sort();
        group.dedup();
        Self {
            config,
            group,
            step: 0,
            state: BTreeMap::new(),
        }
    }

    pub fn group(&self) -> &[ParamId] {
        &self.group
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update. Gradients for parameters outside the group are
    /// ignored; group members without a gradient are treated as zero-gradient.
    pub fn step(&mut self, store: &mut ParamStore, grads: &[(ParamId, Tensor)]) {
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        let lookup: BTreeMap<ParamId, &Tensor> = grads.iter().map(|(id, g)| (*id, g)).collect();
        for &id in &self.group {
            let param = store.get_mut(id);
            let n = param.len();
            let moments = self.state.entry(id).or_insert_with(|| Moments {
                m: vec![0.0; n],
                v: vec![0.0; n],
            });
            let grad = lookup.get(&id).map(|g| g.data());
            for (i, p) in param.data_mut().iter_mut().enumerate() {
                let g = grad.map_or(0.0, |g| g[i]);
                let m = &mut moments.m[i];
                let v = &mut moments.v[i];
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                *p -= learning_rate * (*m / bc1) / ((*v / bc2).sqrt() + epsilon);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut store = ParamStore::new();
        let id = store.insert("w", Tensor::full(vec![2], 1.0));
        let mut adam = Adam::new(AdamConfig::default(), [id]);
        let g = Tensor::new(vec![2], vec![3.0, -0.5]).unwrap();
        adam.step(&mut store, &[(id, g)]);
        let w = store.get(id).data();
        assert!((w[0] - (1.0 - 2e-4)).abs() < 1e-9);
        assert!((w[1] - (1.0 + 2e-4)).abs() < 1e-9);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut store = ParamStore::new();
        let id = store.insert("w", Tensor::full(vec![3], 0.7));
        let mut adam = Adam::new(AdamConfig::default(), [id]);
        for _ in 0..5 {
            adam.step(&mut store, &[(id, Tensor::zeros(vec![3]))]);
        }
        assert_eq!(store.get(id).data(), &[0.7; 3]);
    }

    #[test]
    fn minimises_a_quadratic() {
        let mut store = ParamStore::new();
        let id = store.insert("x", Tensor::scalar(3.0));
        let config = AdamConfig {
            learning_rate: 0.1,
            ..AdamConfig::default()
        };
        let mut adam = Adam::new(config, [id]);
        for _ in 0..500 {
            let x = store.get(id).item();
            adam.step(&mut store, &[(id, Tensor::scalar(2.0 * (x - 1.0)))]);
        }
        assert!((store.get(id).item() - 1.0).abs() < 1e-2);
    }
}
