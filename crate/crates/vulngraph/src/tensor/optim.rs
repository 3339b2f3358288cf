use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{Matrix, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction. Parameters without a gradient are left untouched.
#[derive(Debug, Clone)]
pub struct Adam {
    cfg: AdamConfig,
    step: i32,
    moments: HashMap<String, (Matrix, Matrix)>,
}

impl Adam {
    pub fn new(cfg: AdamConfig) -> Self {
        Self {
            cfg,
            step: 0,
            moments: HashMap::new(),
        }
    }

    pub fn step(&mut self, store: &mut ParamStore, grads: &HashMap<String, Matrix>) {
        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.cfg;
        let c1 = 1.0 - beta1.powi(self.step);
        let c2 = 1.0 - beta2.powi(self.step);
        // sorted so float updates happen in a fixed order
        let mut names: Vec<&String> = grads.keys().collect();
        names.sort();
        for name in names {
            let g = &grads[name];
            let Some(p) = store.get_mut(name) else {
                continue;
            };
            let (m, v) = self
                .moments
                .entry(name.clone())
                .or_insert_with(|| (Matrix::zeros(g.raw_dim()), Matrix::zeros(g.raw_dim())));
            ndarray::Zip::from(p)
                .and(m)
                .and(v)
                .and(g)
                .for_each(|p, m, v, &g| {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    let mhat = *m / c1;
                    let vhat = *v / c2;
                    *p -= lr * mhat / (vhat.sqrt() + eps);
                });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn first_step_moves_by_lr_against_gradient_sign() {
        let mut store = ParamStore::new();
        store.insert("w", array![[1.0, -1.0]]);
        let mut adam = Adam::new(AdamConfig::default());
        let grads = HashMap::from([("w".to_string(), array![[0.5, -2.0]])]);
        adam.step(&mut store, &grads);
        let w = store.get("w").unwrap();
        assert!((w[[0, 0]] - (1.0 - 1e-3)).abs() < 1e-8);
        assert!((w[[0, 1]] - (-1.0 + 1e-3)).abs() < 1e-8);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut store = ParamStore::new();
        store.insert("x", array![[3.0]]);
        let mut adam = Adam::new(AdamConfig {
            lr: 0.1,
            ..Default::default()
        });
        for _ in 0..500 {
            let x = store.get("x").unwrap()[[0, 0]];
            let grads = HashMap::from([("x".to_string(), array![[2.0 * (x - 1.0)]])]);
            adam.step(&mut store, &grads);
        }
        assert!((store.get("x").unwrap()[[0, 0]] - 1.0).abs() < 1e-3);
    }
}
