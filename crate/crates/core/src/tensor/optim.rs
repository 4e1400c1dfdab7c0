use serde::{Deserialize, Serialize};

use super::ParamStore;
use crate::error::{LagrError, Result};

/// Linear warmup to `peak` over `warmup` steps, then linear decay to zero at
/// `total` steps. `warmup == 0` means pure linear decay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub peak: f64,
    pub warmup: usize,
    pub total: usize,
}

impl LrSchedule {
    pub fn lr(&self, step: usize) -> f64 {
        if step >= self.total {
            return 0.0;
        }
        if step < self.warmup {
            return self.peak * step as f64 / self.warmup as f64;
        }
        let span = (self.total - self.warmup) as f64;
        self.peak * (self.total - step) as f64 / span
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.98,
            eps: 1e-9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    pub schedule: LrSchedule,
    step: usize,
    m: Vec<Vec<f32>>,
    v: Vec<Vec<f32>>,
}

impl AdamState {
    pub fn new(params: &ParamStore, config: AdamConfig, schedule: LrSchedule) -> Self {
        let zeros = || {
            params
                .iter()
                .map(|(_, p)| vec![0.0f32; p.tensor.numel()])
                .collect::<Vec<_>>()
        };
        AdamState {
            config,
            schedule,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    /// Apply one Adam update from the accumulated `grad` buffers, using the
    /// scheduled learning rate for the new step count. Returns that rate.
    ///
    /// A non-finite gradient anywhere rejects the whole step and leaves the
    /// parameters and moments untouched.
    pub fn step(&mut self, params: &mut ParamStore) -> Result<f64> {
        if self.m.len() != params.len() {
            return Err(LagrError::invalid("optimizer state does not match parameters"));
        }
        for (_, p) in params.iter() {
            if let Some(g) = &p.tensor.grad {
                if g.iter().any(|x| !x.is_finite()) {
                    return Err(LagrError::NonFiniteGradient(p.name.clone()));
                }
            }
        }
        self.step += 1;
        let lr = self.schedule.lr(self.step);
        let AdamConfig { beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        let step_size = (lr / bc1) as f32;
        let (b1, b2) = (beta1 as f32, beta2 as f32);
        for ((p, m), v) in params.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            let Some(g) = &p.tensor.grad else { continue };
            let g = g.clone();
            for (((w, &gi), mi), vi) in p
                .tensor
                .data_mut()
                .iter_mut()
                .zip(&g)
                .zip(m.iter_mut())
                .zip(v.iter_mut())
            {
                *mi = b1 * *mi + (1.0 - b1) * gi;
                *vi = b2 * *vi + (1.0 - b2) * gi * gi;
                let denom = ((*vi as f64 / bc2).sqrt() + eps) as f32;
                *w -= step_size * *mi / denom;
            }
        }
        Ok(lr)
    }
}

/// Rescale all accumulated gradients so their global L2 norm is at most
/// `max_norm`. Returns the norm before clipping.
pub fn grad_clip(params: &mut ParamStore, max_norm: f64) -> f64 {
    let norm = params
        .iter()
        .filter_map(|(_, p)| p.tensor.grad.as_ref())
        .flat_map(|g| g.iter())
        .map(|&x| (x as f64) * (x as f64))
        .sum::<f64>()
        .sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = (max_norm / norm) as f32;
        for p in params.iter_mut() {
            if let Some(g) = p.tensor.grad.as_mut() {
                g.iter_mut().for_each(|x| *x *= s);
            }
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    #[test]
    fn warmup_and_decay() {
        let s = LrSchedule {
            peak: 4e-4,
            warmup: 1000,
            total: 10_000,
        };
        assert!((s.lr(500) - 2e-4).abs() < 1e-12);
        assert!((s.lr(1000) - 4e-4).abs() < 1e-12);
        assert_eq!(s.lr(10_000), 0.0);
        let flat = LrSchedule {
            peak: 1e-4,
            warmup: 0,
            total: 100,
        };
        assert!((flat.lr(0) - 1e-4).abs() < 1e-12);
        assert!((flat.lr(50) - 5e-5).abs() < 1e-12);
    }

    fn one_param(x: f32) -> ParamStore {
        let mut store = ParamStore::new();
        store
            .register("x", Tensor::new(vec![1], vec![x]).unwrap())
            .unwrap();
        store
    }

    #[test]
    fn quadratic_converges_to_minimizer() {
        // loss = (x - 3)^2, minimizer 3
        let mut store = one_param(-2.0);
        let sched = LrSchedule {
            peak: 0.1,
            warmup: 0,
            total: 200,
        };
        let mut adam = AdamState::new(&store, AdamConfig::default(), sched);
        for _ in 0..200 {
            let x = store.params_first();
            store.iter_mut().next().unwrap().tensor.grad = Some(vec![2.0 * (x - 3.0)]);
            adam.step(&mut store).unwrap();
        }
        assert!((store.params_first() - 3.0).abs() < 1e-2, "{}", store.params_first());
    }

    #[test]
    fn zero_lr_leaves_params_bit_identical() {
        let mut store = one_param(1.2345);
        let before = store.params_first().to_bits();
        let sched = LrSchedule {
            peak: 0.0,
            warmup: 0,
            total: 10,
        };
        let mut adam = AdamState::new(&store, AdamConfig::default(), sched);
        store.iter_mut().next().unwrap().tensor.grad = Some(vec![0.7]);
        adam.step(&mut store).unwrap();
        assert_eq!(store.params_first().to_bits(), before);
    }

    #[test]
    fn nan_gradient_rejected() {
        let mut store = one_param(1.0);
        let sched = LrSchedule {
            peak: 0.1,
            warmup: 0,
            total: 10,
        };
        let mut adam = AdamState::new(&store, AdamConfig::default(), sched);
        store.iter_mut().next().unwrap().tensor.grad = Some(vec![f32::NAN]);
        assert!(matches!(
            adam.step(&mut store),
            Err(LagrError::NonFiniteGradient(_))
        ));
        assert_eq!(store.params_first(), 1.0);
        assert_eq!(adam.steps_taken(), 0);
    }

    #[test]
    fn clipping_rules() {
        let mut store = ParamStore::new();
        store.register("a", Tensor::zeros(vec![2])).unwrap();
        // norm 2
        store.iter_mut().next().unwrap().tensor.grad = Some(vec![1.2, 1.6]);
        let pre = grad_clip(&mut store, 1.0);
        assert!((pre - 2.0).abs() < 1e-6);
        let g = store.iter().next().unwrap().1.tensor.grad.clone().unwrap();
        assert!((g[0] - 0.6).abs() < 1e-6 && (g[1] - 0.8).abs() < 1e-6);

        // norm 0.5 stays
        store.iter_mut().next().unwrap().tensor.grad = Some(vec![0.3, 0.4]);
        grad_clip(&mut store, 1.0);
        let g = store.iter().next().unwrap().1.tensor.grad.clone().unwrap();
        assert_eq!(g, vec![0.3, 0.4]);
    }

    impl ParamStore {
        fn params_first(&self) -> f32 {
            self.iter().next().unwrap().1.tensor.data()[0]
        }
    }
}
