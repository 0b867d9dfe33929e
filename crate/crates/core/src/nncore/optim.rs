use serde::{Deserialize, Serialize};

use super::{Gradients, NnError, Params, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Decoupled weight decay; zero gives plain Adam.
    pub weight_decay: f64,
}

impl AdamConfig {
    pub fn adam(lr: f64) -> Self {
        AdamConfig {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }

    pub fn adamw(lr: f64, weight_decay: f64) -> Self {
        AdamConfig {
            weight_decay,
            ..Self::adam(lr)
        }
    }
}

/// Moment estimates for every parameter in a [`Params`] store.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub config: AdamConfig,
    pub step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl OptimizerState {
    pub fn new(config: AdamConfig, params: &Params) -> Self {
        let zeros: Vec<Tensor> = params
            .ids()
            .map(|id| {
                let (r, c) = params.get(id).shape();
                Tensor::zeros(r, c)
            })
            .collect();
        OptimizerState {
            config,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// One bias-corrected Adam step; with non-zero `weight_decay` the decay
    /// is applied to the parameter directly (AdamW). Parameters without a
    /// gradient are left alone.
    pub fn step(&mut self, params: &mut Params, grads: &Gradients) -> Result<(), NnError> {
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
            weight_decay,
        } = self.config;
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        for (id, g) in grads.iter() {
            let theta = params.get_mut(id);
            theta.check_same(g, "adam_step")?;
            let m = &mut self.m[id.0];
            let v = &mut self.v[id.0];
            let decay = 1.0 - lr * weight_decay;
            for (((p, &gi), mi), vi) in theta
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *mi = beta1 * *mi + (1.0 - beta1) * gi;
                *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                if weight_decay != 0.0 {
                    *p *= decay;
                }
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::{Ops, ParamId, Tape};

    fn grads_for(params: &Params, id: ParamId, g: f64) -> Gradients {
        // d(Σ g·x)/dx = g
        let mut tape = Tape::new();
        let x = tape.param(params, id);
        let y = tape.scale(&x, g);
        let ones = tape.constant(Tensor::filled(params.get(id).cols(), 1, 1.0));
        let s = tape.matmul(&y, &ones).unwrap();
        tape.backward(s).unwrap()
    }

    #[test]
    fn unit_gradient_moves_by_learning_rate() {
        let mut p = Params::new();
        let id = p.add("x", Tensor::scalar(1.0)).unwrap();
        let mut opt = OptimizerState::new(AdamConfig::adam(0.1), &p);
        let g = grads_for(&p, id, 1.0);
        opt.step(&mut p, &g).unwrap();
        let moved = 1.0 - p.get(id).item();
        assert!((moved - 0.1).abs() < 1e-6, "{moved}");
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = Params::new();
        let id = p.add("x", Tensor::scalar(0.7)).unwrap();
        let mut opt = OptimizerState::new(AdamConfig::adam(0.1), &p);
        let g = grads_for(&p, id, 0.0);
        opt.step(&mut p, &g).unwrap();
        assert_eq!(p.get(id).item(), 0.7);
    }

    #[test]
    fn adamw_without_decay_is_adam() {
        let mut pa = Params::new();
        let id = pa.add("x", Tensor::row(&[0.3, -1.2, 4.0])).unwrap();
        let mut pw = pa.clone();
        let mut a = OptimizerState::new(AdamConfig::adam(0.01), &pa);
        let mut w = OptimizerState::new(AdamConfig::adamw(0.01, 0.0), &pw);
        for k in 0..20 {
            let g = grads_for(&pa, id, 0.5 + k as f64);
            a.step(&mut pa, &g).unwrap();
            w.step(&mut pw, &g).unwrap();
        }
        let bits = |p: &Params| p.get(id).data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&pa), bits(&pw));
    }

    #[test]
    fn decay_shrinks_weights() {
        let mut p = Params::new();
        let id = p.add("x", Tensor::scalar(2.0)).unwrap();
        let mut opt = OptimizerState::new(AdamConfig::adamw(0.1, 0.5), &p);
        let g = grads_for(&p, id, 0.0);
        opt.step(&mut p, &g).unwrap();
        assert!((p.get(id).item() - 2.0 * 0.95).abs() < 1e-12);
    }
}
