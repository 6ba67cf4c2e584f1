use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates, one buffer per parameter tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(params: &[Tensor]) -> Self {
        AdamState {
            step: 0,
            m: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            v: params.iter().map(|p| vec![0.0; p.len()]).collect(),
        }
    }
}

/// One bias-corrected Adam update with learning rate `lr`.
pub fn adam_step(
    params: &mut [Tensor],
    grads: &[Tensor],
    state: &mut AdamState,
    cfg: &AdamConfig,
    lr: f64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} parameters, {} gradients, {} moment buffers",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() || state.m[i].len() != p.len() {
            return Err(Error::ShapeMismatch(format!(
                "parameter {i}: {:?} vs gradient {:?}",
                p.shape(),
                g.shape()
            )));
        }
    }
    state.step += 1;
    let bc1 = 1.0 - cfg.beta1.powi(state.step as i32);
    let bc2 = 1.0 - cfg.beta2.powi(state.step as i32);
    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        for (j, (w, &gj)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
            m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * gj;
            v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * gj * gj;
            let mhat = m[j] / bc1;
            let vhat = v[j] / bc2;
            *w -= lr * mhat / (vhat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let cfg = AdamConfig::default();
        let mut p = vec![Tensor::row(vec![1.0, -2.0, 0.5])];
        let g = vec![Tensor::row(vec![3.0, -0.25, 1e-3])];
        let mut st = AdamState::new(&p);
        adam_step(&mut p, &g, &mut st, &cfg, cfg.lr).unwrap();
        let moved: Vec<f64> = p[0].data().iter().zip([1.0, -2.0, 0.5]).map(|(a, b)| a - b).collect();
        assert!((moved[0] + 1e-3).abs() < 1e-8);
        assert!((moved[1] - 1e-3).abs() < 1e-8);
        assert!((moved[2] + 1e-3).abs() < 1e-7);
    }

    #[test]
    fn zero_gradient_from_cold_state_is_fixed() {
        let cfg = AdamConfig::default();
        let mut p = vec![Tensor::row(vec![0.3, 0.7])];
        let zero = vec![Tensor::row(vec![0.0, 0.0])];
        let mut st = AdamState::new(&p);
        for _ in 0..5 {
            adam_step(&mut p, &zero, &mut st, &cfg, cfg.lr).unwrap();
        }
        assert_eq!(p[0].data(), &[0.3, 0.7]);
    }

    #[test]
    fn rejects_shape_mismatch() {
        let cfg = AdamConfig::default();
        let mut p = vec![Tensor::row(vec![0.0; 3])];
        let mut st = AdamState::new(&p);
        let g = vec![Tensor::row(vec![0.0; 2])];
        assert!(adam_step(&mut p, &g, &mut st, &cfg, 1e-3).is_err());
    }

    #[test]
    fn deterministic() {
        let run = || {
            let cfg = AdamConfig::default();
            let mut p = vec![Tensor::row(vec![0.1, -0.4, 2.0])];
            let mut st = AdamState::new(&p);
            for k in 0..50 {
                let g: Vec<f64> = p[0].data().iter().map(|w| 2.0 * w + (k as f64).sin()).collect();
                adam_step(&mut p, &[Tensor::row(g)], &mut st, &cfg, 1e-2).unwrap();
            }
            p
        };
        assert_eq!(run(), run());
    }
}
