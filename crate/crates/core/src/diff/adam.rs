use serde::{Deserialize, Serialize};

use super::dot;
use crate::error::{ensure, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
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

/// Moment accumulators for Adam with bias correction.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl AdamState {
    pub fn new(len: usize, config: AdamConfig) -> Self {
        AdamState {
            config,
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        ensure!(
            params.len() == self.m.len() && grads.len() == self.m.len(),
            "adam shape mismatch: params {}, grads {}, state {}",
            params.len(),
            grads.len(),
            self.m.len()
        );
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        // lr * (m / bc1) / (sqrt(v / bc2) + eps) with the bias corrections hoisted
        let step = lr / bc1;
        let inv_sqrt_bc2 = 1.0 / bc2.sqrt();
        let n = params.len();
        let (params, grads) = (&mut params[..n], &grads[..n]);
        let (ms, vs) = (&mut self.m[..n], &mut self.v[..n]);
        for i in 0..n {
            let g = grads[i];
            let m = beta1 * ms[i] + (1.0 - beta1) * g;
            let v = beta2 * vs[i] + (1.0 - beta2) * g * g;
            ms[i] = m;
            vs[i] = v;
            params[i] -= step * m / (v.sqrt() * inv_sqrt_bc2 + eps);
        }
        Ok(())
    }
}

/// Rescales `grads` so their global L2 norm is at most `max_norm`. Returns the norm
/// before clipping.
///
/// A non-finite return value means some gradient is not finite (or its square overflows);
/// the gradients are then left untouched.
pub fn clip_global_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = dot(grads, grads).sqrt();
    if norm > max_norm && norm.is_finite() {
        let s = max_norm / norm;
        grads.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut st = AdamState::new(3, AdamConfig::default());
        let mut p = vec![1.0, -2.0, 0.5];
        st.step(&mut p, &[0.0; 3]).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
        assert_eq!(st.step_count(), 1);
    }

    #[test]
    fn first_step_is_signed_lr() {
        for g in [3.7, -0.01, 1e4] {
            let cfg = AdamConfig::default();
            let mut st = AdamState::new(1, cfg);
            let mut p = [0.0];
            st.step(&mut p, &[g]).unwrap();
            assert!((p[0] + cfg.lr * g.signum()).abs() < cfg.lr * 1e-6);
        }
    }

    #[test]
    fn two_steps_match_unrolled_recurrence() {
        let (g, lr, b1, b2, eps) = (0.25_f64, 1e-3, 0.9_f64, 0.999_f64, 1e-8);
        // hand-unrolled oracle
        let mut expected = 0.0;
        let (mut m, mut v) = (0.0, 0.0);
        for t in 1..=2 {
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t));
            let vh = v / (1.0 - b2.powi(t));
            expected -= lr * mh / (vh.sqrt() + eps);
        }
        let mut st = AdamState::new(1, AdamConfig::default());
        let mut p = [0.0];
        st.step(&mut p, &[g]).unwrap();
        st.step(&mut p, &[g]).unwrap();
        assert!((p[0] - expected).abs() < 1e-15);
        assert!((p[0] + 2.0 * lr).abs() < 1e-8);
    }

    #[test]
    fn shape_mismatch_errors() {
        let mut st = AdamState::new(2, AdamConfig::default());
        let mut p = [0.0; 3];
        assert!(st.step(&mut p, &[0.0; 3]).is_err());
    }

    #[test]
    fn deterministic_bits() {
        let run = || {
            let mut st = AdamState::new(4, AdamConfig::default());
            let mut p = vec![0.1, 0.2, 0.3, 0.4];
            for k in 0..10 {
                let g: Vec<f64> = p.iter().map(|x| (x * k as f64).sin()).collect();
                st.step(&mut p, &g).unwrap();
            }
            p
        };
        let (a, b) = (run(), run());
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn clipping_caps_norm() {
        let mut g = vec![30.0, 40.0];
        let n = clip_global_norm(&mut g, 10.0);
        assert_eq!(n, 50.0);
        assert!((g[0] - 6.0).abs() < 1e-12 && (g[1] - 8.0).abs() < 1e-12);
        let mut small = vec![0.3, 0.4];
        clip_global_norm(&mut small, 10.0);
        assert_eq!(small, vec![0.3, 0.4]);
    }
}
