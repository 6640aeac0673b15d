use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
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

/// First and second moment estimates plus the step counter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, cfg: &AdamConfig) {
    debug_assert_eq!(params.len(), grads.len());
    debug_assert_eq!(params.len(), state.m.len());
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        let m = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        let v = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        state.m[i] = m;
        state.v[i] = v;
        let m_hat = m / bc1;
        let v_hat = v / bc2;
        params[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_weights() {
        let mut p = vec![0.3, -1.2, 5.0];
        let before = p.clone();
        let mut s = AdamState::new(3);
        for _ in 0..10 {
            adam_step(&mut p, &[0.0; 3], &mut s, &AdamConfig::default());
        }
        assert_eq!(p, before);
    }

    #[test]
    fn constant_gradient_moves_by_lr() {
        // With g constant, m_hat = g and v_hat = g², so each step is
        // -lr·g/(|g| + eps) = -lr·sign(g) up to eps.
        let cfg = AdamConfig::default();
        for g in [3.0, -0.02, 1e-3] {
            let mut p = vec![0.0];
            let mut s = AdamState::new(1);
            let mut prev = 0.0;
            for step in 1..=2000 {
                adam_step(&mut p, &[g], &mut s, &cfg);
                let delta = p[0] - prev;
                prev = p[0];
                if step > 100 {
                    let expected = -cfg.lr * g / (g.abs() + cfg.eps);
                    assert!((delta - expected).abs() < 1e-9, "step {step}: {delta} vs {expected}");
                }
            }
            assert!(p[0].signum() == -g.signum());
        }
    }

    #[test]
    fn first_step_is_lr_sized() {
        let cfg = AdamConfig::default();
        let mut p = vec![1.0];
        let mut s = AdamState::new(1);
        adam_step(&mut p, &[0.5], &mut s, &cfg);
        assert!((p[0] - (1.0 - cfg.lr * 0.5 / (0.5 + cfg.eps))).abs() < 1e-15);
    }
}
