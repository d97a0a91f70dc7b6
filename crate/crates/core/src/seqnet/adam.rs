use alloc::vec::Vec;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(len: usize, config: AdamConfig) -> Self {
        AdamState { config, m: alloc::vec![0.0; len], v: alloc::vec![0.0; len], step: 0 }
    }
}

/// One bias-corrected Adam update in place.
pub fn adam_step(params: &mut [f64], grad: &[f64], state: &mut AdamState) {
    assert_eq!(params.len(), grad.len(), "parameter / gradient length mismatch");
    assert_eq!(params.len(), state.m.len(), "parameter / moment length mismatch");
    let AdamConfig { lr, beta1, beta2, eps } = state.config;
    state.step += 1;
    let c1 = 1.0 - libm::pow(beta1, state.step as f64);
    let c2 = 1.0 - libm::pow(beta2, state.step as f64);
    for i in 0..params.len() {
        let g = grad[i];
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g;
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * g * g;
        let mh = state.m[i] / c1;
        let vh = state.v[i] / c2;
        params[i] -= lr * mh / (libm::sqrt(vh) + eps);
    }
}

/// Rescales `grad` to L2 norm at most `max_norm`; returns the norm before
/// clipping.
pub fn clip_grad_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = libm::sqrt(grad.iter().map(|g| g * g).sum::<f64>());
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        for g in grad.iter_mut() {
            *g *= s;
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut p = alloc::vec![1.0, -2.0, 3.5];
        let mut s = AdamState::new(3, AdamConfig::default());
        for _ in 0..10 {
            adam_step(&mut p, &[0.0; 3], &mut s);
        }
        assert_eq!(p, alloc::vec![1.0, -2.0, 3.5]);
    }

    #[test]
    fn descends_on_square() {
        let mut p = alloc::vec![1.0];
        let mut s = AdamState::new(1, AdamConfig { lr: 0.1, ..AdamConfig::default() });
        let g = [2.0 * p[0]];
        adam_step(&mut p, &g, &mut s);
        assert!(p[0] < 1.0);
    }

    #[test]
    fn clip_preserves_direction() {
        let mut g = alloc::vec![3.0, 4.0];
        assert_eq!(clip_grad_norm(&mut g, 1.0), 5.0);
        assert!((g[0] - 0.6).abs() < 1e-15 && (g[1] - 0.8).abs() < 1e-15);
        let mut small = alloc::vec![0.1];
        clip_grad_norm(&mut small, 1.0);
        assert_eq!(small, alloc::vec![0.1]);
    }
}
