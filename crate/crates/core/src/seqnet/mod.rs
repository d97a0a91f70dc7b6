//! Recurrent policy networks with mixture-of-discretized-logistics action
//! heads, exact BPTT gradients and Adam.
//!
//! All math is `f64`. A network is a stack of GRU layers followed by a linear
//! projection to `action_dims * 3 * components` head parameters: for every
//! action dimension, `components` mixture logits, then means, then log-scales.

mod adam;
mod gemm;
mod gru;
mod modl;

use alloc::vec::Vec;

use rand::Rng as _;

use crate::rng::Rng;

pub use adam::{adam_step, clip_grad_norm, AdamConfig, AdamState};
pub use gru::{loss_and_grad, rnn_forward, step_batch, Hidden, TrainExample};
pub use modl::{modl_bin_logprob, modl_greedy, modl_sample, ModlHead};
pub(crate) use modl::{greedy_dim, sample_dim};

/// Largest supported mixture size.
pub const MAX_COMPONENTS: usize = 32;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum NetError {
    #[error("invalid network spec: {0}")]
    InvalidSpec(&'static str),
    #[error("input width mismatch: expected {expected}, got {got}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("sequence {0} is empty")]
    EmptySequence(usize),
    #[error("bin {bin} out of range for {bins} bins")]
    BinOutOfRange { bin: usize, bins: usize },
    #[error("parameter vector has length {got}, spec needs {expected}")]
    ParamCount { expected: usize, got: usize },
    /// `layer == layers` denotes the output head.
    #[error("non-finite value in layer {layer} at timestep {timestep}")]
    NonFinite { layer: usize, timestep: usize },
}

/// Network shape.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NetSpec {
    pub input_width: usize,
    pub layers: usize,
    pub width: usize,
    /// Mixture components per action dimension.
    pub components: usize,
    pub action_dims: usize,
    pub bins: usize,
    /// Lower clamp on every log-scale, in normalized action units.
    pub log_scale_floor: f64,
}

impl NetSpec {
    pub const DEFAULT_COMPONENTS: usize = 5;
    pub const DEFAULT_BINS: usize = 256;
    pub const DEFAULT_LOG_SCALE_FLOOR: f64 = -9.0;

    /// Desk-scale default: 2 layers of 128 units.
    pub fn new(input_width: usize) -> Self {
        NetSpec {
            input_width,
            layers: 2,
            width: 128,
            components: Self::DEFAULT_COMPONENTS,
            action_dims: crate::scene::ACT_DIM,
            bins: Self::DEFAULT_BINS,
            log_scale_floor: Self::DEFAULT_LOG_SCALE_FLOOR,
        }
    }

    pub fn with_shape(mut self, layers: usize, width: usize) -> Self {
        self.layers = layers;
        self.width = width;
        self
    }

    pub fn validate(&self) -> Result<(), NetError> {
        if self.input_width == 0 {
            return Err(NetError::InvalidSpec("input width must be at least 1"));
        }
        if self.layers == 0 {
            return Err(NetError::InvalidSpec("layer count must be at least 1"));
        }
        if self.width == 0 {
            return Err(NetError::InvalidSpec("width must be at least 1"));
        }
        if self.components == 0 || self.components > MAX_COMPONENTS {
            return Err(NetError::InvalidSpec("component count must be in 1..=32"));
        }
        if self.action_dims == 0 {
            return Err(NetError::InvalidSpec("action dims must be at least 1"));
        }
        if self.bins < 2 || self.bins > u16::MAX as usize + 1 {
            return Err(NetError::InvalidSpec("bins must be in 2..=65536"));
        }
        if !self.log_scale_floor.is_finite() {
            return Err(NetError::InvalidSpec("log-scale floor must be finite"));
        }
        Ok(())
    }

    /// Head parameters per timestep.
    pub fn head_width(&self) -> usize {
        self.action_dims * 3 * self.components
    }

    pub fn layout(&self) -> Layout {
        Layout::new(self)
    }

    pub fn param_count(&self) -> usize {
        self.layout().total
    }
}

/// Offsets of one GRU layer's tensors inside the flat parameter vector.
///
/// `w` is `3H x in`, `u` is `3H x H`, both row-major with gate blocks in the
/// order update, reset, candidate; `b` and `bu` are the matching biases.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerOffsets {
    pub input: usize,
    pub w: usize,
    pub u: usize,
    pub b: usize,
    pub bu: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    pub layers: Vec<LayerOffsets>,
    /// `head_width x H`, row-major.
    pub head_w: usize,
    pub head_b: usize,
    pub total: usize,
}

impl Layout {
    fn new(spec: &NetSpec) -> Self {
        let h = spec.width;
        let mut off = 0;
        let mut layers = Vec::with_capacity(spec.layers);
        for l in 0..spec.layers {
            let input = if l == 0 { spec.input_width } else { h };
            let w = off;
            let u = w + 3 * h * input;
            let b = u + 3 * h * h;
            let bu = b + 3 * h;
            off = bu + 3 * h;
            layers.push(LayerOffsets { input, w, u, b, bu });
        }
        let head_w = off;
        let head_b = head_w + spec.head_width() * h;
        let total = head_b + spec.head_width();
        Layout { layers, head_w, head_b, total }
    }
}

/// Flat parameter vector plus the spec that shapes it.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyParams {
    pub spec: NetSpec,
    pub values: Vec<f64>,
}

impl PolicyParams {
    pub fn zeros(spec: NetSpec) -> Result<Self, NetError> {
        spec.validate()?;
        Ok(PolicyParams { spec, values: alloc::vec![0.0; spec.param_count()] })
    }

    pub fn from_values(spec: NetSpec, values: Vec<f64>) -> Result<Self, NetError> {
        spec.validate()?;
        let expected = spec.param_count();
        if values.len() != expected {
            return Err(NetError::ParamCount { expected, got: values.len() });
        }
        Ok(PolicyParams { spec, values })
    }

    /// Every tensor drawn from `uniform(-1/sqrt(fan_in), 1/sqrt(fan_in))`,
    /// where `fan_in` is the width of the vector the tensor acts on.
    pub fn init(spec: NetSpec, rng: &mut Rng) -> Result<Self, NetError> {
        let mut p = Self::zeros(spec)?;
        let layout = spec.layout();
        let h = spec.width;
        let mut fill = |start: usize, len: usize, fan_in: usize| {
            let a = 1.0 / libm::sqrt(fan_in as f64);
            for x in &mut p.values[start..start + len] {
                *x = rng.random_range(-a..=a);
            }
        };
        for l in &layout.layers {
            fill(l.w, 3 * h * l.input, l.input);
            fill(l.u, 3 * h * h, h);
            fill(l.b, 3 * h, l.input);
            fill(l.bu, 3 * h, h);
        }
        fill(layout.head_w, spec.head_width() * h, h);
        fill(layout.head_b, spec.head_width(), h);
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|x| x.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn param_count_matches_hand_count() {
        let s = NetSpec { input_width: 3, layers: 2, width: 4, components: 2, action_dims: 2, bins: 256, log_scale_floor: -9.0 };
        // layer 0: 12*3 + 12*4 + 12 + 12, layer 1: 12*4 + 12*4 + 24, head: 12*4 + 12
        let expect = (36 + 48 + 24) + (48 + 48 + 24) + (48 + 12);
        assert_eq!(s.param_count(), expect);
        let l = s.layout();
        assert_eq!(l.layers[1].w, 108);
        assert_eq!(l.total, expect);
    }

    #[test]
    fn invalid_specs_rejected() {
        let ok = NetSpec::new(19);
        assert!(ok.validate().is_ok());
        assert!(NetSpec { layers: 0, ..ok }.validate().is_err());
        assert!(NetSpec { width: 0, ..ok }.validate().is_err());
        assert!(NetSpec { components: 0, ..ok }.validate().is_err());
    }

    #[test]
    fn init_is_bounded_and_seeded() {
        let s = NetSpec::new(19).with_shape(1, 16);
        let a = PolicyParams::init(s, &mut crate::rng::rng_from_seed(1)).unwrap();
        let b = PolicyParams::init(s, &mut crate::rng::rng_from_seed(1)).unwrap();
        assert_eq!(a, b);
        let l = s.layout();
        let bound = 1.0 / libm::sqrt(19.0);
        assert!(a.values[l.layers[0].w..l.layers[0].u].iter().all(|x| x.abs() <= bound));
        assert!(a.values[l.head_w..].iter().all(|x| x.abs() <= 0.25));
    }
}
