//! Mixture of discretized logistics over `bins` equal-width bins of `[-1, 1]`.
//!
//! Bin `b` covers `[x_b - Δ/2, x_b + Δ/2)` with center `x_b = -1 + (b + 1/2)Δ`
//! and `Δ = 2 / bins`; the first bin extends to `-inf` and the last to `+inf`.
//! Temperature divides the mixture logits and multiplies the logistic scale.

use alloc::vec::Vec;

use super::{NetError, NetSpec, MAX_COMPONENTS};
use crate::math::{log_sigmoid, sigmoid};

/// Head parameters for every action dimension at one timestep.
#[derive(Clone, Debug, PartialEq)]
pub struct ModlHead {
    pub components: usize,
    pub bins: usize,
    pub log_scale_floor: f64,
    /// Per dimension: `components` logits, then means, then raw log-scales.
    pub raw: Vec<f64>,
}

impl ModlHead {
    pub fn new(spec: &NetSpec, raw: Vec<f64>) -> Self {
        assert_eq!(raw.len(), spec.head_width());
        ModlHead { components: spec.components, bins: spec.bins, log_scale_floor: spec.log_scale_floor, raw }
    }

    pub fn action_dims(&self) -> usize {
        self.raw.len() / (3 * self.components)
    }

    fn dim(&self, d: usize) -> &[f64] {
        let w = 3 * self.components;
        &self.raw[d * w..(d + 1) * w]
    }

    pub fn logits(&self, d: usize) -> &[f64] {
        &self.dim(d)[..self.components]
    }

    pub fn means(&self, d: usize) -> &[f64] {
        &self.dim(d)[self.components..2 * self.components]
    }

    /// Log-scales after the floor clamp.
    pub fn log_scales(&self, d: usize) -> Vec<f64> {
        self.dim(d)[2 * self.components..].iter().map(|&x| x.max(self.log_scale_floor)).collect()
    }

    /// Mixture weights (softmax of the logits).
    pub fn weights(&self, d: usize) -> Vec<f64> {
        let lg = self.logits(d);
        let m = lg.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = lg.iter().map(|&x| libm::exp(x - m)).collect();
        let s: f64 = e.iter().sum();
        e.into_iter().map(|x| x / s).collect()
    }

    pub fn bin_logprob(&self, d: usize, bin: usize) -> f64 {
        dim_logprob(self.dim(d), self.components, self.bins, self.log_scale_floor, bin, None)
    }

    /// Probabilities of all bins of dimension `d`.
    pub fn bin_probs(&self, d: usize) -> Vec<f64> {
        (0..self.bins).map(|b| libm::exp(self.bin_logprob(d, b))).collect()
    }
}

/// `Σ_d log P_d(bins[d])`.
pub fn modl_bin_logprob(head: &ModlHead, bins: &[usize]) -> Result<f64, NetError> {
    let mut total = 0.0;
    for (d, &b) in bins.iter().enumerate().take(head.action_dims()) {
        if b >= head.bins {
            return Err(NetError::BinOutOfRange { bin: b, bins: head.bins });
        }
        total += head.bin_logprob(d, b);
    }
    Ok(total)
}

/// One bin per action dimension drawn from the tempered mixture.
pub fn modl_sample<R: rand::Rng + ?Sized>(head: &ModlHead, rng: &mut R, temperature: f64) -> Vec<u16> {
    (0..head.action_dims())
        .map(|d| sample_dim(head.dim(d), head.components, head.bins, head.log_scale_floor, rng, temperature) as u16)
        .collect()
}

/// Bin containing the mean of the heaviest component, per dimension.
pub fn modl_greedy(head: &ModlHead) -> Vec<u16> {
    (0..head.action_dims()).map(|d| greedy_dim(head.dim(d), head.components, head.bins) as u16).collect()
}

pub(crate) fn bin_of(x: f64, bins: usize) -> usize {
    let b = libm::floor((x + 1.0) * 0.5 * bins as f64);
    if !(b > 0.0) {
        0
    } else {
        (b as usize).min(bins - 1)
    }
}

pub(crate) fn greedy_dim(raw: &[f64], k: usize, bins: usize) -> usize {
    let mut best = 0;
    for j in 1..k {
        if raw[j] > raw[best] {
            best = j;
        }
    }
    bin_of(raw[k + best], bins)
}

/// Uniform variate in the open interval (0, 1).
fn open_unit<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

pub(crate) fn sample_dim<R: rand::Rng + ?Sized>(
    raw: &[f64],
    k: usize,
    bins: usize,
    floor: f64,
    rng: &mut R,
    temperature: f64,
) -> usize {
    assert!(temperature > 0.0, "temperature must be positive");
    let logits = &raw[..k];
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w = [0.0; MAX_COMPONENTS];
    let mut total = 0.0;
    for j in 0..k {
        w[j] = libm::exp((logits[j] - m) / temperature);
        total += w[j];
    }
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut comp = k - 1;
    for (j, wj) in w.iter().enumerate().take(k) {
        acc += wj;
        if u < acc {
            comp = j;
            break;
        }
    }
    let mu = raw[k + comp];
    let s = libm::exp(raw[2 * k + comp].max(floor)) * temperature;
    let p = open_unit(rng);
    let x = mu + s * (libm::log(p) - libm::log1p(-p));
    bin_of(x, bins)
}

/// `log p(bin)` of one logistic component and its derivatives with respect to
/// the mean and the (clamped) log-scale.
fn component(u: f64, log_s: f64, half: f64, bin: usize, bins: usize) -> (f64, f64, f64) {
    let inv_s = libm::exp(-log_s);
    let a = (u + half) * inv_s;
    let c = (u - half) * inv_s;
    if bin == 0 {
        let lp = log_sigmoid(a);
        let sa = sigmoid(-a);
        (lp, -inv_s * sa, -a * sa)
    } else if bin == bins - 1 {
        let lp = log_sigmoid(-c);
        let sc = sigmoid(c);
        (lp, inv_s * sc, c * sc)
    } else {
        // σ(a) - σ(c) = σ(a) σ(-c) (1 - e^{c-a}), with c - a = -Δ/s.
        let q = -2.0 * half * inv_s;
        let em1 = libm::expm1(q);
        let lp = log_sigmoid(a) + log_sigmoid(-c) + libm::log(-em1);
        let sa = sigmoid(-a);
        let sc = sigmoid(c);
        let dmu = inv_s * (sc - sa);
        // d/dq log(-expm1(q)) = e^q / expm1(q); q scales like 1/s.
        let dq = if em1 != 0.0 { libm::exp(q) / em1 } else { f64::NEG_INFINITY };
        let dls = -a * sa + c * sc - q * dq;
        (lp, dmu, dls)
    }
}

/// `log P(bin)` for one action dimension given its `3k` raw head values.
/// When `grad` is given, `d log P / d raw` is written into it.
pub(crate) fn dim_logprob(raw: &[f64], k: usize, bins: usize, floor: f64, bin: usize, grad: Option<&mut [f64]>) -> f64 {
    let delta = 2.0 / bins as f64;
    let half = 0.5 * delta;
    let x = -1.0 + (bin as f64 + 0.5) * delta;
    let logits = &raw[..k];
    let lm = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut lse = 0.0;
    for &l in logits {
        lse += libm::exp(l - lm);
    }
    let log_norm = lm + libm::log(lse);

    let mut joint = [0.0; MAX_COMPONENTS];
    let mut dmu = [0.0; MAX_COMPONENTS];
    let mut dls = [0.0; MAX_COMPONENTS];
    let mut jm = f64::NEG_INFINITY;
    for j in 0..k {
        let ls = raw[2 * k + j].max(floor);
        let (lp, gm, gs) = component(x - raw[k + j], ls, half, bin, bins);
        joint[j] = logits[j] - log_norm + lp;
        dmu[j] = gm;
        dls[j] = gs;
        jm = jm.max(joint[j]);
    }
    let mut s = 0.0;
    for jv in joint.iter().take(k) {
        s += libm::exp(jv - jm);
    }
    let logp = jm + libm::log(s);
    if let Some(g) = grad {
        for j in 0..k {
            let resp = libm::exp(joint[j] - logp);
            let w = libm::exp(logits[j] - log_norm);
            g[j] = resp - w;
            g[k + j] = resp * dmu[j];
            g[2 * k + j] = if raw[2 * k + j] > floor { resp * dls[j] } else { 0.0 };
        }
    }
    logp
}

#[cfg(test)]
mod tests {
    use super::*;

    fn head(k: usize, raw: Vec<f64>) -> ModlHead {
        ModlHead { components: k, bins: 256, log_scale_floor: -9.0, raw }
    }

    #[test]
    fn concentrated_component_owns_its_bin() {
        // μ at the center of bin 100, tiny scale.
        let x = -1.0 + 100.5 * 2.0 / 256.0;
        let h = head(1, alloc::vec![0.0, x, -12.0]);
        assert!(h.bin_logprob(0, 100).abs() < 1e-12);
    }

    #[test]
    fn far_low_mean_fills_first_bin() {
        let h = head(1, alloc::vec![0.0, -10.0, -1.0]);
        assert!(libm::exp(h.bin_logprob(0, 0)) >= 0.999);
    }

    #[test]
    fn out_of_range_bin_rejected() {
        let h = head(1, alloc::vec![0.0, 0.0, 0.0]);
        assert_eq!(modl_bin_logprob(&h, &[256]), Err(NetError::BinOutOfRange { bin: 256, bins: 256 }));
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let raw = alloc::vec![0.3, -0.7, 0.2, 0.1, -0.4, 0.9, -3.0, -2.0, -5.5];
        for bin in [0usize, 1, 77, 128, 200, 254, 255] {
            let mut g = [0.0; 9];
            dim_logprob(&raw, 3, 256, -9.0, bin, Some(&mut g));
            for i in 0..9 {
                let mut p = raw.clone();
                let mut m = raw.clone();
                p[i] += 1e-6;
                m[i] -= 1e-6;
                let fd = (dim_logprob(&p, 3, 256, -9.0, bin, None) - dim_logprob(&m, 3, 256, -9.0, bin, None)) / 2e-6;
                assert!((fd - g[i]).abs() <= 1e-6 * (1.0 + fd.abs()), "bin {bin} i {i}: {fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn cold_sampling_picks_mean_bin() {
        let x = -1.0 + 40.5 * 2.0 / 256.0;
        let h = head(1, alloc::vec![0.0, x, -2.0]);
        let mut rng = crate::rng::rng_from_seed(0);
        for _ in 0..100 {
            assert_eq!(modl_sample(&h, &mut rng, 1e-9), alloc::vec![40]);
        }
        assert_eq!(modl_greedy(&h), alloc::vec![40]);
    }
}
