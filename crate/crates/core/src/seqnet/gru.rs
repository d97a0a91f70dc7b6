//! Batched GRU forward pass, output head, and exact backpropagation through
//! time.
//!
//! Batches are stored time-major: row `t * B + b` holds sequence `b` at step
//! `t`. Shorter sequences are zero-padded; padded steps carry no loss, and
//! since the recurrence is causal they never influence valid steps.

use alloc::vec::Vec;

use super::gemm::gemm;
use super::modl::{dim_logprob, ModlHead};
use super::{LayerOffsets, NetError, NetSpec, PolicyParams};
use crate::math::sigmoid;

/// One training sequence: `len x input_width` inputs and `len x action_dims`
/// target bins, both row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainExample {
    pub inputs: Vec<f64>,
    pub targets: Vec<u16>,
}

/// Recurrent state of a batch of independent sequences, laid out as
/// `layers x batch x width`.
#[derive(Clone, Debug, PartialEq)]
pub struct Hidden {
    pub layers: usize,
    pub batch: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

impl Hidden {
    pub fn zeros(spec: &NetSpec, batch: usize) -> Self {
        Hidden { layers: spec.layers, batch, width: spec.width, values: alloc::vec![0.0; spec.layers * batch * spec.width] }
    }

    fn layer(&self, l: usize) -> &[f64] {
        let n = self.batch * self.width;
        &self.values[l * n..(l + 1) * n]
    }

    fn layer_mut(&mut self, l: usize) -> &mut [f64] {
        let n = self.batch * self.width;
        &mut self.values[l * n..(l + 1) * n]
    }

    /// Zeroes the state of batch row `b` in every layer.
    pub fn reset_row(&mut self, b: usize) {
        for l in 0..self.layers {
            let w = self.width;
            self.layer_mut(l)[b * w..(b + 1) * w].fill(0.0);
        }
    }
}

/// Activations kept for the backward pass.
struct LayerCache {
    /// `(T + 1) x B x H`; block 0 is the initial state.
    h: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    n: Vec<f64>,
    /// Recurrent candidate pre-activation `U_n h + bu_n`, before the reset gate.
    ghn: Vec<f64>,
}

fn layer_forward(
    p: &[f64],
    off: &LayerOffsets,
    hw: usize,
    steps: usize,
    batch: usize,
    x: &[f64],
    h0: &[f64],
    layer_index: usize,
) -> Result<LayerCache, NetError> {
    let rows = steps * batch;
    let g3 = 3 * hw;
    let inw = off.input;
    let w = &p[off.w..off.w + g3 * inw];
    let u = &p[off.u..off.u + g3 * hw];
    let b = &p[off.b..off.b + g3];
    let bu = &p[off.bu..off.bu + g3];

    let mut gx = alloc::vec![0.0; rows * g3];
    gemm(rows, inw, g3, 1.0, x, false, w, true, 0.0, &mut gx);
    for row in gx.chunks_exact_mut(g3) {
        for (v, bv) in row.iter_mut().zip(b) {
            *v += bv;
        }
    }

    let bh = batch * hw;
    let mut h = alloc::vec![0.0; (steps + 1) * bh];
    h[..bh].copy_from_slice(h0);
    let mut z = alloc::vec![0.0; rows * hw];
    let mut r = alloc::vec![0.0; rows * hw];
    let mut n = alloc::vec![0.0; rows * hw];
    let mut ghn = alloc::vec![0.0; rows * hw];
    let mut gh = alloc::vec![0.0; batch * g3];
    for t in 0..steps {
        let (prev_all, next_all) = h.split_at_mut((t + 1) * bh);
        let hprev = &prev_all[t * bh..];
        let hnext = &mut next_all[..bh];
        gemm(batch, hw, g3, 1.0, hprev, false, u, true, 0.0, &mut gh);
        let mut finite = true;
        for i in 0..batch {
            let gxr = &gx[(t * batch + i) * g3..(t * batch + i + 1) * g3];
            let ghr = &gh[i * g3..(i + 1) * g3];
            let base = (t * batch + i) * hw;
            for j in 0..hw {
                let zt = sigmoid(gxr[j] + ghr[j] + bu[j]);
                let rt = sigmoid(gxr[hw + j] + ghr[hw + j] + bu[hw + j]);
                let hn = ghr[2 * hw + j] + bu[2 * hw + j];
                let nt = libm::tanh(gxr[2 * hw + j] + rt * hn);
                let hp = hprev[i * hw + j];
                let ht = (1.0 - zt) * nt + zt * hp;
                z[base + j] = zt;
                r[base + j] = rt;
                n[base + j] = nt;
                ghn[base + j] = hn;
                hnext[i * hw + j] = ht;
                finite &= ht.is_finite();
            }
        }
        if !finite {
            return Err(NetError::NonFinite { layer: layer_index, timestep: t });
        }
    }
    Ok(LayerCache { h, z, r, n, ghn })
}

/// Runs every layer and the head over a time-major batch.
fn forward(
    params: &PolicyParams,
    steps: usize,
    batch: usize,
    x: &[f64],
    h0: Option<&Hidden>,
) -> Result<(Vec<LayerCache>, Vec<f64>), NetError> {
    let spec = &params.spec;
    let layout = spec.layout();
    let hw = spec.width;
    let zeros = alloc::vec![0.0; batch * hw];
    let mut caches: Vec<LayerCache> = Vec::with_capacity(spec.layers);
    for (l, off) in layout.layers.iter().enumerate() {
        let input: &[f64] = if l == 0 { x } else { &caches[l - 1].h[batch * hw..] };
        let init = h0.map_or(&zeros[..], |h| h.layer(l));
        let c = layer_forward(&params.values, off, hw, steps, batch, input, init, l)?;
        caches.push(c);
    }
    let top = &caches[spec.layers - 1].h[batch * hw..];
    let hwid = spec.head_width();
    let mut y = alloc::vec![0.0; steps * batch * hwid];
    gemm(steps * batch, hw, hwid, 1.0, top, false, &params.values[layout.head_w..layout.head_b], true, 0.0, &mut y);
    let bo = &params.values[layout.head_b..layout.head_b + hwid];
    for row in y.chunks_exact_mut(hwid) {
        for (v, b) in row.iter_mut().zip(bo) {
            *v += b;
        }
    }
    Ok((caches, y))
}

fn check_width(spec: &NetSpec, got: usize) -> Result<(), NetError> {
    if got != spec.input_width {
        return Err(NetError::WidthMismatch { expected: spec.input_width, got });
    }
    Ok(())
}

/// Evaluates one sequence (`len x input_width`, row-major) from `initial`
/// (zeros when `None`), returning a head per timestep and the final state.
pub fn rnn_forward(params: &PolicyParams, inputs: &[f64], initial: Option<&Hidden>) -> Result<(Vec<ModlHead>, Hidden), NetError> {
    let spec = params.spec;
    let inw = spec.input_width;
    if inputs.is_empty() || inputs.len() % inw != 0 {
        return Err(NetError::WidthMismatch { expected: inw, got: if inputs.is_empty() { 0 } else { inputs.len() % inw } });
    }
    if let Some(h) = initial {
        if h.batch != 1 || h.width != spec.width || h.layers != spec.layers {
            return Err(NetError::WidthMismatch { expected: spec.width, got: h.width });
        }
    }
    let steps = inputs.len() / inw;
    let (caches, y) = forward(params, steps, 1, inputs, initial)?;
    let hwid = spec.head_width();
    let heads = y.chunks_exact(hwid).map(|r| ModlHead::new(&spec, r.to_vec())).collect();
    let mut last = Hidden::zeros(&spec, 1);
    for (l, c) in caches.iter().enumerate() {
        last.layer_mut(l).copy_from_slice(&c.h[steps * spec.width..]);
    }
    Ok((heads, last))
}

/// Advances `batch` independent sequences by one step. `inputs` is
/// `batch x input_width`; head parameters are written to `out`
/// (`batch x head_width`).
pub fn step_batch(params: &PolicyParams, inputs: &[f64], hidden: &mut Hidden, out: &mut Vec<f64>) -> Result<(), NetError> {
    let spec = params.spec;
    let batch = hidden.batch;
    check_width(&spec, inputs.len() / batch.max(1))?;
    if inputs.len() != batch * spec.input_width {
        return Err(NetError::WidthMismatch { expected: batch * spec.input_width, got: inputs.len() });
    }
    let (caches, y) = forward(params, 1, batch, inputs, Some(hidden))?;
    let bh = batch * spec.width;
    for (l, c) in caches.iter().enumerate() {
        hidden.layer_mut(l).copy_from_slice(&c.h[bh..]);
    }
    *out = y;
    Ok(())
}

/// Mean negative log-likelihood per valid timestep and its exact gradient.
pub fn loss_and_grad(params: &PolicyParams, batch: &[TrainExample]) -> Result<(f64, Vec<f64>), NetError> {
    let spec = params.spec;
    let inw = spec.input_width;
    let ad = spec.action_dims;
    let hw = spec.width;
    let g3 = 3 * hw;
    let hwid = spec.head_width();
    let k = spec.components;
    if batch.is_empty() {
        return Err(NetError::EmptyBatch);
    }
    if params.values.len() != spec.param_count() {
        return Err(NetError::ParamCount { expected: spec.param_count(), got: params.values.len() });
    }
    let mut lens = Vec::with_capacity(batch.len());
    for (i, ex) in batch.iter().enumerate() {
        let len = ex.targets.len() / ad;
        if len == 0 {
            return Err(NetError::EmptySequence(i));
        }
        if ex.inputs.len() != len * inw || ex.targets.len() != len * ad {
            return Err(NetError::WidthMismatch { expected: len * inw, got: ex.inputs.len() });
        }
        if let Some(&b) = ex.targets.iter().find(|&&b| b as usize >= spec.bins) {
            return Err(NetError::BinOutOfRange { bin: b as usize, bins: spec.bins });
        }
        lens.push(len);
    }
    let bsz = batch.len();
    let steps = *lens.iter().max().expect("non-empty batch");
    let rows = steps * bsz;

    let mut x = alloc::vec![0.0; rows * inw];
    for (b, ex) in batch.iter().enumerate() {
        for t in 0..lens[b] {
            x[(t * bsz + b) * inw..(t * bsz + b + 1) * inw].copy_from_slice(&ex.inputs[t * inw..(t + 1) * inw]);
        }
    }
    let (caches, y) = forward(params, steps, bsz, &x, None)?;

    let valid: usize = lens.iter().sum();
    let scale = 1.0 / valid as f64;
    let mut dy = alloc::vec![0.0; rows * hwid];
    let mut loss = 0.0;
    for t in 0..steps {
        for (b, ex) in batch.iter().enumerate() {
            if t >= lens[b] {
                continue;
            }
            let row = t * bsz + b;
            let mut lp = 0.0;
            for d in 0..ad {
                let span = row * hwid + d * 3 * k..row * hwid + (d + 1) * 3 * k;
                let bin = ex.targets[t * ad + d] as usize;
                lp += dim_logprob(&y[span.clone()], k, spec.bins, spec.log_scale_floor, bin, Some(&mut dy[span]));
            }
            if !lp.is_finite() {
                return Err(NetError::NonFinite { layer: spec.layers, timestep: t });
            }
            loss -= lp;
        }
    }
    for v in dy.iter_mut() {
        *v *= -scale;
    }
    let loss = loss * scale;

    let layout = spec.layout();
    let p = &params.values;
    let mut grad = alloc::vec![0.0; p.len()];
    let bh = bsz * hw;
    let top = &caches[spec.layers - 1].h[bh..];
    gemm(hwid, rows, hw, 1.0, &dy, true, top, false, 0.0, &mut grad[layout.head_w..layout.head_b]);
    {
        let gb = &mut grad[layout.head_b..layout.head_b + hwid];
        for row in dy.chunks_exact(hwid) {
            for (g, v) in gb.iter_mut().zip(row) {
                *g += v;
            }
        }
    }
    let mut dh_out = alloc::vec![0.0; rows * hw];
    gemm(rows, hwid, hw, 1.0, &dy, false, &p[layout.head_w..layout.head_b], false, 0.0, &mut dh_out);

    let mut dgx = alloc::vec![0.0; rows * g3];
    let mut dgh = alloc::vec![0.0; rows * g3];
    let mut carry = alloc::vec![0.0; bh];
    for l in (0..spec.layers).rev() {
        let off = layout.layers[l];
        let c = &caches[l];
        let u = &p[off.u..off.u + g3 * hw];
        carry.fill(0.0);
        for t in (0..steps).rev() {
            let hprev = &c.h[t * bh..(t + 1) * bh];
            for i in 0..bsz {
                let base = (t * bsz + i) * hw;
                let gbase = (t * bsz + i) * g3;
                for j in 0..hw {
                    let dh = dh_out[base + j] + carry[i * hw + j];
                    let (zt, rt, nt, hn) = (c.z[base + j], c.r[base + j], c.n[base + j], c.ghn[base + j]);
                    let hp = hprev[i * hw + j];
                    let dpre_n = dh * (1.0 - zt) * (1.0 - nt * nt);
                    let dpre_z = dh * (hp - nt) * zt * (1.0 - zt);
                    let dpre_r = dpre_n * hn * rt * (1.0 - rt);
                    dgx[gbase + j] = dpre_z;
                    dgx[gbase + hw + j] = dpre_r;
                    dgx[gbase + 2 * hw + j] = dpre_n;
                    dgh[gbase + j] = dpre_z;
                    dgh[gbase + hw + j] = dpre_r;
                    dgh[gbase + 2 * hw + j] = dpre_n * rt;
                    carry[i * hw + j] = dh * zt;
                }
            }
            gemm(bsz, g3, hw, 1.0, &dgh[t * bsz * g3..(t + 1) * bsz * g3], false, u, false, 1.0, &mut carry);
        }
        let hprev_all = &c.h[..rows * hw];
        gemm(g3, rows, hw, 1.0, &dgh, true, hprev_all, false, 0.0, &mut grad[off.u..off.u + g3 * hw]);
        let input: &[f64] = if l == 0 { &x } else { &caches[l - 1].h[bh..] };
        gemm(g3, rows, off.input, 1.0, &dgx, true, input, false, 0.0, &mut grad[off.w..off.w + g3 * off.input]);
        for row in 0..rows {
            for q in 0..g3 {
                grad[off.b + q] += dgx[row * g3 + q];
                grad[off.bu + q] += dgh[row * g3 + q];
            }
        }
        if l > 0 {
            gemm(rows, g3, hw, 1.0, &dgx, false, &p[off.w..off.w + g3 * hw], false, 0.0, &mut dh_out);
        }
    }
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng as _;

    fn tiny_spec() -> NetSpec {
        NetSpec { input_width: 3, layers: 2, width: 4, components: 2, action_dims: 2, bins: 16, log_scale_floor: -9.0 }
    }

    #[test]
    fn zero_weights_give_constant_heads() {
        let p = PolicyParams::zeros(tiny_spec()).unwrap();
        let inputs: Vec<f64> = (0..15).map(|i| i as f64).collect();
        let (heads, _) = rnn_forward(&p, &inputs, None).unwrap();
        assert_eq!(heads.len(), 5);
        for h in &heads {
            assert_eq!(h, &heads[0]);
            assert!(h.raw.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn width_mismatch_reported() {
        let p = PolicyParams::zeros(tiny_spec()).unwrap();
        assert!(matches!(rnn_forward(&p, &[0.0; 4], None), Err(NetError::WidthMismatch { expected: 3, .. })));
    }

    #[test]
    fn batched_step_matches_sequence_forward() {
        let spec = tiny_spec();
        let p = PolicyParams::init(spec, &mut rng_from_seed(4)).unwrap();
        let mut rng = rng_from_seed(5);
        let seqs: Vec<Vec<f64>> = (0..3).map(|_| (0..18).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let mut hidden = Hidden::zeros(&spec, 3);
        let mut out = Vec::new();
        let whole: Vec<Vec<ModlHead>> = seqs.iter().map(|s| rnn_forward(&p, s, None).unwrap().0).collect();
        for t in 0..6 {
            let inp: Vec<f64> = seqs.iter().flat_map(|s| s[t * 3..t * 3 + 3].iter().copied()).collect();
            step_batch(&p, &inp, &mut hidden, &mut out).unwrap();
            for b in 0..3 {
                let row = &out[b * spec.head_width()..(b + 1) * spec.head_width()];
                for (x, y) in row.iter().zip(&whole[b][t].raw) {
                    assert!((x - y).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn empty_batch_rejected() {
        let p = PolicyParams::zeros(tiny_spec()).unwrap();
        assert_eq!(loss_and_grad(&p, &[]), Err(NetError::EmptyBatch));
    }
}
