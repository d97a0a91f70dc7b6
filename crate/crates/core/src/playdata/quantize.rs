use alloc::vec::Vec;

use crate::scene::ACT_DIM;

use super::stats::NormStats;

pub const DEFAULT_BINS: usize = 256;

/// Maps actions to per-dimension bins over the training min / max range.
///
/// Each coordinate is normalized to `[-1, 1]` by the affine map from
/// `[low, high]`, clamped, and binned with `min(bins - 1, floor((x + 1) / 2 * bins))`.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionQuantizer {
    pub low: [f64; ACT_DIM],
    pub high: [f64; ACT_DIM],
    pub bins: usize,
}

impl ActionQuantizer {
    pub fn new(low: [f64; ACT_DIM], high: [f64; ACT_DIM], bins: usize) -> Self {
        ActionQuantizer { low, high, bins }
    }

    pub fn from_stats(stats: &NormStats) -> Self {
        Self::new(stats.act_min(), stats.act_max(), DEFAULT_BINS)
    }

    /// Dimensions whose range collapsed to a point; they always map to the
    /// middle bin.
    pub fn degenerate_dims(&self) -> Vec<usize> {
        (0..ACT_DIM).filter(|&d| !(self.high[d] > self.low[d])).collect()
    }

    pub fn bin_width_normalized(&self) -> f64 {
        2.0 / self.bins as f64
    }

    /// One bin width in original units for dimension `d`.
    pub fn bin_width(&self, d: usize) -> f64 {
        (self.high[d] - self.low[d]) / self.bins as f64
    }

    pub fn normalize(&self, d: usize, value: f64) -> f64 {
        let span = self.high[d] - self.low[d];
        if !(span > 0.0) {
            return 0.0;
        }
        (2.0 * (value - self.low[d]) / span - 1.0).clamp(-1.0, 1.0)
    }

    pub fn bin_of_normalized(&self, x: f64) -> usize {
        let x = x.clamp(-1.0, 1.0);
        let b = libm::floor((x + 1.0) * 0.5 * self.bins as f64);
        (b.max(0.0) as usize).min(self.bins - 1)
    }

    /// Center of bin `b` in normalized space.
    pub fn bin_center(&self, b: usize) -> f64 {
        -1.0 + (b as f64 + 0.5) * self.bin_width_normalized()
    }

    pub fn quantize_dim(&self, d: usize, value: f64) -> usize {
        if !(self.high[d] > self.low[d]) {
            return self.bins / 2;
        }
        self.bin_of_normalized(self.normalize(d, value))
    }

    pub fn quantize(&self, a: &[f64; ACT_DIM]) -> [u16; ACT_DIM] {
        let mut out = [0u16; ACT_DIM];
        for d in 0..ACT_DIM {
            out[d] = self.quantize_dim(d, a[d]) as u16;
        }
        out
    }

    pub fn dequantize_dim(&self, d: usize, bin: usize) -> f64 {
        let span = self.high[d] - self.low[d];
        if !(span > 0.0) {
            return self.low[d];
        }
        self.low[d] + (self.bin_center(bin) + 1.0) * 0.5 * span
    }

    pub fn dequantize(&self, bins: &[u16; ACT_DIM]) -> [f64; ACT_DIM] {
        let mut out = [0.0; ACT_DIM];
        for d in 0..ACT_DIM {
            out[d] = self.dequantize_dim(d, bins[d] as usize);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q() -> ActionQuantizer {
        ActionQuantizer::new([-0.05, -0.05, -0.05, -0.15, -0.15, -0.15, -0.2, -0.2], [0.05, 0.04, 0.03, 0.15, 0.1, 0.15, 0.2, 0.1], 256)
    }

    #[test]
    fn boundary_bins() {
        let q = q();
        for d in 0..ACT_DIM {
            assert_eq!(q.quantize_dim(d, q.low[d]), 0);
            assert_eq!(q.quantize_dim(d, q.high[d]), 255);
            let mid = 0.5 * (q.low[d] + q.high[d]);
            // (x + 1) / 2 * 256 = 128 exactly at the midpoint.
            assert_eq!(q.quantize_dim(d, mid), 128);
            assert!((q.dequantize_dim(d, 128) - mid).abs() <= q.bin_width(d));
        }
    }

    #[test]
    fn degenerate_dimension_maps_to_middle() {
        let mut q = q();
        q.low[2] = 0.01;
        q.high[2] = 0.01;
        assert_eq!(q.degenerate_dims(), alloc::vec![2]);
        assert_eq!(q.quantize_dim(2, 5.0), 128);
        assert_eq!(q.dequantize_dim(2, 128), 0.01);
    }

    proptest! {
        #[test]
        fn round_trip_within_one_bin(vals in proptest::array::uniform8(-0.3f64..0.3)) {
            let q = q();
            let back = q.dequantize(&q.quantize(&vals));
            for d in 0..ACT_DIM {
                let clamped = vals[d].clamp(q.low[d], q.high[d]);
                prop_assert!((back[d] - clamped).abs() <= q.bin_width(d) + 1e-15);
            }
        }
    }
}
