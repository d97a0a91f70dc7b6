//! Quantized state-space coverage of the environment coordinates.
//!
//! Each of the 11 environment dimensions is split into 10 bins: 8 equal-width
//! inner bins over the reference data's `[min, max]`, plus one bin below and
//! one above. Coverage is the number of distinct 11-tuples visited.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use hashbrown::HashSet;

use crate::playdata::{Dataset, Frame};
use crate::scene::{EnvState, ENV_DIM, ROBOT_DIM};

pub const BINS_PER_DIM: usize = 10;
pub const INNER_BINS: usize = 8;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum CoverageError {
    #[error("coverage grid needs a non-empty reference dataset")]
    EmptyReference,
    #[error("coverage curve needs at least one segment, the first non-empty")]
    EmptySegments,
    #[error("segment {0:?} has zero duration")]
    ZeroDuration(String),
    #[error("no segment named {0:?}")]
    UnknownSegment(String),
}

/// Bin edges for the 11 environment dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct CoverageGrid {
    pub min: [f64; ENV_DIM],
    pub max: [f64; ENV_DIM],
}

impl CoverageGrid {
    /// Total number of cells, `10^11`.
    pub fn cardinality(&self) -> u64 {
        (BINS_PER_DIM as u64).pow(ENV_DIM as u32)
    }

    /// Dimensions whose reference range collapsed to a point.
    pub fn degenerate_dims(&self) -> Vec<usize> {
        (0..ENV_DIM).filter(|&d| !(self.max[d] > self.min[d])).collect()
    }

    /// The 9 edges of dimension `d`.
    pub fn edges(&self, d: usize) -> [f64; INNER_BINS + 1] {
        let mut e = [0.0; INNER_BINS + 1];
        for (i, x) in e.iter_mut().enumerate() {
            *x = self.min[d] + (self.max[d] - self.min[d]) * i as f64 / INNER_BINS as f64;
        }
        e
    }

    /// Bin of `value` along dimension `d`. Inner bins are lower-inclusive;
    /// the maximum itself lands in bin 8.
    pub fn bin(&self, d: usize, value: f64) -> u8 {
        let (lo, hi) = (self.min[d], self.max[d]);
        if value < lo {
            return 0;
        }
        if value > hi {
            return (BINS_PER_DIM - 1) as u8;
        }
        if !(hi > lo) {
            return 1;
        }
        let k = libm::floor((value - lo) / (hi - lo) * INNER_BINS as f64) as usize;
        (k.min(INNER_BINS - 1) + 1) as u8
    }

    pub fn quantize_env(&self, env: &[f64; ENV_DIM]) -> [u8; ENV_DIM] {
        let mut out = [0u8; ENV_DIM];
        for d in 0..ENV_DIM {
            out[d] = self.bin(d, env[d]);
        }
        out
    }

    pub fn key_of_obs(&self, obs: &[f64]) -> u64 {
        let mut env = [0.0; ENV_DIM];
        env.copy_from_slice(&obs[ROBOT_DIM..ROBOT_DIM + ENV_DIM]);
        pack_key(&self.quantize_env(&env))
    }
}

/// Grid from the extrema of the reference data's environment coordinates.
pub fn build_grid(reference: &Dataset) -> Result<CoverageGrid, CoverageError> {
    let mut min = [f64::INFINITY; ENV_DIM];
    let mut max = [f64::NEG_INFINITY; ENV_DIM];
    let mut any = false;
    for f in reference.frames() {
        any = true;
        for d in 0..ENV_DIM {
            let v = f.obs[ROBOT_DIM + d];
            min[d] = min[d].min(v);
            max[d] = max[d].max(v);
        }
    }
    if !any {
        return Err(CoverageError::EmptyReference);
    }
    Ok(CoverageGrid { min, max })
}

pub fn quantize_env_state(s: &EnvState, grid: &CoverageGrid) -> [u8; ENV_DIM] {
    grid.quantize_env(&s.env_part())
}

/// Packs 11 bin indices into 44 bits, 4 bits per dimension.
pub fn pack_key(bins: &[u8; ENV_DIM]) -> u64 {
    bins.iter().enumerate().fold(0u64, |k, (d, &b)| k | ((b as u64 & 0xF) << (4 * d)))
}

pub fn unpack_key(key: u64) -> [u8; ENV_DIM] {
    let mut out = [0u8; ENV_DIM];
    for (d, b) in out.iter_mut().enumerate() {
        *b = ((key >> (4 * d)) & 0xF) as u8;
    }
    out
}

/// Distinct cells visited by `frames`.
pub fn count_unique<'a, I: IntoIterator<Item = &'a Frame>>(grid: &CoverageGrid, frames: I) -> usize {
    let mut seen = HashSet::new();
    for f in frames {
        seen.insert(grid.key_of_obs(&f.obs));
    }
    seen.len()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurvePoint {
    /// Cumulative frames processed.
    pub frames: usize,
    pub unique: usize,
    pub segment: String,
}

/// Cumulative unique-cell counts while streaming segments in order.
#[derive(Clone, Debug, PartialEq)]
pub struct CoverageCurve {
    pub hz: f64,
    pub points: Vec<CurvePoint>,
    /// One span per input segment, in order.
    pub segments: Vec<SegmentSpan>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SegmentSpan {
    pub tag: String,
    pub start_frame: usize,
    pub end_frame: usize,
    pub unique_before: usize,
    pub unique_after: usize,
}

impl CoverageCurve {
    pub fn final_unique(&self) -> usize {
        self.segments.last().map_or(0, |s| s.unique_after)
    }

    pub fn hours(&self, frames: usize) -> f64 {
        frames as f64 / (self.hz * 3600.0)
    }
}

/// Streams `segments` in order and records the cumulative unique count every
/// `stride` frames and at each segment end.
pub fn coverage_curve(
    segments: &[(&str, &Dataset)],
    grid: &CoverageGrid,
    stride: usize,
    hz: f64,
) -> Result<CoverageCurve, CoverageError> {
    match segments.first() {
        Some((_, d)) if d.frame_count() > 0 => {}
        _ => return Err(CoverageError::EmptySegments),
    }
    let stride = stride.max(1);
    let mut seen = HashSet::new();
    let mut points = Vec::new();
    let mut spans = Vec::new();
    let mut frames = 0usize;
    for (tag, d) in segments {
        let start_frame = frames;
        let unique_before = seen.len();
        for f in d.frames() {
            seen.insert(grid.key_of_obs(&f.obs));
            frames += 1;
            if frames % stride == 0 {
                points.push(CurvePoint { frames, unique: seen.len(), segment: tag.to_string() });
            }
        }
        if frames % stride != 0 || frames == start_frame {
            points.push(CurvePoint { frames, unique: seen.len(), segment: tag.to_string() });
        }
        spans.push(SegmentSpan {
            tag: tag.to_string(),
            start_frame,
            end_frame: frames,
            unique_before,
            unique_after: seen.len(),
        });
    }
    Ok(CoverageCurve { hz, points, segments: spans })
}

/// New unique cells per hour of the named segment.
pub fn coverage_rate(curve: &CoverageCurve, segment: &str) -> Result<f64, CoverageError> {
    let span = curve
        .segments
        .iter()
        .find(|s| s.tag == segment)
        .ok_or_else(|| CoverageError::UnknownSegment(segment.to_string()))?;
    let frames = span.end_frame - span.start_frame;
    if frames == 0 {
        return Err(CoverageError::ZeroDuration(segment.to_string()));
    }
    Ok((span.unique_after - span.unique_before) as f64 / curve.hours(frames))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::playdata::{Episode, EpisodeHeader, Source};
    use crate::scene::{ACT_DIM, OBS_DIM};

    fn grid_0_8() -> CoverageGrid {
        CoverageGrid { min: [0.0; ENV_DIM], max: [8.0; ENV_DIM] }
    }

    #[test]
    fn edge_arithmetic() {
        let g = grid_0_8();
        assert_eq!(g.edges(0), [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        assert_eq!(g.bin(0, -0.5), 0);
        assert_eq!(g.bin(0, 8.5), 9);
        assert_eq!(g.bin(0, 0.0), 1);
        assert_eq!(g.bin(0, 1.0), 2);
        assert_eq!(g.bin(0, 7.999), 8);
        assert_eq!(g.bin(0, 8.0), 8);
        assert_eq!(g.cardinality(), 100_000_000_000);
    }

    #[test]
    fn degenerate_dimension_collapses() {
        let mut g = grid_0_8();
        g.max[3] = 0.0;
        assert_eq!(g.degenerate_dims(), alloc::vec![3]);
        assert_eq!(g.bin(3, 0.0), 1);
        assert_eq!(g.bin(3, -1.0), 0);
        assert_eq!(g.bin(3, 1.0), 9);
    }

    #[test]
    fn keys_round_trip() {
        let b = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9];
        assert_eq!(unpack_key(pack_key(&b)), b);
        assert!(pack_key(&[9; ENV_DIM]) < 1 << 44);
    }

    fn const_dataset(n: usize) -> Dataset {
        let mut e = Episode::new(EpisodeHeader::new(Source::Oracle, 0));
        for _ in 0..n {
            e.push([0.5; OBS_DIM], [0.0; ACT_DIM]);
        }
        Dataset::new(alloc::vec![e])
    }

    #[test]
    fn identical_frames_count_once() {
        let d = const_dataset(500);
        let g = build_grid(&d).unwrap();
        let c = coverage_curve(&[("a", &d)], &g, 100, 30.0).unwrap();
        assert_eq!(c.final_unique(), 1);
        assert_eq!(c.points.len(), 5);
        assert_eq!(coverage_rate(&c, "a").unwrap(), 1.0 / (500.0 / 108_000.0));
        let one = const_dataset(1);
        assert_eq!(coverage_curve(&[("a", &one)], &g, 100, 30.0).unwrap().final_unique(), 1);
    }

    #[test]
    fn empty_inputs_rejected() {
        let d = Dataset::default();
        assert_eq!(build_grid(&d), Err(CoverageError::EmptyReference));
        let g = grid_0_8();
        assert_eq!(coverage_curve(&[("a", &d)], &g, 10, 30.0), Err(CoverageError::EmptySegments));
        let full = const_dataset(3);
        let c = coverage_curve(&[("a", &full), ("b", &d)], &g, 10, 30.0).unwrap();
        assert_eq!(coverage_rate(&c, "b"), Err(CoverageError::ZeroDuration("b".into())));
        assert!(matches!(coverage_rate(&c, "zzz"), Err(CoverageError::UnknownSegment(_))));
    }
}
