use crate::scene::{ACT_DIM, OBS_DIM};

use super::episode::{Dataset, Frame};

/// Observation dims followed by action dims.
pub const STATS_DIM: usize = OBS_DIM + ACT_DIM;

/// Population moments and extrema of every observation and action coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct NormStats {
    pub mean: [f64; STATS_DIM],
    pub std: [f64; STATS_DIM],
    pub min: [f64; STATS_DIM],
    pub max: [f64; STATS_DIM],
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("cannot compute statistics of an empty dataset")]
    Empty,
}

fn row(f: &Frame) -> [f64; STATS_DIM] {
    let mut r = [0.0; STATS_DIM];
    r[..OBS_DIM].copy_from_slice(&f.obs);
    r[OBS_DIM..].copy_from_slice(&f.act);
    r
}

impl NormStats {
    pub fn obs_mean(&self) -> &[f64] {
        &self.mean[..OBS_DIM]
    }

    pub fn obs_std(&self) -> &[f64] {
        &self.std[..OBS_DIM]
    }

    pub fn act_mean(&self) -> [f64; ACT_DIM] {
        let mut a = [0.0; ACT_DIM];
        a.copy_from_slice(&self.mean[OBS_DIM..]);
        a
    }

    pub fn act_std(&self) -> [f64; ACT_DIM] {
        let mut a = [0.0; ACT_DIM];
        a.copy_from_slice(&self.std[OBS_DIM..]);
        a
    }

    pub fn act_min(&self) -> [f64; ACT_DIM] {
        let mut a = [0.0; ACT_DIM];
        a.copy_from_slice(&self.min[OBS_DIM..]);
        a
    }

    pub fn act_max(&self) -> [f64; ACT_DIM] {
        let mut a = [0.0; ACT_DIM];
        a.copy_from_slice(&self.max[OBS_DIM..]);
        a
    }

    /// Two streaming passes over `frames`: mean and extrema, then variance.
    pub fn from_frames<'a, I>(frames: I) -> Result<Self, StatsError>
    where
        I: Iterator<Item = &'a Frame> + Clone,
    {
        let mut sum = [0.0; STATS_DIM];
        let mut min = [f64::INFINITY; STATS_DIM];
        let mut max = [f64::NEG_INFINITY; STATS_DIM];
        let mut count = 0usize;
        for f in frames.clone() {
            let r = row(f);
            for d in 0..STATS_DIM {
                sum[d] += r[d];
                min[d] = min[d].min(r[d]);
                max[d] = max[d].max(r[d]);
            }
            count += 1;
        }
        if count == 0 {
            return Err(StatsError::Empty);
        }
        let n = count as f64;
        let mut mean = [0.0; STATS_DIM];
        for d in 0..STATS_DIM {
            // Rounding can push the mean a hair outside [min, max] on constant data.
            mean[d] = (sum[d] / n).clamp(min[d], max[d]);
        }
        let mut sq = [0.0; STATS_DIM];
        for f in frames {
            let r = row(f);
            for d in 0..STATS_DIM {
                let c = r[d] - mean[d];
                sq[d] += c * c;
            }
        }
        let mut std = [0.0; STATS_DIM];
        for d in 0..STATS_DIM {
            std[d] = libm::sqrt(sq[d] / n);
        }
        Ok(NormStats { mean, std, min, max, count })
    }
}

pub fn compute_norm_stats(d: &Dataset) -> Result<NormStats, StatsError> {
    NormStats::from_frames(d.frames())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::playdata::{Episode, EpisodeHeader, Source};
    use alloc::vec::Vec;
    use rand::Rng as _;

    fn dataset_from_rows(rows: &[[f64; STATS_DIM]], per_episode: usize) -> Dataset {
        let mut eps = Vec::new();
        for chunk in rows.chunks(per_episode) {
            let mut e = Episode::new(EpisodeHeader::new(Source::Oracle, 0));
            for r in chunk {
                let mut obs = [0.0; OBS_DIM];
                let mut act = [0.0; ACT_DIM];
                obs.copy_from_slice(&r[..OBS_DIM]);
                act.copy_from_slice(&r[OBS_DIM..]);
                e.push(obs, act);
            }
            eps.push(e);
        }
        Dataset::new(eps)
    }

    #[test]
    fn identical_frames_have_zero_std() {
        let rows = [[0.25; STATS_DIM]; 10];
        let s = compute_norm_stats(&dataset_from_rows(&rows, 4)).unwrap();
        for d in 0..STATS_DIM {
            assert_eq!(s.std[d], 0.0);
            assert_eq!(s.min[d], s.mean[d]);
            assert_eq!(s.max[d], s.mean[d]);
        }
    }

    #[test]
    fn two_frames_hand_arithmetic() {
        let mut a = [0.0; STATS_DIM];
        let mut b = [0.0; STATS_DIM];
        a[3] = 0.0;
        b[3] = 2.0;
        a[OBS_DIM + 1] = 0.0;
        b[OBS_DIM + 1] = 2.0;
        let s = compute_norm_stats(&dataset_from_rows(&[a, b], 1)).unwrap();
        for d in [3, OBS_DIM + 1] {
            assert_eq!(s.mean[d], 1.0);
            assert_eq!(s.min[d], 0.0);
            assert_eq!(s.max[d], 2.0);
            assert_eq!(s.std[d], 1.0);
        }
    }

    #[test]
    fn empty_dataset_errors() {
        assert_eq!(compute_norm_stats(&Dataset::default()), Err(StatsError::Empty));
    }

    #[test]
    fn streaming_matches_in_memory_oracle() {
        let mut rng = crate::rng::rng_from_seed(5);
        let rows: Vec<[f64; STATS_DIM]> = (0..5_000)
            .map(|_| {
                let mut r = [0.0; STATS_DIM];
                for (d, x) in r.iter_mut().enumerate() {
                    *x = rng.random_range(-1.0..1.0) * (d as f64 + 1.0) + d as f64;
                }
                r
            })
            .collect();
        let s = compute_norm_stats(&dataset_from_rows(&rows, 333)).unwrap();
        // In-memory oracle: gather each column, then textbook formulas.
        for d in 0..STATS_DIM {
            let col: Vec<f64> = rows.iter().map(|r| r[d]).collect();
            let n = col.len() as f64;
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
            let lo = col.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert!((s.mean[d] - mean).abs() <= 1e-12 * (1.0 + mean.abs()));
            assert!((s.std[d] - libm::sqrt(var)).abs() <= 1e-12 * (1.0 + var));
            assert_eq!(s.min[d], lo);
            assert_eq!(s.max[d], hi);
            assert!(s.min[d] <= s.mean[d] && s.mean[d] <= s.max[d]);
        }
    }
}
