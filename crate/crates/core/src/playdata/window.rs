use alloc::vec::Vec;

use crate::scene::OBS_DIM;

use super::episode::{Dataset, Frame};

pub const MIN_WINDOW: usize = 32;
pub const MAX_WINDOW: usize = 64;

/// A contiguous slice of one episode, relabeled with its own final
/// observation as the goal.
#[derive(Clone, Debug, PartialEq)]
pub struct Window<'a> {
    pub episode: usize,
    pub start: usize,
    pub frames: &'a [Frame],
    pub goal: [f64; OBS_DIM],
}

impl Window<'_> {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum WindowError {
    #[error("no episode has at least {0} frames")]
    NoEligibleEpisode(usize),
    #[error("window [{start}, {start}+{len}) does not fit episode {episode} of length {episode_len}")]
    OutOfBounds { episode: usize, start: usize, len: usize, episode_len: usize },
}

/// Builds the window `[start, start + len)` of `episode`.
pub fn window_at(d: &Dataset, episode: usize, start: usize, len: usize) -> Result<Window<'_>, WindowError> {
    let ep = d.episodes.get(episode).ok_or(WindowError::OutOfBounds { episode, start, len, episode_len: 0 })?;
    if len == 0 || start + len > ep.len() {
        return Err(WindowError::OutOfBounds { episode, start, len, episode_len: ep.len() });
    }
    let frames = &ep.frames[start..start + len];
    let goal = frames[len - 1].obs;
    Ok(Window { episode, start, frames, goal })
}

/// Precomputed episode-selection table for repeated window draws.
///
/// Episodes are chosen with probability proportional to their number of
/// eligible starts (`len - min_len + 1`), optionally reweighted per source.
#[derive(Clone, Debug)]
pub struct WindowSampler {
    min_len: usize,
    max_len: usize,
    /// (episode index, cumulative weight)
    cumulative: Vec<(usize, f64)>,
}

impl WindowSampler {
    pub fn new(d: &Dataset) -> Result<Self, WindowError> {
        Self::with_lengths(d, MIN_WINDOW, MAX_WINDOW, None)
    }

    /// `reference_share`, when set, is the probability mass given to
    /// human / oracle episodes; the rest goes to cloned and random ones.
    pub fn with_lengths(
        d: &Dataset,
        min_len: usize,
        max_len: usize,
        reference_share: Option<f64>,
    ) -> Result<Self, WindowError> {
        assert!(min_len >= 1 && max_len >= min_len);
        let starts = |n: usize| if n >= min_len { (n - min_len + 1) as f64 } else { 0.0 };
        let mut ref_total = 0.0;
        let mut other_total = 0.0;
        for e in &d.episodes {
            if e.source().is_reference_play() {
                ref_total += starts(e.len());
            } else {
                other_total += starts(e.len());
            }
        }
        let (ref_scale, other_scale) = match reference_share {
            Some(p) if ref_total > 0.0 && other_total > 0.0 => (p / ref_total, (1.0 - p) / other_total),
            _ => (1.0, 1.0),
        };
        let mut cumulative = Vec::new();
        let mut acc = 0.0;
        for (i, e) in d.episodes.iter().enumerate() {
            let w = starts(e.len()) * if e.source().is_reference_play() { ref_scale } else { other_scale };
            if w > 0.0 {
                acc += w;
                cumulative.push((i, acc));
            }
        }
        if cumulative.is_empty() {
            return Err(WindowError::NoEligibleEpisode(min_len));
        }
        Ok(WindowSampler { min_len, max_len, cumulative })
    }

    /// Selection probability of every episode, in dataset order.
    pub fn episode_probabilities(&self, episodes: usize) -> Vec<f64> {
        let total = self.cumulative.last().map(|c| c.1).unwrap_or(1.0);
        let mut p = alloc::vec![0.0; episodes];
        let mut prev = 0.0;
        for &(i, c) in &self.cumulative {
            p[i] = (c - prev) / total;
            prev = c;
        }
        p
    }

    pub fn sample<'a, R: rand::Rng + ?Sized>(&self, d: &'a Dataset, rng: &mut R) -> Window<'a> {
        let total = self.cumulative.last().map(|c| c.1).unwrap_or(0.0);
        let u = rng.random::<f64>() * total;
        let k = self.cumulative.partition_point(|&(_, c)| c <= u).min(self.cumulative.len() - 1);
        let episode = self.cumulative[k].0;
        let n = d.episodes[episode].len();
        let len = rng.random_range(self.min_len..=self.max_len);
        let start = rng.random_range(0..=n - self.min_len);
        let len = len.min(n - start);
        window_at(d, episode, start, len).expect("sampler built for this dataset")
    }
}

/// One hindsight-relabeled window drawn from `d`.
pub fn sample_window<'a, R: rand::Rng + ?Sized>(d: &'a Dataset, rng: &mut R) -> Result<Window<'a>, WindowError> {
    Ok(WindowSampler::new(d)?.sample(d, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::playdata::{Episode, EpisodeHeader, Source};
    use crate::scene::ACT_DIM;

    fn ep(source: Source, n: usize, tag: f64) -> Episode {
        let mut e = Episode::new(EpisodeHeader::new(source, 0));
        for i in 0..n {
            let mut obs = [0.0; OBS_DIM];
            obs[0] = tag;
            obs[1] = i as f64;
            e.push(obs, [0.0; ACT_DIM]);
        }
        e
    }

    #[test]
    fn full_window_of_single_episode() {
        let d = Dataset::new(alloc::vec![ep(Source::Oracle, 64, 0.0)]);
        let w = window_at(&d, 0, 0, 64).unwrap();
        assert_eq!(w.len(), 64);
        assert_eq!(w.goal, d.episodes[0].frames[63].obs);
        // the sampler reaches the same window with positive probability
        let s = WindowSampler::new(&d).unwrap();
        let mut rng = crate::rng::rng_from_seed(0);
        let found = (0..100_000).map(|_| s.sample(&d, &mut rng)).any(|w| w.start == 0 && w.len() == 64);
        assert!(found);
    }

    #[test]
    fn short_episodes_never_sampled() {
        let d = Dataset::new(alloc::vec![ep(Source::Oracle, 31, 1.0), ep(Source::Oracle, 40, 2.0)]);
        let mut rng = crate::rng::rng_from_seed(1);
        for _ in 0..2_000 {
            let w = sample_window(&d, &mut rng).unwrap();
            assert_eq!(w.frames[0].obs[0], 2.0);
        }
        let d = Dataset::new(alloc::vec![ep(Source::Oracle, 31, 1.0)]);
        assert_eq!(sample_window(&d, &mut rng).unwrap_err(), WindowError::NoEligibleEpisode(32));
    }

    #[test]
    fn relabel_invariant_holds() {
        let d = Dataset::new((0..7).map(|i| ep(Source::Oracle, 32 + 17 * i, i as f64)).collect());
        let s = WindowSampler::new(&d).unwrap();
        let mut rng = crate::rng::rng_from_seed(2);
        for _ in 0..10_000 {
            let w = s.sample(&d, &mut rng);
            assert!((MIN_WINDOW..=MAX_WINDOW).contains(&w.len()));
            assert_eq!(w.goal, w.frames.last().unwrap().obs);
            assert!(w.frames.windows(2).all(|p| p[1].tick == p[0].tick + 1));
        }
    }

    #[test]
    fn reference_share_reweights_sources() {
        let d = Dataset::new(alloc::vec![ep(Source::Oracle, 100, 0.0), ep(Source::Cloned, 1000, 1.0)]);
        let s = WindowSampler::with_lengths(&d, 32, 64, Some(0.5)).unwrap();
        let p = s.episode_probabilities(2);
        assert!((p[0] - 0.5).abs() < 1e-12);
        let s = WindowSampler::new(&d).unwrap();
        let p = s.episode_probabilities(2);
        assert!((p[0] - 69.0 / (69.0 + 969.0)).abs() < 1e-12);
    }
}
