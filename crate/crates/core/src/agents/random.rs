use rand_distr::{Distribution, StandardNormal};

use crate::playdata::NormStats;
use crate::rng::{rng_from_seed, Rng};
use crate::scene::{Action, EnvState, ACT_DIM};

use super::Agent;

/// Gaussian action model matched to a reference play dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomPolicyStats {
    pub mean: [f64; ACT_DIM],
    pub std: [f64; ACT_DIM],
    pub clip_low: [f64; ACT_DIM],
    pub clip_high: [f64; ACT_DIM],
}

impl RandomPolicyStats {
    /// Moments of the reference actions, clipped to their observed range.
    pub fn from_norm_stats(stats: &NormStats) -> Self {
        RandomPolicyStats {
            mean: stats.act_mean(),
            std: stats.act_std(),
            clip_low: stats.act_min(),
            clip_high: stats.act_max(),
        }
    }
}

/// One draw from `Normal(mean_d, std_d)` per coordinate, clamped to the clip
/// bounds.
pub fn random_act<R: rand::Rng + ?Sized>(stats: &RandomPolicyStats, rng: &mut R) -> Action {
    let mut a = [0.0; ACT_DIM];
    for d in 0..ACT_DIM {
        let z: f64 = StandardNormal.sample(rng);
        let x = stats.mean[d] + stats.std[d] * z;
        a[d] = x.max(stats.clip_low[d]).min(stats.clip_high[d]);
    }
    Action::from_array(&a)
}

/// Stateless random exploration as an [`Agent`].
#[derive(Clone, Debug)]
pub struct RandomAgent {
    pub stats: RandomPolicyStats,
    rng: Rng,
}

impl RandomAgent {
    pub fn new(stats: RandomPolicyStats, seed: u64) -> Self {
        RandomAgent { stats, rng: rng_from_seed(seed) }
    }
}

impl Agent for RandomAgent {
    fn begin(&mut self, _initial: &EnvState, _goal: &EnvState) {}

    fn act(&mut self, _s: &EnvState) -> Action {
        random_act(&self.stats, &mut self.rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(std: f64) -> RandomPolicyStats {
        RandomPolicyStats {
            mean: [0.01, -0.02, 0.0, 0.05, -0.05, 0.0, 0.1, -0.1],
            std: [std; ACT_DIM],
            clip_low: [-10.0; ACT_DIM],
            clip_high: [10.0; ACT_DIM],
        }
    }

    #[test]
    fn zero_std_returns_mean() {
        let s = stats(0.0);
        let mut rng = rng_from_seed(3);
        for _ in 0..10 {
            assert_eq!(random_act(&s, &mut rng).to_array(), s.mean);
        }
    }

    #[test]
    fn draws_respect_clip_bounds() {
        let mut s = stats(1.0);
        s.clip_low = [-0.05; ACT_DIM];
        s.clip_high = [0.07; ACT_DIM];
        let mut rng = rng_from_seed(4);
        for _ in 0..10_000 {
            let a = random_act(&s, &mut rng).to_array();
            assert!(a.iter().all(|&x| (-0.05..=0.07).contains(&x)));
        }
    }
}
