use alloc::vec::Vec;

use crate::playdata::{Dataset, Episode, EpisodeHeader, Source};
use crate::rng::{derive_named, rng_from_seed};
use crate::scene::SceneConfig;
use crate::sim::{sample_rest_state, step_state};

use super::oracle::{OracleAgent, OracleConfig};
use super::primitives::Primitive;
use super::random::{random_act, RandomPolicyStats};

/// Which generator produces the play.
#[derive(Clone, Debug)]
pub enum CollectPolicy {
    Oracle(OracleConfig),
    Random(RandomPolicyStats),
}

impl CollectPolicy {
    pub fn source(&self) -> Source {
        match self {
            CollectPolicy::Oracle(_) => Source::Oracle,
            CollectPolicy::Random(_) => Source::Random,
        }
    }
}

/// One primitive switch of the oracle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Transition {
    pub episode: usize,
    pub tick: u64,
    pub primitive: Primitive,
}

/// Generates play for `minutes` of simulated time split into episodes of
/// `episode_minutes` (the last one truncated). Episode `i` starts from a rest
/// state seeded with `derive_named(seed, "episode", i)`.
pub fn collect_play(scene: &SceneConfig, policy: &CollectPolicy, minutes: f64, episode_minutes: f64, seed: u64) -> Dataset {
    collect_play_logged(scene, policy, minutes, episode_minutes, seed).0
}

/// Frame counts of each episode.
pub fn episode_lengths(scene: &SceneConfig, minutes: f64, episode_minutes: f64) -> Vec<usize> {
    assert!(minutes > 0.0 && episode_minutes > 0.0, "durations must be positive");
    let per_min = scene.ticks_per_minute() as f64;
    let total = libm::round(minutes * per_min) as usize;
    let per_ep = (libm::round(episode_minutes * per_min) as usize).max(1);
    let count = libm::ceil(minutes / episode_minutes - 1e-9) as usize;
    let mut out = Vec::with_capacity(count);
    let mut left = total;
    for _ in 0..count {
        let n = per_ep.min(left);
        if n == 0 {
            break;
        }
        out.push(n);
        left -= n;
    }
    out
}

pub fn collect_play_logged(
    scene: &SceneConfig,
    policy: &CollectPolicy,
    minutes: f64,
    episode_minutes: f64,
    seed: u64,
) -> (Dataset, Vec<Transition>) {
    let lengths = episode_lengths(scene, minutes, episode_minutes);
    let mut episodes = Vec::with_capacity(lengths.len());
    let mut transitions = Vec::new();
    for (i, &n) in lengths.iter().enumerate() {
        let ep_seed = derive_named(seed, "episode", i as u64);
        let (ep, log) = collect_episode(scene, policy, n, ep_seed);
        transitions.extend(log.into_iter().map(|(tick, primitive)| Transition { episode: i, tick, primitive }));
        episodes.push(ep);
    }
    (Dataset::new(episodes), transitions)
}

/// A single episode of `frames` ticks from the rest state drawn with `seed`.
pub fn collect_episode(scene: &SceneConfig, policy: &CollectPolicy, frames: usize, seed: u64) -> (Episode, Vec<(u64, Primitive)>) {
    let mut s = sample_rest_state(scene, &mut rng_from_seed(seed));
    let mut ep = Episode::new(EpisodeHeader::new(policy.source(), seed));
    match policy {
        CollectPolicy::Oracle(cfg) => {
            let cfg = OracleConfig { seed: derive_named(seed, "oracle", 0), ..cfg.clone() };
            let mut agent = OracleAgent::new(scene.clone(), cfg);
            for _ in 0..frames {
                let a = agent.oracle_act(&s);
                ep.push(s.to_array(), a.to_array());
                s = step_state(scene, &s, &a);
            }
            (ep, agent.transitions().to_vec())
        }
        CollectPolicy::Random(stats) => {
            let mut rng = rng_from_seed(derive_named(seed, "random", 0));
            for _ in 0..frames {
                let a = scene.clamp_action(&random_act(stats, &mut rng));
                ep.push(s.to_array(), a.to_array());
                s = step_state(scene, &s, &a);
            }
            (ep, Vec::new())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lengths_cover_the_budget() {
        let scene = SceneConfig::default();
        assert_eq!(episode_lengths(&scene, 32.0, 1.0), alloc::vec![1800; 32]);
        let l = episode_lengths(&scene, 2.5, 1.0);
        assert_eq!(l, alloc::vec![1800, 1800, 900]);
        assert_eq!(episode_lengths(&scene, 0.1, 1.0), alloc::vec![180]);
    }

    #[test]
    fn oracle_episodes_validate() {
        let scene = SceneConfig::default();
        let d = collect_play(&scene, &CollectPolicy::Oracle(OracleConfig::default()), 0.5, 0.2, 1);
        assert_eq!(d.frame_count(), 900);
        assert_eq!(d.episodes.len(), 3);
        for e in &d.episodes {
            e.validate_with_scene(&scene).unwrap();
        }
    }
}
