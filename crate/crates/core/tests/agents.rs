use std::collections::BTreeMap;

use playclone_core::agents::{
    collect_play, collect_play_logged, random_act, Agent, CollectPolicy, OracleConfig, Primitive, RandomPolicyStats,
    ScriptedExpert,
};
use playclone_core::coverage::{build_grid, count_unique};
use playclone_core::playdata::compute_norm_stats;
use playclone_core::rng::rng_from_seed;
use playclone_core::sim::step_state;
use playclone_core::tasks::{make_task_instance, task_success};
use playclone_core::{SceneConfig, TaskId, ACT_DIM};

fn expert_success(scene: &SceneConfig, task: TaskId, seed: u64) -> bool {
    let inst = make_task_instance(scene, task, seed);
    let mut agent = ScriptedExpert::new(scene.clone(), task);
    agent.begin(&inst.initial, &inst.goal);
    let mut traj = vec![inst.initial];
    let mut s = inst.initial;
    for _ in 0..inst.budget {
        s = step_state(scene, &s, &agent.act(&s));
        traj.push(s);
    }
    task_success(scene, task, &traj).unwrap()
}

#[test]
fn scripted_experts_solve_every_task() {
    let scene = SceneConfig::default();
    for task in TaskId::ALL {
        let wins = (0..100).filter(|&seed| expert_success(&scene, task, seed)).count();
        assert!(wins >= 95, "{task}: {wins}/100");
    }
}

#[test]
fn oracle_play_uses_every_primitive() {
    let scene = SceneConfig::default();
    let (d, log) = collect_play_logged(&scene, &CollectPolicy::Oracle(OracleConfig::default()), 32.0, 1.0, 11);
    assert_eq!(d.frame_count(), 57_600);
    let mut counts: BTreeMap<Primitive, usize> = BTreeMap::new();
    for t in &log {
        *counts.entry(t.primitive).or_default() += 1;
    }
    for p in Primitive::CATALOG {
        let n = counts.get(&p).copied().unwrap_or(0);
        assert!(n >= 10, "{p} appeared {n} times: {counts:?}");
    }
}

#[test]
fn collection_is_reproducible() {
    let scene = SceneConfig::default();
    let a = collect_play(&scene, &CollectPolicy::Oracle(OracleConfig::default()), 1.0, 0.5, 3);
    let b = collect_play(&scene, &CollectPolicy::Oracle(OracleConfig::default()), 1.0, 0.5, 3);
    assert_eq!(a, b);
}

#[test]
fn random_moments_match_within_three_standard_errors() {
    let stats = RandomPolicyStats {
        mean: [0.01, -0.02, 0.0, 0.05, -0.05, 0.0, 0.1, -0.1],
        std: [0.02, 0.01, 0.03, 0.05, 0.05, 0.1, 0.2, 0.15],
        clip_low: [-100.0; ACT_DIM],
        clip_high: [100.0; ACT_DIM],
    };
    let n = 100_000;
    let mut rng = rng_from_seed(17);
    let draws: Vec<[f64; ACT_DIM]> = (0..n).map(|_| random_act(&stats, &mut rng).to_array()).collect();
    for d in 0..ACT_DIM {
        let m = draws.iter().map(|a| a[d]).sum::<f64>() / n as f64;
        let v = draws.iter().map(|a| (a[d] - m).powi(2)).sum::<f64>() / n as f64;
        let se_mean = stats.std[d] / (n as f64).sqrt();
        // Std of the sample std of a normal is about sigma / sqrt(2n).
        let se_std = stats.std[d] / (2.0 * n as f64).sqrt();
        assert!((m - stats.mean[d]).abs() <= 3.0 * se_mean, "dim {d} mean {m}");
        assert!((v.sqrt() - stats.std[d]).abs() <= 3.0 * se_std, "dim {d} std {}", v.sqrt());
    }
}

#[test]
fn oracle_covers_more_than_random() {
    let scene = SceneConfig::default();
    let oracle = collect_play(&scene, &CollectPolicy::Oracle(OracleConfig::default()), 32.0, 1.0, 5);
    let stats = RandomPolicyStats::from_norm_stats(&compute_norm_stats(&oracle).unwrap());
    let random = collect_play(&scene, &CollectPolicy::Random(stats), 32.0, 1.0, 5);
    assert_eq!(random.frame_count(), oracle.frame_count());
    let grid = build_grid(&oracle).unwrap();
    let a = count_unique(&grid, oracle.frames());
    let b = count_unique(&grid, random.frames());
    assert!(a > b, "oracle {a} random {b}");
}
