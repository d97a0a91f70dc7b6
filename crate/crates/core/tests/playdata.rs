use std::collections::BTreeSet;

use playclone_core::coverage::{build_grid, count_unique, coverage_curve, coverage_rate, CoverageGrid};
use playclone_core::playdata::{window_at, Dataset, Episode, EpisodeHeader, Source, WindowSampler, MAX_WINDOW, MIN_WINDOW};
use playclone_core::rng::rng_from_seed;
use playclone_core::scene::{ENV_DIM, OBS_DIM, ROBOT_DIM};
use proptest::prelude::*;
use rand::Rng;

/// Episodes of random observations whose environment coordinates take few
/// distinct values, so repeated cells are common.
fn random_dataset(seed: u64, lens: &[usize], levels: u32) -> Dataset {
    let mut rng = rng_from_seed(seed);
    let episodes = lens
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let mut e = Episode::new(EpisodeHeader::new(if i % 2 == 0 { Source::Oracle } else { Source::Cloned }, i as u64));
            for _ in 0..n {
                let mut obs = [0.0; OBS_DIM];
                for x in obs.iter_mut() {
                    *x = rng.random_range(0..levels) as f64 * 0.37 - 0.5;
                }
                e.push(obs, [0.0; 8]);
            }
            e
        })
        .collect();
    Dataset::new(episodes)
}

/// Bin by counting interior edges at or below the value.
fn slow_bin(grid: &CoverageGrid, d: usize, v: f64) -> u8 {
    let (lo, hi) = (grid.min[d], grid.max[d]);
    if v < lo {
        return 0;
    }
    if v > hi {
        return 9;
    }
    let edges = grid.edges(d);
    1 + edges[1..8].iter().filter(|&&e| e <= v && hi > lo).count() as u8
}

fn brute_force_unique(grid: &CoverageGrid, d: &Dataset) -> usize {
    let mut seen = BTreeSet::new();
    for f in d.frames() {
        let cell: Vec<u8> = (0..ENV_DIM).map(|k| slow_bin(grid, k, f.obs[ROBOT_DIM + k])).collect();
        seen.insert(cell);
    }
    seen.len()
}

#[test]
fn streaming_count_matches_brute_force_across_corpus_sizes() {
    for (i, &frames) in [1_000usize, 5_000, 20_000, 50_000, 100_000].iter().enumerate() {
        let episodes = frames / 500;
        let d = random_dataset(i as u64, &vec![500; episodes], 3 + i as u32);
        let grid = build_grid(&random_dataset(100 + i as u64, &[200], 3)).unwrap();
        let curve = coverage_curve(&[("all", &d)], &grid, 997, 30.0).unwrap();
        let brute = brute_force_unique(&grid, &d);
        assert_eq!(curve.final_unique(), brute, "corpus {i}");
        assert_eq!(count_unique(&grid, d.frames()), brute);
    }
}

#[test]
fn segment_rates_use_their_own_new_cells() {
    let a = random_dataset(1, &[300, 300], 2);
    let b = random_dataset(2, &[600], 4);
    let grid = build_grid(&a).unwrap();
    let curve = coverage_curve(&[("a", &a), ("b", &b)], &grid, 100, 30.0).unwrap();
    let both = Dataset::merge(&[&a, &b]).0;
    let ua = brute_force_unique(&grid, &a);
    let uab = brute_force_unique(&grid, &both);
    let hour = 30.0 * 3600.0;
    assert_eq!(coverage_rate(&curve, "a").unwrap(), ua as f64 / (600.0 / hour));
    assert_eq!(coverage_rate(&curve, "b").unwrap(), (uab - ua) as f64 / (600.0 / hour));
    assert!(curve.points.windows(2).all(|w| w[0].frames < w[1].frames && w[0].unique <= w[1].unique));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn curve_is_monotone_and_exact(seed in 0u64..1000, lens in proptest::collection::vec(1usize..300, 1..6), stride in 1usize..200) {
        let d = random_dataset(seed, &lens, 3);
        let grid = build_grid(&d).unwrap();
        let curve = coverage_curve(&[("x", &d)], &grid, stride, 30.0).unwrap();
        prop_assert_eq!(curve.final_unique(), brute_force_unique(&grid, &d));
        prop_assert_eq!(curve.points.last().unwrap().frames, d.frame_count());
        prop_assert!(curve.points.windows(2).all(|w| w[0].unique <= w[1].unique));
    }

    #[test]
    fn windows_are_relabeled_slices(seed in 0u64..1000, lens in proptest::collection::vec(1usize..200, 1..6)) {
        prop_assume!(lens.iter().any(|&n| n >= MIN_WINDOW));
        let d = random_dataset(seed, &lens, 50);
        let sampler = WindowSampler::new(&d).unwrap();
        let mut rng = rng_from_seed(seed);
        for _ in 0..50 {
            let w = sampler.sample(&d, &mut rng);
            prop_assert!((MIN_WINDOW..=MAX_WINDOW).contains(&w.len()));
            let ep = &d.episodes[w.episode];
            prop_assert!(w.start + w.len() <= ep.len());
            prop_assert_eq!(w.goal, w.frames[w.len() - 1].obs);
            prop_assert_eq!(w.frames, &ep.frames[w.start..w.start + w.len()]);
            prop_assert_eq!(window_at(&d, w.episode, w.start, w.len()).unwrap(), w);
        }
    }
}
