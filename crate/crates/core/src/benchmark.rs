//! The 18-task evaluation harness and the experiment sweeps built on it.

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::agents::{collect_play, Agent, CollectPolicy, OracleConfig, RandomPolicyStats};
use crate::coverage::{build_grid, count_unique};
use crate::pipeline::{
    generate_cloned_play, rollout_goal_batch, train_lfp, train_play_bc, CloneConfig, Decode, GoalRollout, PipelineError, Policy,
    TrainConfig,
};
use crate::playdata::{compute_norm_stats, Dataset};
use crate::rng::{derive_named, mix64};
use crate::scene::SceneConfig;
use crate::tasks::{achieved, make_task_instance, TaskId, TaskInstance};

pub const TASK_COUNT: usize = 18;

#[derive(Clone, Debug, PartialEq)]
pub struct EvalConfig {
    pub trials_per_task: usize,
    pub decode: Decode,
    pub seed: u64,
    /// Overrides the scene's task budget when set.
    pub budget: Option<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { trials_per_task: 50, decode: Decode::EVAL_DEFAULT, seed: 0, budget: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TaskResult {
    pub task: TaskId,
    pub successes: usize,
    pub trials: usize,
}

impl TaskResult {
    pub fn rate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.successes as f64 / self.trials as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    /// In benchmark order.
    pub tasks: Vec<TaskResult>,
    /// Mean of the per-task rates.
    pub average: f64,
    /// Binomial standard error of `average`.
    pub stderr: f64,
    pub fingerprint: u64,
    pub seeds: Vec<u64>,
}

impl EvalReport {
    pub fn from_results(tasks: Vec<TaskResult>, fingerprint: u64, seeds: Vec<u64>) -> Self {
        let n = tasks.len().max(1) as f64;
        let average = tasks.iter().map(TaskResult::rate).sum::<f64>() / n;
        let var: f64 = tasks
            .iter()
            .filter(|t| t.trials > 0)
            .map(|t| t.rate() * (1.0 - t.rate()) / t.trials as f64)
            .sum();
        EvalReport { tasks, average, stderr: libm::sqrt(var) / n, fingerprint, seeds }
    }

    pub fn rate(&self, task: TaskId) -> Option<f64> {
        self.tasks.iter().find(|t| t.task == task).map(TaskResult::rate)
    }
}

/// Instance `trial` of `task` under the eval seed.
pub fn eval_instance(scene: &SceneConfig, cfg: &EvalConfig, task: TaskId, trial: usize) -> TaskInstance {
    let mut inst = make_task_instance(scene, task, derive_named(cfg.seed, task.name(), trial as u64));
    if let Some(b) = cfg.budget {
        inst.budget = b;
    }
    inst
}

fn fold_hash(h: u64, x: u64) -> u64 {
    mix64(h ^ x)
}

/// Digest of a policy's weights, transforms and the eval settings.
pub fn fingerprint(policy: &Policy, cfg: &EvalConfig) -> u64 {
    let spec = policy.params.spec;
    let mut h = 0x5EED_u64;
    for x in [spec.input_width, spec.layers, spec.width, spec.components, spec.action_dims, spec.bins] {
        h = fold_hash(h, x as u64);
    }
    for x in policy.params.values.iter().chain(&policy.obs_mean).chain(&policy.obs_scale).chain(&policy.quantizer.low).chain(&policy.quantizer.high) {
        h = fold_hash(h, x.to_bits());
    }
    h = fold_hash(h, cfg.trials_per_task as u64);
    h = fold_hash(h, cfg.seed);
    h = fold_hash(h, cfg.budget.map_or(u64::MAX, |b| b as u64));
    match cfg.decode {
        Decode::Greedy => fold_hash(h, 1),
        Decode::Sample { temperature } => fold_hash(fold_hash(h, 2), temperature.to_bits()),
    }
}

/// Runs every task `trials_per_task` times with the goal-conditioned policy.
/// Success means the task predicate held at some tick within the budget.
pub fn run_eval(policy: &Policy, scene: &SceneConfig, cfg: &EvalConfig) -> Result<EvalReport, PipelineError> {
    let mut rollouts = Vec::with_capacity(TASK_COUNT * cfg.trials_per_task);
    let mut tasks = Vec::with_capacity(rollouts.capacity());
    for task in TaskId::ALL {
        for trial in 0..cfg.trials_per_task {
            let inst = eval_instance(scene, cfg, task, trial);
            let seed = derive_named(cfg.seed, "rollout", (task.index() * cfg.trials_per_task + trial) as u64);
            rollouts.push(GoalRollout { initial: inst.initial, goal: inst.goal, budget: inst.budget, seed });
            tasks.push(task);
        }
    }
    let trajectories = rollout_goal_batch(policy, scene, &rollouts, cfg.decode)?;
    let mut results: Vec<TaskResult> = TaskId::ALL.iter().map(|&task| TaskResult { task, successes: 0, trials: 0 }).collect();
    for (task, traj) in tasks.iter().zip(&trajectories) {
        let r = &mut results[task.index()];
        r.trials += 1;
        if traj.iter().any(|s| achieved(scene, *task, &traj[0], s)) {
            r.successes += 1;
        }
    }
    Ok(EvalReport::from_results(results, fingerprint(policy, cfg), alloc::vec![cfg.seed]))
}

/// The same protocol with a non-learned controller per trial.
pub fn run_eval_agents(scene: &SceneConfig, cfg: &EvalConfig, mut make: impl FnMut(TaskId, usize) -> Box<dyn Agent>) -> EvalReport {
    let mut results = Vec::with_capacity(TASK_COUNT);
    for task in TaskId::ALL {
        let mut successes = 0;
        for trial in 0..cfg.trials_per_task {
            let inst = eval_instance(scene, cfg, task, trial);
            let mut agent = make(task, trial);
            agent.begin(&inst.initial, &inst.goal);
            let mut s = inst.initial;
            let mut hit = achieved(scene, task, &inst.initial, &s);
            for _ in 0..inst.budget {
                if hit {
                    break;
                }
                let a = agent.act(&s);
                s = crate::sim::step_state(scene, &s, &a);
                hit = achieved(scene, task, &inst.initial, &s);
            }
            successes += hit as usize;
        }
        results.push(TaskResult { task, successes, trials: cfg.trials_per_task });
    }
    EvalReport::from_results(results, fold_hash(cfg.seed, cfg.trials_per_task as u64), alloc::vec![cfg.seed])
}

/// Everything one run of the pipeline needs besides the master seed.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub scene: SceneConfig,
    pub oracle: OracleConfig,
    /// Reference play budget and its episode length.
    pub human_minutes: f64,
    pub human_episode_minutes: f64,
    pub bc: TrainConfig,
    pub lfp: TrainConfig,
    /// Episode length, decoding and lanes for cloning; the episode count is
    /// set per sweep point.
    pub clone: CloneConfig,
    /// Cloned-play budget for the sweeps that do not vary it.
    pub clone_hours: f64,
    pub eval: EvalConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scene: SceneConfig::default(),
            oracle: OracleConfig::default(),
            human_minutes: 30.0,
            human_episode_minutes: 1.0,
            bc: TrainConfig::default(),
            lfp: TrainConfig::default(),
            clone: CloneConfig::default(),
            clone_hours: 10.0,
            eval: EvalConfig::default(),
        }
    }
}

/// Child seeds of one pipeline run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunSeeds {
    pub collect: u64,
    pub bc: u64,
    pub clone: u64,
    pub lfp: u64,
    pub eval: u64,
}

impl RunSeeds {
    pub fn from_master(seed: u64) -> Self {
        RunSeeds {
            collect: derive_named(seed, "collect", 0),
            bc: derive_named(seed, "train-bc", 0),
            clone: derive_named(seed, "clone", 0),
            lfp: derive_named(seed, "train-lfp", 0),
            eval: derive_named(seed, "eval", 0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SweepKind {
    /// Points are cloned-play hours added to the reference play.
    DataQuantity,
    /// Points are Play-BC capacity indices into [`CAPACITIES`].
    Capacity,
    /// Points are clone episode lengths in seconds.
    CloneLength,
    /// Points are hours of random-policy play added instead of cloned play.
    RandomBaseline,
}

impl SweepKind {
    pub const ALL: [SweepKind; 4] = [SweepKind::DataQuantity, SweepKind::Capacity, SweepKind::CloneLength, SweepKind::RandomBaseline];

    pub fn name(self) -> &'static str {
        match self {
            SweepKind::DataQuantity => "data_quantity",
            SweepKind::Capacity => "capacity",
            SweepKind::CloneLength => "clone_length",
            SweepKind::RandomBaseline => "random_baseline",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn default_grid(self) -> Vec<f64> {
        match self {
            SweepKind::DataQuantity | SweepKind::RandomBaseline => alloc::vec![0.0, 2.0, 5.0, 10.0],
            SweepKind::Capacity => alloc::vec![0.0, 1.0, 2.0, 3.0],
            SweepKind::CloneLength => alloc::vec![6.0, 15.0, 60.0],
        }
    }
}

/// Play-BC shapes (layers, width), largest first.
pub const CAPACITIES: [(usize, usize); 4] = [(2, 128), (1, 128), (2, 64), (1, 64)];

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub kind: SweepKind,
    pub grid: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.grid.is_empty() {
            return Err(PipelineError::Config("sweep grid is empty".into()));
        }
        if self.seeds.is_empty() {
            return Err(PipelineError::Config("sweep needs at least one seed".into()));
        }
        for &p in &self.grid {
            let ok = match self.kind {
                SweepKind::DataQuantity | SweepKind::RandomBaseline => p >= 0.0,
                SweepKind::Capacity => p >= 0.0 && libm::trunc(p) == p && (p as usize) < CAPACITIES.len(),
                SweepKind::CloneLength => p > 0.0,
            };
            if !ok || !p.is_finite() {
                return Err(PipelineError::Config(alloc::format!("invalid {} grid point {p}", self.kind.name())));
            }
        }
        Ok(())
    }
}

/// One (point, seed) cell of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub kind: SweepKind,
    pub point: f64,
    pub seed: u64,
    pub outcome: Result<RowOutcome, String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RowOutcome {
    pub report: EvalReport,
    pub reference_frames: usize,
    pub added_frames: usize,
    /// Distinct coverage cells of the combined training data on the grid of
    /// the reference play.
    pub unique_bins: usize,
}

/// Mean and standard error across seeds of one sweep point.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSummary {
    pub point: f64,
    pub mean: f64,
    pub stderr: f64,
    pub seeds: usize,
    pub failed: usize,
}

/// Groups rows by point in grid order; failed rows are counted, not averaged.
pub fn summarize(rows: &[SweepRow]) -> Vec<PointSummary> {
    let mut points: Vec<f64> = Vec::new();
    for r in rows {
        if !points.contains(&r.point) {
            points.push(r.point);
        }
    }
    points
        .into_iter()
        .map(|point| {
            let vals: Vec<f64> =
                rows.iter().filter(|r| r.point == point).filter_map(|r| r.outcome.as_ref().ok()).map(|o| o.report.average).collect();
            let failed = rows.iter().filter(|r| r.point == point && r.outcome.is_err()).count();
            let (mean, stderr) = mean_stderr(&vals);
            PointSummary { point, mean, stderr, seeds: vals.len(), failed }
        })
        .collect()
}

/// Sample mean and standard error of the mean (zero for fewer than 2 values).
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, libm::sqrt(var / n))
}

/// Artifacts shared by the points of one seed.
struct SeedArtifacts {
    seeds: RunSeeds,
    reference: Dataset,
    grid: crate::coverage::CoverageGrid,
    bc: Option<Policy>,
    /// Largest added dataset generated so far; smaller points take a prefix.
    added: Option<(f64, Dataset)>,
}

fn clone_config(base: &ExperimentConfig, episode_seconds: f64, hours: f64, seed: u64) -> CloneConfig {
    let minutes = episode_seconds / 60.0;
    let episodes = libm::round(hours * 60.0 / minutes) as usize;
    CloneConfig { episodes, minutes, seed, ..base.clone.clone() }
}

fn prefix(d: &Dataset, episodes: usize) -> Dataset {
    Dataset::new(d.episodes[..episodes.min(d.episodes.len())].to_vec())
}

/// Reference play, Play-BC, cloned play, LfP and evaluation for one master seed.
pub fn run_pipeline(base: &ExperimentConfig, seed: u64, clone_hours: f64) -> Result<(EvalReport, Dataset, Dataset), PipelineError> {
    let seeds = RunSeeds::from_master(seed);
    let reference = collect_play(&base.scene, &CollectPolicy::Oracle(base.oracle.clone()), base.human_minutes, base.human_episode_minutes, seeds.collect);
    let bc = train_play_bc(&reference, &TrainConfig { seed: seeds.bc, ..base.bc.clone() })?.0;
    let cc = clone_config(base, base.clone.minutes * 60.0, clone_hours, seeds.clone);
    let cloned = generate_cloned_play(&bc, &base.scene, &reference, &cc)?.0;
    let combined = Dataset::merge(&[&reference, &cloned]).0;
    let lfp = train_lfp(&combined, &TrainConfig { seed: seeds.lfp, ..base.lfp.clone() })?.0;
    let report = run_eval(&lfp, &base.scene, &EvalConfig { seed: seeds.eval, ..base.eval.clone() })?;
    Ok((report, reference, cloned))
}

impl SeedArtifacts {
    fn new(base: &ExperimentConfig, seed: u64) -> Result<Self, PipelineError> {
        let seeds = RunSeeds::from_master(seed);
        let reference = collect_play(&base.scene, &CollectPolicy::Oracle(base.oracle.clone()), base.human_minutes, base.human_episode_minutes, seeds.collect);
        let grid = build_grid(&reference).map_err(|e| PipelineError::Config(e.to_string()))?;
        Ok(SeedArtifacts { seeds, reference, grid, bc: None, added: None })
    }

    fn bc(&mut self, base: &ExperimentConfig) -> Result<&Policy, PipelineError> {
        if self.bc.is_none() {
            self.bc = Some(train_play_bc(&self.reference, &TrainConfig { seed: self.seeds.bc, ..base.bc.clone() })?.0);
        }
        Ok(self.bc.as_ref().expect("set above"))
    }

    fn evaluate(&self, base: &ExperimentConfig, added: &Dataset) -> Result<RowOutcome, PipelineError> {
        let combined = Dataset::merge(&[&self.reference, added]).0;
        let lfp = train_lfp(&combined, &TrainConfig { seed: self.seeds.lfp, ..base.lfp.clone() })?.0;
        let report = run_eval(&lfp, &base.scene, &EvalConfig { seed: self.seeds.eval, ..base.eval.clone() })?;
        Ok(RowOutcome {
            report,
            reference_frames: self.reference.frame_count(),
            added_frames: added.frame_count(),
            unique_bins: count_unique(&self.grid, combined.frames()),
        })
    }
}

fn sweep_point(base: &ExperimentConfig, kind: SweepKind, grid: &[f64], point: f64, art: &mut SeedArtifacts) -> Result<RowOutcome, PipelineError> {
    let largest = grid.iter().copied().fold(0.0, f64::max);
    match kind {
        SweepKind::DataQuantity => {
            if art.added.is_none() {
                let cc = clone_config(base, base.clone.minutes * 60.0, largest, art.seeds.clone);
                let bc = art.bc(base)?.clone();
                art.added = Some((largest, generate_cloned_play(&bc, &base.scene, &art.reference, &cc)?.0));
            }
            let n = clone_config(base, base.clone.minutes * 60.0, point, 0).episodes;
            let added = prefix(&art.added.as_ref().expect("set above").1, n);
            art.evaluate(base, &added)
        }
        SweepKind::RandomBaseline => {
            if art.added.is_none() {
                let stats = compute_norm_stats(&art.reference)?;
                let policy = CollectPolicy::Random(RandomPolicyStats::from_norm_stats(&stats));
                let data = if largest > 0.0 {
                    collect_play(&base.scene, &policy, largest * 60.0, base.clone.minutes, derive_named(art.seeds.collect, "random", 0))
                } else {
                    Dataset::default()
                };
                art.added = Some((largest, data));
            }
            let n = clone_config(base, base.clone.minutes * 60.0, point, 0).episodes;
            let added = prefix(&art.added.as_ref().expect("set above").1, n);
            art.evaluate(base, &added)
        }
        SweepKind::CloneLength => {
            let cc = clone_config(base, point, base.clone_hours, derive_named(art.seeds.clone, "length", point.to_bits()));
            let bc = art.bc(base)?.clone();
            let added = generate_cloned_play(&bc, &base.scene, &art.reference, &cc)?.0;
            art.evaluate(base, &added)
        }
        SweepKind::Capacity => {
            let (layers, width) = CAPACITIES[point as usize];
            let cfg = TrainConfig { seed: art.seeds.bc, net: base.bc.net.with_shape(layers, width), ..base.bc.clone() };
            let bc = train_play_bc(&art.reference, &cfg)?.0;
            let cc = clone_config(base, base.clone.minutes * 60.0, base.clone_hours, art.seeds.clone);
            let added = generate_cloned_play(&bc, &base.scene, &art.reference, &cc)?.0;
            art.evaluate(base, &added)
        }
    }
}

/// Runs every grid point for every seed. Reference play and Play-BC are
/// shared by all points of a seed, and quantity sweeps evaluate prefixes of
/// one largest added dataset. A failing point becomes a failed row and the
/// sweep continues. `on_row` sees each row as soon as it is complete.
pub fn run_sweep(spec: &SweepSpec, base: &ExperimentConfig, mut on_row: impl FnMut(&SweepRow)) -> Result<Vec<SweepRow>, PipelineError> {
    spec.validate()?;
    let mut rows = Vec::with_capacity(spec.grid.len() * spec.seeds.len());
    for &seed in &spec.seeds {
        let mut art = SeedArtifacts::new(base, seed);
        for &point in &spec.grid {
            let outcome = match art.as_mut() {
                Ok(a) => sweep_point(base, spec.kind, &spec.grid, point, a).map_err(|e| e.to_string()),
                Err(e) => Err(e.to_string()),
            };
            let row = SweepRow { kind: spec.kind, point, seed, outcome };
            on_row(&row);
            rows.push(row);
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::ScriptedExpert;

    #[test]
    fn averages_and_standard_errors() {
        let tasks = alloc::vec![
            TaskResult { task: TaskId::GraspLift, successes: 1, trials: 2 },
            TaskResult { task: TaskId::Drawer, successes: 2, trials: 2 },
        ];
        let r = EvalReport::from_results(tasks, 0, alloc::vec![0]);
        assert_eq!(r.average, 0.75);
        assert!((r.stderr - libm::sqrt(0.125) / 2.0).abs() < 1e-15);
        assert_eq!(mean_stderr(&[1.0, 3.0]), (2.0, 1.0));
        assert_eq!(mean_stderr(&[1.0]), (1.0, 0.0));
    }

    #[test]
    fn expert_eval_is_perfect_on_a_few_trials() {
        let scene = SceneConfig::default();
        let cfg = EvalConfig { trials_per_task: 2, ..EvalConfig::default() };
        let r = run_eval_agents(&scene, &cfg, |t, _| Box::new(ScriptedExpert::new(scene.clone(), t)));
        assert_eq!(r.average, 1.0, "{r:?}");
    }

    #[test]
    fn spec_validation() {
        let ok = SweepSpec { kind: SweepKind::Capacity, grid: alloc::vec![0.0, 3.0], seeds: alloc::vec![1] };
        assert!(ok.validate().is_ok());
        assert!(SweepSpec { grid: alloc::vec![4.0], ..ok.clone() }.validate().is_err());
        assert!(SweepSpec { grid: alloc::vec![], ..ok.clone() }.validate().is_err());
        assert!(SweepSpec { seeds: alloc::vec![], ..ok }.validate().is_err());
        assert_eq!(SweepKind::from_name("clone_length"), Some(SweepKind::CloneLength));
    }

    #[test]
    fn summary_skips_failed_rows() {
        let ok = |seed, avg| SweepRow {
            kind: SweepKind::DataQuantity,
            point: 1.0,
            seed,
            outcome: Ok(RowOutcome {
                report: EvalReport { tasks: alloc::vec![], average: avg, stderr: 0.0, fingerprint: 0, seeds: alloc::vec![] },
                reference_frames: 0,
                added_frames: 0,
                unique_bins: 0,
            }),
        };
        let rows = alloc::vec![ok(1, 0.2), ok(2, 0.4), SweepRow { kind: SweepKind::DataQuantity, point: 1.0, seed: 3, outcome: Err("x".into()) }];
        let s = summarize(&rows);
        assert_eq!(s.len(), 1);
        assert_eq!((s[0].seeds, s[0].failed), (2, 1));
        assert!((s[0].mean - 0.3).abs() < 1e-15);
    }
}
