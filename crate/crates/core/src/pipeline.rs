//! The four loops of play cloning: train a play policy on reference play,
//! unroll it into cloned play, train a goal-conditioned policy on the combined
//! windows, and roll that policy out toward goals.

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::playdata::{compute_norm_stats, ActionQuantizer, Dataset, Episode, EpisodeHeader, NormStats, Source, StatsError, WindowError, WindowSampler, MAX_WINDOW, MIN_WINDOW};
use crate::rng::{derive_named, rng_from_seed, Rng};
use crate::scene::{Action, EnvState, SceneConfig, ACT_DIM, OBS_DIM};
use crate::seqnet::{adam_step, clip_grad_norm, greedy_dim, loss_and_grad, sample_dim, step_batch, AdamConfig, AdamState, Hidden, NetError, NetSpec, PolicyParams, TrainExample};
use crate::sim::{check_state, step_state, SimError};

/// Normalized inputs are clipped to this many standard deviations.
pub const INPUT_CLIP: f64 = 10.0;
/// Observation dimensions with a smaller spread are left unscaled.
pub const MIN_OBS_STD: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Window(#[from] WindowError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("training diverged at step {step}: loss {loss}")]
    Diverged { step: usize, loss: f64 },
    #[error("policy is {got}, expected {expected}")]
    PolicyKind { expected: &'static str, got: &'static str },
    #[error("initial-state source dataset is empty")]
    EmptySource,
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("invalid config: {0}")]
    Config(String),
}

/// Optimization settings shared by both trainers.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    /// Network shape; the input width is set by the trainer.
    pub net: NetSpec,
    pub batch_size: usize,
    pub steps: usize,
    pub adam: AdamConfig,
    pub clip_norm: f64,
    pub min_window: usize,
    pub max_window: usize,
    /// Share of windows drawn from human / oracle episodes. `None` samples
    /// in proportion to eligible starts.
    pub reference_share: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            net: NetSpec::new(OBS_DIM),
            batch_size: 32,
            steps: 20_000,
            adam: AdamConfig::default(),
            clip_norm: 10.0,
            min_window: MIN_WINDOW,
            max_window: MAX_WINDOW,
            reference_share: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.batch_size == 0 {
            return Err(PipelineError::Config("batch size must be at least 1".into()));
        }
        if self.min_window == 0 || self.max_window < self.min_window {
            return Err(PipelineError::Config("window lengths must satisfy 1 <= min <= max".into()));
        }
        if let Some(p) = self.reference_share {
            if !(0.0..=1.0).contains(&p) {
                return Err(PipelineError::Config("reference share must be in [0, 1]".into()));
            }
        }
        if !(self.clip_norm > 0.0) {
            return Err(PipelineError::Config("clip norm must be positive".into()));
        }
        let mut net = self.net;
        net.input_width = 2 * OBS_DIM;
        net.validate()?;
        Ok(())
    }
}

/// A trained network plus the data transforms it was trained with.
#[derive(Clone, Debug, PartialEq)]
pub struct Policy {
    pub params: PolicyParams,
    pub obs_mean: [f64; OBS_DIM],
    pub obs_scale: [f64; OBS_DIM],
    pub quantizer: ActionQuantizer,
}

impl Policy {
    pub fn from_stats(params: PolicyParams, stats: &NormStats) -> Self {
        let mut obs_mean = [0.0; OBS_DIM];
        let mut obs_scale = [1.0; OBS_DIM];
        for d in 0..OBS_DIM {
            obs_mean[d] = stats.mean[d];
            if stats.std[d] >= MIN_OBS_STD {
                obs_scale[d] = stats.std[d];
            }
        }
        let mut quantizer = ActionQuantizer::from_stats(stats);
        quantizer.bins = params.spec.bins;
        Policy { params, obs_mean, obs_scale, quantizer }
    }

    pub fn goal_conditioned(&self) -> bool {
        self.params.spec.input_width == 2 * OBS_DIM
    }

    fn kind(&self) -> &'static str {
        if self.goal_conditioned() {
            "goal-conditioned"
        } else {
            "unconditioned"
        }
    }

    fn push_obs(&self, obs: &[f64; OBS_DIM], out: &mut Vec<f64>) {
        for d in 0..OBS_DIM {
            out.push(((obs[d] - self.obs_mean[d]) / self.obs_scale[d]).clamp(-INPUT_CLIP, INPUT_CLIP));
        }
    }

    /// Network input for one timestep.
    pub fn encode(&self, obs: &[f64; OBS_DIM], goal: Option<&[f64; OBS_DIM]>, out: &mut Vec<f64>) {
        self.push_obs(obs, out);
        if self.goal_conditioned() {
            self.push_obs(goal.unwrap_or(obs), out);
        }
    }

    fn require(&self, goal_conditioned: bool) -> Result<(), PipelineError> {
        if self.goal_conditioned() == goal_conditioned {
            return Ok(());
        }
        Err(PipelineError::PolicyKind {
            expected: if goal_conditioned { "goal-conditioned" } else { "unconditioned" },
            got: self.kind(),
        })
    }
}

/// One optimizer step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepLog {
    pub step: usize,
    pub loss: f64,
    /// Gradient norm before clipping.
    pub grad_norm: f64,
}

/// Incremental trainer over hindsight windows of a fixed dataset.
pub struct Trainer<'a> {
    data: &'a Dataset,
    sampler: WindowSampler,
    cfg: TrainConfig,
    policy: Policy,
    adam: AdamState,
    rng: Rng,
    step: usize,
}

impl<'a> Trainer<'a> {
    /// `goal_conditioned` selects the LfP input `[s_t, s_g]` over plain `s_t`.
    pub fn new(data: &'a Dataset, cfg: &TrainConfig, goal_conditioned: bool) -> Result<Self, PipelineError> {
        cfg.validate()?;
        let stats = compute_norm_stats(data)?;
        let sampler = WindowSampler::with_lengths(data, cfg.min_window, cfg.max_window, cfg.reference_share)?;
        let mut spec = cfg.net;
        spec.input_width = if goal_conditioned { 2 * OBS_DIM } else { OBS_DIM };
        spec.action_dims = ACT_DIM;
        let mut rng = rng_from_seed(derive_named(cfg.seed, "init", 0));
        let params = PolicyParams::init(spec, &mut rng)?;
        let adam = AdamState::new(params.len(), cfg.adam);
        let policy = Policy::from_stats(params, &stats);
        Ok(Trainer { data, sampler, cfg: cfg.clone(), policy, adam, rng: rng_from_seed(derive_named(cfg.seed, "windows", 0)), step: 0 })
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn steps_done(&self) -> usize {
        self.step
    }

    pub fn finished(&self) -> bool {
        self.step >= self.cfg.steps
    }

    fn batch(&mut self) -> Vec<TrainExample> {
        let goal = self.policy.goal_conditioned();
        let mut out = Vec::with_capacity(self.cfg.batch_size);
        for _ in 0..self.cfg.batch_size {
            let w = self.sampler.sample(self.data, &mut self.rng);
            let mut inputs = Vec::with_capacity(w.len() * self.policy.params.spec.input_width);
            let mut targets = Vec::with_capacity(w.len() * ACT_DIM);
            for f in w.frames {
                self.policy.encode(&f.obs, if goal { Some(&w.goal) } else { None }, &mut inputs);
                targets.extend_from_slice(&self.policy.quantizer.quantize(&f.act));
            }
            out.push(TrainExample { inputs, targets });
        }
        out
    }

    /// Samples a batch, takes one clipped Adam step and reports it.
    pub fn step(&mut self) -> Result<StepLog, PipelineError> {
        let batch = self.batch();
        let step = self.step;
        let (loss, mut grad) = match loss_and_grad(&self.policy.params, &batch) {
            Ok(v) => v,
            Err(NetError::NonFinite { .. }) => return Err(PipelineError::Diverged { step, loss: f64::NAN }),
            Err(e) => return Err(e.into()),
        };
        let grad_norm = clip_grad_norm(&mut grad, self.cfg.clip_norm);
        if !loss.is_finite() || !grad_norm.is_finite() {
            return Err(PipelineError::Diverged { step, loss });
        }
        adam_step(&mut self.policy.params.values, &grad, &mut self.adam);
        self.step += 1;
        Ok(StepLog { step, loss, grad_norm })
    }

    /// Runs the remaining steps, handing every log row to `observe`.
    pub fn run(mut self, mut observe: impl FnMut(&StepLog)) -> Result<Policy, PipelineError> {
        while !self.finished() {
            let log = self.step()?;
            observe(&log);
        }
        Ok(self.policy)
    }
}

/// Behavioral cloning of play: `π(a_t | s_t)` on windows of `play`.
pub fn train_play_bc(play: &Dataset, cfg: &TrainConfig) -> Result<(Policy, Vec<StepLog>), PipelineError> {
    train(play, cfg, false)
}

/// Goal-conditioned imitation on relabeled windows: `π(a_t | s_t, s_g)`.
pub fn train_lfp(combined: &Dataset, cfg: &TrainConfig) -> Result<(Policy, Vec<StepLog>), PipelineError> {
    train(combined, cfg, true)
}

fn train(d: &Dataset, cfg: &TrainConfig, goal: bool) -> Result<(Policy, Vec<StepLog>), PipelineError> {
    let mut log = Vec::with_capacity(cfg.steps);
    let policy = Trainer::new(d, cfg, goal)?.run(|s| log.push(*s))?;
    Ok((policy, log))
}

/// Moving average of the loss column with the given window.
pub fn smoothed_loss(log: &[StepLog], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(log.len());
    let mut acc = 0.0;
    for (i, s) in log.iter().enumerate() {
        acc += s.loss;
        if i >= window {
            acc -= log[i - window].loss;
        }
        out.push(acc / (i + 1).min(window) as f64);
    }
    out
}

/// How actions are decoded from a head.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Decode {
    Sample { temperature: f64 },
    Greedy,
}

impl Decode {
    pub const CLONE_DEFAULT: Decode = Decode::Sample { temperature: 1.0 };
    pub const EVAL_DEFAULT: Decode = Decode::Sample { temperature: 0.3 };
}

/// Decodes a batch of heads (`rows x head_width`) into clamped actions.
fn decode_rows(policy: &Policy, scene: &SceneConfig, heads: &[f64], decode: Decode, rngs: &mut [Rng], out: &mut Vec<Action>) {
    let spec = policy.params.spec;
    let k = spec.components;
    out.clear();
    for (row, rng) in heads.chunks_exact(spec.head_width()).zip(rngs.iter_mut()) {
        let mut bins = [0u16; ACT_DIM];
        for (d, b) in bins.iter_mut().enumerate() {
            let raw = &row[d * 3 * k..(d + 1) * 3 * k];
            *b = match decode {
                Decode::Greedy => greedy_dim(raw, k, spec.bins),
                Decode::Sample { temperature } => sample_dim(raw, k, spec.bins, spec.log_scale_floor, rng, temperature),
            } as u16;
        }
        out.push(scene.clamp_action(&Action::from_array(&policy.quantizer.dequantize(&bins))));
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CloneConfig {
    pub episodes: usize,
    pub minutes: f64,
    pub decode: Decode,
    /// Episodes advanced together in one batched forward pass.
    pub lanes: usize,
    pub seed: u64,
}

impl Default for CloneConfig {
    fn default() -> Self {
        CloneConfig { episodes: 10, minutes: 1.0, decode: Decode::CLONE_DEFAULT, lanes: 64, seed: 0 }
    }
}

impl CloneConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(self.minutes > 0.0) {
            return Err(PipelineError::Config("clone duration must be positive".into()));
        }
        if self.lanes == 0 {
            return Err(PipelineError::Config("lane count must be at least 1".into()));
        }
        if let Decode::Sample { temperature } = self.decode {
            if !(temperature > 0.0) {
                return Err(PipelineError::Config("temperature must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn frames_per_episode(&self, scene: &SceneConfig) -> usize {
        (libm::round(self.minutes * scene.ticks_per_minute() as f64) as usize).max(1)
    }
}

/// An episode that was not generated.
#[derive(Clone, Debug, PartialEq)]
pub struct CloneWarning {
    pub episode: usize,
    pub frame_index: usize,
    pub error: SimError,
}

/// Cloned play: episode `i` teleports to the observation of a frame drawn
/// uniformly from `source`, zeroes the hidden state and samples actions from
/// the play policy for the configured duration.
///
/// Episode `i` depends only on `(policy, source, seed, i)` and on the lane
/// count, so a shorter run is a prefix of a longer one.
pub fn generate_cloned_play(
    policy: &Policy,
    scene: &SceneConfig,
    source: &Dataset,
    cfg: &CloneConfig,
) -> Result<(Dataset, Vec<CloneWarning>), PipelineError> {
    cfg.validate()?;
    policy.require(false)?;
    let total = source.frame_count();
    if cfg.episodes > 0 && total == 0 {
        return Err(PipelineError::EmptySource);
    }
    let frames = cfg.frames_per_episode(scene);
    let mut episodes = Vec::with_capacity(cfg.episodes);
    let mut warnings = Vec::new();
    let mut next = 0;
    while next < cfg.episodes {
        let end = (next + cfg.lanes).min(cfg.episodes);
        let mut starts = Vec::new();
        let mut ids = Vec::new();
        let mut rngs = Vec::new();
        for i in next..end {
            let seed = derive_named(cfg.seed, "clone", i as u64);
            let mut rng = rng_from_seed(seed);
            let index = rng.random_range(0..total);
            let s = EnvState::from_array(&source.frame_at(index).expect("index below frame count").obs);
            match check_state(scene, &s) {
                Ok(()) => {
                    starts.push(s);
                    ids.push((i, seed));
                    rngs.push(rng);
                }
                Err(error) => warnings.push(CloneWarning { episode: i, frame_index: index, error }),
            }
        }
        if !starts.is_empty() {
            let traj = unroll(policy, scene, &starts, None, frames, cfg.decode, &mut rngs)?;
            for (lane, &(_, seed)) in ids.iter().enumerate() {
                let mut e = Episode::new(EpisodeHeader::new(Source::Cloned, seed));
                e.frames.reserve(frames);
                for t in 0..frames {
                    e.push(traj.states[t][lane].to_array(), traj.actions[t][lane].to_array());
                }
                episodes.push(e);
            }
        }
        next = end;
    }
    Ok((Dataset::new(episodes), warnings))
}

struct Unrolled {
    /// `steps + 1` rows of per-lane states.
    states: Vec<Vec<EnvState>>,
    /// `steps` rows of per-lane applied actions.
    actions: Vec<Vec<Action>>,
}

fn unroll(
    policy: &Policy,
    scene: &SceneConfig,
    starts: &[EnvState],
    goals: Option<&[EnvState]>,
    steps: usize,
    decode: Decode,
    rngs: &mut [Rng],
) -> Result<Unrolled, PipelineError> {
    let lanes = starts.len();
    let spec = policy.params.spec;
    let mut hidden = Hidden::zeros(&spec, lanes);
    let goal_arrays: Option<Vec<[f64; OBS_DIM]>> = goals.map(|g| g.iter().map(EnvState::to_array).collect());
    let mut cur: Vec<EnvState> = starts.to_vec();
    let mut states = Vec::with_capacity(steps + 1);
    let mut actions = Vec::with_capacity(steps);
    let mut inputs = Vec::with_capacity(lanes * spec.input_width);
    let mut heads = Vec::new();
    let mut acts = Vec::with_capacity(lanes);
    states.push(cur.clone());
    for _ in 0..steps {
        inputs.clear();
        for (lane, s) in cur.iter().enumerate() {
            policy.encode(&s.to_array(), goal_arrays.as_ref().map(|g| &g[lane]), &mut inputs);
        }
        step_batch(&policy.params, &inputs, &mut hidden, &mut heads)?;
        decode_rows(policy, scene, &heads, decode, rngs, &mut acts);
        for (s, a) in cur.iter_mut().zip(&acts) {
            *s = step_state(scene, s, a);
        }
        actions.push(acts.clone());
        states.push(cur.clone());
    }
    Ok(Unrolled { states, actions })
}

/// One goal-reaching attempt.
#[derive(Clone, Debug, PartialEq)]
pub struct GoalRollout {
    pub initial: EnvState,
    pub goal: EnvState,
    pub budget: usize,
    /// Seeds action sampling; unused when decoding greedily.
    pub seed: u64,
}

/// Resets to `initial`, zeroes the hidden state and feeds `[s_t, goal]` for
/// `budget` ticks. Returns `budget + 1` states.
pub fn rollout_goal(
    policy: &Policy,
    scene: &SceneConfig,
    initial: &EnvState,
    goal: &EnvState,
    budget: usize,
    decode: Decode,
    seed: u64,
) -> Result<Vec<EnvState>, PipelineError> {
    let r = GoalRollout { initial: *initial, goal: *goal, budget, seed };
    Ok(rollout_goal_batch(policy, scene, core::slice::from_ref(&r), decode)?.pop().expect("one rollout"))
}

/// Several rollouts advanced in lockstep; each result has its own
/// `budget + 1` states and matches the unbatched rollout.
pub fn rollout_goal_batch(
    policy: &Policy,
    scene: &SceneConfig,
    rollouts: &[GoalRollout],
    decode: Decode,
) -> Result<Vec<Vec<EnvState>>, PipelineError> {
    policy.require(true)?;
    for r in rollouts {
        check_state(scene, &r.initial)?;
    }
    if rollouts.is_empty() {
        return Ok(Vec::new());
    }
    let starts: Vec<EnvState> = rollouts.iter().map(|r| r.initial).collect();
    let goals: Vec<EnvState> = rollouts.iter().map(|r| r.goal).collect();
    let mut rngs: Vec<Rng> = rollouts.iter().map(|r| rng_from_seed(r.seed)).collect();
    let longest = rollouts.iter().map(|r| r.budget).max().unwrap_or(0);
    let traj = unroll(policy, scene, &starts, Some(&goals), longest, decode, &mut rngs)?;
    Ok(rollouts
        .iter()
        .enumerate()
        .map(|(lane, r)| traj.states[..=r.budget].iter().map(|row| row[lane]).collect())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{collect_play, CollectPolicy, OracleConfig};

    fn tiny_cfg(steps: usize) -> TrainConfig {
        TrainConfig { net: NetSpec::new(OBS_DIM).with_shape(1, 8), batch_size: 2, steps, ..TrainConfig::default() }
    }

    fn play() -> Dataset {
        collect_play(&SceneConfig::default(), &CollectPolicy::Oracle(OracleConfig::default()), 0.2, 0.1, 3)
    }

    #[test]
    fn zero_steps_return_initial_params() {
        let d = play();
        let (p, log) = train_play_bc(&d, &tiny_cfg(0)).unwrap();
        let fresh = Trainer::new(&d, &tiny_cfg(0), false).unwrap();
        assert!(log.is_empty());
        assert_eq!(&p, fresh.policy());
        assert!(!p.goal_conditioned());
        let (g, _) = train_lfp(&d, &tiny_cfg(0)).unwrap();
        assert!(g.goal_conditioned());
        assert_eq!(g.params.spec.input_width, 38);
    }

    #[test]
    fn clone_counts_and_kinds() {
        let d = play();
        let scene = SceneConfig::default();
        let (bc, _) = train_play_bc(&d, &tiny_cfg(2)).unwrap();
        let cfg = CloneConfig { episodes: 3, minutes: 0.05, lanes: 2, ..CloneConfig::default() };
        let (c, w) = generate_cloned_play(&bc, &scene, &d, &cfg).unwrap();
        assert!(w.is_empty());
        assert_eq!(c.episodes.len(), 3);
        assert!(c.episodes.iter().all(|e| e.len() == 90 && e.source() == Source::Cloned));
        let none = generate_cloned_play(&bc, &scene, &d, &CloneConfig { episodes: 0, ..cfg.clone() }).unwrap().0;
        assert!(none.is_empty());
        assert!(matches!(
            rollout_goal(&bc, &scene, &EnvState::from_array(&d.episodes[0].frames[0].obs), &EnvState::from_array(&d.episodes[0].frames[0].obs), 3, Decode::Greedy, 0),
            Err(PipelineError::PolicyKind { .. })
        ));
    }

    #[test]
    fn smoothing_is_a_trailing_mean() {
        let log: Vec<StepLog> = (0..4).map(|i| StepLog { step: i, loss: i as f64, grad_norm: 0.0 }).collect();
        assert_eq!(smoothed_loss(&log, 2), alloc::vec![0.0, 0.5, 1.5, 2.5]);
    }
}
