use alloc::vec::Vec;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::rng::{rng_from_seed, Rng};
use crate::scene::{Action, EnvState, SceneConfig};

use super::primitives::{ActivePlan, ControlGains, PlanVariation, Primitive};
use super::Agent;

/// Knobs of the scripted play generator.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleConfig {
    /// Primitives the oracle may pick (besides wandering).
    pub catalog: Vec<Primitive>,
    pub gains: ControlGains,
    /// Translation speed cap is drawn per primitive from this range (m/tick).
    pub speed_range: (f64, f64),
    /// Probability that the next primitive is a random wander.
    pub wander_prob: f64,
    /// Std of Gaussian noise added to each translation / rotation command.
    pub pos_noise: f64,
    pub angle_noise: f64,
    /// A primitive is abandoned after this many ticks.
    pub tick_limit: u32,
    pub seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            catalog: Primitive::CATALOG.to_vec(),
            gains: ControlGains::default(),
            speed_range: (0.015, 0.035),
            wander_prob: 0.1,
            pos_noise: 0.002,
            angle_noise: 0.01,
            tick_limit: 300,
            seed: 0,
        }
    }
}

/// Play oracle: chains randomly chosen primitives forever.
#[derive(Clone, Debug)]
pub struct OracleAgent {
    pub cfg: OracleConfig,
    scene: SceneConfig,
    rng: Rng,
    active: Option<ActivePlan>,
    gains: ControlGains,
    tick: u64,
    log: Vec<(u64, Primitive)>,
}

impl OracleAgent {
    pub fn new(scene: SceneConfig, cfg: OracleConfig) -> Self {
        let rng = rng_from_seed(cfg.seed);
        let gains = cfg.gains;
        OracleAgent { cfg, scene, rng, active: None, gains, tick: 0, log: Vec::new() }
    }

    /// `(tick, primitive)` for every switch so far.
    pub fn transitions(&self) -> &[(u64, Primitive)] {
        &self.log
    }

    pub fn current(&self) -> Option<Primitive> {
        self.active.as_ref().map(|p| p.primitive)
    }

    fn choose(&mut self, s: &EnvState) -> Primitive {
        if self.rng.random_bool(self.cfg.wander_prob.clamp(0.0, 1.0)) {
            return Primitive::Wander;
        }
        let options: Vec<Primitive> =
            self.cfg.catalog.iter().copied().filter(|p| p.applicable(&self.scene, s)).collect();
        if options.is_empty() {
            return Primitive::Wander;
        }
        options[self.rng.random_range(0..options.len())]
    }

    fn switch(&mut self, s: &EnvState) {
        let p = self.choose(s);
        let v = PlanVariation::random(&mut self.rng);
        let (lo, hi) = self.cfg.speed_range;
        self.gains.speed = if hi > lo { self.rng.random_range(lo..hi) } else { lo };
        self.active = Some(ActivePlan::new(&self.scene, p, s, v));
        self.log.push((self.tick, p));
    }

    /// Next action; switches primitive when the current one is finished or
    /// timed out.
    pub fn oracle_act(&mut self, s: &EnvState) -> Action {
        let stale = match &self.active {
            None => true,
            Some(p) => p.finished() || p.ticks >= self.cfg.tick_limit,
        };
        if stale {
            self.switch(s);
        }
        let gains = self.gains;
        let plan = self.active.as_mut().expect("plan set above");
        let mut a = plan.act(s, &gains);
        if plan.finished() {
            self.switch(s);
            let gains = self.gains;
            a = self.active.as_mut().expect("plan set above").act(s, &gains);
        }
        self.tick += 1;
        let mut v = a.to_array();
        for (d, x) in v.iter_mut().enumerate().take(6) {
            let std = if d < 3 { self.cfg.pos_noise } else { self.cfg.angle_noise };
            if std > 0.0 {
                let z: f64 = StandardNormal.sample(&mut self.rng);
                *x += std * z;
            }
        }
        self.scene.clamp_action(&Action::from_array(&v))
    }
}

impl Agent for OracleAgent {
    fn begin(&mut self, _initial: &EnvState, _goal: &EnvState) {
        self.active = None;
    }

    fn act(&mut self, s: &EnvState) -> Action {
        self.oracle_act(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{sample_rest_state, step_state};

    fn run(seed: u64, ticks: usize) -> (Vec<Action>, Vec<(u64, Primitive)>) {
        let scene = SceneConfig::default();
        let mut s = sample_rest_state(&scene, &mut rng_from_seed(seed));
        let mut o = OracleAgent::new(scene.clone(), OracleConfig { seed, ..OracleConfig::default() });
        let mut acts = Vec::new();
        for _ in 0..ticks {
            let a = o.oracle_act(&s);
            s = step_state(&scene, &s, &a);
            acts.push(a);
        }
        (acts, o.transitions().to_vec())
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        assert_eq!(run(9, 2_000), run(9, 2_000));
    }

    #[test]
    fn actions_within_bounds() {
        let scene = SceneConfig::default();
        let b = scene.action_bounds();
        let (acts, log) = run(10, 3_000);
        assert!(log.len() > 10);
        for a in acts {
            for (x, m) in a.to_array().iter().zip(b) {
                assert!(x.abs() <= m);
            }
        }
    }
}
