//! Non-learned data generators: the scripted play oracle, per-task scripted
//! experts and the random-exploration baseline.

mod collect;
mod experts;
mod oracle;
pub mod primitives;
mod random;

pub use collect::{collect_episode, collect_play, collect_play_logged, episode_lengths, CollectPolicy, Transition};
pub use experts::{expert_plan, ScriptedExpert};
pub use oracle::{OracleAgent, OracleConfig};
pub use primitives::{ControlGains, Primitive, Waypoint};
pub use random::{random_act, RandomAgent, RandomPolicyStats};

use crate::scene::{Action, EnvState};

/// Anything that turns observations into actions, one tick at a time.
pub trait Agent {
    /// Prepares for a new episode starting at `initial`, aiming at `goal`.
    fn begin(&mut self, initial: &EnvState, goal: &EnvState);
    fn act(&mut self, s: &EnvState) -> Action;
}
