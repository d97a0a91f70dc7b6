//! Core of the play-cloning pipeline.
//!
//! Everything in this crate is pure computation over in-memory values: the
//! kinematic playroom and its eighteen benchmark tasks, the scripted play
//! oracle, the recurrent mixture-of-discretized-logistics policy with exact
//! BPTT gradients, dataset statistics and hindsight window sampling, coverage
//! analytics, and the train / clone / evaluate loops. File formats, the CLI
//! and the teleoperation bridge live in the `playclone` companion crate.
//!
//! The crate builds without `std` (it needs `alloc`). The default `std`
//! feature only enables faster runtime-dispatched matrix kernels.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod agents;
pub mod benchmark;
pub mod coverage;
pub mod math;
pub mod pipeline;
pub mod playdata;
pub mod rng;
pub mod scene;
pub mod seqnet;
pub mod sim;
pub mod tasks;

pub use scene::{Action, EnvState, SceneConfig, ACT_DIM, ENV_DIM, OBS_DIM, ROBOT_DIM};
pub use sim::{SimError, Simulator};
pub use tasks::{TaskId, TaskInstance};
