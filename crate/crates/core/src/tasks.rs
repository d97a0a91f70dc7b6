//! The eighteen benchmark tasks: instance sampling and success predicates.
//!
//! A predicate looks at the first state of a trajectory (for relative tasks
//! such as sweeps and rotations) and one later state; a trajectory succeeds
//! when the predicate holds at any tick.

use alloc::string::String;
use core::f64::consts::FRAC_PI_2;
use core::fmt;
use core::str::FromStr;

use rand::Rng as _;

use crate::math::{clamp, wrap_angle};
use crate::rng::{rng_from_seed, Rng};
use crate::scene::{EnvState, SceneConfig};
use crate::sim::{clamp_into_bounds, flat_block_pose, is_grasped, sample_rest_state, upright_block_pose};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TaskId {
    GraspLift,
    GraspUpright,
    GraspFlat,
    Drawer,
    CloseDrawer,
    OpenSliding,
    CloseSliding,
    KnockObject,
    SweepObject,
    PushRedButton,
    PushGreenButton,
    PushBlueButton,
    PutIntoShelf,
    PullOutOfShelf,
    RotateLeft,
    RotateRight,
    SweepLeft,
    SweepRight,
}

impl TaskId {
    pub const ALL: [TaskId; 18] = [
        TaskId::GraspLift,
        TaskId::GraspUpright,
        TaskId::GraspFlat,
        TaskId::Drawer,
        TaskId::CloseDrawer,
        TaskId::OpenSliding,
        TaskId::CloseSliding,
        TaskId::KnockObject,
        TaskId::SweepObject,
        TaskId::PushRedButton,
        TaskId::PushGreenButton,
        TaskId::PushBlueButton,
        TaskId::PutIntoShelf,
        TaskId::PullOutOfShelf,
        TaskId::RotateLeft,
        TaskId::RotateRight,
        TaskId::SweepLeft,
        TaskId::SweepRight,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TaskId::GraspLift => "grasp_lift",
            TaskId::GraspUpright => "grasp_upright",
            TaskId::GraspFlat => "grasp_flat",
            TaskId::Drawer => "drawer",
            TaskId::CloseDrawer => "close_drawer",
            TaskId::OpenSliding => "open_sliding",
            TaskId::CloseSliding => "close_sliding",
            TaskId::KnockObject => "knock_object",
            TaskId::SweepObject => "sweep_object",
            TaskId::PushRedButton => "push_red_button",
            TaskId::PushGreenButton => "push_green_button",
            TaskId::PushBlueButton => "push_blue_button",
            TaskId::PutIntoShelf => "put_into_shelf",
            TaskId::PullOutOfShelf => "pull_out_of_shelf",
            TaskId::RotateLeft => "rotate_left",
            TaskId::RotateRight => "rotate_right",
            TaskId::SweepLeft => "sweep_left",
            TaskId::SweepRight => "sweep_right",
        }
    }

    pub fn index(self) -> usize {
        TaskId::ALL.iter().position(|&t| t == self).unwrap_or(0)
    }

    /// Tasks that require holding the block.
    pub fn is_grasp_family(self) -> bool {
        matches!(self, TaskId::GraspLift | TaskId::GraspUpright | TaskId::GraspFlat)
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum TaskError {
    #[error("unknown task `{given}`; valid tasks: {valid}")]
    UnknownTask { given: String, valid: String },
    #[error("task trajectory must contain at least one state")]
    EmptyTrajectory,
}

impl FromStr for TaskId {
    type Err = TaskError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().replace(' ', "_");
        TaskId::ALL.iter().copied().find(|t| t.name() == norm).ok_or_else(|| {
            let names: alloc::vec::Vec<&str> = TaskId::ALL.iter().map(|t| t.name()).collect();
            TaskError::UnknownTask { given: String::from(s), valid: names.join(", ") }
        })
    }
}

/// One concrete benchmark episode.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskInstance {
    pub task: TaskId,
    pub initial: EnvState,
    pub goal: EnvState,
    pub budget: usize,
}

fn block_resting_on_table(cfg: &SceneConfig, s: &EnvState) -> bool {
    s.block_pose[2] - crate::sim::block_half_height(cfg, s) <= 0.005
}

pub fn block_upright_within_tol(cfg: &SceneConfig, s: &EnvState) -> bool {
    libm::fabs(libm::fabs(s.block_pose[4]) - FRAC_PI_2) <= cfg.upright_tol
}

pub fn block_flat_within_tol(cfg: &SceneConfig, s: &EnvState) -> bool {
    let p = s.block_pose[4];
    let near_level = |a: f64| libm::fabs(wrap_angle(a)) <= cfg.flat_tol || libm::fabs(wrap_angle(a - core::f64::consts::PI)) <= cfg.flat_tol;
    near_level(p)
}

/// Task predicate on one state, given the trajectory's first state.
pub fn achieved(cfg: &SceneConfig, task: TaskId, start: &EnvState, s: &EnvState) -> bool {
    let grasped = is_grasped(cfg, s);
    let lifted = s.block_pose[2] >= cfg.lift_height;
    let dx = s.block_pose[0] - start.block_pose[0];
    let dy = s.block_pose[1] - start.block_pose[1];
    let dyaw = wrap_angle(s.block_yaw() - start.block_yaw());
    let free_on_table = !grasped && block_resting_on_table(cfg, s);
    match task {
        TaskId::GraspLift => grasped && lifted,
        TaskId::GraspUpright => grasped && lifted && block_upright_within_tol(cfg, s),
        TaskId::GraspFlat => grasped && lifted && block_flat_within_tol(cfg, s),
        TaskId::Drawer => start.drawer <= 0.1 * cfg.drawer_max && s.drawer >= 0.9 * cfg.drawer_max,
        TaskId::CloseDrawer => start.drawer >= 0.9 * cfg.drawer_max && s.drawer <= 0.1 * cfg.drawer_max,
        TaskId::OpenSliding => start.slider <= 0.1 * cfg.slider_max && s.slider >= 0.9 * cfg.slider_max,
        TaskId::CloseSliding => start.slider >= 0.9 * cfg.slider_max && s.slider <= 0.1 * cfg.slider_max,
        TaskId::KnockObject => {
            block_upright_within_tol(cfg, start) && !grasped && block_flat_within_tol(cfg, s)
        }
        TaskId::SweepObject => free_on_table && libm::hypot(dx, dy) >= cfg.sweep_distance,
        TaskId::SweepLeft => free_on_table && dx <= -cfg.sweep_distance,
        TaskId::SweepRight => free_on_table && dx >= cfg.sweep_distance,
        TaskId::PushRedButton => s.buttons[0] >= cfg.press_threshold,
        TaskId::PushGreenButton => s.buttons[1] >= cfg.press_threshold,
        TaskId::PushBlueButton => s.buttons[2] >= cfg.press_threshold,
        TaskId::PutIntoShelf => !grasped && cfg.in_shelf(&s.block_pos()),
        TaskId::PullOutOfShelf => {
            cfg.in_shelf(&start.block_pos()) && free_on_table && !cfg.in_shelf(&s.block_pos())
        }
        TaskId::RotateLeft => block_resting_on_table(cfg, s) && dyaw >= cfg.rotate_angle,
        TaskId::RotateRight => block_resting_on_table(cfg, s) && dyaw <= -cfg.rotate_angle,
    }
}

/// True iff the task predicate holds at some tick of `trajectory`.
pub fn task_success(cfg: &SceneConfig, task: TaskId, trajectory: &[EnvState]) -> Result<bool, TaskError> {
    let start = trajectory.first().ok_or(TaskError::EmptyTrajectory)?;
    Ok(trajectory.iter().any(|s| achieved(cfg, task, start, s)))
}

/// Index of the first tick at which the task is achieved.
pub fn first_success_tick(cfg: &SceneConfig, task: TaskId, trajectory: &[EnvState]) -> Option<usize> {
    let start = trajectory.first()?;
    trajectory.iter().position(|s| achieved(cfg, task, start, s))
}

fn arm_at(p: [f64; 3], yaw: f64) -> [f64; 6] {
    [p[0], p[1], p[2], 0.0, 0.0, yaw]
}

fn shelf_spot(cfg: &SceneConfig, rng: &mut Rng) -> (f64, f64) {
    let m = 0.08;
    (
        rng.random_range(cfg.shelf_min[0] + m..=cfg.shelf_max[0] - m),
        rng.random_range(cfg.shelf_min[1] + m..=cfg.shelf_max[1] - m),
    )
}

fn table_spot(cfg: &SceneConfig, rng: &mut Rng) -> (f64, f64) {
    (
        rng.random_range(cfg.block_region_min[0]..=cfg.block_region_max[0]),
        rng.random_range(cfg.block_region_min[1]..=cfg.block_region_max[1]),
    )
}

/// Initial state satisfying the task's precondition.
fn sample_initial(cfg: &SceneConfig, task: TaskId, rng: &mut Rng) -> EnvState {
    let mut s = sample_rest_state(cfg, rng);
    let (bx, by) = (s.block_pose[0], s.block_pose[1]);
    let yaw = s.block_yaw();
    let dmax = cfg.drawer_max;
    let smax = cfg.slider_max;
    match task {
        TaskId::GraspUpright | TaskId::KnockObject => {
            s.block_pose = upright_block_pose(cfg, bx, by, yaw);
        }
        TaskId::Drawer => s.drawer = rng.random_range(0.0..=0.1 * dmax),
        TaskId::CloseDrawer => s.drawer = rng.random_range(0.9 * dmax..=dmax),
        TaskId::OpenSliding => s.slider = rng.random_range(0.0..=0.1 * smax),
        TaskId::CloseSliding => s.slider = rng.random_range(0.9 * smax..=smax),
        TaskId::SweepLeft => {
            let x = rng.random_range(cfg.block_region_min[0] + 0.2..=cfg.block_region_max[0]);
            s.block_pose = flat_block_pose(cfg, x, by, yaw);
        }
        TaskId::SweepRight => {
            let x = rng.random_range(cfg.block_region_min[0]..=cfg.block_region_max[0] - 0.2);
            s.block_pose = flat_block_pose(cfg, x, by, yaw);
        }
        TaskId::PullOutOfShelf => {
            let (x, y) = shelf_spot(cfg, rng);
            s.block_pose = [x, y, cfg.shelf_floor() + cfg.block_half_extents[2], 0.0, 0.0, yaw];
        }
        _ => {}
    }
    clamp_into_bounds(cfg, &mut s);
    s
}

/// Goal state showing the task completed from `init`.
fn sample_goal(cfg: &SceneConfig, task: TaskId, init: &EnvState, rng: &mut Rng) -> EnvState {
    let mut g = *init;
    g.buttons = [0.0; 3];
    let hz = cfg.block_half_extents[2];
    let dmax = cfg.drawer_max;
    let smax = cfg.slider_max;
    match task {
        TaskId::GraspLift | TaskId::GraspUpright | TaskId::GraspFlat => {
            let z = cfg.lift_height + rng.random_range(0.03..=0.1);
            g.block_pose[2] = z;
            g.arm_pose = arm_at([g.block_pose[0], g.block_pose[1], z], 0.0);
            g.gripper = [0.9 * cfg.finger_max; 2];
        }
        TaskId::Drawer | TaskId::CloseDrawer => {
            g.drawer = if task == TaskId::Drawer {
                rng.random_range(0.92 * dmax..=dmax)
            } else {
                rng.random_range(0.0..=0.05 * dmax)
            };
            g.arm_pose = arm_at(cfg.drawer_handle_at(g.drawer), 0.0);
        }
        TaskId::OpenSliding | TaskId::CloseSliding => {
            g.slider = if task == TaskId::OpenSliding {
                rng.random_range(0.92 * smax..=smax)
            } else {
                rng.random_range(0.0..=0.05 * smax)
            };
            g.arm_pose = arm_at(cfg.slider_handle_at(g.slider), 0.0);
        }
        TaskId::KnockObject => {
            let dir = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let shift = cfg.block_half_extents[0] - hz + rng.random_range(0.0..=0.03);
            let x = init.block_pose[0] + dir * shift;
            let yaw = if dir > 0.0 { 0.0 } else { core::f64::consts::PI - 1e-9 };
            g.block_pose = flat_block_pose(cfg, x, init.block_pose[1], wrap_angle(yaw));
            let side = x - dir * (cfg.block_half_extents[0] + cfg.effector_radius + 0.005);
            g.arm_pose = arm_at([side, init.block_pose[1], 0.05], 0.0);
        }
        TaskId::SweepObject | TaskId::SweepLeft | TaskId::SweepRight => {
            let dir = match task {
                TaskId::SweepLeft => -1.0,
                TaskId::SweepRight => 1.0,
                _ => {
                    if rng.random_bool(0.5) {
                        1.0
                    } else {
                        -1.0
                    }
                }
            };
            let dist = cfg.sweep_distance + rng.random_range(0.03..=0.08);
            g.block_pose[0] = clamp(init.block_pose[0] + dir * dist, cfg.workspace_min[0], cfg.workspace_max[0]);
            let (ax, _) = crate::sim::block_footprint(cfg, &g);
            let side = g.block_pose[0] - dir * (ax + cfg.effector_radius + 0.005);
            g.arm_pose = arm_at([side, g.block_pose[1], hz], 0.0);
        }
        TaskId::PushRedButton | TaskId::PushGreenButton | TaskId::PushBlueButton => {
            let i = match task {
                TaskId::PushRedButton => 0,
                TaskId::PushGreenButton => 1,
                _ => 2,
            };
            let c = cfg.button_centers[i];
            g.arm_pose = arm_at([c[0], c[1], cfg.button_top - cfg.button_max], 0.0);
            g.buttons[i] = cfg.button_max;
        }
        TaskId::PutIntoShelf => {
            let (x, y) = shelf_spot(cfg, rng);
            g.block_pose = [x, y, cfg.shelf_floor() + hz, 0.0, 0.0, init.block_yaw()];
            g.arm_pose = arm_at([x, y, cfg.shelf_floor() + 0.1], 0.0);
            g.gripper = [0.0; 2];
        }
        TaskId::PullOutOfShelf => {
            let (x, y) = table_spot(cfg, rng);
            g.block_pose = flat_block_pose(cfg, x, y, init.block_yaw());
            g.arm_pose = arm_at([x, y, 0.12], 0.0);
            g.gripper = [0.0; 2];
        }
        TaskId::RotateLeft | TaskId::RotateRight => {
            let sign = if task == TaskId::RotateLeft { 1.0 } else { -1.0 };
            let d = sign * (cfg.rotate_angle + rng.random_range(0.1..=0.3));
            g.block_pose[5] = wrap_angle(init.block_yaw() + d);
            g.arm_pose = arm_at([init.block_pose[0], init.block_pose[1], init.block_pose[2]], clamp(d, -cfg.arm_yaw_limit, cfg.arm_yaw_limit));
            g.gripper = [0.9 * cfg.finger_max; 2];
        }
    }
    clamp_into_bounds(cfg, &mut g);
    g
}

/// Deterministic task instance for `(task, seed)`.
pub fn make_task_instance(cfg: &SceneConfig, task: TaskId, seed: u64) -> TaskInstance {
    let mut rng = rng_from_seed(crate::rng::derive_seed(seed, task.index() as u64 + 1));
    let initial = sample_initial(cfg, task, &mut rng);
    let goal = sample_goal(cfg, task, &initial, &mut rng);
    TaskInstance { task, initial, goal, budget: cfg.task_budget }
}

/// Name-based entry point.
pub fn make_task_instance_by_name(cfg: &SceneConfig, name: &str, seed: u64) -> Result<TaskInstance, TaskError> {
    Ok(make_task_instance(cfg, name.parse()?, seed))
}
