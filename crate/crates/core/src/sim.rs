//! Deterministic kinematic playroom.
//!
//! The whole simulator state is the 19-dim [`EnvState`]. Contact and grasp
//! status are recomputed from it every tick, so `reset(s)` followed by the same
//! actions always reproduces the same trajectory.
//!
//! Contact model:
//! - the effector pose integrates the clamped deltas, then clamps to the
//!   workspace;
//! - the block is held while both fingers are closed past `grasp_angle` and
//!   the effector was within `grasp_radius` of its center; a held block keeps
//!   its pose in the effector frame (translation plus yaw, with roll / pitch
//!   offsets);
//! - a free block is pushed when a low effector enters its world-aligned
//!   footprint from the side, is knocked flat if it was upright, and
//!   otherwise rests on the table or the shelf floor;
//! - the drawer and sliding door follow the effector along their axis while it
//!   is inside the handle sphere;
//! - a button reads the effector's penetration depth below `button_top`, and
//!   recovers `button_release` per tick once released.

use core::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use rand::Rng as _;

use crate::math::{clamp, dist3, rot_z, wrap_angle};
use crate::rng::Rng;
use crate::scene::{Action, EnvState, SceneConfig, OBS_NAMES};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("uninitialized environment: call reset before step")]
    Uninitialized,
    #[error("state coordinate {index} ({name}) = {value} outside [{low}, {high}]")]
    OutOfRange { index: usize, name: &'static str, value: f64, low: f64, high: f64 },
}

/// Single-owner simulator instance.
#[derive(Clone, Debug)]
pub struct Simulator {
    config: SceneConfig,
    state: Option<EnvState>,
}

impl Simulator {
    pub fn new(config: SceneConfig) -> Self {
        Simulator { config, state: None }
    }

    pub fn config(&self) -> &SceneConfig {
        &self.config
    }

    /// Teleports to `state` after checking every coordinate range.
    pub fn reset_to(&mut self, state: EnvState) -> Result<EnvState, SimError> {
        check_state(&self.config, &state)?;
        self.state = Some(state);
        Ok(state)
    }

    /// Resets to a randomized rest configuration determined by `seed`.
    pub fn reset_seeded(&mut self, seed: u64) -> EnvState {
        let mut rng = crate::rng::rng_from_seed(seed);
        let s = sample_rest_state(&self.config, &mut rng);
        self.state = Some(s);
        s
    }

    pub fn observe(&self) -> Option<EnvState> {
        self.state
    }

    pub fn step(&mut self, action: &Action) -> Result<EnvState, SimError> {
        let s = self.state.as_ref().ok_or(SimError::Uninitialized)?;
        let next = step_state(&self.config, s, action);
        self.state = Some(next);
        Ok(next)
    }
}

pub fn check_state(cfg: &SceneConfig, s: &EnvState) -> Result<(), SimError> {
    cfg.check_state(s).map_err(|v| SimError::OutOfRange {
        index: v.index,
        name: OBS_NAMES[v.index],
        value: v.value,
        low: v.low,
        high: v.high,
    })
}

/// True when the block's long axis is closer to vertical than horizontal.
pub fn is_upright(s: &EnvState) -> bool {
    libm::fabs(libm::sin(s.block_pose[4])) > libm::sin(FRAC_PI_4)
}

/// Half of the block's vertical extent in its current posture.
pub fn block_half_height(cfg: &SceneConfig, s: &EnvState) -> f64 {
    if is_upright(s) {
        cfg.block_half_extents[0]
    } else {
        cfg.block_half_extents[2]
    }
}

/// Half extents of the block footprint's world-aligned bounding box.
pub fn block_footprint(cfg: &SceneConfig, s: &EnvState) -> (f64, f64) {
    let he = cfg.block_half_extents;
    let (fx, fy) = if is_upright(s) { (he[2], he[1]) } else { (he[0], he[1]) };
    let (sn, cs) = libm::sincos(s.block_yaw());
    let (sn, cs) = (libm::fabs(sn), libm::fabs(cs));
    (cs * fx + sn * fy, sn * fx + cs * fy)
}

pub fn fingers_closed(cfg: &SceneConfig, gripper: &[f64; 2]) -> bool {
    gripper[0] >= cfg.grasp_angle && gripper[1] >= cfg.grasp_angle
}

/// Grasp condition evaluated on a single state.
pub fn is_grasped(cfg: &SceneConfig, s: &EnvState) -> bool {
    fingers_closed(cfg, &s.gripper) && dist3(&s.effector(), &s.block_pos()) <= cfg.grasp_radius
}

/// Height of the supporting surface under a free block at `(x, y, z)`.
pub fn support_height(cfg: &SceneConfig, x: f64, y: f64, z: f64) -> f64 {
    if cfg.in_shelf_footprint(x, y) && z >= cfg.shelf_floor() {
        cfg.shelf_floor()
    } else {
        0.0
    }
}

fn snap_quarter(a: f64) -> f64 {
    wrap_angle(libm::round(a / FRAC_PI_2) * FRAC_PI_2)
}

/// Puts a free block into a resting pose: roll / pitch snapped to the nearest
/// quarter turn, center at the support height.
fn settle_block(cfg: &SceneConfig, s: &mut EnvState) {
    s.block_pose[3] = snap_quarter(s.block_pose[3]);
    s.block_pose[4] = snap_quarter(s.block_pose[4]);
    s.block_pose[5] = wrap_angle(s.block_pose[5]);
    let (x, y) = clamp_xy(cfg, s.block_pose[0], s.block_pose[1]);
    s.block_pose[0] = x;
    s.block_pose[1] = y;
    let hh = block_half_height(cfg, s);
    let bottom = s.block_pose[2] - hh;
    let support = support_height(cfg, x, y, bottom + 1e-6);
    s.block_pose[2] = clamp(support + hh, cfg.workspace_min[2], cfg.workspace_max[2]);
}

fn clamp_xy(cfg: &SceneConfig, x: f64, y: f64) -> (f64, f64) {
    (
        clamp(x, cfg.workspace_min[0], cfg.workspace_max[0]),
        clamp(y, cfg.workspace_min[1], cfg.workspace_max[1]),
    )
}

/// Resolves a side push of a free block. Returns the displaced state when the
/// effector entered the footprint between `e0` and `e1`.
fn push_block(cfg: &SceneConfig, s: &mut EnvState, e0: &[f64; 3], e1: &[f64; 3]) {
    let r = cfg.effector_radius;
    let hh = block_half_height(cfg, s);
    let (bx, by, bz) = (s.block_pose[0], s.block_pose[1], s.block_pose[2]);
    let low = |e: &[f64; 3]| e[2] < bz + hh + r && e[2] > bz - hh - r;
    let (ax, ay) = block_footprint(cfg, s);
    let (ex, ey) = (ax + r, ay + r);
    // The contact slack keeps an effector resting on a face (up to rounding)
    // counted as outside, so steady pushes never tunnel through.
    const SLACK: f64 = 1e-9;
    let inside = |e: &[f64; 3]| libm::fabs(e[0] - bx) < ex - SLACK && libm::fabs(e[1] - by) < ey - SLACK;
    if !(low(e0) && low(e1) && !inside(e0) && inside(e1)) {
        return;
    }
    let (nx, ny) = if libm::fabs(e0[0] - bx) >= ex - SLACK {
        let sign = if e0[0] > bx { -1.0 } else { 1.0 };
        s.block_pose[0] = e1[0] + sign * ex;
        (sign, 0.0)
    } else {
        let sign = if e0[1] > by { -1.0 } else { 1.0 };
        s.block_pose[1] = e1[1] + sign * ey;
        (0.0, sign)
    };
    if is_upright(s) {
        // Toppled along the push direction, near face kept in place.
        let he = cfg.block_half_extents;
        let shift = he[0] - he[2];
        s.block_pose[0] += nx * shift;
        s.block_pose[1] += ny * shift;
        s.block_pose[3] = 0.0;
        s.block_pose[4] = 0.0;
        s.block_pose[5] = libm::atan2(ny, nx);
    }
}

/// One control tick. Out-of-bound action coordinates are clamped.
pub fn step_state(cfg: &SceneConfig, s: &EnvState, action: &Action) -> EnvState {
    let a = cfg.clamp_action(action);
    let mut n = *s;

    let e0 = s.effector();
    for i in 0..3 {
        n.arm_pose[i] = clamp(s.arm_pose[i] + a.delta_pose[i], cfg.workspace_min[i], cfg.workspace_max[i]);
    }
    let tilt = cfg.arm_tilt_limit;
    n.arm_pose[3] = clamp(s.arm_pose[3] + a.delta_pose[3], -tilt, tilt);
    n.arm_pose[4] = clamp(s.arm_pose[4] + a.delta_pose[4], -tilt, tilt);
    n.arm_pose[5] = clamp(s.arm_pose[5] + a.delta_pose[5], -cfg.arm_yaw_limit, cfg.arm_yaw_limit);
    for i in 0..2 {
        n.gripper[i] = clamp(s.gripper[i] + a.delta_gripper[i], 0.0, cfg.finger_max);
    }
    let e1 = n.effector();

    let held = fingers_closed(cfg, &n.gripper) && dist3(&e0, &s.block_pos()) <= cfg.grasp_radius;
    if held {
        let (ox, oy) = rot_z(-s.arm_pose[5], s.block_pose[0] - e0[0], s.block_pose[1] - e0[1]);
        let (wx, wy) = rot_z(n.arm_pose[5], ox, oy);
        n.block_pose[0] = clamp(e1[0] + wx, cfg.workspace_min[0], cfg.workspace_max[0]);
        n.block_pose[1] = clamp(e1[1] + wy, cfg.workspace_min[1], cfg.workspace_max[1]);
        n.block_pose[2] = clamp(
            e1[2] + (s.block_pose[2] - e0[2]),
            cfg.workspace_min[2],
            cfg.workspace_max[2],
        );
        for k in 0..3 {
            let d = n.arm_pose[3 + k] - s.arm_pose[3 + k];
            n.block_pose[3 + k] = wrap_angle(s.block_pose[3 + k] + d);
        }
    } else {
        push_block(cfg, &mut n, &e0, &e1);
        settle_block(cfg, &mut n);
    }

    let dh = cfg.drawer_handle_at(s.drawer);
    if dist3(&e0, &dh) <= cfg.handle_radius {
        n.drawer = clamp(s.drawer - (e1[1] - e0[1]), 0.0, cfg.drawer_max);
    }
    let sh = cfg.slider_handle_at(s.slider);
    if dist3(&e0, &sh) <= cfg.handle_radius {
        n.slider = clamp(s.slider + (e1[0] - e0[0]), 0.0, cfg.slider_max);
    }

    for (i, c) in cfg.button_centers.iter().enumerate() {
        let over = libm::hypot(e1[0] - c[0], e1[1] - c[1]) <= cfg.button_radius;
        let pen = if over { clamp(cfg.button_top - e1[2], 0.0, cfg.button_max) } else { 0.0 };
        let prev = s.buttons[i];
        n.buttons[i] = if pen >= prev { pen } else { libm::fmax(pen, prev - cfg.button_release) };
    }
    n
}

/// A block resting flat at `(x, y)` on the table with heading `yaw`.
pub fn flat_block_pose(cfg: &SceneConfig, x: f64, y: f64, yaw: f64) -> [f64; 6] {
    [x, y, cfg.block_half_extents[2], 0.0, 0.0, yaw]
}

pub fn upright_block_pose(cfg: &SceneConfig, x: f64, y: f64, yaw: f64) -> [f64; 6] {
    [x, y, cfg.block_half_extents[0], 0.0, FRAC_PI_2, yaw]
}

/// Samples a randomized rest configuration: arm near home with open fingers,
/// block flat somewhere in the block region, random drawer and door
/// positions, buttons released.
pub fn sample_rest_state(cfg: &SceneConfig, rng: &mut Rng) -> EnvState {
    let h = cfg.arm_home;
    let arm = [
        h[0] + rng.random_range(-0.1..=0.1),
        h[1] + rng.random_range(-0.1..=0.1),
        h[2] + rng.random_range(-0.05..=0.05),
        0.0,
        0.0,
        0.0,
    ];
    let bx = rng.random_range(cfg.block_region_min[0]..=cfg.block_region_max[0]);
    let by = rng.random_range(cfg.block_region_min[1]..=cfg.block_region_max[1]);
    let yaw = rng.random_range(-FRAC_PI_2..=FRAC_PI_2);
    let mut s = EnvState {
        arm_pose: arm,
        gripper: [0.0, 0.0],
        block_pose: flat_block_pose(cfg, bx, by, yaw),
        drawer: rng.random_range(0.0..=cfg.drawer_max),
        slider: rng.random_range(0.0..=cfg.slider_max),
        buttons: [0.0; 3],
    };
    clamp_into_bounds(cfg, &mut s);
    s
}

/// Clamps every coordinate into its configured range.
pub fn clamp_into_bounds(cfg: &SceneConfig, s: &mut EnvState) {
    let mut v = s.to_array();
    for (x, (lo, hi)) in v.iter_mut().zip(cfg.obs_bounds()) {
        *x = clamp(*x, lo, hi);
    }
    *s = EnvState::from_array(&v);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::OBS_DIM;

    fn cfg() -> SceneConfig {
        SceneConfig::default()
    }

    fn rest() -> EnvState {
        let c = cfg();
        EnvState {
            arm_pose: [0.0, -0.5, 0.3, 0.0, 0.0, 0.0],
            gripper: [0.0, 0.0],
            block_pose: flat_block_pose(&c, 0.0, 0.0, 0.3),
            drawer: 0.1,
            slider: 0.1,
            buttons: [0.0; 3],
        }
    }

    fn mv(dx: f64, dy: f64, dz: f64) -> Action {
        Action { delta_pose: [dx, dy, dz, 0.0, 0.0, 0.0], delta_gripper: [0.0; 2] }
    }

    #[test]
    fn reset_then_observe_is_identity() {
        let mut sim = Simulator::new(cfg());
        let s = rest();
        sim.reset_to(s).unwrap();
        assert_eq!(sim.observe(), Some(s));
    }

    #[test]
    fn seeded_reset_is_deterministic() {
        let mut a = Simulator::new(cfg());
        let mut b = Simulator::new(cfg());
        assert_eq!(a.reset_seeded(7).to_array(), b.reset_seeded(7).to_array());
        assert_ne!(a.reset_seeded(8), b.reset_seeded(7));
    }

    #[test]
    fn seeded_resets_stay_in_range() {
        let c = cfg();
        let bounds = c.obs_bounds();
        let mut sim = Simulator::new(c.clone());
        for seed in 0..10_000u64 {
            let s = sim.reset_seeded(crate::rng::derive_seed(99, seed));
            for (i, x) in s.to_array().iter().enumerate() {
                assert!(*x >= bounds[i].0 && *x <= bounds[i].1, "seed {seed} dim {i}");
            }
        }
    }

    #[test]
    fn invalid_reset_names_offending_index() {
        let mut sim = Simulator::new(cfg());
        let mut s = rest();
        s.drawer = 0.3;
        match sim.reset_to(s) {
            Err(SimError::OutOfRange { index, name, .. }) => {
                assert_eq!(index, 14);
                assert_eq!(name, "drawer");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn step_before_reset_errors() {
        let mut sim = Simulator::new(cfg());
        assert_eq!(sim.step(&Action::ZERO), Err(SimError::Uninitialized));
    }

    #[test]
    fn zero_action_only_relaxes_buttons() {
        let c = cfg();
        let mut s = rest();
        s.buttons = [0.02, 0.01, 0.0];
        let n = step_state(&c, &s, &Action::ZERO);
        let (a, b) = (s.to_array(), n.to_array());
        for i in 0..16 {
            assert_eq!(a[i], b[i], "dim {i}");
        }
        assert_eq!(n.buttons, [0.015, 0.005, 0.0]);
    }

    #[test]
    fn drawer_clamps_at_max() {
        let c = cfg();
        let mut s = rest();
        s.drawer = c.drawer_max;
        let h = c.drawer_handle_at(s.drawer);
        s.arm_pose[0] = h[0];
        s.arm_pose[1] = h[1];
        s.arm_pose[2] = h[2];
        let n = step_state(&c, &s, &mv(0.0, -0.05, 0.0));
        assert_eq!(n.drawer, c.drawer_max);
        let n = step_state(&c, &s, &mv(0.0, 0.03, 0.0));
        assert!((n.drawer - (c.drawer_max - 0.03)).abs() < 1e-12);
    }

    #[test]
    fn pressing_red_button_saturates_depth() {
        let c = cfg();
        let mut s = rest();
        let red = c.button_centers[0];
        s.arm_pose[0] = red[0];
        s.arm_pose[1] = red[1];
        s.arm_pose[2] = c.button_top;
        // Hand evaluation: penetration = top - (top - 2 * max) = 2 * max, clamped to max.
        let n = step_state(&c, &s, &mv(0.0, 0.0, -2.0 * c.button_max));
        assert_eq!(n.buttons[0], c.button_max);
        assert_eq!(n.buttons[1], 0.0);
        assert_eq!(n.buttons[2], 0.0);
    }

    #[test]
    fn grasped_block_keeps_effector_frame_pose() {
        let c = cfg();
        let mut s = rest();
        s.arm_pose[0] = 0.01;
        s.arm_pose[1] = 0.02;
        s.arm_pose[2] = s.block_pose[2] + 0.01;
        s.gripper = [0.9, 0.9];
        assert!(is_grasped(&c, &s));
        let rel = |s: &EnvState| {
            let (ox, oy) = rot_z(-s.arm_pose[5], s.block_pose[0] - s.arm_pose[0], s.block_pose[1] - s.arm_pose[1]);
            [
                ox,
                oy,
                s.block_pose[2] - s.arm_pose[2],
                wrap_angle(s.block_pose[3] - s.arm_pose[3]),
                wrap_angle(s.block_pose[4] - s.arm_pose[4]),
                wrap_angle(s.block_pose[5] - s.arm_pose[5]),
            ]
        };
        let r0 = rel(&s);
        let mut cur = s;
        for t in 0..60 {
            let a = Action {
                delta_pose: [0.01, -0.004, 0.02, 0.01, -0.02, 0.05 * libm::sin(t as f64 * 0.2)],
                delta_gripper: [0.0, 0.0],
            };
            cur = step_state(&c, &cur, &a);
            assert!(is_grasped(&c, &cur));
            let r = rel(&cur);
            for k in 0..6 {
                assert!((r[k] - r0[k]).abs() < 1e-9, "tick {t} k {k}: {} vs {}", r[k], r0[k]);
            }
        }
        assert!(cur.block_pose[2] > c.lift_height);
    }

    #[test]
    fn releasing_drops_block_to_table() {
        let c = cfg();
        let mut s = rest();
        s.block_pose[2] = 0.3;
        s.arm_pose = [0.0, 0.0, 0.3, 0.0, 0.0, 0.0];
        s.gripper = [0.9, 0.9];
        let open = Action { delta_pose: [0.0; 6], delta_gripper: [-0.2, -0.2] };
        // 0.9 -> 0.7 still holds; 0.7 -> 0.5 opens below the grasp angle.
        let n = step_state(&c, &s, &open);
        assert_eq!(n.block_pose[2], 0.3);
        let n = step_state(&c, &n, &open);
        assert_eq!(n.block_pose[2], c.block_half_extents[2]);
    }

    #[test]
    fn side_push_moves_block_and_knocks_upright() {
        let c = cfg();
        let mut s = rest();
        s.block_pose = upright_block_pose(&c, 0.0, 0.0, 0.0);
        s.arm_pose = [-0.06, 0.0, 0.05, 0.0, 0.0, 0.0];
        assert!(is_upright(&s));
        let n = step_state(&c, &s, &mv(0.03, 0.0, 0.0));
        assert!(!is_upright(&n));
        assert!(n.block_pose[0] > 0.0);
        assert_eq!(n.block_pose[2], c.block_half_extents[2]);
        // flat block is pushed along x
        let mut s = rest();
        s.block_pose = flat_block_pose(&c, 0.0, 0.0, 0.0);
        s.arm_pose = [-0.08, 0.0, 0.02, 0.0, 0.0, 0.0];
        let n = step_state(&c, &s, &mv(0.03, 0.0, 0.0));
        let expected = n.arm_pose[0] + c.block_half_extents[0] + c.effector_radius;
        assert!((n.block_pose[0] - expected).abs() < 1e-12);
        assert_eq!(n.block_pose[1], 0.0);
    }

    #[test]
    fn descending_from_above_does_not_push() {
        let c = cfg();
        let mut s = rest();
        s.block_pose = flat_block_pose(&c, 0.0, 0.0, 0.0);
        s.arm_pose = [0.0, 0.0, 0.1, 0.0, 0.0, 0.0];
        let mut cur = s;
        for _ in 0..10 {
            cur = step_state(&c, &cur, &mv(0.0, 0.0, -0.02));
        }
        assert_eq!(cur.block_pose, s.block_pose);
    }

    #[test]
    fn state_closure_under_random_actions() {
        use rand::Rng as _;
        let c = cfg();
        let bounds = c.obs_bounds();
        let mut rng = crate::rng::rng_from_seed(3);
        let mut sim = Simulator::new(c.clone());
        for ep in 0..20 {
            sim.reset_seeded(ep);
            for _ in 0..500 {
                let mut v = [0.0; 8];
                for x in v.iter_mut() {
                    *x = rng.random_range(-0.5..0.5);
                }
                let s = sim.step(&Action::from_array(&v)).unwrap();
                let arr = s.to_array();
                for i in 0..OBS_DIM {
                    assert!(arr[i] >= bounds[i].0 && arr[i] <= bounds[i].1, "dim {i} = {}", arr[i]);
                }
            }
        }
    }

    #[test]
    fn replay_from_serialized_state_matches() {
        use rand::Rng as _;
        let c = cfg();
        let mut rng = crate::rng::rng_from_seed(11);
        let mut sim = Simulator::new(c.clone());
        sim.reset_seeded(5);
        let mut actions = alloc::vec::Vec::new();
        let mut states = alloc::vec::Vec::new();
        for _ in 0..200 {
            let mut v = [0.0; 8];
            for x in v.iter_mut() {
                *x = rng.random_range(-0.06..0.06);
            }
            let a = Action::from_array(&v);
            actions.push(a);
            states.push(sim.step(&a).unwrap());
        }
        let mid = states[99];
        let mut fresh = Simulator::new(c);
        fresh.reset_to(EnvState::from_array(&mid.to_array())).unwrap();
        for (a, expect) in actions[100..].iter().zip(&states[100..]) {
            assert_eq!(fresh.step(a).unwrap(), *expect);
        }
    }
}
