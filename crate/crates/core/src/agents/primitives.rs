//! Scripted manipulation primitives.
//!
//! A primitive compiles the current state into a short list of effector
//! waypoints; a proportional controller then drives the effector through
//! them one by one.

use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;
use core::fmt;

use rand::Rng as _;

use crate::math::{clamp, wrap_angle};
use crate::rng::Rng;
use crate::scene::{Action, EnvState, SceneConfig};
use crate::sim::{block_footprint, block_half_height, is_grasped, is_upright};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Primitive {
    Wander,
    Reach,
    Grasp,
    Lift,
    Place,
    OpenDrawer,
    CloseDrawer,
    OpenSlider,
    CloseSlider,
    PressRed,
    PressGreen,
    PressBlue,
    SweepLeft,
    SweepRight,
    RotateLeft,
    RotateRight,
    ShelfIn,
    ShelfOut,
    StandUpright,
}

impl Primitive {
    /// Everything the oracle can choose besides `Wander`.
    pub const CATALOG: [Primitive; 18] = [
        Primitive::Reach,
        Primitive::Grasp,
        Primitive::Lift,
        Primitive::Place,
        Primitive::OpenDrawer,
        Primitive::CloseDrawer,
        Primitive::OpenSlider,
        Primitive::CloseSlider,
        Primitive::PressRed,
        Primitive::PressGreen,
        Primitive::PressBlue,
        Primitive::SweepLeft,
        Primitive::SweepRight,
        Primitive::RotateLeft,
        Primitive::RotateRight,
        Primitive::ShelfIn,
        Primitive::ShelfOut,
        Primitive::StandUpright,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Primitive::Wander => "wander",
            Primitive::Reach => "reach",
            Primitive::Grasp => "grasp",
            Primitive::Lift => "lift",
            Primitive::Place => "place",
            Primitive::OpenDrawer => "open_drawer",
            Primitive::CloseDrawer => "close_drawer",
            Primitive::OpenSlider => "open_slider",
            Primitive::CloseSlider => "close_slider",
            Primitive::PressRed => "press_red",
            Primitive::PressGreen => "press_green",
            Primitive::PressBlue => "press_blue",
            Primitive::SweepLeft => "sweep_left",
            Primitive::SweepRight => "sweep_right",
            Primitive::RotateLeft => "rotate_left",
            Primitive::RotateRight => "rotate_right",
            Primitive::ShelfIn => "shelf_in",
            Primitive::ShelfOut => "shelf_out",
            Primitive::StandUpright => "stand_upright",
        }
    }

    pub fn from_name(name: &str) -> Option<Primitive> {
        core::iter::once(Primitive::Wander).chain(Primitive::CATALOG).find(|p| p.name() == name)
    }

    /// Whether the primitive makes sense from state `s`.
    pub fn applicable(self, cfg: &SceneConfig, s: &EnvState) -> bool {
        let held = is_grasped(cfg, s);
        let free_on_table = !held && on_table(cfg, s);
        let in_shelf = cfg.in_shelf(&s.block_pos());
        match self {
            Primitive::Wander | Primitive::Reach => true,
            Primitive::PressRed | Primitive::PressGreen | Primitive::PressBlue => true,
            Primitive::Grasp => !held,
            Primitive::Lift | Primitive::Place => held,
            Primitive::OpenDrawer => s.drawer < 0.8 * cfg.drawer_max,
            Primitive::CloseDrawer => s.drawer > 0.2 * cfg.drawer_max,
            Primitive::OpenSlider => s.slider < 0.8 * cfg.slider_max,
            Primitive::CloseSlider => s.slider > 0.2 * cfg.slider_max,
            Primitive::SweepLeft => free_on_table && s.block_pose[0] > cfg.workspace_min[0] + 0.45,
            Primitive::SweepRight => free_on_table && s.block_pose[0] < cfg.workspace_max[0] - 0.45,
            Primitive::RotateLeft | Primitive::RotateRight => free_on_table && !is_upright(s),
            Primitive::ShelfIn => !in_shelf,
            Primitive::ShelfOut => in_shelf && !held,
            Primitive::StandUpright => free_on_table && !is_upright(s),
        }
    }
}

impl fmt::Display for Primitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn on_table(cfg: &SceneConfig, s: &EnvState) -> bool {
    s.block_pose[2] - block_half_height(cfg, s) <= 0.005
}

/// Effector target. Angles left as `None` are held at their current value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Waypoint {
    pub pos: [f64; 3],
    pub yaw: Option<f64>,
    pub pitch: f64,
    pub fingers: f64,
    pub tol: f64,
    /// Extra ticks to remain at the waypoint once reached.
    pub dwell: u32,
}

impl Waypoint {
    fn at(pos: [f64; 3], fingers: f64) -> Self {
        Waypoint { pos, yaw: None, pitch: 0.0, fingers, tol: 0.006, dwell: 0 }
    }

    fn yaw(mut self, yaw: f64) -> Self {
        self.yaw = Some(yaw);
        self
    }

    fn pitch(mut self, pitch: f64) -> Self {
        self.pitch = pitch;
        self
    }

    fn dwell(mut self, ticks: u32) -> Self {
        self.dwell = ticks;
        self
    }

    pub fn reached(&self, s: &EnvState) -> bool {
        let e = s.effector();
        let d = libm::sqrt((0..3).map(|i| (e[i] - self.pos[i]) * (e[i] - self.pos[i])).sum::<f64>());
        let yaw_ok = self.yaw.map_or(true, |y| libm::fabs(wrap_angle(y - s.arm_pose[5])) < 0.03);
        let fingers_ok = libm::fabs(s.gripper[0] - self.fingers) < 0.03 && libm::fabs(s.gripper[1] - self.fingers) < 0.03;
        let pitch_ok = libm::fabs(s.arm_pose[4] - self.pitch) < 0.03 && libm::fabs(s.arm_pose[3]) < 0.03;
        d < self.tol && yaw_ok && fingers_ok && pitch_ok
    }
}

/// Controller parameters shared by the oracle and the scripted experts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlGains {
    pub pos_gain: f64,
    /// Max translation per tick (m).
    pub speed: f64,
    pub angle_gain: f64,
    pub angle_speed: f64,
    pub finger_speed: f64,
}

impl Default for ControlGains {
    fn default() -> Self {
        ControlGains { pos_gain: 0.5, speed: 0.025, angle_gain: 0.5, angle_speed: 0.1, finger_speed: 0.15 }
    }
}

/// Proportional action toward `wp`.
pub fn control_toward(s: &EnvState, wp: &Waypoint, g: &ControlGains) -> Action {
    let e = s.effector();
    let mut d = [0.0; 3];
    for i in 0..3 {
        d[i] = g.pos_gain * (wp.pos[i] - e[i]);
    }
    let norm = libm::sqrt(d.iter().map(|x| x * x).sum::<f64>());
    if norm > g.speed {
        for x in d.iter_mut() {
            *x *= g.speed / norm;
        }
    }
    let ang = |err: f64| clamp(g.angle_gain * err, -g.angle_speed, g.angle_speed);
    let yaw_err = wp.yaw.map_or(0.0, |y| y - s.arm_pose[5]);
    let fing = |cur: f64| clamp(wp.fingers - cur, -g.finger_speed, g.finger_speed);
    Action {
        delta_pose: [d[0], d[1], d[2], ang(-s.arm_pose[3]), ang(wp.pitch - s.arm_pose[4]), ang(yaw_err)],
        delta_gripper: [fing(s.gripper[0]), fing(s.gripper[1])],
    }
}

/// Randomizable knobs used while compiling a primitive into waypoints.
#[derive(Clone, Copy, Debug)]
pub struct PlanVariation {
    /// Uniform in `[0, 1]`; selects targets inside each primitive's range.
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl PlanVariation {
    pub const MID: PlanVariation = PlanVariation { a: 0.5, b: 0.5, c: 0.5 };

    pub fn random(rng: &mut Rng) -> Self {
        PlanVariation { a: rng.random(), b: rng.random(), c: rng.random() }
    }
}

fn lerp(lo: f64, hi: f64, t: f64) -> f64 {
    lo + (hi - lo) * t
}

const TRAVEL_Z: f64 = 0.2;
const CLOSED: f64 = 0.9;

fn grasp_steps(cfg: &SceneConfig, s: &EnvState, out: &mut Vec<Waypoint>) {
    let b = s.block_pos();
    let above = b[2] + block_half_height(cfg, s) + 0.06;
    out.push(Waypoint::at([b[0], b[1], above.max(TRAVEL_Z)], 0.0).yaw(0.0));
    out.push(Waypoint::at([b[0], b[1], b[2]], 0.0).yaw(0.0));
    out.push(Waypoint::at([b[0], b[1], b[2]], CLOSED).dwell(2));
}

/// Effector height that rests a held block's bottom `clearance` above `floor`.
fn release_height(cfg: &SceneConfig, s: &EnvState, floor: f64, clearance: f64) -> f64 {
    let offset = s.block_pose[2] - s.arm_pose[2];
    floor + block_half_height(cfg, s) + clearance - offset
}

/// Carries the block (grasping first when needed) to `(x, y)` over `floor`
/// and releases it there.
fn carry_steps(cfg: &SceneConfig, s: &EnvState, x: f64, y: f64, floor: f64, carry_z: f64, out: &mut Vec<Waypoint>) {
    let mut held_state = *s;
    if !is_grasped(cfg, s) {
        grasp_steps(cfg, s, out);
        held_state.arm_pose[0] = s.block_pose[0];
        held_state.arm_pose[1] = s.block_pose[1];
        held_state.arm_pose[2] = s.block_pose[2];
    }
    let here = [held_state.arm_pose[0], held_state.arm_pose[1]];
    let z_drop = release_height(cfg, &held_state, floor, 0.004);
    out.push(Waypoint::at([here[0], here[1], carry_z], CLOSED));
    out.push(Waypoint::at([x, y, carry_z], CLOSED));
    out.push(Waypoint::at([x, y, z_drop], CLOSED));
    out.push(Waypoint::at([x, y, z_drop], 0.0));
    out.push(Waypoint::at([x, y, carry_z.max(z_drop + 0.1)], 0.0));
}

/// Compiles primitive `p` from state `s` into waypoints.
pub fn plan(cfg: &SceneConfig, p: Primitive, s: &EnvState, v: PlanVariation) -> Vec<Waypoint> {
    let mut w = Vec::new();
    let e = s.effector();
    let held = is_grasped(cfg, s);
    let fingers_now = if held { CLOSED } else { 0.0 };
    // Leave low positions vertically so travel never clips objects.
    if e[2] < 0.12 && !matches!(p, Primitive::Lift | Primitive::Place) {
        w.push(Waypoint::at([e[0], e[1], TRAVEL_Z], fingers_now));
    }
    match p {
        Primitive::Wander => {
            let x = lerp(-0.8, 0.8, v.a);
            let y = lerp(-0.8, 0.3, v.b);
            let z = lerp(0.12, 0.5, v.c);
            let f = if held { CLOSED } else { lerp(0.0, 0.5, v.c) };
            w.push(Waypoint::at([x, y, z], f).yaw(lerp(-0.6, 0.6, v.a * v.b)));
        }
        Primitive::Reach => {
            let b = s.block_pos();
            let z = b[2] + block_half_height(cfg, s) + lerp(0.05, 0.15, v.a);
            w.push(Waypoint::at([b[0] + lerp(-0.05, 0.05, v.b), b[1] + lerp(-0.05, 0.05, v.c), z], fingers_now).dwell(3));
        }
        Primitive::Grasp => grasp_steps(cfg, s, &mut w),
        Primitive::Lift => {
            let z = lerp(cfg.lift_height + 0.03, 0.4, v.a);
            let dz = z - s.block_pose[2];
            w.push(Waypoint::at([e[0], e[1], e[2] + dz.max(0.05)], CLOSED).dwell(3));
        }
        Primitive::Place => {
            let x = lerp(cfg.block_region_min[0], cfg.block_region_max[0], v.a);
            let y = lerp(cfg.block_region_min[1], cfg.block_region_max[1], v.b);
            carry_steps(cfg, s, x, y, 0.0, TRAVEL_Z.max(e[2]), &mut w);
        }
        Primitive::OpenDrawer | Primitive::CloseDrawer => {
            let target = if p == Primitive::OpenDrawer {
                lerp(0.85, 1.0, v.a) * cfg.drawer_max
            } else {
                lerp(0.0, 0.08, v.a) * cfg.drawer_max
            };
            let h0 = cfg.drawer_handle_at(s.drawer);
            let h1 = cfg.drawer_handle_at(target);
            w.push(Waypoint::at([h0[0], h0[1], TRAVEL_Z], 0.0).yaw(0.0));
            w.push(Waypoint::at(h0, 0.0).yaw(0.0));
            w.push(Waypoint::at(h1, 0.0).yaw(0.0));
            w.push(Waypoint::at([h1[0], h1[1], TRAVEL_Z], 0.0));
        }
        Primitive::OpenSlider | Primitive::CloseSlider => {
            let target = if p == Primitive::OpenSlider {
                lerp(0.85, 1.0, v.a) * cfg.slider_max
            } else {
                lerp(0.0, 0.08, v.a) * cfg.slider_max
            };
            let h0 = cfg.slider_handle_at(s.slider);
            let h1 = cfg.slider_handle_at(target);
            let hover = h0[2] + 0.12;
            w.push(Waypoint::at([h0[0], h0[1], hover], 0.0).yaw(0.0));
            w.push(Waypoint::at(h0, 0.0).yaw(0.0));
            w.push(Waypoint::at(h1, 0.0).yaw(0.0));
            w.push(Waypoint::at([h1[0], h1[1], hover], 0.0));
        }
        Primitive::PressRed | Primitive::PressGreen | Primitive::PressBlue => {
            let i = match p {
                Primitive::PressRed => 0,
                Primitive::PressGreen => 1,
                _ => 2,
            };
            let c = cfg.button_centers[i];
            let off = cfg.button_radius * 0.4;
            let (cx, cy) = (c[0] + lerp(-off, off, v.a), c[1] + lerp(-off, off, v.b));
            w.push(Waypoint::at([cx, cy, 0.12], fingers_now).yaw(0.0));
            w.push(Waypoint::at([cx, cy, cfg.button_top - cfg.button_max - 0.004], fingers_now).dwell(2));
            w.push(Waypoint::at([cx, cy, 0.12], fingers_now));
        }
        Primitive::SweepLeft | Primitive::SweepRight => {
            let dir = if p == Primitive::SweepLeft { -1.0 } else { 1.0 };
            let b = s.block_pos();
            let (ax, _) = block_footprint(cfg, s);
            let start_x = b[0] - dir * (ax + cfg.effector_radius + 0.03);
            let z = cfg.effector_radius;
            let dist = lerp(0.2, 0.3, v.a);
            let end_x = clamp(b[0] + dir * dist, cfg.workspace_min[0] + 0.05, cfg.workspace_max[0] - 0.05);
            w.push(Waypoint::at([start_x, b[1], TRAVEL_Z], 0.0).yaw(0.0));
            w.push(Waypoint::at([start_x, b[1], z], 0.0).yaw(0.0));
            w.push(Waypoint::at([end_x, b[1], z], 0.0));
            w.push(Waypoint::at([end_x, b[1], TRAVEL_Z], 0.0));
        }
        Primitive::RotateLeft | Primitive::RotateRight => {
            let sign = if p == Primitive::RotateLeft { 1.0 } else { -1.0 };
            let b = s.block_pos();
            grasp_steps(cfg, s, &mut w);
            let turn = sign * lerp(0.8, 1.2, v.a);
            w.push(Waypoint::at(b, CLOSED).yaw(turn));
            w.push(Waypoint::at(b, 0.0).yaw(turn));
            w.push(Waypoint::at([b[0], b[1], TRAVEL_Z], 0.0).yaw(turn));
        }
        Primitive::ShelfIn => {
            let m = 0.08;
            let x = lerp(cfg.shelf_min[0] + m, cfg.shelf_max[0] - m, v.a);
            let y = lerp(cfg.shelf_min[1] + m, cfg.shelf_max[1] - m, v.b);
            carry_steps(cfg, s, x, y, cfg.shelf_floor(), cfg.shelf_max[2], &mut w);
        }
        Primitive::ShelfOut => {
            let x = lerp(cfg.block_region_min[0], cfg.block_region_max[0], v.a);
            let y = lerp(cfg.block_region_min[1], cfg.block_region_max[1], v.b);
            carry_steps(cfg, s, x, y, 0.0, cfg.shelf_max[2], &mut w);
        }
        Primitive::StandUpright => {
            let b = s.block_pos();
            grasp_steps(cfg, s, &mut w);
            let pitch = FRAC_PI_2 - 0.05;
            let lift_z = b[2] + 0.12;
            w.push(Waypoint::at([b[0], b[1], lift_z], CLOSED));
            w.push(Waypoint::at([b[0], b[1], lift_z], CLOSED).pitch(pitch));
            // Upright half height above the table, plus a little clearance.
            let drop_z = cfg.block_half_extents[0] + 0.005;
            w.push(Waypoint::at([b[0], b[1], drop_z], CLOSED).pitch(pitch));
            w.push(Waypoint::at([b[0], b[1], drop_z], 0.0).pitch(pitch));
            w.push(Waypoint::at([b[0], b[1], TRAVEL_Z], 0.0));
        }
    }
    w
}

/// A compiled primitive being executed.
#[derive(Clone, Debug)]
pub struct ActivePlan {
    pub primitive: Primitive,
    pub waypoints: Vec<Waypoint>,
    pub index: usize,
    pub dwell_left: u32,
    pub ticks: u32,
}

impl ActivePlan {
    pub fn new(cfg: &SceneConfig, primitive: Primitive, s: &EnvState, v: PlanVariation) -> Self {
        let waypoints = plan(cfg, primitive, s, v);
        let dwell_left = waypoints.first().map_or(0, |w| w.dwell);
        ActivePlan { primitive, waypoints, index: 0, dwell_left, ticks: 0 }
    }

    pub fn finished(&self) -> bool {
        self.index >= self.waypoints.len()
    }

    /// Advances past reached waypoints, then returns the action toward the
    /// current one (zero once the plan is finished).
    pub fn act(&mut self, s: &EnvState, gains: &ControlGains) -> Action {
        self.ticks += 1;
        while let Some(wp) = self.waypoints.get(self.index) {
            if !wp.reached(s) {
                break;
            }
            if self.dwell_left > 0 {
                self.dwell_left -= 1;
                return control_toward(s, wp, gains);
            }
            self.index += 1;
            self.dwell_left = self.waypoints.get(self.index).map_or(0, |w| w.dwell);
        }
        match self.waypoints.get(self.index) {
            Some(wp) => control_toward(s, wp, gains),
            None => Action::ZERO,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::step_state;

    fn run(cfg: &SceneConfig, p: Primitive, s0: EnvState, limit: u32) -> (EnvState, bool) {
        let mut plan = ActivePlan::new(cfg, p, &s0, PlanVariation::MID);
        let mut s = s0;
        let g = ControlGains::default();
        while plan.ticks < limit {
            let a = plan.act(&s, &g);
            if plan.finished() {
                return (s, true);
            }
            s = step_state(cfg, &s, &a);
        }
        (s, false)
    }

    #[test]
    fn names_round_trip() {
        for p in Primitive::CATALOG {
            assert_eq!(Primitive::from_name(p.name()), Some(p));
        }
        assert_eq!(Primitive::from_name("wander"), Some(Primitive::Wander));
    }

    #[test]
    fn controller_is_zero_at_setpoint() {
        let cfg = SceneConfig::default();
        let s = crate::sim::sample_rest_state(&cfg, &mut crate::rng::rng_from_seed(1));
        let wp = Waypoint::at(s.effector(), 0.0).yaw(0.0);
        assert!(wp.reached(&s));
        let a = control_toward(&s, &wp, &ControlGains::default());
        assert!(a.to_array().iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn grasp_then_lift_holds_block() {
        let cfg = SceneConfig::default();
        let s0 = crate::sim::sample_rest_state(&cfg, &mut crate::rng::rng_from_seed(2));
        let (s1, done) = run(&cfg, Primitive::Grasp, s0, 300);
        assert!(done);
        assert!(is_grasped(&cfg, &s1));
        let (s2, done) = run(&cfg, Primitive::Lift, s1, 300);
        assert!(done);
        assert!(is_grasped(&cfg, &s2));
        assert!(s2.block_pose[2] >= cfg.lift_height);
    }

    #[test]
    fn stand_upright_then_sweep_knocks_over() {
        let cfg = SceneConfig::default();
        let s0 = crate::sim::sample_rest_state(&cfg, &mut crate::rng::rng_from_seed(4));
        let (s1, done) = run(&cfg, Primitive::StandUpright, s0, 400);
        assert!(done);
        assert!(is_upright(&s1), "{:?}", s1.block_pose);
        assert!(!is_grasped(&cfg, &s1));
        let (s2, _) = run(&cfg, Primitive::SweepRight, s1, 400);
        assert!(!is_upright(&s2));
    }

    #[test]
    fn shelf_round_trip() {
        let cfg = SceneConfig::default();
        let s0 = crate::sim::sample_rest_state(&cfg, &mut crate::rng::rng_from_seed(5));
        let (s1, done) = run(&cfg, Primitive::ShelfIn, s0, 500);
        assert!(done);
        assert!(cfg.in_shelf(&s1.block_pos()), "{:?}", s1.block_pose);
        let (s2, done) = run(&cfg, Primitive::ShelfOut, s1, 500);
        assert!(done);
        assert!(!cfg.in_shelf(&s2.block_pos()));
        assert!(on_table(&cfg, &s2));
    }
}
