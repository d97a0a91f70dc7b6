//! Observation / action types and the playroom geometry.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

pub const ROBOT_DIM: usize = 8;
pub const ENV_DIM: usize = 11;
pub const OBS_DIM: usize = ROBOT_DIM + ENV_DIM;
pub const ACT_DIM: usize = 8;

/// Names of the flattened observation coordinates, in order.
pub const OBS_NAMES: [&str; OBS_DIM] = [
    "arm_x", "arm_y", "arm_z", "arm_roll", "arm_pitch", "arm_yaw", "finger_left", "finger_right",
    "block_x", "block_y", "block_z", "block_roll", "block_pitch", "block_yaw", "drawer", "slider",
    "button_red", "button_green", "button_blue",
];

pub const ACT_NAMES: [&str; ACT_DIM] = [
    "d_x", "d_y", "d_z", "d_roll", "d_pitch", "d_yaw", "d_finger_left", "d_finger_right",
];

/// Button order inside [`EnvState::buttons`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Button {
    Red = 0,
    Green = 1,
    Blue = 2,
}

/// Full simulator state; also the policy observation.
///
/// Flattens to 19 reals: 8 robot coordinates followed by 11 environment
/// coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnvState {
    /// End-effector position (m) and roll / pitch / yaw (rad).
    pub arm_pose: [f64; 6],
    /// Finger angles (rad); larger means more closed.
    pub gripper: [f64; 2],
    pub block_pose: [f64; 6],
    pub drawer: f64,
    pub slider: f64,
    /// Depression depth of the red, green and blue buttons.
    pub buttons: [f64; 3],
}

impl EnvState {
    pub fn to_array(&self) -> [f64; OBS_DIM] {
        let mut out = [0.0; OBS_DIM];
        out[0..6].copy_from_slice(&self.arm_pose);
        out[6..8].copy_from_slice(&self.gripper);
        out[8..14].copy_from_slice(&self.block_pose);
        out[14] = self.drawer;
        out[15] = self.slider;
        out[16..19].copy_from_slice(&self.buttons);
        out
    }

    pub fn from_array(v: &[f64; OBS_DIM]) -> Self {
        let mut s = EnvState {
            arm_pose: [0.0; 6],
            gripper: [0.0; 2],
            block_pose: [0.0; 6],
            drawer: v[14],
            slider: v[15],
            buttons: [0.0; 3],
        };
        s.arm_pose.copy_from_slice(&v[0..6]);
        s.gripper.copy_from_slice(&v[6..8]);
        s.block_pose.copy_from_slice(&v[8..14]);
        s.buttons.copy_from_slice(&v[16..19]);
        s
    }

    pub fn from_slice(v: &[f64]) -> Option<Self> {
        let arr: &[f64; OBS_DIM] = v.try_into().ok()?;
        Some(Self::from_array(arr))
    }

    /// The 11 environment coordinates (block, drawer, slider, buttons).
    pub fn env_part(&self) -> [f64; ENV_DIM] {
        let a = self.to_array();
        let mut out = [0.0; ENV_DIM];
        out.copy_from_slice(&a[ROBOT_DIM..]);
        out
    }

    pub fn effector(&self) -> [f64; 3] {
        [self.arm_pose[0], self.arm_pose[1], self.arm_pose[2]]
    }

    pub fn block_pos(&self) -> [f64; 3] {
        [self.block_pose[0], self.block_pose[1], self.block_pose[2]]
    }

    pub fn block_yaw(&self) -> f64 {
        self.block_pose[5]
    }

    pub fn button(&self, b: Button) -> f64 {
        self.buttons[b as usize]
    }
}

/// Per-tick delta command.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Action {
    pub delta_pose: [f64; 6],
    pub delta_gripper: [f64; 2],
}

impl Action {
    pub const ZERO: Action = Action { delta_pose: [0.0; 6], delta_gripper: [0.0; 2] };

    pub fn to_array(&self) -> [f64; ACT_DIM] {
        let mut out = [0.0; ACT_DIM];
        out[0..6].copy_from_slice(&self.delta_pose);
        out[6..8].copy_from_slice(&self.delta_gripper);
        out
    }

    pub fn from_array(v: &[f64; ACT_DIM]) -> Self {
        let mut a = Action::ZERO;
        a.delta_pose.copy_from_slice(&v[0..6]);
        a.delta_gripper.copy_from_slice(&v[6..8]);
        a
    }

    pub fn from_slice(v: &[f64]) -> Option<Self> {
        let arr: &[f64; ACT_DIM] = v.try_into().ok()?;
        Some(Self::from_array(arr))
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum SceneError {
    #[error("degenerate range for {0}: max must exceed min")]
    DegenerateRange(&'static str),
    #[error("{0} must be positive")]
    NonPositive(&'static str),
    #[error("unknown scene key `{0}`")]
    UnknownKey(alloc::string::String),
}

/// Playroom geometry and contact constants. All lengths in meters, angles in
/// radians.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneConfig {
    pub workspace_min: [f64; 3],
    pub workspace_max: [f64; 3],
    /// Effector roll and pitch stay inside `[-tilt, tilt]`.
    pub arm_tilt_limit: f64,
    pub arm_yaw_limit: f64,
    pub finger_max: f64,
    /// Both fingers at or beyond this angle count as closed.
    pub grasp_angle: f64,
    pub grasp_radius: f64,
    pub effector_radius: f64,
    /// Block half extents along its local x (long axis), y and z.
    pub block_half_extents: [f64; 3],
    /// Table region (x, y) where rest configurations place the block.
    pub block_region_min: [f64; 2],
    pub block_region_max: [f64; 2],
    pub drawer_max: f64,
    /// Drawer handle position when the drawer is closed; it opens along -y.
    pub drawer_handle: [f64; 3],
    pub slider_max: f64,
    /// Sliding-door handle position when closed; the door opens along +x.
    pub slider_handle: [f64; 3],
    pub handle_radius: f64,
    pub button_max: f64,
    pub press_threshold: f64,
    pub button_radius: f64,
    pub button_top: f64,
    /// Depth a released button recovers per tick.
    pub button_release: f64,
    pub button_centers: [[f64; 2]; 3],
    /// Shelf box behind the sliding door; its floor is `shelf_min[2]`.
    pub shelf_min: [f64; 3],
    pub shelf_max: [f64; 3],
    pub lift_height: f64,
    pub upright_tol: f64,
    pub flat_tol: f64,
    pub rotate_angle: f64,
    pub sweep_distance: f64,
    pub max_delta_pos: f64,
    pub max_delta_angle: f64,
    pub max_delta_finger: f64,
    pub arm_home: [f64; 3],
    pub control_hz: f64,
    pub task_budget: usize,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            workspace_min: [-1.0, -1.0, 0.0],
            workspace_max: [1.0, 1.0, 1.0],
            arm_tilt_limit: FRAC_PI_2,
            arm_yaw_limit: PI,
            finger_max: 1.0,
            grasp_angle: 0.6,
            grasp_radius: 0.05,
            effector_radius: 0.02,
            block_half_extents: [0.05, 0.02, 0.02],
            block_region_min: [-0.3, -0.25],
            block_region_max: [0.3, 0.2],
            drawer_max: 0.25,
            drawer_handle: [0.55, -0.45, 0.08],
            slider_max: 0.25,
            slider_handle: [-0.45, 0.45, 0.3],
            handle_radius: 0.04,
            button_max: 0.02,
            press_threshold: 0.015,
            button_radius: 0.035,
            button_top: 0.03,
            button_release: 0.005,
            button_centers: [[0.45, 0.35], [0.6, 0.35], [0.75, 0.35]],
            shelf_min: [-0.8, 0.5, 0.25],
            shelf_max: [-0.35, 0.8, 0.45],
            lift_height: 0.15,
            upright_tol: 0.3,
            flat_tol: 0.3,
            rotate_angle: 0.6,
            sweep_distance: 0.15,
            max_delta_pos: 0.05,
            max_delta_angle: 0.15,
            max_delta_finger: 0.2,
            arm_home: [0.0, -0.5, 0.3],
            control_hz: 30.0,
            task_budget: 450,
        }
    }
}

/// A coordinate range violation found by [`SceneConfig::check_state`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RangeViolation {
    pub index: usize,
    pub value: f64,
    pub low: f64,
    pub high: f64,
}

impl SceneConfig {
    pub fn validate(&self) -> Result<(), SceneError> {
        for (i, name) in ["workspace.x", "workspace.y", "workspace.z"].iter().enumerate() {
            if self.workspace_max[i] <= self.workspace_min[i] {
                return Err(SceneError::DegenerateRange(name));
            }
        }
        for (i, name) in ["shelf.x", "shelf.y", "shelf.z"].iter().enumerate() {
            if self.shelf_max[i] <= self.shelf_min[i] {
                return Err(SceneError::DegenerateRange(name));
            }
        }
        for (i, name) in ["block_region.x", "block_region.y"].iter().enumerate() {
            if self.block_region_max[i] <= self.block_region_min[i] {
                return Err(SceneError::DegenerateRange(name));
            }
        }
        let positives = [
            (self.drawer_max, "drawer_max"),
            (self.slider_max, "slider_max"),
            (self.button_max, "button_max"),
            (self.finger_max, "finger_max"),
            (self.grasp_radius, "grasp_radius"),
            (self.handle_radius, "handle_radius"),
            (self.button_radius, "button_radius"),
            (self.control_hz, "control_hz"),
            (self.max_delta_pos, "max_delta_pos"),
            (self.max_delta_angle, "max_delta_angle"),
            (self.max_delta_finger, "max_delta_finger"),
            (self.arm_tilt_limit, "arm_tilt_limit"),
            (self.arm_yaw_limit, "arm_yaw_limit"),
        ];
        for (v, name) in positives {
            if !(v > 0.0) {
                return Err(SceneError::NonPositive(name));
            }
        }
        Ok(())
    }

    /// Closed range of every observation coordinate.
    pub fn obs_bounds(&self) -> [(f64, f64); OBS_DIM] {
        let w0 = self.workspace_min;
        let w1 = self.workspace_max;
        let t = self.arm_tilt_limit;
        let y = self.arm_yaw_limit;
        [
            (w0[0], w1[0]),
            (w0[1], w1[1]),
            (w0[2], w1[2]),
            (-t, t),
            (-t, t),
            (-y, y),
            (0.0, self.finger_max),
            (0.0, self.finger_max),
            (w0[0], w1[0]),
            (w0[1], w1[1]),
            (w0[2], w1[2]),
            (-PI, PI),
            (-PI, PI),
            (-PI, PI),
            (0.0, self.drawer_max),
            (0.0, self.slider_max),
            (0.0, self.button_max),
            (0.0, self.button_max),
            (0.0, self.button_max),
        ]
    }

    /// Per-dimension action bound `b`; each action coordinate lives in `[-b, b]`.
    pub fn action_bounds(&self) -> [f64; ACT_DIM] {
        let p = self.max_delta_pos;
        let a = self.max_delta_angle;
        let f = self.max_delta_finger;
        [p, p, p, a, a, a, f, f]
    }

    pub fn check_state(&self, s: &EnvState) -> Result<(), RangeViolation> {
        let v = s.to_array();
        for (index, (&x, &(low, high))) in v.iter().zip(self.obs_bounds().iter()).enumerate() {
            if !(x >= low && x <= high) {
                return Err(RangeViolation { index, value: x, low, high });
            }
        }
        Ok(())
    }

    pub fn clamp_action(&self, a: &Action) -> Action {
        let b = self.action_bounds();
        let mut v = a.to_array();
        for (x, &bound) in v.iter_mut().zip(b.iter()) {
            // NaN commands become zero rather than poisoning the state.
            *x = if x.is_nan() { 0.0 } else { x.clamp(-bound, bound) };
        }
        Action::from_array(&v)
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.control_hz
    }

    pub fn ticks_per_minute(&self) -> usize {
        libm::round(self.control_hz * 60.0) as usize
    }

    /// Handle position of the drawer at extension `drawer`.
    pub fn drawer_handle_at(&self, drawer: f64) -> [f64; 3] {
        let h = self.drawer_handle;
        [h[0], h[1] - drawer, h[2]]
    }

    pub fn slider_handle_at(&self, slider: f64) -> [f64; 3] {
        let h = self.slider_handle;
        [h[0] + slider, h[1], h[2]]
    }

    pub fn shelf_floor(&self) -> f64 {
        self.shelf_min[2]
    }

    pub fn in_shelf_footprint(&self, x: f64, y: f64) -> bool {
        x >= self.shelf_min[0] && x <= self.shelf_max[0] && y >= self.shelf_min[1] && y <= self.shelf_max[1]
    }

    /// True when the block center lies inside the shelf box.
    pub fn in_shelf(&self, p: &[f64; 3]) -> bool {
        self.in_shelf_footprint(p[0], p[1]) && p[2] >= self.shelf_min[2] && p[2] <= self.shelf_max[2]
    }

    /// Every tunable scalar, keyed by its config name.
    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        let mut out = Vec::new();
        macro_rules! arr {
            ($field:ident, $($name:literal),+) => {{
                let names = [$($name),+];
                for (i, n) in names.iter().enumerate() {
                    out.push((*n, self.$field[i]));
                }
            }};
        }
        arr!(workspace_min, "workspace_min.x", "workspace_min.y", "workspace_min.z");
        arr!(workspace_max, "workspace_max.x", "workspace_max.y", "workspace_max.z");
        out.push(("arm_tilt_limit", self.arm_tilt_limit));
        out.push(("arm_yaw_limit", self.arm_yaw_limit));
        out.push(("finger_max", self.finger_max));
        out.push(("grasp_angle", self.grasp_angle));
        out.push(("grasp_radius", self.grasp_radius));
        out.push(("effector_radius", self.effector_radius));
        arr!(block_half_extents, "block_half_extents.x", "block_half_extents.y", "block_half_extents.z");
        arr!(block_region_min, "block_region_min.x", "block_region_min.y");
        arr!(block_region_max, "block_region_max.x", "block_region_max.y");
        out.push(("drawer_max", self.drawer_max));
        arr!(drawer_handle, "drawer_handle.x", "drawer_handle.y", "drawer_handle.z");
        out.push(("slider_max", self.slider_max));
        arr!(slider_handle, "slider_handle.x", "slider_handle.y", "slider_handle.z");
        out.push(("handle_radius", self.handle_radius));
        out.push(("button_max", self.button_max));
        out.push(("press_threshold", self.press_threshold));
        out.push(("button_radius", self.button_radius));
        out.push(("button_top", self.button_top));
        out.push(("button_release", self.button_release));
        let button_keys =
            [("button_red.x", "button_red.y"), ("button_green.x", "button_green.y"), ("button_blue.x", "button_blue.y")];
        for (i, (kx, ky)) in button_keys.into_iter().enumerate() {
            out.push((kx, self.button_centers[i][0]));
            out.push((ky, self.button_centers[i][1]));
        }
        arr!(shelf_min, "shelf_min.x", "shelf_min.y", "shelf_min.z");
        arr!(shelf_max, "shelf_max.x", "shelf_max.y", "shelf_max.z");
        out.push(("lift_height", self.lift_height));
        out.push(("upright_tol", self.upright_tol));
        out.push(("flat_tol", self.flat_tol));
        out.push(("rotate_angle", self.rotate_angle));
        out.push(("sweep_distance", self.sweep_distance));
        out.push(("max_delta_pos", self.max_delta_pos));
        out.push(("max_delta_angle", self.max_delta_angle));
        out.push(("max_delta_finger", self.max_delta_finger));
        arr!(arm_home, "arm_home.x", "arm_home.y", "arm_home.z");
        out.push(("control_hz", self.control_hz));
        out.push(("task_budget", self.task_budget as f64));
        out
    }

    /// Sets one scalar by its [`entries`](Self::entries) name.
    pub fn set(&mut self, key: &str, value: f64) -> Result<(), SceneError> {
        fn idx(axis: &str) -> Option<usize> {
            match axis {
                "x" => Some(0),
                "y" => Some(1),
                "z" => Some(2),
                _ => None,
            }
        }
        let unknown = || SceneError::UnknownKey(alloc::string::String::from(key));
        if let Some((base, axis)) = key.split_once('.') {
            let i = idx(axis).ok_or_else(unknown)?;
            let slot: &mut f64 = match base {
                "workspace_min" => &mut self.workspace_min[i],
                "workspace_max" => &mut self.workspace_max[i],
                "block_half_extents" => &mut self.block_half_extents[i],
                "drawer_handle" => &mut self.drawer_handle[i],
                "slider_handle" => &mut self.slider_handle[i],
                "shelf_min" => &mut self.shelf_min[i],
                "shelf_max" => &mut self.shelf_max[i],
                "arm_home" => &mut self.arm_home[i],
                "block_region_min" if i < 2 => &mut self.block_region_min[i],
                "block_region_max" if i < 2 => &mut self.block_region_max[i],
                "button_red" if i < 2 => &mut self.button_centers[0][i],
                "button_green" if i < 2 => &mut self.button_centers[1][i],
                "button_blue" if i < 2 => &mut self.button_centers[2][i],
                _ => return Err(unknown()),
            };
            *slot = value;
            return Ok(());
        }
        let slot: &mut f64 = match key {
            "arm_tilt_limit" => &mut self.arm_tilt_limit,
            "arm_yaw_limit" => &mut self.arm_yaw_limit,
            "finger_max" => &mut self.finger_max,
            "grasp_angle" => &mut self.grasp_angle,
            "grasp_radius" => &mut self.grasp_radius,
            "effector_radius" => &mut self.effector_radius,
            "drawer_max" => &mut self.drawer_max,
            "slider_max" => &mut self.slider_max,
            "handle_radius" => &mut self.handle_radius,
            "button_max" => &mut self.button_max,
            "press_threshold" => &mut self.press_threshold,
            "button_radius" => &mut self.button_radius,
            "button_top" => &mut self.button_top,
            "button_release" => &mut self.button_release,
            "lift_height" => &mut self.lift_height,
            "upright_tol" => &mut self.upright_tol,
            "flat_tol" => &mut self.flat_tol,
            "rotate_angle" => &mut self.rotate_angle,
            "sweep_distance" => &mut self.sweep_distance,
            "max_delta_pos" => &mut self.max_delta_pos,
            "max_delta_angle" => &mut self.max_delta_angle,
            "max_delta_finger" => &mut self.max_delta_finger,
            "control_hz" => &mut self.control_hz,
            "task_budget" => {
                if !(value >= 0.0) {
                    return Err(SceneError::NonPositive("task_budget"));
                }
                self.task_budget = value as usize;
                return Ok(());
            }
            _ => return Err(unknown()),
        };
        *slot = value;
        Ok(())
    }
}
