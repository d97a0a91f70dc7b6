use alloc::vec::Vec;

use crate::scene::{Action, EnvState, SceneConfig};
use crate::tasks::TaskId;

use super::primitives::{ActivePlan, ControlGains, PlanVariation, Primitive};
use super::Agent;

/// Fixed primitive sequence that solves `task` from the initial state.
pub fn expert_plan(task: TaskId, initial: &EnvState) -> Vec<Primitive> {
    use Primitive as P;
    match task {
        TaskId::GraspLift | TaskId::GraspUpright | TaskId::GraspFlat => alloc::vec![P::Grasp, P::Lift],
        TaskId::Drawer => alloc::vec![P::OpenDrawer],
        TaskId::CloseDrawer => alloc::vec![P::CloseDrawer],
        TaskId::OpenSliding => alloc::vec![P::OpenSlider],
        TaskId::CloseSliding => alloc::vec![P::CloseSlider],
        TaskId::KnockObject | TaskId::SweepObject => {
            if initial.block_pose[0] <= 0.0 {
                alloc::vec![P::SweepRight]
            } else {
                alloc::vec![P::SweepLeft]
            }
        }
        TaskId::SweepLeft => alloc::vec![P::SweepLeft],
        TaskId::SweepRight => alloc::vec![P::SweepRight],
        TaskId::PushRedButton => alloc::vec![P::PressRed],
        TaskId::PushGreenButton => alloc::vec![P::PressGreen],
        TaskId::PushBlueButton => alloc::vec![P::PressBlue],
        TaskId::PutIntoShelf => alloc::vec![P::ShelfIn],
        TaskId::PullOutOfShelf => alloc::vec![P::ShelfOut],
        TaskId::RotateLeft => alloc::vec![P::RotateLeft],
        TaskId::RotateRight => alloc::vec![P::RotateRight],
    }
}

/// Noise-free scripted solver for one benchmark task.
#[derive(Clone, Debug)]
pub struct ScriptedExpert {
    pub task: TaskId,
    scene: SceneConfig,
    gains: ControlGains,
    queue: Vec<Primitive>,
    active: Option<ActivePlan>,
}

impl ScriptedExpert {
    pub fn new(scene: SceneConfig, task: TaskId) -> Self {
        ScriptedExpert { task, scene, gains: ControlGains::default(), queue: Vec::new(), active: None }
    }
}

impl Agent for ScriptedExpert {
    fn begin(&mut self, initial: &EnvState, _goal: &EnvState) {
        self.queue = expert_plan(self.task, initial);
        self.queue.reverse();
        self.active = None;
    }

    fn act(&mut self, s: &EnvState) -> Action {
        loop {
            if self.active.as_ref().map_or(true, |p| p.finished()) {
                match self.queue.pop() {
                    Some(p) => self.active = Some(ActivePlan::new(&self.scene, p, s, PlanVariation::MID)),
                    None => return Action::ZERO,
                }
            }
            let plan = self.active.as_mut().expect("plan set above");
            let a = plan.act(s, &self.gains);
            if !plan.finished() {
                return a;
            }
        }
    }
}
