use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    parse_interaction, parse_subgoal_kind, parse_targets, EpisodeResult, FailureReason, ParsedInteraction, SubgoalKind,
    SubgoalOutcome, Task,
};
use crate::classes::{LargeClass, ObjectClass};
use crate::exploration::{coverage_metrics, run_exploration, ExplorationOutput, PolicyConfig, SubgoalTargets};
use crate::geometry::{Horizon, Pose};
use crate::perception::NoiseModel;
use crate::planner::{backtrack_horizons, look_to, plan_path, select_horizon, PlanNode};
use crate::scalar::Confidence;
use crate::seeding::stream;
use crate::waypoints::{resolve_target, WaypointOptions};
use crate::world::{
    gt_waypoints_in, Action, Interaction, InteractionKind, ObjectRef, Phase, Scene, Simulator, StepOutcome, StepRecord,
    WorldError,
};

const EXEC_STREAM: u64 = 0xE8EC;

/// Ground-truth replacement of pipeline stages.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMode {
    #[default]
    None,
    /// Teleport to a true waypoint of the annotated instance; no exploration.
    GtNavigation,
    /// As above, and take subgoal kinds and targets from annotations.
    GtAll,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Perturbation {
    #[default]
    None,
    /// Shift the arrival cell to a random navigable 4-neighbour.
    Displacement,
    /// Random arrival horizon, with no search and no backtracking.
    Horizon,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExecConfig {
    pub policy: PolicyConfig,
    pub noise: NoiseModel,
    pub oracle: OracleMode,
    pub perturbation: Perturbation,
    pub waypoints: WaypointOptions,
    pub no_horizon_search: bool,
}

/// Everything an episode produced.
#[derive(Debug, Clone)]
pub struct EpisodeRun<T: Confidence = f32> {
    pub result: EpisodeResult,
    pub records: Vec<StepRecord>,
    pub exploration: Option<ExplorationOutput<T>>,
}

enum Step {
    Nav { targets: SubgoalTargets, instance: Option<ObjectRef> },
    Act(ParsedInteraction),
}

fn interpret(task: &Task, gt: bool) -> Result<Vec<Step>, FailureReason> {
    let n = task.subgoals.len();
    (0..n)
        .map(|i| {
            let sg = &task.subgoals[i];
            let kind = if gt { sg.kind } else { parse_subgoal_kind(&sg.instruction).map_err(|_| FailureReason::Parse)? };
            Ok(match (kind, gt) {
                (SubgoalKind::Navigation, true) => Step::Nav {
                    targets: SubgoalTargets {
                        target: sg.target,
                        container: sg.container,
                        nav_noun: sg.container.map(Into::into).unwrap_or(sg.target),
                    },
                    instance: sg.instance,
                },
                (SubgoalKind::Navigation, false) => {
                    let next = task.subgoals.get(i + 1).map(|s| s.instruction.as_str());
                    let (target, container) = parse_targets(&sg.instruction, next).map_err(|_| FailureReason::Parse)?;
                    let (nav_noun, _) = parse_targets(&sg.instruction, None).map_err(|_| FailureReason::Parse)?;
                    Step::Nav { targets: SubgoalTargets { target, container, nav_noun }, instance: sg.instance }
                }
                (SubgoalKind::Interaction, true) => Step::Act(ParsedInteraction {
                    kind: sg.interaction.ok_or(FailureReason::Parse)?,
                    target: sg.target,
                    container: sg.container,
                    item: None,
                }),
                (SubgoalKind::Interaction, false) => {
                    Step::Act(parse_interaction(&sg.instruction).map_err(|_| FailureReason::Parse)?)
                }
            })
        })
        .collect()
}

struct Executor<'s, 'c, T: Confidence, R: Rng> {
    sim: Simulator<'s>,
    config: &'c ExecConfig,
    rng: R,
    exploration: Option<ExplorationOutput<T>>,
    last_container: Option<LargeClass>,
    opened: BTreeSet<LargeClass>,
}

type StepResult<X> = Result<X, FailureReason>;

fn budget(e: WorldError) -> FailureReason {
    match e {
        WorldError::BudgetExhausted { .. } => FailureReason::Budget,
        _ => FailureReason::Interaction,
    }
}

impl<T: Confidence, R: Rng> Executor<'_, '_, T, R> {
    fn navigate(&mut self, targets: SubgoalTargets, instance: Option<ObjectRef>) -> StepResult<Option<Horizon>> {
        self.last_container = targets.container.or(targets.target.as_large());
        match self.config.oracle {
            OracleMode::None => self.navigate_with_map(targets)?,
            OracleMode::GtNavigation | OracleMode::GtAll => {
                let Some(pose) = self.teleport_to_truth(instance)? else {
                    return Ok(Some(self.sim.pose().h));
                };
                if self.config.perturbation == Perturbation::None {
                    return Ok(Some(pose.h));
                }
            }
        }
        self.settle_horizon(targets.target)
    }

    fn navigate_with_map(&mut self, targets: SubgoalTargets) -> StepResult<()> {
        let ex = self.exploration.as_ref().expect("exploration ran");
        let grid = ex.planning_grid();
        let w = resolve_target(&ex.map, &grid, &ex.log, targets.target, targets.container, &self.config.waypoints)
            .map_err(|_| FailureReason::NoWaypoint)?;
        let here = ex.anchor.to_map(self.sim.pose());
        let plan = plan_path(&grid, PlanNode::from(here), PlanNode::new(w.cell.x, w.cell.y, w.r))
            .map_err(|_| FailureReason::Unreachable)?;
        for a in plan.actions {
            if self.sim.act(a, false).map_err(budget)? == StepOutcome::Failure {
                return Err(FailureReason::Blocked);
            }
        }
        Ok(())
    }

    /// Places the agent at a true waypoint, applying any displacement.
    /// Returns the oracle pose.
    fn teleport_to_truth(&mut self, instance: Option<ObjectRef>) -> StepResult<Option<Pose>> {
        let instance = instance.ok_or(FailureReason::NoWaypoint)?;
        let poses: Vec<Pose> = gt_waypoints_in(self.sim.scene(), self.sim.objects(), instance).into_iter().collect();
        if poses.is_empty() {
            return Err(FailureReason::NoWaypoint);
        }
        let mut pose = poses[self.rng.random_range(0..poses.len())];
        match self.config.perturbation {
            Perturbation::None => {}
            Perturbation::Displacement => {
                let mut offsets = [(1, 0), (-1, 0), (0, 1), (0, -1)];
                offsets.shuffle(&mut self.rng);
                if let Some(c) = offsets
                    .iter()
                    .map(|&(dx, dy)| pose.cell().offset(dx, dy))
                    .find(|&c| self.sim.scene().is_navigable(c))
                {
                    pose = pose.with_cell(c);
                }
            }
            Perturbation::Horizon => {
                pose.h = Horizon::LADDER[self.rng.random_range(0..Horizon::LADDER.len())];
            }
        }
        self.sim.teleport(pose).map_err(|_| FailureReason::NoWaypoint)?;
        Ok(Some(pose))
    }

    fn settle_horizon(&mut self, target: ObjectClass) -> StepResult<Option<Horizon>> {
        match self.config.perturbation {
            Perturbation::Horizon => {
                if self.config.oracle == OracleMode::None {
                    let h = Horizon::LADDER[self.rng.random_range(0..Horizon::LADDER.len())];
                    look_to(&mut self.sim, h).map_err(budget)?;
                }
                Ok(Some(self.sim.pose().h))
            }
            _ if self.config.no_horizon_search => Ok(Some(self.sim.pose().h)),
            _ => {
                let h = select_horizon::<T, R>(&mut self.sim, target, &self.config.noise, &mut self.rng).map_err(budget)?;
                Ok(Some(h.unwrap_or(self.sim.pose().h)))
            }
        }
    }

    /// Issues `interaction`, retrying at neighbouring horizons on failure.
    fn attempt(&mut self, interaction: Interaction) -> StepResult<()> {
        let here = self.sim.pose().h;
        let horizons =
            if self.config.perturbation == Perturbation::Horizon { vec![here] } else { backtrack_horizons(here) };
        for h in horizons {
            look_to(&mut self.sim, h).map_err(budget)?;
            if self.sim.act(Action::Interact(interaction), false).map_err(budget)? == StepOutcome::Success {
                return Ok(());
            }
        }
        look_to(&mut self.sim, here).map_err(budget)?;
        Err(FailureReason::Interaction)
    }

    fn interact(&mut self, p: ParsedInteraction) -> StepResult<()> {
        let act = |kind, target: ObjectClass| Interaction { kind, target };
        match p.kind {
            InteractionKind::PickUp => {
                let source = p.container.or(self.last_container).filter(|c| c.is_articulated());
                let wrap = source.filter(|c| !self.opened.contains(c));
                if let Some(c) = wrap {
                    self.attempt(act(InteractionKind::Open, c.into()))?;
                }
                self.attempt(act(InteractionKind::PickUp, p.target))?;
                if let Some(c) = wrap {
                    self.attempt(act(InteractionKind::Close, c.into()))?;
                }
                Ok(())
            }
            kind => {
                self.attempt(act(kind, p.target))?;
                if let Some(c) = p.target.as_large() {
                    match kind {
                        InteractionKind::Open => {
                            self.opened.insert(c);
                        }
                        InteractionKind::Close => {
                            self.opened.remove(&c);
                        }
                        _ => {}
                    }
                }
                Ok(())
            }
        }
    }
}

/// Runs exploration then execution for `task` on `scene`.
pub fn execute_task<T: Confidence>(scene: &Scene, task: &Task, config: &ExecConfig, seed: u64) -> EpisodeRun<T> {
    let gt_nav = config.oracle != OracleMode::None;
    let mut ex = Executor {
        sim: Simulator::new(scene),
        config,
        rng: stream(seed, EXEC_STREAM),
        exploration: None,
        last_container: None,
        opened: BTreeSet::new(),
    };
    let mut outcomes = Vec::new();
    let failure = match interpret(task, config.oracle == OracleMode::GtAll) {
        Err(f) => Some(f),
        Ok(steps) => {
            if !gt_nav {
                let nav: Vec<_> = steps
                    .iter()
                    .enumerate()
                    .filter_map(|(i, s)| match s {
                        Step::Nav { targets, .. } => Some((i, *targets)),
                        Step::Act(_) => None,
                    })
                    .collect();
                ex.exploration = Some(run_exploration(&mut ex.sim, &nav, &config.policy, &config.noise, seed));
            }
            let mut failure = None;
            for (i, step) in steps.into_iter().enumerate() {
                ex.sim.set_context(Phase::Execute, Some(i));
                let r = match step {
                    Step::Nav { targets, instance } => ex.navigate(targets, instance).map(|h| h.map(|h| h.degrees())),
                    Step::Act(p) => ex.interact(p).map(|_| None),
                };
                match r {
                    Ok(horizon) => outcomes.push(SubgoalOutcome { index: i, success: true, failure: None, horizon }),
                    Err(f) => {
                        outcomes.push(SubgoalOutcome { index: i, success: false, failure: Some(f), horizon: None });
                        failure = Some(f);
                        break;
                    }
                }
            }
            failure
        }
    };
    let Executor { sim, exploration, .. } = ex;
    let (state, records) = sim.into_parts();
    let goal_cond = task.goal_condition_fraction(scene, &state.objects);
    let (coverage, efficiency, raw, exp_steps, exp_failures) = match &exploration {
        Some(o) => {
            let m = coverage_metrics(&o.trace);
            (m.coverage, m.coverage_efficiency, o.trace.raw_actions.len(), o.steps, o.failures)
        }
        None => (1, 0.0, 0, 0, 0),
    };
    let success = !task.goal_conditions.is_empty() && goal_cond >= 1.0;
    EpisodeRun {
        result: EpisodeResult {
            success,
            goal_cond,
            steps: state.agent.steps_taken,
            failures: state.agent.failures,
            exploration_steps: exp_steps,
            exploration_failures: exp_failures,
            raw_exploration_steps: raw,
            coverage,
            coverage_efficiency: efficiency,
            subgoals: outcomes,
            failure,
        },
        records,
        exploration,
    }
}
