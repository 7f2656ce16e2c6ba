//! Exploration phase: heuristic policies, online augmentation, mapping
//! updates and coverage metrics.

mod augment;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use augment::{inject_rotations, zigzag, Augmenter, MalformedInput, Zigzag, MOVES_PER_SWEEP, TURNS_PER_SWEEP};

use crate::classes::{LargeClass, ObjectClass};
use crate::geometry::{cell_to_ego, Anchor, Cell, Pose};
use crate::mapping::{postprocess_navigable, transform_partial, ExploredAreaMap, NavGrid, SemanticMap};
use crate::perception::{detect_large_objects, detect_small_objects, observe_partial_map, Detection, NoiseModel, PartialMap};
use crate::planner::{plan_path, search, PlanNode};
use crate::scalar::Confidence;
use crate::seeding::{mix, stream};
use crate::waypoints::{best_detection, waypoint_large_with, DetectionLog, WaypointOptions};
use crate::world::{Action, Phase, Simulator, StepOutcome, WorldError, GRID_SIZE};

/// Map confidence at which a large target counts as found.
pub const THETA_STOP: f64 = 0.95;
/// Mask area of a detection close enough to stop for.
pub const CLOSE_AREA: u32 = 1200;
pub const PHASE_MAX_STEPS: u32 = 500;
pub const PHASE_MAX_FAILURES: u32 = 4;

const FRONTIER_NEW_COST: u32 = 2;
const FRONTIER_SEEN_COST: u32 = 3;
const RANDOM_OPENING_TURNS: u8 = 4;
const RANDOM_GOAL_TRIES: usize = 16;
const POLICY_STREAM: u64 = 0x5057;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExplorationAction {
    MoveAhead,
    RotateLeft,
    RotateRight,
    Stop,
}

impl ExplorationAction {
    pub fn to_action(self) -> Option<Action> {
        match self {
            ExplorationAction::MoveAhead => Some(Action::MoveAhead),
            ExplorationAction::RotateLeft => Some(Action::RotateLeft),
            ExplorationAction::RotateRight => Some(Action::RotateRight),
            ExplorationAction::Stop => None,
        }
    }

    fn from_action(a: Action) -> Self {
        match a {
            Action::MoveAhead => ExplorationAction::MoveAhead,
            Action::RotateLeft => ExplorationAction::RotateLeft,
            Action::RotateRight => ExplorationAction::RotateRight,
            _ => ExplorationAction::Stop,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    #[default]
    InstructionGuided,
    Random,
    FrontierOnly,
    PartialLanguage,
    NoExploredArea,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::InstructionGuided,
        PolicyKind::Random,
        PolicyKind::FrontierOnly,
        PolicyKind::PartialLanguage,
        PolicyKind::NoExploredArea,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::InstructionGuided => "instruction_guided",
            PolicyKind::Random => "random",
            PolicyKind::FrontierOnly => "frontier_only",
            PolicyKind::PartialLanguage => "partial_language",
            PolicyKind::NoExploredArea => "no_explored_area",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown policy `{0}`")]
pub struct UnknownPolicy(pub String);

impl FromStr for PolicyKind {
    type Err = UnknownPolicy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "instruction" | "instruction_guided" | "guided" => PolicyKind::InstructionGuided,
            "random" => PolicyKind::Random,
            "frontier" | "frontier_only" => PolicyKind::FrontierOnly,
            "partial_language" | "partial" => PolicyKind::PartialLanguage,
            "no_explored_area" => PolicyKind::NoExploredArea,
            _ => return Err(UnknownPolicy(s.to_string())),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    pub theta_stop: f64,
    pub max_steps: u32,
    pub max_failures: u32,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            kind: PolicyKind::InstructionGuided,
            theta_stop: THETA_STOP,
            max_steps: PHASE_MAX_STEPS,
            max_failures: PHASE_MAX_FAILURES,
        }
    }
}

impl PolicyConfig {
    pub fn of(kind: PolicyKind) -> Self {
        PolicyConfig { kind, ..Default::default() }
    }
}

/// What a navigation subgoal is looking for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubgoalTargets {
    /// Refined target: a small object to be handled next, or the noun of
    /// the navigation instruction.
    pub target: ObjectClass,
    pub container: Option<LargeClass>,
    /// Noun of the navigation instruction alone.
    pub nav_noun: ObjectClass,
}

impl SubgoalTargets {
    pub fn large(class: LargeClass) -> Self {
        SubgoalTargets { target: class.into(), container: None, nav_noun: class.into() }
    }
}

/// Everything a policy sees when deciding, in the map frame.
pub struct PolicyInput<'a, T: Confidence> {
    pub map: &'a SemanticMap<T>,
    pub grid: &'a NavGrid,
    pub explored: &'a ExploredAreaMap,
    pub log: &'a DetectionLog<T>,
    pub pose: Pose,
    pub targets: Option<SubgoalTargets>,
}

/// Stateful heuristic exploration policy.
#[derive(Debug, Clone)]
pub struct ExplorationPolicy {
    pub config: PolicyConfig,
    opening_turns: u8,
    random_goal: Option<Cell>,
    /// Container cells already seen from close range this subgoal.
    inspected: BTreeSet<Cell>,
}

impl ExplorationPolicy {
    pub fn new(config: PolicyConfig) -> Self {
        let opening_turns = if config.kind == PolicyKind::Random { RANDOM_OPENING_TURNS } else { 0 };
        ExplorationPolicy { config, opening_turns, random_goal: None, inspected: BTreeSet::new() }
    }

    /// Resets per-subgoal memory.
    pub fn begin_subgoal(&mut self) {
        self.inspected.clear();
    }

    fn effective_targets(&self, targets: Option<SubgoalTargets>) -> Option<SubgoalTargets> {
        let t = targets?;
        match self.config.kind {
            PolicyKind::FrontierOnly | PolicyKind::Random => None,
            PolicyKind::PartialLanguage => Some(SubgoalTargets {
                target: t.nav_noun,
                container: None,
                nav_noun: t.nav_noun,
            }),
            _ => Some(t),
        }
    }

    pub fn next_action<T: Confidence, R: Rng + ?Sized>(&mut self, input: &PolicyInput<'_, T>, rng: &mut R) -> ExplorationAction {
        if self.config.kind == PolicyKind::Random {
            return self.random_action(input, rng);
        }
        if let Some(t) = self.effective_targets(input.targets) {
            if let Some(a) = self.pursue(input, t) {
                return a;
            }
        }
        if self.config.kind == PolicyKind::NoExploredArea {
            return [ExplorationAction::MoveAhead, ExplorationAction::RotateLeft, ExplorationAction::RotateRight]
                [rng.random_range(0..3)];
        }
        frontier_action(input).unwrap_or(ExplorationAction::Stop)
    }

    /// Stop rule and greedy approach toward a target already on the map.
    fn pursue<T: Confidence>(&mut self, input: &PolicyInput<'_, T>, t: SubgoalTargets) -> Option<ExplorationAction> {
        let stop = self.config.theta_stop;
        let wp = WaypointOptions::default();
        match t.target {
            ObjectClass::Large(c) => {
                if input.map.max_confidence(c).to_f64_lossy() >= stop {
                    return Some(ExplorationAction::Stop);
                }
                approach(input, c, &wp)
            }
            ObjectClass::Small(_) => {
                if best_detection(input.log, t.target, wp.tau_c).is_some_and(|d| d.mask_area >= CLOSE_AREA) {
                    return Some(ExplorationAction::Stop);
                }
                let c = t.container?;
                if input.map.max_confidence(c).to_f64_lossy() < stop {
                    return approach(input, c, &wp);
                }
                // Container found: look at each of its cells from close up.
                let n = input.map.size();
                let cells: Vec<Cell> = (0..n * n)
                    .map(|i| Cell::from_index(i, n))
                    .filter(|&cell| input.map.get(c.index(), cell).to_f64_lossy() >= stop)
                    .collect();
                let close = |n: PlanNode, cell: Cell| {
                    let (d, l) = cell_to_ego(n.cell(), n.r, cell);
                    (1..=2).contains(&d) && l.abs() <= 1
                };
                let here = PlanNode::from(input.pose);
                self.inspected.extend(cells.iter().copied().filter(|&cell| close(here, cell)));
                let pending: Vec<Cell> = cells.into_iter().filter(|cell| !self.inspected.contains(cell)).collect();
                let head_on = |n: PlanNode| {
                    pending.iter().any(|&cell| {
                        let (d, l) = cell_to_ego(n.cell(), n.r, cell);
                        l == 0 && (1..=2).contains(&d)
                    })
                };
                if pending.is_empty() {
                    return Some(ExplorationAction::Stop);
                }
                match search(input.grid, here, head_on, |_| 1) {
                    Ok(plan) if !plan.actions.is_empty() => Some(ExplorationAction::from_action(plan.actions[0])),
                    _ => Some(ExplorationAction::Stop),
                }
            }
        }
    }

    fn random_action<T: Confidence, R: Rng + ?Sized>(&mut self, input: &PolicyInput<'_, T>, rng: &mut R) -> ExplorationAction {
        if self.opening_turns > 0 {
            self.opening_turns -= 1;
            return ExplorationAction::RotateRight;
        }
        let here = PlanNode::from(input.pose);
        for _ in 0..RANDOM_GOAL_TRIES {
            let goal = match self.random_goal {
                Some(g) if g != here.cell() => g,
                _ => {
                    let boundary = boundary_cells(input.grid, here.cell());
                    if boundary.is_empty() {
                        return ExplorationAction::Stop;
                    }
                    boundary[rng.random_range(0..boundary.len())]
                }
            };
            self.random_goal = Some(goal);
            if let Ok(plan) = search(input.grid, here, |n| n.cell() == goal, |_| 1) {
                if let Some(&a) = plan.actions.first() {
                    return ExplorationAction::from_action(a);
                }
            }
            self.random_goal = None;
        }
        ExplorationAction::Stop
    }
}

/// First step toward the waypoint of `class`, if it is on the map.
fn approach<T: Confidence>(input: &PolicyInput<'_, T>, class: LargeClass, opts: &WaypointOptions) -> Option<ExplorationAction> {
    let w = waypoint_large_with(input.map, input.grid, class, opts).ok()?;
    let plan = plan_path(input.grid, PlanNode::from(input.pose), PlanNode::new(w.cell.x, w.cell.y, w.r)).ok()?;
    plan.actions.first().map(|&a| ExplorationAction::from_action(a))
}

/// Cells of `grid` with at least one 4-neighbour outside it.
pub fn boundary_cells(grid: &NavGrid, exclude: Cell) -> Vec<Cell> {
    grid.iter().filter(|&c| c != exclude && c.neighbors4().iter().any(|&n| !grid.contains(n))).collect()
}

/// Explored cells of `grid` with an unexplored 4-neighbour.
pub fn frontier_cells(grid: &NavGrid, explored: &ExploredAreaMap) -> Vec<Cell> {
    grid.iter()
        .filter(|&c| explored.is_explored(c) && c.neighbors4().iter().any(|&n| !explored.is_explored(n)))
        .collect()
}

/// First step toward the cheapest pose standing on a frontier cell and
/// facing unexplored space.
pub fn frontier_action<T: Confidence>(input: &PolicyInput<'_, T>) -> Option<ExplorationAction> {
    let ex = input.explored;
    let is_goal = |n: PlanNode| {
        let (dx, dy) = n.r.forward();
        ex.is_explored(n.cell()) && !ex.is_explored(n.cell().offset(dx, dy))
    };
    let cost = |c: Cell| if ex.is_explored(c) { FRONTIER_SEEN_COST } else { FRONTIER_NEW_COST };
    let plan = search(input.grid, PlanNode::from(input.pose), is_goal, cost).ok()?;
    Some(plan.actions.first().map(|&a| ExplorationAction::from_action(a)).unwrap_or(ExplorationAction::RotateRight))
}

/// One executed exploration step's observation, in the map frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation<T: Confidence = f32> {
    pub t: u32,
    pub pose: Pose,
    pub partial: PartialMap<T>,
    pub detections: Vec<Detection<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationTrace<T: Confidence = f32> {
    pub raw_actions: Vec<ExplorationAction>,
    /// Executed actions with their injected flag.
    pub augmented_actions: Vec<(Action, bool)>,
    /// Visited cells in the map frame, start included.
    pub visited: BTreeSet<Cell>,
    pub observations: Vec<Observation<T>>,
}

impl<T: Confidence> Default for ExplorationTrace<T> {
    fn default() -> Self {
        ExplorationTrace { raw_actions: Vec::new(), augmented_actions: Vec::new(), visited: BTreeSet::new(), observations: Vec::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseEnd {
    /// Every subgoal stopped on its own.
    Completed,
    StepLimit,
    FailureLimit,
    /// The episode-wide budget ran out.
    EpisodeBudget,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageMetrics {
    pub coverage: usize,
    pub coverage_efficiency: f64,
}

pub fn coverage_metrics<T: Confidence>(trace: &ExplorationTrace<T>) -> CoverageMetrics {
    let coverage = trace.visited.len().max(1);
    let coverage_efficiency =
        if trace.raw_actions.is_empty() { 0.0 } else { coverage as f64 / trace.raw_actions.len() as f64 };
    CoverageMetrics { coverage, coverage_efficiency }
}

/// State built up while exploring.
#[derive(Debug, Clone)]
pub struct ExplorationOutput<T: Confidence = f32> {
    pub trace: ExplorationTrace<T>,
    pub map: SemanticMap<T>,
    pub explored: ExploredAreaMap,
    pub log: DetectionLog<T>,
    pub anchor: Anchor,
    pub steps: u32,
    pub failures: u32,
    pub end: PhaseEnd,
}

impl<T: Confidence> ExplorationOutput<T> {
    /// Post-processed navigable estimate united with visited cells.
    pub fn planning_grid(&self) -> NavGrid {
        planning_grid(&self.map, &self.trace.visited)
    }
}

pub fn planning_grid<T: Confidence>(map: &SemanticMap<T>, visited: &BTreeSet<Cell>) -> NavGrid {
    let mut g = postprocess_navigable(map);
    g.union_with(visited.iter().copied());
    g
}

/// Perception generator for the observation taken after step `t`.
pub fn observation_rng(seed: u64, t: u32) -> rand_chacha::ChaCha8Rng {
    stream(mix(seed, 0x0B5E), t as u64)
}

/// Sensing and mapping state carried through the exploration loop.
pub struct Mapper<T: Confidence> {
    pub anchor: Anchor,
    pub noise: NoiseModel,
    pub seed: u64,
    pub out: ExplorationOutput<T>,
}

impl<T: Confidence> Mapper<T> {
    pub fn new(start: Pose, noise: NoiseModel, seed: u64) -> Self {
        let anchor = Anchor::new(start, GRID_SIZE);
        Mapper {
            anchor,
            noise,
            seed,
            out: ExplorationOutput {
                trace: ExplorationTrace::default(),
                map: SemanticMap::new(GRID_SIZE),
                explored: ExploredAreaMap::new(GRID_SIZE),
                log: DetectionLog::new(),
                anchor,
                steps: 0,
                failures: 0,
                end: PhaseEnd::Completed,
            },
        }
    }

    /// Observes from the simulator's current pose and folds the result in.
    pub fn observe(&mut self, sim: &Simulator<'_>) {
        let t = sim.agent().steps_taken;
        let world_pose = sim.pose();
        let mut rng = observation_rng(self.seed, t);
        let partial: PartialMap<T> = observe_partial_map(sim.scene(), world_pose, &self.noise, &mut rng);
        let mut detections = detect_small_objects(sim.scene(), sim.objects(), world_pose, &self.noise, &mut rng);
        detections.extend(detect_large_objects(sim.scene(), world_pose, &self.noise, &mut rng));
        let pose = self.anchor.to_map(world_pose);
        for d in &mut detections {
            d.pose = pose;
        }
        let out = &mut self.out;
        out.map.merge(&transform_partial(&partial, pose, GRID_SIZE));
        out.explored.update(pose);
        out.log.extend(detections.iter().copied());
        out.trace.visited.insert(pose.cell());
        out.trace.observations.push(Observation { t, pose, partial, detections });
    }

    pub fn map_pose(&self, sim: &Simulator<'_>) -> Pose {
        self.anchor.to_map(sim.pose())
    }
}

/// Runs the exploration phase over `subgoals` (task index and targets),
/// driving `sim`. Budget exhaustion ends the phase without error.
pub fn run_exploration<T: Confidence>(
    sim: &mut Simulator<'_>,
    subgoals: &[(usize, SubgoalTargets)],
    config: &PolicyConfig,
    noise: &NoiseModel,
    seed: u64,
) -> ExplorationOutput<T> {
    let mut mapper = Mapper::<T>::new(sim.pose(), *noise, seed);
    let mut policy = ExplorationPolicy::new(*config);
    let mut policy_rng = stream(seed, POLICY_STREAM);
    let mut aug = Augmenter::default();
    sim.set_context(Phase::Explore, subgoals.first().map(|s| s.0));
    mapper.observe(sim);

    let end = 'phase: {
        for &(index, targets) in subgoals {
            sim.set_context(Phase::Explore, Some(index));
            policy.begin_subgoal();
            loop {
                let out = &mapper.out;
                if out.steps >= config.max_steps {
                    break 'phase PhaseEnd::StepLimit;
                }
                if out.failures >= config.max_failures {
                    break 'phase PhaseEnd::FailureLimit;
                }
                let grid = out.planning_grid();
                let input = PolicyInput {
                    map: &out.map,
                    grid: &grid,
                    explored: &out.explored,
                    log: &out.log,
                    pose: mapper.map_pose(sim),
                    targets: Some(targets),
                };
                let choice = policy.next_action(&input, &mut policy_rng);
                let Some(raw) = choice.to_action() else { break };
                mapper.out.trace.raw_actions.push(choice);
                for (action, injected) in aug.expand(raw) {
                    let out = &mapper.out;
                    if out.steps >= config.max_steps {
                        break 'phase PhaseEnd::StepLimit;
                    }
                    if out.failures >= config.max_failures {
                        break 'phase PhaseEnd::FailureLimit;
                    }
                    let outcome = match sim.act(action, injected) {
                        Ok(o) => o,
                        Err(WorldError::BudgetExhausted { .. }) => break 'phase PhaseEnd::EpisodeBudget,
                        Err(e) => unreachable!("unexpected world error {e}"),
                    };
                    let out = &mut mapper.out;
                    out.steps += 1;
                    out.trace.augmented_actions.push((action, injected));
                    if outcome == StepOutcome::Failure {
                        out.failures += 1;
                    }
                    mapper.observe(sim);
                }
            }
        }
        PhaseEnd::Completed
    };
    mapper.out.end = end;
    mapper.out
}

#[cfg(test)]
mod tests;
