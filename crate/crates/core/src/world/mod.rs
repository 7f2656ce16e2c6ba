//! Discrete household-scene simulator.
//!
//! [`Scene`] is the static layout. [`WorldState`] carries everything that
//! changes during an episode: the agent's pose and budgets, and the state of
//! every object (open/closed, held, moved). [`step`] is a pure transition
//! function; [`Simulator`] wraps it with a step log.

mod scene_io;

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classes::{HeightClass, LargeClass, ObjectClass, SmallClass, UnknownClass};
use crate::geometry::{cell_to_ego, Cell, Pose, Rotation};

pub use scene_io::{LargeEntry, SceneFile, SceneFileError, SmallEntry, StartEntry, SCENE_FORMAT};

pub const GRID_SIZE: usize = 37;
/// Metres per grid cell.
pub const CELL_METERS: f64 = 0.25;
pub const MAX_STEPS: u32 = 1000;
pub const MAX_FAILURES: u32 = 10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SceneError {
    #[error("navigable grid has {got} cells, expected {expected}")]
    GridShape { expected: usize, got: usize },
    #[error("large object {0} has an empty footprint")]
    EmptyFootprint(usize),
    #[error("large object {index} footprint cell {cell} is out of bounds or navigable")]
    FootprintNavigable { index: usize, cell: Cell },
    #[error("small object {index} sits at {cell}, outside its container's footprint")]
    SmallOutsideContainer { index: usize, cell: Cell },
    #[error("small object {index} names container {container}, which does not exist")]
    MissingContainer { index: usize, container: usize },
    #[error("small object {index} at {cell} is out of bounds")]
    SmallOutOfBounds { index: usize, cell: Cell },
    #[error("start cell {0} is not navigable")]
    StartNotNavigable(Cell),
    #[error("navigable cell {0} is not connected to the start")]
    Disconnected(Cell),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WorldError {
    #[error("episode budget exhausted after {steps} steps and {failures} failures")]
    BudgetExhausted { steps: u32, failures: u32 },
    #[error(transparent)]
    UnknownClass(#[from] UnknownClass),
    #[error("cannot place the agent on non-navigable cell {0}")]
    NotNavigable(Cell),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LargeObject {
    pub class: LargeClass,
    pub footprint: Vec<Cell>,
    pub articulated: bool,
    pub height: HeightClass,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmallObject {
    pub class: SmallClass,
    pub cell: Cell,
    pub container: Option<usize>,
    pub height: HeightClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "index", rename_all = "lowercase")]
pub enum ObjectRef {
    Large(usize),
    Small(usize),
}

/// Immutable scene layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    grid_size: usize,
    navigable: Vec<bool>,
    large_objects: Vec<LargeObject>,
    small_objects: Vec<SmallObject>,
    start: Pose,
}

impl Scene {
    pub fn new(
        grid_size: usize,
        navigable: Vec<bool>,
        large_objects: Vec<LargeObject>,
        small_objects: Vec<SmallObject>,
        start: Pose,
    ) -> Result<Self, SceneError> {
        let scene = Scene { grid_size, navigable, large_objects, small_objects, start };
        scene.validate()?;
        Ok(scene)
    }

    fn validate(&self) -> Result<(), SceneError> {
        let n = self.grid_size * self.grid_size;
        if self.navigable.len() != n {
            return Err(SceneError::GridShape { expected: n, got: self.navigable.len() });
        }
        for (index, obj) in self.large_objects.iter().enumerate() {
            if obj.footprint.is_empty() {
                return Err(SceneError::EmptyFootprint(index));
            }
            for &cell in &obj.footprint {
                if !cell.in_bounds(self.grid_size) || self.is_navigable(cell) {
                    return Err(SceneError::FootprintNavigable { index, cell });
                }
            }
        }
        for (index, obj) in self.small_objects.iter().enumerate() {
            if !obj.cell.in_bounds(self.grid_size) {
                return Err(SceneError::SmallOutOfBounds { index, cell: obj.cell });
            }
            if let Some(container) = obj.container {
                let Some(large) = self.large_objects.get(container) else {
                    return Err(SceneError::MissingContainer { index, container });
                };
                if !large.footprint.contains(&obj.cell) {
                    return Err(SceneError::SmallOutsideContainer { index, cell: obj.cell });
                }
            }
        }
        let start = self.start.cell();
        if !self.is_navigable(start) {
            return Err(SceneError::StartNotNavigable(start));
        }
        let reach = self.reachable_from(start);
        for (i, &nav) in self.navigable.iter().enumerate() {
            if nav && !reach[i] {
                return Err(SceneError::Disconnected(Cell::from_index(i, self.grid_size)));
            }
        }
        Ok(())
    }

    /// 4-connected flood fill over navigable cells.
    pub fn reachable_from(&self, start: Cell) -> Vec<bool> {
        let mut seen = vec![false; self.navigable.len()];
        if !self.is_navigable(start) {
            return seen;
        }
        let mut queue = VecDeque::from([start]);
        seen[start.index(self.grid_size)] = true;
        while let Some(c) = queue.pop_front() {
            for n in c.neighbors4() {
                if self.is_navigable(n) && !seen[n.index(self.grid_size)] {
                    seen[n.index(self.grid_size)] = true;
                    queue.push_back(n);
                }
            }
        }
        seen
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn is_navigable(&self, cell: Cell) -> bool {
        cell.in_bounds(self.grid_size) && self.navigable[cell.index(self.grid_size)]
    }

    pub fn navigable(&self) -> &[bool] {
        &self.navigable
    }

    pub fn navigable_count(&self) -> usize {
        self.navigable.iter().filter(|&&n| n).count()
    }

    pub fn large_objects(&self) -> &[LargeObject] {
        &self.large_objects
    }

    pub fn small_objects(&self) -> &[SmallObject] {
        &self.small_objects
    }

    pub fn start(&self) -> Pose {
        self.start
    }

    /// Large-object class occupying `cell`, if any.
    pub fn large_at(&self, cell: Cell) -> Option<LargeClass> {
        self.large_objects.iter().find(|o| o.footprint.contains(&cell)).map(|o| o.class)
    }

    pub fn contains_class(&self, class: ObjectClass) -> bool {
        match class {
            ObjectClass::Large(c) => self.large_objects.iter().any(|o| o.class == c),
            ObjectClass::Small(c) => self.small_objects.iter().any(|o| o.class == c),
        }
    }
}

/// Where a small object currently is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Placement {
    At { cell: Cell, container: Option<usize> },
    Held,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmallState {
    pub placement: Placement,
    pub height: HeightClass,
    pub ever_picked: bool,
    pub sliced: bool,
    pub toggled: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LargeState {
    pub open: bool,
    pub ever_opened: bool,
    pub toggled: bool,
}

/// Mutable per-episode object state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectStates {
    pub large: Vec<LargeState>,
    pub small: Vec<SmallState>,
    pub held_instance: Option<usize>,
}

impl ObjectStates {
    pub fn initial(scene: &Scene) -> Self {
        ObjectStates {
            large: vec![LargeState::default(); scene.large_objects.len()],
            small: scene
                .small_objects
                .iter()
                .map(|o| SmallState {
                    placement: Placement::At { cell: o.cell, container: o.container },
                    height: o.height,
                    ever_picked: false,
                    sliced: false,
                    toggled: false,
                })
                .collect(),
            held_instance: None,
        }
    }

    /// Whether the small object can currently be seen: it is not in hand
    /// and not shut inside an articulated container.
    pub fn small_visible(&self, scene: &Scene, index: usize) -> bool {
        match self.small[index].placement {
            Placement::Held => false,
            Placement::At { container: Some(c), .. } => !scene.large_objects[c].articulated || self.large[c].open,
            Placement::At { container: None, .. } => true,
        }
    }

    pub fn small_cell(&self, index: usize) -> Option<Cell> {
        match self.small[index].placement {
            Placement::At { cell, .. } => Some(cell),
            Placement::Held => None,
        }
    }

    pub fn small_container(&self, index: usize) -> Option<usize> {
        match self.small[index].placement {
            Placement::At { container, .. } => container,
            Placement::Held => None,
        }
    }
}

/// The agent's 5-tuple plus episode counters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentState {
    pub pose: Pose,
    pub held: Option<SmallClass>,
    pub steps_taken: u32,
    pub failures: u32,
}

impl AgentState {
    pub fn at(pose: Pose) -> Self {
        AgentState { pose, held: None, steps_taken: 0, failures: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldState {
    pub agent: AgentState,
    pub objects: ObjectStates,
}

impl WorldState {
    pub fn initial(scene: &Scene) -> Self {
        WorldState { agent: AgentState::at(scene.start), objects: ObjectStates::initial(scene) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InteractionKind {
    PickUp,
    Put,
    Open,
    Close,
    Slice,
    ToggleOn,
    ToggleOff,
}

impl InteractionKind {
    pub const ALL: [InteractionKind; 7] = [
        InteractionKind::PickUp,
        InteractionKind::Put,
        InteractionKind::Open,
        InteractionKind::Close,
        InteractionKind::Slice,
        InteractionKind::ToggleOn,
        InteractionKind::ToggleOff,
    ];

    pub fn name(self) -> &'static str {
        match self {
            InteractionKind::PickUp => "PickUp",
            InteractionKind::Put => "Put",
            InteractionKind::Open => "Open",
            InteractionKind::Close => "Close",
            InteractionKind::Slice => "Slice",
            InteractionKind::ToggleOn => "ToggleOn",
            InteractionKind::ToggleOff => "ToggleOff",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Interaction {
    pub kind: InteractionKind,
    pub target: ObjectClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    MoveAhead,
    RotateLeft,
    RotateRight,
    LookUp,
    LookDown,
    Interact(Interaction),
}

impl Action {
    pub fn is_look(self) -> bool {
        matches!(self, Action::LookUp | Action::LookDown)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::MoveAhead => f.write_str("MoveAhead"),
            Action::RotateLeft => f.write_str("RotateLeft"),
            Action::RotateRight => f.write_str("RotateRight"),
            Action::LookUp => f.write_str("LookUp"),
            Action::LookDown => f.write_str("LookDown"),
            Action::Interact(i) => write!(f, "{}:{}", i.kind.name(), i.target),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unrecognised action `{0}`")]
pub struct ParseActionError(pub String);

impl FromStr for Action {
    type Err = ParseActionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "MoveAhead" => Action::MoveAhead,
            "RotateLeft" => Action::RotateLeft,
            "RotateRight" => Action::RotateRight,
            "LookUp" => Action::LookUp,
            "LookDown" => Action::LookDown,
            other => {
                let err = || ParseActionError(other.to_string());
                let (kind, target) = other.split_once(':').ok_or_else(err)?;
                let kind = InteractionKind::ALL.into_iter().find(|k| k.name() == kind).ok_or_else(err)?;
                let target = target.parse().map_err(|_| err())?;
                Action::Interact(Interaction { kind, target })
            }
        })
    }
}

impl Serialize for Action {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Action {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepOutcome {
    Success,
    Failure,
}

impl StepOutcome {
    pub fn is_success(self) -> bool {
        self == StepOutcome::Success
    }

    fn from_bool(ok: bool) -> Self {
        if ok {
            StepOutcome::Success
        } else {
            StepOutcome::Failure
        }
    }
}

/// Whether an agent at `cell` facing `r` can reach any of `targets`: some
/// target lies `backup..=backup+1` cells ahead and at most one cell to the
/// side.
pub fn in_reach(cell: Cell, r: Rotation, targets: &[Cell], backup: i32) -> bool {
    targets.iter().any(|&t| {
        let (depth, lateral) = cell_to_ego(cell, r, t);
        (backup..=backup + 1).contains(&depth) && lateral.abs() <= 1
    })
}

/// Back-up distance governing reach to a small object: that of its
/// container, or one cell when it stands alone.
fn small_backup(scene: &Scene, container: Option<usize>) -> i32 {
    container.map(|c| scene.large_objects[c].class.backup_distance()).unwrap_or(1)
}

fn pose_reaches(scene: &Scene, objects: &ObjectStates, pose: Pose, obj: ObjectRef) -> bool {
    if !scene.is_navigable(pose.cell()) {
        return false;
    }
    match obj {
        ObjectRef::Large(i) => {
            let o = &scene.large_objects[i];
            o.height.admits(pose.h) && in_reach(pose.cell(), pose.r, &o.footprint, o.class.backup_distance())
        }
        ObjectRef::Small(i) => match objects.small[i].placement {
            Placement::Held => false,
            Placement::At { cell, container } => {
                objects.small[i].height.admits(pose.h)
                    && in_reach(pose.cell(), pose.r, &[cell], small_backup(scene, container))
            }
        },
    }
}

/// Every pose from which `obj` can be handled, given current object state.
pub fn gt_waypoints_in(scene: &Scene, objects: &ObjectStates, obj: ObjectRef) -> BTreeSet<Pose> {
    let mut out = BTreeSet::new();
    let band = match obj {
        ObjectRef::Large(i) => scene.large_objects[i].height.band(),
        ObjectRef::Small(i) => objects.small[i].height.band(),
    };
    for (idx, &nav) in scene.navigable.iter().enumerate() {
        if !nav {
            continue;
        }
        let cell = Cell::from_index(idx, scene.grid_size);
        for r in Rotation::ALL {
            for h in band {
                let pose = Pose::new(cell.x, cell.y, r, h);
                if pose_reaches(scene, objects, pose, obj) {
                    out.insert(pose);
                }
            }
        }
    }
    out
}

/// Ground-truth waypoint set of an object in its initial placement.
pub fn gt_waypoints(scene: &Scene, obj: ObjectRef) -> BTreeSet<Pose> {
    gt_waypoints_in(scene, &ObjectStates::initial(scene), obj)
}

/// Applies an interaction to `objects`, returning whether it succeeded.
pub fn interact(scene: &Scene, objects: &mut ObjectStates, agent: &mut AgentState, action: Interaction) -> StepOutcome {
    let pose = agent.pose;
    let reaches = |objects: &ObjectStates, obj| pose_reaches(scene, objects, pose, obj);
    let large_matching = |c: LargeClass| {
        scene.large_objects.iter().enumerate().filter(move |(_, o)| o.class == c).map(|(i, _)| i)
    };
    let small_matching = |c: SmallClass| {
        scene.small_objects.iter().enumerate().filter(move |(_, o)| o.class == c).map(|(i, _)| i)
    };
    let ok = match (action.kind, action.target) {
        (InteractionKind::PickUp, ObjectClass::Small(c)) => {
            if objects.held_instance.is_some() {
                false
            } else {
                let found = small_matching(c).find(|&i| {
                    objects.small_visible(scene, i) && reaches(objects, ObjectRef::Small(i))
                });
                if let Some(i) = found {
                    objects.small[i].placement = Placement::Held;
                    objects.small[i].ever_picked = true;
                    objects.held_instance = Some(i);
                    agent.held = Some(c);
                }
                found.is_some()
            }
        }
        (InteractionKind::Put, ObjectClass::Large(c)) => match objects.held_instance {
            None => false,
            Some(held) => {
                let found = large_matching(c).find(|&j| {
                    (!scene.large_objects[j].articulated || objects.large[j].open)
                        && reaches(objects, ObjectRef::Large(j))
                });
                if let Some(j) = found {
                    let dest = &scene.large_objects[j];
                    let cell = *dest
                        .footprint
                        .iter()
                        .min_by_key(|c| (c.dist2(pose.cell()), **c))
                        .expect("non-empty footprint");
                    let s = &mut objects.small[held];
                    s.placement = Placement::At { cell, container: Some(j) };
                    s.height = dest.height;
                    objects.held_instance = None;
                    agent.held = None;
                }
                found.is_some()
            }
        },
        (InteractionKind::Open | InteractionKind::Close, ObjectClass::Large(c)) => {
            let want_open = action.kind == InteractionKind::Open;
            let found = large_matching(c).find(|&j| {
                scene.large_objects[j].articulated
                    && objects.large[j].open != want_open
                    && reaches(objects, ObjectRef::Large(j))
            });
            if let Some(j) = found {
                objects.large[j].open = want_open;
                objects.large[j].ever_opened |= want_open;
            }
            found.is_some()
        }
        (InteractionKind::Slice, ObjectClass::Small(c)) => {
            let found = small_matching(c).find(|&i| {
                !objects.small[i].sliced && objects.small_visible(scene, i) && reaches(objects, ObjectRef::Small(i))
            });
            if let Some(i) = found {
                objects.small[i].sliced = true;
            }
            found.is_some()
        }
        (InteractionKind::ToggleOn | InteractionKind::ToggleOff, target) => {
            let want_on = action.kind == InteractionKind::ToggleOn;
            match target {
                ObjectClass::Large(c) => {
                    let found = large_matching(c)
                        .find(|&j| objects.large[j].toggled != want_on && reaches(objects, ObjectRef::Large(j)));
                    if let Some(j) = found {
                        objects.large[j].toggled = want_on;
                    }
                    found.is_some()
                }
                ObjectClass::Small(c) => {
                    let found = small_matching(c).find(|&i| {
                        objects.small[i].toggled != want_on
                            && objects.small_visible(scene, i)
                            && reaches(objects, ObjectRef::Small(i))
                    });
                    if let Some(i) = found {
                        objects.small[i].toggled = want_on;
                    }
                    found.is_some()
                }
            }
        }
        _ => false,
    };
    StepOutcome::from_bool(ok)
}

/// Pure transition function.
pub fn step(scene: &Scene, world: &WorldState, action: Action) -> Result<(WorldState, StepOutcome), WorldError> {
    let agent = &world.agent;
    if agent.steps_taken >= MAX_STEPS || agent.failures >= MAX_FAILURES {
        return Err(WorldError::BudgetExhausted { steps: agent.steps_taken, failures: agent.failures });
    }
    let mut next = world.clone();
    let pose = agent.pose;
    let outcome = match action {
        Action::MoveAhead => {
            let (dx, dy) = pose.r.forward();
            let target = pose.cell().offset(dx, dy);
            if scene.is_navigable(target) {
                next.agent.pose = pose.with_cell(target);
                StepOutcome::Success
            } else {
                StepOutcome::Failure
            }
        }
        Action::RotateLeft => {
            next.agent.pose.r = pose.r.left();
            StepOutcome::Success
        }
        Action::RotateRight => {
            next.agent.pose.r = pose.r.right();
            StepOutcome::Success
        }
        Action::LookUp | Action::LookDown => {
            let h = if action == Action::LookUp { pose.h.up() } else { pose.h.down() };
            match h {
                Some(h) => {
                    next.agent.pose.h = h;
                    StepOutcome::Success
                }
                None => StepOutcome::Failure,
            }
        }
        Action::Interact(i) => interact(scene, &mut next.objects, &mut next.agent, i),
    };
    next.agent.steps_taken += 1;
    if outcome == StepOutcome::Failure {
        next.agent.failures += 1;
    }
    Ok((next, outcome))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Explore,
    Execute,
}

/// One executed step, as written to trace files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: u32,
    pub pose: Pose,
    pub action: Action,
    pub outcome: StepOutcome,
    pub injected: bool,
    pub subgoal_index: Option<usize>,
    pub phase: Phase,
}

/// Stateful wrapper over [`step`] that keeps a log of executed steps.
#[derive(Debug, Clone)]
pub struct Simulator<'s> {
    scene: &'s Scene,
    state: WorldState,
    records: Vec<StepRecord>,
    phase: Phase,
    subgoal: Option<usize>,
}

impl<'s> Simulator<'s> {
    pub fn new(scene: &'s Scene) -> Self {
        Simulator { scene, state: WorldState::initial(scene), records: Vec::new(), phase: Phase::Explore, subgoal: None }
    }

    pub fn scene(&self) -> &'s Scene {
        self.scene
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    pub fn pose(&self) -> Pose {
        self.state.agent.pose
    }

    pub fn agent(&self) -> &AgentState {
        &self.state.agent
    }

    pub fn objects(&self) -> &ObjectStates {
        &self.state.objects
    }

    pub fn set_context(&mut self, phase: Phase, subgoal: Option<usize>) {
        self.phase = phase;
        self.subgoal = subgoal;
    }

    pub fn act(&mut self, action: Action, injected: bool) -> Result<StepOutcome, WorldError> {
        let (next, outcome) = step(self.scene, &self.state, action)?;
        self.state = next;
        self.records.push(StepRecord {
            t: self.state.agent.steps_taken,
            pose: self.state.agent.pose,
            action,
            outcome,
            injected,
            subgoal_index: self.subgoal,
            phase: self.phase,
        });
        Ok(outcome)
    }

    /// Oracle placement; costs no steps.
    pub fn teleport(&mut self, pose: Pose) -> Result<(), WorldError> {
        if !self.scene.is_navigable(pose.cell()) {
            return Err(WorldError::NotNavigable(pose.cell()));
        }
        self.state.agent.pose = pose;
        Ok(())
    }

    pub fn records(&self) -> &[StepRecord] {
        &self.records
    }

    pub fn into_parts(self) -> (WorldState, Vec<StepRecord>) {
        (self.state, self.records)
    }
}

#[cfg(test)]
pub(crate) mod tests;
