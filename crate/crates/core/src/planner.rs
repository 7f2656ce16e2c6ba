//! Shortest action sequences over `(x, y, r)` and horizon search on arrival.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::classes::ObjectClass;
use crate::geometry::{Cell, Horizon, Pose, Rotation};
use crate::mapping::NavGrid;
use crate::perception::{detect_large_objects, detect_small_objects, Detection, NoiseModel};
use crate::scalar::Confidence;
use crate::world::{Action, Simulator, WorldError};

/// Confidence a detection must exceed to vote for a horizon.
pub const HORIZON_CONFIDENCE: f64 = 0.8;
/// Horizons visited by the arrival sweep, in order.
pub const SWEEP: [i32; 6] = [60, 45, 30, 15, 0, -15];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PlanNode {
    pub x: i32,
    pub y: i32,
    pub r: Rotation,
}

impl PlanNode {
    pub fn new(x: i32, y: i32, r: Rotation) -> Self {
        PlanNode { x, y, r }
    }

    pub fn cell(&self) -> Cell {
        Cell::new(self.x, self.y)
    }
}

impl From<Pose> for PlanNode {
    fn from(p: Pose) -> Self {
        PlanNode::new(p.x, p.y, p.r)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub actions: Vec<Action>,
    pub cost: u32,
    pub goal: PlanNode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum PlanError {
    #[error("goal unreachable on the planning grid")]
    Unreachable,
}

/// Expansion order of the search.
const EDGES: [Action; 3] = [Action::MoveAhead, Action::RotateLeft, Action::RotateRight];

fn apply(node: PlanNode, action: Action) -> PlanNode {
    match action {
        Action::MoveAhead => {
            let (dx, dy) = node.r.forward();
            PlanNode { x: node.x + dx, y: node.y + dy, ..node }
        }
        Action::RotateLeft => PlanNode { r: node.r.left(), ..node },
        Action::RotateRight => PlanNode { r: node.r.right(), ..node },
        _ => node,
    }
}

/// Dijkstra from `start` to the cheapest node satisfying `is_goal`.
/// `move_cost` prices entering a cell; rotations cost one. Moves are only
/// allowed into cells of `grid`.
pub fn search(
    grid: &NavGrid,
    start: PlanNode,
    is_goal: impl Fn(PlanNode) -> bool,
    move_cost: impl Fn(Cell) -> u32,
) -> Result<Plan, PlanError> {
    let size = grid.size();
    let key = |n: PlanNode| n.cell().index(size) * 4 + n.r.quarter_turns() as usize;
    let mut dist = vec![u32::MAX; size * size * 4];
    let mut parent: Vec<Option<(PlanNode, Action)>> = vec![None; size * size * 4];
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    if !start.cell().in_bounds(size) {
        return Err(PlanError::Unreachable);
    }
    dist[key(start)] = 0;
    heap.push(Reverse((0u32, seq, start)));
    while let Some(Reverse((d, _, node))) = heap.pop() {
        if d > dist[key(node)] {
            continue;
        }
        if is_goal(node) {
            let mut actions = Vec::new();
            let mut cur = node;
            while let Some((prev, a)) = parent[key(cur)] {
                actions.push(a);
                cur = prev;
            }
            actions.reverse();
            return Ok(Plan { actions, cost: d, goal: node });
        }
        for action in EDGES {
            let next = apply(node, action);
            let step = if action == Action::MoveAhead {
                if !grid.contains(next.cell()) {
                    continue;
                }
                move_cost(next.cell())
            } else {
                1
            };
            let nd = d + step;
            if nd < dist[key(next)] {
                dist[key(next)] = nd;
                parent[key(next)] = Some((node, action));
                seq += 1;
                heap.push(Reverse((nd, seq, next)));
            }
        }
    }
    Err(PlanError::Unreachable)
}

/// Unit-cost plan from `start` to `goal`.
pub fn plan_path(grid: &NavGrid, start: PlanNode, goal: PlanNode) -> Result<Plan, PlanError> {
    if !grid.contains(goal.cell()) && goal.cell() != start.cell() {
        return Err(PlanError::Unreachable);
    }
    search(grid, start, |n| n == goal, |_| 1)
}

/// Horizons to retry an interaction with after choosing `h_star`.
pub fn backtrack_horizons(h_star: Horizon) -> Vec<Horizon> {
    [0, Horizon::STEP, -Horizon::STEP].iter().filter_map(|&dh| Horizon::new(h_star.degrees() + dh)).collect()
}

/// Issues look actions until the camera sits at `target`.
pub fn look_to(sim: &mut Simulator<'_>, target: Horizon) -> Result<(), WorldError> {
    while sim.pose().h != target {
        let action = if sim.pose().h.degrees() < target.degrees() { Action::LookDown } else { Action::LookUp };
        sim.act(action, false)?;
    }
    Ok(())
}

fn target_detections<T: Confidence, R: Rng + ?Sized>(
    sim: &Simulator<'_>,
    target: ObjectClass,
    noise: &NoiseModel,
    rng: &mut R,
) -> Vec<Detection<T>> {
    let pose = sim.pose();
    let all = if target.is_large() {
        detect_large_objects(sim.scene(), pose, noise, rng)
    } else {
        detect_small_objects(sim.scene(), sim.objects(), pose, noise, rng)
    };
    all.into_iter().filter(|d| d.class == target).collect()
}

/// Sweeps the camera over [`SWEEP`] and settles on the horizon whose best
/// detection of `target` has the largest mask. With no qualifying
/// detection the camera returns to where it started and `None` is returned.
pub fn select_horizon<T: Confidence, R: Rng + ?Sized>(
    sim: &mut Simulator<'_>,
    target: ObjectClass,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<Option<Horizon>, WorldError> {
    let arrival = sim.pose().h;
    let mut best: Option<(u32, Horizon)> = None;
    for deg in SWEEP {
        let h = Horizon::new(deg).expect("legal sweep");
        look_to(sim, h)?;
        for d in target_detections::<T, R>(sim, target, noise, rng) {
            if d.confidence.to_f64_lossy() > HORIZON_CONFIDENCE && best.is_none_or(|(a, _)| d.mask_area > a) {
                best = Some((d.mask_area, h));
            }
        }
    }
    let chosen = best.map(|(_, h)| h);
    look_to(sim, chosen.unwrap_or(arrival))?;
    Ok(chosen)
}
