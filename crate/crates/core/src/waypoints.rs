//! Interaction poses derived from the semantic map and the detection log.

use serde::{Deserialize, Serialize};

use crate::classes::{backup_distance_for_name, LargeClass, ObjectClass};
use crate::geometry::{cell_to_ego, Cell, Horizon, Pose, Rotation};
use crate::mapping::{NavGrid, SemanticMap};
use crate::perception::Detection;
use crate::scalar::Confidence;

/// Default detection confidence needed for a small-object waypoint.
pub const TAU_C: f64 = 0.8;
/// Default floor on the class maximum before the map is trusted.
pub const THETA_WP: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaypointSource {
    LargeMap,
    SmallDetection,
    ContainerFallback,
}

/// A pose from which the target should be reachable. The horizon is left
/// open until the agent arrives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Waypoint {
    pub cell: Cell,
    pub r: Rotation,
    pub h: Option<Horizon>,
    pub source: WaypointSource,
}

impl Waypoint {
    pub fn pose(&self, default_h: Horizon) -> Pose {
        Pose::new(self.cell.x, self.cell.y, self.r, self.h.unwrap_or(default_h))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WaypointError {
    #[error("class {0} is not confidently on the map")]
    ClassNotOnMap(LargeClass),
    #[error("no waypoint for {0}")]
    NoWaypoint(ObjectClass),
}

/// Which sources may produce a waypoint.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaypointStrategy {
    #[default]
    Both,
    MapOnly,
    DetectionOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WaypointOptions {
    pub tau_c: f64,
    pub theta_wp: f64,
    pub strategy: WaypointStrategy,
    /// Skip the class back-up step.
    pub no_backup: bool,
}

impl Default for WaypointOptions {
    fn default() -> Self {
        WaypointOptions { tau_c: TAU_C, theta_wp: THETA_WP, strategy: WaypointStrategy::Both, no_backup: false }
    }
}

/// Append-only record of detections, poses in the map frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DetectionLog<T: Confidence = f32> {
    entries: Vec<Detection<T>>,
}

impl<T: Confidence> Default for DetectionLog<T> {
    fn default() -> Self {
        DetectionLog { entries: Vec::new() }
    }
}

impl<T: Confidence> DetectionLog<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, d: Detection<T>) {
        self.entries.push(d);
    }

    pub fn extend(&mut self, ds: impl IntoIterator<Item = Detection<T>>) {
        self.entries.extend(ds);
    }

    pub fn entries(&self) -> &[Detection<T>] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Displacement opposite to `r` by `distance` cells.
pub fn backup_vector(distance: i32, r: Rotation) -> (i32, i32) {
    let (fx, fy) = r.forward();
    (-distance * fx, -distance * fy)
}

pub fn backup_offsets(class: LargeClass, r: Rotation) -> (i32, i32) {
    backup_vector(class.backup_distance(), r)
}

/// [`backup_offsets`] for a class given by name, covering receptacles
/// outside the map vocabulary.
pub fn backup_offsets_for_name(name: &str, r: Rotation) -> (i32, i32) {
    backup_vector(backup_distance_for_name(name), r)
}

/// Closest cell of `grid` to `target` by Euclidean distance; the first in
/// row-major order wins ties.
pub fn nearest_navigable(grid: &NavGrid, target: Cell) -> Option<Cell> {
    let mut best: Option<(i64, Cell)> = None;
    for c in grid.iter() {
        let d = c.dist2(target);
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, c));
        }
    }
    best.map(|(_, c)| c)
}

/// Rotation at `from` that puts `target` nearest the optical axis.
pub fn facing_rotation(from: Cell, target: Cell) -> Rotation {
    let mut best: Option<(f64, i32, Rotation)> = None;
    for r in Rotation::ALL {
        let (d, l) = cell_to_ego(from, r, target);
        let angle = (l as f64).atan2(d as f64).abs();
        let better = match best {
            None => true,
            Some((ba, bd, _)) => angle < ba || (angle == ba && d < bd),
        };
        if better {
            best = Some((angle, d, r));
        }
    }
    best.expect("four rotations").2
}

/// Steps back from `from` against `r`, shrinking the distance until the
/// destination is in `grid`.
fn back_up(grid: &NavGrid, from: Cell, r: Rotation, distance: i32) -> Cell {
    for b in (1..=distance).rev() {
        let (dx, dy) = backup_vector(b, r);
        let c = from.offset(dx, dy);
        if grid.contains(c) {
            return c;
        }
    }
    from
}

pub fn waypoint_large<T: Confidence>(
    map: &SemanticMap<T>,
    navigable: &NavGrid,
    class: LargeClass,
) -> Result<Waypoint, WaypointError> {
    waypoint_large_with(map, navigable, class, &WaypointOptions::default())
}

pub fn waypoint_large_with<T: Confidence>(
    map: &SemanticMap<T>,
    navigable: &NavGrid,
    class: LargeClass,
    opts: &WaypointOptions,
) -> Result<Waypoint, WaypointError> {
    let (peak, conf) = map.argmax(class.index());
    if conf.to_f64_lossy() < opts.theta_wp {
        return Err(WaypointError::ClassNotOnMap(class));
    }
    let near = nearest_navigable(navigable, peak).ok_or(WaypointError::ClassNotOnMap(class))?;
    let r = facing_rotation(near, peak);
    let distance = if opts.no_backup { 0 } else { class.backup_distance() };
    let cell = back_up(navigable, near, r, distance);
    Ok(Waypoint { cell, r, h: None, source: WaypointSource::LargeMap })
}

/// Pose of the largest-mask detection of `class` at or above `tau_c`;
/// the earlier entry wins ties.
pub fn best_detection<T: Confidence>(log: &DetectionLog<T>, class: ObjectClass, tau_c: f64) -> Option<&Detection<T>> {
    let mut best: Option<&Detection<T>> = None;
    for d in log.entries() {
        if d.class == class && d.confidence.to_f64_lossy() >= tau_c && best.is_none_or(|b| d.mask_area > b.mask_area) {
            best = Some(d);
        }
    }
    best
}

pub fn waypoint_small<T: Confidence>(log: &DetectionLog<T>, class: ObjectClass, tau_c: f64) -> Option<Waypoint> {
    best_detection(log, class, tau_c).map(|d| Waypoint {
        cell: d.pose.cell(),
        r: d.pose.r,
        h: None,
        source: WaypointSource::SmallDetection,
    })
}

/// Picks a waypoint for `target`, falling back to the container's for
/// small objects that were never seen well enough.
pub fn resolve_target<T: Confidence>(
    map: &SemanticMap<T>,
    navigable: &NavGrid,
    log: &DetectionLog<T>,
    target: ObjectClass,
    container: Option<LargeClass>,
    opts: &WaypointOptions,
) -> Result<Waypoint, WaypointError> {
    let none = WaypointError::NoWaypoint(target);
    match (target, opts.strategy) {
        (ObjectClass::Large(_), WaypointStrategy::DetectionOnly) => {
            waypoint_small(log, target, opts.tau_c).map(|w| Waypoint { source: WaypointSource::LargeMap, ..w }).ok_or(none)
        }
        (ObjectClass::Large(c), _) => waypoint_large_with(map, navigable, c, opts).map_err(|_| none),
        (ObjectClass::Small(_), strategy) => {
            if strategy != WaypointStrategy::MapOnly {
                if let Some(w) = waypoint_small(log, target, opts.tau_c) {
                    return Ok(w);
                }
            }
            match (container, strategy) {
                (Some(c), WaypointStrategy::Both | WaypointStrategy::MapOnly) => waypoint_large_with(map, navigable, c, opts)
                    .map(|w| Waypoint { source: WaypointSource::ContainerFallback, ..w })
                    .map_err(|_| none),
                _ => Err(none),
            }
        }
    }
}
