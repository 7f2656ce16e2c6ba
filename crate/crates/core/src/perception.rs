//! Noisy observation oracle.
//!
//! Stands in for a learned map predictor and instance segmenter: it reads
//! the ground truth inside the agent's egocentric window and corrupts it
//! according to a [`NoiseModel`].

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::classes::{ObjectClass, SmallClass, N_LARGE};
use crate::geometry::{cell_to_ego, ego_to_cell, Pose};
use crate::scalar::Confidence;
use crate::world::{ObjectStates, Scene};

/// Window rows, starting at the agent's own row.
pub const WINDOW_DEPTH: usize = 10;
/// Window columns, centred on the agent.
pub const WINDOW_WIDTH: usize = 7;
pub const HALF_WIDTH: i32 = (WINDOW_WIDTH / 2) as i32;
/// Large-object channels plus the navigable channel.
pub const CHANNELS: usize = N_LARGE + 1;
pub const NAV_CHANNEL: usize = N_LARGE;

/// Confidence range of spurious map cells; kept under the waypoint floor.
const SPURIOUS_CELL: (f64, f64) = (0.05, 0.5);
/// Confidence range of spurious detections.
const SPURIOUS_DETECTION: (f64, f64) = (0.3, 0.9);

/// Egocentric `WINDOW_DEPTH`×`WINDOW_WIDTH`×`CHANNELS` prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialMap<T: Confidence = f32> {
    values: Vec<T>,
    valid: Vec<bool>,
}

impl<T: Confidence> PartialMap<T> {
    pub fn empty() -> Self {
        PartialMap {
            values: vec![T::zero(); WINDOW_DEPTH * WINDOW_WIDTH * CHANNELS],
            valid: vec![false; WINDOW_DEPTH * WINDOW_WIDTH],
        }
    }

    fn slot(depth: usize, lateral: i32) -> usize {
        debug_assert!(depth < WINDOW_DEPTH && lateral.abs() <= HALF_WIDTH);
        depth * WINDOW_WIDTH + (lateral + HALF_WIDTH) as usize
    }

    pub fn is_valid(&self, depth: usize, lateral: i32) -> bool {
        self.valid[Self::slot(depth, lateral)]
    }

    pub fn get(&self, depth: usize, lateral: i32, channel: usize) -> T {
        self.values[Self::slot(depth, lateral) * CHANNELS + channel]
    }

    pub fn channels(&self, depth: usize, lateral: i32) -> &[T] {
        let s = Self::slot(depth, lateral) * CHANNELS;
        &self.values[s..s + CHANNELS]
    }

    pub fn set(&mut self, depth: usize, lateral: i32, channel: usize, value: T) {
        self.values[Self::slot(depth, lateral) * CHANNELS + channel] = value;
    }

    pub fn set_valid(&mut self, depth: usize, lateral: i32, valid: bool) {
        self.valid[Self::slot(depth, lateral)] = valid;
    }

    /// Every `(depth, lateral)` slot of the window.
    pub fn slots() -> impl Iterator<Item = (usize, i32)> {
        (0..WINDOW_DEPTH).flat_map(|d| (-HALF_WIDTH..=HALF_WIDTH).map(move |l| (d, l)))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("noise parameter `{name}` = {value} is out of range")]
pub struct NoiseError {
    pub name: &'static str,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    pub p_false_negative: f64,
    pub p_false_positive: f64,
    /// Standard deviation of the additive Gaussian on surviving confidences.
    pub confidence_jitter: f64,
    /// Per-cell-of-depth multiplier on detection probability.
    pub detection_decay: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel { p_false_negative: 0.10, p_false_positive: 0.02, confidence_jitter: 0.05, detection_decay: 0.9 }
    }
}

impl NoiseModel {
    pub fn zero() -> Self {
        NoiseModel { p_false_negative: 0.0, p_false_positive: 0.0, confidence_jitter: 0.0, detection_decay: 1.0 }
    }

    pub fn validate(&self) -> Result<(), NoiseError> {
        let unit = |name, value: f64| {
            if (0.0..=1.0).contains(&value) {
                Ok(())
            } else {
                Err(NoiseError { name, value })
            }
        };
        unit("p_false_negative", self.p_false_negative)?;
        unit("p_false_positive", self.p_false_positive)?;
        unit("detection_decay", self.detection_decay)?;
        if !(self.confidence_jitter >= 0.0 && self.confidence_jitter.is_finite()) {
            return Err(NoiseError { name: "confidence_jitter", value: self.confidence_jitter });
        }
        Ok(())
    }

    fn jittered<T: Confidence, R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        if self.confidence_jitter == 0.0 {
            return T::one();
        }
        let z: f64 = rng.sample(StandardNormal);
        T::from_f64_lossy(1.0 + self.confidence_jitter * z).clamp_unit()
    }

    fn spurious<T: Confidence, R: Rng + ?Sized>(&self, (lo, hi): (f64, f64), rng: &mut R) -> T {
        T::from_f64_lossy(rng.random_range(lo..hi))
    }
}

/// A single instance detection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Detection<T: Confidence = f32> {
    pub class: ObjectClass,
    pub confidence: T,
    /// Synthetic mask area in pixels.
    pub mask_area: u32,
    pub pose: Pose,
}

/// Synthetic mask area of an object `depth` cells ahead and `lateral`
/// cells to the side. Strictly decreasing in both `depth` and `|lateral|`
/// inside the window.
pub fn mask_area(depth: i32, lateral: i32) -> u32 {
    let depth_term = WINDOW_DEPTH as i32 - depth;
    let centering = (HALF_WIDTH + 1) * (HALF_WIDTH + 1) - lateral * lateral;
    (10 * depth_term * centering).max(0) as u32
}

/// Detectable slots: the window minus the agent's own row.
fn in_view(depth: i32, lateral: i32) -> bool {
    (1..WINDOW_DEPTH as i32).contains(&depth) && lateral.abs() <= HALF_WIDTH
}

/// Noise-free rasterization of the scene inside the window at `pose`.
pub fn ground_truth_partial<T: Confidence>(scene: &Scene, pose: Pose) -> PartialMap<T> {
    let mut out = PartialMap::empty();
    for (d, l) in PartialMap::<T>::slots() {
        let cell = ego_to_cell(pose.cell(), pose.r, d as i32, l);
        if !cell.in_bounds(scene.grid_size()) {
            continue;
        }
        out.set_valid(d, l, true);
        if scene.is_navigable(cell) {
            out.set(d, l, NAV_CHANNEL, T::one());
        }
        for obj in scene.large_objects() {
            if obj.footprint.contains(&cell) {
                out.set(d, l, obj.class.index(), T::one());
            }
        }
    }
    out
}

pub fn observe_partial_map<T: Confidence, R: Rng + ?Sized>(
    scene: &Scene,
    pose: Pose,
    noise: &NoiseModel,
    rng: &mut R,
) -> PartialMap<T> {
    let mut map = ground_truth_partial::<T>(scene, pose);
    for (d, l) in PartialMap::<T>::slots() {
        if !map.is_valid(d, l) {
            continue;
        }
        for ch in 0..CHANNELS {
            let truth = map.get(d, l, ch) > T::zero();
            let value = if truth {
                if rng.random_bool(noise.p_false_negative) {
                    T::zero()
                } else {
                    noise.jittered(rng)
                }
            } else if rng.random_bool(noise.p_false_positive) {
                noise.spurious(SPURIOUS_CELL, rng)
            } else {
                T::zero()
            };
            map.set(d, l, ch, value);
        }
    }
    map
}

fn detection_kept<R: Rng + ?Sized>(noise: &NoiseModel, depth: i32, rng: &mut R) -> bool {
    let p = (1.0 - noise.p_false_negative) * noise.detection_decay.powi(depth);
    rng.random_bool(p.clamp(0.0, 1.0))
}

/// Detections of small objects visible from `pose` whose height class
/// matches the camera horizon.
pub fn detect_small_objects<T: Confidence, R: Rng + ?Sized>(
    scene: &Scene,
    objects: &ObjectStates,
    pose: Pose,
    noise: &NoiseModel,
    rng: &mut R,
) -> Vec<Detection<T>> {
    let mut out = Vec::new();
    for (i, obj) in scene.small_objects().iter().enumerate() {
        if !objects.small_visible(scene, i) || !objects.small[i].height.admits(pose.h) {
            continue;
        }
        let Some(cell) = objects.small_cell(i) else { continue };
        let (d, l) = cell_to_ego(pose.cell(), pose.r, cell);
        if !in_view(d, l) || !detection_kept(noise, d, rng) {
            continue;
        }
        out.push(Detection { class: obj.class.into(), confidence: noise.jittered(rng), mask_area: mask_area(d, l), pose });
    }
    if noise.p_false_positive > 0.0 && rng.random_bool(noise.p_false_positive) {
        let class = SmallClass::ALL[rng.random_range(0..SmallClass::ALL.len())];
        let d = rng.random_range(1..WINDOW_DEPTH as i32);
        let l = rng.random_range(-HALF_WIDTH..=HALF_WIDTH);
        out.push(Detection { class: class.into(), confidence: noise.spurious(SPURIOUS_DETECTION, rng), mask_area: mask_area(d, l), pose });
    }
    out
}

/// Footprint-visibility detections of large objects, one per instance,
/// scored at its most prominent footprint cell.
pub fn detect_large_objects<T: Confidence, R: Rng + ?Sized>(
    scene: &Scene,
    pose: Pose,
    noise: &NoiseModel,
    rng: &mut R,
) -> Vec<Detection<T>> {
    let mut out = Vec::new();
    for obj in scene.large_objects() {
        if !obj.height.admits(pose.h) {
            continue;
        }
        let best = obj
            .footprint
            .iter()
            .map(|&c| cell_to_ego(pose.cell(), pose.r, c))
            .filter(|&(d, l)| in_view(d, l))
            .max_by_key(|&(d, l)| (mask_area(d, l), std::cmp::Reverse(d)));
        let Some((d, l)) = best else { continue };
        if !detection_kept(noise, d, rng) {
            continue;
        }
        out.push(Detection { class: obj.class.into(), confidence: noise.jittered(rng), mask_area: mask_area(d, l), pose });
    }
    out
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::classes::{HeightClass, LargeClass};
    use crate::geometry::{Cell, Horizon, Rotation};
    use crate::world::{LargeObject, SmallObject};

    fn h(deg: i32) -> Horizon {
        Horizon::new(deg).unwrap()
    }

    fn scene_with(large: Vec<LargeObject>, small: Vec<SmallObject>) -> Scene {
        let size = 20;
        let mut nav: Vec<bool> = (0..size * size)
            .map(|i| {
                let c = Cell::from_index(i, size);
                (1..19).contains(&c.x) && (1..19).contains(&c.y)
            })
            .collect();
        for o in &large {
            for c in &o.footprint {
                nav[c.index(size)] = false;
            }
        }
        Scene::new(size, nav, large, small, Pose::new(10, 15, Rotation::North, h(30))).unwrap()
    }

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    #[test]
    fn zero_noise_corridor_is_all_navigable() {
        let scene = scene_with(vec![], vec![]);
        let pose = Pose::new(10, 15, Rotation::North, h(30));
        let map: PartialMap<f32> = observe_partial_map(&scene, pose, &NoiseModel::zero(), &mut rng());
        for (d, l) in PartialMap::<f32>::slots() {
            assert!(map.is_valid(d, l));
            assert_eq!(map.get(d, l, NAV_CHANNEL), 1.0);
            for ch in 0..N_LARGE {
                assert_eq!(map.get(d, l, ch), 0.0);
            }
        }
    }

    #[test]
    fn zero_noise_fridge_matches_brute_force_window() {
        let fridge = LargeObject {
            class: LargeClass::Fridge,
            footprint: vec![Cell::new(10, 12), Cell::new(11, 12)],
            articulated: true,
            height: HeightClass::Mid,
        };
        let scene = scene_with(vec![fridge.clone()], vec![]);
        for r in Rotation::ALL {
            let pose = Pose::new(10, 15, r, h(30));
            let map: PartialMap<f64> = observe_partial_map(&scene, pose, &NoiseModel::zero(), &mut rng());
            // oracle: walk every grid cell, project into the window by hand
            let (fx, fy) = r.forward();
            let (rx, ry) = (-fy, fx);
            for y in 0..20 {
                for x in 0..20 {
                    let (dx, dy) = (x - 10, y - 15);
                    let depth = dx * fx + dy * fy;
                    let lateral = dx * rx + dy * ry;
                    if !(0..10).contains(&depth) || lateral.abs() > 3 {
                        continue;
                    }
                    let want = if fridge.footprint.contains(&Cell::new(x, y)) { 1.0 } else { 0.0 };
                    assert_eq!(map.get(depth as usize, lateral, LargeClass::Fridge.index()), want);
                }
            }
        }
        // facing the fridge it sits three rows ahead
        let map: PartialMap<f32> =
            observe_partial_map(&scene, Pose::new(10, 15, Rotation::North, h(30)), &NoiseModel::zero(), &mut rng());
        assert_eq!(map.get(3, 0, LargeClass::Fridge.index()), 1.0);
        assert_eq!(map.get(3, 1, LargeClass::Fridge.index()), 1.0);
        assert_eq!(map.get(3, -1, LargeClass::Fridge.index()), 0.0);
    }

    #[test]
    fn off_grid_cells_are_masked() {
        let scene = scene_with(vec![], vec![]);
        let pose = Pose::new(1, 3, Rotation::North, h(30));
        let map: PartialMap<f32> = observe_partial_map(&scene, pose, &NoiseModel::default(), &mut rng());
        for (d, l) in PartialMap::<f32>::slots() {
            let c = ego_to_cell(pose.cell(), pose.r, d as i32, l);
            assert_eq!(map.is_valid(d, l), c.in_bounds(20));
            if !map.is_valid(d, l) {
                assert!(map.channels(d, l).iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn certain_false_negatives_blank_the_map() {
        let scene = scene_with(vec![], vec![]);
        let noise = NoiseModel { p_false_negative: 1.0, p_false_positive: 0.0, ..NoiseModel::default() };
        let map: PartialMap<f32> =
            observe_partial_map(&scene, Pose::new(10, 15, Rotation::East, h(30)), &noise, &mut rng());
        for (d, l) in PartialMap::<f32>::slots() {
            assert!(map.channels(d, l).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn noisy_confidences_stay_in_unit_range_and_repeat_per_seed() {
        let scene = scene_with(vec![], vec![]);
        let noise = NoiseModel { confidence_jitter: 0.5, p_false_positive: 0.3, ..NoiseModel::default() };
        let pose = Pose::new(10, 15, Rotation::South, h(30));
        let a: PartialMap<f32> = observe_partial_map(&scene, pose, &noise, &mut rng());
        let b: PartialMap<f32> = observe_partial_map(&scene, pose, &noise, &mut rng());
        assert_eq!(a, b);
        for (d, l) in PartialMap::<f32>::slots() {
            assert!(a.channels(d, l).iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    fn lettuce_scene(cell: Cell) -> Scene {
        let counter = LargeObject {
            class: LargeClass::Countertop,
            footprint: (4..=16).map(|x| Cell::new(x, cell.y)).collect(),
            articulated: false,
            height: HeightClass::Mid,
        };
        let lettuce = SmallObject { class: SmallClass::Lettuce, cell, container: Some(0), height: HeightClass::Mid };
        scene_with(vec![counter], vec![lettuce])
    }

    #[test]
    fn nearest_centred_detection_has_the_largest_area() {
        let scene = lettuce_scene(Cell::new(10, 8));
        let objects = ObjectStates::initial(&scene);
        let near = Pose::new(10, 9, Rotation::North, h(30));
        let dets: Vec<Detection<f32>> = detect_small_objects(&scene, &objects, near, &NoiseModel::zero(), &mut rng());
        assert_eq!(dets.len(), 1);
        assert_eq!(dets[0].class, ObjectClass::Small(SmallClass::Lettuce));
        assert_eq!(dets[0].mask_area, mask_area(1, 0));
        assert_eq!(dets[0].confidence, 1.0);
        assert!(PartialMap::<f32>::slots().filter(|&(d, _)| d >= 1).all(|(d, l)| mask_area(d as i32, l) <= dets[0].mask_area));

        let far = Pose::new(8, 13, Rotation::North, h(15));
        let dets: Vec<Detection<f32>> = detect_small_objects(&scene, &objects, far, &NoiseModel::zero(), &mut rng());
        assert_eq!(dets.len(), 1);
        assert_eq!(dets[0].mask_area, mask_area(5, 2));
        assert!(dets[0].mask_area < mask_area(1, 0));
    }

    #[test]
    fn objects_level_with_the_agent_are_not_detected() {
        let scene = lettuce_scene(Cell::new(10, 8));
        let objects = ObjectStates::initial(&scene);
        // Facing east from just below the lettuce puts it in the agent's own row.
        let beside = Pose::new(10, 9, Rotation::East, h(30));
        assert_eq!(cell_to_ego(beside.cell(), beside.r, Cell::new(10, 8)), (0, -1));
        let dets: Vec<Detection<f32>> = detect_small_objects(&scene, &objects, beside, &NoiseModel::zero(), &mut rng());
        assert!(dets.is_empty());
    }

    #[test]
    fn spurious_cells_stay_below_one_half() {
        let scene = scene_with(vec![], vec![]);
        let noise = NoiseModel { p_false_negative: 0.0, p_false_positive: 1.0, confidence_jitter: 0.0, detection_decay: 1.0 };
        let pose = Pose::new(10, 15, Rotation::North, h(30));
        let map: PartialMap<f64> = observe_partial_map(&scene, pose, &noise, &mut rng());
        let mut spurious = 0;
        for (d, l) in PartialMap::<f64>::slots() {
            for ch in 0..N_LARGE {
                let v = map.get(d, l, ch);
                assert!(v > 0.0 && v < 0.5, "{v}");
                spurious += 1;
            }
        }
        assert_eq!(spurious, 70 * N_LARGE);
    }

    #[test]
    fn height_mismatch_hides_small_objects() {
        let scene = lettuce_scene(Cell::new(10, 8));
        let objects = ObjectStates::initial(&scene);
        for deg in [60, 45, 0, -15, -30] {
            let pose = Pose::new(10, 9, Rotation::North, h(deg));
            let dets: Vec<Detection<f32>> = detect_small_objects(&scene, &objects, pose, &NoiseModel::zero(), &mut rng());
            assert!(dets.is_empty(), "h={deg}");
        }
    }

    #[test]
    fn mask_area_strictly_decreases_with_depth_and_offset() {
        for d in 0..WINDOW_DEPTH as i32 {
            for l in 0..=HALF_WIDTH {
                assert!(mask_area(d, l) > 0);
                if d + 1 < WINDOW_DEPTH as i32 {
                    assert!(mask_area(d + 1, l) < mask_area(d, l));
                }
                if l < HALF_WIDTH {
                    assert!(mask_area(d, l + 1) < mask_area(d, l));
                }
                assert_eq!(mask_area(d, l), mask_area(d, -l));
            }
        }
        // every pose one or two cells ahead and at most one to the side
        // outscores every pose outside that band
        let close_min = mask_area(2, 1);
        assert!(mask_area(3, 0) < close_min);
        assert!(mask_area(1, 2) < close_min);
    }

    #[test]
    fn large_detection_scores_the_most_prominent_cell() {
        let fridge = LargeObject {
            class: LargeClass::Fridge,
            footprint: vec![Cell::new(10, 12), Cell::new(11, 12)],
            articulated: true,
            height: HeightClass::Mid,
        };
        let scene = scene_with(vec![fridge], vec![]);
        let dets: Vec<Detection<f32>> =
            detect_large_objects(&scene, Pose::new(11, 15, Rotation::North, h(30)), &NoiseModel::zero(), &mut rng());
        assert_eq!(dets.len(), 1);
        assert_eq!(dets[0].mask_area, mask_area(3, 0));
        let none: Vec<Detection<f32>> =
            detect_large_objects(&scene, Pose::new(11, 15, Rotation::North, h(60)), &NoiseModel::zero(), &mut rng());
        assert!(none.is_empty());
    }

    #[test]
    fn noise_validation() {
        assert!(NoiseModel::default().validate().is_ok());
        assert!(NoiseModel { p_false_negative: 1.5, ..NoiseModel::zero() }.validate().is_err());
        assert!(NoiseModel { confidence_jitter: -0.1, ..NoiseModel::zero() }.validate().is_err());
    }
}
