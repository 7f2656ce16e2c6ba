use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::classes::{HeightClass, SmallClass};
use crate::geometry::{Horizon, Rotation};
use crate::world::tests::fridge_niche;
use crate::world::{LargeObject, Scene};

/// Open 15×15 room (interior 1..=13) with a fridge on the south wall and
/// the agent near the north wall facing north.
fn south_fridge_room() -> Scene {
    let size = 15;
    let fridge = vec![Cell::new(7, 13), Cell::new(8, 13)];
    let nav = (0..size * size)
        .map(|i| {
            let c = Cell::from_index(i, size);
            (1..=13).contains(&c.x) && (1..=13).contains(&c.y) && !fridge.contains(&c)
        })
        .collect();
    let large = vec![LargeObject { class: LargeClass::Fridge, footprint: fridge, articulated: true, height: HeightClass::Mid }];
    Scene::new(size, nav, large, vec![], Pose::new(7, 2, Rotation::North, Horizon::INITIAL)).unwrap()
}

fn empty_room(size: usize) -> Scene {
    let nav = (0..size * size)
        .map(|i| {
            let c = Cell::from_index(i, size);
            (1..size as i32 - 1).contains(&c.x) && (1..size as i32 - 1).contains(&c.y)
        })
        .collect();
    Scene::new(size, nav, vec![], vec![], Pose::new(size as i32 / 2, size as i32 / 2, Rotation::North, Horizon::INITIAL))
        .unwrap()
}

fn fridge_targets() -> Vec<(usize, SubgoalTargets)> {
    vec![(0, SubgoalTargets::large(LargeClass::Fridge))]
}

#[test]
fn stops_when_target_confident() {
    let mut map = SemanticMap::<f64>::new(GRID_SIZE);
    map.set(LargeClass::Fridge.index(), Cell::new(18, 10), 0.99);
    let grid = NavGrid::from_fn(GRID_SIZE, |_| true);
    let mut explored = ExploredAreaMap::new(GRID_SIZE);
    explored.update(Pose::new(18, 18, Rotation::North, Horizon::INITIAL));
    let log = DetectionLog::new();
    let input = PolicyInput {
        map: &map,
        grid: &grid,
        explored: &explored,
        log: &log,
        pose: Pose::new(18, 18, Rotation::North, Horizon::INITIAL),
        targets: Some(SubgoalTargets::large(LargeClass::Fridge)),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut p = ExplorationPolicy::new(PolicyConfig::default());
    assert_eq!(p.next_action(&input, &mut rng), ExplorationAction::Stop);
    // Frontier-only ignores the target.
    let mut f = ExplorationPolicy::new(PolicyConfig::of(PolicyKind::FrontierOnly));
    assert_eq!(f.next_action(&input, &mut rng), ExplorationAction::RotateLeft);
    // Nothing explored at all: no frontier to chase.
    let fresh = ExploredAreaMap::new(GRID_SIZE);
    let input = PolicyInput { explored: &fresh, ..input };
    assert_eq!(f.next_action(&input, &mut rng), ExplorationAction::Stop);
}

#[test]
fn small_target_stops_on_close_detection() {
    let map = SemanticMap::<f64>::new(GRID_SIZE);
    let grid = NavGrid::from_fn(GRID_SIZE, |_| true);
    let pose = Pose::new(18, 18, Rotation::North, Horizon::INITIAL);
    let mut explored = ExploredAreaMap::new(GRID_SIZE);
    explored.update(pose);
    let apple = ObjectClass::Small(SmallClass::Apple);
    let mut log = DetectionLog::new();
    log.push(Detection { class: apple, confidence: 0.9, mask_area: crate::perception::mask_area(5, 0), pose });
    let targets = Some(SubgoalTargets { target: apple, container: None, nav_noun: LargeClass::Countertop.into() });
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut p = ExplorationPolicy::new(PolicyConfig::default());
    let input = PolicyInput { map: &map, grid: &grid, explored: &explored, log: &log, pose, targets };
    assert_ne!(p.next_action(&input, &mut rng), ExplorationAction::Stop);
    log.push(Detection { class: apple, confidence: 0.9, mask_area: crate::perception::mask_area(2, 0), pose });
    let input = PolicyInput { map: &map, grid: &grid, explored: &explored, log: &log, pose, targets };
    assert_eq!(p.next_action(&input, &mut rng), ExplorationAction::Stop);
}

#[test]
fn first_frontier_step_is_deterministic() {
    let scene = empty_room(15);
    let run = |seed| {
        let mut sim = Simulator::new(&scene);
        let out = run_exploration::<f32>(&mut sim, &fridge_targets(), &PolicyConfig::default(), &NoiseModel::zero(), seed);
        out.trace.raw_actions
    };
    let a = run(3);
    assert!(matches!(a[0], ExplorationAction::MoveAhead | ExplorationAction::RotateLeft | ExplorationAction::RotateRight));
    assert_eq!(a, run(3));
}

#[test]
fn visible_target_stops_at_once() {
    let scene = fridge_niche();
    let mut sim = Simulator::new(&scene);
    let out = run_exploration::<f64>(&mut sim, &fridge_targets(), &PolicyConfig::default(), &NoiseModel::zero(), 1);
    assert_eq!(out.end, PhaseEnd::Completed);
    assert!(out.trace.raw_actions.is_empty());
    assert_eq!(out.trace.visited, BTreeSet::from([Cell::new(18, 18)]));
    assert_eq!(coverage_metrics(&out.trace), CoverageMetrics { coverage: 1, coverage_efficiency: 0.0 });
}

#[test]
fn hidden_target_is_found_with_full_sweeps() {
    let scene = south_fridge_room();
    let mut sim = Simulator::new(&scene);
    let out = run_exploration::<f32>(&mut sim, &fridge_targets(), &PolicyConfig::default(), &NoiseModel::zero(), 9);
    assert_eq!(out.end, PhaseEnd::Completed);
    assert!(!out.trace.raw_actions.is_empty());
    assert!(out.map.max_confidence(LargeClass::Fridge) >= 0.95);
    let mut seen: BTreeMap<(i32, i32, Rotation), BTreeSet<i32>> = BTreeMap::new();
    for o in &out.trace.observations {
        seen.entry((o.pose.x, o.pose.y, o.pose.r)).or_default().insert(o.pose.h.degrees());
    }
    for hs in seen.values() {
        assert_eq!(hs, &BTreeSet::from([15, 30, 45]));
    }
    let raw: Vec<_> = out.trace.augmented_actions.iter().filter(|a| !a.1).map(|a| a.0).collect();
    let want: Vec<_> = out.trace.raw_actions.iter().filter_map(|a| a.to_action()).collect();
    assert_eq!(raw, want);
    assert_eq!(sim.records().len() as u32, out.steps);
}

#[test]
fn random_policy_bounded_coverage() {
    let scene = empty_room(17);
    let mut sim = Simulator::new(&scene);
    let cfg = PolicyConfig { max_steps: 200, ..PolicyConfig::of(PolicyKind::Random) };
    let out = run_exploration::<f32>(&mut sim, &fridge_targets(), &cfg, &NoiseModel::default(), 5);
    let m = coverage_metrics(&out.trace);
    assert!(m.coverage > 1 && m.coverage <= scene.navigable_count());
    assert!(out.steps <= 200);
    assert_eq!(&out.trace.raw_actions[..4], &[ExplorationAction::RotateRight; 4]);
}

#[test]
fn identical_seeds_identical_traces() {
    let scene = south_fridge_room();
    for kind in PolicyKind::ALL {
        let run = || {
            let mut sim = Simulator::new(&scene);
            let out = run_exploration::<f32>(&mut sim, &fridge_targets(), &PolicyConfig::of(kind), &NoiseModel::default(), 77);
            (out.trace, sim.records().to_vec())
        };
        assert_eq!(run(), run(), "{kind}");
    }
}

fn synthetic_trace(moves: usize, turns: usize) -> ExplorationTrace<f32> {
    let mut t = ExplorationTrace::default();
    t.visited.insert(Cell::new(0, 0));
    for i in 0..moves {
        t.raw_actions.push(ExplorationAction::MoveAhead);
        t.visited.insert(Cell::new(0, i as i32 + 1));
    }
    t.raw_actions.extend(std::iter::repeat_n(ExplorationAction::RotateRight, turns));
    t
}

#[test]
fn coverage_examples() {
    let m = coverage_metrics(&synthetic_trace(5, 0));
    assert_eq!(m.coverage, 6);
    assert!((m.coverage_efficiency - 1.2).abs() < 1e-12);
    let m = coverage_metrics(&synthetic_trace(0, 10));
    assert_eq!(m.coverage, 1);
    assert!((m.coverage_efficiency - 0.1).abs() < 1e-12);
    let m = coverage_metrics(&ExplorationTrace::<f32>::default());
    assert_eq!((m.coverage, m.coverage_efficiency), (1, 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn phase_budgets_hold(seed in any::<u64>(), k in 0usize..5) {
        let scene = south_fridge_room();
        let mut sim = Simulator::new(&scene);
        let noise = NoiseModel { p_false_negative: 0.3, p_false_positive: 0.1, ..NoiseModel::default() };
        let out = run_exploration::<f32>(&mut sim, &fridge_targets(), &PolicyConfig::of(PolicyKind::ALL[k]), &noise, seed);
        prop_assert!(out.steps <= PHASE_MAX_STEPS);
        prop_assert!(out.failures <= PHASE_MAX_FAILURES);
        prop_assert_eq!(out.steps as usize, out.trace.augmented_actions.len());
        prop_assert_eq!(out.steps, sim.agent().steps_taken);
        let cells: Vec<_> = sim.records().iter().map(|r| r.pose.cell()).collect();
        prop_assert!(cells.iter().all(|&c| scene.is_navigable(c)));
        let mut counts = out.explored.count();
        // Explored area only grows along the trace.
        let mut e = ExploredAreaMap::new(GRID_SIZE);
        for o in &out.trace.observations {
            let before = e.count();
            e.update(o.pose);
            prop_assert!(e.count() >= before);
        }
        counts -= e.count();
        prop_assert_eq!(counts, 0);
    }
}
