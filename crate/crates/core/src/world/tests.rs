use proptest::prelude::*;

use super::*;
use crate::geometry::Horizon;

fn h(deg: i32) -> Horizon {
    Horizon::new(deg).unwrap()
}

fn grid_from_rect(size: usize, x0: i32, x1: i32, y0: i32, y1: i32) -> Vec<bool> {
    (0..size * size)
        .map(|i| {
            let c = Cell::from_index(i, size);
            (x0..=x1).contains(&c.x) && (y0..=y1).contains(&c.y)
        })
        .collect()
}

fn open_room() -> Scene {
    let size = 12;
    let nav = grid_from_rect(size, 1, 10, 1, 10);
    Scene::new(size, nav, vec![], vec![], Pose::new(5, 5, Rotation::North, h(30))).unwrap()
}

/// A fridge in a niche against the north wall; the only navigable area is
/// a four-wide corridor running south from it.
pub(crate) fn fridge_niche() -> Scene {
    let size = 15;
    let nav = grid_from_rect(size, 4, 7, 2, 13);
    let fridge = LargeObject {
        class: LargeClass::Fridge,
        footprint: vec![Cell::new(5, 1), Cell::new(6, 1)],
        articulated: true,
        height: HeightClass::Mid,
    };
    let apple = SmallObject { class: SmallClass::Apple, cell: Cell::new(6, 1), container: Some(0), height: HeightClass::Mid };
    Scene::new(size, nav, vec![fridge], vec![apple], Pose::new(5, 10, Rotation::North, h(30))).unwrap()
}

fn world_at(scene: &Scene, pose: Pose) -> WorldState {
    let mut w = WorldState::initial(scene);
    w.agent.pose = pose;
    w
}

fn open_fridge() -> Action {
    Action::Interact(Interaction { kind: InteractionKind::Open, target: LargeClass::Fridge.into() })
}

#[test]
fn rotate_right_from_east() {
    let scene = open_room();
    let w = world_at(&scene, Pose::new(5, 5, Rotation::East, h(30)));
    let (next, outcome) = step(&scene, &w, Action::RotateRight).unwrap();
    assert_eq!(outcome, StepOutcome::Success);
    assert_eq!(next.agent.pose, Pose::new(5, 5, Rotation::South, h(30)));
    assert_eq!(next.agent.steps_taken, 1);
}

#[test]
fn move_ahead_north_decreases_row() {
    let scene = open_room();
    let w = world_at(&scene, Pose::new(5, 5, Rotation::North, h(30)));
    let (next, outcome) = step(&scene, &w, Action::MoveAhead).unwrap();
    assert!(outcome.is_success());
    assert_eq!(next.agent.pose, Pose::new(5, 4, Rotation::North, h(30)));
}

#[test]
fn move_into_wall_fails_in_place() {
    let scene = open_room();
    let w = world_at(&scene, Pose::new(1, 5, Rotation::West, h(30)));
    let (next, outcome) = step(&scene, &w, Action::MoveAhead).unwrap();
    assert_eq!(outcome, StepOutcome::Failure);
    assert_eq!(next.agent.pose, w.agent.pose);
    assert_eq!(next.agent.failures, 1);
    assert_eq!(next.agent.steps_taken, 1);
}

#[test]
fn look_actions_walk_the_horizon_ladder() {
    let scene = open_room();
    let w = world_at(&scene, Pose::new(5, 5, Rotation::North, h(60)));
    let (next, outcome) = step(&scene, &w, Action::LookUp).unwrap();
    assert!(outcome.is_success());
    assert_eq!(next.agent.pose.h, h(45));

    let (_, outcome) = step(&scene, &w, Action::LookDown).unwrap();
    assert_eq!(outcome, StepOutcome::Failure);

    let top = world_at(&scene, Pose::new(5, 5, Rotation::North, h(-30)));
    let (next, outcome) = step(&scene, &top, Action::LookUp).unwrap();
    assert_eq!(outcome, StepOutcome::Failure);
    assert_eq!(next.agent.pose.h, h(-30));

    // six LookUps take 60 to -30, the seventh fails
    let mut w = w;
    for _ in 0..6 {
        let (n, o) = step(&scene, &w, Action::LookUp).unwrap();
        assert!(o.is_success());
        w = n;
    }
    assert_eq!(w.agent.pose.h, h(-30));
    assert!(!step(&scene, &w, Action::LookUp).unwrap().1.is_success());
}

#[test]
fn budgets_terminate_the_episode() {
    let scene = open_room();
    let mut w = world_at(&scene, Pose::new(1, 5, Rotation::West, h(30)));
    for i in 0..MAX_FAILURES {
        let (n, o) = step(&scene, &w, Action::MoveAhead).unwrap();
        assert_eq!(o, StepOutcome::Failure);
        assert_eq!(n.agent.failures, i + 1);
        w = n;
    }
    assert!(matches!(step(&scene, &w, Action::RotateLeft), Err(WorldError::BudgetExhausted { failures: 10, .. })));

    let mut w = world_at(&scene, Pose::new(5, 5, Rotation::North, h(30)));
    w.agent.steps_taken = MAX_STEPS - 1;
    let (w, _) = step(&scene, &w, Action::RotateLeft).unwrap();
    assert_eq!(w.agent.steps_taken, MAX_STEPS);
    assert!(matches!(step(&scene, &w, Action::RotateLeft), Err(WorldError::BudgetExhausted { steps: 1000, .. })));
}

#[test]
fn fridge_waypoints_face_north_at_clearance_depth() {
    let scene = fridge_niche();
    let w = gt_waypoints(&scene, ObjectRef::Large(0));
    let expected: BTreeSet<Pose> = (4..=7)
        .flat_map(|x| [4, 5].map(move |y| (x, y)))
        .flat_map(|(x, y)| [30, 15].map(move |hh| Pose::new(x, y, Rotation::North, h(hh))))
        .collect();
    assert_eq!(w, expected);
    for p in &w {
        assert_eq!(p.r, Rotation::North);
        assert!(p.y - 1 == 3 || p.y - 1 == 4);
    }
}

#[test]
fn countertop_waypoints_are_one_or_two_cells_away() {
    let size = 10;
    let mut nav = grid_from_rect(size, 1, 8, 1, 8);
    let counter: Vec<Cell> = (2..=4).map(|x| Cell::new(x, 1)).collect();
    for c in &counter {
        nav[c.index(size)] = false;
    }
    let obj = LargeObject { class: LargeClass::Countertop, footprint: counter.clone(), articulated: false, height: HeightClass::Mid };
    let scene = Scene::new(size, nav, vec![obj], vec![], Pose::new(5, 5, Rotation::North, h(30))).unwrap();
    let w = gt_waypoints(&scene, ObjectRef::Large(0));
    assert!(!w.is_empty());
    for p in &w {
        let depth_ok = counter.iter().any(|&c| {
            let (d, l) = cell_to_ego(p.cell(), p.r, c);
            (1..=2).contains(&d) && l.abs() <= 1
        });
        assert!(depth_ok, "{p}");
    }
    // standing beside the counter on the wall row and facing it counts
    assert!(w.contains(&Pose::new(1, 1, Rotation::East, h(30))));
    assert!(w.contains(&Pose::new(3, 3, Rotation::North, h(15))));
    assert!(!w.contains(&Pose::new(3, 4, Rotation::North, h(15))));
}

#[test]
fn open_fridge_from_waypoint_but_not_from_too_close() {
    let scene = fridge_niche();
    let w = world_at(&scene, Pose::new(5, 4, Rotation::North, h(30)));
    let (next, outcome) = step(&scene, &w, open_fridge()).unwrap();
    assert_eq!(outcome, StepOutcome::Success);
    assert!(next.objects.large[0].open && next.objects.large[0].ever_opened);

    // one cell away, inside the three-cell clearance
    let close = world_at(&scene, Pose::new(5, 2, Rotation::North, h(30)));
    let (next, outcome) = step(&scene, &close, open_fridge()).unwrap();
    assert_eq!(outcome, StepOutcome::Failure);
    assert_eq!(next.agent.failures, 1);

    // right spot, camera pointing up away from a mid-height object
    let tilted = world_at(&scene, Pose::new(5, 4, Rotation::North, h(-15)));
    assert_eq!(step(&scene, &tilted, open_fridge()).unwrap().1, StepOutcome::Failure);
}

#[test]
fn floor_object_needs_a_downward_camera() {
    let size = 10;
    let mut nav = grid_from_rect(size, 1, 8, 1, 8);
    nav[Cell::new(4, 1).index(size)] = false;
    let ottoman = LargeObject { class: LargeClass::Ottoman, footprint: vec![Cell::new(4, 1)], articulated: false, height: HeightClass::Floor };
    let ball = SmallObject { class: SmallClass::Apple, cell: Cell::new(4, 1), container: Some(0), height: HeightClass::Floor };
    let scene = Scene::new(size, nav, vec![ottoman], vec![ball], Pose::new(4, 3, Rotation::North, h(30))).unwrap();
    let pick = Action::Interact(Interaction { kind: InteractionKind::PickUp, target: SmallClass::Apple.into() });
    for (deg, ok) in [(60, true), (45, true), (30, false), (-15, false)] {
        let w = world_at(&scene, Pose::new(4, 3, Rotation::North, h(deg)));
        assert_eq!(step(&scene, &w, pick).unwrap().1.is_success(), ok, "h={deg}");
    }
}

#[test]
fn pick_from_fridge_requires_it_open_and_put_requires_holding() {
    let scene = fridge_niche();
    let pose = Pose::new(6, 4, Rotation::North, h(30));
    let pick = Action::Interact(Interaction { kind: InteractionKind::PickUp, target: SmallClass::Apple.into() });
    let put = Action::Interact(Interaction { kind: InteractionKind::Put, target: LargeClass::Fridge.into() });
    let w = world_at(&scene, pose);
    assert!(!step(&scene, &w, pick).unwrap().1.is_success());
    assert!(!step(&scene, &w, put).unwrap().1.is_success());

    let (w, _) = step(&scene, &w, open_fridge()).unwrap();
    let (w, o) = step(&scene, &w, pick).unwrap();
    assert!(o.is_success());
    assert_eq!(w.agent.held, Some(SmallClass::Apple));
    assert!(!step(&scene, &w, pick).unwrap().1.is_success(), "hand is full");
    let (w, o) = step(&scene, &w, put).unwrap();
    assert!(o.is_success());
    assert_eq!(w.agent.held, None);
    let close = Action::Interact(Interaction { kind: InteractionKind::Close, target: LargeClass::Fridge.into() });
    let (w, o) = step(&scene, &w, close).unwrap();
    assert!(o.is_success());
    assert!(!w.objects.large[0].open);
    assert!(!w.objects.small_visible(&scene, 0));
}

#[test]
fn gt_waypoints_are_sound_and_complete_for_open() {
    let scene = fridge_niche();
    let gt = gt_waypoints(&scene, ObjectRef::Large(0));
    for x in 0..15 {
        for y in 0..15 {
            for r in Rotation::ALL {
                for hh in Horizon::LADDER {
                    let pose = Pose::new(x, y, r, hh);
                    if !scene.is_navigable(pose.cell()) {
                        continue;
                    }
                    let w = world_at(&scene, pose);
                    let ok = step(&scene, &w, open_fridge()).unwrap().1.is_success();
                    assert_eq!(ok, gt.contains(&pose), "{pose}");
                }
            }
        }
    }
}

#[test]
fn scene_validation_rejects_broken_layouts() {
    let size = 8;
    let nav = grid_from_rect(size, 1, 6, 1, 6);
    let start = Pose::new(3, 3, Rotation::North, h(30));
    let on_floor = LargeObject { class: LargeClass::Sofa, footprint: vec![Cell::new(2, 2)], articulated: false, height: HeightClass::Floor };
    assert!(matches!(
        Scene::new(size, nav.clone(), vec![on_floor], vec![], start),
        Err(SceneError::FootprintNavigable { .. })
    ));

    let mut split = nav.clone();
    for y in 0..size as i32 {
        split[Cell::new(4, y).index(size)] = false;
    }
    assert!(matches!(Scene::new(size, split, vec![], vec![], start), Err(SceneError::Disconnected(_))));

    let stray = SmallObject { class: SmallClass::Mug, cell: Cell::new(0, 0), container: Some(3), height: HeightClass::Mid };
    assert!(matches!(
        Scene::new(size, nav.clone(), vec![], vec![stray], start),
        Err(SceneError::MissingContainer { .. })
    ));
    assert!(matches!(
        Scene::new(size, nav, vec![], vec![], Pose::new(0, 0, Rotation::North, h(30))),
        Err(SceneError::StartNotNavigable(_))
    ));
}

#[test]
fn scene_json_round_trips() {
    let scene = fridge_niche();
    let text = scene.to_json();
    assert!(text.contains("\"format\":1"));
    assert_eq!(Scene::from_json(&text).unwrap(), scene);
    let bad = text.replace("\"format\":1", "\"format\":2");
    assert!(matches!(Scene::from_json(&bad), Err(SceneFileError::Format(2))));
}

#[test]
fn action_strings_round_trip() {
    for a in [Action::MoveAhead, Action::LookDown, open_fridge()] {
        assert_eq!(a.to_string().parse::<Action>().unwrap(), a);
    }
    assert!("Open:safe".parse::<Action>().is_err());
}

fn arb_action() -> impl Strategy<Value = Action> {
    prop_oneof![
        Just(Action::MoveAhead),
        Just(Action::RotateLeft),
        Just(Action::RotateRight),
        Just(Action::LookUp),
        Just(Action::LookDown),
    ]
}

proptest! {
    #[test]
    fn step_is_deterministic(x in 1..11i32, y in 1..11i32, q in 0..4i32, a in arb_action()) {
        let scene = open_room();
        let w = world_at(&scene, Pose::new(x, y, Rotation::from_quarter_turns(q), h(30)));
        prop_assert_eq!(step(&scene, &w, a).unwrap(), step(&scene, &w, a).unwrap());
    }

    #[test]
    fn move_turn_move_turn_restores_pose(x in 1..11i32, y in 1..11i32, q in 0..4i32, left in any::<bool>()) {
        let scene = open_room();
        let start = Pose::new(x, y, Rotation::from_quarter_turns(q), h(30));
        let (dx, dy) = start.r.forward();
        prop_assume!(scene.is_navigable(start.cell().offset(dx, dy)));
        let turn = if left { Action::RotateLeft } else { Action::RotateRight };
        let mut w = world_at(&scene, start);
        for a in [Action::MoveAhead, turn, turn, Action::MoveAhead, turn, turn] {
            let (n, o) = step(&scene, &w, a).unwrap();
            prop_assert!(o.is_success());
            w = n;
        }
        prop_assert_eq!(w.agent.pose, start);
    }

    #[test]
    fn failures_never_decrease(actions in proptest::collection::vec(arb_action(), 1..80)) {
        let scene = open_room();
        let mut w = WorldState::initial(&scene);
        for a in actions {
            match step(&scene, &w, a) {
                Ok((n, _)) => {
                    prop_assert!(n.agent.failures >= w.agent.failures);
                    prop_assert!(scene.is_navigable(n.agent.pose.cell()));
                    prop_assert!(n.agent.failures <= MAX_FAILURES);
                    w = n;
                }
                Err(WorldError::BudgetExhausted { failures, .. }) => {
                    prop_assert_eq!(failures, MAX_FAILURES);
                    break;
                }
                Err(e) => prop_assert!(false, "{e}"),
            }
        }
    }
}
