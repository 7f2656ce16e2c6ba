//! Seeded scene and task generation.

use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::classes::{LargeClass, ObjectClass, SmallClass};
use crate::geometry::{ego_to_cell, Cell, Horizon, Pose, Rotation};
use crate::tasks::{render_interaction, render_navigation, GoalCondition, Subgoal, SubgoalKind, Task, TaskFamily, NAV_TEMPLATES};
use crate::world::{gt_waypoints, in_reach, InteractionKind, LargeObject, ObjectRef, Scene, SmallObject, GRID_SIZE};

pub const MAX_ATTEMPTS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("no valid scene after {attempts} attempts")]
pub struct GenerationFailed {
    pub attempts: usize,
}

/// Size ranges for generated scenes, all inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneSpec {
    pub room: (usize, usize),
    pub obstacles: (usize, usize),
    pub large: (usize, usize),
    pub small: (usize, usize),
    /// Chance of adding a same-class pair of small objects.
    pub duplicate_pair_percent: u32,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec { room: (11, 16), obstacles: (2, 5), large: (4, 8), small: (3, 6), duplicate_pair_percent: 40 }
    }
}

pub fn generate_scene<R: Rng + ?Sized>(rng: &mut R) -> Result<Scene, GenerationFailed> {
    generate_scene_with(&SceneSpec::default(), rng)
}

pub fn generate_scene_with<R: Rng + ?Sized>(spec: &SceneSpec, rng: &mut R) -> Result<Scene, GenerationFailed> {
    (0..MAX_ATTEMPTS).find_map(|_| attempt(spec, rng)).ok_or(GenerationFailed { attempts: MAX_ATTEMPTS })
}

struct Layout {
    room: (i32, i32, i32, i32),
    blocked: BTreeSet<Cell>,
    /// Cells kept clear in front of placed objects.
    reserved: BTreeSet<Cell>,
}

impl Layout {
    fn inside(&self, c: Cell) -> bool {
        let (x0, y0, x1, y1) = self.room;
        (x0..=x1).contains(&c.x) && (y0..=y1).contains(&c.y)
    }

    fn free(&self, c: Cell) -> bool {
        self.inside(c) && !self.blocked.contains(&c) && !self.reserved.contains(&c)
    }
}

fn range<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (usize, usize)) -> usize {
    rng.random_range(lo..=hi.max(lo))
}

/// Tries to put a large object against a wall. The object faces `r` into
/// the room; the strip in front of it stays free.
fn place_large<R: Rng + ?Sized>(layout: &mut Layout, class: LargeClass, rng: &mut R) -> Option<Vec<Cell>> {
    let (x0, y0, x1, y1) = layout.room;
    let width = class.footprint_width() as i32;
    for _ in 0..20 {
        let facing = *Rotation::ALL.choose(rng).expect("four rotations");
        // Wall cell at the start of the footprint, running to the agent's right
        // as seen from inside the room.
        let (along, wall) = match facing {
            Rotation::South => ((x0, x1), Cell::new(0, y0)),
            Rotation::North => ((x0, x1), Cell::new(0, y1)),
            Rotation::East => ((y0, y1), Cell::new(x0, 0)),
            Rotation::West => ((y0, y1), Cell::new(x1, 0)),
        };
        if along.1 - along.0 + 1 < width + 2 {
            continue;
        }
        let s = rng.random_range(along.0 + 1..=along.1 - width);
        let footprint: Vec<Cell> = (0..width)
            .map(|k| match facing {
                Rotation::South | Rotation::North => Cell::new(s + k, wall.y),
                Rotation::East | Rotation::West => Cell::new(wall.x, s + k),
            })
            .collect();
        let depth = class.backup_distance() + 2;
        let mut clearance = Vec::new();
        for &f in &footprint {
            for d in 1..=depth {
                for l in -1..=1 {
                    clearance.push(ego_to_cell(f, facing, d, l));
                }
            }
        }
        let halo = footprint.iter().flat_map(|c| c.neighbors4());
        if footprint.iter().all(|&c| layout.free(c))
            && halo.clone().all(|c| !layout.blocked.contains(&c))
            && clearance.iter().all(|&c| layout.inside(c) && !layout.blocked.contains(&c))
        {
            layout.blocked.extend(footprint.iter().copied());
            layout.reserved.extend(clearance);
            return Some(footprint);
        }
    }
    None
}

fn attempt<R: Rng + ?Sized>(spec: &SceneSpec, rng: &mut R) -> Option<Scene> {
    let g = GRID_SIZE as i32;
    let w = range(rng, spec.room) as i32;
    let h = range(rng, spec.room) as i32;
    if w + 2 > g || h + 2 > g {
        return None;
    }
    let x0 = rng.random_range(1..=g - 1 - w);
    let y0 = rng.random_range(1..=g - 1 - h);
    let mut layout =
        Layout { room: (x0, y0, x0 + w - 1, y0 + h - 1), blocked: BTreeSet::new(), reserved: BTreeSet::new() };

    let n_large = range(rng, spec.large);
    if n_large == 0 {
        return None;
    }
    let mut classes = LargeClass::ALL.to_vec();
    classes.shuffle(rng);
    let mut large = Vec::new();
    for &class in classes.iter().take(n_large) {
        let footprint = place_large(&mut layout, class, rng)?;
        large.push(LargeObject { class, footprint, articulated: class.is_articulated(), height: class.default_height() });
    }

    for _ in 0..range(rng, spec.obstacles) {
        let (bw, bh) = (rng.random_range(1..=2), rng.random_range(1..=2));
        let cx = rng.random_range(x0 + 2..=x0 + w - 2 - bw);
        let cy = rng.random_range(y0 + 2..=y0 + h - 2 - bh);
        let block: Vec<Cell> = (0..bw).flat_map(|dx| (0..bh).map(move |dy| Cell::new(cx + dx, cy + dy))).collect();
        if block.iter().all(|&c| layout.free(c)) {
            layout.blocked.extend(block);
        }
    }

    // Small objects, each on a container; one large object stays empty so
    // every task has somewhere to put things.
    let n_small = range(rng, spec.small);
    let empty = rng.random_range(0..large.len());
    let hosts: Vec<usize> = (0..large.len()).filter(|&j| j != empty).collect();
    if hosts.is_empty() {
        return None;
    }
    let mut small_classes = SmallClass::ALL.to_vec();
    small_classes.shuffle(rng);
    let mut small = Vec::new();
    let pair = rng.random_range(0..100) < spec.duplicate_pair_percent && n_small >= 2;
    let singles = if pair { n_small - 2 } else { n_small };
    let mut classes_iter = small_classes.into_iter();
    for _ in 0..singles {
        let j = *hosts.choose(rng)?;
        let cell = *large[j].footprint.choose(rng)?;
        small.push(SmallObject { class: classes_iter.next()?, cell, container: Some(j), height: large[j].height });
    }
    if pair {
        let open_hosts: Vec<usize> = hosts.iter().copied().filter(|&j| !large[j].articulated).collect();
        if let Some(&j) = open_hosts.choose(rng) {
            let class = classes_iter.next()?;
            let cell = *large[j].footprint.choose(rng)?;
            for _ in 0..2 {
                small.push(SmallObject { class, cell, container: Some(j), height: large[j].height });
            }
        }
    }

    if small.len() < spec.small.0 {
        return None;
    }
    let size = GRID_SIZE;
    let navigable: Vec<bool> = (0..size * size)
        .map(|i| {
            let c = Cell::from_index(i, size);
            layout.inside(c) && !layout.blocked.contains(&c)
        })
        .collect();
    let starts: Vec<Cell> = (0..size * size).filter(|&i| navigable[i]).map(|i| Cell::from_index(i, size)).collect();
    let start = *starts.choose(rng)?;
    let r = *Rotation::ALL.choose(rng)?;
    let scene = Scene::new(size, navigable, large, small, Pose::new(start.x, start.y, r, Horizon::INITIAL)).ok()?;
    let refs = (0..scene.large_objects().len())
        .map(ObjectRef::Large)
        .chain((0..scene.small_objects().len()).map(ObjectRef::Small));
    refs.clone().all(|o| !gt_waypoints(&scene, o).is_empty()).then_some(scene)
}

fn nav_subgoal<R: Rng + ?Sized>(
    rng: &mut R,
    noun: LargeClass,
    target: ObjectClass,
    container: Option<LargeClass>,
    instance: ObjectRef,
) -> Subgoal {
    Subgoal {
        instruction: render_navigation(rng.random_range(0..NAV_TEMPLATES.len()), noun),
        kind: SubgoalKind::Navigation,
        target,
        container,
        interaction: None,
        instance: Some(instance),
    }
}

fn act_subgoal(kind: InteractionKind, target: ObjectClass, item: Option<SmallClass>, container: Option<LargeClass>) -> Subgoal {
    Subgoal {
        instruction: render_interaction(kind, target, None, item),
        kind: SubgoalKind::Interaction,
        target,
        container,
        interaction: Some(kind),
        instance: None,
    }
}

/// Whether a pose that reaches any instance of `source` also reaches `dest`.
fn shares_waypoints(scene: &Scene, source: usize, dest: usize) -> bool {
    let d = &scene.large_objects()[dest];
    gt_waypoints(scene, ObjectRef::Small(source)).iter().any(|p| {
        in_reach(p.cell(), p.r, &d.footprint, d.class.backup_distance())
    })
}

/// Samples a task whose objects all exist in `scene`.
pub fn generate_task<R: Rng + ?Sized>(scene: &Scene, rng: &mut R) -> Task {
    let large = scene.large_objects();
    let small = scene.small_objects();
    let hosted: BTreeSet<usize> = small.iter().filter_map(|o| o.container).collect();
    let dests = |articulated: bool| -> Vec<usize> {
        (0..large.len()).filter(|j| !hosted.contains(j) && large[*j].articulated == articulated).collect()
    };
    let pair: Option<(usize, usize)> = (0..small.len())
        .find_map(|i| (i + 1..small.len()).find(|&k| small[k].class == small[i].class).map(|k| (i, k)));
    let pick_two_dests: Vec<usize> = match pair {
        Some((i, _)) => dests(false).into_iter().filter(|&j| !shares_waypoints(scene, i, j)).collect(),
        None => vec![],
    };

    let mut families = vec![];
    if !dests(false).is_empty() {
        families.push(TaskFamily::PickPlace);
    }
    if !dests(true).is_empty() {
        families.push(TaskFamily::PickPlaceArticulated);
    }
    if !pick_two_dests.is_empty() {
        families.push(TaskFamily::PickTwo);
    }
    let family = *families.choose(rng).expect("generated scenes always have an empty receptacle");

    let (source, dest) = match family {
        TaskFamily::PickTwo => (pair.expect("pair present").0, *pick_two_dests.choose(rng).expect("non-empty")),
        _ => {
            let i = rng.random_range(0..small.len());
            let d = dests(family == TaskFamily::PickPlaceArticulated);
            (i, *d.choose(rng).expect("non-empty"))
        }
    };
    let item = small[source].class;
    let from = large[small[source].container.expect("generated objects sit on containers")].class;
    let to = large[dest].class;
    let prep = if to.is_articulated() { "in" } else { "on" };

    let fetch = |rng: &mut R, instance: usize| {
        [
            nav_subgoal(rng, from, item.into(), Some(from), ObjectRef::Small(instance)),
            act_subgoal(InteractionKind::PickUp, item.into(), None, Some(from)),
        ]
    };
    let go_dest = |rng: &mut R| nav_subgoal(rng, to, to.into(), None, ObjectRef::Large(dest));
    let put = act_subgoal(InteractionKind::Put, to.into(), Some(item), None);
    let mut subgoals: Vec<Subgoal> = fetch(rng, source).into();
    subgoals.push(go_dest(rng));
    let goal = match family {
        TaskFamily::PickPlace => {
            subgoals.push(put);
            format!("put a {} {prep} the {}", item.display_name(), to.display_name())
        }
        TaskFamily::PickPlaceArticulated => {
            subgoals.push(act_subgoal(InteractionKind::Open, to.into(), None, None));
            subgoals.push(put);
            subgoals.push(act_subgoal(InteractionKind::Close, to.into(), None, None));
            format!("move a {} to the inside of the {}", item.display_name(), to.display_name())
        }
        TaskFamily::PickTwo => {
            let second = pair.expect("pair present").1;
            subgoals.push(put.clone());
            subgoals.extend(fetch(rng, second));
            subgoals.push(go_dest(rng));
            subgoals.push(put);
            format!("place two {}s {prep} the {}", item.display_name(), to.display_name())
        }
    };
    let goal_conditions = goal_conditions_for(&subgoals);
    Task { goal, family, subgoals, goal_conditions }
}

/// One condition per interaction subgoal; repeated handling of a class
/// raises the required count.
fn goal_conditions_for(subgoals: &[Subgoal]) -> Vec<GoalCondition> {
    let mut picked = 0;
    let mut placed = 0;
    let mut held = None;
    subgoals
        .iter()
        .filter_map(|s| {
            let kind = s.interaction?;
            Some(match (kind, s.target) {
                (InteractionKind::PickUp, ObjectClass::Small(c)) => {
                    picked += 1;
                    held = Some(c);
                    GoalCondition::PickedUp { class: c, count: picked }
                }
                (InteractionKind::Put, ObjectClass::Large(container)) => {
                    placed += 1;
                    GoalCondition::InReceptacle { class: held?, container, count: placed }
                }
                (InteractionKind::Open, ObjectClass::Large(class)) => GoalCondition::Opened { class },
                (InteractionKind::Close, ObjectClass::Large(class)) => GoalCondition::Closed { class },
                (InteractionKind::Slice, ObjectClass::Small(class)) => GoalCondition::Sliced { class },
                (InteractionKind::ToggleOn, class) => GoalCondition::Toggled { class, on: true },
                (InteractionKind::ToggleOff, class) => GoalCondition::Toggled { class, on: false },
                _ => return None,
            })
        })
        .collect()
}
