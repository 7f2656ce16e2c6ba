//! Tasks, subgoals, goal conditions and the two-phase episode executor.

mod executor;
mod parser;

use serde::{Deserialize, Serialize};

pub use executor::{execute_task, EpisodeRun, ExecConfig, OracleMode, Perturbation};
pub use parser::{
    lookup_noun, parse_interaction, parse_subgoal_kind, parse_targets, render_interaction, render_navigation,
    ParseError, ParsedInteraction, NAV_TEMPLATES,
};

use crate::classes::{LargeClass, ObjectClass, SmallClass};
use crate::world::{InteractionKind, ObjectRef, ObjectStates, Placement, Scene};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubgoalKind {
    Navigation,
    Interaction,
}

/// One instruction of a task with its ground-truth annotation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subgoal {
    pub instruction: String,
    pub kind: SubgoalKind,
    /// Navigation: the refined target. Interaction: what the action acts on.
    pub target: ObjectClass,
    /// Navigation: the receptacle named when the target is a small object.
    /// Pick-up: the receptacle it is taken from.
    #[serde(default)]
    pub container: Option<LargeClass>,
    #[serde(default)]
    pub interaction: Option<InteractionKind>,
    /// Object instance a navigation subgoal should end up next to.
    #[serde(default)]
    pub instance: Option<ObjectRef>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskFamily {
    PickPlace,
    PickPlaceArticulated,
    PickTwo,
}

/// Predicate over final object state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GoalCondition {
    PickedUp { class: SmallClass, count: usize },
    InReceptacle { class: SmallClass, container: LargeClass, count: usize },
    Opened { class: LargeClass },
    /// Opened at some point and shut again.
    Closed { class: LargeClass },
    Sliced { class: SmallClass },
    Toggled { class: ObjectClass, on: bool },
}

impl GoalCondition {
    pub fn holds(&self, scene: &Scene, objects: &ObjectStates) -> bool {
        let small = |c: SmallClass| scene.small_objects().iter().enumerate().filter(move |(_, o)| o.class == c).map(|(i, _)| i);
        let large = |c: LargeClass| scene.large_objects().iter().enumerate().filter(move |(_, o)| o.class == c).map(|(i, _)| i);
        match *self {
            GoalCondition::PickedUp { class, count } => small(class).filter(|&i| objects.small[i].ever_picked).count() >= count,
            GoalCondition::InReceptacle { class, container, count } => {
                small(class)
                    .filter(|&i| match objects.small[i].placement {
                        Placement::At { container: Some(j), .. } => scene.large_objects()[j].class == container,
                        _ => false,
                    })
                    .count()
                    >= count
            }
            GoalCondition::Opened { class } => large(class).any(|j| objects.large[j].ever_opened),
            GoalCondition::Closed { class } => {
                let mut opened = large(class).filter(|&j| objects.large[j].ever_opened).peekable();
                opened.peek().is_some() && opened.all(|j| !objects.large[j].open)
            }
            GoalCondition::Sliced { class } => small(class).any(|i| objects.small[i].sliced),
            GoalCondition::Toggled { class, on } => match class {
                ObjectClass::Large(c) => large(c).any(|j| objects.large[j].toggled == on),
                ObjectClass::Small(c) => small(c).any(|i| objects.small[i].toggled == on),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub goal: String,
    pub family: TaskFamily,
    pub subgoals: Vec<Subgoal>,
    pub goal_conditions: Vec<GoalCondition>,
}

impl Task {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("task serialises")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    /// Fraction of goal conditions satisfied.
    pub fn goal_condition_fraction(&self, scene: &Scene, objects: &ObjectStates) -> f64 {
        if self.goal_conditions.is_empty() {
            return 0.0;
        }
        let met = self.goal_conditions.iter().filter(|g| g.holds(scene, objects)).count();
        met as f64 / self.goal_conditions.len() as f64
    }

    pub fn navigation_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.subgoals.iter().enumerate().filter(|(_, s)| s.kind == SubgoalKind::Navigation).map(|(i, _)| i)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    Parse,
    NoWaypoint,
    Unreachable,
    Blocked,
    Interaction,
    Budget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgoalOutcome {
    pub index: usize,
    pub success: bool,
    pub failure: Option<FailureReason>,
    /// Horizon settled on after a navigation subgoal.
    pub horizon: Option<i32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub success: bool,
    pub goal_cond: f64,
    pub steps: u32,
    pub failures: u32,
    pub exploration_steps: u32,
    pub exploration_failures: u32,
    pub raw_exploration_steps: usize,
    pub coverage: usize,
    pub coverage_efficiency: f64,
    pub subgoals: Vec<SubgoalOutcome>,
    pub failure: Option<FailureReason>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub success_rate: f64,
    pub goal_condition: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("cannot score an empty result list")]
pub struct EmptyInput;

pub fn score(results: &[EpisodeResult]) -> Result<Score, EmptyInput> {
    if results.is_empty() {
        return Err(EmptyInput);
    }
    let n = results.len() as f64;
    Ok(Score {
        success_rate: results.iter().filter(|r| r.success).count() as f64 / n,
        goal_condition: results.iter().map(|r| r.goal_cond).sum::<f64>() / n,
    })
}
