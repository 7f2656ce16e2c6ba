//! Gridworld simulator, semantic mapping and planning for instruction-driven
//! household tasks.
//!
//! Confidence-carrying types are generic over [`scalar::Confidence`]
//! (`f32` or `f64`); the aliases below fix the common choices.

pub mod classes;
pub mod exploration;
pub mod geometry;
pub mod harness;
pub mod mapping;
pub mod perception;
pub mod planner;
pub mod scalar;
pub mod seeding;
pub mod tasks;
pub mod waypoints;
pub mod world;

pub type SemanticMapF32 = mapping::SemanticMap<f32>;
pub type SemanticMapF64 = mapping::SemanticMap<f64>;
pub type PartialMapF32 = perception::PartialMap<f32>;
pub type PartialMapF64 = perception::PartialMap<f64>;
pub type DetectionF32 = perception::Detection<f32>;
pub type DetectionF64 = perception::Detection<f64>;
pub type DetectionLogF32 = waypoints::DetectionLog<f32>;
pub type DetectionLogF64 = waypoints::DetectionLog<f64>;
pub type ExplorationOutputF32 = exploration::ExplorationOutput<f32>;
pub type ExplorationOutputF64 = exploration::ExplorationOutput<f64>;
pub type EpisodeRunF32 = tasks::EpisodeRun<f32>;
pub type EpisodeRunF64 = tasks::EpisodeRun<f64>;
