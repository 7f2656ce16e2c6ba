//! Batch running, configuration and ablation suites.

mod batch;
mod generate;
mod trace;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use batch::{
    episode_seed, episode_setup, read_csv, run_batch, run_suite, write_csv, BatchOutput, EpisodeSetup, HarnessError,
    MetricsRow, CSV_HEADER, METRICS_VERSION,
};
pub use generate::{generate_scene, generate_scene_with, generate_task, GenerationFailed, SceneSpec, MAX_ATTEMPTS};
pub use trace::{
    parse_trace, render_map_text, replay, trace_lines, ReplayError, ReplayFrame, TraceHeader, TRACE_FORMAT,
};

use crate::exploration::{PolicyConfig, PolicyKind};
use crate::perception::NoiseModel;
use crate::tasks::{ExecConfig, OracleMode, Perturbation};
use crate::waypoints::{WaypointOptions, WaypointStrategy};

/// Pipeline components that can be switched off.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Ablations {
    pub no_backup: bool,
    pub waypoint_strategy: WaypointStrategy,
    pub no_horizon_search: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub base_seed: u64,
    pub episodes: usize,
    pub policy: PolicyKind,
    pub noise: NoiseModel,
    pub oracle: OracleMode,
    pub perturbation: Perturbation,
    pub ablations: Ablations,
    /// Directory for traces and metrics; nothing is written when unset.
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            base_seed: 0,
            episodes: 50,
            policy: PolicyKind::default(),
            noise: NoiseModel::default(),
            oracle: OracleMode::None,
            perturbation: Perturbation::None,
            ablations: Ablations::default(),
            out: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("episodes must be positive")]
    NoEpisodes,
    #[error("invalid noise model: {0}")]
    Noise(String),
    #[error("perturbations need an oracle mode")]
    PerturbationWithoutOracle,
    #[error("unknown ablation `{0}`")]
    UnknownAblation(String),
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.episodes == 0 {
            return Err(ConfigError::NoEpisodes);
        }
        self.noise.validate().map_err(|e| ConfigError::Noise(e.to_string()))?;
        if self.perturbation != Perturbation::None && self.oracle == OracleMode::None {
            return Err(ConfigError::PerturbationWithoutOracle);
        }
        Ok(())
    }

    pub fn exec_config(&self) -> ExecConfig {
        ExecConfig {
            policy: PolicyConfig::of(self.policy),
            noise: self.noise,
            oracle: self.oracle,
            perturbation: self.perturbation,
            waypoints: WaypointOptions {
                strategy: self.ablations.waypoint_strategy,
                no_backup: self.ablations.no_backup,
                ..WaypointOptions::default()
            },
            no_horizon_search: self.ablations.no_horizon_search,
        }
    }

    /// Label for the `ablation` metrics column.
    pub fn ablation_label(&self) -> String {
        let mut parts = Vec::new();
        match self.oracle {
            OracleMode::None => {}
            OracleMode::GtNavigation => parts.push("gt_navigation"),
            OracleMode::GtAll => parts.push("gt_all"),
        }
        match self.perturbation {
            Perturbation::None => {}
            Perturbation::Displacement => parts.push("displacement"),
            Perturbation::Horizon => parts.push("horizon"),
        }
        match self.ablations.waypoint_strategy {
            WaypointStrategy::Both => {}
            WaypointStrategy::MapOnly => parts.push("map_only"),
            WaypointStrategy::DetectionOnly => parts.push("detection_only"),
        }
        if self.ablations.no_backup {
            parts.push("no_backup");
        }
        if self.ablations.no_horizon_search {
            parts.push("no_horizon_search");
        }
        if parts.is_empty() {
            "none".into()
        } else {
            parts.join("+")
        }
    }
}

/// Named groups of run variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Ablation {
    /// Ground-truth navigation with and without perturbation.
    Table1,
    /// Exploration policy variants.
    Table3,
    /// Waypoint pipeline variants.
    Table4,
    /// A single switch applied to the base config.
    Single(SingleAblation),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SingleAblation {
    None,
    NoBackup,
    MapOnly,
    DetectionOnly,
    NoHorizonSearch,
}

impl SingleAblation {
    fn apply(self, config: &mut RunConfig) {
        let a = &mut config.ablations;
        match self {
            SingleAblation::None => {}
            SingleAblation::NoBackup => a.no_backup = true,
            SingleAblation::MapOnly => a.waypoint_strategy = WaypointStrategy::MapOnly,
            SingleAblation::DetectionOnly => a.waypoint_strategy = WaypointStrategy::DetectionOnly,
            SingleAblation::NoHorizonSearch => a.no_horizon_search = true,
        }
    }
}

impl FromStr for Ablation {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "table1" | "perturbation" => Ablation::Table1,
            "table3" | "exploration" => Ablation::Table3,
            "table4" | "waypoints" => Ablation::Table4,
            "none" | "full" => Ablation::Single(SingleAblation::None),
            "no_backup" => Ablation::Single(SingleAblation::NoBackup),
            "map_only" => Ablation::Single(SingleAblation::MapOnly),
            "detection_only" => Ablation::Single(SingleAblation::DetectionOnly),
            "no_horizon_search" => Ablation::Single(SingleAblation::NoHorizonSearch),
            _ => return Err(ConfigError::UnknownAblation(s.to_string())),
        })
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ablation::Table1 => "table1",
            Ablation::Table3 => "table3",
            Ablation::Table4 => "table4",
            Ablation::Single(SingleAblation::None) => "none",
            Ablation::Single(SingleAblation::NoBackup) => "no_backup",
            Ablation::Single(SingleAblation::MapOnly) => "map_only",
            Ablation::Single(SingleAblation::DetectionOnly) => "detection_only",
            Ablation::Single(SingleAblation::NoHorizonSearch) => "no_horizon_search",
        })
    }
}

impl Ablation {
    /// The run configs this ablation stands for, derived from `base`.
    pub fn expand(self, base: &RunConfig) -> Vec<RunConfig> {
        let with = |f: &dyn Fn(&mut RunConfig)| {
            let mut c = base.clone();
            f(&mut c);
            c
        };
        match self {
            Ablation::Table1 => [Perturbation::None, Perturbation::Displacement, Perturbation::Horizon]
                .into_iter()
                .map(|p| {
                    with(&|c| {
                        c.oracle = OracleMode::GtNavigation;
                        c.perturbation = p;
                    })
                })
                .collect(),
            Ablation::Table3 => PolicyKind::ALL.into_iter().map(|k| with(&|c| c.policy = k)).collect(),
            Ablation::Table4 => [
                SingleAblation::None,
                SingleAblation::MapOnly,
                SingleAblation::DetectionOnly,
                SingleAblation::NoBackup,
                SingleAblation::NoHorizonSearch,
            ]
            .into_iter()
            .map(|a| with(&|c| a.apply(c)))
            .collect(),
            Ablation::Single(a) => vec![with(&|c| a.apply(c))],
        }
    }
}
