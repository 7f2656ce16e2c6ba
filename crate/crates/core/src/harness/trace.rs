//! JSON-lines episode traces and map replay.

use serde::{Deserialize, Serialize};

use super::batch::EpisodeSetup;
use super::RunConfig;
use crate::classes::LargeClass;
use crate::exploration::Mapper;
use crate::geometry::{Cell, Pose};
use crate::mapping::{ExploredAreaMap, SemanticMap};
use crate::perception::NAV_CHANNEL;
use crate::tasks::{ExecConfig, OracleMode, Task};
use crate::world::{Phase, Scene, SceneFile, SceneFileError, Simulator, StepRecord, WorldError};

pub const TRACE_FORMAT: u32 = 1;

/// First line of every trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub format: u32,
    pub episode: usize,
    pub seed: u64,
    pub policy: String,
    pub ablation: String,
    pub config: ExecConfig,
    pub scene: SceneFile,
    pub task: Task,
}

/// Serialises one episode: a header line, then one line per executed step.
pub fn trace_lines(setup: &EpisodeSetup, config: &RunConfig, records: &[StepRecord]) -> String {
    let header = TraceHeader {
        format: TRACE_FORMAT,
        episode: setup.index,
        seed: setup.seed,
        policy: config.policy.to_string(),
        ablation: config.ablation_label(),
        config: config.exec_config(),
        scene: SceneFile::from(&setup.scene),
        task: setup.task.clone(),
    };
    let mut out = serde_json::to_string(&header).expect("header serialises");
    out.push('\n');
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serialises"));
        out.push('\n');
    }
    out
}

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("empty trace")]
    Empty,
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("unsupported trace format {0}")]
    Format(u32),
    #[error(transparent)]
    Scene(#[from] SceneFileError),
    #[error("step {t}: {source}")]
    World { t: u32, source: WorldError },
    #[error("step {t}: replayed pose {replayed:?} differs from recorded {recorded:?}")]
    Diverged { t: u32, recorded: Pose, replayed: Pose },
}

pub fn parse_trace(text: &str) -> Result<(TraceHeader, Vec<StepRecord>), ReplayError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or(ReplayError::Empty)?;
    let header: TraceHeader = serde_json::from_str(first).map_err(|source| ReplayError::Json { line: 1, source })?;
    if header.format != TRACE_FORMAT {
        return Err(ReplayError::Format(header.format));
    }
    let records = lines
        .map(|(i, l)| serde_json::from_str(l).map_err(|source| ReplayError::Json { line: i + 1, source }))
        .collect::<Result<_, _>>()?;
    Ok((header, records))
}

/// State after one replayed step. `map` and `explored` stop changing once
/// exploration ends.
pub struct ReplayFrame<'a> {
    pub record: &'a StepRecord,
    pub map: &'a SemanticMap<f32>,
    pub explored: &'a ExploredAreaMap,
    /// Agent pose in the map frame.
    pub map_pose: Pose,
}

/// Re-simulates a trace, rebuilding the semantic map step by step and
/// checking every pose against the record.
pub fn replay(
    header: &TraceHeader,
    records: &[StepRecord],
    mut on_frame: impl FnMut(&ReplayFrame<'_>),
) -> Result<(), ReplayError> {
    let scene = Scene::try_from(header.scene.clone())?;
    let mut sim = Simulator::new(&scene);
    let mut mapper = Mapper::<f32>::new(sim.pose(), header.config.noise, header.seed);
    mapper.observe(&sim);
    // Oracle runs teleport between subgoals, which traces do not record.
    let simulate_execution = header.config.oracle == OracleMode::None;
    for record in records {
        let replayed = match record.phase {
            Phase::Explore => {
                sim.act(record.action, record.injected).map_err(|source| ReplayError::World { t: record.t, source })?;
                mapper.observe(&sim);
                Some(sim.pose())
            }
            Phase::Execute if simulate_execution => {
                sim.act(record.action, record.injected).map_err(|source| ReplayError::World { t: record.t, source })?;
                Some(sim.pose())
            }
            Phase::Execute => None,
        };
        if let Some(p) = replayed {
            if p != record.pose {
                return Err(ReplayError::Diverged { t: record.t, recorded: record.pose, replayed: p });
            }
        }
        on_frame(&ReplayFrame {
            record,
            map: &mapper.out.map,
            explored: &mapper.out.explored,
            map_pose: mapper.anchor.to_map(record.pose),
        });
    }
    Ok(())
}

fn class_glyph(class: LargeClass) -> char {
    (b'A' + class.index() as u8) as char
}

/// Text picture of a map: `@` agent, `A`..`T` the most confident large
/// class, `.` navigable, `,` explored but unknown, space otherwise.
pub fn render_map_text(map: &SemanticMap<f32>, explored: &ExploredAreaMap, agent: Pose) -> String {
    let n = map.size();
    let mut out = String::with_capacity(n * (n + 1));
    for y in 0..n as i32 {
        for x in 0..n as i32 {
            let c = Cell::new(x, y);
            let best = LargeClass::ALL
                .iter()
                .map(|&k| (k, map.get(k.index(), c)))
                .filter(|&(_, v)| v >= 0.5)
                .fold(None, |acc: Option<(LargeClass, f32)>, (k, v)| match acc {
                    Some((_, bv)) if bv >= v => acc,
                    _ => Some((k, v)),
                });
            out.push(if c == agent.cell() {
                '@'
            } else if let Some((k, _)) = best {
                class_glyph(k)
            } else if map.get(NAV_CHANNEL, c) >= 0.5 {
                '.'
            } else if explored.is_explored(c) {
                ','
            } else {
                ' '
            });
        }
        out.push('\n');
    }
    out
}

