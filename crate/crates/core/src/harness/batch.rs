use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generate::{generate_scene, generate_task, GenerationFailed};
use super::trace::trace_lines;
use super::{ConfigError, RunConfig};
use crate::seeding::{mix, stream};
use crate::tasks::{execute_task, score, EpisodeResult, Task};
use crate::world::Scene;

/// Bumped whenever the metrics columns change.
pub const METRICS_VERSION: u32 = 1;

pub const CSV_HEADER: [&str; 7] =
    ["policy", "ablation", "success_rate", "goal_condition", "coverage", "coverage_efficiency", "mean_steps"];

const SCENE_STREAM: u64 = 0x5CE7E;
const TASK_STREAM: u64 = 0x7A5C;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("episode {index}: {source}")]
    Generation { index: usize, source: GenerationFailed },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("metrics file does not start with version line `#metrics_version={METRICS_VERSION}`")]
    MetricsVersion,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_path_buf(), source }
}

/// One aggregate metrics line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub policy: String,
    pub ablation: String,
    pub success_rate: f64,
    pub goal_condition: f64,
    /// Mean distinct cells visited during exploration.
    pub coverage: f64,
    /// Mean per-episode coverage over raw exploration steps.
    pub coverage_efficiency: f64,
    pub mean_steps: f64,
}

#[derive(Debug, Clone)]
pub struct EpisodeSetup {
    pub index: usize,
    pub seed: u64,
    pub scene: Scene,
    pub task: Task,
}

pub fn episode_seed(base: u64, index: usize) -> u64 {
    mix(base, index as u64)
}

/// Scene and task of episode `index`; independent of every other episode.
pub fn episode_setup(base: u64, index: usize) -> Result<EpisodeSetup, GenerationFailed> {
    let seed = episode_seed(base, index);
    let scene = generate_scene(&mut stream(seed, SCENE_STREAM))?;
    let task = generate_task(&scene, &mut stream(seed, TASK_STREAM));
    Ok(EpisodeSetup { index, seed, scene, task })
}

#[derive(Debug, Clone)]
pub struct BatchOutput {
    pub row: MetricsRow,
    pub results: Vec<EpisodeResult>,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Runs every episode of `config` in parallel. Writes one trace per
/// episode under `out/traces` when an output directory is set.
pub fn run_batch(config: &RunConfig) -> Result<BatchOutput, HarnessError> {
    config.validate()?;
    let exec = config.exec_config();
    let trace_dir = match &config.out {
        Some(out) => {
            let dir = out.join("traces").join(format!("{}__{}", config.policy, config.ablation_label()));
            fs::create_dir_all(&dir).map_err(io_err(&dir))?;
            Some(dir)
        }
        None => None,
    };
    let results = (0..config.episodes)
        .into_par_iter()
        .map(|index| {
            let setup = episode_setup(config.base_seed, index).map_err(|source| HarnessError::Generation { index, source })?;
            let run = execute_task::<f32>(&setup.scene, &setup.task, &exec, setup.seed);
            if let Some(dir) = &trace_dir {
                let path = dir.join(format!("ep_{index:04}.jsonl"));
                fs::write(&path, trace_lines(&setup, config, &run.records)).map_err(io_err(&path))?;
            }
            Ok(run.result)
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    let s = score(&results).expect("episodes > 0 after validation");
    let row = MetricsRow {
        policy: config.policy.to_string(),
        ablation: config.ablation_label(),
        success_rate: s.success_rate,
        goal_condition: s.goal_condition,
        coverage: mean(results.iter().map(|r| r.coverage as f64)),
        coverage_efficiency: mean(results.iter().map(|r| r.coverage_efficiency)),
        mean_steps: mean(results.iter().map(|r| r.steps as f64)),
    };
    Ok(BatchOutput { row, results })
}

/// Runs each config in turn and writes `metrics.csv` to the first config's
/// output directory, if any.
pub fn run_suite(configs: &[RunConfig]) -> Result<Vec<BatchOutput>, HarnessError> {
    let outputs = configs.iter().map(run_batch).collect::<Result<Vec<_>, _>>()?;
    if let Some(out) = configs.first().and_then(|c| c.out.as_ref()) {
        let path = out.join("metrics.csv");
        let file = fs::File::create(&path).map_err(io_err(&path))?;
        let rows: Vec<_> = outputs.iter().map(|o| o.row.clone()).collect();
        write_csv(&rows, io::BufWriter::new(file))?;
    }
    Ok(outputs)
}

/// Writes rows under the versioned header. Numbers use six decimals so
/// identical inputs give identical bytes.
pub fn write_csv<W: Write>(rows: &[MetricsRow], mut w: W) -> Result<(), HarnessError> {
    writeln!(w, "#metrics_version={METRICS_VERSION}").map_err(io_err(Path::new("<metrics>")))?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(CSV_HEADER)?;
    for r in rows {
        let f = |v: f64| format!("{v:.6}");
        csv.write_record([
            r.policy.clone(),
            r.ablation.clone(),
            f(r.success_rate),
            f(r.goal_condition),
            f(r.coverage),
            f(r.coverage_efficiency),
            f(r.mean_steps),
        ])?;
    }
    csv.flush().map_err(io_err(Path::new("<metrics>")))?;
    Ok(())
}

pub fn read_csv<R: Read>(mut r: R) -> Result<Vec<MetricsRow>, HarnessError> {
    let mut text = String::new();
    r.read_to_string(&mut text).map_err(io_err(Path::new("<metrics>")))?;
    let body = text.strip_prefix(&format!("#metrics_version={METRICS_VERSION}\n")).ok_or(HarnessError::MetricsVersion)?;
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    if rdr.headers()?.iter().ne(CSV_HEADER) {
        return Err(HarnessError::MetricsVersion);
    }
    rdr.deserialize().map(|r| r.map_err(HarnessError::from)).collect()
}
