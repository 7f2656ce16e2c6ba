use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use amslam_core::exploration::PolicyKind;
use amslam_core::harness::{
    episode_setup, parse_trace, render_map_text, replay, run_suite, write_csv, Ablation, RunConfig,
};
use amslam_core::mapping::MapDump;
use amslam_core::perception::NoiseModel;
use amslam_core::tasks::{OracleMode, Perturbation};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "amslam", version, about = "Gridworld household-task agent: batch runs, ablations and trace replay")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the scene and task JSON of each episode.
    GenScenes {
        #[arg(long, env = "AMSLAM_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        episodes: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a batch and print the metrics CSV.
    Run(RunArgs),
    /// Re-simulate a trace and print per-step map snapshots.
    Replay {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, value_enum, default_value_t = ReplayFormat::Text)]
        format: ReplayFormat,
        /// Print every n-th step only (the last step is always printed).
        #[arg(long, default_value_t = 1)]
        every: usize,
    },
    /// Run one or more ablation suites (default: table1, table3 and table4).
    Ablate(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, env = "AMSLAM_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    episodes: usize,
    #[arg(long, default_value = "instruction")]
    policy: String,
    /// Noise as `pfn,pfp,jitter`.
    #[arg(long)]
    noise: Option<String>,
    #[arg(long, value_enum, default_value_t = OracleArg::None)]
    oracle: OracleArg,
    #[arg(long, value_enum, default_value_t = PerturbArg::None)]
    perturb: PerturbArg,
    /// Suite or switch name; repeat or comma-separate for several.
    #[arg(long, value_delimiter = ',')]
    ablation: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleArg {
    None,
    GtNavigation,
    #[value(alias = "gt_interaction")]
    GtAll,
}

#[derive(Clone, Copy, ValueEnum)]
enum PerturbArg {
    None,
    Displacement,
    Horizon,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReplayFormat {
    Text,
    Json,
}

fn parse_noise(s: &str) -> Result<NoiseModel> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().with_context(|| format!("bad noise value `{p}`")))
        .collect::<Result<_>>()?;
    let [pfn, pfp, jitter] = parts[..] else {
        bail!("--noise expects three comma-separated values pfn,pfp,jitter");
    };
    Ok(NoiseModel { p_false_negative: pfn, p_false_positive: pfp, confidence_jitter: jitter, ..NoiseModel::default() })
}

fn base_config(args: &RunArgs) -> Result<RunConfig> {
    let policy: PolicyKind = args.policy.parse()?;
    let noise = match &args.noise {
        Some(s) => parse_noise(s)?,
        None => NoiseModel::default(),
    };
    Ok(RunConfig {
        base_seed: args.seed,
        episodes: args.episodes,
        policy,
        noise,
        oracle: match args.oracle {
            OracleArg::None => OracleMode::None,
            OracleArg::GtNavigation => OracleMode::GtNavigation,
            OracleArg::GtAll => OracleMode::GtAll,
        },
        perturbation: match args.perturb {
            PerturbArg::None => Perturbation::None,
            PerturbArg::Displacement => Perturbation::Displacement,
            PerturbArg::Horizon => Perturbation::Horizon,
        },
        out: args.out.clone(),
        ..RunConfig::default()
    })
}

fn run(args: &RunArgs, default_suites: &[&str]) -> Result<()> {
    let base = base_config(args)?;
    let names: Vec<&str> = if args.ablation.is_empty() {
        default_suites.to_vec()
    } else {
        args.ablation.iter().map(String::as_str).collect()
    };
    let mut configs = Vec::new();
    for name in names {
        let ablation: Ablation = name.parse()?;
        configs.extend(ablation.expand(&base));
    }
    for c in &configs {
        c.validate().with_context(|| format!("config `{}`", c.ablation_label()))?;
    }
    let outputs = run_suite(&configs)?;
    let rows: Vec<_> = outputs.into_iter().map(|o| o.row).collect();
    write_csv(&rows, io::stdout().lock())?;
    Ok(())
}

fn gen_scenes(seed: u64, episodes: usize, out: &PathBuf) -> Result<()> {
    if episodes == 0 {
        bail!("episodes must be positive");
    }
    fs::create_dir_all(out).with_context(|| out.display().to_string())?;
    for i in 0..episodes {
        let setup = episode_setup(seed, i).with_context(|| format!("episode {i}"))?;
        let scene = out.join(format!("scene_{i:04}.json"));
        fs::write(&scene, setup.scene.to_json()).with_context(|| scene.display().to_string())?;
        let task = out.join(format!("task_{i:04}.json"));
        fs::write(&task, setup.task.to_json()).with_context(|| task.display().to_string())?;
    }
    eprintln!("wrote {episodes} scene/task pairs to {}", out.display());
    Ok(())
}

fn replay_trace(path: &PathBuf, format: ReplayFormat, every: usize) -> Result<()> {
    if every == 0 {
        bail!("--every must be positive");
    }
    let text = fs::read_to_string(path).with_context(|| path.display().to_string())?;
    let (header, records) = parse_trace(&text).with_context(|| path.display().to_string())?;
    let last = records.len().saturating_sub(1);
    let mut out = io::BufWriter::new(io::stdout().lock());
    let mut write_err = None;
    let mut i = 0;
    replay(&header, &records, |f| {
        let skip = write_err.is_some() || (i % every != 0 && i != last);
        i += 1;
        if skip {
            return;
        }
        let r = f.record;
        let res = match format {
            ReplayFormat::Text => writeln!(
                out,
                "t={} phase={:?} subgoal={:?} action={:?} injected={} pose={}\n{}",
                r.t,
                r.phase,
                r.subgoal_index,
                r.action,
                r.injected,
                serde_json::to_string(&r.pose).unwrap_or_default(),
                render_map_text(f.map, f.explored, f.map_pose)
            ),
            ReplayFormat::Json => {
                let frame = serde_json::json!({ "record": r, "map": MapDump::from(f.map) });
                writeln!(out, "{frame}")
            }
        };
        if let Err(e) = res {
            write_err = Some(e);
        }
    })?;
    if let Some(e) = write_err {
        return Err(e.into());
    }
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::GenScenes { seed, episodes, out } => gen_scenes(*seed, *episodes, out),
        Command::Run(args) => run(args, &["none"]),
        Command::Ablate(args) => run(args, &["table1", "table3", "table4"]),
        Command::Replay { trace, format, every } => replay_trace(trace, *format, *every),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
