use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dynplan::bench::{self, BenchError, Execution, SuiteConfig, TrialOptions};
use dynplan::maps;
use dynplan::trace;
use dynplan::world::MapDocument;
use dynplan::{PlannerKind, PlannerSettings};

/// Dynamic path planning: single trials, benchmark suites and trace rendering.
#[derive(Debug, Parser)]
#[command(name = "dynplan", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one trial and print a one-line result. Exits 1 if the goal is not reached.
    Run {
        /// Map file, or a bundled map name (map1, map2, map1_partial, map2_partial).
        #[arg(long)]
        map: String,
        /// multistage, drrt-noadv, drrt-adv, mprrt-noadv or mprrt-adv.
        #[arg(long)]
        planner: PlannerKind,
        /// Trial seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Give up after this many ticks.
        #[arg(long, default_value_t = 20_000)]
        cutoff: u64,
        /// Planner iterations per tick.
        #[arg(long, default_value_t = 300)]
        budget: usize,
        /// JSON file with `rrt`, `multistage` and `baselines` parameter blocks.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Write a JSON-lines trace of every tick here.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write one SVG frame per tick into this directory.
        #[arg(long)]
        frames: Option<PathBuf>,
        /// Include planner tree edges in the trace and frames.
        #[arg(long)]
        tree: bool,
    },
    /// Run a suite and write results.csv, summary.csv and summary.json.
    Bench {
        /// Suite configuration (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; results do not depend on it.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Render a trace file to SVG frames.
    Render {
        /// Trace written by `run --trace`.
        #[arg(long)]
        trace: PathBuf,
        /// Directory for frame_NNNNN.svg files.
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a map document and report the first problem.
    ValidateMap {
        /// Map file to check.
        map: PathBuf,
    },
}

fn load_map(arg: &str) -> Result<(String, MapDocument), BenchError> {
    if let Some(parsed) = maps::bundled(arg) {
        return parsed.map(|doc| (arg.to_string(), doc)).map_err(|source| BenchError::Map { name: arg.into(), source });
    }
    let path = Path::new(arg);
    let text = fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    let name = path.file_stem().map_or_else(|| arg.to_string(), |s| s.to_string_lossy().into_owned());
    let doc = MapDocument::parse(&text).map_err(|source| BenchError::Map { name: name.clone(), source })?;
    Ok((name, doc))
}

#[allow(clippy::too_many_arguments)]
fn run(
    map: &str,
    planner: PlannerKind,
    seed: u64,
    cutoff: u64,
    budget: usize,
    params: Option<&Path>,
    trace_path: Option<&Path>,
    frames: Option<&Path>,
    tree: bool,
) -> Result<bool, BenchError> {
    let (name, doc) = load_map(map)?;
    let settings = match params {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| BenchError::io(p, e))?;
            serde_json::from_str::<PlannerSettings>(&text)?
        }
        None => PlannerSettings::default(),
    };
    if budget == 0 {
        return Err(BenchError::Config("--budget must be positive".into()));
    }
    let opts = TrialOptions { cutoff_ticks: cutoff, budget_per_tick: budget, settings };
    let result = if trace_path.is_some() || frames.is_some() {
        let (result, snapshots) = bench::run_trial_traced(planner, &name, &doc, seed, &opts, tree)?;
        if let Some(p) = trace_path {
            trace::export_trace(p, &snapshots)?;
        }
        if let Some(dir) = frames {
            trace::write_frames(dir, &snapshots)?;
        }
        result
    } else {
        bench::run_trial(planner, &name, &doc, seed, &opts)?
    };
    println!(
        "planner={} map={} seed={} success={} ticks={} cc={} nn={} length={:.3} restarts={}",
        result.planner,
        result.map,
        result.seed,
        result.success,
        result.ticks,
        result.cc,
        result.nn,
        result.length,
        result.restarts
    );
    Ok(result.success)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.1}"))
}

fn bench_cmd(config_path: &Path, out: &Path, jobs: usize) -> Result<(), BenchError> {
    let text = fs::read_to_string(config_path).map_err(|e| BenchError::io(config_path, e))?;
    let config = SuiteConfig::parse(&text)?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    let maps = config.load_maps(base)?;
    let summary = bench::run_suite_to_dir(&config, &maps, Execution::from_jobs(jobs), out)?;
    println!("{:<12} {:<14} {:>8} {:>12} {:>10} {:>10}", "planner", "map", "success%", "C.C.", "N.N.", "ticks");
    for row in &summary.rows {
        println!(
            "{:<12} {:<14} {:>8.1} {:>12} {:>10} {:>10}",
            row.planner.as_str(),
            row.map,
            row.success_pct,
            fmt_opt(row.mean_cc),
            fmt_opt(row.mean_nn),
            fmt_opt(row.mean_ticks)
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { map, planner, seed, cutoff, budget, params, trace, frames, tree } => run(
            &map,
            planner,
            seed,
            cutoff,
            budget,
            params.as_deref(),
            trace.as_deref(),
            frames.as_deref(),
            tree,
        )
        .map(|ok| if ok { ExitCode::SUCCESS } else { ExitCode::from(1) }),
        Command::Bench { config, out, jobs } => bench_cmd(&config, &out, jobs).map(|()| ExitCode::SUCCESS),
        Command::Render { trace: path, out } => trace::load_trace(&path)
            .and_then(|snapshots| trace::write_frames(&out, &snapshots))
            .map(|n| {
                println!("wrote {n} frames to {}", out.display());
                ExitCode::SUCCESS
            }),
        Command::ValidateMap { map } => fs::read_to_string(&map)
            .map_err(|e| BenchError::io(&map, e))
            .and_then(|text| {
                MapDocument::parse(&text).map_err(|source| BenchError::Map { name: map.display().to_string(), source })
            })
            .map(|_| {
                println!("{}: ok", map.display());
                ExitCode::SUCCESS
            }),
    };
    outcome.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(2)
    })
}
