//! Seeded trial runner and suite harness.
//!
//! A trial steps the world one tick at a time: obstacles move, the planner
//! gets `budget_per_tick` iterations, and the robot follows whatever path it
//! was handed for one tick. The trial ends at the goal or at `cutoff_ticks`.
//! Every trial is fully determined by (planner, map, seed).

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::BaselineConfig;
use crate::geometry::{path_length, Point2};
use crate::maps;
use crate::multistage::MultiStageConfig;
use crate::planner::{Planner, PlannerKind, PlannerRng, PlannerSettings};
use crate::rrt::{Counters, RrtError, RrtParams};
use crate::trace::Snapshot;
use crate::world::{MapDocument, MapError, World, WorldError};

/// Generator behind every trial stream, recorded in the summary.
pub const RNG_NAME: &str = "ChaCha8Rng (rand_chacha 0.9), world stream from mixed map/trial seed, planner stream 1";

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("map `{name}`: {source}")]
    Map { name: String, source: MapError },
    #[error("invalid suite config: {0}")]
    Config(String),
    #[error("suite has no trials")]
    EmptySuite,
    #[error(transparent)]
    Params(#[from] RrtError),
    #[error("planner returned an unusable path: {0}")]
    World(#[from] WorldError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl BenchError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        BenchError::Io { path: path.into(), source }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOptions {
    pub cutoff_ticks: u64,
    pub budget_per_tick: usize,
    pub settings: PlannerSettings,
}

impl Default for TrialOptions {
    fn default() -> Self {
        Self { cutoff_ticks: 20_000, budget_per_tick: 300, settings: PlannerSettings::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub planner: PlannerKind,
    pub map: String,
    pub seed: u64,
    pub success: bool,
    pub ticks: u64,
    pub cc: u64,
    pub nn: u64,
    /// Distance the robot actually travelled.
    pub length: f64,
    pub restarts: u64,
}

/// A planner paired with the world it drives, stepped one tick at a time.
pub struct Simulation {
    pub world: World,
    pub planner: Box<dyn Planner>,
    pub counters: Counters,
    pub length: f64,
    /// Path still to follow after the last tick; empty when the robot waited.
    pub path: Vec<Point2>,
    rng: PlannerRng,
    budget: usize,
}

impl Simulation {
    pub fn new(kind: PlannerKind, world: World, seed: u64, budget: usize, settings: &PlannerSettings) -> Self {
        let planner = settings.build(kind, &world);
        let mut rng = PlannerRng::seed_from_u64(seed);
        rng.set_stream(1);
        Self { world, planner, counters: Counters::default(), length: 0.0, path: Vec::new(), rng, budget }
    }

    pub fn tick(&mut self) -> Result<(), WorldError> {
        self.world.update(1);
        self.path.clear();
        if let Some(path) = self.planner.step(&self.world, self.budget, &mut self.rng, &mut self.counters) {
            let rest = self.world.advance_robot(&path, 1)?;
            self.length += path_length(&path) - path_length(&rest);
            self.planner.robot_moved(&self.world, &rest);
            self.path = rest;
        }
        Ok(())
    }

    pub fn snapshot(&self, with_tree: bool) -> Snapshot {
        Snapshot::capture(&self.world, &self.path, with_tree.then(|| self.planner.tree_edges()))
    }
}

/// Runs one trial; `observe` sees the simulation after every tick.
pub fn run_trial_with<F: FnMut(&Simulation)>(
    kind: PlannerKind,
    map_name: &str,
    doc: &MapDocument,
    seed: u64,
    opts: &TrialOptions,
    mut observe: F,
) -> Result<TrialResult, BenchError> {
    opts.settings.validate()?;
    let world = doc.build_for_trial(seed).map_err(|source| BenchError::Map { name: map_name.to_string(), source })?;
    let mut sim = Simulation::new(kind, world, seed, opts.budget_per_tick, &opts.settings);
    let mut ticks = 0;
    while !sim.world.at_goal() && ticks < opts.cutoff_ticks {
        sim.tick()?;
        ticks += 1;
        observe(&sim);
    }
    Ok(TrialResult {
        planner: kind,
        map: map_name.to_string(),
        seed,
        success: sim.world.at_goal(),
        ticks,
        cc: sim.counters.cc.get(),
        nn: sim.counters.nn.get(),
        length: sim.length,
        restarts: sim.planner.restarts(),
    })
}

pub fn run_trial(
    kind: PlannerKind,
    map_name: &str,
    doc: &MapDocument,
    seed: u64,
    opts: &TrialOptions,
) -> Result<TrialResult, BenchError> {
    run_trial_with(kind, map_name, doc, seed, opts, |_| {})
}

/// Runs one trial and records a snapshot per tick.
pub fn run_trial_traced(
    kind: PlannerKind,
    map_name: &str,
    doc: &MapDocument,
    seed: u64,
    opts: &TrialOptions,
    with_tree: bool,
) -> Result<(TrialResult, Vec<Snapshot>), BenchError> {
    let mut trace = Vec::new();
    let result = run_trial_with(kind, map_name, doc, seed, opts, |sim| trace.push(sim.snapshot(with_tree)))?;
    Ok((result, trace))
}

fn default_cutoff() -> u64 {
    TrialOptions::default().cutoff_ticks
}

fn default_budget() -> usize {
    TrialOptions::default().budget_per_tick
}

/// Suite configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub planners: Vec<PlannerKind>,
    /// Bundled map names or map file paths (relative to the config file).
    pub maps: Vec<String>,
    pub trials: u64,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_cutoff")]
    pub cutoff_ticks: u64,
    #[serde(default = "default_budget")]
    pub budget_per_tick: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rrt: Option<RrtParams>,
    #[serde(default)]
    pub multistage: MultiStageConfig,
    #[serde(default)]
    pub baselines: BaselineConfig,
}

impl SuiteConfig {
    pub fn parse(text: &str) -> Result<Self, BenchError> {
        let config: SuiteConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.trials == 0 || self.planners.is_empty() || self.maps.is_empty() {
            return Err(BenchError::EmptySuite);
        }
        if self.budget_per_tick == 0 {
            return Err(BenchError::Config("budget_per_tick must be positive".into()));
        }
        self.settings().validate()?;
        Ok(())
    }

    pub fn settings(&self) -> PlannerSettings {
        PlannerSettings { rrt: self.rrt, multistage: self.multistage, baselines: self.baselines }
    }

    pub fn trial_options(&self) -> TrialOptions {
        TrialOptions { cutoff_ticks: self.cutoff_ticks, budget_per_tick: self.budget_per_tick, settings: self.settings() }
    }

    /// Loads every map, resolving file paths against `base_dir`.
    pub fn load_maps(&self, base_dir: &Path) -> Result<Vec<(String, MapDocument)>, BenchError> {
        self.maps
            .iter()
            .map(|entry| {
                let (name, parsed) = match maps::bundled(entry) {
                    Some(parsed) => (entry.clone(), parsed),
                    None => {
                        let path = base_dir.join(entry);
                        let text = fs::read_to_string(&path).map_err(|e| BenchError::io(&path, e))?;
                        let name = path.file_stem().map_or_else(|| entry.clone(), |s| s.to_string_lossy().into_owned());
                        (name, MapDocument::parse(&text))
                    }
                };
                let doc = parsed.map_err(|source| BenchError::Map { name: name.clone(), source })?;
                Ok((name, doc))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Worker threads; falls back to sequential without the `parallel` feature.
    Parallel { jobs: usize },
}

impl Execution {
    pub fn from_jobs(jobs: usize) -> Self {
        if jobs <= 1 {
            Execution::Sequential
        } else {
            Execution::Parallel { jobs }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Job {
    planner: PlannerKind,
    map: usize,
    seed: u64,
}

/// Runs every (map, planner, trial) combination. Results come back in that
/// order however they were scheduled.
pub fn run_suite(
    config: &SuiteConfig,
    maps: &[(String, MapDocument)],
    exec: Execution,
) -> Result<Vec<TrialResult>, BenchError> {
    config.validate()?;
    let opts = config.trial_options();
    let jobs: Vec<Job> = (0..maps.len())
        .flat_map(|map| {
            config.planners.iter().flat_map(move |&planner| {
                (0..config.trials).map(move |i| Job { planner, map, seed: config.base_seed.wrapping_add(i) })
            })
        })
        .collect();
    let run = |job: &Job| {
        let (name, doc) = &maps[job.map];
        run_trial(job.planner, name, doc, job.seed, &opts)
    };
    match exec {
        Execution::Sequential => jobs.iter().map(run).collect(),
        Execution::Parallel { jobs: threads } => run_parallel(&jobs, threads, run),
    }
}

#[cfg(feature = "parallel")]
fn run_parallel<F>(jobs: &[Job], threads: usize, run: F) -> Result<Vec<TrialResult>, BenchError>
where
    F: Fn(&Job) -> Result<TrialResult, BenchError> + Sync,
{
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| BenchError::Config(format!("thread pool: {e}")))?;
    pool.install(|| jobs.par_iter().map(&run).collect())
}

#[cfg(not(feature = "parallel"))]
fn run_parallel<F>(jobs: &[Job], _threads: usize, run: F) -> Result<Vec<TrialResult>, BenchError>
where
    F: Fn(&Job) -> Result<TrialResult, BenchError>,
{
    jobs.iter().map(run).collect()
}

/// Aggregate row for one (planner, map) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub planner: PlannerKind,
    pub map: String,
    pub trials: u64,
    pub successes: u64,
    pub success_pct: f64,
    /// Means over successful trials; `None` when nothing succeeded.
    pub mean_cc: Option<f64>,
    pub mean_nn: Option<f64>,
    pub mean_ticks: Option<f64>,
    pub mean_length: Option<f64>,
    /// Means over all trials.
    pub mean_cc_all: f64,
    pub mean_nn_all: f64,
    pub mean_ticks_all: f64,
    pub mean_restarts: f64,
    pub total_cc: u64,
    pub total_nn: u64,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0u64), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Groups results by (planner, map) in first-seen order.
pub fn summarize(results: &[TrialResult]) -> Vec<SummaryRow> {
    let mut keys: Vec<(PlannerKind, &str)> = Vec::new();
    for r in results {
        if !keys.contains(&(r.planner, r.map.as_str())) {
            keys.push((r.planner, &r.map));
        }
    }
    keys.into_iter()
        .map(|(planner, map)| {
            let cell: Vec<&TrialResult> = results.iter().filter(|r| r.planner == planner && r.map == map).collect();
            let ok: Vec<&&TrialResult> = cell.iter().filter(|r| r.success).collect();
            let trials = cell.len() as u64;
            let successes = ok.len() as u64;
            SummaryRow {
                planner,
                map: map.to_string(),
                trials,
                successes,
                success_pct: 100.0 * successes as f64 / trials as f64,
                mean_cc: mean(ok.iter().map(|r| r.cc as f64)),
                mean_nn: mean(ok.iter().map(|r| r.nn as f64)),
                mean_ticks: mean(ok.iter().map(|r| r.ticks as f64)),
                mean_length: mean(ok.iter().map(|r| r.length)),
                mean_cc_all: mean(cell.iter().map(|r| r.cc as f64)).unwrap_or(0.0),
                mean_nn_all: mean(cell.iter().map(|r| r.nn as f64)).unwrap_or(0.0),
                mean_ticks_all: mean(cell.iter().map(|r| r.ticks as f64)).unwrap_or(0.0),
                mean_restarts: mean(cell.iter().map(|r| r.restarts as f64)).unwrap_or(0.0),
                total_cc: cell.iter().map(|r| r.cc).sum(),
                total_nn: cell.iter().map(|r| r.nn).sum(),
            }
        })
        .collect()
}

pub fn write_results_csv<W: Write>(out: W, results: &[TrialResult]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    for r in results {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| BenchError::io("results.csv", e))?;
    Ok(())
}

pub fn read_results_csv<R: io::Read>(input: R) -> Result<Vec<TrialResult>, BenchError> {
    csv::Reader::from_reader(input).deserialize().map(|r| r.map_err(BenchError::from)).collect()
}

pub fn write_summary_csv<W: Write>(out: W, rows: &[SummaryRow]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| BenchError::io("summary.csv", e))?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub rng: String,
    pub config: SuiteConfig,
    pub rows: Vec<SummaryRow>,
    /// Wall-clock time of the whole suite; informative only.
    pub wall_seconds: f64,
}

/// Runs a suite and writes `results.csv`, `summary.csv` and `summary.json`
/// into `out_dir`.
pub fn run_suite_to_dir(
    config: &SuiteConfig,
    maps: &[(String, MapDocument)],
    exec: Execution,
    out_dir: &Path,
) -> Result<SuiteSummary, BenchError> {
    let start = Instant::now();
    let results = run_suite(config, maps, exec)?;
    let wall_seconds = start.elapsed().as_secs_f64();
    fs::create_dir_all(out_dir).map_err(|e| BenchError::io(out_dir, e))?;
    let create = |name: &str| {
        let path = out_dir.join(name);
        fs::File::create(&path).map(io::BufWriter::new).map_err(|e| BenchError::io(path, e))
    };
    write_results_csv(create("results.csv")?, &results)?;
    let rows = summarize(&results);
    write_summary_csv(create("summary.csv")?, &rows)?;
    let summary = SuiteSummary { rng: RNG_NAME.to_string(), config: config.clone(), rows, wall_seconds };
    let mut json = create("summary.json")?;
    serde_json::to_writer_pretty(&mut json, &summary)?;
    json.write_all(b"\n").map_err(|e| BenchError::io(out_dir.join("summary.json"), e))?;
    Ok(summary)
}
