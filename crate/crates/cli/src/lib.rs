//! Batch experiment runner: generate synthetic panels, run every
//! learner/strategy cell plus an unaugmented baseline per learner, and
//! summarise finished runs.
//!
//! Run directory layout:
//!
//! ```text
//! <out>/config.json                      resolved configuration
//! <out>/<seed>/<learner>-<strategy>/     one augmented cell
//! <out>/<seed>/<learner>-baseline/       base learner alone
//!     trace.jsonl memory.json forecasts.csv returns.csv metrics.json
//! <out>/report/                          written by `report`
//! ```

pub mod config;
pub mod report;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use cla_core::backtest::write_returns_csv;
use cla_core::engine::{write_trace_jsonl, MemoryStore};
use cla_core::experiment::{backtest, run_baseline, run_engine, write_forecasts_csv, BacktestResult, EngineRun};
use cla_core::learners::LearnerKind;
use cla_core::panel::{write_panel_csv, write_targets_csv};
use cla_core::similarity::Strategy;
use rayon::prelude::*;

pub use config::{ExperimentConfig, Overrides};

/// Files every cell directory must contain.
pub const CELL_ARTIFACTS: [&str; 5] = ["trace.jsonl", "memory.json", "forecasts.csv", "returns.csv", "metrics.json"];

pub const CONFIG_FILE: &str = "config.json";

pub fn cell_name(learner: LearnerKind, strategy: Option<Strategy>) -> String {
    match strategy {
        Some(s) => format!("{}-{}", learner.short_name(), s.name()),
        None => format!("{}-baseline", learner.short_name()),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Writes panel and target CSVs for each configured seed and returns the paths.
pub fn cmd_generate(config: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    config.validate()?;
    let mut written = Vec::new();
    for &seed in &config.seeds {
        let g = config.generator_for(seed).context("`generate` needs a `generate` data source")?.generate()?;
        let dir = config.output.join(seed.to_string());
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let panel = dir.join("panel.csv");
        let targets = dir.join("targets.csv");
        let regimes = dir.join("regimes.csv");
        let mut w = create(&panel)?;
        write_panel_csv(&g.panel, &mut w)?;
        w.flush()?;
        let mut w = create(&targets)?;
        write_targets_csv(&g.targets, &mut w)?;
        w.flush()?;
        let mut w = create(&regimes)?;
        writeln!(w, "time,regime")?;
        for (s, label) in g.panel.sections().iter().zip(&g.regime_labels) {
            writeln!(w, "{},{}", s.time, label)?;
        }
        w.flush()?;
        written.extend([panel, targets, regimes]);
    }
    Ok(written)
}

fn write_cell(dir: &Path, run: &EngineRun, bt: &BacktestResult) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut w = create(&dir.join("trace.jsonl"))?;
    write_trace_jsonl(&run.traces(), &mut w)?;
    w.flush()?;
    let mut w = create(&dir.join("memory.json"))?;
    w.write_all(run.memory.to_json()?.as_bytes())?;
    w.write_all(b"\n")?;
    w.flush()?;
    let mut w = create(&dir.join("forecasts.csv"))?;
    write_forecasts_csv(&run.forecast_rows(), &mut w)?;
    w.flush()?;
    let mut w = create(&dir.join("returns.csv"))?;
    write_returns_csv(&bt.returns, &mut w)?;
    w.flush()?;
    write_json(&dir.join("metrics.json"), &bt.metrics)
}

/// A (seed, learner) pair: its baseline and every strategy cell.
#[derive(Clone, Copy, Debug)]
struct Job {
    seed: u64,
    learner: usize,
}

/// Runs every cell and writes the run directory. Returns the cell directories.
pub fn cmd_run(config: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    config.validate()?;
    fs::create_dir_all(&config.output).with_context(|| format!("creating {}", config.output.display()))?;
    write_json(&config.output.join(CONFIG_FILE), config)?;
    let jobs: Vec<Job> = config
        .seeds
        .iter()
        .flat_map(|&seed| (0..config.learners.len()).map(move |learner| Job { seed, learner }))
        .collect();
    let dirs = jobs.par_iter().map(|job| run_learner(config, *job)).collect::<Result<Vec<_>>>()?;
    Ok(dirs.into_iter().flatten().collect())
}

fn run_learner(config: &ExperimentConfig, job: Job) -> Result<Vec<PathBuf>> {
    let data = config.dataset(job.seed)?;
    let k = data.panel.width();
    let choice = &config.learners[job.learner];
    let spec = choice.spec(k, config.engine.seq_len, job.seed);
    let seed_dir = config.output.join(job.seed.to_string());
    let base_cfg = config.engine_config(config.strategies[0], k, job.seed);
    log::info!("seed {} {}: baseline", job.seed, choice.kind);
    let baseline = run_baseline(&data.panel, &data.targets, &spec, &base_cfg)
        .with_context(|| format!("baseline run for {} seed {}", choice.kind, job.seed))?;
    let cells = config
        .strategies
        .par_iter()
        .map(|&strategy| -> Result<PathBuf> {
            let name = cell_name(choice.kind, Some(strategy));
            log::info!("seed {} {name}: engine", job.seed);
            let run = run_engine(&data.panel, &data.targets, &spec, config.engine_config(strategy, k, job.seed))
                .with_context(|| format!("engine run {name} seed {}", job.seed))?;
            let bt = backtest(&run.outputs, &baseline.outputs, &data.targets, &config.backtest)
                .with_context(|| format!("backtest {name} seed {}", job.seed))?;
            let dir = seed_dir.join(&name);
            write_cell(&dir, &run, &bt)?;
            Ok(dir)
        })
        .collect::<Result<Vec<_>>>()?;
    let bt = backtest(&baseline.outputs, &baseline.outputs, &data.targets, &config.backtest)?;
    let dir = seed_dir.join(cell_name(choice.kind, None));
    write_cell(&dir, &baseline, &bt)?;
    let mut dirs = cells;
    dirs.push(dir);
    Ok(dirs)
}

/// Human-readable listing of a memory snapshot.
pub fn cmd_inspect_memory(snapshot: &Path) -> Result<String> {
    let text = fs::read_to_string(snapshot).with_context(|| format!("reading {}", snapshot.display()))?;
    let columns = MemoryStore::from_json(&text).with_context(|| format!("parsing {}", snapshot.display()))?;
    let mut out = String::new();
    out.push_str(&format!("{} memory columns\n", columns.len()));
    out.push_str("id\tcreated_at\trepr\trepr_width\tlearner\tshapes\tparams\ttrained_at\n");
    for c in &columns {
        let p = &c.params;
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{:?}\t{}\t{}\n",
            c.id,
            c.created_at,
            c.repr.variant_name(),
            c.repr.width(),
            p.kind(),
            p.shapes(),
            p.values().len(),
            p.training_time_id().map_or("-".to_string(), |t| t.to_string()),
        ));
    }
    Ok(out)
}
