//! The `mbo` command line.
//!
//! Exit codes: 0 on success, 2 for invalid arguments or configuration files,
//! 1 when a run fails.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use mbo_core::engine::Clock;
use serde::Deserialize;
use serde_json::{Map, Value as Json};

use crate::cd::{run_cd, CdEvaluator, CdGrid, CdState, GridParam, RsnsEvaluator, SeparableToy};
use crate::config::{Method, RunConfig};
use crate::problems::{problem_by_name, BudgetRule};
use crate::rsns::{RsnsScale, SubsampleMode};
use crate::runner::{result_json, run_method};
use crate::suite::{
    build_scales, run_suite, scores_from_traces, summarize, write_summary, SuiteSpec, DEFAULT_LONG_BUDGET,
    DEFAULT_SUBSAMPLES,
};
use crate::trace::{read_trace, write_trace, TraceFormat};
use crate::BenchError;

#[derive(Debug, Parser)]
#[command(name = "mbo", version, about = "Bayesian optimization benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// One optimization run: writes a trace and result.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's problem.
        #[arg(long)]
        problem: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Config-by-problem grid: writes traces, scales.json and summary.csv.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Coordinate-descent configuration search: writes cd_log.csv and
    /// cd_evaluated.csv.
    Cd {
        #[arg(long, alias = "config")]
        grid: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Recomputes the RSNS summary from a trace directory written by `bench`.
    Rsns {
        #[arg(long)]
        traces: PathBuf,
        /// Directory for summary.csv; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "mbo-out")]
    out: PathBuf,
    /// Threads for batch evaluations (`run`) or grid cells (`bench`, `cd`).
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, value_enum, default_value_t = TraceFormat::Csv)]
    format: TraceFormat,
    /// Record wall-clock milliseconds instead of evaluation ticks; output is
    /// then no longer reproducible byte for byte.
    #[arg(long)]
    wall_clock: bool,
}

impl Common {
    fn clock(&self) -> Clock {
        if self.wall_clock {
            Clock::Wall
        } else {
            Clock::Logical
        }
    }
}

/// Parses `args` (including the program name), runs the subcommand and
/// returns the exit code.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                2
            } else {
                1
            }
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), BenchError> {
    match cmd {
        Command::Run { config, problem, common } => cmd_run(&config, problem, &common),
        Command::Bench { config, common } => cmd_bench(&config, &common),
        Command::Cd { grid, common } => cmd_cd(&grid, &common),
        Command::Rsns { traces, out } => cmd_rsns(&traces, out.as_deref()),
    }
}

fn read_config(path: &Path) -> Result<String, BenchError> {
    fs::read_to_string(path).map_err(|e| BenchError::Config(format!("cannot read {}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, BenchError> {
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), BenchError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn cmd_run(path: &Path, problem: Option<String>, common: &Common) -> Result<(), BenchError> {
    let rc = RunConfig::from_json_str(&read_config(path)?)?;
    let name = problem
        .or_else(|| rc.problem.clone())
        .ok_or_else(|| BenchError::Config("no problem given in the config or with --problem".into()))?;
    let p = problem_by_name(&name).ok_or_else(|| BenchError::Config(format!("unknown problem '{name}'")))?;
    let mut method = rc.method(&p)?;
    if let Method::Bo(c) = &mut method {
        c.eval_workers = common.workers.max(1);
    }
    let id = rc.id.clone().unwrap_or_else(|| "run".into());
    let out = run_method(&p, &method, rc.budget_for(&p), &id, common.seed, common.clock())?;
    fs::create_dir_all(&common.out)?;
    let mut w = create(&common.out.join(format!("trace.{}", common.format.extension())))?;
    write_trace(&out.trace, common.format, &mut w)?;
    w.flush()?;
    write_json(&common.out.join("result.json"), &result_json(&p, &id, common.seed, &out))
}

fn cmd_bench(path: &Path, common: &Common) -> Result<(), BenchError> {
    let spec = SuiteSpec::from_json_str(&read_config(path)?)?;
    let run = run_suite(&spec, common.seed, common.workers, common.clock())?;
    let dir = common.out.join("traces");
    fs::create_dir_all(&dir)?;
    for ((config, problem), records) in &run.traces {
        let mut w = create(&dir.join(format!("{config}__{problem}.{}", common.format.extension())))?;
        write_trace(records, common.format, &mut w)?;
        w.flush()?;
    }
    write_json(&dir.join("scales.json"), &run.scales)?;
    let mut w = create(&common.out.join("summary.csv"))?;
    write_summary(&run.summary, &mut w)?;
    w.flush()?;
    Ok(())
}

fn cmd_rsns(dir: &Path, out: Option<&Path>) -> Result<(), BenchError> {
    let scales_text = fs::read_to_string(dir.join("scales.json"))
        .map_err(|e| BenchError::Config(format!("cannot read scales.json in {}: {e}", dir.display())))?;
    let scales: BTreeMap<String, RsnsScale> =
        serde_json::from_str(&scales_text).map_err(|e| BenchError::Config(format!("scales.json: {e}")))?;
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    files.sort();
    let mut records = Vec::new();
    for f in files {
        let Some(format) = f.extension().and_then(|e| e.to_str()).and_then(TraceFormat::from_extension) else {
            continue;
        };
        records.extend(read_trace(File::open(&f)?, format)?);
    }
    let summary = summarize(&scores_from_traces(&records, &scales)?);
    match out {
        Some(o) => {
            fs::create_dir_all(o)?;
            let mut w = create(&o.join("summary.csv"))?;
            write_summary(&summary, &mut w)?;
            w.flush()?;
        }
        None => write_summary(&summary, std::io::stdout().lock())?,
    }
    Ok(())
}

/// Coordinate-descent input. Either `toy` (one score table per parameter)
/// or `problems` with a `base` run config is required.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CdSpec {
    params: Vec<GridParam>,
    #[serde(default)]
    start: Map<String, Json>,
    #[serde(default = "one")]
    n_repeats: usize,
    #[serde(default)]
    toy: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    problems: Vec<String>,
    #[serde(default)]
    base: Option<Json>,
    #[serde(default)]
    budget_rule: Option<BudgetRule>,
    #[serde(default)]
    long_budget: Option<usize>,
    #[serde(default)]
    n_subsamples: Option<usize>,
}

fn one() -> usize {
    1
}

/// Reads a coordinate-descent spec and runs it.
pub fn cd_from_json(text: &str, seed: u64, workers: usize) -> Result<(CdGrid, CdState), BenchError> {
    let spec: CdSpec = serde_json::from_str(text).map_err(|e| BenchError::Config(format!("cd grid: {e}")))?;
    let grid = CdGrid::new(spec.params)?;
    let start = grid.config_from_json(&spec.start)?;
    let eval: Box<dyn CdEvaluator> = match (spec.toy, spec.problems.is_empty()) {
        (Some(tables), true) => {
            if tables.len() != grid.params().len()
                || tables.iter().zip(grid.params()).any(|(t, p)| t.len() != p.values.len())
            {
                return Err(BenchError::Config("toy needs one score per grid value".into()));
            }
            Box::new(SeparableToy { tables })
        }
        (None, false) => {
            let rule = spec.budget_rule.unwrap_or(BudgetRule::Tune);
            let mut base = spec.base.unwrap_or_else(|| Json::Object(Map::new()));
            if let Some(obj) = base.as_object_mut() {
                obj.entry("budget_rule").or_insert(serde_json::to_value(rule)?);
            }
            let problems = spec
                .problems
                .iter()
                .map(|n| problem_by_name(n).ok_or_else(|| BenchError::Config(format!("unknown problem '{n}'"))))
                .collect::<Result<Vec<_>, _>>()?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers.max(1))
                .build()
                .map_err(|e| BenchError::Runtime(e.to_string()))?;
            let scales = pool.install(|| {
                build_scales(
                    &problems,
                    rule,
                    spec.long_budget.unwrap_or(DEFAULT_LONG_BUDGET),
                    spec.n_subsamples.unwrap_or(DEFAULT_SUBSAMPLES),
                    SubsampleMode::Random,
                    seed,
                )
            })?;
            let scales = problems.iter().map(|p| scales[&p.name]).collect();
            Box::new(RsnsEvaluator { base, problems, scales })
        }
        _ => return Err(BenchError::Config("cd grid needs exactly one of 'toy' and 'problems'".into())),
    };
    let state = run_cd(&grid, eval.as_ref(), start, spec.n_repeats, seed)?;
    Ok((grid, state))
}

fn cmd_cd(path: &Path, common: &Common) -> Result<(), BenchError> {
    let (grid, state) = cd_from_json(&read_config(path)?, common.seed, common.workers)?;
    fs::create_dir_all(&common.out)?;
    let mut w = csv::Writer::from_writer(create(&common.out.join("cd_log.csv"))?);
    for it in &state.log {
        w.serialize(it)?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_writer(create(&common.out.join("cd_evaluated.csv"))?);
    w.write_record(["config", "score"])?;
    for (cfg, s) in &state.evaluated {
        w.write_record([grid.describe(cfg), s.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
