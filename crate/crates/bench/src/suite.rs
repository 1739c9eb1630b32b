//! Config-by-problem benchmark grids and their RSNS summaries.

use std::collections::BTreeMap;

use mbo_core::derive_seed;
use mbo_core::engine::Clock;
use mbo_core::MboRng;
use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use crate::config::RunConfig;
use crate::problems::{problem_by_name, BenchProblem, BudgetRule};
use crate::rsns::{build_scale, mean_sd, rsns, RsnsScale, SubsampleMode};
use crate::runner::run_method;
use crate::trace::TraceRecord;
use crate::BenchError;

/// Long random-search budget of the RSNS anchors.
pub const DEFAULT_LONG_BUDGET: usize = 100_000;
pub const DEFAULT_SUBSAMPLES: usize = 30;

fn default_long_budget() -> usize {
    DEFAULT_LONG_BUDGET
}

fn default_subsamples() -> usize {
    DEFAULT_SUBSAMPLES
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteSpec {
    /// Run configurations by id; a `problem` key inside them is ignored.
    pub configs: BTreeMap<String, Json>,
    pub problems: Vec<String>,
    pub n_seeds: usize,
    /// Budget rule for the runs and for the small searches of the scales.
    #[serde(default)]
    pub budget_rule: BudgetRule,
    #[serde(default = "default_long_budget")]
    pub long_budget: usize,
    #[serde(default = "default_subsamples")]
    pub n_subsamples: usize,
    #[serde(default)]
    pub subsample_mode: SubsampleMode,
}

impl SuiteSpec {
    pub fn from_json_str(text: &str) -> Result<SuiteSpec, BenchError> {
        serde_json::from_str(text).map_err(|e| BenchError::Config(format!("bench config: {e}")))
    }

    pub fn resolve_problems(&self) -> Result<Vec<BenchProblem>, BenchError> {
        self.problems
            .iter()
            .map(|n| problem_by_name(n).ok_or_else(|| BenchError::Config(format!("unknown problem '{n}'"))))
            .collect()
    }
}

/// Outcome of one run, keyed by config, problem and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct CellScore {
    pub config: String,
    pub problem: String,
    pub seed: u64,
    pub best: f64,
    pub rsns: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub config: String,
    /// Problem name, or `*` for the mean over problems.
    pub problem: String,
    pub n_runs: usize,
    pub mean_rsns: f64,
    pub se_rsns: f64,
    /// Mean final score; empty for the mean over problems.
    pub mean_best: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SuiteRun {
    pub scales: BTreeMap<String, RsnsScale>,
    /// Traces per `(config, problem)`, runs in seed order.
    pub traces: BTreeMap<(String, String), Vec<TraceRecord>>,
    pub cells: Vec<CellScore>,
    pub summary: Vec<SummaryRow>,
}

/// Seed of the `index`-th repetition; shared by all configs and problems so
/// that runs are paired.
pub fn run_seed(master: u64, index: usize) -> u64 {
    derive_seed(master, index as u64)
}

/// Builds the scale of every problem from its own seeded stream.
pub fn build_scales(
    problems: &[BenchProblem],
    rule: BudgetRule,
    long_budget: usize,
    n_subsamples: usize,
    mode: SubsampleMode,
    master: u64,
) -> Result<BTreeMap<String, RsnsScale>, BenchError> {
    problems
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let mut rng = MboRng::seed_from_u64(derive_seed(master, (1 << 32) + i as u64));
            let s = build_scale(p, long_budget, p.budget(rule), n_subsamples, mode, &mut rng)?;
            if let Err(e) = s.validate() {
                log::warn!("problem {} has a degenerate scale: {e}", p.name);
            }
            Ok((p.name.clone(), s))
        })
        .collect()
}

/// Runs every config on every problem for `n_seeds` seeds using `workers`
/// threads. The result does not depend on `workers`.
pub fn run_suite(spec: &SuiteSpec, master: u64, workers: usize, clock: Clock) -> Result<SuiteRun, BenchError> {
    if spec.n_seeds == 0 || spec.configs.is_empty() || spec.problems.is_empty() {
        return Err(BenchError::Config("bench needs configs, problems and seeds".into()));
    }
    let problems = spec.resolve_problems()?;
    let mut configs = Vec::new();
    for (id, json) in &spec.configs {
        let mut rc = RunConfig::from_json(json.clone())?;
        rc.budget_rule.get_or_insert(spec.budget_rule);
        for p in &problems {
            rc.method(p)?;
        }
        configs.push((id.clone(), rc));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| BenchError::Runtime(e.to_string()))?;
    pool.install(|| {
        let scales = build_scales(&problems, spec.budget_rule, spec.long_budget, spec.n_subsamples, spec.subsample_mode, master)?;
        let cells: Vec<(usize, usize, usize)> = (0..configs.len())
            .flat_map(|c| (0..problems.len()).flat_map(move |p| (0..spec.n_seeds).map(move |s| (c, p, s))))
            .collect();
        let runs: Vec<Vec<TraceRecord>> = cells
            .par_iter()
            .map(|&(c, p, s)| {
                let (id, rc) = &configs[c];
                let problem = &problems[p];
                let out = run_method(problem, &rc.method(problem)?, rc.budget_for(problem), id, run_seed(master, s), clock)?;
                Ok(out.trace)
            })
            .collect::<Result<_, BenchError>>()?;
        let mut traces: BTreeMap<(String, String), Vec<TraceRecord>> = BTreeMap::new();
        for (&(c, p, _), t) in cells.iter().zip(runs) {
            traces
                .entry((configs[c].0.clone(), problems[p].name.clone()))
                .or_default()
                .extend(t);
        }
        let all: Vec<TraceRecord> = traces.values().flatten().cloned().collect();
        let cells = scores_from_traces(&all, &scales)?;
        let summary = summarize(&cells);
        Ok(SuiteRun {
            scales,
            traces,
            cells,
            summary,
        })
    })
}

/// Final best of every run in the traces, scored against `scales`. Cells
/// come out sorted by config, problem and seed.
pub fn scores_from_traces(
    traces: &[TraceRecord],
    scales: &BTreeMap<String, RsnsScale>,
) -> Result<Vec<CellScore>, BenchError> {
    let mut last: BTreeMap<(String, String, u64), &TraceRecord> = BTreeMap::new();
    for r in traces {
        let key = (r.config.clone(), r.problem.clone(), r.seed);
        let e = last.entry(key).or_insert(r);
        if r.eval > e.eval {
            *e = r;
        }
    }
    last.into_iter()
        .map(|((config, problem, seed), r)| {
            let scale = scales
                .get(&problem)
                .ok_or_else(|| BenchError::Config(format!("no scale for problem '{problem}'")))?;
            Ok(CellScore {
                rsns: rsns(r.best_so_far, scale)?,
                config,
                problem,
                seed,
                best: r.best_so_far,
            })
        })
        .collect()
}

/// Mean and standard error of RSNS per config and problem, then the mean
/// over problems per config.
pub fn summarize(cells: &[CellScore]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(&str, &str), Vec<&CellScore>> = BTreeMap::new();
    for c in cells {
        groups.entry((&c.config, &c.problem)).or_default().push(c);
    }
    let mut rows: Vec<SummaryRow> = Vec::new();
    for ((config, problem), cs) in &groups {
        let r: Vec<f64> = cs.iter().map(|c| c.rsns).collect();
        let b: Vec<f64> = cs.iter().map(|c| c.best).collect();
        let (mean, sd) = mean_sd(&r);
        rows.push(SummaryRow {
            config: config.to_string(),
            problem: problem.to_string(),
            n_runs: r.len(),
            mean_rsns: mean,
            se_rsns: sd / (r.len() as f64).sqrt(),
            mean_best: Some(mean_sd(&b).0),
        });
    }
    let mut per_config: BTreeMap<String, Vec<&SummaryRow>> = BTreeMap::new();
    for r in &rows {
        per_config.entry(r.config.clone()).or_default().push(r);
    }
    let overall: Vec<SummaryRow> = per_config
        .into_iter()
        .map(|(config, rs)| {
            let means: Vec<f64> = rs.iter().map(|r| r.mean_rsns).collect();
            let k = rs.len() as f64;
            SummaryRow {
                config,
                problem: "*".into(),
                n_runs: rs.iter().map(|r| r.n_runs).sum(),
                mean_rsns: mean_sd(&means).0,
                se_rsns: rs.iter().map(|r| r.se_rsns * r.se_rsns).sum::<f64>().sqrt() / k,
                mean_best: None,
            }
        })
        .collect();
    rows.extend(overall);
    rows
}

pub fn write_summary<W: std::io::Write>(rows: &[SummaryRow], out: W) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
