//! Single benchmark runs.

use mbo_core::engine::{assign_result, pareto_front, Archive, Clock, OptimInstance, OptimResult, ResultAssigner, Terminator};
use mbo_core::loops::run_loop;
use mbo_core::space::{point_to_json, sample_random};
use mbo_core::MboRng;
use rand::SeedableRng;
use serde_json::{json, Value as Json};

use crate::config::Method;
use crate::problems::BenchProblem;
use crate::trace::{build_trace, TraceRecord};
use crate::BenchError;

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub archive: Archive,
    pub result: OptimResult,
    pub trace: Vec<TraceRecord>,
}

impl RunOutput {
    /// Final problem score (lower is better).
    pub fn best(&self) -> f64 {
        self.trace.last().map_or(f64::INFINITY, |r| r.best_so_far)
    }
}

/// Runs `method` on `problem` for `budget` evaluations from `seed`.
pub fn run_method(
    problem: &BenchProblem,
    method: &Method,
    budget: usize,
    config_id: &str,
    seed: u64,
    clock: Clock,
) -> Result<RunOutput, BenchError> {
    let mut inst = OptimInstance::new(problem.objective.clone(), problem.space.clone(), Terminator::Evals(budget))
        .with_clock(clock);
    let mut rng = MboRng::seed_from_u64(seed);
    let result = match method {
        Method::RandomSearch => {
            let points = sample_random(&problem.space, budget, &mut rng);
            inst.eval_batch(&points).map_err(|e| BenchError::Runtime(e.to_string()))?;
            if problem.is_multi_objective() {
                pareto_front(inst.archive())
            } else {
                assign_result(&inst, &ResultAssigner::ArchiveBest, &mut rng)
                    .map_err(|e| BenchError::Runtime(e.to_string()))?
            }
        }
        Method::Bo(cfg) => run_loop(&mut inst, cfg, &mut rng)?.result,
    };
    let archive = inst.archive().clone();
    let scores = problem.score_trace(&archive);
    let stamps: Vec<u64> = archive.completed().map(|r| r.timestamp).collect();
    let trace = build_trace(&problem.name, config_id, seed, &scores, &stamps);
    Ok(RunOutput { archive, result, trace })
}

/// JSON summary of a run's result.
pub fn result_json(problem: &BenchProblem, config_id: &str, seed: u64, out: &RunOutput) -> Json {
    let points: Vec<Json> = out
        .result
        .points
        .iter()
        .map(|p| Json::Object(point_to_json(&problem.space, p)))
        .collect();
    json!({
        "problem": problem.name,
        "config": config_id,
        "seed": seed,
        "n_evals": out.archive.n_completed(),
        "best": out.best(),
        "points": points,
        "ys": out.result.ys,
    })
}
