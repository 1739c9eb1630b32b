use std::time::Duration;

use super::Archive;
use crate::pareto;

/// Stopping rule evaluated against the archive.
///
/// Every variant is monotone: once met for an archive it stays met for any
/// extension of that archive. Stagnation rules therefore ask whether the run
/// has *ever* stagnated over the trailing window, not only at the end.
#[derive(Debug, Clone, PartialEq)]
pub enum Terminator {
    /// Completed evaluations reached the limit.
    Evals(usize),
    /// Wall time since the instance was created reached the limit.
    RunTime(Duration),
    /// Best value of the first objective is at or below the threshold
    /// (minimization scale).
    PerfReached(f64),
    /// No improvement above `tol` within `window` consecutive evaluations.
    Stagnation { window: usize, tol: f64 },
    /// Like `Stagnation`, counted in batches. Experimental.
    StagnationBatch { window: usize, tol: f64 },
    /// Front hypervolume gained at most `tol` within `window` evaluations.
    /// Experimental.
    StagnationHypervolume {
        window: usize,
        tol: f64,
        reference: Vec<f64>,
    },
    /// `any = true` combines children with "or", otherwise with "and".
    Combo { any: bool, children: Vec<Terminator> },
    None,
}

impl Terminator {
    pub fn is_met(&self, archive: &Archive, elapsed: Duration) -> bool {
        match self {
            Terminator::Evals(n) => archive.n_completed() >= *n,
            Terminator::RunTime(limit) => elapsed >= *limit,
            Terminator::PerfReached(t) => archive.best_value(0).is_some_and(|b| b <= *t),
            Terminator::Stagnation { window, tol } => {
                stagnated(&running_best(&archive.values_min(0)), *window, *tol)
            }
            Terminator::StagnationBatch { window, tol } => {
                let mut per_batch: Vec<f64> = Vec::new();
                let mut last_batch = None;
                for (r, v) in archive.completed().zip(archive.values_min(0)) {
                    if last_batch == Some(r.batch_nr) {
                        let b = per_batch.last_mut().expect("batch started");
                        *b = b.min(v);
                    } else {
                        per_batch.push(v);
                        last_batch = Some(r.batch_nr);
                    }
                }
                stagnated(&running_best(&per_batch), *window, *tol)
            }
            Terminator::StagnationHypervolume {
                window,
                tol,
                reference,
            } => {
                let ys: Vec<Vec<f64>> = archive.completed().map(|r| archive.y_min(r)).collect();
                // hypervolume is non-decreasing, so negate it into a
                // non-increasing "best" sequence
                let curve: Vec<f64> = (1..=ys.len())
                    .map(|t| -pareto::hypervolume(&ys[..t], reference))
                    .collect();
                stagnated(&curve, *window, *tol)
            }
            Terminator::Combo { any, children } => {
                if *any {
                    children.iter().any(|c| c.is_met(archive, elapsed))
                } else {
                    children.iter().all(|c| c.is_met(archive, elapsed))
                }
            }
            Terminator::None => false,
        }
    }

    /// Evaluation budget implied by the rule, if any.
    pub fn evals_limit(&self) -> Option<usize> {
        match self {
            Terminator::Evals(n) => Some(*n),
            Terminator::Combo { children, .. } => {
                children.iter().filter_map(Terminator::evals_limit).min()
            }
            _ => None,
        }
    }
}

fn running_best(values: &[f64]) -> Vec<f64> {
    let mut best = f64::INFINITY;
    values
        .iter()
        .map(|&v| {
            best = best.min(v);
            best
        })
        .collect()
}

/// True if some window of `window` steps improved the running best by at most
/// `tol`.
fn stagnated(best: &[f64], window: usize, tol: f64) -> bool {
    if window == 0 {
        return !best.is_empty();
    }
    (window..best.len()).any(|t| best[t - window] - best[t] <= tol)
}
