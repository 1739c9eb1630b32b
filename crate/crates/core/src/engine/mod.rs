//! Objective wrapper, archive, optimization instance, terminators and result
//! assignment.

mod archive;
mod objective;
mod result;
mod terminator;

use std::time::{Duration, Instant};

use thiserror::Error;

pub use archive::{Archive, ArchiveRow, Clock};
pub use objective::{Direction, EvalFailure, Objective, Target};
pub use result::{assign_result, pareto_front, OptimResult, ResultAssigner};
pub use terminator::Terminator;

use crate::space::{ParamSpace, Point};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    /// The terminator was already met when a batch was submitted.
    #[error("optimization instance is terminated")]
    Terminated,
    #[error("invalid point for parameter `{param}`: {reason}")]
    InvalidPoint { param: String, reason: String },
    #[error("archive has no completed evaluations")]
    EmptyArchive,
    #[error("surrogate error while assigning the result: {0}")]
    Surrogate(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("malformed archive: {0}")]
    Format(String),
}

/// Objective, search space, archive and termination rule of one run.
#[derive(Debug, Clone)]
pub struct OptimInstance {
    objective: Objective,
    space: ParamSpace,
    archive: Archive,
    terminator: Terminator,
    started: Instant,
}

impl OptimInstance {
    pub fn new(objective: Objective, space: ParamSpace, terminator: Terminator) -> Self {
        let archive = Archive::new(objective.codomain().to_vec());
        OptimInstance {
            objective,
            space,
            archive,
            terminator,
            started: Instant::now(),
        }
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.archive = self.archive.with_clock(clock);
        self
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn space(&self) -> &ParamSpace {
        &self.space
    }

    pub fn archive(&self) -> &Archive {
        &self.archive
    }

    pub fn archive_mut(&mut self) -> &mut Archive {
        &mut self.archive
    }

    /// Replaces the archive, e.g. after an asynchronous run.
    pub fn set_archive(&mut self, archive: Archive) {
        self.archive = archive;
    }

    pub fn terminator(&self) -> &Terminator {
        &self.terminator
    }

    pub fn elapsed(&self) -> Duration {
        self.started.elapsed()
    }

    pub fn is_terminated(&self) -> bool {
        self.terminator.is_met(&self.archive, self.elapsed())
    }

    /// Evaluations left before an `Evals` terminator triggers.
    pub fn remaining_evals(&self) -> Option<usize> {
        self.terminator
            .evals_limit()
            .map(|n| n.saturating_sub(self.archive.n_completed()))
    }

    /// Evaluates `points` sequentially and appends them as one batch.
    pub fn eval_batch(&mut self, points: &[Point]) -> Result<Vec<usize>, EngineError> {
        self.eval_batch_with(points, 1)
    }

    /// Like [`OptimInstance::eval_batch`], fanning the objective calls out
    /// over up to `workers` threads. Rows are appended in input order.
    ///
    /// Failed evaluations do not abort the batch; they are recorded with an
    /// imputed worst-case value and `failed = true`.
    pub fn eval_batch_with(
        &mut self,
        points: &[Point],
        workers: usize,
    ) -> Result<Vec<usize>, EngineError> {
        if points.is_empty() {
            return Ok(Vec::new());
        }
        if self.is_terminated() {
            return Err(EngineError::Terminated);
        }
        for p in points {
            if let Some(v) = self.space.validate(p).into_iter().next() {
                return Err(EngineError::InvalidPoint {
                    param: v.param,
                    reason: v.reason,
                });
            }
        }
        let results = evaluate_all(&self.objective, points, workers);
        let batch_nr = self.archive.next_batch_nr();
        let mut rows = Vec::with_capacity(points.len());
        for (p, res) in points.iter().zip(results) {
            let idx = match res {
                Ok(y) => self.archive.push_completed(p.clone(), y, batch_nr, false),
                Err(e) => {
                    log::warn!("{e}; imputing worst-case value");
                    let y = self.imputed_failure();
                    self.archive.push_completed(p.clone(), y, batch_nr, true)
                }
            };
            rows.push(idx);
        }
        Ok(rows)
    }

    /// Raw-direction vector recorded for a failed evaluation.
    pub fn imputed_failure(&self) -> Vec<f64> {
        let k = self.objective.n_objectives();
        let y_min: Vec<f64> = (0..k).map(|j| self.archive.failure_value(j)).collect();
        self.archive.to_raw(&y_min)
    }
}

fn evaluate_all(
    objective: &Objective,
    points: &[Point],
    workers: usize,
) -> Vec<Result<Vec<f64>, EvalFailure>> {
    if workers <= 1 || points.len() == 1 {
        return points.iter().map(|p| objective.eval(p)).collect();
    }
    let chunk = points.len().div_ceil(workers);
    std::thread::scope(|s| {
        let handles: Vec<_> = points
            .chunks(chunk)
            .map(|part| s.spawn(move || part.iter().map(|p| objective.eval(p)).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| {
                h.join()
                    .unwrap_or_else(|_| vec![Err(EvalFailure("objective panicked".into())); chunk])
            })
            .take(points.len())
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::ParamDef;

    fn sinus_instance(limit: usize) -> OptimInstance {
        let space = ParamSpace::new(vec![ParamDef::double("x", 0.0, 1.0)]).unwrap();
        let obj = Objective::single(|p| {
            let x = p.num(0).unwrap();
            2.0 * x * (14.0 * x).sin()
        });
        OptimInstance::new(obj, space, Terminator::Evals(limit)).with_clock(Clock::Logical)
    }

    #[test]
    fn sinusoidal_archive_printout() {
        let mut inst = sinus_instance(20);
        let pts: Vec<Point> = [0.1, 0.34, 0.65, 1.0]
            .iter()
            .map(|&x| Point::from_nums(&[x]))
            .collect();
        inst.eval_batch(&pts).unwrap();
        let ys: Vec<f64> = inst.archive().rows().iter().map(|r| r.y[0]).collect();
        let expected = [0.1970899, -0.6792294, 0.4148279, 1.9812147];
        for (y, e) in ys.iter().zip(expected) {
            assert!((y - e).abs() < 5e-8, "{y} vs {e}");
        }
        assert!(inst.archive().rows().iter().all(|r| r.batch_nr == 1));
        assert_eq!(inst.archive().best_value(0), Some(ys[1]));
    }

    #[test]
    fn empty_batch_is_noop() {
        let mut inst = sinus_instance(1);
        assert_eq!(inst.eval_batch(&[]).unwrap(), Vec::<usize>::new());
        assert!(inst.archive().is_empty());
    }

    #[test]
    fn batch_after_termination_is_rejected() {
        let mut inst = sinus_instance(1);
        inst.eval_batch(&[Point::from_nums(&[0.5])]).unwrap();
        assert_eq!(
            inst.eval_batch(&[Point::from_nums(&[0.2])]),
            Err(EngineError::Terminated)
        );
    }

    #[test]
    fn invalid_points_are_rejected() {
        let mut inst = sinus_instance(5);
        assert!(matches!(
            inst.eval_batch(&[Point::from_nums(&[2.0])]),
            Err(EngineError::InvalidPoint { .. })
        ));
    }

    #[test]
    fn failures_are_imputed_without_aborting() {
        let space = ParamSpace::new(vec![ParamDef::double("x", 0.0, 1.0)]).unwrap();
        let obj = Objective::new(vec![Target::minimize("y")], |p| {
            let x = p.num(0).unwrap();
            if x > 0.9 {
                Err(EvalFailure("crash".into()))
            } else {
                Ok(vec![x])
            }
        });
        let mut inst = OptimInstance::new(obj, space, Terminator::Evals(10));
        let pts: Vec<Point> = [0.2, 0.6, 0.95, 0.4]
            .iter()
            .map(|&x| Point::from_nums(&[x]))
            .collect();
        inst.eval_batch(&pts).unwrap();
        let rows = inst.archive().rows();
        assert_eq!(rows.len(), 4);
        assert!(rows[2].failed);
        // max 0.6 plus range 0.4
        assert!((rows[2].y[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn maximized_targets_are_negated_internally() {
        let space = ParamSpace::new(vec![ParamDef::double("x", 0.0, 1.0)]).unwrap();
        let obj = Objective::new(vec![Target::maximize("acc")], |p| Ok(vec![p.num(0).unwrap()]));
        let mut inst = OptimInstance::new(obj, space, Terminator::Evals(10));
        inst.eval_batch(&[Point::from_nums(&[0.2]), Point::from_nums(&[0.7])])
            .unwrap();
        assert_eq!(inst.archive().best_value(0), Some(-0.7));
        assert_eq!(inst.archive().best_index(), Some(1));
    }

    #[test]
    fn parallel_batch_preserves_order() {
        let mut seq = sinus_instance(100);
        let mut par = sinus_instance(100);
        let pts: Vec<Point> = (0..13).map(|i| Point::from_nums(&[i as f64 / 13.0])).collect();
        seq.eval_batch(&pts).unwrap();
        par.eval_batch_with(&pts, 4).unwrap();
        assert_eq!(seq.archive().rows(), par.archive().rows());
    }
}
