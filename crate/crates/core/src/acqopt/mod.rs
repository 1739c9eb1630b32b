//! Inner optimizers maximizing an acquisition function over the search
//! space: random search, local search and CMA-ES.

mod cmaes;
mod local;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cmaes::optimize_cmaes;
pub use local::optimize_local_search;

use crate::acquisition::AcqError;
use crate::space::{sample_random, ParamSpace, Point};
use crate::MboRng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AcqOptError {
    #[error("invalid optimizer configuration: {0}")]
    Config(String),
    /// Scoring failed and errors are caught; the loop proposes a random point.
    #[error("acquisition optimization failed, random proposal requested: {0}")]
    RandomFallback(String),
    #[error(transparent)]
    Acq(#[from] AcqError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcqOptKind {
    RandomSearch,
    #[serde(rename = "rs1000", alias = "random_search_1000")]
    Rs1000,
    LocalSearch,
    Cmaes,
}

impl AcqOptKind {
    pub fn key(self) -> &'static str {
        match self {
            AcqOptKind::RandomSearch => "random_search",
            AcqOptKind::Rs1000 => "rs1000",
            AcqOptKind::LocalSearch => "local_search",
            AcqOptKind::Cmaes => "cmaes",
        }
    }

    pub fn from_key(key: &str) -> Option<AcqOptKind> {
        match key {
            "random_search" => Some(AcqOptKind::RandomSearch),
            "rs1000" | "random_search_1000" => Some(AcqOptKind::Rs1000),
            "local_search" => Some(AcqOptKind::LocalSearch),
            "cmaes" => Some(AcqOptKind::Cmaes),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcqOptConfig {
    pub kind: AcqOptKind,
    /// Acquisition evaluations; `None` means `100 * d^2`.
    pub budget: Option<usize>,
    pub budget_cap: usize,
    pub n_ls_runs: usize,
    /// Size of the uniform sample whose best points seed the local searches;
    /// `None` means `min(10 * n_ls_runs, budget / 4)`, at least `n_ls_runs`.
    pub ls_init_size: Option<usize>,
    pub n_neighbors: usize,
    /// Gaussian step on the unit scale for numeric mutations.
    pub mutation_sd: f64,
    /// Iterations without improvement before a local search restarts.
    pub stagnation_restart: usize,
    /// Initial CMA-ES step size on the unit cube.
    pub cmaes_sigma0: f64,
    pub catch_errors: bool,
}

impl Default for AcqOptConfig {
    fn default() -> Self {
        AcqOptConfig {
            kind: AcqOptKind::RandomSearch,
            budget: None,
            budget_cap: 10_000,
            n_ls_runs: 10,
            ls_init_size: None,
            n_neighbors: 10,
            mutation_sd: 0.1,
            stagnation_restart: 10,
            cmaes_sigma0: 0.3,
            catch_errors: true,
        }
    }
}

impl AcqOptConfig {
    pub fn new(kind: AcqOptKind) -> Self {
        AcqOptConfig {
            kind,
            ..AcqOptConfig::default()
        }
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = Some(budget);
        self
    }

    /// Evaluation budget for a space of dimension `d`. `rs1000` is fixed at
    /// 1000 unless a budget is set explicitly.
    pub fn resolved_budget(&self, d: usize) -> usize {
        match (self.kind, self.budget) {
            (_, Some(b)) => b,
            (AcqOptKind::Rs1000, None) => 1000,
            (_, None) => (100 * d * d).min(self.budget_cap),
        }
        .max(1)
    }

    pub fn validate(&self) -> Result<(), AcqOptError> {
        if self.budget == Some(0) {
            return Err(AcqOptError::Config("budget must be at least 1".into()));
        }
        if !(self.mutation_sd > 0.0) {
            return Err(AcqOptError::Config(format!(
                "mutation_sd must be positive, got {}",
                self.mutation_sd
            )));
        }
        if self.n_ls_runs == 0 || self.n_neighbors == 0 {
            return Err(AcqOptError::Config("local search needs runs and neighbors".into()));
        }
        if !(self.cmaes_sigma0 > 0.0) {
            return Err(AcqOptError::Config("cmaes_sigma0 must be positive".into()));
        }
        Ok(())
    }
}

/// Proposed point and its acquisition value.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub point: Point,
    pub acq_value: f64,
}

/// Acquisition evaluator for a batch of points.
pub type ScoreFn<'a> = dyn FnMut(&[Point]) -> Result<Vec<f64>, AcqError> + 'a;

/// Budget-metered wrapper around a [`ScoreFn`] that remembers the best
/// point seen. Ties keep the earliest evaluation.
pub(crate) struct Meter<'a, 'b> {
    score: &'a mut ScoreFn<'b>,
    pub used: usize,
    pub budget: usize,
    catch_errors: bool,
    best: Option<Candidate>,
}

impl<'a, 'b> Meter<'a, 'b> {
    pub fn new(score: &'a mut ScoreFn<'b>, budget: usize, catch_errors: bool) -> Self {
        Meter {
            score,
            used: 0,
            budget,
            catch_errors,
            best: None,
        }
    }

    pub fn remaining(&self) -> usize {
        self.budget - self.used
    }

    /// Scores as many of `points` as the budget allows.
    pub fn eval(&mut self, points: &[Point]) -> Result<Vec<f64>, AcqOptError> {
        let n = points.len().min(self.remaining());
        if n == 0 {
            return Ok(Vec::new());
        }
        let vals = (self.score)(&points[..n]).map_err(|e| {
            if self.catch_errors {
                AcqOptError::RandomFallback(e.to_string())
            } else {
                AcqOptError::Acq(e)
            }
        })?;
        self.used += n;
        let vals: Vec<f64> = vals
            .into_iter()
            .map(|v| if v.is_nan() { f64::NEG_INFINITY } else { v })
            .collect();
        for (p, &v) in points.iter().zip(&vals) {
            if self.best.as_ref().is_none_or(|b| v > b.acq_value) {
                self.best = Some(Candidate {
                    point: p.clone(),
                    acq_value: v,
                });
            }
        }
        Ok(vals)
    }

    pub fn into_best(self) -> Result<Candidate, AcqOptError> {
        self.best
            .ok_or_else(|| AcqOptError::Config("no acquisition evaluations were made".into()))
    }
}

/// Runs the configured optimizer.
pub fn optimize(
    space: &ParamSpace,
    cfg: &AcqOptConfig,
    score: &mut ScoreFn<'_>,
    rng: &mut MboRng,
) -> Result<Candidate, AcqOptError> {
    cfg.validate()?;
    match cfg.kind {
        AcqOptKind::RandomSearch | AcqOptKind::Rs1000 => {
            optimize_random(space, cfg.resolved_budget(space.dim()), cfg.catch_errors, score, rng)
        }
        AcqOptKind::LocalSearch => optimize_local_search(space, cfg, score, rng),
        AcqOptKind::Cmaes => optimize_cmaes(space, cfg, score, rng),
    }
}

const RS_BATCH: usize = 1000;

/// Scores `budget` uniform random points and returns the best.
pub fn optimize_random(
    space: &ParamSpace,
    budget: usize,
    catch_errors: bool,
    score: &mut ScoreFn<'_>,
    rng: &mut MboRng,
) -> Result<Candidate, AcqOptError> {
    if budget == 0 {
        return Err(AcqOptError::Config("budget must be at least 1".into()));
    }
    let mut meter = Meter::new(score, budget, catch_errors);
    while meter.remaining() > 0 {
        let pts = sample_random(space, meter.remaining().min(RS_BATCH), rng);
        meter.eval(&pts)?;
    }
    meter.into_best()
}
