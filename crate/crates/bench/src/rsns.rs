//! Random-search-normalized score.
//!
//! A run scores 0 when it is as good as random search at the run's budget
//! and 1 when it matches a long random search; the map is affine in the
//! objective value.

use mbo_core::space::sample_random;
use mbo_core::MboRng;
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::problems::BenchProblem;
use crate::BenchError;

/// How the small random searches are cut out of the long trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubsampleMode {
    /// Random subsets drawn without replacement.
    #[default]
    Random,
    /// Consecutive blocks of the trace.
    Contiguous,
}

/// Anchors of the score on the problem's minimization scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RsnsScale {
    /// Mean best value of small random searches.
    pub v0: f64,
    /// Best value of the long random search.
    pub v1: f64,
    /// Standard error of `v0` over the subsamples.
    pub v0_se: f64,
    pub small_budget: usize,
    pub long_budget: usize,
}

impl RsnsScale {
    pub fn validate(&self) -> Result<(), BenchError> {
        if !(self.v1 < self.v0) {
            return Err(BenchError::DegenerateScale {
                v0: self.v0,
                v1: self.v1,
            });
        }
        Ok(())
    }
}

/// `(v0 - best) / (v0 - v1)`: 0 at `v0`, 1 at `v1`, above 1 beyond.
pub fn rsns(best: f64, scale: &RsnsScale) -> Result<f64, BenchError> {
    scale.validate()?;
    Ok((scale.v0 - best) / (scale.v0 - scale.v1))
}

/// Objective values of `n` uniform random points, in evaluation order.
pub fn random_search_values(problem: &BenchProblem, n: usize, rng: &mut MboRng) -> Result<Vec<Vec<f64>>, BenchError> {
    let signs: Vec<f64> = problem.objective.codomain().iter().map(|t| t.direction.sign()).collect();
    sample_random(&problem.space, n, rng)
        .iter()
        .map(|p| {
            let y = problem.objective.eval(p).map_err(|e| BenchError::Runtime(e.to_string()))?;
            Ok(y.iter().zip(&signs).map(|(v, s)| v * s).collect())
        })
        .collect()
}

/// Builds the scale from one long random search of `long_budget` points and
/// `n_subsamples` small searches of `small_budget` points taken from it.
pub fn build_scale(
    problem: &BenchProblem,
    long_budget: usize,
    small_budget: usize,
    n_subsamples: usize,
    mode: SubsampleMode,
    rng: &mut MboRng,
) -> Result<RsnsScale, BenchError> {
    let ys = random_search_values(problem, long_budget, rng)?;
    build_scale_from_values(problem, &ys, small_budget, n_subsamples, mode, rng)
}

/// Builds the scale from stored random-search values (minimization scale).
pub fn build_scale_from_values(
    problem: &BenchProblem,
    ys: &[Vec<f64>],
    small_budget: usize,
    n_subsamples: usize,
    mode: SubsampleMode,
    rng: &mut MboRng,
) -> Result<RsnsScale, BenchError> {
    let long = ys.len();
    if small_budget == 0 || small_budget > long || n_subsamples == 0 {
        return Err(BenchError::Config(format!(
            "need 0 < small budget ({small_budget}) <= long budget ({long}) and at least one subsample"
        )));
    }
    if mode == SubsampleMode::Contiguous && small_budget * n_subsamples > long {
        return Err(BenchError::Config(format!(
            "{n_subsamples} contiguous blocks of {small_budget} do not fit into {long} values"
        )));
    }
    let v1 = problem.score(ys);
    let bests: Vec<f64> = (0..n_subsamples)
        .map(|i| {
            let rows: Vec<Vec<f64>> = match mode {
                SubsampleMode::Random => index::sample(rng, long, small_budget)
                    .into_iter()
                    .map(|k| ys[k].clone())
                    .collect(),
                SubsampleMode::Contiguous => ys[i * small_budget..(i + 1) * small_budget].to_vec(),
            };
            problem.score(&rows)
        })
        .collect();
    let (v0, sd) = mean_sd(&bests);
    Ok(RsnsScale {
        v0,
        v1,
        v0_se: sd / (n_subsamples as f64).sqrt(),
        small_budget,
        long_budget: long,
    })
}

/// Mean and sample standard deviation (0 for fewer than two values).
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.iter().all(|&x| x == xs[0]) {
        // exact for constant input, where rounding would leave a residue
        return (xs[0], 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Monte-Carlo standard deviation of the mean of `n_draw` values drawn
/// without replacement from `pool`, over `n_repeats` draws.
pub fn rsns_std_from_pool(pool: &[f64], n_draw: usize, n_repeats: usize, rng: &mut MboRng) -> Result<f64, BenchError> {
    if n_draw == 0 || n_draw > pool.len() || n_repeats < 2 {
        return Err(BenchError::Config(format!(
            "need 0 < draws ({n_draw}) <= pool ({}) and at least two repeats",
            pool.len()
        )));
    }
    let means: Vec<f64> = (0..n_repeats)
        .map(|_| {
            // a full draw is the whole pool; summing in pool order keeps it exact
            let mut idx = index::sample(rng, pool.len(), n_draw).into_vec();
            idx.sort_unstable();
            idx.iter().map(|&k| pool[k]).sum::<f64>() / n_draw as f64
        })
        .collect();
    Ok(mean_sd(&means).1)
}
