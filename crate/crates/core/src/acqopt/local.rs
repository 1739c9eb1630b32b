use rand::Rng;

use super::{AcqOptConfig, AcqOptError, Candidate, Meter, ScoreFn};
use crate::space::{sample_random, ParamSpace, Point};
use crate::MboRng;

/// One neighbour of `p`: a single active parameter is mutated, then the
/// dependencies are re-checked in topological order.
pub(crate) fn neighbour(space: &ParamSpace, p: &Point, sd: f64, rng: &mut MboRng) -> Point {
    let active: Vec<usize> = (0..space.dim()).filter(|&i| p.values[i].is_some()).collect();
    let mut values = p.values.clone();
    if let Some(&i) = active.get(rng.random_range(0..active.len().max(1))) {
        let v = values[i].expect("active parameter has a value");
        values[i] = Some(space.param(i).mutate(&v, sd, rng));
        space.repair(&mut values, rng);
    }
    Point::new(values)
}

struct Run {
    point: Point,
    value: f64,
    stagnant: usize,
}

/// Concurrent restarted local searches, scored one batch per iteration.
///
/// The `n_ls_runs` searches start from the best points of an initial
/// uniform sample; see [`AcqOptConfig::ls_init_size`].
pub fn optimize_local_search(
    space: &ParamSpace,
    cfg: &AcqOptConfig,
    score: &mut ScoreFn<'_>,
    rng: &mut MboRng,
) -> Result<Candidate, AcqOptError> {
    cfg.validate()?;
    let budget = cfg.resolved_budget(space.dim());
    let mut meter = Meter::new(score, budget, cfg.catch_errors);

    // runs start from the best points of an initial random sample
    let n_init = cfg
        .ls_init_size
        .unwrap_or_else(|| (10 * cfg.n_ls_runs).min(budget / 4))
        .max(cfg.n_ls_runs)
        .min(budget);
    let init = sample_random(space, n_init, rng);
    let values = meter.eval(&init)?;
    let mut order: Vec<usize> = (0..init.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let mut runs: Vec<Run> = order
        .into_iter()
        .take(cfg.n_ls_runs)
        .map(|i| Run {
            point: init[i].clone(),
            value: values[i],
            stagnant: 0,
        })
        .collect();

    while meter.remaining() > 0 {
        let mut batch = Vec::with_capacity(runs.len() * cfg.n_neighbors);
        for r in &runs {
            for _ in 0..cfg.n_neighbors {
                batch.push(neighbour(space, &r.point, cfg.mutation_sd, rng));
            }
        }
        let vals = meter.eval(&batch)?;
        let mut restarts = Vec::new();
        for (k, run) in runs.iter_mut().enumerate() {
            let lo = k * cfg.n_neighbors;
            if lo >= vals.len() {
                break;
            }
            let hi = (lo + cfg.n_neighbors).min(vals.len());
            let mut best = lo;
            for j in lo + 1..hi {
                if vals[j] > vals[best] {
                    best = j;
                }
            }
            if vals[best] > run.value {
                run.point = batch[best].clone();
                run.value = vals[best];
                run.stagnant = 0;
            } else {
                run.stagnant += 1;
                if run.stagnant >= cfg.stagnation_restart {
                    restarts.push(k);
                }
            }
        }
        if !restarts.is_empty() && meter.remaining() > 0 {
            let fresh = sample_random(space, restarts.len(), rng);
            let vals = meter.eval(&fresh)?;
            for ((&k, p), v) in restarts.iter().zip(fresh).zip(vals) {
                runs[k] = Run {
                    point: p,
                    value: v,
                    stagnant: 0,
                };
            }
        }
    }
    meter.into_best()
}
