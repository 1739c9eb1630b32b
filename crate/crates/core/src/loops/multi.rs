use super::{
    evaluate_init, min_of, propose, single_objective_acq, submit, IterationRecord, LoopConfig, LoopError,
    LoopOutcome,
};
use crate::acquisition::{parego_scalarize, sample_simplex, AcqConfig, AcqContext, AcqKind, Acquisition, PAREGO_RHO};
use crate::engine::{pareto_front, OptimInstance};
use crate::pareto::non_dominated_indices;
use crate::MboRng;

fn multi_objective_check(instance: &OptimInstance) -> Result<usize, LoopError> {
    let k = instance.objective().n_objectives();
    if k < 2 {
        return Err(LoopError::Config(format!("loop needs at least 2 objectives, got {k}")));
    }
    Ok(k)
}

fn column_bounds(ys: &[Vec<f64>], j: usize) -> (f64, f64) {
    ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), y| (lo.min(y[j]), hi.max(y[j])))
}

/// Reference point for the hypervolume: per-objective maximum plus a tenth
/// of the observed range, or plus one when the range is degenerate.
pub fn smsego_reference(ys: &[Vec<f64>]) -> Vec<f64> {
    let k = ys.first().map_or(0, Vec::len);
    (0..k)
        .map(|j| {
            let (lo, hi) = column_bounds(ys, j);
            let range = hi - lo;
            hi + if range > 0.0 { 0.1 * range } else { 1.0 }
        })
        .collect()
}

/// ParEGO: every iteration scalarizes the normalized objectives with fresh
/// simplex weights and runs one single-objective proposal on the result.
/// Returns the Pareto front of the archive.
pub fn run_parego(
    instance: &mut OptimInstance,
    config: &LoopConfig,
    rng: &mut MboRng,
) -> Result<LoopOutcome, LoopError> {
    config.validate()?;
    let k = multi_objective_check(instance)?;
    if let Some(w) = &config.parego_weights {
        parego_scalarize(&vec![0.0; w.len()], w, PAREGO_RHO)?;
        if w.len() != k {
            return Err(LoopError::Config(format!("{} weights for {k} objectives", w.len())));
        }
    }
    let n_init_evals = evaluate_init(instance, config, rng)?;
    let mut acq = single_objective_acq(config, rng)?;
    let mut iterations: Vec<IterationRecord> = Vec::new();
    while !instance.is_terminated() {
        let iteration = iterations.len() + 1;
        let weights = match &config.parego_weights {
            Some(w) => w.clone(),
            None => sample_simplex(k, rng),
        };
        let archive = instance.archive();
        let points: Vec<_> = archive.completed().map(|r| r.point.clone()).collect();
        let ys: Vec<Vec<f64>> = archive.completed().map(|r| archive.y_min(r)).collect();
        let bounds: Vec<(f64, f64)> = (0..k).map(|j| column_bounds(&ys, j)).collect();
        let scalar = ys
            .iter()
            .map(|y| {
                let unit: Vec<f64> = y
                    .iter()
                    .zip(&bounds)
                    .map(|(v, (lo, hi))| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 })
                    .collect();
                parego_scalarize(&unit, &weights, PAREGO_RHO)
            })
            .collect::<Result<Vec<f64>, _>>()?;
        let ctx = AcqContext {
            f_min: min_of(&scalar),
            iteration: iteration - 1,
            remaining: instance.remaining_evals().unwrap_or(0),
            ..AcqContext::default()
        };
        let p = propose(instance.space(), config, &mut acq, &points, &[scalar], ctx, iteration, rng)?;
        iterations.push(p.record);
        if !submit(instance, &[p.point], 1)? {
            break;
        }
    }
    Ok(LoopOutcome {
        result: pareto_front(instance.archive()),
        iterations,
        n_init_evals,
    })
}

/// SMS-EGO: one surrogate per objective, proposals maximize the optimistic
/// hypervolume improvement over the current front. Returns the Pareto front
/// of the archive.
pub fn run_smsego(
    instance: &mut OptimInstance,
    config: &LoopConfig,
    rng: &mut MboRng,
) -> Result<LoopOutcome, LoopError> {
    config.validate()?;
    let k = multi_objective_check(instance)?;
    let n_init_evals = evaluate_init(instance, config, rng)?;
    let acq_cfg = AcqConfig {
        kind: AcqKind::Smsego,
        ..config.acq.clone()
    };
    let mut acq = Acquisition::new(acq_cfg, rng)?;
    let mut iterations: Vec<IterationRecord> = Vec::new();
    while !instance.is_terminated() {
        let iteration = iterations.len() + 1;
        let archive = instance.archive();
        let points: Vec<_> = archive.completed().map(|r| r.point.clone()).collect();
        let ys: Vec<Vec<f64>> = archive.completed().map(|r| archive.y_min(r)).collect();
        let targets: Vec<Vec<f64>> = (0..k).map(|j| ys.iter().map(|y| y[j]).collect()).collect();
        let ctx = AcqContext {
            f_min: min_of(&targets[0]),
            iteration: iteration - 1,
            front: non_dominated_indices(&ys).into_iter().map(|i| ys[i].clone()).collect(),
            reference: smsego_reference(&ys),
            remaining: instance.remaining_evals().unwrap_or(0),
        };
        let p = propose(instance.space(), config, &mut acq, &points, &targets, ctx, iteration, rng)?;
        iterations.push(p.record);
        if !submit(instance, &[p.point], 1)? {
            break;
        }
    }
    Ok(LoopOutcome {
        result: pareto_front(instance.archive()),
        iterations,
        n_init_evals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acqopt::{AcqOptConfig, AcqOptKind};
    use crate::engine::{Objective, Target, Terminator};
    use crate::pareto::hypervolume;
    use crate::space::{ParamDef, ParamSpace};
    use rand::SeedableRng;

    fn biobjective(limit: usize) -> OptimInstance {
        let space = ParamSpace::new(vec![ParamDef::double("x", 0.0, 1.0)]).unwrap();
        let obj = Objective::new(vec![Target::minimize("f1"), Target::minimize("f2")], |p| {
            let x = p.num(0).unwrap();
            Ok(vec![x * x, (x - 1.0) * (x - 1.0)])
        });
        OptimInstance::new(obj, space, Terminator::Evals(limit))
    }

    fn fast(kind: super::super::LoopKind) -> LoopConfig {
        let mut cfg = LoopConfig::numeric_default().with_loop(kind);
        cfg.acqopt = AcqOptConfig::new(AcqOptKind::RandomSearch).with_budget(300);
        cfg
    }

    #[test]
    fn reference_adds_a_tenth_of_the_range() {
        let r = smsego_reference(&[vec![0.0, 2.0], vec![1.0, 2.0]]);
        assert_eq!(r, vec![1.1, 3.0]);
    }

    #[test]
    fn smsego_hypervolume_never_decreases() {
        let mut inst = biobjective(16);
        run_smsego(&mut inst, &fast(super::super::LoopKind::Smsego), &mut MboRng::seed_from_u64(1)).unwrap();
        let ys: Vec<Vec<f64>> = inst.archive().completed().map(|r| r.y.clone()).collect();
        let mut last = 0.0;
        for t in 1..=ys.len() {
            let hv = hypervolume(&ys[..t], &[1.1, 1.1]);
            assert!(hv >= last);
            last = hv;
        }
    }

    #[test]
    fn identical_objectives_collapse_the_front() {
        let space = ParamSpace::new(vec![ParamDef::double("x", 0.0, 1.0)]).unwrap();
        let obj = Objective::new(vec![Target::minimize("a"), Target::minimize("b")], |p| {
            let x = p.num(0).unwrap();
            Ok(vec![(x - 0.3).powi(2), (x - 0.3).powi(2)])
        });
        let mut inst = OptimInstance::new(obj, space, Terminator::Evals(10));
        let out = run_parego(&mut inst, &fast(super::super::LoopKind::Parego), &mut MboRng::seed_from_u64(2)).unwrap();
        assert_eq!(out.result.points.len(), 1);
        let best = inst.archive().best_value(0).unwrap();
        assert_eq!(out.result.ys[0][0], best);
    }

    #[test]
    fn single_objective_instance_is_rejected() {
        let space = ParamSpace::new(vec![ParamDef::double("x", 0.0, 1.0)]).unwrap();
        let mut inst = OptimInstance::new(Objective::single(|p| p.num(0).unwrap()), space, Terminator::Evals(5));
        assert!(matches!(
            run_parego(&mut inst, &fast(super::super::LoopKind::Parego), &mut MboRng::seed_from_u64(2)),
            Err(LoopError::Config(_))
        ));
    }
}
