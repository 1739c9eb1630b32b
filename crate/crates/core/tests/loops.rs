use mbo_core::acqopt::{AcqOptConfig, AcqOptKind};
use mbo_core::engine::{Clock, Objective, OptimInstance, Target, Terminator};
use mbo_core::loops::{run_ego, run_loop, run_mpcl, run_parego, run_smsego, Liar, LoopConfig, LoopKind};
use mbo_core::space::{ParamDef, ParamSpace, Point};
use mbo_core::surrogate::Faults;
use mbo_core::MboRng;
use rand::SeedableRng;

fn sinusoidal(limit: usize) -> OptimInstance {
    let space = ParamSpace::new(vec![ParamDef::double("x", 0.0, 1.0)]).unwrap();
    let obj = Objective::single(|p| {
        let x = p.num(0).unwrap();
        2.0 * x * (14.0 * x).sin()
    });
    OptimInstance::new(obj, space, Terminator::Evals(limit)).with_clock(Clock::Logical)
}

fn example_design() -> Vec<Point> {
    [0.1, 0.34, 0.65, 1.0].iter().map(|&x| Point::from_nums(&[x])).collect()
}

#[test]
fn sinusoidal_example_finds_the_global_minimum() {
    let cfg = LoopConfig::numeric_default().with_warmstart(example_design());
    let mut inst = sinusoidal(20);
    let out = run_ego(&mut inst, &cfg, &mut MboRng::seed_from_u64(7)).unwrap();
    assert_eq!(out.n_init_evals, 4);
    assert!(out.result.best_y().unwrap() <= -1.55);
    assert!((out.result.points[0].num(0).unwrap() - 0.792).abs() < 0.03);
}

#[test]
fn same_seed_same_archive() {
    let cfg = LoopConfig::numeric_default();
    let mut a = sinusoidal(10);
    let mut b = sinusoidal(10);
    run_ego(&mut a, &cfg, &mut MboRng::seed_from_u64(3)).unwrap();
    run_ego(&mut b, &cfg, &mut MboRng::seed_from_u64(3)).unwrap();
    assert_eq!(a.archive().rows(), b.archive().rows());
}

#[test]
fn mpcl_with_unit_batch_is_ego() {
    let ego_cfg = LoopConfig::numeric_default().with_warmstart(example_design());
    let mut mpcl_cfg = ego_cfg.clone().with_loop(LoopKind::Mpcl);
    mpcl_cfg.q = 1;
    let mut a = sinusoidal(14);
    let mut b = sinusoidal(14);
    run_ego(&mut a, &ego_cfg, &mut MboRng::seed_from_u64(11)).unwrap();
    run_mpcl(&mut b, &mpcl_cfg, &mut MboRng::seed_from_u64(11)).unwrap();
    assert_eq!(a.archive().rows(), b.archive().rows());
}

#[test]
fn liar_pushes_the_second_proposal_to_the_other_mode() {
    // symmetric data with two equally good basins around -0.5 and 0.5
    let space = ParamSpace::new(vec![ParamDef::double("x", -1.0, 1.0)]).unwrap();
    let obj = Objective::single(|p| {
        let x = p.num(0).unwrap();
        (x * x - 0.25).powi(2)
    });
    let mut inst = OptimInstance::new(obj, space, Terminator::Evals(7));
    let design: Vec<Point> = [-1.0, -0.6, 0.0, 0.6, 1.0].iter().map(|&x| Point::from_nums(&[x])).collect();
    let mut cfg = LoopConfig::numeric_default().with_loop(LoopKind::Mpcl).with_warmstart(design);
    cfg.init_size = Some(5);
    cfg.q = 2;
    cfg.liar = Liar::Min;
    run_mpcl(&mut inst, &cfg, &mut MboRng::seed_from_u64(1)).unwrap();
    let rows = inst.archive().rows();
    let (a, b) = (rows[5].point.num(0).unwrap(), rows[6].point.num(0).unwrap());
    assert!((a - b).abs() > cfg.acqopt.mutation_sd, "{a} vs {b}");
    assert!(inst.archive().rows().iter().all(|r| !r.in_flight));
}

#[test]
fn imputed_values_never_reach_the_archive() {
    for liar in [Liar::Min, Liar::Max, Liar::MeanPrediction] {
        let mut cfg = LoopConfig::numeric_default().with_loop(LoopKind::Mpcl);
        cfg.q = 3;
        cfg.liar = liar;
        let mut inst = sinusoidal(13);
        run_mpcl(&mut inst, &cfg, &mut MboRng::seed_from_u64(2)).unwrap();
        assert_eq!(inst.archive().len(), 13);
        for r in inst.archive().rows() {
            let x = r.point.num(0).unwrap();
            assert_eq!(r.y[0], 2.0 * x * (14.0 * x).sin());
        }
    }
}

#[test]
fn caught_faults_never_abort() {
    let fault_sets = [
        Faults { primary: true, fallback: false, predict: false },
        Faults { primary: true, fallback: true, predict: false },
        Faults { primary: false, fallback: false, predict: true },
    ];
    for faults in fault_sets {
        let mut cfg = LoopConfig::numeric_default();
        cfg.surrogate.faults = faults;
        let mut inst = sinusoidal(9);
        let out = run_ego(&mut inst, &cfg, &mut MboRng::seed_from_u64(5)).unwrap();
        assert_eq!(inst.archive().n_completed(), 9, "{faults:?}");
        assert_eq!(out.iterations.len(), 5);
    }
}

#[test]
fn mixed_default_handles_a_hierarchical_space() {
    let space = ParamSpace::new(vec![
        ParamDef::factor("branch", &["a", "b"]),
        ParamDef::double("u", -1.0, 1.0).depends_on("branch", "a"),
        ParamDef::integer("k", 0, 10).depends_on("branch", "b"),
    ])
    .unwrap();
    let obj = Objective::single(|p| match (p.num(1), p.num(2)) {
        (Some(u), _) => u * u,
        (_, Some(k)) => 0.5 + (k - 3.0).abs(),
        _ => unreachable!(),
    });
    let mut cfg = LoopConfig::default_for(&space);
    if let mbo_core::surrogate::ModelConfig::Forest(f) = &mut cfg.surrogate.model {
        f.n_trees = 50;
    }
    cfg.acqopt = AcqOptConfig::new(AcqOptKind::LocalSearch).with_budget(300);
    let mut inst = OptimInstance::new(obj, space.clone(), Terminator::Evals(20));
    let out = run_loop(&mut inst, &cfg, &mut MboRng::seed_from_u64(8)).unwrap();
    assert!(inst.archive().rows().iter().all(|r| space.is_valid(&r.point)));
    assert!(out.result.best_y().unwrap() < 0.1);
}

fn biobjective(limit: usize, f2: fn(f64) -> f64) -> OptimInstance {
    let space = ParamSpace::new(vec![ParamDef::double("x", 0.0, 1.0)]).unwrap();
    let obj = Objective::new(vec![Target::minimize("f1"), Target::minimize("f2")], move |p| {
        let x = p.num(0).unwrap();
        Ok(vec![x * x, f2(x)])
    });
    OptimInstance::new(obj, space, Terminator::Evals(limit)).with_clock(Clock::Logical)
}

#[test]
fn parego_with_unit_weights_follows_the_first_objective() {
    let mut cfg = LoopConfig::numeric_default().with_loop(LoopKind::Parego);
    cfg.parego_weights = Some(vec![1.0, 0.0]);
    let mut multi = biobjective(8, |x| (x - 1.0).powi(2));
    run_parego(&mut multi, &cfg, &mut MboRng::seed_from_u64(4)).unwrap();

    let space = ParamSpace::new(vec![ParamDef::double("x", 0.0, 1.0)]).unwrap();
    let mut single = OptimInstance::new(
        Objective::single(|p| p.num(0).unwrap().powi(2)),
        space,
        Terminator::Evals(8),
    );
    run_ego(&mut single, &cfg.clone().with_loop(LoopKind::Ego), &mut MboRng::seed_from_u64(4)).unwrap();
    // the scalarization is an affine map of f1, equal up to rounding
    for (a, b) in multi.archive().rows().iter().zip(single.archive().rows()) {
        assert!((a.point.num(0).unwrap() - b.point.num(0).unwrap()).abs() < 1e-6);
    }
}

#[test]
fn smsego_with_a_constant_objective_minimizes_the_other() {
    let cfg = LoopConfig::numeric_default().with_loop(LoopKind::Smsego);
    let mut inst = biobjective(15, |_| 1.0);
    let out = run_smsego(&mut inst, &cfg, &mut MboRng::seed_from_u64(6)).unwrap();
    // repeated evaluations of the minimizer tie on the front
    let x0 = out.result.points[0].num(0).unwrap();
    assert!(out.result.points.iter().all(|p| p.num(0) == Some(x0)));
    assert!(out.result.ys[0][0] < 1e-3);
}

#[test]
fn warm_archive_at_init_size_spends_nothing_on_design() {
    let mut inst = sinusoidal(8);
    inst.eval_batch(&example_design()).unwrap();
    let out = run_ego(&mut inst, &LoopConfig::numeric_default(), &mut MboRng::seed_from_u64(9)).unwrap();
    assert_eq!(out.n_init_evals, 0);
    assert_eq!(out.iterations.len(), 4);
}
