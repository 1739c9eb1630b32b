use std::collections::HashSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use mbo_core::acquisition::AcqKind;
use mbo_core::engine::{Archive, Clock, Objective, OptimInstance, Target, Terminator};
use mbo_core::loops::{run_ego, LoopConfig};
use mbo_core::parallel::{
    replay_publish_log, run_async, worker_seed, AsyncConfig, EventKind, SharedArchive, WorkerCrash,
};
use mbo_core::space::{ParamDef, ParamSpace, Point};
use mbo_core::MboRng;
use rand::SeedableRng;

fn space() -> ParamSpace {
    ParamSpace::new(vec![ParamDef::double("x", 0.0, 1.0)]).unwrap()
}

fn sinusoidal(limit: usize) -> OptimInstance {
    let obj = Objective::single(|p| {
        let x = p.num(0).unwrap();
        2.0 * x * (14.0 * x).sin()
    });
    OptimInstance::new(obj, space(), Terminator::Evals(limit)).with_clock(Clock::Logical)
}

fn example_design() -> Vec<Point> {
    [0.1, 0.34, 0.65, 1.0].iter().map(|&x| Point::from_nums(&[x])).collect()
}

#[test]
fn single_worker_matches_sequential_lcb() {
    let seq_cfg = LoopConfig::numeric_default().with_warmstart(example_design());
    let mut async_cfg = AsyncConfig::default_for(&space(), 1);
    async_cfg.loop_config.warmstart_design = example_design();
    async_cfg.loop_config.acq.lambda_range = (3.0, 3.0);
    assert_eq!(async_cfg.loop_config.acq.kind, AcqKind::StochasticCb);

    let master = 42;
    let mut a = sinusoidal(12);
    let mut b = sinusoidal(12);
    run_ego(&mut a, &seq_cfg, &mut MboRng::seed_from_u64(worker_seed(master, 0))).unwrap();
    let out = run_async(&mut b, &async_cfg, master).unwrap();
    assert_eq!(out.worker_lambdas, vec![3.0]);
    assert_eq!(a.archive().rows(), b.archive().rows());
}

#[test]
fn four_workers_respect_the_budget_and_replay() {
    let cfg = AsyncConfig::default_for(&space(), 4);
    let mut inst = sinusoidal(24);
    let out = run_async(&mut inst, &cfg, 5).unwrap();
    let n = inst.archive().n_completed();
    assert!((24..=27).contains(&n), "{n}");
    assert_eq!(inst.archive().n_in_flight(), 0);

    let l = &out.worker_lambdas;
    for i in 0..l.len() {
        for j in i + 1..l.len() {
            assert_ne!(l[i], l[j]);
        }
    }

    let completes: Vec<u64> = out.log.iter().filter(|e| e.kind == EventKind::Complete).map(|e| e.claim).collect();
    assert_eq!(completes.iter().collect::<HashSet<_>>().len(), completes.len());
    let claims: HashSet<u64> = out.log.iter().filter(|e| e.kind == EventKind::Claim).map(|e| e.claim).collect();
    assert_eq!(claims.len(), completes.len());

    let empty = Archive::new(vec![Target::minimize("y")]).with_clock(Clock::Logical);
    let replayed = replay_publish_log(&empty, &out.log).unwrap();
    assert_eq!(replayed.rows(), inst.archive().rows());
}

#[test]
fn a_crashed_worker_does_not_stall_the_run() {
    let mut cfg = AsyncConfig::default_for(&space(), 3);
    cfg.crash = Some(WorkerCrash { worker: 1, on_claim: 3 });
    let mut inst = sinusoidal(20);
    let out = run_async(&mut inst, &cfg, 9).unwrap();
    assert_eq!(out.crashed, vec![1]);
    assert!(inst.archive().n_completed() >= 20);
    assert!(out.log.iter().any(|e| e.kind == EventKind::Release));
    let empty = Archive::new(vec![Target::minimize("y")]).with_clock(Clock::Logical);
    assert_eq!(replay_publish_log(&empty, &out.log).unwrap().rows(), inst.archive().rows());
}

#[test]
fn panicking_objective_is_retried_elsewhere() {
    let calls = Arc::new(AtomicUsize::new(0));
    let c = calls.clone();
    let obj = Objective::single(move |p| {
        if c.fetch_add(1, Ordering::SeqCst) == 6 {
            panic!("objective crashed");
        }
        p.num(0).unwrap()
    });
    let mut inst = OptimInstance::new(obj, space(), Terminator::Evals(15));
    let out = run_async(&mut inst, &AsyncConfig::default_for(&space(), 2), 1).unwrap();
    assert_eq!(out.crashed.len(), 1);
    assert!(inst.archive().n_completed() >= 15);
}

#[test]
fn snapshots_are_never_torn() {
    // each completed row carries y = 3x + 1; a torn read would break it
    let shared = Arc::new(SharedArchive::new(Archive::new(vec![Target::minimize("y")])));
    let writer = {
        let shared = shared.clone();
        std::thread::spawn(move || {
            for i in 0..2000 {
                let x = i as f64 / 2000.0;
                let c = shared.claim(Point::from_nums(&[x]), 1, 0);
                shared.publish(c, 0, Ok(vec![3.0 * x + 1.0]));
            }
        })
    };
    let mut torn = 0;
    for _ in 0..100 {
        let snap = shared.snapshot();
        for r in snap.rows() {
            let x = r.point.num(0).unwrap();
            if r.in_flight {
                torn += usize::from(!r.y[0].is_nan());
            } else {
                torn += usize::from(r.y[0] != 3.0 * x + 1.0);
            }
        }
        torn += usize::from(snap.n_in_flight() > 1);
    }
    writer.join().unwrap();
    assert_eq!(torn, 0);
    assert_eq!(shared.snapshot().n_completed(), 2000);
}
