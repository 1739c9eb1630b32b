//! Decentralized asynchronous BO: workers share one archive, each fits its
//! own surrogate on completed plus liar-imputed in-flight rows and proposes
//! with its own stochastic acquisition.

mod shared;

use std::time::Duration;

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

pub use shared::{
    read_publish_log, replay_publish_log, snapshot_with_imputation, write_publish_log, EventKind, PublishEvent,
    SharedArchive,
};

use crate::acquisition::{AcqConfig, AcqContext, AcqKind};
use crate::engine::{assign_result, Archive, OptimInstance, OptimResult};
use crate::loops::{pending_init_design, propose, single_objective_acq, IterationRecord, Liar, LoopConfig, LoopError};
use crate::space::{ParamSpace, Point};
use crate::{derive_seed, MboRng};

/// Forced crash of one worker while it evaluates its `on_claim`-th point
/// (1-based), for liveness tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkerCrash {
    pub worker: usize,
    pub on_claim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsyncConfig {
    pub n_workers: usize,
    /// Initial design evaluated cooperatively; the loop's init size when
    /// `None`.
    pub design_size: Option<usize>,
    /// Surrogate, acquisition, optimizer, liar and design settings. The
    /// acquisition should be stochastic so that workers propose differently.
    pub loop_config: LoopConfig,
    pub crash: Option<WorkerCrash>,
}

impl AsyncConfig {
    /// Default loop for `space` with a stochastic confidence bound whose
    /// multiplier each worker draws log-uniformly from `[1, 10]`.
    pub fn default_for(space: &ParamSpace, n_workers: usize) -> Self {
        let mut loop_config = LoopConfig::default_for(space);
        loop_config.acq = AcqConfig {
            kind: AcqKind::StochasticCb,
            lambda_range: (1.0, 10.0),
            ..loop_config.acq
        };
        AsyncConfig {
            n_workers,
            design_size: None,
            loop_config,
            crash: None,
        }
    }

    pub fn validate(&self) -> Result<(), LoopError> {
        if self.n_workers == 0 {
            return Err(LoopError::Config("need at least one worker".into()));
        }
        if self.design_size.is_some_and(|n| n < 2) {
            return Err(LoopError::Config("design_size must be at least 2".into()));
        }
        self.loop_config.validate()
    }
}

/// Seed of worker `index` for a run with `master_seed`.
pub fn worker_seed(master_seed: u64, index: usize) -> u64 {
    derive_seed(master_seed, index as u64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsyncOutcome {
    pub result: OptimResult,
    /// Every claim, completion and release in application order.
    pub log: Vec<PublishEvent>,
    /// Confidence multiplier drawn by each worker.
    pub worker_lambdas: Vec<f64>,
    /// BO iterations as `(worker, record)`.
    pub iterations: Vec<(usize, IterationRecord)>,
    /// Workers that panicked; their claims were released.
    pub crashed: Vec<usize>,
}

enum Task {
    Stop,
    Evaluate(u64, Point),
    Propose {
        points: Vec<Point>,
        y: Vec<f64>,
        remaining: usize,
    },
}

/// Releases the worker's open claim if it unwinds mid-evaluation.
struct ClaimGuard<'a> {
    shared: &'a SharedArchive,
    worker: usize,
    claim: Option<u64>,
}

impl Drop for ClaimGuard<'_> {
    fn drop(&mut self) {
        if let Some(c) = self.claim.take() {
            log::warn!("worker {} stopped with claim {c} open; releasing it", self.worker);
            self.shared.release(c, self.worker);
        }
    }
}

const POLL: Duration = Duration::from_millis(20);

/// Runs asynchronous BO with `config.n_workers` threads. The main thread
/// draws the initial design from `master_seed`; worker `w` uses
/// [`worker_seed`]`(master_seed, w)`.
///
/// A worker stops claiming once completed plus in-flight rows reach the
/// evaluation limit, so the limit is normally met exactly; evaluations in
/// flight when the terminator fires are still completed.
pub fn run_async(
    instance: &mut OptimInstance,
    config: &AsyncConfig,
    master_seed: u64,
) -> Result<AsyncOutcome, LoopError> {
    config.validate()?;
    if instance.objective().n_objectives() != 1 {
        return Err(LoopError::Config("asynchronous BO needs a single objective".into()));
    }
    let mut main_rng = MboRng::seed_from_u64(master_seed);
    let design_cfg = LoopConfig {
        init_size: config.design_size.or(config.loop_config.init_size),
        ..config.loop_config.clone()
    };
    let design = pending_init_design(instance, &design_cfg, &mut main_rng)?;
    let design_batch = instance.archive().next_batch_nr();

    let shared = SharedArchive::new(instance.archive().clone());
    shared.lock().queue.extend(design);

    let inst: &OptimInstance = instance;
    let results: Vec<std::thread::Result<Result<(f64, Vec<IterationRecord>), LoopError>>> =
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..config.n_workers)
                .map(|w| {
                    let shared = &shared;
                    s.spawn(move || {
                        let seed = worker_seed(master_seed, w);
                        worker(w, shared, inst, config, design_batch, seed)
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join()).collect()
        });

    let (archive, log) = shared.into_parts();
    instance.set_archive(archive);
    let mut worker_lambdas = Vec::new();
    let mut iterations = Vec::new();
    let mut crashed = Vec::new();
    for (w, r) in results.into_iter().enumerate() {
        match r {
            Ok(Ok((lambda, its))) => {
                worker_lambdas.push(lambda);
                iterations.extend(its.into_iter().map(|it| (w, it)));
            }
            Ok(Err(e)) => return Err(e),
            Err(_) => {
                log::warn!("worker {w} crashed");
                crashed.push(w);
                worker_lambdas.push(f64::NAN);
            }
        }
    }
    let result = assign_result(instance, &config.loop_config.result, &mut main_rng)?;
    Ok(AsyncOutcome {
        result,
        log,
        worker_lambdas,
        iterations,
        crashed,
    })
}

fn worker(
    w: usize,
    shared: &SharedArchive,
    instance: &OptimInstance,
    config: &AsyncConfig,
    design_batch: u64,
    seed: u64,
) -> Result<(f64, Vec<IterationRecord>), LoopError> {
    let cfg = &config.loop_config;
    let space = instance.space();
    let mut rng = MboRng::seed_from_u64(seed);
    let mut acq = single_objective_acq(cfg, &mut rng)?;
    let lambda = acq.lambda();
    let mut records = Vec::new();
    let mut guard = ClaimGuard {
        shared,
        worker: w,
        claim: None,
    };
    let mut n_claims = 0;
    loop {
        let task = next_task(w, shared, instance, design_batch, cfg.liar);
        let (claim, point) = match task {
            Task::Stop => break,
            Task::Evaluate(c, p) => (c, p),
            Task::Propose { points, y, remaining } => {
                let iteration = records.len() + 1;
                let ctx = AcqContext {
                    f_min: y.iter().copied().fold(f64::INFINITY, f64::min),
                    iteration: iteration - 1,
                    remaining,
                    ..AcqContext::default()
                };
                let p = propose(space, cfg, &mut acq, &points, &[y], ctx, iteration, &mut rng)?;
                records.push(p.record);
                let mut st = shared.lock();
                if instance.terminator().is_met(&st.archive, instance.elapsed()) || limit_reached(instance, &st.archive) {
                    // budget taken by other workers while proposing
                    continue;
                }
                let batch = st.archive.next_batch_nr();
                let c = st.claim(p.point.clone(), batch, w);
                drop(st);
                shared.notify();
                (c, p.point)
            }
        };
        guard.claim = Some(claim);
        n_claims += 1;
        if config.crash.is_some_and(|c| c.worker == w && c.on_claim == n_claims) {
            panic!("injected crash of worker {w}");
        }
        let y = instance.objective().eval(&point);
        shared.publish(claim, w, y);
        guard.claim = None;
    }
    Ok((lambda, records))
}

/// Completed plus in-flight rows already cover the evaluation limit.
fn limit_reached(instance: &OptimInstance, archive: &Archive) -> bool {
    instance
        .terminator()
        .evals_limit()
        .is_some_and(|limit| archive.len() >= limit)
}

/// Decides the worker's next step under the lock: stop, evaluate a queued
/// point (claimed here), or propose from a snapshot.
fn next_task(w: usize, shared: &SharedArchive, instance: &OptimInstance, design_batch: u64, liar: Liar) -> Task {
    let mut st = shared.lock();
    loop {
        if instance.terminator().is_met(&st.archive, instance.elapsed()) {
            return Task::Stop;
        }
        if let Some(p) = st.queue.pop_front() {
            let c = st.claim(p.clone(), design_batch, w);
            return Task::Evaluate(c, p);
        }
        if !limit_reached(instance, &st.archive) && st.archive.n_completed() >= 2 {
            let (points, y) = snapshot_with_imputation(&st.archive, liar);
            let remaining = instance
                .terminator()
                .evals_limit()
                .map_or(0, |l| l.saturating_sub(st.archive.n_completed()));
            return Task::Propose { points, y, remaining };
        }
        st = shared.wait(st, POLL);
    }
}

