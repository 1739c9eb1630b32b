//! Loop functions: EGO, multipoint constant liar, ParEGO and SMS-EGO.
//!
//! Every loop evaluates an initial design, then repeats: fit the
//! surrogate(s), refresh the acquisition context, maximize the acquisition,
//! evaluate. Errors the configuration allows to be caught turn the current
//! proposal into a uniform random point instead of aborting the run.

mod multi;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use multi::{run_parego, run_smsego, smsego_reference};

use crate::acqopt::{self, AcqOptConfig, AcqOptError, AcqOptKind};
use crate::acquisition::{AcqConfig, AcqContext, AcqError, AcqKind, Acquisition};
use crate::engine::{assign_result, EngineError, OptimInstance, OptimResult, ResultAssigner, Terminator};
use crate::space::{sample_lhs, sample_random, sample_sobol, ParamSpace, Point, SpaceError};
use crate::surrogate::{
    ForestConfig, GpConfig, InputTrafo, Kernel, LiveModel, Nugget, OutputTrafoKind, Surrogate, SurrogateConfig,
    SurrogateError,
};
use crate::MboRng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LoopError {
    #[error("invalid loop configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
    #[error(transparent)]
    Acquisition(#[from] AcqError),
    #[error(transparent)]
    AcqOpt(#[from] AcqOptError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopKind {
    Ego,
    Mpcl,
    Parego,
    Smsego,
}

impl LoopKind {
    pub const ALL: [LoopKind; 4] = [LoopKind::Ego, LoopKind::Mpcl, LoopKind::Parego, LoopKind::Smsego];

    /// Registry key, e.g. `bayesopt_ego`.
    pub fn key(self) -> &'static str {
        match self {
            LoopKind::Ego => "bayesopt_ego",
            LoopKind::Mpcl => "bayesopt_mpcl",
            LoopKind::Parego => "bayesopt_parego",
            LoopKind::Smsego => "bayesopt_smsego",
        }
    }

    /// Accepts the registry key or the bare name.
    pub fn from_key(key: &str) -> Option<LoopKind> {
        let bare = key.strip_prefix("bayesopt_").unwrap_or(key);
        Self::ALL.into_iter().find(|k| &k.key()["bayesopt_".len()..] == bare)
    }

    pub fn is_multi_objective(self) -> bool {
        matches!(self, LoopKind::Parego | LoopKind::Smsego)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    #[default]
    Random,
    Lhs,
    Sobol,
}

/// Value imputed for pending points of a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Liar {
    /// Best observed value.
    #[default]
    Min,
    /// Worst observed value.
    Max,
    /// Surrogate mean at the pending point.
    MeanPrediction,
}

/// One complete BO configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopConfig {
    pub loop_kind: LoopKind,
    pub init_kind: InitKind,
    /// Share of the evaluation budget spent on the initial design.
    pub init_fraction: f64,
    /// Overrides the size derived from `init_fraction`.
    pub init_size: Option<usize>,
    /// Every this many BO iterations the proposal is uniform random; 0 is off.
    pub random_interleave_iter: usize,
    pub surrogate: SurrogateConfig,
    pub acq: AcqConfig,
    pub acqopt: AcqOptConfig,
    pub liar: Liar,
    /// Batch size of the constant-liar loop.
    pub q: usize,
    /// Threads used to evaluate a batch.
    pub eval_workers: usize,
    /// Points evaluated first, as part of the initial design.
    pub warmstart_design: Vec<Point>,
    /// Fixed ParEGO weights instead of a fresh simplex draw per iteration.
    pub parego_weights: Option<Vec<f64>>,
    pub result: ResultAssigner,
}

impl LoopConfig {
    /// GP with Matérn 3/2 kernel on log-transformed targets, LCB with
    /// multiplier 3 scored on the log scale, CMA-ES.
    pub fn numeric_default() -> Self {
        let gp = GpConfig {
            kernel: Kernel::Matern32,
            nugget: Nugget::Fixed(1e-8),
            scale_inputs: false,
            ..GpConfig::default()
        };
        LoopConfig {
            loop_kind: LoopKind::Ego,
            init_kind: InitKind::Random,
            init_fraction: 0.05,
            init_size: None,
            random_interleave_iter: 0,
            surrogate: SurrogateConfig::gp(gp)
                .with_input_trafo(InputTrafo::None)
                .with_output_trafo(OutputTrafoKind::Log),
            acq: AcqConfig {
                model_scale: true,
                ..AcqConfig::cb(3.0)
            },
            acqopt: AcqOptConfig::new(AcqOptKind::Cmaes),
            liar: Liar::Min,
            q: 1,
            eval_workers: 1,
            warmstart_design: Vec::new(),
            parego_weights: None,
            result: ResultAssigner::ArchiveBest,
        }
    }

    /// Random forest with 500 trees and LTV variance on log-transformed
    /// targets, LCB with multiplier 1 scored on the log scale, local search.
    pub fn mixed_default() -> Self {
        LoopConfig {
            surrogate: SurrogateConfig::forest(ForestConfig::default()).with_output_trafo(OutputTrafoKind::Log),
            acq: AcqConfig {
                model_scale: true,
                ..AcqConfig::cb(1.0)
            },
            acqopt: AcqOptConfig::new(AcqOptKind::LocalSearch),
            ..Self::numeric_default()
        }
    }

    /// Numeric default for flat all-numeric spaces, mixed default otherwise.
    pub fn default_for(space: &ParamSpace) -> Self {
        if space.is_numeric() && !space.is_hierarchical() {
            Self::numeric_default()
        } else {
            Self::mixed_default()
        }
    }

    pub fn with_loop(mut self, kind: LoopKind) -> Self {
        self.loop_kind = kind;
        self
    }

    pub fn with_warmstart(mut self, points: Vec<Point>) -> Self {
        self.warmstart_design = points;
        self
    }

    pub fn validate(&self) -> Result<(), LoopError> {
        if !(self.init_fraction > 0.0 && self.init_fraction <= 1.0) {
            return Err(LoopError::Config(format!(
                "init_fraction must lie in (0, 1], got {}",
                self.init_fraction
            )));
        }
        if self.init_size.is_some_and(|n| n < 2) {
            return Err(LoopError::Config("initial design needs at least 2 points".into()));
        }
        if self.q == 0 {
            return Err(LoopError::Config("batch size q must be at least 1".into()));
        }
        self.acq.validate()?;
        self.acqopt.validate()?;
        Ok(())
    }

    /// Size of the initial design for a run stopped by `terminator`:
    /// `init_fraction` of the evaluation limit but at least 4, or `4 d`
    /// without a limit.
    pub fn resolved_init_size(&self, space: &ParamSpace, terminator: &Terminator) -> usize {
        if let Some(n) = self.init_size {
            return n;
        }
        match terminator.evals_limit() {
            Some(limit) => ((self.init_fraction * limit as f64).ceil() as usize).max(4).min(limit),
            None => (4 * space.dim()).max(4),
        }
    }
}

/// Where a proposal came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalSource {
    /// Maximizer of the acquisition function.
    Model,
    /// Scheduled uniform random point.
    Interleave,
    /// Uniform random point after a caught error.
    RandomFallback,
}

/// Diagnostics of one BO iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// BO iteration, starting at 1 after the initial design.
    pub iteration: usize,
    pub source: ProposalSource,
    /// Which model answered, per fitted surrogate.
    pub live_models: Vec<LiveModel>,
    pub acq_value: Option<f64>,
    pub error: Option<String>,
}

/// Final result with the per-iteration diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopOutcome {
    pub result: OptimResult,
    pub iterations: Vec<IterationRecord>,
    /// Objective evaluations spent on the initial design.
    pub n_init_evals: usize,
}

/// Runs the loop selected by `config.loop_kind`.
pub fn run_loop(
    instance: &mut OptimInstance,
    config: &LoopConfig,
    rng: &mut MboRng,
) -> Result<LoopOutcome, LoopError> {
    match config.loop_kind {
        LoopKind::Ego => run_ego(instance, config, rng),
        LoopKind::Mpcl => run_mpcl(instance, config, rng),
        LoopKind::Parego => run_parego(instance, config, rng),
        LoopKind::Smsego => run_smsego(instance, config, rng),
    }
}

/// Generates `n` initial points of the configured kind.
pub fn generate_design(
    space: &ParamSpace,
    kind: InitKind,
    n: usize,
    rng: &mut MboRng,
) -> Result<Vec<Point>, LoopError> {
    if n == 0 {
        return Ok(Vec::new());
    }
    Ok(match kind {
        InitKind::Random => sample_random(space, n, rng),
        InitKind::Lhs => sample_lhs(space, n, rng)?,
        InitKind::Sobol => sample_sobol(space, n, Some(rng.random()))?,
    })
}

/// Initial design still owed by the archive: the warmstart points first,
/// then generated points, in total topping the archive up to the init size.
pub(crate) fn pending_init_design(
    instance: &OptimInstance,
    config: &LoopConfig,
    rng: &mut MboRng,
) -> Result<Vec<Point>, LoopError> {
    let space = instance.space();
    let n_init = config.resolved_init_size(space, instance.terminator());
    let have = instance.archive().n_completed();
    let mut design: Vec<Point> = config
        .warmstart_design
        .iter()
        .take(n_init.saturating_sub(have))
        .cloned()
        .collect();
    let missing = n_init.saturating_sub(have + design.len());
    design.extend(generate_design(space, config.init_kind, missing, rng)?);
    if let Some(left) = instance.remaining_evals() {
        design.truncate(left);
    }
    Ok(design)
}

/// Evaluates the initial design, returning the number of evaluations.
pub(crate) fn evaluate_init(
    instance: &mut OptimInstance,
    config: &LoopConfig,
    rng: &mut MboRng,
) -> Result<usize, LoopError> {
    let design = pending_init_design(instance, config, rng)?;
    if design.is_empty() || instance.is_terminated() {
        return Ok(0);
    }
    instance.eval_batch_with(&design, config.eval_workers)?;
    Ok(design.len())
}

/// A proposal with the surrogates it was derived from.
pub(crate) struct Proposal {
    pub point: Point,
    pub record: IterationRecord,
    pub surrogates: Vec<Surrogate>,
}

/// Proposes the next point from training data with one target vector per
/// surrogate. Interleaved iterations and caught errors yield a uniform
/// random point.
#[allow(clippy::too_many_arguments)]
pub(crate) fn propose(
    space: &ParamSpace,
    config: &LoopConfig,
    acq: &mut Acquisition,
    points: &[Point],
    targets: &[Vec<f64>],
    ctx: AcqContext,
    iteration: usize,
    rng: &mut MboRng,
) -> Result<Proposal, LoopError> {
    let random = |source, error: Option<String>, live_models, rng: &mut MboRng| {
        let point = sample_random(space, 1, rng).remove(0);
        Proposal {
            point,
            record: IterationRecord {
                iteration,
                source,
                live_models,
                acq_value: None,
                error,
            },
            surrogates: Vec::new(),
        }
    };
    let r = config.random_interleave_iter;
    if r > 0 && iteration % r == 0 {
        return Ok(random(ProposalSource::Interleave, None, Vec::new(), rng));
    }

    let mut surrogates = Vec::with_capacity(targets.len());
    let mut live_models = Vec::with_capacity(targets.len());
    for y in targets {
        let mut s = Surrogate::new(config.surrogate.clone());
        match s.update(space, points, y, rng) {
            Ok(live) => live_models.push(live),
            Err(e) if config.surrogate.catch_errors => {
                log::warn!("{e}; proposing a random point");
                return Ok(random(ProposalSource::RandomFallback, Some(e.to_string()), live_models, rng));
            }
            Err(e) => return Err(e.into()),
        }
        surrogates.push(s);
    }

    acq.update(ctx);
    let outcome = {
        let acq = &*acq;
        let mut score = |pts: &[Point]| acq.score(space, &surrogates, pts);
        acqopt::optimize(space, &config.acqopt, &mut score, rng)
    };
    match outcome {
        Ok(c) => Ok(Proposal {
            point: c.point,
            record: IterationRecord {
                iteration,
                source: ProposalSource::Model,
                live_models,
                acq_value: Some(c.acq_value),
                error: None,
            },
            surrogates,
        }),
        Err(AcqOptError::RandomFallback(msg)) => {
            log::warn!("{msg}; proposing a random point");
            Ok(random(ProposalSource::RandomFallback, Some(msg), live_models, rng))
        }
        Err(e) => Err(e.into()),
    }
}

/// Single-objective acquisition of a loop config; multi-objective kinds are
/// rejected.
pub(crate) fn single_objective_acq(config: &LoopConfig, rng: &mut MboRng) -> Result<Acquisition, LoopError> {
    if config.acq.kind == AcqKind::Smsego {
        return Err(LoopError::Config("smsego acquisition needs the smsego loop".into()));
    }
    Ok(Acquisition::new(config.acq.clone(), rng)?)
}

fn single_objective_check(instance: &OptimInstance) -> Result<(), LoopError> {
    if instance.objective().n_objectives() != 1 {
        return Err(LoopError::Config(format!(
            "loop needs a single objective, got {}",
            instance.objective().n_objectives()
        )));
    }
    Ok(())
}

fn min_of(y: &[f64]) -> f64 {
    y.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Submits a batch, treating a terminator that triggered in the meantime
/// (e.g. run time) as the end of the run.
fn submit(instance: &mut OptimInstance, points: &[Point], workers: usize) -> Result<bool, LoopError> {
    match instance.eval_batch_with(points, workers) {
        Ok(_) => Ok(true),
        Err(EngineError::Terminated) => Ok(false),
        Err(e) => Err(e.into()),
    }
}

/// Efficient global optimization: one proposal per iteration.
pub fn run_ego(
    instance: &mut OptimInstance,
    config: &LoopConfig,
    rng: &mut MboRng,
) -> Result<LoopOutcome, LoopError> {
    config.validate()?;
    single_objective_check(instance)?;
    let n_init_evals = evaluate_init(instance, config, rng)?;
    let mut acq = single_objective_acq(config, rng)?;
    let mut iterations = Vec::new();
    while !instance.is_terminated() {
        let iteration = iterations.len() + 1;
        let (points, y) = instance.archive().training_data(0);
        let ctx = AcqContext {
            f_min: min_of(&y),
            iteration: iteration - 1,
            remaining: instance.remaining_evals().unwrap_or(0),
            ..AcqContext::default()
        };
        let p = propose(instance.space(), config, &mut acq, &points, &[y], ctx, iteration, rng)?;
        iterations.push(p.record);
        if !submit(instance, &[p.point], 1)? {
            break;
        }
    }
    let result = assign_result(instance, &config.result, rng)?;
    Ok(LoopOutcome {
        result,
        iterations,
        n_init_evals,
    })
}

/// Liar value for a pending point given the observed targets.
pub(crate) fn liar_value(
    liar: Liar,
    observed: &[f64],
    space: &ParamSpace,
    surrogate: Option<&Surrogate>,
    point: &Point,
) -> f64 {
    match liar {
        Liar::Min => min_of(observed),
        Liar::Max => observed.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        Liar::MeanPrediction => surrogate
            .and_then(|s| s.predict(space, std::slice::from_ref(point)).ok())
            .map(|p| p[0].mean)
            // random proposals carry no model; lie with the best value
            .unwrap_or_else(|| min_of(observed)),
    }
}

/// Multipoint constant liar: `q` proposals per iteration, each made after
/// imputing a liar value for the previous ones, then evaluated as one batch.
/// Imputed values live only in the training set, never in the archive.
pub fn run_mpcl(
    instance: &mut OptimInstance,
    config: &LoopConfig,
    rng: &mut MboRng,
) -> Result<LoopOutcome, LoopError> {
    config.validate()?;
    single_objective_check(instance)?;
    let n_init_evals = evaluate_init(instance, config, rng)?;
    let mut acq = single_objective_acq(config, rng)?;
    let mut iterations: Vec<IterationRecord> = Vec::new();
    while !instance.is_terminated() {
        let q = instance.remaining_evals().map_or(config.q, |left| config.q.min(left));
        let (mut points, mut y) = instance.archive().training_data(0);
        let observed = y.clone();
        let mut batch = Vec::with_capacity(q);
        for j in 0..q {
            let iteration = iterations.len() + 1;
            let ctx = AcqContext {
                f_min: min_of(&y),
                iteration: iteration - 1,
                remaining: instance.remaining_evals().unwrap_or(0).saturating_sub(j),
                ..AcqContext::default()
            };
            let p = propose(
                instance.space(),
                config,
                &mut acq,
                &points,
                std::slice::from_ref(&y),
                ctx,
                iteration,
                rng,
            )?;
            iterations.push(p.record);
            if j + 1 < q {
                let lie = liar_value(config.liar, &observed, instance.space(), p.surrogates.first(), &p.point);
                points.push(p.point.clone());
                y.push(lie);
            }
            batch.push(p.point);
        }
        if !submit(instance, &batch, config.eval_workers)? {
            break;
        }
    }
    let result = assign_result(instance, &config.result, rng)?;
    Ok(LoopOutcome {
        result,
        iterations,
        n_init_evals,
    })
}
