//! Acquisition functions. Every value is oriented so that larger is better.

mod multi;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use multi::{parego_scalarize, sample_simplex, smsego, smsego_epsilon, PAREGO_RHO};

use crate::space::{ParamSpace, Point};
use crate::stats::{norm_cdf, norm_pdf};
use crate::surrogate::{Prediction, Surrogate, SurrogateError};
use crate::MboRng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AcqError {
    #[error("invalid acquisition configuration: {0}")]
    InvalidConfig(String),
    #[error("acquisition precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
}

/// Acquisition selected by key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcqKind {
    Ei,
    EiLog,
    Cb,
    Pi,
    Mean,
    Sd,
    StochasticCb,
    StochasticEi,
    Smsego,
}

impl AcqKind {
    pub const ALL: [AcqKind; 9] = [
        AcqKind::Ei,
        AcqKind::EiLog,
        AcqKind::Cb,
        AcqKind::Pi,
        AcqKind::Mean,
        AcqKind::Sd,
        AcqKind::StochasticCb,
        AcqKind::StochasticEi,
        AcqKind::Smsego,
    ];

    pub fn key(self) -> &'static str {
        match self {
            AcqKind::Ei => "ei",
            AcqKind::EiLog => "ei_log",
            AcqKind::Cb => "cb",
            AcqKind::Pi => "pi",
            AcqKind::Mean => "mean",
            AcqKind::Sd => "sd",
            AcqKind::StochasticCb => "stochastic_cb",
            AcqKind::StochasticEi => "stochastic_ei",
            AcqKind::Smsego => "smsego",
        }
    }

    pub fn from_key(key: &str) -> Option<AcqKind> {
        Self::ALL.into_iter().find(|k| k.key() == key)
    }

    pub fn is_multi_objective(self) -> bool {
        self == AcqKind::Smsego
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcqConfig {
    pub kind: AcqKind,
    /// Confidence-bound multiplier.
    pub lambda: f64,
    /// Improvement offset for EI and PI.
    pub epsilon: f64,
    pub lambda_decay: bool,
    pub epsilon_decay: bool,
    pub decay_rate: f64,
    /// Log-uniform range of the per-worker multiplier of `stochastic_cb`.
    pub lambda_range: (f64, f64),
    /// Upper end of the uniform offset of `stochastic_ei`.
    pub epsilon_max: f64,
    /// Optimism of the SMS-EGO candidate value `mu - lambda * sd`.
    pub smsego_lambda: f64,
    /// Additive epsilon-dominance margin of SMS-EGO. `None` selects the
    /// adaptive margin of [`smsego_epsilon`]; the default 0 penalizes only
    /// truly dominated candidates.
    pub smsego_epsilon: Option<f64>,
    /// Score single-objective kinds on the surrogate's transformed scale
    /// instead of inverting the output transformation first. The incumbent
    /// is transformed alongside. `ei_log` always works this way.
    pub model_scale: bool,
}

impl Default for AcqConfig {
    fn default() -> Self {
        AcqConfig {
            kind: AcqKind::Ei,
            lambda: 1.0,
            epsilon: 0.0,
            lambda_decay: false,
            epsilon_decay: false,
            decay_rate: 0.99,
            lambda_range: (1.0, 10.0),
            epsilon_max: 0.1,
            smsego_lambda: 1.0,
            smsego_epsilon: Some(0.0),
            model_scale: false,
        }
    }
}

impl AcqConfig {
    pub fn new(kind: AcqKind) -> Self {
        AcqConfig {
            kind,
            ..AcqConfig::default()
        }
    }

    /// Lower confidence bound with multiplier `lambda`.
    pub fn cb(lambda: f64) -> Self {
        AcqConfig {
            kind: AcqKind::Cb,
            lambda,
            ..AcqConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), AcqError> {
        let bad = |m: String| Err(AcqError::InvalidConfig(m));
        if self.kind == AcqKind::Cb && !(self.lambda > 0.0) {
            return bad(format!("lambda must be positive, got {}", self.lambda));
        }
        if !(self.epsilon >= 0.0) {
            return bad(format!("epsilon must be non-negative, got {}", self.epsilon));
        }
        if !(self.decay_rate > 0.0 && self.decay_rate <= 1.0) {
            return bad(format!("decay rate must lie in (0, 1], got {}", self.decay_rate));
        }
        if self.kind == AcqKind::StochasticCb {
            let (lo, hi) = self.lambda_range;
            if !(lo > 0.0) || lo > hi {
                return bad(format!("lambda range [{lo}, {hi}] is not a positive interval"));
            }
        }
        if self.kind == AcqKind::StochasticEi && !(self.epsilon_max >= 0.0) {
            return bad(format!("epsilon_max must be non-negative, got {}", self.epsilon_max));
        }
        if let Some(e) = self.smsego_epsilon {
            if !(e >= 0.0) {
                return bad(format!("smsego epsilon must be non-negative, got {e}"));
            }
        }
        Ok(())
    }
}

/// Per-round state shared by all candidates of one proposal.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AcqContext {
    /// Best completed value (minimization scale); objective 0 for
    /// single-objective acquisitions.
    pub f_min: f64,
    /// Number of completed BO iterations, used by the decays.
    pub iteration: usize,
    /// Current non-dominated front (minimization scale).
    pub front: Vec<Vec<f64>>,
    pub reference: Vec<f64>,
    /// Evaluations left in the budget, used by the adaptive SMS-EGO margin.
    pub remaining: usize,
}

/// Configured acquisition function with its per-worker draws.
#[derive(Debug, Clone)]
pub struct Acquisition {
    config: AcqConfig,
    lambda: f64,
    epsilon: f64,
    ctx: AcqContext,
}

impl Acquisition {
    /// Validates `config`. Stochastic kinds draw their multiplier or offset
    /// from `rng` here, once; degenerate ranges draw nothing.
    pub fn new(config: AcqConfig, rng: &mut MboRng) -> Result<Self, AcqError> {
        config.validate()?;
        let lambda = match config.kind {
            AcqKind::StochasticCb => {
                let (lo, hi) = config.lambda_range;
                if lo == hi {
                    lo
                } else {
                    rng.random_range(lo.ln()..hi.ln()).exp()
                }
            }
            AcqKind::Smsego => config.smsego_lambda,
            _ => config.lambda,
        };
        let epsilon = match config.kind {
            AcqKind::StochasticEi if config.epsilon_max > 0.0 => rng.random_range(0.0..config.epsilon_max),
            AcqKind::StochasticEi => 0.0,
            _ => config.epsilon,
        };
        Ok(Acquisition {
            config,
            lambda,
            epsilon,
            ctx: AcqContext::default(),
        })
    }

    pub fn config(&self) -> &AcqConfig {
        &self.config
    }

    pub fn kind(&self) -> AcqKind {
        self.config.kind
    }

    pub fn context(&self) -> &AcqContext {
        &self.ctx
    }

    pub fn update(&mut self, ctx: AcqContext) {
        self.ctx = ctx;
    }

    /// Confidence multiplier after decay.
    pub fn lambda(&self) -> f64 {
        if self.config.lambda_decay {
            self.lambda * self.config.decay_rate.powi(self.ctx.iteration as i32)
        } else {
            self.lambda
        }
    }

    /// Improvement offset after decay.
    pub fn epsilon(&self) -> f64 {
        if self.config.epsilon_decay {
            self.epsilon * self.config.decay_rate.powi(self.ctx.iteration as i32)
        } else {
            self.epsilon
        }
    }

    /// Value of one candidate from its per-objective predictions. `EiLog`
    /// expects model-scale predictions and a pre-log incumbent in the
    /// context.
    pub fn value(&self, preds: &[Prediction]) -> Result<f64, AcqError> {
        let p = preds[0];
        let f_min = self.ctx.f_min;
        Ok(match self.config.kind {
            AcqKind::Ei | AcqKind::StochasticEi => ei(p.mean, p.sd, f_min - self.epsilon()),
            AcqKind::Pi => pi(p.mean, p.sd, f_min - self.epsilon()),
            AcqKind::Cb | AcqKind::StochasticCb => lcb(p.mean, p.sd, self.lambda()),
            AcqKind::Mean => -p.mean,
            AcqKind::Sd => p.sd,
            AcqKind::EiLog => log_ei(p.mean, p.sd, f_min)?,
            AcqKind::Smsego => {
                let means: Vec<f64> = preds.iter().map(|q| q.mean).collect();
                let sds: Vec<f64> = preds.iter().map(|q| q.sd).collect();
                let eps = match self.config.smsego_epsilon {
                    Some(e) => vec![e; preds.len()],
                    None => smsego_epsilon(&self.ctx.front, self.ctx.remaining, preds.len()),
                };
                smsego(&means, &sds, &self.ctx.front, &self.ctx.reference, self.lambda(), &eps)?
            }
        })
    }

    /// Scores `points` with one surrogate per objective.
    pub fn score(
        &self,
        space: &ParamSpace,
        surrogates: &[Surrogate],
        points: &[Point],
    ) -> Result<Vec<f64>, AcqError> {
        let needed = if self.config.kind.is_multi_objective() { 2 } else { 1 };
        if surrogates.len() < needed {
            return Err(AcqError::Precondition(format!(
                "{} needs at least {needed} surrogates",
                self.config.kind.key()
            )));
        }
        let used = if self.config.kind.is_multi_objective() {
            surrogates
        } else {
            &surrogates[..1]
        };
        let kind = self.config.kind;
        let model_scale = kind == AcqKind::EiLog || (self.config.model_scale && !kind.is_multi_objective());
        let mut per_obj = Vec::with_capacity(used.len());
        for s in used {
            per_obj.push(if model_scale {
                s.predict_model_scale(space, points)?
            } else {
                s.predict(space, points)?
            });
        }
        let mut ctx_scorer = self.clone();
        if model_scale {
            let t = used[0].output_trafo().ok_or(SurrogateError::NotFitted)?;
            ctx_scorer.ctx.f_min = if kind == AcqKind::EiLog {
                if !t.is_log() {
                    return Err(AcqError::Precondition(
                        "ei_log needs a surrogate trained on log-transformed targets".into(),
                    ));
                }
                t.pre_log(self.ctx.f_min)
            } else {
                t.transform(self.ctx.f_min)
            };
        }
        (0..points.len())
            .map(|i| {
                let preds: Vec<Prediction> = per_obj.iter().map(|p| p[i]).collect();
                ctx_scorer.value(&preds)
            })
            .collect()
    }
}

/// Expected improvement over `f_min`.
pub fn ei(mean: f64, sd: f64, f_min: f64) -> f64 {
    let d = f_min - mean;
    if sd <= 0.0 {
        return d.max(0.0);
    }
    let z = d / sd;
    (d * norm_cdf(z) + sd * norm_pdf(z)).max(0.0)
}

/// Probability of improving on `f_min`.
pub fn pi(mean: f64, sd: f64, f_min: f64) -> f64 {
    if sd <= 0.0 {
        return if mean < f_min { 1.0 } else { 0.0 };
    }
    norm_cdf((f_min - mean) / sd)
}

/// Negated lower confidence bound `-(mean - lambda * sd)`.
pub fn lcb(mean: f64, sd: f64, lambda: f64) -> f64 {
    -(mean - lambda * sd)
}

/// Expected improvement on the original scale of a log-normal predictive
/// distribution with log-scale parameters `mu`, `sigma`.
pub fn log_ei(mu: f64, sigma: f64, f_min: f64) -> Result<f64, AcqError> {
    if !(f_min > 0.0) {
        return Err(AcqError::Precondition(format!(
            "ei_log needs a positive incumbent, got {f_min}"
        )));
    }
    if sigma <= 0.0 {
        return Ok((f_min - mu.exp()).max(0.0));
    }
    let v = (f_min.ln() - mu) / sigma;
    let value = f_min * norm_cdf(v) - (mu + 0.5 * sigma * sigma).exp() * norm_cdf(v - sigma);
    Ok(value.max(0.0))
}
