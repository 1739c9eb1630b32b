//! Probabilistic regression surrogates: Gaussian processes and random
//! forests, output/input transformations and the fallback model.

mod forest;
mod gp;
mod kernel;
mod simplex;
mod trafo;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use forest::{Forest, ForestConfig, ForestSummary, Node, Tree, VarianceEstimator};
pub use gp::{GaussianProcess, GpConfig, GpHyper, Nugget};
pub use kernel::Kernel;
pub use trafo::{Encoder, InputTrafo, MissingEncoding, OutputTrafo, OutputTrafoKind, LOG_TRAFO_FLOOR};

use crate::space::{ParamSpace, Point};
use crate::MboRng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurrogateError {
    #[error("need at least 2 training rows, got {0}")]
    TooFewPoints(usize),
    #[error("surrogate fit failed: {0}")]
    FitFailed(String),
    #[error("surrogate has not been fitted")]
    NotFitted,
    #[error("surrogate prediction failed: {0}")]
    PredictFailed(String),
}

/// Posterior mean and standard deviation at one candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ModelConfig {
    Gp(GpConfig),
    Forest(ForestConfig),
}

/// Forced failures for exercising the fallback ladder in tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Faults {
    pub primary: bool,
    pub fallback: bool,
    pub predict: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateConfig {
    pub model: ModelConfig,
    pub input_trafo: InputTrafo,
    pub output_trafo: OutputTrafoKind,
    /// Substitute a 10-tree jackknife forest when the primary fit fails.
    pub catch_errors: bool,
    #[serde(default)]
    pub faults: Faults,
}

impl SurrogateConfig {
    pub fn gp(cfg: GpConfig) -> Self {
        SurrogateConfig {
            model: ModelConfig::Gp(cfg),
            input_trafo: InputTrafo::None,
            output_trafo: OutputTrafoKind::None,
            catch_errors: true,
            faults: Faults::default(),
        }
    }

    pub fn forest(cfg: ForestConfig) -> Self {
        SurrogateConfig {
            model: ModelConfig::Forest(cfg),
            ..Self::gp(GpConfig::default())
        }
    }

    pub fn with_output_trafo(mut self, kind: OutputTrafoKind) -> Self {
        self.output_trafo = kind;
        self
    }

    pub fn with_input_trafo(mut self, trafo: InputTrafo) -> Self {
        self.input_trafo = trafo;
        self
    }

    pub fn with_catch_errors(mut self, catch: bool) -> Self {
        self.catch_errors = catch;
        self
    }
}

/// Which model answers predictions after the last update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LiveModel {
    Primary,
    Fallback,
}

#[derive(Debug, Clone)]
pub enum FittedModel {
    Gp(GaussianProcess),
    Forest(Forest),
}

impl FittedModel {
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        match self {
            FittedModel::Gp(gp) => gp.predict(x),
            FittedModel::Forest(f) => f.predict(x),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            FittedModel::Gp(gp) => serde_json::json!({ "gp": gp.to_json() }),
            FittedModel::Forest(f) => serde_json::json!({ "forest": f.summary() }),
        }
    }
}

#[derive(Debug, Clone)]
struct State {
    model: FittedModel,
    trafo: OutputTrafo,
    encoder: Encoder,
    live: LiveModel,
}

/// Surrogate model `f̂` on a search space, refitted from scratch on update.
#[derive(Debug, Clone)]
pub struct Surrogate {
    config: SurrogateConfig,
    state: Option<State>,
}

impl Surrogate {
    pub fn new(config: SurrogateConfig) -> Self {
        Surrogate { config, state: None }
    }

    pub fn config(&self) -> &SurrogateConfig {
        &self.config
    }

    /// Refits on `points` with minimization-scale targets `y`.
    ///
    /// A failed primary fit is replaced by the fallback forest when
    /// `catch_errors` is set; the returned value says which model is live.
    pub fn update(
        &mut self,
        space: &ParamSpace,
        points: &[Point],
        y: &[f64],
        rng: &mut MboRng,
    ) -> Result<LiveModel, SurrogateError> {
        self.state = None;
        let trafo = OutputTrafo::fit(self.config.output_trafo, y);
        let yt: Vec<f64> = y.iter().map(|v| trafo.transform(*v)).collect();
        let primary = match &self.config.model {
            ModelConfig::Gp(cfg) => {
                let enc = Encoder::new(space, self.config.input_trafo, MissingEncoding::Indicator);
                let x = enc.encode_all(space, points);
                if self.config.faults.primary {
                    Err(SurrogateError::FitFailed("injected fault".into()))
                } else {
                    GaussianProcess::fit(&x, &yt, cfg, rng).map(|m| (FittedModel::Gp(m), enc))
                }
            }
            ModelConfig::Forest(cfg) => {
                let enc = Encoder::new(space, self.config.input_trafo, MissingEncoding::Native);
                let x = enc.encode_all(space, points);
                if self.config.faults.primary {
                    Err(SurrogateError::FitFailed("injected fault".into()))
                } else {
                    Forest::fit(&x, &yt, cfg, rng).map(|m| (FittedModel::Forest(m), enc))
                }
            }
        };
        let (model, encoder, live) = match primary {
            Ok((m, e)) => (m, e, LiveModel::Primary),
            Err(e) if !self.config.catch_errors => return Err(e),
            Err(e) => {
                log::warn!("{e}; switching to the fallback forest");
                if self.config.faults.fallback {
                    return Err(SurrogateError::FitFailed("injected fallback fault".into()));
                }
                let enc = Encoder::new(space, self.config.input_trafo, MissingEncoding::Native);
                let x = enc.encode_all(space, points);
                let f = Forest::fit(&x, &yt, &ForestConfig::fallback(), rng)?;
                (FittedModel::Forest(f), enc, LiveModel::Fallback)
            }
        };
        self.state = Some(State {
            model,
            trafo,
            encoder,
            live,
        });
        Ok(live)
    }

    pub fn live_model(&self) -> Option<LiveModel> {
        self.state.as_ref().map(|s| s.live)
    }

    pub fn output_trafo(&self) -> Option<OutputTrafo> {
        self.state.as_ref().map(|s| s.trafo)
    }

    pub fn model(&self) -> Option<&FittedModel> {
        self.state.as_ref().map(|s| &s.model)
    }

    /// Predictions on the minimization scale of the training targets.
    pub fn predict(&self, space: &ParamSpace, points: &[Point]) -> Result<Vec<Prediction>, SurrogateError> {
        let state = self.state.as_ref().ok_or(SurrogateError::NotFitted)?;
        Ok(self
            .predict_model_scale(space, points)?
            .into_iter()
            .map(|p| {
                let (mean, sd) = state.trafo.inverse_prediction(p.mean, p.sd);
                Prediction { mean, sd }
            })
            .collect())
    }

    /// Predictions on the transformed scale the model was trained on.
    pub fn predict_model_scale(
        &self,
        space: &ParamSpace,
        points: &[Point],
    ) -> Result<Vec<Prediction>, SurrogateError> {
        let state = self.state.as_ref().ok_or(SurrogateError::NotFitted)?;
        if self.config.faults.predict {
            return Err(SurrogateError::PredictFailed("injected fault".into()));
        }
        Ok(points
            .iter()
            .map(|p| {
                let (mean, sd) = state.model.predict(&state.encoder.encode(space, p));
                Prediction { mean, sd }
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::ParamDef;
    use rand::SeedableRng;

    fn space() -> ParamSpace {
        ParamSpace::new(vec![ParamDef::double("x", 0.0, 1.0)]).unwrap()
    }

    fn gp0() -> SurrogateConfig {
        SurrogateConfig::gp(GpConfig {
            nugget: Nugget::Fixed(0.0),
            ..GpConfig::default()
        })
    }

    #[test]
    fn duplicate_point_activates_fallback() {
        let pts: Vec<Point> = [0.2, 0.5, 0.5, 0.9].iter().map(|&x| Point::from_nums(&[x])).collect();
        let y = [1.0, 0.3, 0.4, 2.0];
        let mut s = Surrogate::new(gp0());
        let live = s.update(&space(), &pts, &y, &mut MboRng::seed_from_u64(1)).unwrap();
        assert_eq!(live, LiveModel::Fallback);
        assert!(matches!(s.model(), Some(FittedModel::Forest(f)) if f.trees().len() == 10));
        let mut strict = Surrogate::new(gp0().with_catch_errors(false));
        assert!(matches!(
            strict.update(&space(), &pts, &y, &mut MboRng::seed_from_u64(1)),
            Err(SurrogateError::FitFailed(_))
        ));
    }

    #[test]
    fn healthy_archive_uses_primary() {
        let pts: Vec<Point> = [0.1, 0.4, 0.6, 0.95].iter().map(|&x| Point::from_nums(&[x])).collect();
        let y = [1.0, 0.3, 0.4, 2.0];
        let mut s = Surrogate::new(gp0().with_output_trafo(OutputTrafoKind::Log));
        let live = s.update(&space(), &pts, &y, &mut MboRng::seed_from_u64(1)).unwrap();
        assert_eq!(live, LiveModel::Primary);
        let raw = s.predict(&space(), &pts).unwrap();
        let model = s.predict_model_scale(&space(), &pts).unwrap();
        let t = s.output_trafo().unwrap();
        for ((r, m), yi) in raw.iter().zip(&model).zip(&y) {
            assert!((m.mean - t.transform(*yi)).abs() < 1e-6);
            assert!((r.mean - yi).abs() < 1e-5);
        }
    }

    #[test]
    fn unfitted_surrogate_errors() {
        let s = Surrogate::new(gp0());
        assert_eq!(
            s.predict(&space(), &[Point::from_nums(&[0.1])]),
            Err(SurrogateError::NotFitted)
        );
    }
}
