use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::space::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Minimize,
    Maximize,
}

impl Direction {
    /// Multiplier mapping a raw value onto the internal minimization scale.
    pub fn sign(self) -> f64 {
        match self {
            Direction::Minimize => 1.0,
            Direction::Maximize => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub name: String,
    pub direction: Direction,
}

impl Target {
    pub fn minimize(name: &str) -> Self {
        Target {
            name: name.to_string(),
            direction: Direction::Minimize,
        }
    }

    pub fn maximize(name: &str) -> Self {
        Target {
            name: name.to_string(),
            direction: Direction::Maximize,
        }
    }
}

/// Signal returned by an objective that could not produce a value.
#[derive(Debug, Clone, Error, PartialEq)]
#[error("evaluation failed: {0}")]
pub struct EvalFailure(pub String);

type EvalFn = dyn Fn(&Point) -> Result<Vec<f64>, EvalFailure> + Send + Sync;

/// Black-box function `f: X -> R^k`.
#[derive(Clone)]
pub struct Objective {
    eval: Arc<EvalFn>,
    codomain: Vec<Target>,
    noisy: bool,
}

impl fmt::Debug for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Objective")
            .field("codomain", &self.codomain)
            .field("noisy", &self.noisy)
            .finish_non_exhaustive()
    }
}

impl Objective {
    pub fn new<F>(codomain: Vec<Target>, f: F) -> Self
    where
        F: Fn(&Point) -> Result<Vec<f64>, EvalFailure> + Send + Sync + 'static,
    {
        assert!(!codomain.is_empty(), "objective needs at least one target");
        Objective {
            eval: Arc::new(f),
            codomain,
            noisy: false,
        }
    }

    /// Single minimized target `y` computed by an infallible function.
    pub fn single<F>(f: F) -> Self
    where
        F: Fn(&Point) -> f64 + Send + Sync + 'static,
    {
        Self::new(vec![Target::minimize("y")], move |p| Ok(vec![f(p)]))
    }

    pub fn with_noise(mut self, noisy: bool) -> Self {
        self.noisy = noisy;
        self
    }

    pub fn is_noisy(&self) -> bool {
        self.noisy
    }

    pub fn codomain(&self) -> &[Target] {
        &self.codomain
    }

    pub fn n_objectives(&self) -> usize {
        self.codomain.len()
    }

    /// Evaluates `p`; wrong arity and non-finite outputs count as failures.
    pub fn eval(&self, p: &Point) -> Result<Vec<f64>, EvalFailure> {
        let y = (self.eval)(p)?;
        if y.len() != self.codomain.len() {
            return Err(EvalFailure(format!(
                "expected {} values, got {}",
                self.codomain.len(),
                y.len()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(EvalFailure(format!("non-finite result {y:?}")));
        }
        Ok(y)
    }
}
