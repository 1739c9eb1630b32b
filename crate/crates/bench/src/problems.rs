//! Synthetic benchmark problems.

use std::f64::consts::PI;

use mbo_core::engine::{Archive, Objective, Target};
use mbo_core::pareto::{hypervolume, non_dominated_indices};
use mbo_core::space::{ParamDef, ParamSpace, Point};
use serde::{Deserialize, Serialize};

/// Evaluation budget as a function of the dimension `d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BudgetRule {
    /// `ceil(100 + 40 sqrt(d))`, used for configuration search.
    Tune,
    /// `ceil(20 + 40 sqrt(d))`, used for method comparisons.
    #[default]
    Compare,
}

impl BudgetRule {
    pub fn budget(self, d: usize) -> usize {
        let base = match self {
            BudgetRule::Tune => 100.0,
            BudgetRule::Compare => 20.0,
        };
        (base + 40.0 * (d as f64).sqrt()).ceil() as usize
    }
}

#[derive(Debug, Clone)]
pub struct BenchProblem {
    pub name: String,
    pub space: ParamSpace,
    pub objective: Objective,
    /// Hypervolume reference point (minimization scale) of multi-objective
    /// problems.
    pub reference: Option<Vec<f64>>,
}

impl BenchProblem {
    pub fn new(name: &str, space: ParamSpace, objective: Objective) -> Self {
        BenchProblem {
            name: name.to_string(),
            space,
            objective,
            reference: None,
        }
    }

    pub fn with_reference(mut self, reference: Vec<f64>) -> Self {
        self.reference = Some(reference);
        self
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn budget(&self, rule: BudgetRule) -> usize {
        rule.budget(self.dim())
    }

    pub fn is_multi_objective(&self) -> bool {
        self.objective.n_objectives() > 1
    }

    /// Same problem with every objective mapped through `y -> a*y + c`; the
    /// hypervolume reference moves along.
    pub fn affine(&self, a: f64, c: f64) -> BenchProblem {
        let inner = self.objective.clone();
        let objective = Objective::new(self.objective.codomain().to_vec(), move |p| {
            Ok(inner.eval(p)?.into_iter().map(|y| a * y + c).collect())
        });
        BenchProblem {
            name: self.name.clone(),
            space: self.space.clone(),
            objective,
            reference: self.reference.as_ref().map(|r| r.iter().map(|v| a * v + c).collect()),
        }
    }

    /// Score of a set of evaluations, lower is better: the best value for one
    /// objective, the negated dominated hypervolume for several.
    pub fn score(&self, ys_min: &[Vec<f64>]) -> f64 {
        match &self.reference {
            Some(r) if self.is_multi_objective() => {
                let front: Vec<Vec<f64>> = non_dominated_indices(ys_min).into_iter().map(|i| ys_min[i].clone()).collect();
                -hypervolume(&front, r)
            }
            _ => ys_min.iter().map(|y| y[0]).fold(f64::INFINITY, f64::min),
        }
    }

    /// Running score after each completed archive row.
    pub fn score_trace(&self, archive: &Archive) -> Vec<f64> {
        let rows: Vec<Vec<f64>> = archive.completed().map(|r| archive.y_min(r)).collect();
        if !self.is_multi_objective() {
            return rows.iter().map(|y| y[0]).collect();
        }
        (1..=rows.len()).map(|n| self.score(&rows[..n])).collect()
    }
}

/// `2x sin(14x)` on `[0, 1]`: three local minima, the global one near
/// `x = 0.792`.
pub fn sinusoidal() -> BenchProblem {
    let space = ParamSpace::new(vec![ParamDef::double("x", 0.0, 1.0)]).unwrap();
    BenchProblem::new("sinusoidal", space, Objective::single(|p| sinusoidal_fn(p.num(0).unwrap())))
}

pub fn sinusoidal_fn(x: f64) -> f64 {
    2.0 * x * (14.0 * x).sin()
}

/// Sum of squares on `[-5, 5]^d`.
pub fn sphere(d: usize) -> BenchProblem {
    let params = (0..d).map(|i| ParamDef::double(&format!("x{}", i + 1), -5.0, 5.0)).collect();
    let space = ParamSpace::new(params).unwrap();
    let obj = Objective::single(move |p| (0..d).map(|i| p.num(i).unwrap().powi(2)).sum());
    BenchProblem::new(&format!("sphere{d}"), space, obj)
}

/// Branin function on `[-5, 10] x [0, 15]` with three global minima of
/// value `5 / (4 pi)`.
pub fn branin() -> BenchProblem {
    let space = ParamSpace::new(vec![
        ParamDef::double("x1", -5.0, 10.0),
        ParamDef::double("x2", 0.0, 15.0),
    ])
    .unwrap();
    let obj = Objective::single(|p| branin_fn(p.num(0).unwrap(), p.num(1).unwrap()));
    BenchProblem::new("branin", space, obj)
}

pub fn branin_fn(x1: f64, x2: f64) -> f64 {
    let b = 5.1 / (4.0 * PI * PI);
    let c = 5.0 / PI;
    let t = 1.0 / (8.0 * PI);
    (x2 - b * x1 * x1 + c * x1 - 6.0).powi(2) + 10.0 * (1.0 - t) * x1.cos() + 10.0
}

/// Five parameters: a `branch` factor selects between a quadratic in two
/// continuous parameters (`a1`, `a2`, optimum 0) and one in a continuous and
/// an integer parameter (`b1`, `b2`, optimum 0.1). Parameters of the other
/// branch are inactive and ignored.
pub fn hierarchical() -> BenchProblem {
    let space = ParamSpace::new(vec![
        ParamDef::factor("branch", &["a", "b"]),
        ParamDef::double("a1", -5.0, 5.0).depends_on("branch", "a"),
        ParamDef::double("a2", -5.0, 5.0).depends_on("branch", "a"),
        ParamDef::double("b1", -5.0, 5.0).depends_on("branch", "b"),
        ParamDef::integer("b2", 0, 10).depends_on("branch", "b"),
    ])
    .unwrap();
    let obj = Objective::single(|p| match (p.num(1), p.num(2), p.num(3), p.num(4)) {
        (Some(a1), Some(a2), _, _) => (a1 - 1.0).powi(2) + (a2 + 2.0).powi(2),
        (_, _, Some(b1), Some(b2)) => 0.1 + 0.5 * (b1 - 2.0).powi(2) + 0.25 * (b2 - 7.0).powi(2),
        _ => f64::NAN,
    });
    BenchProblem::new("hierarchical", space, obj)
}

/// `(x^2, (x - 1)^2)` on `[0, 1]`, reference point `(1.1, 1.1)`.
pub fn biobjective() -> BenchProblem {
    let space = ParamSpace::new(vec![ParamDef::double("x", 0.0, 1.0)]).unwrap();
    let obj = Objective::new(vec![Target::minimize("f1"), Target::minimize("f2")], |p: &Point| {
        let x = p.num(0).unwrap();
        Ok(vec![x * x, (x - 1.0).powi(2)])
    });
    BenchProblem::new("biobjective", space, obj).with_reference(vec![1.1, 1.1])
}

/// Sinusoidal, 3-D sphere, Branin, the hierarchical problem and the
/// bi-objective toy.
pub fn builtin_problems() -> Vec<BenchProblem> {
    vec![sinusoidal(), sphere(3), branin(), hierarchical(), biobjective()]
}

/// Looks up a builtin problem; `sphereN` builds an `N`-dimensional sphere.
pub fn problem_by_name(name: &str) -> Option<BenchProblem> {
    if let Some(d) = name.strip_prefix("sphere").and_then(|d| d.parse::<usize>().ok()) {
        return (d > 0).then(|| sphere(d));
    }
    builtin_problems().into_iter().find(|p| p.name == name)
}
