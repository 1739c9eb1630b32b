//! JSON run configurations.
//!
//! Every key is optional and overrides the default configuration for the
//! problem's space:
//!
//! ```json
//! {
//!   "id": "lcb",
//!   "problem": "sinusoidal",
//!   "loop": "ego",
//!   "budget": 20,
//!   "surrogate": {"kind": "gp", "kernel": "matern32"},
//!   "acq": {"kind": "cb", "lambda": 3},
//!   "acqopt": {"kind": "cmaes"},
//!   "init": {"kind": "random", "fraction": 0.05, "design": [{"x": 0.1}]},
//!   "output_trafo": "log",
//!   "random_interleave": 0
//! }
//! ```
//!
//! `loop` also accepts `random_search`, which evaluates uniform random
//! points. Without `budget` the budget follows `budget_rule`.

use mbo_core::acqopt::AcqOptKind;
use mbo_core::acquisition::AcqKind;
use mbo_core::loops::{InitKind, Liar, LoopConfig, LoopKind};
use mbo_core::space::point_from_json;
use mbo_core::surrogate::{ForestConfig, GpConfig, Kernel, ModelConfig, Nugget, OutputTrafoKind, VarianceEstimator};
use serde::Deserialize;
use serde_json::{Map, Value as Json};

use crate::problems::{BenchProblem, BudgetRule};
use crate::BenchError;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub id: Option<String>,
    #[serde(default)]
    pub problem: Option<String>,
    #[serde(default, rename = "loop")]
    pub loop_kind: Option<String>,
    #[serde(default)]
    pub budget: Option<usize>,
    #[serde(default)]
    pub budget_rule: Option<BudgetRule>,
    #[serde(default)]
    pub surrogate: Option<SurrogateSection>,
    #[serde(default)]
    pub acq: Option<AcqSection>,
    #[serde(default)]
    pub acqopt: Option<AcqOptSection>,
    #[serde(default)]
    pub init: Option<InitSection>,
    #[serde(default)]
    pub output_trafo: Option<OutputTrafoKind>,
    #[serde(default)]
    pub random_interleave: Option<usize>,
    #[serde(default)]
    pub q: Option<usize>,
    #[serde(default)]
    pub liar: Option<Liar>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurrogateSection {
    /// `gp` or `rf`.
    #[serde(default)]
    pub kind: Option<String>,
    #[serde(default)]
    pub kernel: Option<Kernel>,
    /// Fixed nugget; `"free"` estimates it.
    #[serde(default)]
    pub nugget: Option<Json>,
    #[serde(default)]
    pub n_trees: Option<usize>,
    #[serde(default)]
    pub estimator: Option<VarianceEstimator>,
    #[serde(default)]
    pub extratrees: Option<bool>,
    #[serde(default)]
    pub catch_errors: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcqSection {
    #[serde(default)]
    pub kind: Option<AcqKind>,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub lambda_range: Option<(f64, f64)>,
    #[serde(default)]
    pub epsilon_max: Option<f64>,
    #[serde(default)]
    pub model_scale: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcqOptSection {
    #[serde(default)]
    pub kind: Option<AcqOptKind>,
    #[serde(default)]
    pub budget: Option<usize>,
    #[serde(default)]
    pub n_ls_runs: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSection {
    #[serde(default)]
    pub kind: Option<InitKind>,
    #[serde(default)]
    pub fraction: Option<f64>,
    #[serde(default)]
    pub size: Option<usize>,
    /// Points evaluated first, as objects keyed by parameter name.
    #[serde(default)]
    pub design: Option<Vec<Map<String, Json>>>,
}

/// What a run executes.
#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    Bo(Box<LoopConfig>),
    RandomSearch,
}

impl RunConfig {
    /// Parses JSON text; errors carry line and column.
    pub fn from_json_str(text: &str) -> Result<RunConfig, BenchError> {
        serde_json::from_str(text).map_err(|e| BenchError::Config(format!("run config: {e}")))
    }

    pub fn from_json(value: Json) -> Result<RunConfig, BenchError> {
        serde_json::from_value(value).map_err(|e| BenchError::Config(format!("run config: {e}")))
    }

    pub fn budget_for(&self, problem: &BenchProblem) -> usize {
        self.budget
            .unwrap_or_else(|| problem.budget(self.budget_rule.unwrap_or_default()))
    }

    /// Resolves the configuration against `problem`'s default.
    pub fn method(&self, problem: &BenchProblem) -> Result<Method, BenchError> {
        let bad = |m: String| Err(BenchError::Config(m));
        let loop_kind = match self.loop_kind.as_deref() {
            Some("random_search") => return Ok(Method::RandomSearch),
            Some(key) => match LoopKind::from_key(key) {
                Some(k) => k,
                None => return bad(format!("unknown loop '{key}'")),
            },
            None if problem.is_multi_objective() => LoopKind::Parego,
            None => LoopKind::Ego,
        };
        let mut c = LoopConfig::default_for(&problem.space).with_loop(loop_kind);

        if let Some(s) = &self.surrogate {
            match s.kind.as_deref() {
                None => {}
                Some("gp") if !matches!(c.surrogate.model, ModelConfig::Gp(_)) => {
                    c.surrogate.model = ModelConfig::Gp(GpConfig::default());
                }
                Some("rf") if !matches!(c.surrogate.model, ModelConfig::Forest(_)) => {
                    c.surrogate.model = ModelConfig::Forest(ForestConfig::default());
                }
                Some("gp" | "rf") => {}
                Some(k) => return bad(format!("unknown surrogate kind '{k}'")),
            }
            match &mut c.surrogate.model {
                ModelConfig::Gp(g) => {
                    if let Some(k) = s.kernel {
                        g.kernel = k;
                    }
                    match &s.nugget {
                        None => {}
                        Some(Json::String(v)) if v == "free" => g.nugget = Nugget::Free,
                        Some(v) => match v.as_f64() {
                            Some(x) if x >= 0.0 => g.nugget = Nugget::Fixed(x),
                            _ => return bad(format!("nugget must be a non-negative number or \"free\", got {v}")),
                        },
                    }
                    if s.n_trees.is_some() || s.estimator.is_some() || s.extratrees.is_some() {
                        return bad("forest settings given for a gp surrogate".into());
                    }
                }
                ModelConfig::Forest(f) => {
                    if s.kernel.is_some() || s.nugget.is_some() {
                        return bad("gp settings given for an rf surrogate".into());
                    }
                    if let Some(n) = s.n_trees {
                        f.n_trees = n;
                    }
                    if let Some(e) = s.estimator {
                        f.estimator = e;
                    }
                    if let Some(x) = s.extratrees {
                        f.extratrees = x;
                    }
                }
            }
            if let Some(x) = s.catch_errors {
                c.surrogate.catch_errors = x;
            }
        }
        if let Some(t) = self.output_trafo {
            c.surrogate.output_trafo = t;
        }
        if let Some(a) = &self.acq {
            if let Some(k) = a.kind {
                c.acq.kind = k;
            }
            if let Some(x) = a.lambda {
                c.acq.lambda = x;
            }
            if let Some(x) = a.epsilon {
                c.acq.epsilon = x;
            }
            if let Some(x) = a.lambda_range {
                c.acq.lambda_range = x;
            }
            if let Some(x) = a.epsilon_max {
                c.acq.epsilon_max = x;
            }
            if let Some(x) = a.model_scale {
                c.acq.model_scale = x;
            }
        }
        if let Some(o) = &self.acqopt {
            if let Some(k) = o.kind {
                c.acqopt.kind = k;
            }
            if o.budget.is_some() {
                c.acqopt.budget = o.budget;
            }
            if let Some(n) = o.n_ls_runs {
                c.acqopt.n_ls_runs = n;
            }
        }
        if let Some(i) = &self.init {
            if let Some(k) = i.kind {
                c.init_kind = k;
            }
            if let Some(f) = i.fraction {
                c.init_fraction = f;
            }
            if i.size.is_some() {
                c.init_size = i.size;
            }
            if let Some(d) = &i.design {
                c.warmstart_design = d
                    .iter()
                    .map(|m| point_from_json(&problem.space, m))
                    .collect::<Result<_, _>>()
                    .map_err(|e| BenchError::Config(format!("init.design: {e}")))?;
            }
        }
        if let Some(r) = self.random_interleave {
            c.random_interleave_iter = r;
        }
        if let Some(q) = self.q {
            c.q = q;
        }
        if let Some(l) = self.liar {
            c.liar = l;
        }
        c.validate().map_err(|e| BenchError::Config(e.to_string()))?;
        Ok(Method::Bo(Box::new(c)))
    }
}

/// Sets `value` at a dotted path such as `acq.lambda`, creating objects on
/// the way.
pub fn set_dotted(root: &mut Json, path: &str, value: Json) -> Result<(), BenchError> {
    let mut node = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| BenchError::Config(format!("'{path}' crosses a non-object value")))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj.entry(part.to_string()).or_insert_with(|| Json::Object(Map::new()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{hierarchical, sinusoidal};

    #[test]
    fn empty_config_is_the_default() {
        let p = sinusoidal();
        let m = RunConfig::from_json_str("{}").unwrap().method(&p).unwrap();
        assert_eq!(m, Method::Bo(Box::new(LoopConfig::default_for(&p.space))));
        let h = hierarchical();
        let m = RunConfig::default().method(&h).unwrap();
        assert_eq!(m, Method::Bo(Box::new(LoopConfig::mixed_default())));
    }

    #[test]
    fn keys_override_the_default() {
        let p = sinusoidal();
        let text = r#"{"loop": "bayesopt_mpcl", "q": 3, "surrogate": {"kernel": "gauss", "nugget": "free"},
            "acq": {"kind": "ei"}, "acqopt": {"kind": "local_search", "budget": 50},
            "init": {"kind": "sobol", "fraction": 0.25, "design": [{"x": 0.1}]},
            "output_trafo": "none", "random_interleave": 4}"#;
        let Method::Bo(c) = RunConfig::from_json_str(text).unwrap().method(&p).unwrap() else {
            panic!()
        };
        assert_eq!(c.loop_kind, LoopKind::Mpcl);
        assert_eq!(c.q, 3);
        assert_eq!(c.acq.kind, AcqKind::Ei);
        assert_eq!(c.acqopt.kind, AcqOptKind::LocalSearch);
        assert_eq!(c.acqopt.budget, Some(50));
        assert_eq!(c.init_kind, InitKind::Sobol);
        assert_eq!(c.warmstart_design.len(), 1);
        assert_eq!(c.surrogate.output_trafo, OutputTrafoKind::None);
        assert_eq!(c.random_interleave_iter, 4);
        let ModelConfig::Gp(g) = &c.surrogate.model else { panic!() };
        assert_eq!(g.kernel, Kernel::Gauss);
        assert_eq!(g.nugget, Nugget::Free);
    }

    #[test]
    fn malformed_configs_are_config_errors_with_positions() {
        let p = sinusoidal();
        let e = RunConfig::from_json_str("{\n  \"acq\": {\"kind\": \"nope\"}\n}").unwrap_err();
        assert!(matches!(&e, BenchError::Config(m) if m.contains("line 2")), "{e}");
        assert!(RunConfig::from_json_str("{\"typo\": 1}").is_err());
        let c = RunConfig::from_json_str(r#"{"surrogate": {"kind": "rf", "kernel": "exp"}}"#).unwrap();
        assert!(matches!(c.method(&p), Err(BenchError::Config(_))));
        let c = RunConfig::from_json_str(r#"{"loop": "nope"}"#).unwrap();
        assert!(matches!(c.method(&p), Err(BenchError::Config(_))));
    }

    #[test]
    fn random_search_and_budgets() {
        let p = sinusoidal();
        let c = RunConfig::from_json_str(r#"{"loop": "random_search", "budget_rule": "tune"}"#).unwrap();
        assert_eq!(c.method(&p).unwrap(), Method::RandomSearch);
        assert_eq!(c.budget_for(&p), 140);
        assert_eq!(RunConfig::default().budget_for(&p), 60);
    }

    #[test]
    fn dotted_paths() {
        let mut v = serde_json::json!({"acq": {"kind": "cb"}});
        set_dotted(&mut v, "acq.lambda", Json::from(2.0)).unwrap();
        set_dotted(&mut v, "surrogate.kernel", Json::from("exp")).unwrap();
        set_dotted(&mut v, "random_interleave", Json::from(3)).unwrap();
        assert_eq!(
            v,
            serde_json::json!({"acq": {"kind": "cb", "lambda": 2.0}, "surrogate": {"kernel": "exp"}, "random_interleave": 3})
        );
        assert!(set_dotted(&mut v, "random_interleave.x", Json::from(1)).is_err());
    }
}
