//! Coordinate-descent search over a grid of BO configurations.
//!
//! Each sweep scores every configuration that differs from the incumbent in
//! one parameter. When the changed parameter activates dependent
//! parameters, all combinations of their values are scored with it. The best
//! candidate replaces the incumbent if it is strictly better; the search
//! stops after a sweep without improvement.

use std::collections::BTreeMap;

use mbo_core::derive_seed;
use mbo_core::engine::Clock;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value as Json};

use crate::config::{set_dotted, Method, RunConfig};
use crate::problems::BenchProblem;
use crate::rsns::{rsns, RsnsScale};
use crate::runner::run_method;
use crate::BenchError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridParam {
    /// Dotted run-config key, e.g. `acq.lambda`.
    pub name: String,
    pub values: Vec<Json>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depends: Option<GridDepends>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridDepends {
    pub on: String,
    pub equals: Json,
}

/// Value index per parameter; `None` while the parameter is inactive.
pub type GridConfig = Vec<Option<usize>>;

#[derive(Debug, Clone, PartialEq)]
pub struct CdGrid {
    params: Vec<GridParam>,
    /// Parent index and required value index.
    parents: Vec<Option<(usize, usize)>>,
}

impl CdGrid {
    /// Parents must be listed before their children.
    pub fn new(params: Vec<GridParam>) -> Result<CdGrid, BenchError> {
        let bad = |m: String| Err(BenchError::Config(m));
        let mut parents = Vec::with_capacity(params.len());
        for (i, p) in params.iter().enumerate() {
            if p.values.is_empty() {
                return bad(format!("grid parameter '{}' has no values", p.name));
            }
            if params[..i].iter().any(|q| q.name == p.name) {
                return bad(format!("grid parameter '{}' listed twice", p.name));
            }
            parents.push(match &p.depends {
                None => None,
                Some(d) => {
                    let Some(k) = params[..i].iter().position(|q| q.name == d.on) else {
                        return bad(format!("'{}' depends on '{}', which is not listed before it", p.name, d.on));
                    };
                    let Some(v) = params[k].values.iter().position(|v| *v == d.equals) else {
                        return bad(format!("'{}' depends on a value '{}' does not take", p.name, d.on));
                    };
                    Some((k, v))
                }
            });
        }
        Ok(CdGrid { params, parents })
    }

    pub fn params(&self) -> &[GridParam] {
        &self.params
    }

    fn active(&self, cfg: &GridConfig, i: usize) -> bool {
        match self.parents[i] {
            None => true,
            Some((k, v)) => cfg[k] == Some(v),
        }
    }

    /// Deactivates parameters whose condition fails and expands every newly
    /// active unset parameter over all its values.
    fn complete(&self, cfg: GridConfig) -> Vec<GridConfig> {
        let mut partial = vec![cfg];
        for i in 0..self.params.len() {
            let mut next = Vec::with_capacity(partial.len());
            for mut c in partial {
                if !self.active(&c, i) {
                    c[i] = None;
                    next.push(c);
                } else if c[i].is_some() {
                    next.push(c);
                } else {
                    for v in 0..self.params[i].values.len() {
                        let mut e = c.clone();
                        e[i] = Some(v);
                        next.push(e);
                    }
                }
            }
            partial = next;
        }
        partial
    }

    /// Every valid configuration of the grid.
    pub fn enumerate(&self) -> Vec<GridConfig> {
        self.complete(vec![None; self.params.len()])
    }

    /// One-parameter exchange neighbors of `cfg`, in parameter and value
    /// order.
    pub fn neighbors(&self, cfg: &GridConfig) -> Vec<GridConfig> {
        let mut out = Vec::new();
        for (i, cur) in cfg.iter().enumerate() {
            let Some(cur) = *cur else { continue };
            for v in (0..self.params[i].values.len()).filter(|&v| v != cur) {
                let mut c = cfg.clone();
                c[i] = Some(v);
                // children of i are redrawn jointly with the new value
                for j in i + 1..c.len() {
                    if self.depends_on(j, i) {
                        c[j] = None;
                    }
                }
                out.extend(self.complete(c));
            }
        }
        out
    }

    fn depends_on(&self, j: usize, i: usize) -> bool {
        let mut k = j;
        while let Some((p, _)) = self.parents[k] {
            if p == i {
                return true;
            }
            k = p;
        }
        false
    }

    /// Configuration given as an object of values keyed by parameter name;
    /// missing active parameters take their first value.
    pub fn config_from_json(&self, obj: &Map<String, Json>) -> Result<GridConfig, BenchError> {
        for k in obj.keys() {
            if !self.params.iter().any(|p| &p.name == k) {
                return Err(BenchError::Config(format!("start config names unknown parameter '{k}'")));
            }
        }
        let mut cfg: GridConfig = vec![None; self.params.len()];
        for i in 0..self.params.len() {
            if !self.active(&cfg, i) {
                continue;
            }
            cfg[i] = Some(match obj.get(&self.params[i].name) {
                None => 0,
                Some(v) => self.params[i].values.iter().position(|x| x == v).ok_or_else(|| {
                    BenchError::Config(format!("{v} is not a value of '{}'", self.params[i].name))
                })?,
            });
        }
        Ok(cfg)
    }

    /// Active `(name, value)` pairs.
    pub fn assignments(&self, cfg: &GridConfig) -> Vec<(String, Json)> {
        cfg.iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|v| (self.params[i].name.clone(), self.params[i].values[v].clone())))
            .collect()
    }

    /// Compact `name=value` description, `;`-separated.
    pub fn describe(&self, cfg: &GridConfig) -> String {
        self.assignments(cfg)
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";")
    }
}

/// Scores a configuration on one problem for one seed; higher is better.
pub trait CdEvaluator {
    fn n_problems(&self) -> usize;
    fn score(&self, grid: &CdGrid, config: &GridConfig, problem: usize, seed: u64) -> Result<f64, BenchError>;
}

/// Toy evaluator whose score is a sum of per-parameter tables.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableToy {
    pub tables: Vec<Vec<f64>>,
}

impl CdEvaluator for SeparableToy {
    fn n_problems(&self) -> usize {
        1
    }

    fn score(&self, _grid: &CdGrid, config: &GridConfig, _problem: usize, _seed: u64) -> Result<f64, BenchError> {
        Ok(config
            .iter()
            .zip(&self.tables)
            .filter_map(|(v, t)| v.map(|v| t[v]))
            .sum())
    }
}

/// Scores configurations by the RSNS of real BO runs.
pub struct RsnsEvaluator {
    /// Run-config JSON the grid values are written into.
    pub base: Json,
    pub problems: Vec<BenchProblem>,
    pub scales: Vec<RsnsScale>,
}

impl CdEvaluator for RsnsEvaluator {
    fn n_problems(&self) -> usize {
        self.problems.len()
    }

    fn score(&self, grid: &CdGrid, config: &GridConfig, problem: usize, seed: u64) -> Result<f64, BenchError> {
        let mut json = self.base.clone();
        for (k, v) in grid.assignments(config) {
            set_dotted(&mut json, &k, v)?;
        }
        let rc = RunConfig::from_json(json)?;
        let p = &self.problems[problem];
        let method: Method = rc.method(p)?;
        let out = run_method(p, &method, rc.budget_for(p), "cd", seed, Clock::Logical)?;
        rsns(out.best(), &self.scales[problem])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CdIteration {
    pub iteration: usize,
    pub incumbent: String,
    pub score: f64,
    /// Candidates scored in this sweep (1 for the starting evaluation).
    pub n_candidates: usize,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdState {
    pub incumbent: GridConfig,
    pub incumbent_score: f64,
    pub log: Vec<CdIteration>,
    /// Every scored configuration in first-evaluation order.
    pub evaluated: Vec<(GridConfig, f64)>,
}

/// Mean over seeds of the mean over problems; seed `s` of `n_repeats` is
/// `derive_seed(seed, s)`.
fn mean_score(
    grid: &CdGrid,
    eval: &dyn CdEvaluator,
    cfg: &GridConfig,
    n_repeats: usize,
    seed: u64,
) -> Result<f64, BenchError> {
    let mut total = 0.0;
    for s in 0..n_repeats {
        let run_seed = derive_seed(seed, s as u64);
        let mut per_seed = 0.0;
        for p in 0..eval.n_problems() {
            per_seed += eval.score(grid, cfg, p, run_seed)?;
        }
        total += per_seed / eval.n_problems() as f64;
    }
    Ok(total / n_repeats as f64)
}

/// Coordinate descent from `start`.
pub fn run_cd(
    grid: &CdGrid,
    eval: &dyn CdEvaluator,
    start: GridConfig,
    n_repeats: usize,
    seed: u64,
) -> Result<CdState, BenchError> {
    if n_repeats == 0 || eval.n_problems() == 0 {
        return Err(BenchError::Config("coordinate descent needs repeats and problems".into()));
    }
    if !grid.enumerate().contains(&start) {
        return Err(BenchError::Config("start configuration is not in the grid".into()));
    }
    let mut cache: BTreeMap<GridConfig, f64> = BTreeMap::new();
    let mut evaluated = Vec::new();
    let mut score_of = |cfg: &GridConfig| -> Result<f64, BenchError> {
        if let Some(&s) = cache.get(cfg) {
            return Ok(s);
        }
        let s = mean_score(grid, eval, cfg, n_repeats, seed)?;
        cache.insert(cfg.clone(), s);
        evaluated.push((cfg.clone(), s));
        Ok(s)
    };

    let mut incumbent = start;
    let mut best = score_of(&incumbent)?;
    let mut log = vec![CdIteration {
        iteration: 0,
        incumbent: grid.describe(&incumbent),
        score: best,
        n_candidates: 1,
        accepted: true,
    }];
    loop {
        let candidates = grid.neighbors(&incumbent);
        let mut winner: Option<(GridConfig, f64)> = None;
        for c in &candidates {
            let s = score_of(c)?;
            if s > best && winner.as_ref().is_none_or(|(_, w)| s > *w) {
                winner = Some((c.clone(), s));
            }
        }
        let accepted = winner.is_some();
        if let Some((c, s)) = winner {
            incumbent = c;
            best = s;
        }
        log.push(CdIteration {
            iteration: log.len(),
            incumbent: grid.describe(&incumbent),
            score: best,
            n_candidates: candidates.len(),
            accepted,
        });
        if !accepted {
            break;
        }
    }
    Ok(CdState {
        incumbent,
        incumbent_score: best,
        log,
        evaluated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn param(name: &str, values: Vec<Json>) -> GridParam {
        GridParam {
            name: name.into(),
            values,
            depends: None,
        }
    }

    fn dependent_grid() -> CdGrid {
        let mut lambda = param("acq.lambda", vec![json!(1), json!(2), json!(3)]);
        lambda.depends = Some(GridDepends {
            on: "acq.kind".into(),
            equals: json!("cb"),
        });
        CdGrid::new(vec![
            param("acq.kind", vec![json!("ei"), json!("cb")]),
            lambda,
            param("random_interleave", vec![json!(0), json!(4)]),
        ])
        .unwrap()
    }

    #[test]
    fn enumeration_respects_dependencies() {
        let g = dependent_grid();
        let all = g.enumerate();
        // ei x 2 interleave + cb x 3 lambdas x 2 interleave
        assert_eq!(all.len(), 8);
        assert!(all.contains(&vec![Some(0), None, Some(1)]));
    }

    #[test]
    fn switching_the_parent_expands_its_children() {
        let g = dependent_grid();
        let n = g.neighbors(&vec![Some(0), None, Some(0)]);
        assert_eq!(
            n,
            vec![
                vec![Some(1), Some(0), Some(0)],
                vec![Some(1), Some(1), Some(0)],
                vec![Some(1), Some(2), Some(0)],
                vec![Some(0), None, Some(1)],
            ]
        );
        let back = g.neighbors(&vec![Some(1), Some(2), Some(0)]);
        assert!(back.contains(&vec![Some(0), None, Some(0)]));
        assert!(back.contains(&vec![Some(1), Some(0), Some(0)]));
        assert_eq!(back.len(), 4);
    }

    #[test]
    fn single_parameter_accepts_once() {
        let g = CdGrid::new(vec![param("a", vec![json!("A"), json!("B")])]).unwrap();
        let toy = SeparableToy {
            tables: vec![vec![0.0, 1.0]],
        };
        let st = run_cd(&g, &toy, vec![Some(0)], 1, 0).unwrap();
        assert_eq!(st.incumbent, vec![Some(1)]);
        assert_eq!(st.log.iter().skip(1).filter(|l| l.accepted).count(), 1);
        assert_eq!(st.log.len(), 3);
    }

    #[test]
    fn optimum_start_stops_after_one_sweep() {
        let g = CdGrid::new(vec![param("a", vec![json!(0), json!(1)]), param("b", vec![json!(0), json!(1)])]).unwrap();
        let toy = SeparableToy {
            tables: vec![vec![1.0, 0.0], vec![0.0, 2.0]],
        };
        let st = run_cd(&g, &toy, vec![Some(0), Some(1)], 2, 0).unwrap();
        assert_eq!(st.log.len(), 2);
        assert!(!st.log[1].accepted);
        assert_eq!(st.incumbent_score, 3.0);
    }

    #[test]
    fn start_from_json_and_description() {
        let g = dependent_grid();
        let obj = json!({"acq.kind": "cb", "acq.lambda": 3});
        let cfg = g.config_from_json(obj.as_object().unwrap()).unwrap();
        assert_eq!(cfg, vec![Some(1), Some(2), Some(0)]);
        assert_eq!(g.describe(&cfg), "acq.kind=\"cb\";acq.lambda=3;random_interleave=0");
        assert!(g.config_from_json(json!({"x": 1}).as_object().unwrap()).is_err());
    }

    #[test]
    fn invalid_grids() {
        let mut child = param("b", vec![json!(1)]);
        child.depends = Some(GridDepends {
            on: "a".into(),
            equals: json!(1),
        });
        assert!(CdGrid::new(vec![child.clone(), param("a", vec![json!(1)])]).is_err());
        assert!(CdGrid::new(vec![param("a", vec![])]).is_err());
        assert!(CdGrid::new(vec![param("a", vec![json!(2)]), child]).is_err());
    }
}
