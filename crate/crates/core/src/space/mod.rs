//! Typed, bounded and dependency-aware search spaces.
//!
//! A [`ParamSpace`] is an ordered list of [`ParamDef`]s. Parameters may depend
//! on a single parent taking a specific value; a parameter whose condition is
//! not satisfied is *inactive* and holds `None` in a [`Point`].

mod design;
mod json;
mod sobol;
mod sobol_table;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use design::{sample_grid, sample_lhs, sample_random, sample_sobol};
pub use json::{point_from_json, point_to_json, SpaceJson};
pub use sobol::SobolSequence;

/// Largest dimension covered by the embedded Sobol direction numbers.
pub const SOBOL_MAX_DIM: usize = 64;

/// Unit-cube coordinate reserved for inactive parameters.
pub const INACTIVE_UNIT: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("duplicate parameter name `{0}`")]
    DuplicateName(String),
    #[error("parameter `{name}`: {reason}")]
    InvalidParam { name: String, reason: String },
    #[error("parameter `{child}` depends on unknown parameter `{parent}`")]
    UnknownParent { child: String, parent: String },
    #[error("dependency cycle involving `{0}`")]
    Cycle(String),
    #[error("invalid point: {0}")]
    InvalidPoint(String),
    #[error("{0} requires a space without dependencies")]
    Hierarchical(&'static str),
    #[error("design size must be at least 1")]
    EmptyDesign,
    #[error("grid resolution must be at least 2, got {0}")]
    Resolution(usize),
    #[error("sobol sequences support at most {SOBOL_MAX_DIM} dimensions, got {0}")]
    SobolDim(usize),
    #[error("malformed space description: {0}")]
    Json(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    Double,
    Integer,
    Factor,
    Logical,
}

impl ParamKind {
    pub fn is_numeric(self) -> bool {
        matches!(self, ParamKind::Double | ParamKind::Integer)
    }
}

/// Value of an active parameter.
///
/// Integers are stored as integral `Num` values; factors as the index of the
/// chosen level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Num(f64),
    Level(usize),
    Bool(bool),
}

impl Value {
    pub fn as_f64(&self) -> f64 {
        match *self {
            Value::Num(x) => x,
            Value::Level(k) => k as f64,
            Value::Bool(b) => f64::from(u8::from(b)),
        }
    }
}

/// Required parent value as written by the user, resolved against the parent
/// parameter when the space is built.
#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Text(String),
    Number(f64),
    Flag(bool),
}

impl From<&str> for Literal {
    fn from(s: &str) -> Self {
        Literal::Text(s.to_string())
    }
}

impl From<String> for Literal {
    fn from(s: String) -> Self {
        Literal::Text(s)
    }
}

impl From<f64> for Literal {
    fn from(x: f64) -> Self {
        Literal::Number(x)
    }
}

impl From<bool> for Literal {
    fn from(b: bool) -> Self {
        Literal::Flag(b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dependency {
    pub parent: String,
    pub equals: Literal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamDef {
    pub name: String,
    pub kind: ParamKind,
    pub lower: f64,
    pub upper: f64,
    pub levels: Vec<String>,
    pub log_scale: bool,
    pub depends_on: Option<Dependency>,
}

impl ParamDef {
    pub fn double(name: &str, lower: f64, upper: f64) -> Self {
        Self::numeric(name, ParamKind::Double, lower, upper)
    }

    pub fn integer(name: &str, lower: i64, upper: i64) -> Self {
        Self::numeric(name, ParamKind::Integer, lower as f64, upper as f64)
    }

    fn numeric(name: &str, kind: ParamKind, lower: f64, upper: f64) -> Self {
        ParamDef {
            name: name.to_string(),
            kind,
            lower,
            upper,
            levels: Vec::new(),
            log_scale: false,
            depends_on: None,
        }
    }

    pub fn factor(name: &str, levels: &[&str]) -> Self {
        ParamDef {
            name: name.to_string(),
            kind: ParamKind::Factor,
            lower: f64::NAN,
            upper: f64::NAN,
            levels: levels.iter().map(|s| s.to_string()).collect(),
            log_scale: false,
            depends_on: None,
        }
    }

    pub fn logical(name: &str) -> Self {
        ParamDef {
            name: name.to_string(),
            kind: ParamKind::Logical,
            lower: f64::NAN,
            upper: f64::NAN,
            levels: Vec::new(),
            log_scale: false,
            depends_on: None,
        }
    }

    /// Sample and map this parameter on the log scale.
    pub fn log(mut self) -> Self {
        self.log_scale = true;
        self
    }

    pub fn depends_on(mut self, parent: &str, equals: impl Into<Literal>) -> Self {
        self.depends_on = Some(Dependency {
            parent: parent.to_string(),
            equals: equals.into(),
        });
        self
    }

    pub fn n_levels(&self) -> usize {
        match self.kind {
            ParamKind::Factor => self.levels.len(),
            ParamKind::Logical => 2,
            _ => 0,
        }
    }

    fn check(&self) -> Result<(), SpaceError> {
        let bad = |reason: &str| SpaceError::InvalidParam {
            name: self.name.clone(),
            reason: reason.to_string(),
        };
        if self.name.is_empty() {
            return Err(bad("empty name"));
        }
        match self.kind {
            ParamKind::Double | ParamKind::Integer => {
                if !(self.lower.is_finite() && self.upper.is_finite()) {
                    return Err(bad("bounds must be finite"));
                }
                if self.lower >= self.upper {
                    return Err(bad("lower bound must be below upper bound"));
                }
                if self.log_scale && self.lower <= 0.0 {
                    return Err(bad("log scale requires a positive lower bound"));
                }
                if self.kind == ParamKind::Integer
                    && (self.lower.fract() != 0.0 || self.upper.fract() != 0.0)
                {
                    return Err(bad("integer bounds must be integral"));
                }
            }
            ParamKind::Factor => {
                if self.levels.is_empty() {
                    return Err(bad("factor needs at least one level"));
                }
                for (i, l) in self.levels.iter().enumerate() {
                    if self.levels[..i].contains(l) {
                        return Err(bad("factor levels must be distinct"));
                    }
                }
                if self.log_scale {
                    return Err(bad("log scale only applies to numeric parameters"));
                }
            }
            ParamKind::Logical => {
                if self.log_scale {
                    return Err(bad("log scale only applies to numeric parameters"));
                }
            }
        }
        Ok(())
    }

    /// Resolves a literal against this parameter's domain.
    fn resolve(&self, lit: &Literal) -> Option<Value> {
        match (self.kind, lit) {
            (ParamKind::Factor, Literal::Text(s)) => {
                self.levels.iter().position(|l| l == s).map(Value::Level)
            }
            (ParamKind::Logical, Literal::Flag(b)) => Some(Value::Bool(*b)),
            (ParamKind::Logical, Literal::Text(s)) => match s.as_str() {
                "TRUE" | "true" => Some(Value::Bool(true)),
                "FALSE" | "false" => Some(Value::Bool(false)),
                _ => None,
            },
            (ParamKind::Double | ParamKind::Integer, Literal::Number(x)) => {
                let ok = *x >= self.lower
                    && *x <= self.upper
                    && (self.kind == ParamKind::Double || x.fract() == 0.0);
                ok.then_some(Value::Num(*x))
            }
            _ => None,
        }
    }

    /// Whether `v` is a legal value for this parameter.
    pub fn contains(&self, v: &Value) -> bool {
        match (self.kind, v) {
            (ParamKind::Double, Value::Num(x)) => *x >= self.lower && *x <= self.upper,
            (ParamKind::Integer, Value::Num(x)) => {
                *x >= self.lower && *x <= self.upper && x.fract() == 0.0
            }
            (ParamKind::Factor, Value::Level(k)) => *k < self.levels.len(),
            (ParamKind::Logical, Value::Bool(_)) => true,
            _ => false,
        }
    }

    /// Maps a value into `[0, 1]`. Factors map level `k` of `L` to `k / (L - 1)`.
    pub fn to_unit(&self, v: &Value) -> f64 {
        match (self.kind, v) {
            (ParamKind::Double | ParamKind::Integer, Value::Num(x)) => {
                if self.log_scale {
                    (x.ln() - self.lower.ln()) / (self.upper.ln() - self.lower.ln())
                } else {
                    (x - self.lower) / (self.upper - self.lower)
                }
            }
            (ParamKind::Factor, Value::Level(k)) => {
                if self.levels.len() > 1 {
                    *k as f64 / (self.levels.len() - 1) as f64
                } else {
                    INACTIVE_UNIT
                }
            }
            (ParamKind::Logical, Value::Bool(b)) => f64::from(u8::from(*b)),
            _ => f64::NAN,
        }
    }

    /// Inverse of [`ParamDef::to_unit`]; `u` is clamped to `[0, 1]`.
    pub fn from_unit(&self, u: f64) -> Value {
        let u = u.clamp(0.0, 1.0);
        match self.kind {
            ParamKind::Double => Value::Num(self.unit_to_num(u)),
            ParamKind::Integer => {
                let x = self.unit_to_num(u).round_ties_even();
                Value::Num(x.clamp(self.lower, self.upper))
            }
            ParamKind::Factor => {
                let top = self.levels.len() - 1;
                Value::Level(((u * top as f64).round() as usize).min(top))
            }
            ParamKind::Logical => Value::Bool(u >= 0.5),
        }
    }

    fn unit_to_num(&self, u: f64) -> f64 {
        let x = if self.log_scale {
            (self.lower.ln() + u * (self.upper.ln() - self.lower.ln())).exp()
        } else {
            self.lower + u * (self.upper - self.lower)
        };
        // exp/ln round-trips may step just outside the box
        x.clamp(self.lower, self.upper)
    }

    /// Uniform draw over the parameter's domain (log-uniform when log-scaled).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Value {
        match self.kind {
            ParamKind::Double | ParamKind::Integer => self.from_unit(rng.random::<f64>()),
            ParamKind::Factor => Value::Level(rng.random_range(0..self.levels.len())),
            ParamKind::Logical => Value::Bool(rng.random::<bool>()),
        }
    }

    /// Single-parameter neighbour used by local search: Gaussian step on the
    /// unit scale for numerics, a different level for factors, a flip for
    /// logicals.
    pub fn mutate<R: Rng + ?Sized>(&self, v: &Value, sd: f64, rng: &mut R) -> Value {
        match (self.kind, v) {
            (ParamKind::Double | ParamKind::Integer, _) => {
                let z: f64 = StandardNormal.sample(rng);
                self.from_unit(self.to_unit(v) + sd * z)
            }
            (ParamKind::Factor, Value::Level(k)) => {
                let n = self.levels.len();
                if n < 2 {
                    return *v;
                }
                let mut j = rng.random_range(0..n - 1);
                if j >= *k {
                    j += 1;
                }
                Value::Level(j)
            }
            (ParamKind::Logical, Value::Bool(b)) => Value::Bool(!b),
            _ => *v,
        }
    }

    /// Display form used by CSV and JSON output.
    pub fn format_value(&self, v: &Value) -> String {
        match v {
            Value::Num(x) => format!("{x}"),
            Value::Level(k) => self.levels.get(*k).cloned().unwrap_or_default(),
            Value::Bool(b) => if *b { "TRUE" } else { "FALSE" }.to_string(),
        }
    }

    pub fn parse_value(&self, s: &str) -> Option<Value> {
        match self.kind {
            ParamKind::Double | ParamKind::Integer => s.parse::<f64>().ok().map(Value::Num),
            ParamKind::Factor => self.levels.iter().position(|l| l == s).map(Value::Level),
            ParamKind::Logical => match s {
                "TRUE" | "true" => Some(Value::Bool(true)),
                "FALSE" | "false" => Some(Value::Bool(false)),
                _ => None,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Condition {
    parent: usize,
    equals: Value,
}

/// A point in a [`ParamSpace`]; inactive parameters hold `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub values: Vec<Option<Value>>,
}

impl Point {
    pub fn new(values: Vec<Option<Value>>) -> Self {
        Point { values }
    }

    /// Point of plain numbers, one per parameter.
    pub fn from_nums(xs: &[f64]) -> Self {
        Point {
            values: xs.iter().map(|&x| Some(Value::Num(x))).collect(),
        }
    }

    pub fn num(&self, i: usize) -> Option<f64> {
        match self.values.get(i)? {
            Some(Value::Num(x)) => Some(*x),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub param: String,
    pub reason: String,
}

/// Unit-cube representation of a point plus its activity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitPoint {
    pub values: Vec<f64>,
    pub active: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct ParamSpace {
    params: Vec<ParamDef>,
    conditions: Vec<Option<Condition>>,
    topo_order: Vec<usize>,
}

impl ParamSpace {
    pub fn new(params: Vec<ParamDef>) -> Result<Self, SpaceError> {
        for (i, p) in params.iter().enumerate() {
            p.check()?;
            if params[..i].iter().any(|q| q.name == p.name) {
                return Err(SpaceError::DuplicateName(p.name.clone()));
            }
        }
        let mut conditions = Vec::with_capacity(params.len());
        for p in &params {
            let cond = match &p.depends_on {
                None => None,
                Some(dep) => {
                    let parent = params.iter().position(|q| q.name == dep.parent).ok_or_else(
                        || SpaceError::UnknownParent {
                            child: p.name.clone(),
                            parent: dep.parent.clone(),
                        },
                    )?;
                    let equals = params[parent].resolve(&dep.equals).ok_or_else(|| {
                        SpaceError::InvalidParam {
                            name: p.name.clone(),
                            reason: format!(
                                "required value {:?} is not in the domain of `{}`",
                                dep.equals, dep.parent
                            ),
                        }
                    })?;
                    Some(Condition { parent, equals })
                }
            };
            conditions.push(cond);
        }
        let topo_order = topological_order(&params, &conditions)?;
        Ok(ParamSpace {
            params,
            conditions,
            topo_order,
        })
    }

    pub fn dim(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[ParamDef] {
        &self.params
    }

    pub fn param(&self, i: usize) -> &ParamDef {
        &self.params[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    pub fn topo_order(&self) -> &[usize] {
        &self.topo_order
    }

    pub fn is_hierarchical(&self) -> bool {
        self.conditions.iter().any(Option::is_some)
    }

    /// True iff every parameter is double or integer and there are no
    /// dependencies.
    pub fn is_numeric(&self) -> bool {
        !self.is_hierarchical() && self.params.iter().all(|p| p.kind.is_numeric())
    }

    /// Parent index of parameter `i`, if it is conditional.
    pub fn parent_of(&self, i: usize) -> Option<usize> {
        self.conditions[i].map(|c| c.parent)
    }

    /// Which parameters must be active given the values of their parents.
    pub fn activity(&self, values: &[Option<Value>]) -> Vec<bool> {
        let mut active = vec![true; self.params.len()];
        for &i in &self.topo_order {
            if let Some(c) = self.conditions[i] {
                active[i] = active[c.parent] && values[c.parent] == Some(c.equals);
            }
        }
        active
    }

    pub fn validate(&self, p: &Point) -> Vec<Violation> {
        if p.values.len() != self.params.len() {
            return vec![Violation {
                param: String::from("<point>"),
                reason: format!(
                    "expected {} values, found {}",
                    self.params.len(),
                    p.values.len()
                ),
            }];
        }
        let active = self.activity(&p.values);
        let mut out = Vec::new();
        for (i, def) in self.params.iter().enumerate() {
            let reason = match (&p.values[i], active[i]) {
                (None, true) => Some("active parameter is missing".to_string()),
                (Some(_), false) => Some("inactive parameter must be missing".to_string()),
                (Some(v), true) if !def.contains(v) => {
                    Some(format!("value {v:?} is outside the domain"))
                }
                _ => None,
            };
            if let Some(reason) = reason {
                out.push(Violation {
                    param: def.name.clone(),
                    reason,
                });
            }
        }
        out
    }

    pub fn is_valid(&self, p: &Point) -> bool {
        self.validate(p).is_empty()
    }

    /// Restores the activity invariant in topological order: unsatisfied
    /// parameters are cleared, newly active missing ones drawn at random.
    pub fn repair<R: Rng + ?Sized>(&self, values: &mut [Option<Value>], rng: &mut R) {
        let mut active = vec![true; self.params.len()];
        for &i in &self.topo_order {
            if let Some(c) = self.conditions[i] {
                active[i] = active[c.parent] && values[c.parent] == Some(c.equals);
            }
            if !active[i] {
                values[i] = None;
            } else if values[i].is_none() {
                values[i] = Some(self.params[i].sample(rng));
            }
        }
    }

    pub fn to_unit(&self, p: &Point) -> Result<UnitPoint, SpaceError> {
        let violations = self.validate(p);
        if let Some(v) = violations.first() {
            return Err(SpaceError::InvalidPoint(format!("{}: {}", v.param, v.reason)));
        }
        let mut values = Vec::with_capacity(self.dim());
        let mut active = Vec::with_capacity(self.dim());
        for (def, v) in self.params.iter().zip(&p.values) {
            match v {
                Some(v) => {
                    values.push(def.to_unit(v));
                    active.push(true);
                }
                None => {
                    values.push(INACTIVE_UNIT);
                    active.push(false);
                }
            }
        }
        Ok(UnitPoint { values, active })
    }

    /// Decodes a unit-cube vector; activity follows from the decoded parent
    /// values. Coordinates are clamped to `[0, 1]`.
    pub fn from_unit(&self, v: &[f64]) -> Result<Point, SpaceError> {
        if v.len() != self.dim() {
            return Err(SpaceError::InvalidPoint(format!(
                "expected {} coordinates, found {}",
                self.dim(),
                v.len()
            )));
        }
        if v.iter().any(|x| x.is_nan()) {
            return Err(SpaceError::InvalidPoint("NaN coordinate".into()));
        }
        let mut values: Vec<Option<Value>> = vec![None; self.dim()];
        let mut active = vec![true; self.dim()];
        for &i in &self.topo_order {
            if let Some(c) = self.conditions[i] {
                active[i] = active[c.parent] && values[c.parent] == Some(c.equals);
            }
            if active[i] {
                values[i] = Some(self.params[i].from_unit(v[i]));
            }
        }
        Ok(Point { values })
    }
}

fn topological_order(
    params: &[ParamDef],
    conditions: &[Option<Condition>],
) -> Result<Vec<usize>, SpaceError> {
    let n = params.len();
    let mut order = Vec::with_capacity(n);
    let mut placed = vec![false; n];
    // single-parent graph: repeatedly place parameters whose parent is placed,
    // in declaration order, so flat spaces keep their natural order
    while order.len() < n {
        let before = order.len();
        for i in 0..n {
            if placed[i] {
                continue;
            }
            let ready = match conditions[i] {
                None => true,
                Some(c) => placed[c.parent],
            };
            if ready {
                placed[i] = true;
                order.push(i);
            }
        }
        if order.len() == before {
            let stuck = (0..n).find(|&i| !placed[i]).unwrap_or(0);
            return Err(SpaceError::Cycle(params[stuck].name.clone()));
        }
    }
    Ok(order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn branch_space() -> ParamSpace {
        ParamSpace::new(vec![
            ParamDef::factor("branch", &["a", "b"]),
            ParamDef::double("c", 0.0, 1.0).depends_on("branch", "a"),
        ])
        .unwrap()
    }

    #[test]
    fn interior_point_is_valid() {
        let s = ParamSpace::new(vec![ParamDef::double("x", 0.0, 1.0)]).unwrap();
        assert!(s.is_valid(&Point::from_nums(&[0.5])));
        assert!(!s.is_valid(&Point::from_nums(&[1.5])));
    }

    #[test]
    fn inactive_child_must_be_missing() {
        let s = branch_space();
        let p = Point::new(vec![Some(Value::Level(1)), Some(Value::Num(0.3))]);
        let v = s.validate(&p);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].param, "c");
    }

    #[test]
    fn active_child_must_be_present() {
        let s = branch_space();
        let p = Point::new(vec![Some(Value::Level(0)), None]);
        let v = s.validate(&p);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].param, "c");
    }

    #[test]
    fn rejects_bad_definitions() {
        assert!(ParamSpace::new(vec![ParamDef::double("x", 1.0, 1.0)]).is_err());
        assert!(ParamSpace::new(vec![ParamDef::double("x", 0.0, 1.0).log()]).is_err());
        assert!(ParamSpace::new(vec![ParamDef::factor("f", &["a", "a"])]).is_err());
        assert!(ParamSpace::new(vec![ParamDef::factor("f", &[])]).is_err());
        assert!(ParamSpace::new(vec![
            ParamDef::double("x", 0.0, 1.0),
            ParamDef::double("x", 0.0, 1.0)
        ])
        .is_err());
        assert!(matches!(
            ParamSpace::new(vec![ParamDef::double("c", 0.0, 1.0).depends_on("nope", "a")]),
            Err(SpaceError::UnknownParent { .. })
        ));
        assert!(ParamSpace::new(vec![
            ParamDef::factor("branch", &["a", "b"]),
            ParamDef::double("c", 0.0, 1.0).depends_on("branch", "z"),
        ])
        .is_err());
    }

    #[test]
    fn cycles_are_rejected() {
        let r = ParamSpace::new(vec![
            ParamDef::logical("a").depends_on("b", true),
            ParamDef::logical("b").depends_on("a", true),
        ]);
        assert!(matches!(r, Err(SpaceError::Cycle(_))));
    }

    #[test]
    fn children_may_be_declared_before_parents() {
        let s = ParamSpace::new(vec![
            ParamDef::double("c", 0.0, 1.0).depends_on("branch", "a"),
            ParamDef::factor("branch", &["a", "b"]),
        ])
        .unwrap();
        assert_eq!(s.topo_order(), &[1, 0]);
    }

    #[test]
    fn unit_mapping_examples() {
        let s = ParamSpace::new(vec![
            ParamDef::double("x", 2.0, 4.0),
            ParamDef::double("y", 1.0, 100.0).log(),
        ])
        .unwrap();
        let u = s.to_unit(&Point::from_nums(&[3.0, 10.0])).unwrap();
        assert!((u.values[0] - 0.5).abs() < 1e-15);
        assert!((u.values[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn inactive_dims_use_reserved_unit_value() {
        let s = branch_space();
        let u = s
            .to_unit(&Point::new(vec![Some(Value::Level(1)), None]))
            .unwrap();
        assert_eq!(u.values, vec![1.0, INACTIVE_UNIT]);
        assert_eq!(u.active, vec![true, false]);
        let back = s.from_unit(&u.values).unwrap();
        assert_eq!(back.values, vec![Some(Value::Level(1)), None]);
    }

    #[test]
    fn repair_restores_activity() {
        let s = branch_space();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut vals = vec![Some(Value::Level(0)), None];
        s.repair(&mut vals, &mut rng);
        assert!(vals[1].is_some());
        vals[0] = Some(Value::Level(1));
        s.repair(&mut vals, &mut rng);
        assert_eq!(vals[1], None);
    }

    #[test]
    fn factor_mutation_picks_other_level() {
        let f = ParamDef::factor("f", &["a", "b", "c"]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let v = f.mutate(&Value::Level(1), 0.1, &mut rng);
            assert_ne!(v, Value::Level(1));
        }
        let l = ParamDef::logical("l");
        assert_eq!(l.mutate(&Value::Bool(true), 0.1, &mut rng), Value::Bool(false));
    }

    #[test]
    fn integer_values_round_half_even() {
        let p = ParamDef::integer("k", 0, 4);
        assert_eq!(p.from_unit(0.125), Value::Num(0.0));
        assert_eq!(p.from_unit(0.375), Value::Num(2.0));
    }
}
