//! JSON representation of spaces and points.
//!
//! ```json
//! {"params":[{"name":"x","kind":"double","lower":0,"upper":1,"log":false,
//!             "depends":{"on":"branch","equals":"a"}}]}
//! ```
//! Points are flat objects keyed by parameter name with `null` for inactive
//! parameters.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value as Json};

use super::{Dependency, Literal, ParamDef, ParamKind, ParamSpace, Point, SpaceError, Value};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpaceJson {
    pub params: Vec<ParamJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamJson {
    pub name: String,
    pub kind: ParamKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<String>>,
    #[serde(default)]
    pub log: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depends: Option<DependsJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DependsJson {
    pub on: String,
    pub equals: Json,
}

impl SpaceJson {
    pub fn into_space(self) -> Result<ParamSpace, SpaceError> {
        let params = self
            .params
            .into_iter()
            .map(ParamJson::into_def)
            .collect::<Result<Vec<_>, _>>()?;
        ParamSpace::new(params)
    }

    pub fn from_space(space: &ParamSpace) -> Self {
        SpaceJson {
            params: space.params().iter().map(ParamJson::from_def).collect(),
        }
    }
}

impl ParamJson {
    fn into_def(self) -> Result<ParamDef, SpaceError> {
        let missing = |what: &str| SpaceError::InvalidParam {
            name: self.name.clone(),
            reason: format!("missing `{what}`"),
        };
        let (lower, upper) = if self.kind.is_numeric() {
            (
                self.lower.ok_or_else(|| missing("lower"))?,
                self.upper.ok_or_else(|| missing("upper"))?,
            )
        } else {
            (f64::NAN, f64::NAN)
        };
        let levels = match self.kind {
            ParamKind::Factor => self.levels.clone().ok_or_else(|| missing("levels"))?,
            _ => Vec::new(),
        };
        let depends_on = match &self.depends {
            None => None,
            Some(d) => Some(Dependency {
                parent: d.on.clone(),
                equals: match &d.equals {
                    Json::String(s) => Literal::Text(s.clone()),
                    Json::Bool(b) => Literal::Flag(*b),
                    Json::Number(n) => Literal::Number(n.as_f64().unwrap_or(f64::NAN)),
                    other => {
                        return Err(SpaceError::Json(format!(
                            "unsupported dependency value {other} for `{}`",
                            self.name
                        )))
                    }
                },
            }),
        };
        Ok(ParamDef {
            name: self.name,
            kind: self.kind,
            lower,
            upper,
            levels,
            log_scale: self.log,
            depends_on,
        })
    }

    fn from_def(def: &ParamDef) -> Self {
        let numeric = def.kind.is_numeric();
        ParamJson {
            name: def.name.clone(),
            kind: def.kind,
            lower: numeric.then_some(def.lower),
            upper: numeric.then_some(def.upper),
            levels: (def.kind == ParamKind::Factor).then(|| def.levels.clone()),
            log: def.log_scale,
            depends: def.depends_on.as_ref().map(|d| DependsJson {
                on: d.parent.clone(),
                equals: match &d.equals {
                    Literal::Text(s) => Json::String(s.clone()),
                    Literal::Flag(b) => Json::Bool(*b),
                    Literal::Number(x) => serde_json::json!(x),
                },
            }),
        }
    }
}

pub fn point_to_json(space: &ParamSpace, p: &Point) -> Map<String, Json> {
    space
        .params()
        .iter()
        .zip(&p.values)
        .map(|(def, v)| {
            let j = match v {
                None => Json::Null,
                Some(Value::Num(x)) => serde_json::json!(x),
                Some(Value::Level(k)) => Json::String(def.levels[*k].clone()),
                Some(Value::Bool(b)) => Json::Bool(*b),
            };
            (def.name.clone(), j)
        })
        .collect()
}

/// Parses a flat point object; absent keys are treated as `null`.
pub fn point_from_json(space: &ParamSpace, obj: &Map<String, Json>) -> Result<Point, SpaceError> {
    for key in obj.keys() {
        if space.index_of(key).is_none() {
            return Err(SpaceError::InvalidPoint(format!("unknown parameter `{key}`")));
        }
    }
    let values = space
        .params()
        .iter()
        .map(|def| {
            let bad = || SpaceError::InvalidPoint(format!("bad value for `{}`", def.name));
            match obj.get(&def.name) {
                None | Some(Json::Null) => Ok(None),
                Some(Json::Number(n)) if def.kind.is_numeric() => {
                    Ok(Some(Value::Num(n.as_f64().ok_or_else(bad)?)))
                }
                Some(Json::String(s)) if def.kind == ParamKind::Factor => def
                    .levels
                    .iter()
                    .position(|l| l == s)
                    .map(|k| Some(Value::Level(k)))
                    .ok_or_else(bad),
                Some(Json::Bool(b)) if def.kind == ParamKind::Logical => Ok(Some(Value::Bool(*b))),
                _ => Err(bad()),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Point::new(values))
}
