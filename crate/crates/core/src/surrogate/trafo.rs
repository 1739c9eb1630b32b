use serde::{Deserialize, Serialize};

use crate::space::{ParamDef, ParamKind, ParamSpace, Point, Value};

/// Lower end of the interval the log transformation scales targets into.
pub const LOG_TRAFO_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputTrafoKind {
    #[default]
    None,
    Standardize,
    Log,
}

/// Fitted output transformation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OutputTrafo {
    Identity,
    Standardize { mean: f64, sd: f64 },
    /// `z = ln(a·y + b)` with `[min, max]` mapped onto `[1e-3, 1]`.
    Log { a: f64, b: f64 },
}

impl OutputTrafo {
    pub fn fit(kind: OutputTrafoKind, y: &[f64]) -> OutputTrafo {
        match kind {
            OutputTrafoKind::None => OutputTrafo::Identity,
            OutputTrafoKind::Standardize => standardize(y),
            OutputTrafoKind::Log => {
                let min = y.iter().copied().fold(f64::INFINITY, f64::min);
                let max = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if max > min {
                    let a = (1.0 - LOG_TRAFO_FLOOR) / (max - min);
                    OutputTrafo::Log {
                        a,
                        b: LOG_TRAFO_FLOOR - a * min,
                    }
                } else {
                    log::warn!("log output transformation on constant targets; standardizing instead");
                    standardize(y)
                }
            }
        }
    }

    pub fn transform(&self, y: f64) -> f64 {
        match *self {
            OutputTrafo::Identity => y,
            OutputTrafo::Standardize { mean, sd } => (y - mean) / sd,
            OutputTrafo::Log { a, b } => (a * y + b).ln(),
        }
    }

    /// Inverse of [`OutputTrafo::transform`] for a single value.
    pub fn inverse(&self, z: f64) -> f64 {
        match *self {
            OutputTrafo::Identity => z,
            OutputTrafo::Standardize { mean, sd } => mean + sd * z,
            OutputTrafo::Log { a, b } => (z.exp() - b) / a,
        }
    }

    /// Maps a model-scale predictive mean and sd back to the raw scale. The
    /// log case uses log-normal moments.
    pub fn inverse_prediction(&self, mean: f64, sd: f64) -> (f64, f64) {
        match *self {
            OutputTrafo::Identity => (mean, sd),
            OutputTrafo::Standardize { mean: m, sd: s } => (m + s * mean, s * sd),
            OutputTrafo::Log { a, b } => {
                let s2 = sd * sd;
                let e = (mean + 0.5 * s2).exp();
                let var = s2.exp_m1() * (2.0 * mean + s2).exp();
                ((e - b) / a, var.max(0.0).sqrt() / a)
            }
        }
    }

    /// Incumbent on the positive pre-log scale, `a·f_min + b`; other kinds
    /// return `f_min` unchanged.
    pub fn pre_log(&self, f_min: f64) -> f64 {
        match *self {
            OutputTrafo::Log { a, b } => a * f_min + b,
            _ => f_min,
        }
    }

    pub fn is_log(&self) -> bool {
        matches!(self, OutputTrafo::Log { .. })
    }
}

fn standardize(y: &[f64]) -> OutputTrafo {
    let n = y.len().max(1) as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
    OutputTrafo::Standardize { mean, sd }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputTrafo {
    /// Features on the search scale: raw numbers (logarithm for log-scaled
    /// parameters), level indices, 0/1 for logicals.
    #[default]
    None,
    Unitcube,
}

/// How inactive parameters appear in the feature matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MissingEncoding {
    /// `NaN`, for models that route missing values themselves.
    Native,
    /// Mid-range value plus one activity column per conditional parameter.
    Indicator,
}

/// Turns points into numeric feature rows.
#[derive(Debug, Clone)]
pub struct Encoder {
    input: InputTrafo,
    missing: MissingEncoding,
    conditional: Vec<usize>,
    dim: usize,
}

impl Encoder {
    pub fn new(space: &ParamSpace, input: InputTrafo, missing: MissingEncoding) -> Self {
        let conditional = (0..space.dim())
            .filter(|&i| space.parent_of(i).is_some())
            .collect();
        Encoder {
            input,
            missing,
            conditional,
            dim: space.dim(),
        }
    }

    pub fn n_features(&self) -> usize {
        match self.missing {
            MissingEncoding::Native => self.dim,
            MissingEncoding::Indicator => self.dim + self.conditional.len(),
        }
    }

    pub fn encode(&self, space: &ParamSpace, p: &Point) -> Vec<f64> {
        let mut row = Vec::with_capacity(self.n_features());
        for (def, v) in space.params().iter().zip(&p.values) {
            row.push(match v {
                Some(v) => self.feature(def, v),
                None => match self.missing {
                    MissingEncoding::Native => f64::NAN,
                    MissingEncoding::Indicator => self.mid_range(def),
                },
            });
        }
        if self.missing == MissingEncoding::Indicator {
            row.extend(
                self.conditional
                    .iter()
                    .map(|&i| f64::from(u8::from(p.values[i].is_some()))),
            );
        }
        row
    }

    pub fn encode_all(&self, space: &ParamSpace, points: &[Point]) -> Vec<Vec<f64>> {
        points.iter().map(|p| self.encode(space, p)).collect()
    }

    fn feature(&self, def: &ParamDef, v: &Value) -> f64 {
        match self.input {
            InputTrafo::Unitcube => def.to_unit(v),
            InputTrafo::None => match (def.kind, v) {
                (ParamKind::Double | ParamKind::Integer, Value::Num(x)) if def.log_scale => x.ln(),
                _ => v.as_f64(),
            },
        }
    }

    fn mid_range(&self, def: &ParamDef) -> f64 {
        match self.input {
            InputTrafo::Unitcube => crate::space::INACTIVE_UNIT,
            InputTrafo::None => match def.kind {
                ParamKind::Double | ParamKind::Integer if def.log_scale => {
                    0.5 * (def.lower.ln() + def.upper.ln())
                }
                ParamKind::Double | ParamKind::Integer => 0.5 * (def.lower + def.upper),
                ParamKind::Factor => 0.5 * (def.levels.len().saturating_sub(1)) as f64,
                ParamKind::Logical => 0.5,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_trafo_endpoints() {
        let y = [3.0, -1.0, 7.5, 2.0];
        let t = OutputTrafo::fit(OutputTrafoKind::Log, &y);
        assert!((t.transform(-1.0) - LOG_TRAFO_FLOOR.ln()).abs() < 1e-12);
        assert!(t.transform(7.5).abs() < 1e-12);
        for v in y {
            assert!((t.inverse(t.transform(v)) - v).abs() < 1e-10);
        }
        assert!((t.pre_log(-1.0) - LOG_TRAFO_FLOOR).abs() < 1e-15);
    }

    #[test]
    fn standardize_round_trip() {
        let y = [0.5, 4.0, -2.0, 9.0];
        let t = OutputTrafo::fit(OutputTrafoKind::Standardize, &y);
        for v in y {
            assert!((t.inverse(t.transform(v)) - v).abs() < 1e-10);
        }
        let (m, s) = t.inverse_prediction(0.0, 1.0);
        assert!((m - 2.875).abs() < 1e-12);
        assert!(s > 0.0);
    }

    #[test]
    fn constant_log_falls_back() {
        let t = OutputTrafo::fit(OutputTrafoKind::Log, &[2.0, 2.0]);
        assert_eq!(t, OutputTrafo::Standardize { mean: 2.0, sd: 1.0 });
    }

    #[test]
    fn lognormal_mean() {
        let t = OutputTrafo::Log { a: 1.0, b: 0.0 };
        let (m, s) = t.inverse_prediction(0.0, 1.0);
        assert!((m - 0.5f64.exp()).abs() < 1e-12);
        assert!((s * s - (1f64.exp() - 1.0) * 1f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn indicator_encoding_of_inactive_params() {
        let space = ParamSpace::new(vec![
            ParamDef::factor("kind", &["a", "b"]),
            ParamDef::double("x", 0.0, 4.0).depends_on("kind", "a"),
            ParamDef::double("c", 1e-3, 1e1).log(),
        ])
        .unwrap();
        let p = Point::new(vec![Some(Value::Level(1)), None, Some(Value::Num(1.0))]);
        let ind = Encoder::new(&space, InputTrafo::None, MissingEncoding::Indicator);
        assert_eq!(ind.n_features(), 4);
        assert_eq!(ind.encode(&space, &p), vec![1.0, 2.0, 0.0, 0.0]);
        let nat = Encoder::new(&space, InputTrafo::Unitcube, MissingEncoding::Native);
        let row = nat.encode(&space, &p);
        assert_eq!(row.len(), 3);
        assert_eq!(row[0], 1.0);
        assert!(row[1].is_nan());
        assert!((row[2] - 0.75).abs() < 1e-12);
    }
}
