//! Per-evaluation benchmark output.
//!
//! CSV columns, in this order: `problem,config,seed,eval,y,best_so_far,wall_ms`.
//! `eval` counts from 1. `y` is the problem score after that evaluation on
//! the minimization scale: the objective value for one objective, the negated
//! dominated hypervolume for several.

use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use crate::BenchError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub problem: String,
    pub config: String,
    pub seed: u64,
    pub eval: usize,
    pub y: f64,
    pub best_so_far: f64,
    /// Milliseconds since the first evaluation, or evaluation ticks when the
    /// run used a logical clock.
    pub wall_ms: u64,
}

/// Output format of trace files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TraceFormat {
    #[default]
    Csv,
    Jsonl,
}

impl TraceFormat {
    pub fn extension(self) -> &'static str {
        match self {
            TraceFormat::Csv => "csv",
            TraceFormat::Jsonl => "jsonl",
        }
    }

    pub fn from_extension(ext: &str) -> Option<TraceFormat> {
        match ext {
            "csv" => Some(TraceFormat::Csv),
            "jsonl" => Some(TraceFormat::Jsonl),
            _ => None,
        }
    }
}

/// Builds records from per-evaluation scores and timestamps.
pub fn build_trace(problem: &str, config: &str, seed: u64, ys: &[f64], timestamps: &[u64]) -> Vec<TraceRecord> {
    let t0 = timestamps.first().copied().unwrap_or(0);
    let mut best = f64::INFINITY;
    ys.iter()
        .zip(timestamps)
        .enumerate()
        .map(|(i, (&y, &t))| {
            best = best.min(y);
            TraceRecord {
                problem: problem.to_string(),
                config: config.to_string(),
                seed,
                eval: i + 1,
                y,
                best_so_far: best,
                wall_ms: t.saturating_sub(t0),
            }
        })
        .collect()
}

pub fn write_trace<W: Write>(records: &[TraceRecord], format: TraceFormat, out: W) -> Result<(), BenchError> {
    match format {
        TraceFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            for r in records {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        TraceFormat::Jsonl => {
            let mut out = out;
            for r in records {
                serde_json::to_writer(&mut out, r)?;
                out.write_all(b"\n")?;
            }
        }
    }
    Ok(())
}

pub fn read_trace<R: Read>(input: R, format: TraceFormat) -> Result<Vec<TraceRecord>, BenchError> {
    match format {
        TraceFormat::Csv => Ok(csv::Reader::from_reader(input)
            .deserialize()
            .collect::<Result<Vec<TraceRecord>, _>>()?),
        TraceFormat::Jsonl => std::io::BufReader::new(input)
            .lines()
            .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
            .map(|l| Ok(serde_json::from_str(&l?)?))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn best_so_far_is_running_minimum() {
        let t = build_trace("p", "c", 1, &[3.0, 1.0, 2.0, 0.5], &[10, 11, 15, 20]);
        let best: Vec<f64> = t.iter().map(|r| r.best_so_far).collect();
        assert_eq!(best, vec![3.0, 1.0, 1.0, 0.5]);
        assert_eq!(t[3].wall_ms, 10);
        assert_eq!(t[0].eval, 1);
    }

    #[test]
    fn csv_header_order() {
        let t = build_trace("p", "c", 1, &[1.0], &[0]);
        let mut buf = Vec::new();
        write_trace(&t, TraceFormat::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "problem,config,seed,eval,y,best_so_far,wall_ms");
    }
}
