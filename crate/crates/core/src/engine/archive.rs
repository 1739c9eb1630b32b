use std::io::{BufRead, Write};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::{EngineError, Target};
use crate::space::{point_from_json, point_to_json, ParamSpace, Point};

/// Source of row timestamps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Clock {
    /// UTC milliseconds since the epoch.
    #[default]
    Wall,
    /// Insertion counter; makes serialized archives reproducible.
    Logical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArchiveRow {
    pub point: Point,
    /// Raw objective values in the user's direction; `NaN` while in flight.
    pub y: Vec<f64>,
    pub batch_nr: u64,
    pub timestamp: u64,
    pub in_flight: bool,
    /// The objective failed and `y` holds an imputed worst-case value.
    pub failed: bool,
}

/// Ordered record of evaluated points.
#[derive(Debug, Clone)]
pub struct Archive {
    codomain: Vec<Target>,
    rows: Vec<ArchiveRow>,
    clock: Clock,
    ticks: u64,
}

impl Archive {
    pub fn new(codomain: Vec<Target>) -> Self {
        Archive {
            codomain,
            rows: Vec::new(),
            clock: Clock::default(),
            ticks: 0,
        }
    }

    pub fn with_clock(mut self, clock: Clock) -> Self {
        self.clock = clock;
        self
    }

    pub fn clock(&self) -> Clock {
        self.clock
    }

    pub fn codomain(&self) -> &[Target] {
        &self.codomain
    }

    pub fn n_objectives(&self) -> usize {
        self.codomain.len()
    }

    pub fn rows(&self) -> &[ArchiveRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_completed(&self) -> usize {
        self.rows.iter().filter(|r| !r.in_flight).count()
    }

    pub fn n_in_flight(&self) -> usize {
        self.rows.iter().filter(|r| r.in_flight).count()
    }

    pub fn completed(&self) -> impl Iterator<Item = &ArchiveRow> {
        self.rows.iter().filter(|r| !r.in_flight)
    }

    /// Batch number the next batch should use.
    pub fn next_batch_nr(&self) -> u64 {
        self.rows.last().map_or(1, |r| r.batch_nr + 1)
    }

    fn stamp(&mut self) -> u64 {
        self.ticks += 1;
        match self.clock {
            Clock::Logical => self.ticks,
            Clock::Wall => SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_millis() as u64),
        }
    }

    /// Objective vector of a row on the internal minimization scale.
    pub fn y_min(&self, row: &ArchiveRow) -> Vec<f64> {
        row.y
            .iter()
            .zip(&self.codomain)
            .map(|(y, t)| y * t.direction.sign())
            .collect()
    }

    /// Converts a minimization-scale vector back to the user's directions.
    pub fn to_raw(&self, y_min: &[f64]) -> Vec<f64> {
        y_min
            .iter()
            .zip(&self.codomain)
            .map(|(y, t)| y * t.direction.sign())
            .collect()
    }

    pub fn push_completed(&mut self, point: Point, y: Vec<f64>, batch_nr: u64, failed: bool) -> usize {
        let timestamp = self.stamp();
        self.rows.push(ArchiveRow {
            point,
            y,
            batch_nr,
            timestamp,
            in_flight: false,
            failed,
        });
        self.rows.len() - 1
    }

    pub fn push_in_flight(&mut self, point: Point, batch_nr: u64) -> usize {
        let timestamp = self.stamp();
        let k = self.codomain.len();
        self.rows.push(ArchiveRow {
            point,
            y: vec![f64::NAN; k],
            batch_nr,
            timestamp,
            in_flight: true,
            failed: false,
        });
        self.rows.len() - 1
    }

    /// Appends a row verbatim, keeping its timestamp; used when replaying
    /// a recorded run.
    pub fn push_row(&mut self, row: ArchiveRow) -> usize {
        self.ticks += 1;
        self.rows.push(row);
        self.rows.len() - 1
    }

    pub fn complete(&mut self, index: usize, y: Vec<f64>, failed: bool) {
        let row = &mut self.rows[index];
        debug_assert!(row.in_flight);
        row.y = y;
        row.in_flight = false;
        row.failed = failed;
    }

    pub fn remove(&mut self, index: usize) -> ArchiveRow {
        self.rows.remove(index)
    }

    /// Minimization-scale values of objective `obj` over completed rows.
    pub fn values_min(&self, obj: usize) -> Vec<f64> {
        let s = self.codomain[obj].direction.sign();
        self.completed().map(|r| r.y[obj] * s).collect()
    }

    /// Best completed value of objective `obj` (minimization scale).
    pub fn best_value(&self, obj: usize) -> Option<f64> {
        self.values_min(obj).into_iter().reduce(f64::min)
    }

    /// Index (into [`Archive::rows`]) of the first completed row attaining the
    /// minimum of objective 0.
    pub fn best_index(&self) -> Option<usize> {
        let s = self.codomain[0].direction.sign();
        let mut best: Option<(usize, f64)> = None;
        for (i, r) in self.rows.iter().enumerate() {
            if r.in_flight {
                continue;
            }
            let v = r.y[0] * s;
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((i, v));
            }
        }
        best.map(|(i, _)| i)
    }

    /// Completed points and minimization-scale values of objective `obj`.
    pub fn training_data(&self, obj: usize) -> (Vec<Point>, Vec<f64>) {
        let s = self.codomain[obj].direction.sign();
        self.completed().map(|r| (r.point.clone(), r.y[obj] * s)).unzip()
    }

    /// Value recorded for a failed evaluation: the worst successful value
    /// plus the observed range (or plus one when the range is degenerate).
    pub fn failure_value(&self, obj: usize) -> f64 {
        let s = self.codomain[obj].direction.sign();
        let ok: Vec<f64> = self
            .completed()
            .filter(|r| !r.failed)
            .map(|r| r.y[obj] * s)
            .collect();
        if ok.is_empty() {
            return 1.0;
        }
        let max = ok.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = ok.iter().copied().fold(f64::INFINITY, f64::min);
        let range = max - min;
        max + if range > 0.0 { range } else { 1.0 }
    }

    fn header(&self, space: &ParamSpace) -> Vec<String> {
        let mut h = vec!["batch_nr".to_string(), "timestamp".to_string()];
        h.extend(space.params().iter().map(|p| p.name.clone()));
        h.extend(self.codomain.iter().map(|t| t.name.clone()));
        h.push("in_flight".to_string());
        h
    }

    /// Writes `batch_nr,timestamp,<params>,<targets>,in_flight`. Inactive
    /// parameters and in-flight targets are empty cells.
    pub fn write_csv<W: Write>(&self, space: &ParamSpace, out: W) -> Result<(), EngineError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.header(space)).map_err(io_err)?;
        for r in &self.rows {
            let mut rec = vec![r.batch_nr.to_string(), r.timestamp.to_string()];
            for (def, v) in space.params().iter().zip(&r.point.values) {
                rec.push(v.as_ref().map(|v| def.format_value(v)).unwrap_or_default());
            }
            for y in &r.y {
                rec.push(if y.is_nan() { String::new() } else { format!("{y}") });
            }
            rec.push(r.in_flight.to_string());
            w.write_record(&rec).map_err(io_err)?;
        }
        w.flush().map_err(|e| EngineError::Io(e.to_string()))
    }

    /// Reads an archive written by [`Archive::write_csv`]. The `failed` flag is
    /// not part of the CSV schema and reads back as `false`.
    pub fn read_csv<R: std::io::Read>(
        space: &ParamSpace,
        codomain: Vec<Target>,
        input: R,
    ) -> Result<Archive, EngineError> {
        let mut archive = Archive::new(codomain);
        let mut rdr = csv::Reader::from_reader(input);
        let header: Vec<String> = rdr
            .headers()
            .map_err(io_err)?
            .iter()
            .map(str::to_string)
            .collect();
        if header != archive.header(space) {
            return Err(EngineError::Format(format!("unexpected header {header:?}")));
        }
        let d = space.dim();
        let k = archive.codomain.len();
        for rec in rdr.records() {
            let rec = rec.map_err(io_err)?;
            let field = |i: usize| rec.get(i).unwrap_or("");
            let bad = |what: &str| EngineError::Format(format!("bad {what} in {rec:?}"));
            let batch_nr = field(0).parse().map_err(|_| bad("batch_nr"))?;
            let timestamp = field(1).parse().map_err(|_| bad("timestamp"))?;
            let mut values = Vec::with_capacity(d);
            for (j, def) in space.params().iter().enumerate() {
                let s = field(2 + j);
                values.push(if s.is_empty() {
                    None
                } else {
                    Some(def.parse_value(s).ok_or_else(|| bad(&def.name))?)
                });
            }
            let mut y = Vec::with_capacity(k);
            for j in 0..k {
                let s = field(2 + d + j);
                y.push(if s.is_empty() {
                    f64::NAN
                } else {
                    s.parse().map_err(|_| bad("target"))?
                });
            }
            let in_flight = field(2 + d + k).parse().map_err(|_| bad("in_flight"))?;
            archive.rows.push(ArchiveRow {
                point: Point::new(values),
                y,
                batch_nr,
                timestamp,
                in_flight,
                failed: false,
            });
        }
        archive.ticks = archive.rows.len() as u64;
        Ok(archive)
    }

    pub fn write_jsonl<W: Write>(&self, space: &ParamSpace, mut out: W) -> Result<(), EngineError> {
        for r in &self.rows {
            let row = RowJson {
                batch_nr: r.batch_nr,
                timestamp: r.timestamp,
                x: point_to_json(space, &r.point),
                y: r.y.iter().map(|v| (!v.is_nan()).then_some(*v)).collect(),
                in_flight: r.in_flight,
                failed: r.failed,
            };
            serde_json::to_writer(&mut out, &row).map_err(|e| EngineError::Io(e.to_string()))?;
            out.write_all(b"\n").map_err(|e| EngineError::Io(e.to_string()))?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(
        space: &ParamSpace,
        codomain: Vec<Target>,
        input: R,
    ) -> Result<Archive, EngineError> {
        let mut archive = Archive::new(codomain);
        for (i, line) in input.lines().enumerate() {
            let line = line.map_err(|e| EngineError::Io(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let row: RowJson = serde_json::from_str(&line)
                .map_err(|e| EngineError::Format(format!("line {}: {e}", i + 1)))?;
            let point = point_from_json(space, &row.x)
                .map_err(|e| EngineError::Format(format!("line {}: {e}", i + 1)))?;
            archive.rows.push(ArchiveRow {
                point,
                y: row.y.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect(),
                batch_nr: row.batch_nr,
                timestamp: row.timestamp,
                in_flight: row.in_flight,
                failed: row.failed,
            });
        }
        archive.ticks = archive.rows.len() as u64;
        Ok(archive)
    }
}

#[derive(Serialize, Deserialize)]
struct RowJson {
    batch_nr: u64,
    timestamp: u64,
    x: serde_json::Map<String, serde_json::Value>,
    y: Vec<Option<f64>>,
    in_flight: bool,
    #[serde(default)]
    failed: bool,
}

fn io_err(e: csv::Error) -> EngineError {
    EngineError::Io(e.to_string())
}
