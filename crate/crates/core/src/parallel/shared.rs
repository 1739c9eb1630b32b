use std::collections::VecDeque;
use std::io::{BufRead, Write};
use std::sync::{Condvar, Mutex, MutexGuard};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::engine::{Archive, ArchiveRow, EngineError, EvalFailure};
use crate::loops::Liar;
use crate::space::{point_from_json, point_to_json, ParamSpace, Point};

/// Kind of a publish-log entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    /// A worker reserved a point; an in-flight row was appended.
    Claim,
    /// The claimed evaluation finished and its row was filled in.
    Complete,
    /// The claim was dropped (worker crash); its row was removed.
    Release,
}

/// One mutation of the shared archive, in the order it was applied.
#[derive(Debug, Clone, PartialEq)]
pub struct PublishEvent {
    pub seq: u64,
    pub kind: EventKind,
    pub claim: u64,
    pub worker: usize,
    pub point: Point,
    pub batch_nr: u64,
    pub timestamp: u64,
    /// Raw objective values of a completion.
    pub y: Option<Vec<f64>>,
    pub failed: bool,
}

#[derive(Serialize, Deserialize)]
struct EventJson {
    seq: u64,
    event: EventKind,
    claim: u64,
    worker: usize,
    batch_nr: u64,
    timestamp: u64,
    x: serde_json::Map<String, serde_json::Value>,
    y: Option<Vec<f64>>,
    failed: bool,
}

/// Writes the log as JSON lines.
pub fn write_publish_log<W: Write>(space: &ParamSpace, events: &[PublishEvent], mut out: W) -> Result<(), EngineError> {
    for e in events {
        let j = EventJson {
            seq: e.seq,
            event: e.kind,
            claim: e.claim,
            worker: e.worker,
            batch_nr: e.batch_nr,
            timestamp: e.timestamp,
            x: point_to_json(space, &e.point),
            y: e.y.clone(),
            failed: e.failed,
        };
        let line = serde_json::to_string(&j).map_err(|e| EngineError::Format(e.to_string()))?;
        writeln!(out, "{line}").map_err(|e| EngineError::Io(e.to_string()))?;
    }
    Ok(())
}

pub fn read_publish_log<R: BufRead>(space: &ParamSpace, input: R) -> Result<Vec<PublishEvent>, EngineError> {
    let mut events = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| EngineError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |m: String| EngineError::Format(format!("line {}: {m}", i + 1));
        let j: EventJson = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        events.push(PublishEvent {
            seq: j.seq,
            kind: j.event,
            claim: j.claim,
            worker: j.worker,
            point: point_from_json(space, &j.x).map_err(|e| bad(e.to_string()))?,
            batch_nr: j.batch_nr,
            timestamp: j.timestamp,
            y: j.y,
            failed: j.failed,
        });
    }
    Ok(events)
}

/// Applies `events` to `initial` sequentially.
pub fn replay_publish_log(initial: &Archive, events: &[PublishEvent]) -> Result<Archive, EngineError> {
    let mut archive = initial.clone();
    let mut claims: Vec<Option<u64>> = vec![None; archive.len()];
    let find = |claims: &[Option<u64>], id: u64| {
        claims
            .iter()
            .position(|c| *c == Some(id))
            .ok_or_else(|| EngineError::Format(format!("unknown claim {id}")))
    };
    for e in events {
        match e.kind {
            EventKind::Claim => {
                archive.push_row(ArchiveRow {
                    point: e.point.clone(),
                    y: vec![f64::NAN; archive.n_objectives()],
                    batch_nr: e.batch_nr,
                    timestamp: e.timestamp,
                    in_flight: true,
                    failed: false,
                });
                claims.push(Some(e.claim));
            }
            EventKind::Complete => {
                let i = find(&claims, e.claim)?;
                let y = e
                    .y
                    .clone()
                    .ok_or_else(|| EngineError::Format(format!("completion of claim {} without y", e.claim)))?;
                archive.complete(i, y, e.failed);
            }
            EventKind::Release => {
                let i = find(&claims, e.claim)?;
                archive.remove(i);
                claims.remove(i);
            }
        }
    }
    Ok(archive)
}

/// Training set of objective 0: completed rows verbatim, then every
/// in-flight row with the liar value of the completed targets.
/// `MeanPrediction` imputes the mean of the completed targets here.
pub fn snapshot_with_imputation(archive: &Archive, liar: Liar) -> (Vec<Point>, Vec<f64>) {
    let (mut points, mut y) = archive.training_data(0);
    if y.is_empty() {
        return (points, y);
    }
    let lie = match liar {
        Liar::Min => y.iter().copied().fold(f64::INFINITY, f64::min),
        Liar::Max => y.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        Liar::MeanPrediction => y.iter().sum::<f64>() / y.len() as f64,
    };
    for r in archive.rows().iter().filter(|r| r.in_flight) {
        points.push(r.point.clone());
        y.push(lie);
    }
    (points, y)
}

pub(crate) struct State {
    pub archive: Archive,
    /// Claim id of each archive row; `None` for rows that predate the run.
    claims: Vec<Option<u64>>,
    /// Points waiting to be evaluated: the initial design and released claims.
    pub queue: VecDeque<Point>,
    log: Vec<PublishEvent>,
    next_claim: u64,
}

impl State {
    pub fn claim(&mut self, point: Point, batch_nr: u64, worker: usize) -> u64 {
        let id = self.next_claim;
        self.next_claim += 1;
        let row = self.archive.push_in_flight(point.clone(), batch_nr);
        let timestamp = self.archive.rows()[row].timestamp;
        self.claims.push(Some(id));
        self.record(EventKind::Claim, id, worker, point, batch_nr, timestamp, None, false);
        id
    }

    fn row_of(&self, claim: u64) -> usize {
        self.claims
            .iter()
            .position(|c| *c == Some(claim))
            .expect("claim ids refer to live rows")
    }

    pub fn publish(&mut self, claim: u64, worker: usize, result: Result<Vec<f64>, EvalFailure>) {
        let i = self.row_of(claim);
        let (y, failed) = match result {
            Ok(y) => (y, false),
            Err(e) => {
                log::warn!("{e}; imputing worst-case value");
                let k = self.archive.n_objectives();
                let y_min: Vec<f64> = (0..k).map(|j| self.archive.failure_value(j)).collect();
                (self.archive.to_raw(&y_min), true)
            }
        };
        self.archive.complete(i, y.clone(), failed);
        let row = &self.archive.rows()[i];
        let (point, batch_nr, timestamp) = (row.point.clone(), row.batch_nr, row.timestamp);
        self.record(EventKind::Complete, claim, worker, point, batch_nr, timestamp, Some(y), failed);
    }

    /// Drops an in-flight claim and queues its point for another worker.
    pub fn release(&mut self, claim: u64, worker: usize) {
        let i = self.row_of(claim);
        let row = self.archive.remove(i);
        self.claims.remove(i);
        self.record(EventKind::Release, claim, worker, row.point.clone(), row.batch_nr, row.timestamp, None, false);
        self.queue.push_front(row.point);
    }

    #[allow(clippy::too_many_arguments)]
    fn record(
        &mut self,
        kind: EventKind,
        claim: u64,
        worker: usize,
        point: Point,
        batch_nr: u64,
        timestamp: u64,
        y: Option<Vec<f64>>,
        failed: bool,
    ) {
        self.log.push(PublishEvent {
            seq: self.log.len() as u64,
            kind,
            claim,
            worker,
            point,
            batch_nr,
            timestamp,
            y,
            failed,
        });
    }
}

/// Archive shared by concurrent workers. Every operation takes one lock, so
/// claims and publishes are atomic and snapshots are point-in-time copies.
pub struct SharedArchive {
    state: Mutex<State>,
    changed: Condvar,
}

impl SharedArchive {
    pub fn new(archive: Archive) -> Self {
        let claims = vec![None; archive.len()];
        SharedArchive {
            state: Mutex::new(State {
                archive,
                claims,
                queue: VecDeque::new(),
                log: Vec::new(),
                next_claim: 1,
            }),
            changed: Condvar::new(),
        }
    }

    pub(crate) fn lock(&self) -> MutexGuard<'_, State> {
        // a worker that panicked never holds the lock while evaluating, so
        // the state is consistent even if the mutex is poisoned
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub(crate) fn wait<'a>(&self, guard: MutexGuard<'a, State>, timeout: Duration) -> MutexGuard<'a, State> {
        self.changed
            .wait_timeout(guard, timeout)
            .map(|(g, _)| g)
            .unwrap_or_else(|e| e.into_inner().0)
    }

    pub(crate) fn notify(&self) {
        self.changed.notify_all();
    }

    /// Appends an in-flight row for `point` and returns its claim id.
    pub fn claim(&self, point: Point, batch_nr: u64, worker: usize) -> u64 {
        let id = self.lock().claim(point, batch_nr, worker);
        self.notify();
        id
    }

    /// Fills in the row of `claim`; failures get the imputed worst value.
    pub fn publish(&self, claim: u64, worker: usize, result: Result<Vec<f64>, EvalFailure>) {
        self.lock().publish(claim, worker, result);
        self.notify();
    }

    pub fn release(&self, claim: u64, worker: usize) {
        self.lock().release(claim, worker);
        self.notify();
    }

    pub fn snapshot(&self) -> Archive {
        self.lock().archive.clone()
    }

    pub fn snapshot_with_imputation(&self, liar: Liar) -> (Vec<Point>, Vec<f64>) {
        snapshot_with_imputation(&self.lock().archive, liar)
    }

    pub fn log(&self) -> Vec<PublishEvent> {
        self.lock().log.clone()
    }

    pub fn into_parts(self) -> (Archive, Vec<PublishEvent>) {
        let s = self.state.into_inner().unwrap_or_else(|e| e.into_inner());
        (s.archive, s.log)
    }
}
