use serde::{Deserialize, Serialize};

use super::{Archive, EngineError, OptimInstance};
use crate::pareto;
use crate::space::Point;
use crate::surrogate::{Surrogate, SurrogateConfig};
use crate::MboRng;

/// How the final answer of a run is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ResultAssigner {
    /// Best observed point, or the non-dominated set for several objectives.
    ArchiveBest,
    /// Archive point with the lowest posterior mean of a surrogate refitted
    /// on the full archive; robust to downward noise spikes.
    SurrogateMean(SurrogateConfig),
}

/// Final point(s) with their observed values in the user's directions.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult {
    pub points: Vec<Point>,
    pub ys: Vec<Vec<f64>>,
    /// Indices into the archive rows.
    pub rows: Vec<usize>,
}

impl OptimResult {
    fn from_rows(archive: &Archive, rows: Vec<usize>) -> Self {
        OptimResult {
            points: rows.iter().map(|&i| archive.rows()[i].point.clone()).collect(),
            ys: rows.iter().map(|&i| archive.rows()[i].y.clone()).collect(),
            rows,
        }
    }

    /// First objective of the first returned point.
    pub fn best_y(&self) -> Option<f64> {
        self.ys.first().map(|y| y[0])
    }
}

/// Non-dominated completed rows, in archive order.
pub fn pareto_front(archive: &Archive) -> OptimResult {
    let idx: Vec<usize> = (0..archive.len())
        .filter(|&i| !archive.rows()[i].in_flight)
        .collect();
    let ys: Vec<Vec<f64>> = idx.iter().map(|&i| archive.y_min(&archive.rows()[i])).collect();
    let front = pareto::non_dominated_indices(&ys);
    OptimResult::from_rows(archive, front.into_iter().map(|k| idx[k]).collect())
}

pub fn assign_result(
    instance: &OptimInstance,
    assigner: &ResultAssigner,
    rng: &mut MboRng,
) -> Result<OptimResult, EngineError> {
    let archive = instance.archive();
    if archive.n_completed() == 0 {
        return Err(EngineError::EmptyArchive);
    }
    if archive.n_objectives() > 1 {
        return Ok(pareto_front(archive));
    }
    match assigner {
        ResultAssigner::ArchiveBest => {
            let best = archive.best_index().ok_or(EngineError::EmptyArchive)?;
            Ok(OptimResult::from_rows(archive, vec![best]))
        }
        ResultAssigner::SurrogateMean(cfg) => {
            let space = instance.space();
            let (points, y) = archive.training_data(0);
            let mut s = Surrogate::new(cfg.clone());
            s.update(space, &points, &y, rng)
                .map_err(|e| EngineError::Surrogate(e.to_string()))?;
            let preds = s
                .predict(space, &points)
                .map_err(|e| EngineError::Surrogate(e.to_string()))?;
            let rows: Vec<usize> = (0..archive.len())
                .filter(|&i| !archive.rows()[i].in_flight)
                .collect();
            let mut best = 0;
            for (k, p) in preds.iter().enumerate() {
                if p.mean < preds[best].mean {
                    best = k;
                }
            }
            Ok(OptimResult::from_rows(archive, vec![rows[best]]))
        }
    }
}
