use rand::Rng;

use super::AcqError;
use crate::pareto::hypervolume_improvement;
use crate::MboRng;

/// Augmentation weight of the Tchebycheff scalarization.
pub const PAREGO_RHO: f64 = 0.05;

/// SMS-EGO value of a candidate with per-objective predictions.
///
/// The optimistic estimate `mu - lambda * sd` earns its hypervolume
/// improvement over `front`. If some front point epsilon-dominates it, the
/// value is a non-positive penalty growing with the distance to that point.
pub fn smsego(
    means: &[f64],
    sds: &[f64],
    front: &[Vec<f64>],
    reference: &[f64],
    lambda: f64,
    epsilon: &[f64],
) -> Result<f64, AcqError> {
    let k = means.len();
    if k < 2 || sds.len() != k || epsilon.len() != k {
        return Err(AcqError::Precondition(format!("smsego needs matching vectors of length >= 2, got {k}")));
    }
    if reference.len() != k {
        return Err(AcqError::Precondition(format!(
            "reference point has {} coordinates, expected {k}",
            reference.len()
        )));
    }
    if let Some(p) = front.iter().find(|p| p.iter().zip(reference).any(|(a, r)| a >= r)) {
        return Err(AcqError::Precondition(format!(
            "reference point {reference:?} does not bound front point {p:?}"
        )));
    }
    let opt: Vec<f64> = means.iter().zip(sds).map(|(m, s)| m - lambda * s).collect();
    let mut penalty: Option<f64> = None;
    for p in front {
        let dominated = p.iter().zip(&opt).zip(epsilon).all(|((pj, yj), ej)| *pj <= yj + ej);
        if dominated {
            let pen = -1.0
                + p.iter()
                    .zip(&opt)
                    .map(|(pj, yj)| 1.0 + (yj - pj).max(0.0))
                    .product::<f64>();
            penalty = Some(penalty.map_or(pen, |q: f64| q.max(pen)));
        }
    }
    Ok(match penalty {
        Some(pen) => -pen,
        None => hypervolume_improvement(front, &opt, reference),
    })
}

/// Adaptive additive epsilon-dominance margin per objective:
/// front range over `|front| + c * remaining` with `c = 1 - 2^-k`.
pub fn smsego_epsilon(front: &[Vec<f64>], remaining: usize, k: usize) -> Vec<f64> {
    if front.is_empty() {
        return vec![0.0; k];
    }
    let c = 1.0 - 0.5f64.powi(k as i32);
    let denom = front.len() as f64 + c * remaining as f64;
    (0..k)
        .map(|j| {
            let lo = front.iter().map(|p| p[j]).fold(f64::INFINITY, f64::min);
            let hi = front.iter().map(|p| p[j]).fold(f64::NEG_INFINITY, f64::max);
            (hi - lo) / denom
        })
        .collect()
}

/// Augmented Tchebycheff scalarization `max_i w_i y_i + rho * sum_i w_i y_i`.
pub fn parego_scalarize(y: &[f64], weights: &[f64], rho: f64) -> Result<f64, AcqError> {
    if y.len() != weights.len() {
        return Err(AcqError::Precondition("weights and objectives differ in length".into()));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-9 || weights.iter().any(|w| *w < 0.0) {
        return Err(AcqError::Precondition(format!("weights {weights:?} are not on the simplex")));
    }
    let terms: Vec<f64> = y.iter().zip(weights).map(|(a, w)| a * w).collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(max + rho * terms.iter().sum::<f64>())
}

/// Uniform draw from the probability simplex with `k` vertices.
pub fn sample_simplex(k: usize, rng: &mut MboRng) -> Vec<f64> {
    let e: Vec<f64> = (0..k).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn smsego_unit_box() {
        let v = smsego(&[0.0, 0.0], &[0.0, 0.0], &[], &[1.0, 1.0], 1.0, &[0.0, 0.0]).unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn smsego_dominated_is_non_positive() {
        let front = vec![vec![0.2, 0.2]];
        let v = smsego(&[0.5, 0.6], &[0.1, 0.1], &front, &[1.0, 1.0], 1.0, &[0.0, 0.0]).unwrap();
        assert!(v <= 0.0);
        // penalty: -1 + (1 + 0.2)(1 + 0.3)
        assert!((v + 0.56).abs() < 1e-12);
    }

    #[test]
    fn smsego_rejects_bad_reference() {
        let front = vec![vec![0.2, 1.5]];
        assert!(smsego(&[0.0, 0.0], &[0.0, 0.0], &front, &[1.0, 1.0], 1.0, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn parego_examples() {
        assert!((parego_scalarize(&[0.3, 0.9], &[1.0, 0.0], PAREGO_RHO).unwrap() - 0.315).abs() < 1e-15);
        assert_eq!(parego_scalarize(&[0.0, 0.0], &[0.3, 0.7], PAREGO_RHO).unwrap(), 0.0);
        assert!((parego_scalarize(&[0.4, 0.8], &[0.5, 0.5], PAREGO_RHO).unwrap() - 0.43).abs() < 1e-15);
        assert!(parego_scalarize(&[0.4, 0.8], &[0.5, 0.6], PAREGO_RHO).is_err());
    }

    #[test]
    fn simplex_weights_sum_to_one() {
        let mut rng = MboRng::seed_from_u64(3);
        for k in 2..6 {
            let w = sample_simplex(k, &mut rng);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(w.iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn adaptive_epsilon_shrinks_with_budget() {
        let front = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let early = smsego_epsilon(&front, 100, 2);
        let late = smsego_epsilon(&front, 0, 2);
        assert!(early[0] < late[0]);
        assert!((late[0] - 0.5).abs() < 1e-15);
    }
}
