use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use super::{AcqOptConfig, AcqOptError, Candidate, Meter, ScoreFn};
use crate::space::ParamSpace;
use crate::MboRng;

/// IPOP-CMA-ES on the unit cube of a numeric space. Infeasible samples are
/// evaluated at their clipped image and penalized by the squared distance
/// to the cube. Restarts double the population until the budget is spent.
pub fn optimize_cmaes(
    space: &ParamSpace,
    cfg: &AcqOptConfig,
    score: &mut ScoreFn<'_>,
    rng: &mut MboRng,
) -> Result<Candidate, AcqOptError> {
    cfg.validate()?;
    if !space.is_numeric() || space.is_hierarchical() {
        return Err(AcqOptError::Config(
            "cmaes needs a flat space of numeric parameters".into(),
        ));
    }
    let n = space.dim();
    let budget = cfg.resolved_budget(n);
    let mut meter = Meter::new(score, budget, cfg.catch_errors);
    let base_lambda = 4 + (3.0 * (n as f64).ln()).floor() as usize;
    let mut restart = 0u32;
    while meter.remaining() > 0 {
        let lambda = base_lambda << restart.min(10);
        let mean: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        run_once(space, &mut meter, mean, cfg.cmaes_sigma0, lambda, rng)?;
        restart += 1;
    }
    meter.into_best()
}

fn run_once(
    space: &ParamSpace,
    meter: &mut Meter<'_, '_>,
    mean0: Vec<f64>,
    sigma0: f64,
    lambda: usize,
    rng: &mut MboRng,
) -> Result<(), AcqOptError> {
    let n = mean0.len();
    let nf = n as f64;
    let mu = lambda / 2;
    let raw: Vec<f64> = (1..=mu)
        .map(|i| (mu as f64 + 0.5).ln() - (i as f64).ln())
        .collect();
    let wsum: f64 = raw.iter().sum();
    let w: Vec<f64> = raw.iter().map(|v| v / wsum).collect();
    let mu_eff = 1.0 / w.iter().map(|v| v * v).sum::<f64>();

    let c_sigma = (mu_eff + 2.0) / (nf + mu_eff + 5.0);
    let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
    let c_c = (4.0 + mu_eff / nf) / (nf + 4.0 + 2.0 * mu_eff / nf);
    let c_1 = 2.0 / ((nf + 1.3).powi(2) + mu_eff);
    let c_mu = (1.0 - c_1).min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((nf + 2.0).powi(2) + mu_eff));
    let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));

    let mut m = DVector::from_vec(mean0);
    let mut sigma = sigma0;
    let mut c = DMatrix::<f64>::identity(n, n);
    let mut b = DMatrix::<f64>::identity(n, n);
    let mut d = DVector::from_element(n, 1.0);
    let mut p_sigma = DVector::<f64>::zeros(n);
    let mut p_c = DVector::<f64>::zeros(n);
    let mut history: Vec<f64> = Vec::new();
    let hist_len = 10 + (30.0 * nf / lambda as f64).ceil() as usize;

    for gen in 0.. {
        if meter.remaining() == 0 {
            return Ok(());
        }
        let mut ys: Vec<DVector<f64>> = Vec::with_capacity(lambda);
        let mut points = Vec::with_capacity(lambda);
        let mut penalties = Vec::with_capacity(lambda);
        for _ in 0..lambda {
            let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let y = &b * d.component_mul(&z);
            let x = &m + sigma * &y;
            let clipped: Vec<f64> = x.iter().map(|v| v.clamp(0.0, 1.0)).collect();
            let pen: f64 = x.iter().zip(&clipped).map(|(a, b)| (a - b).powi(2)).sum();
            points.push(space.from_unit(&clipped).expect("numeric unit vector decodes"));
            penalties.push(pen);
            ys.push(y);
        }
        let vals = meter.eval(&points)?;
        if vals.len() < lambda {
            return Ok(());
        }
        // penalty weight follows the spread of the generation's values
        let finite: Vec<f64> = vals.iter().copied().filter(|v| v.is_finite()).collect();
        let spread = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            - finite.iter().copied().fold(f64::INFINITY, f64::min);
        let weight = if spread.is_finite() && spread > 0.0 { spread } else { 1.0 };
        let fitness: Vec<f64> = vals
            .iter()
            .zip(&penalties)
            .map(|(v, p)| -v + 10.0 * weight * p)
            .collect();
        let mut order: Vec<usize> = (0..lambda).collect();
        order.sort_by(|&i, &j| fitness[i].total_cmp(&fitness[j]).then(i.cmp(&j)));

        let y_w: DVector<f64> = order[..mu]
            .iter()
            .zip(&w)
            .fold(DVector::zeros(n), |acc, (&i, wi)| acc + *wi * &ys[i]);
        m += sigma * &y_w;

        // C^{-1/2} y_w = B D^{-1} B^T y_w
        let inv_sqrt = &b * DMatrix::from_diagonal(&d.map(|v| 1.0 / v)) * b.transpose();
        p_sigma = (1.0 - c_sigma) * &p_sigma + (c_sigma * (2.0 - c_sigma) * mu_eff).sqrt() * (&inv_sqrt * &y_w);
        let ps_norm = p_sigma.norm();
        let h_sigma = ps_norm / (1.0 - (1.0 - c_sigma).powi(2 * (gen + 1))).sqrt()
            < (1.4 + 2.0 / (nf + 1.0)) * chi_n;
        let hs = if h_sigma { 1.0 } else { 0.0 };
        p_c = (1.0 - c_c) * &p_c + hs * (c_c * (2.0 - c_c) * mu_eff).sqrt() * &y_w;

        let mut rank_mu = DMatrix::<f64>::zeros(n, n);
        for (&i, wi) in order[..mu].iter().zip(&w) {
            rank_mu += *wi * &ys[i] * ys[i].transpose();
        }
        c = (1.0 - c_1 - c_mu) * &c
            + c_1 * (&p_c * p_c.transpose() + (1.0 - hs) * c_c * (2.0 - c_c) * &c)
            + c_mu * rank_mu;
        sigma *= ((c_sigma / d_sigma) * (ps_norm / chi_n - 1.0)).exp();

        // keep C symmetric before decomposing
        c = 0.5 * (&c + c.transpose());
        let eig = SymmetricEigen::new(c.clone());
        b = eig.eigenvectors;
        d = eig.eigenvalues.map(|v| v.max(1e-20).sqrt());

        history.push(fitness[order[0]]);
        if history.len() > hist_len {
            history.remove(0);
        }
        let flat = history.len() == hist_len
            && history.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                - history.iter().copied().fold(f64::INFINITY, f64::min)
                < 1e-12;
        let tiny = sigma * d.max() < 1e-10;
        let ill = d.max() / d.min().max(1e-300) > 1e7;
        if flat || tiny || ill || !sigma.is_finite() || sigma > 1e6 {
            return Ok(());
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acqopt::AcqOptKind;
    use crate::acquisition::AcqError;
    use crate::space::{ParamDef, Point};
    use rand::SeedableRng;

    fn sphere_score(c: Vec<f64>) -> impl FnMut(&[Point]) -> Result<Vec<f64>, AcqError> {
        move |pts: &[Point]| {
            Ok(pts
                .iter()
                .map(|p| -(0..c.len()).map(|i| (p.num(i).unwrap() - c[i]).powi(2)).sum::<f64>())
                .collect())
        }
    }

    #[test]
    fn sphere_2d() {
        let space = ParamSpace::new(vec![ParamDef::double("a", 0.0, 1.0), ParamDef::double("b", 0.0, 1.0)]).unwrap();
        let cfg = AcqOptConfig::new(AcqOptKind::Cmaes).with_budget(400);
        let mut f = sphere_score(vec![0.27, 0.81]);
        let best = optimize_cmaes(&space, &cfg, &mut f, &mut MboRng::seed_from_u64(3)).unwrap();
        assert!((best.point.num(0).unwrap() - 0.27).abs() < 1e-2);
        assert!((best.point.num(1).unwrap() - 0.81).abs() < 1e-2);
    }

    #[test]
    fn one_dimensional_quadratic() {
        let space = ParamSpace::new(vec![ParamDef::double("x", -2.0, 3.0)]).unwrap();
        let cfg = AcqOptConfig::new(AcqOptKind::Cmaes).with_budget(300);
        let mut f = sphere_score(vec![1.234]);
        let best = optimize_cmaes(&space, &cfg, &mut f, &mut MboRng::seed_from_u64(1)).unwrap();
        assert!((best.point.num(0).unwrap() - 1.234).abs() < 1e-3);
    }

    #[test]
    fn optimum_on_the_boundary() {
        let space = ParamSpace::new(vec![ParamDef::double("a", 0.0, 1.0), ParamDef::double("b", 0.0, 1.0)]).unwrap();
        let cfg = AcqOptConfig::new(AcqOptKind::Cmaes).with_budget(400);
        let mut f = sphere_score(vec![1.3, -0.2]);
        let best = optimize_cmaes(&space, &cfg, &mut f, &mut MboRng::seed_from_u64(2)).unwrap();
        assert!(best.point.num(0).unwrap() > 0.99);
        assert!(best.point.num(1).unwrap() < 0.01);
    }

    #[test]
    fn partial_generation() {
        let space = ParamSpace::new(vec![ParamDef::double("a", 0.0, 1.0), ParamDef::double("b", 0.0, 1.0)]).unwrap();
        let cfg = AcqOptConfig::new(AcqOptKind::Cmaes).with_budget(3);
        let mut calls = Vec::new();
        let mut f = |pts: &[Point]| -> Result<Vec<f64>, AcqError> {
            calls.push(pts.len());
            Ok(vec![0.0; pts.len()])
        };
        optimize_cmaes(&space, &cfg, &mut f, &mut MboRng::seed_from_u64(2)).unwrap();
        assert_eq!(calls, vec![3]);
    }

    #[test]
    fn rejects_categorical_space() {
        let space = ParamSpace::new(vec![ParamDef::factor("f", &["a", "b"])]).unwrap();
        let cfg = AcqOptConfig::new(AcqOptKind::Cmaes);
        let mut f = sphere_score(vec![0.0]);
        assert!(matches!(
            optimize_cmaes(&space, &cfg, &mut f, &mut MboRng::seed_from_u64(2)),
            Err(AcqOptError::Config(_))
        ));
    }
}
