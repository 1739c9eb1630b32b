//! Nelder–Mead simplex minimizer.

/// Minimizes `f` starting from `x0`, with initial simplex edges of length
/// `step` along each axis. Returns the best vertex and its value.
pub(crate) fn nelder_mead<F>(mut f: F, x0: &[f64], step: f64, max_iter: usize) -> (Vec<f64>, f64)
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f(x0)));
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += step;
        let fv = f(&v);
        simplex.push((v, fv));
    }
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        if (worst - best).abs() <= 1e-10 * (1.0 + best.abs()) {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|v| v.0[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64, from: &[f64]| -> Vec<f64> {
            centroid.iter().zip(from).map(|(c, w)| c + t * (w - c)).collect()
        };
        let xr = along(-1.0, &simplex[n].0);
        let fr = f(&xr);
        if fr < best {
            let xe = along(-2.0, &simplex[n].0);
            let fe = f(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst {
                let xc = along(-0.5, &simplex[n].0);
                let fc = f(&xc);
                (xc, fc)
            } else {
                let xc = along(0.5, &simplex[n].0);
                let fc = f(&xc);
                (xc, fc)
            };
            if fc < worst.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                // shrink towards the best vertex
                let x_best = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    for (xj, bj) in v.0.iter_mut().zip(&x_best) {
                        *xj = bj + 0.5 * (*xj - bj);
                    }
                    v.1 = f(&v.0);
                }
            }
        }
    }
    simplex
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("simplex is non-empty")
}
