use rand::Rng;
use serde::{Deserialize, Serialize};

use super::kernel::Kernel;
use super::simplex::nelder_mead;
use super::SurrogateError;
use crate::MboRng;

const LN_2PI: f64 = 1.837_877_066_409_345_3;
const LL_FAIL: f64 = 1e300;

/// Diagonal noise term of the kernel matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Nugget {
    Fixed(f64),
    /// Estimated jointly with the kernel hyperparameters.
    Free,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpConfig {
    pub kernel: Kernel,
    pub nugget: Nugget,
    /// Standardize each input column to zero mean and unit variance.
    pub scale_inputs: bool,
    /// Random hyperparameter candidates screened by likelihood.
    pub n_starts: usize,
    /// Best candidates refined by simplex descent.
    pub n_refine: usize,
    pub max_iter: usize,
}

impl Default for GpConfig {
    fn default() -> Self {
        GpConfig {
            kernel: Kernel::Matern32,
            nugget: Nugget::Fixed(1e-8),
            scale_inputs: false,
            n_starts: 20,
            n_refine: 3,
            max_iter: 200,
        }
    }
}

/// Fitted hyperparameters, serializable for fixtures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpHyper {
    pub kernel: Kernel,
    pub lengthscales: Vec<f64>,
    pub signal_variance: f64,
    pub nugget: f64,
    pub mean_const: f64,
    /// Diagonal jitter the factorization needed (0 if none).
    pub jitter: f64,
    pub log_likelihood: f64,
    /// Log-likelihood at the deterministic initial hyperparameters.
    pub initial_log_likelihood: f64,
}

/// Gaussian process with constant mean, fitted by maximum likelihood.
#[derive(Debug, Clone)]
pub struct GaussianProcess {
    hyper: GpHyper,
    shift: Vec<f64>,
    scale: Vec<f64>,
    x: Vec<Vec<f64>>,
    chol: Vec<f64>,
    alpha: Vec<f64>,
}

struct Factor {
    chol: Vec<f64>,
    jitter: f64,
    alpha: Vec<f64>,
    mean: f64,
    ll: f64,
}

impl GaussianProcess {
    pub fn fit(
        x: &[Vec<f64>],
        y: &[f64],
        cfg: &GpConfig,
        rng: &mut MboRng,
    ) -> Result<GaussianProcess, SurrogateError> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(SurrogateError::TooFewPoints(n));
        }
        if y.iter().any(|v| !v.is_finite()) || x.iter().flatten().any(|v| !v.is_finite()) {
            return Err(SurrogateError::FitFailed("non-finite training data".into()));
        }
        let d = x[0].len();
        if cfg.nugget == Nugget::Fixed(0.0) && has_duplicates(x) {
            return Err(SurrogateError::FitFailed(
                "duplicate inputs make the noise-free kernel matrix singular".into(),
            ));
        }

        let (shift, scale) = if cfg.scale_inputs {
            column_moments(x)
        } else {
            (vec![0.0; d], vec![1.0; d])
        };
        let xs: Vec<Vec<f64>> = x.iter().map(|r| standardize(r, &shift, &scale)).collect();

        let range: Vec<f64> = (0..d)
            .map(|j| {
                let (lo, hi) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                    (lo.min(r[j]), hi.max(r[j]))
                });
                if hi > lo {
                    hi - lo
                } else {
                    1.0
                }
            })
            .collect();
        let ybar = y.iter().sum::<f64>() / n as f64;
        let var = y.iter().map(|v| (v - ybar).powi(2)).sum::<f64>() / n as f64;
        let v0 = if var > 0.0 { var } else { 1.0 };

        let free = cfg.nugget == Nugget::Free;
        let fixed_eta = match cfg.nugget {
            Nugget::Fixed(e) => e,
            Nugget::Free => 0.0,
        };
        let mut lower: Vec<f64> = range.iter().map(|r| (1e-2 * r).ln()).collect();
        let mut upper: Vec<f64> = range.iter().map(|r| (1e2 * r).ln()).collect();
        lower.push((1e-4 * v0).ln());
        upper.push((1e4 * v0).ln());
        if free {
            lower.push((1e-10 * v0).ln());
            upper.push(v0.ln());
        }
        let clamp = |theta: &[f64]| -> Vec<f64> {
            theta
                .iter()
                .zip(lower.iter().zip(&upper))
                .map(|(t, (lo, hi))| t.clamp(*lo, *hi))
                .collect()
        };
        let unpack = |theta: &[f64]| -> (Vec<f64>, f64, f64) {
            let ls: Vec<f64> = theta[..d].iter().map(|t| t.exp()).collect();
            let s2 = theta[d].exp();
            let eta = if free { theta[d + 1].exp() } else { fixed_eta };
            (ls, s2, eta)
        };
        // jitter acts as an unrequested nugget, so jitter-free hyperparameters
        // are searched first
        let nll_with = |theta: &[f64], allow_jitter: bool| -> f64 {
            let (ls, s2, eta) = unpack(&clamp(theta));
            match factorize(&xs, y, cfg.kernel, &ls, s2, eta) {
                Some(f) if f.ll.is_finite() && (allow_jitter || f.jitter == 0.0) => -f.ll,
                _ => LL_FAIL,
            }
        };

        // candidate 0 is deterministic; the rest are random
        let mut candidates: Vec<Vec<f64>> = Vec::with_capacity(cfg.n_starts.max(1));
        let mut init: Vec<f64> = range.iter().map(|r| (0.5 * r).ln()).collect();
        init.push(v0.ln());
        if free {
            init.push((1e-3 * v0).ln());
        }
        candidates.push(init);
        for _ in 1..cfg.n_starts.max(1) {
            let mut c: Vec<f64> = range
                .iter()
                .map(|r| r.ln() + rng.random_range(-2.0..2.0) * std::f64::consts::LN_10)
                .collect();
            c.push(v0.ln() + rng.random_range(-1.0..1.0) * std::f64::consts::LN_10);
            if free {
                c.push(v0.ln() + rng.random_range(-8.0..-1.0) * std::f64::consts::LN_10);
            }
            candidates.push(clamp(&c));
        }

        let search = |allow_jitter: bool| -> (f64, Vec<f64>, f64) {
            let neg_ll = |theta: &[f64]| nll_with(theta, allow_jitter);
            let mut scored: Vec<(usize, f64)> = candidates
                .iter()
                .enumerate()
                .map(|(i, c)| (i, neg_ll(c)))
                .collect();
            let initial_nll = scored[0].1;
            scored.sort_by(|a, b| a.1.total_cmp(&b.1));

            let mut best_theta = candidates[scored[0].0].clone();
            let mut best_nll = scored[0].1;
            for &(i, nll) in scored.iter().take(cfg.n_refine) {
                if nll >= LL_FAIL {
                    continue;
                }
                let (theta, v) = nelder_mead(neg_ll, &candidates[i], 0.5, cfg.max_iter);
                if v < best_nll {
                    best_nll = v;
                    best_theta = clamp(&theta);
                }
            }
            (initial_nll, best_theta, best_nll)
        };
        let (mut initial_nll, mut best_theta, mut best_nll) = search(false);
        if best_nll >= LL_FAIL {
            (initial_nll, best_theta, best_nll) = search(true);
        }
        if best_nll >= LL_FAIL {
            return Err(SurrogateError::FitFailed(
                "kernel matrix not positive definite after jitter escalation".into(),
            ));
        }

        let (ls, s2, eta) = unpack(&best_theta);
        let f = factorize(&xs, y, cfg.kernel, &ls, s2, eta)
            .ok_or_else(|| SurrogateError::FitFailed("refactorization failed".into()))?;
        Ok(GaussianProcess {
            hyper: GpHyper {
                kernel: cfg.kernel,
                lengthscales: ls,
                signal_variance: s2,
                nugget: eta,
                mean_const: f.mean,
                jitter: f.jitter,
                log_likelihood: f.ll,
                initial_log_likelihood: if initial_nll >= LL_FAIL {
                    f64::NEG_INFINITY
                } else {
                    -initial_nll
                },
            },
            shift,
            scale,
            x: xs,
            chol: f.chol,
            alpha: f.alpha,
        })
    }

    pub fn hyper(&self) -> &GpHyper {
        &self.hyper
    }

    pub fn n_train(&self) -> usize {
        self.x.len()
    }

    /// Posterior mean and standard deviation at `x`.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let h = &self.hyper;
        let xq = standardize(x, &self.shift, &self.scale);
        let k: Vec<f64> = self
            .x
            .iter()
            .map(|xi| h.signal_variance * h.kernel.corr(&xq, xi, &h.lengthscales))
            .collect();
        let mean = h.mean_const + k.iter().zip(&self.alpha).map(|(a, b)| a * b).sum::<f64>();
        let v = forward(&self.chol, &k);
        let var = h.signal_variance + h.nugget - v.iter().map(|t| t * t).sum::<f64>();
        (mean, var.max(0.0).sqrt())
    }

    /// Log marginal likelihood of the training data under `hyper`, with the
    /// mean constant profiled out. `None` if factorization fails.
    pub fn log_likelihood_with(&self, lengthscales: &[f64], signal_variance: f64, nugget: f64, y: &[f64]) -> Option<f64> {
        factorize(&self.x, y, self.hyper.kernel, lengthscales, signal_variance, nugget).map(|f| f.ll)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.hyper).expect("hyperparameters serialize")
    }
}

fn has_duplicates(x: &[Vec<f64>]) -> bool {
    (0..x.len()).any(|i| (i + 1..x.len()).any(|j| x[i] == x[j]))
}

fn column_moments(x: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len() as f64;
    let d = x[0].len();
    let mut shift = vec![0.0; d];
    let mut scale = vec![1.0; d];
    for j in 0..d {
        let m = x.iter().map(|r| r[j]).sum::<f64>() / n;
        let v = x.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        shift[j] = m;
        scale[j] = if v > 0.0 { v.sqrt() } else { 1.0 };
    }
    (shift, scale)
}

fn standardize(x: &[f64], shift: &[f64], scale: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(shift.iter().zip(scale))
        .map(|(v, (m, s))| (v - m) / s)
        .collect()
}

fn factorize(
    x: &[Vec<f64>],
    y: &[f64],
    kernel: Kernel,
    ls: &[f64],
    s2: f64,
    eta: f64,
) -> Option<Factor> {
    let n = x.len();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        k[i * n + i] = s2 + eta;
        for j in 0..i {
            k[i * n + j] = s2 * kernel.corr(&x[i], &x[j], ls);
        }
    }
    let base_jitter = 1e-10 * (s2 + eta);
    let mut chol = k.clone();
    let mut jitter = 0.0;
    let mut ok = cholesky(&mut chol, n);
    while !ok {
        jitter = if jitter == 0.0 { base_jitter } else { jitter * 10.0 };
        if jitter > 1e-4 * (s2 + eta) * (1.0 + 1e-9) {
            return None;
        }
        chol.copy_from_slice(&k);
        for i in 0..n {
            chol[i * n + i] += jitter;
        }
        ok = cholesky(&mut chol, n);
    }
    let u = forward(&chol, y);
    let w = forward(&chol, &vec![1.0; n]);
    let ww: f64 = w.iter().map(|t| t * t).sum();
    let mean = w.iter().zip(&u).map(|(a, b)| a * b).sum::<f64>() / ww;
    let r: Vec<f64> = u.iter().zip(&w).map(|(a, b)| a - mean * b).collect();
    let quad: f64 = r.iter().map(|t| t * t).sum();
    let logdet: f64 = (0..n).map(|i| chol[i * n + i].ln()).sum();
    let ll = -0.5 * quad - logdet - 0.5 * n as f64 * LN_2PI;
    let alpha = backward(&chol, &r);
    Some(Factor {
        chol,
        jitter,
        alpha,
        mean,
        ll,
    })
}

/// In-place lower Cholesky factor of a row-major matrix (lower triangle
/// read). Fails on pivots that are not clearly positive.
fn cholesky(a: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let diag = a[j * n + j];
        let mut d = diag;
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > 1e-12 * diag) || !d.is_finite() {
            return false;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    true
}

/// Solves `L z = b`.
fn forward(l: &[f64], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut z = vec![0.0; n];
    for i in 0..n {
        let row = &l[i * n..i * n + i];
        let s: f64 = row.iter().zip(&z[..i]).map(|(a, b)| a * b).sum();
        z[i] = (b[i] - s) / l[i * n + i];
    }
    z
}

/// Solves `Lᵀ x = z`.
fn backward(l: &[f64], z: &[f64]) -> Vec<f64> {
    let n = z.len();
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng() -> MboRng {
        MboRng::seed_from_u64(11)
    }

    fn cfg(kernel: Kernel, nugget: f64) -> GpConfig {
        GpConfig {
            kernel,
            nugget: Nugget::Fixed(nugget),
            ..GpConfig::default()
        }
    }

    #[test]
    fn cholesky_reconstructs_matrix() {
        let a = [4.0, 2.0, 0.6, 2.0, 5.0, 1.0, 0.6, 1.0, 3.0];
        let mut l = a;
        assert!(cholesky(&mut l, 3));
        for i in 0..3 {
            for j in 0..=i {
                let s: f64 = (0..=j).map(|k| l[i * 3 + k] * l[j * 3 + k]).sum();
                assert!((s - a[i * 3 + j]).abs() < 1e-12);
            }
        }
        let b = [1.0, -2.0, 0.5];
        let x = backward(&l, &forward(&l, &b));
        for i in 0..3 {
            let ax: f64 = (0..3).map(|j| a[i * 3 + j] * x[j]).sum();
            assert!((ax - b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn duplicate_inputs_fail_without_nugget() {
        let x = vec![vec![0.3], vec![0.3]];
        let err = GaussianProcess::fit(&x, &[1.0, 2.0], &cfg(Kernel::Matern52, 0.0), &mut rng());
        assert!(matches!(err, Err(SurrogateError::FitFailed(_))));
    }

    #[test]
    fn constant_targets() {
        let x: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64 * 0.25]).collect();
        let gp = GaussianProcess::fit(&x, &[2.5; 5], &cfg(Kernel::Matern32, 0.0), &mut rng()).unwrap();
        for xi in &x {
            let (m, s) = gp.predict(xi);
            assert!((m - 2.5).abs() < 1e-9);
            assert!(s < 1e-6);
        }
    }

    #[test]
    fn interpolates_at_training_points() {
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 / 5.0]).collect();
        let y: Vec<f64> = x.iter().map(|v| (6.0 * v[0]).sin()).collect();
        let gp = GaussianProcess::fit(&x, &y, &cfg(Kernel::Matern52, 0.0), &mut rng()).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            let (m, s) = gp.predict(xi);
            assert!((m - yi).abs() < 1e-8);
            assert!(s <= 1e-6);
        }
    }

    #[test]
    fn far_field_reverts_to_prior() {
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 / 5.0]).collect();
        let y: Vec<f64> = x.iter().map(|v| v[0] * v[0]).collect();
        let gp = GaussianProcess::fit(&x, &y, &cfg(Kernel::Matern52, 0.0), &mut rng()).unwrap();
        let h = gp.hyper().clone();
        let far = 1.0 + 10.0 * h.lengthscales[0] * 5.0;
        let (m, s) = gp.predict(&[far]);
        let dist = far - 1.0;
        // correlation with the nearest training point bounds the deviation
        let c = Kernel::Matern52.corr_1d(dist / h.lengthscales[0]);
        assert!(c < 1e-6);
        assert!((m - h.mean_const).abs() < 1e-3 * (1.0 + h.mean_const.abs()));
        assert!((s / h.signal_variance.sqrt() - 1.0).abs() < 0.01);
    }

    #[test]
    fn mirrored_queries_have_equal_sd() {
        let x: Vec<Vec<f64>> = [-1.0, -0.4, 0.0, 0.4, 1.0].iter().map(|&v| vec![v]).collect();
        let y = [1.0, 0.16, 0.0, 0.16, 1.0];
        let gp = GaussianProcess::fit(&x, &y, &cfg(Kernel::Gauss, 1e-8), &mut rng()).unwrap();
        for q in [0.1, 0.25, 0.7, 1.3] {
            let (_, a) = gp.predict(&[q]);
            let (_, b) = gp.predict(&[-q]);
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn fitted_likelihood_not_below_initial() {
        let x: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 * 0.9, (i * i % 5) as f64]).collect();
        let y: Vec<f64> = x.iter().map(|v| v[0].sin() + 0.2 * v[1]).collect();
        for k in [Kernel::Gauss, Kernel::Matern32, Kernel::Matern52, Kernel::Exp] {
            let mut c = cfg(k, 1e-8);
            c.scale_inputs = true;
            let gp = GaussianProcess::fit(&x, &y, &c, &mut rng()).unwrap();
            let h = gp.hyper();
            assert!(h.log_likelihood >= h.initial_log_likelihood);
            assert!(h.lengthscales.iter().all(|l| *l > 0.0));
        }
    }

    #[test]
    fn free_nugget_absorbs_noise() {
        let mut r = MboRng::seed_from_u64(3);
        let x: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64 / 29.0]).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|v| v[0] + 0.3 * (r.random::<f64>() - 0.5))
            .collect();
        let c = GpConfig {
            nugget: Nugget::Free,
            ..GpConfig::default()
        };
        let gp = GaussianProcess::fit(&x, &y, &c, &mut rng()).unwrap();
        assert!(gp.hyper().nugget > 1e-4, "{:?}", gp.hyper());
    }

    #[test]
    fn deterministic_given_seed() {
        let x: Vec<Vec<f64>> = (0..7).map(|i| vec![(i as f64 * 1.3).cos()]).collect();
        let y: Vec<f64> = x.iter().map(|v| v[0].exp()).collect();
        let a = GaussianProcess::fit(&x, &y, &GpConfig::default(), &mut rng()).unwrap();
        let b = GaussianProcess::fit(&x, &y, &GpConfig::default(), &mut rng()).unwrap();
        assert_eq!(a.hyper(), b.hyper());
        assert_eq!(a.to_json(), b.to_json());
    }
}
