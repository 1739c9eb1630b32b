use serde::{Deserialize, Serialize};

/// Stationary correlation families. Multi-dimensional kernels are products
/// of one-dimensional correlations with per-dimension lengthscales.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    Gauss,
    Matern32,
    Matern52,
    Exp,
}

impl Kernel {
    /// One-dimensional correlation at scaled distance `r = |h| / l`.
    #[inline]
    pub fn corr_1d(self, r: f64) -> f64 {
        let r = r.abs();
        match self {
            Kernel::Gauss => (-0.5 * r * r).exp(),
            Kernel::Matern32 => {
                let s = 3f64.sqrt() * r;
                (1.0 + s) * (-s).exp()
            }
            Kernel::Matern52 => {
                let s = 5f64.sqrt() * r;
                (1.0 + s + s * s / 3.0) * (-s).exp()
            }
            Kernel::Exp => (-r).exp(),
        }
    }

    /// Correlation between `a` and `b`.
    pub fn corr(self, a: &[f64], b: &[f64], lengthscales: &[f64]) -> f64 {
        match self {
            // the product of gaussian factors is a single exponential
            Kernel::Gauss => {
                let q: f64 = a
                    .iter()
                    .zip(b)
                    .zip(lengthscales)
                    .map(|((x, y), l)| {
                        let r = (x - y) / l;
                        r * r
                    })
                    .sum();
                (-0.5 * q).exp()
            }
            Kernel::Exp => {
                let s: f64 = a
                    .iter()
                    .zip(b)
                    .zip(lengthscales)
                    .map(|((x, y), l)| ((x - y) / l).abs())
                    .sum();
                (-s).exp()
            }
            // product of polynomial factors times one shared exponential
            Kernel::Matern32 => {
                let (mut poly, mut s_sum) = (1.0, 0.0);
                for ((x, y), l) in a.iter().zip(b).zip(lengthscales) {
                    let s = 3f64.sqrt() * ((x - y) / l).abs();
                    poly *= 1.0 + s;
                    s_sum += s;
                }
                poly * (-s_sum).exp()
            }
            Kernel::Matern52 => {
                let (mut poly, mut s_sum) = (1.0, 0.0);
                for ((x, y), l) in a.iter().zip(b).zip(lengthscales) {
                    let s = 5f64.sqrt() * ((x - y) / l).abs();
                    poly *= 1.0 + s + s * s / 3.0;
                    s_sum += s;
                }
                poly * (-s_sum).exp()
            }
        }
    }
}
