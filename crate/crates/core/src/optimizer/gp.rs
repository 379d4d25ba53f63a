//! Gaussian-process surrogate on standardized targets: isotropic
//! squared-exponential kernel with unit signal variance, per-point noise,
//! and a length scale picked by marginal likelihood on a fixed grid.

use std::f64::consts::{PI, SQRT_2};

use statrs::function::erf::erfc;

pub const DIM: usize = 3;

pub const LENGTH_SCALES: [f64; 10] = [0.05, 0.08, 0.12, 0.18, 0.25, 0.35, 0.5, 0.7, 1.0, 1.5];

const JITTER: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct GaussianProcess {
    xs: Vec<[f64; DIM]>,
    length_scale: f64,
    y_mean: f64,
    y_scale: f64,
    /// Lower Cholesky factor of `K + diag(noise)`, row-major.
    chol: Vec<f64>,
    alpha: Vec<f64>,
    log_marginal: f64,
}

fn sq_dist(a: &[f64; DIM], b: &[f64; DIM]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// In-place Cholesky of a symmetric positive-definite `n × n` matrix; `false`
/// if a pivot is not positive.
fn cholesky(a: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if d <= 0.0 || !d.is_finite() {
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
        for i in 0..j {
            a[i * n + j] = 0.0;
        }
    }
    true
}

fn forward_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

fn backward_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

impl GaussianProcess {
    /// Fits with a given length scale. `noise_var` is in target units.
    pub fn fit(xs: &[[f64; DIM]], ys: &[f64], noise_var: &[f64], length_scale: f64) -> Option<Self> {
        let n = xs.len();
        assert!(n > 0 && ys.len() == n && noise_var.len() == n);
        let y_mean = ys.iter().sum::<f64>() / n as f64;
        let var = ys.iter().map(|y| (y - y_mean) * (y - y_mean)).sum::<f64>() / n as f64;
        let y_scale = if var > 1e-24 { var.sqrt() } else { 1.0 };
        let z: Vec<f64> = ys.iter().map(|y| (y - y_mean) / y_scale).collect();
        let inv_two_l2 = 1.0 / (2.0 * length_scale * length_scale);
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v = (-sq_dist(&xs[i], &xs[j]) * inv_two_l2).exp();
                k[i * n + j] = v;
                k[j * n + i] = v;
            }
            k[i * n + i] += noise_var[i] / (y_scale * y_scale) + JITTER;
        }
        if !cholesky(&mut k, n) {
            return None;
        }
        let mut alpha = z.clone();
        forward_solve(&k, n, &mut alpha);
        let data_fit: f64 = alpha.iter().map(|a| a * a).sum();
        backward_solve(&k, n, &mut alpha);
        let log_det: f64 = (0..n).map(|i| k[i * n + i].ln()).sum();
        let log_marginal = -0.5 * data_fit - log_det - 0.5 * n as f64 * (2.0 * PI).ln();
        Some(GaussianProcess { xs: xs.to_vec(), length_scale, y_mean, y_scale, chol: k, alpha, log_marginal })
    }

    /// Fits every grid length scale and keeps the most likely one.
    pub fn fit_best(xs: &[[f64; DIM]], ys: &[f64], noise_var: &[f64], grid: &[f64]) -> Option<Self> {
        grid.iter()
            .filter_map(|&l| Self::fit(xs, ys, noise_var, l))
            .fold(None, |best: Option<Self>, gp| match best {
                Some(b) if b.log_marginal >= gp.log_marginal => Some(b),
                _ => Some(gp),
            })
    }

    pub fn length_scale(&self) -> f64 {
        self.length_scale
    }

    pub fn log_marginal(&self) -> f64 {
        self.log_marginal
    }

    /// Posterior mean and standard deviation of the latent function, in
    /// target units.
    pub fn predict(&self, x: &[f64; DIM]) -> (f64, f64) {
        let n = self.xs.len();
        let inv_two_l2 = 1.0 / (2.0 * self.length_scale * self.length_scale);
        let mut v: Vec<f64> = self.xs.iter().map(|xi| (-sq_dist(xi, x) * inv_two_l2).exp()).collect();
        let mean: f64 = v.iter().zip(&self.alpha).map(|(k, a)| k * a).sum();
        forward_solve(&self.chol, n, &mut v);
        let var = (1.0 - v.iter().map(|a| a * a).sum::<f64>()).max(0.0);
        (self.y_mean + self.y_scale * mean, self.y_scale * var.sqrt())
    }
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// Expected improvement of a Gaussian prediction over `best` by more than `xi`.
pub fn expected_improvement(mean: f64, sd: f64, best: f64, xi: f64) -> f64 {
    let gain = mean - best - xi;
    if sd <= 1e-12 {
        return gain.max(0.0);
    }
    let z = gain / sd;
    (gain * normal_cdf(z) + sd * normal_pdf(z)).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_noiseless_data() {
        let xs: Vec<[f64; DIM]> = (0..8).map(|i| [i as f64 / 7.0, 0.5, 0.5]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (3.0 * x[0]).sin()).collect();
        let gp = GaussianProcess::fit_best(&xs, &ys, &[0.0; 8], &LENGTH_SCALES).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            let (m, s) = gp.predict(x);
            assert!((m - y).abs() < 1e-3, "{m} vs {y}");
            assert!(s < 1e-2);
        }
        let (m, _) = gp.predict(&[0.5, 0.5, 0.5]);
        assert!((m - 1.5f64.sin()).abs() < 0.02);
    }

    #[test]
    fn uncertainty_grows_away_from_data() {
        let xs = [[0.1, 0.1, 0.1], [0.2, 0.1, 0.1]];
        let gp = GaussianProcess::fit(&xs, &[1.0, 2.0], &[0.0, 0.0], 0.1).unwrap();
        let (_, near) = gp.predict(&[0.15, 0.1, 0.1]);
        let (_, far) = gp.predict(&[0.9, 0.9, 0.9]);
        assert!(near < far);
        assert!((far - gp.y_scale).abs() < 1e-6);
    }

    #[test]
    fn marginal_likelihood_matches_direct_formula() {
        let xs = [[0.0, 0.0, 0.0], [0.3, 0.0, 0.0]];
        let ys = [1.0, -1.0];
        let gp = GaussianProcess::fit(&xs, &ys, &[0.0, 0.0], 0.5).unwrap();
        // standardized targets are ±1; K = [[1+j, r], [r, 1+j]]
        let r = (-0.09f64 / 0.5).exp();
        let d = 1.0 + JITTER;
        let det = d * d - r * r;
        let quad = (2.0 * d + 2.0 * r) / det;
        let want = -0.5 * quad - 0.5 * det.ln() - (2.0 * PI).ln();
        assert!((gp.log_marginal() - want).abs() < 1e-9);
    }

    #[test]
    fn expected_improvement_basics() {
        assert_eq!(expected_improvement(1.0, 0.0, 0.5, 0.0), 0.5);
        assert_eq!(expected_improvement(0.0, 0.0, 0.5, 0.0), 0.0);
        let ei = expected_improvement(0.0, 1.0, 0.0, 0.0);
        assert!((ei - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-12);
        assert!(expected_improvement(0.0, 2.0, 0.0, 0.0) > ei);
    }
}
