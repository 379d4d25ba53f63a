//! Regularized incomplete beta function and the quadrature used for
//! expectations of maxima of Beta variables.

use statrs::function::beta::beta_reg;
use statrs::function::gamma::ln_gamma;

/// Largest `a + b - 1` for which integer parameters use the finite binomial sum.
const BINOMIAL_SUM_MAX_N: f64 = 400.0;

/// `I_x(a, b)`, the Beta(a, b) CDF at `x`.
///
/// Integer parameters (the common case: Beta-Bernoulli counts from a uniform
/// prior) go through the exact binomial tail identity; everything else uses
/// the continued-fraction expansion.
pub fn beta_cdf(x: f64, a: f64, b: f64) -> f64 {
    debug_assert!(a > 0.0 && b > 0.0, "beta parameters must be positive");
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    if a.fract() == 0.0 && b.fract() == 0.0 && a + b - 1.0 <= BINOMIAL_SUM_MAX_N {
        return beta_cdf_integer(x, a as u32, b as u32);
    }
    beta_reg(a, b, x)
}

/// Continued-fraction evaluation regardless of parameter type.
pub fn beta_cdf_continued_fraction(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    beta_reg(a, b, x)
}

/// `I_x(a, b) = P(Binomial(a+b-1, x) >= a)` for positive integers.
pub fn beta_cdf_integer(x: f64, a: u32, b: u32) -> f64 {
    let n = a + b - 1;
    let mean_frac = a as f64 / (a + b) as f64;
    if x <= mean_frac {
        binomial_upper_tail(n, a, x)
    } else {
        // I_x(a, b) = 1 - I_{1-x}(b, a)
        1.0 - binomial_upper_tail(n, b, 1.0 - x)
    }
}

/// `P(Binomial(n, p) >= k)`, summed upward from `k`. Accurate when `k` is at
/// or above the mode, where the terms decrease.
fn binomial_upper_tail(n: u32, k: u32, p: f64) -> f64 {
    if k > n {
        return 0.0;
    }
    if k == 0 {
        return 1.0;
    }
    let (nf, kf) = (n as f64, k as f64);
    let ln_choose = ln_gamma(nf + 1.0) - ln_gamma(kf + 1.0) - ln_gamma(nf - kf + 1.0);
    let mut term = (ln_choose + kf * p.ln() + (nf - kf) * (1.0 - p).ln()).exp();
    let ratio = p / (1.0 - p);
    let mut sum = 0.0;
    for j in k..=n {
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
        term *= (n - j) as f64 / (j + 1) as f64 * ratio;
    }
    sum.min(1.0)
}

/// Composite Simpson rule on `[lo, hi]` with `points` nodes (rounded up to odd).
pub fn simpson<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, points: usize) -> f64 {
    let points = points.max(3) | 1;
    let intervals = points - 1;
    let h = (hi - lo) / intervals as f64;
    let mut acc = f(lo) + f(hi);
    for i in 1..intervals {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(lo + i as f64 * h);
    }
    acc * h / 3.0
}

/// Simpson weights for `points` equally spaced nodes on `[0, 1]`.
pub fn simpson_weights(points: usize) -> Vec<f64> {
    let points = points.max(3) | 1;
    let h = 1.0 / (points - 1) as f64;
    (0..points)
        .map(|i| {
            let w = if i == 0 || i == points - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * h / 3.0
        })
        .collect()
}

/// `E[max_i X_i]` for independent `X_i ~ Beta(a_i, b_i)`, via
/// `∫_0^1 (1 - Π_i I_x(a_i, b_i)) dx`.
pub fn expected_max_beta(params: &[(f64, f64)], points: usize) -> f64 {
    if params.is_empty() {
        return f64::NEG_INFINITY;
    }
    simpson(|x| 1.0 - params.iter().map(|&(a, b)| beta_cdf(x, a, b)).product::<f64>(), 0.0, 1.0, points)
}

/// `E[max(X, m)]` for `X ~ Beta(a, b)` and a constant `m`, in closed form:
/// `m·I_m(a,b) + μ·(1 - I_m(a+1,b))`.
pub fn expected_max_beta_const(a: f64, b: f64, m: f64) -> f64 {
    let mu = a / (a + b);
    if m <= 0.0 {
        return mu.max(m);
    }
    if m >= 1.0 {
        return m;
    }
    m * beta_cdf(m, a, b) + mu * (1.0 - beta_cdf(m, a + 1.0, b))
}

/// `E[X · 1{X < t}]` for `X ~ Beta(a, b)`.
pub fn partial_mean_below(a: f64, b: f64, t: f64) -> f64 {
    a / (a + b) * beta_cdf(t, a + 1.0, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn integer_route_matches_continued_fraction() {
        for a in 1..=30u32 {
            for b in 1..=30u32 {
                for &x in &[1e-6, 0.01, 0.05, 0.3, 0.5, 0.77, 0.99, 1.0 - 1e-7] {
                    let exact = beta_cdf_integer(x, a, b);
                    let cf = beta_cdf_continued_fraction(x, a as f64, b as f64);
                    let tol = 1e-10 * cf.abs().max(1e-300) + 1e-15;
                    assert!((exact - cf).abs() <= tol.max(1e-13), "a={a} b={b} x={x}: {exact} vs {cf}");
                }
            }
        }
    }

    #[test]
    fn known_values() {
        // I_x(1,1) = x, I_x(2,1) = x^2, I_x(1,2) = 1-(1-x)^2
        assert_relative_eq!(beta_cdf(0.3, 1.0, 1.0), 0.3, epsilon = 1e-15);
        assert_relative_eq!(beta_cdf(0.3, 2.0, 1.0), 0.09, epsilon = 1e-15);
        assert_relative_eq!(beta_cdf(0.3, 1.0, 2.0), 0.51, epsilon = 1e-14);
        assert_relative_eq!(beta_cdf(0.5, 7.0, 7.0), 0.5, epsilon = 1e-14);
        // non-integer: I_x(0.5, 0.5) = (2/pi) asin(sqrt x)
        let x: f64 = 0.2;
        assert_relative_eq!(
            beta_cdf(x, 0.5, 0.5),
            2.0 / std::f64::consts::PI * x.sqrt().asin(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn expected_max_of_two_uniforms() {
        assert_relative_eq!(expected_max_beta(&[(1.0, 1.0), (1.0, 1.0)], 513), 2.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(expected_max_beta(&[(2.0, 5.0)], 513), 2.0 / 7.0, epsilon = 1e-10);
    }

    #[test]
    fn expected_max_with_constant() {
        // E[max(U, 1/2)] = 5/8
        assert_relative_eq!(expected_max_beta_const(1.0, 1.0, 0.5), 0.625, epsilon = 1e-14);
        // check against quadrature for a non-trivial case
        let (a, b, m) = (3.0, 4.0, 0.37);
        let quad = m + simpson(|x| 1.0 - beta_cdf(x, a, b), m, 1.0, 2001);
        assert_relative_eq!(expected_max_beta_const(a, b, m), quad, epsilon = 1e-11);
    }

    #[test]
    fn simpson_is_exact_on_cubics() {
        let v = simpson(|x| 4.0 * x * x * x - x + 2.0, 0.0, 1.0, 5);
        assert_relative_eq!(v, 1.0 - 0.5 + 2.0, epsilon = 1e-14);
        let w: f64 = simpson_weights(513).iter().sum();
        assert_relative_eq!(w, 1.0, epsilon = 1e-14);
    }
}
