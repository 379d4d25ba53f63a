use serde::{Deserialize, Serialize};

use super::{Solvable, ValueTable};
use crate::error::{MetaError, Result};
use crate::features::{belief_features, FeatureConfig, VoiFeatures};
use crate::mdp::{BeliefState, MetaAction};

/// Least-squares fit `VOC ≈ a·VPI + b·VOI₁ + c·λ`. The cost column is
/// constant within one cost setting, so `c·λ` plays the role of the
/// intercept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VocRegression {
    pub cost: f64,
    pub coef_vpi: f64,
    pub coef_voi1: f64,
    pub coef_cost: f64,
    pub r_squared: f64,
    pub n: usize,
}

impl VocRegression {
    pub fn predict(&self, vpi: f64, voi1: f64) -> f64 {
        self.coef_vpi * vpi + self.coef_voi1 * voi1 + self.coef_cost * self.cost
    }
}

/// One regression observation: exact VOC of a computation at a state.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionPoint<B> {
    pub state: BeliefState<B>,
    pub computation: usize,
    pub vpi: f64,
    pub voi1: f64,
    pub cost: f64,
    pub voc: f64,
}

/// Every reachable state at which computing is still allowed, paired with
/// every informative computation there.
pub fn voc_regression_points<M: VoiFeatures + Solvable>(
    mdp: &M,
    table: &ValueTable,
    beliefs: &[BeliefState<M::Belief>],
    config: &FeatureConfig,
) -> Result<Vec<RegressionPoint<M::Belief>>> {
    let cost = mdp.spec().cost;
    let mut points = Vec::new();
    for s in beliefs {
        if s.must_terminate(table.horizon) {
            continue;
        }
        let f = belief_features(mdp, &s.belief, config);
        for c in 0..f.num_computations() {
            if !f.informative[c] {
                continue;
            }
            let voc = table.exact_voc(mdp, &s.belief, s.step, MetaAction::Compute(c))?;
            points.push(RegressionPoint { state: s.clone(), computation: c, vpi: f.vpi, voi1: f.voi1[c], cost, voc });
        }
    }
    Ok(points)
}

/// Regresses exact VOC onto the features over [`voc_regression_points`].
pub fn fit_voc_regression<M: VoiFeatures + Solvable>(
    mdp: &M,
    table: &ValueTable,
    beliefs: &[BeliefState<M::Belief>],
    config: &FeatureConfig,
) -> Result<VocRegression> {
    let points = voc_regression_points(mdp, table, beliefs, config)?;
    let rows: Vec<([f64; 3], f64)> = points.iter().map(|p| ([p.vpi, p.voi1, p.cost], p.voc)).collect();
    let (beta, r_squared) = least_squares(&rows)?;
    let cost = mdp.spec().cost;
    Ok(VocRegression { cost, coef_vpi: beta[0], coef_voi1: beta[1], coef_cost: beta[2], r_squared, n: rows.len() })
}

/// No-intercept OLS of `y` on three columns with the centered R².
pub fn least_squares(rows: &[([f64; 3], f64)]) -> Result<([f64; 3], f64)> {
    if rows.len() < 4 {
        return Err(MetaError::DegenerateDesign(format!("{} observations, need at least 4", rows.len())));
    }
    let mut xtx = [[0.0f64; 3]; 3];
    let mut xty = [0.0f64; 3];
    for (x, y) in rows {
        for i in 0..3 {
            xty[i] += x[i] * y;
            for j in 0..3 {
                xtx[i][j] += x[i] * x[j];
            }
        }
    }
    let beta = solve3(xtx, xty).ok_or_else(|| MetaError::DegenerateDesign("singular normal equations".into()))?;
    let n = rows.len() as f64;
    let mean_y = rows.iter().map(|r| r.1).sum::<f64>() / n;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (x, y) in rows {
        let fit = beta[0] * x[0] + beta[1] * x[1] + beta[2] * x[2];
        ss_res += (y - fit) * (y - fit);
        ss_tot += (y - mean_y) * (y - mean_y);
    }
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok((beta, r_squared))
}

/// Gaussian elimination with partial pivoting; `None` if singular.
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() <= 1e-12 * scale {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for i in (0..3).rev() {
        let s: f64 = (i + 1..3).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_linear_target() {
        let rows: Vec<([f64; 3], f64)> =
            (0..10).map(|i| ([i as f64, (i * i) as f64, 1.0], 2.0 * i as f64 - 0.5 * (i * i) as f64 + 3.0)).collect();
        let (b, r2) = least_squares(&rows).unwrap();
        assert!((b[0] - 2.0).abs() < 1e-9 && (b[1] + 0.5).abs() < 1e-9 && (b[2] - 3.0).abs() < 1e-9);
        assert!((r2 - 1.0).abs() < 1e-12);
        assert_eq!(least_squares(&rows[..3]).unwrap_err().category(), "degenerate-design");
    }

    #[test]
    fn solves_small_system() {
        let a = [[2.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 4.0]];
        let x = solve3(a, [3.0, 5.0, 5.0]).unwrap();
        for (got, want) in x.iter().zip([1.0, 1.0, 1.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!(solve3([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 0.0, 1.0]], [1.0, 2.0, 3.0]).is_none());
    }
}
