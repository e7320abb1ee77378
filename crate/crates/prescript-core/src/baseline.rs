//! Regress-and-compare baseline and policy evaluation.
//!
//! The baseline fits one ordinary least squares model per arm on the
//! samples that received it and prescribes the arm whose fitted outcome is
//! smallest. It is deliberately simple: it captures exactly the linear part
//! of every response, which makes it a sharp reference point for judging
//! when the network's extra capacity is buying anything.
//!
//! [`evaluate_policy`] scores any decision rule against an oracle table:
//! how often it picks the truly best arm, the mean noiseless outcome its
//! choices realize, and (for policies that expose per-arm estimates) the
//! mean squared error of those estimates.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::loss::{prescribe, Sample};
use crate::network::Network;
use crate::synth::OracleTable;
use crate::tree::{tree_predict, ObliqueTree};
use crate::{Error, Result};

/// Ridge strength used when an arm's normal equations cannot be solved
/// outright (too few samples or a singular pivot).
pub const RIDGE_LAMBDA: f64 = 1e-6;

/// Anything that maps features to a treatment choice.
pub trait Policy {
    fn decide(&self, x: &[f64]) -> Result<usize>;

    /// Per-arm outcome estimates backing the decision, when the policy has
    /// them. The default is honest ignorance.
    fn outcome_estimates(&self, x: &[f64]) -> Result<Option<Vec<f64>>> {
        let _ = x;
        Ok(None)
    }
}

impl Policy for Network {
    fn decide(&self, x: &[f64]) -> Result<usize> {
        Ok(prescribe(&self.predict(x)?))
    }

    /// Estimates include any attached rule penalties; they are the outcomes
    /// the network acts on, not unconstrained predictions.
    fn outcome_estimates(&self, x: &[f64]) -> Result<Option<Vec<f64>>> {
        Ok(Some(self.predict(x)?))
    }
}

impl Policy for ObliqueTree {
    fn decide(&self, x: &[f64]) -> Result<usize> {
        tree_predict(self, x)
    }
}

/// Per-arm linear outcome models, intercept first in each coefficient row.
#[derive(Debug, Clone, PartialEq)]
pub struct RcLinearModel {
    /// `k` rows of `d + 1` coefficients: intercept, then one per feature.
    pub coefs: Vec<Vec<f64>>,
    /// Arms whose fit needed the ridge fallback.
    pub ridge_arms: Vec<usize>,
}

impl RcLinearModel {
    pub fn d(&self) -> usize {
        self.coefs[0].len() - 1
    }

    pub fn k(&self) -> usize {
        self.coefs.len()
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.d() {
            return Err(Error::Shape {
                what: "baseline input",
                expected: self.d(),
                got: x.len(),
            });
        }
        Ok(self
            .coefs
            .iter()
            .map(|c| c[0] + crate::math::dot(&c[1..], x))
            .collect())
    }
}

impl Policy for RcLinearModel {
    fn decide(&self, x: &[f64]) -> Result<usize> {
        Ok(prescribe(&self.predict(x)?))
    }

    fn outcome_estimates(&self, x: &[f64]) -> Result<Option<Vec<f64>>> {
        Ok(Some(self.predict(x)?))
    }
}

/// Solves `a theta = b` by Gaussian elimination with partial pivoting.
/// Returns `None` when the best available pivot is effectively zero.
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r1, &r2| a[r1][col].abs().partial_cmp(&a[r2][col].abs()).unwrap())
            .unwrap();
        if a[pivot_row][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for c in col..n {
                a[row][c] -= factor * a[col][c];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut theta = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for c in row + 1..n {
            acc -= a[row][c] * theta[c];
        }
        theta[row] = acc / a[row][row];
    }
    Some(theta)
}

/// Fits the per-arm least squares models. Arms with fewer samples than
/// coefficients, or whose normal equations are singular, are refitted with
/// `RIDGE_LAMBDA` added to every diagonal entry and recorded in
/// `ridge_arms`. An arm nobody received is an error: there is nothing to
/// regress.
pub fn fit_rc_ols(data: &[Sample], k: usize) -> Result<RcLinearModel> {
    if k < 2 {
        return Err(Error::Contract(String::from(
            "regress and compare needs at least two arms",
        )));
    }
    if data.is_empty() {
        return Err(Error::Data(String::from("no training samples")));
    }
    let d = data[0].x.len();
    let p = d + 1;
    for (i, s) in data.iter().enumerate() {
        if s.x.len() != d {
            return Err(Error::Shape {
                what: "sample features",
                expected: d,
                got: s.x.len(),
            });
        }
        if s.treatment >= k {
            return Err(Error::Data(alloc::format!(
                "sample {i} received arm {} of {k}",
                s.treatment
            )));
        }
    }
    let mut coefs = Vec::with_capacity(k);
    let mut ridge_arms = Vec::new();
    for arm in 0..k {
        let rows: Vec<&Sample> = data.iter().filter(|s| s.treatment == arm).collect();
        if rows.is_empty() {
            return Err(Error::Data(alloc::format!(
                "arm {arm} has no samples to regress on"
            )));
        }
        // Normal equations on the intercept-augmented design.
        let mut xtx = vec![vec![0.0; p]; p];
        let mut xty = vec![0.0; p];
        let mut aug = vec![0.0; p];
        for s in &rows {
            aug[0] = 1.0;
            aug[1..].copy_from_slice(&s.x);
            for i in 0..p {
                for j in i..p {
                    xtx[i][j] += aug[i] * aug[j];
                }
                xty[i] += aug[i] * s.outcome;
            }
        }
        for i in 0..p {
            for j in 0..i {
                xtx[i][j] = xtx[j][i];
            }
        }
        let plain = if rows.len() >= p {
            solve_linear(xtx.clone(), xty.clone())
        } else {
            None
        };
        let theta = match plain {
            Some(t) => t,
            None => {
                ridge_arms.push(arm);
                let mut ridged = xtx;
                for (i, row) in ridged.iter_mut().enumerate() {
                    row[i] += RIDGE_LAMBDA;
                }
                solve_linear(ridged, xty).ok_or_else(|| {
                    Error::Data(alloc::format!("arm {arm} is singular even with ridge"))
                })?
            }
        };
        coefs.push(theta);
    }
    Ok(RcLinearModel { coefs, ridge_arms })
}

/// Evaluation of a policy against known counterfactuals.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub n: usize,
    /// Share of rows where the policy picked the oracle-best arm, in
    /// percent.
    pub oracle_accuracy_pct: f64,
    /// Mean noiseless outcome of the arms the policy picked; the score a
    /// deployment would realize.
    pub mean_prescribed_outcome: f64,
    /// Mean squared error of per-arm estimates over all `n * k` entries;
    /// `None` for policies without estimates.
    pub outcome_mse: Option<f64>,
}

pub fn evaluate_policy<P: Policy + ?Sized>(
    policy: &P,
    xs: &[Vec<f64>],
    oracle: &OracleTable,
) -> Result<EvalReport> {
    if xs.is_empty() {
        return Err(Error::Data(String::from("empty evaluation set")));
    }
    if xs.len() != oracle.outcomes.len() || xs.len() != oracle.optimal.len() {
        return Err(Error::Shape {
            what: "oracle rows",
            expected: xs.len(),
            got: oracle.outcomes.len().min(oracle.optimal.len()),
        });
    }
    let mut hits = 0usize;
    let mut outcome_sum = 0.0;
    let mut sq_sum = 0.0;
    let mut sq_count = 0usize;
    for (x, (row, &opt)) in xs
        .iter()
        .zip(oracle.outcomes.iter().zip(oracle.optimal.iter()))
    {
        let choice = policy.decide(x)?;
        if choice >= row.len() {
            return Err(Error::Data(alloc::format!(
                "policy chose arm {choice}, oracle has {}",
                row.len()
            )));
        }
        if choice == opt {
            hits += 1;
        }
        outcome_sum += row[choice];
        if let Some(est) = policy.outcome_estimates(x)? {
            if est.len() != row.len() {
                return Err(Error::Shape {
                    what: "outcome estimates",
                    expected: row.len(),
                    got: est.len(),
                });
            }
            for (e, o) in est.iter().zip(row.iter()) {
                sq_sum += (e - o) * (e - o);
                sq_count += 1;
            }
        }
    }
    let n = xs.len();
    Ok(EvalReport {
        n,
        oracle_accuracy_pct: 100.0 * hits as f64 / n as f64,
        mean_prescribed_outcome: outcome_sum / n as f64,
        outcome_mse: (sq_count > 0).then(|| sq_sum / sq_count as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn linear_samples(n: usize, arm_coefs: &[Vec<f64>], seed: u64) -> Vec<Sample> {
        let d = arm_coefs[0].len() - 1;
        let k = arm_coefs.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let arm = i % k;
                let c = &arm_coefs[arm];
                let y = c[0] + crate::math::dot(&c[1..], &x);
                Sample::new(x, arm, y)
            })
            .collect()
    }

    #[test]
    fn recovers_exact_coefficients_from_noiseless_data() {
        let truth = vec![vec![3.0, 2.0, -1.0], vec![-0.5, 0.0, 4.0]];
        let data = linear_samples(60, &truth, 1);
        let model = fit_rc_ols(&data, 2).unwrap();
        assert!(model.ridge_arms.is_empty());
        for (got, want) in model.coefs.iter().zip(truth.iter()) {
            for (g, w) in got.iter().zip(want.iter()) {
                assert!((g - w).abs() < 1e-8, "got {g}, want {w}");
            }
        }
    }

    #[test]
    fn fitted_residuals_are_orthogonal_to_the_design() {
        // With noise the fit is not exact, but least squares still forces
        // X^T r = 0 per arm.
        let truth = vec![vec![1.0, 1.0, -2.0], vec![0.0, -1.0, 0.5]];
        let mut data = linear_samples(80, &truth, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for s in &mut data {
            s.outcome += rng.gen_range(-0.5..0.5);
        }
        let model = fit_rc_ols(&data, 2).unwrap();
        for arm in 0..2 {
            let mut sums = vec![0.0; 3];
            for s in data.iter().filter(|s| s.treatment == arm) {
                let r = s.outcome - model.predict(&s.x).unwrap()[arm];
                sums[0] += r;
                sums[1] += r * s.x[0];
                sums[2] += r * s.x[1];
            }
            for v in sums {
                assert!(v.abs() < 1e-7, "residual projection {v}");
            }
        }
    }

    #[test]
    fn starved_arm_falls_back_to_ridge() {
        let truth = vec![vec![1.0, 2.0, 3.0], vec![0.0, 1.0, 1.0]];
        let mut data = linear_samples(40, &truth, 4);
        // Leave arm 1 with a single sample, fewer than the 3 coefficients.
        let keep: Vec<Sample> = data
            .drain(..)
            .enumerate()
            .filter(|(i, s)| s.treatment == 0 || *i == 1)
            .map(|(_, s)| s)
            .collect();
        let model = fit_rc_ols(&keep, 2).unwrap();
        assert_eq!(model.ridge_arms, vec![1]);
        for v in model.predict(&[0.3, -0.7]).unwrap() {
            assert!(v.is_finite());
        }
    }

    #[test]
    fn collinear_features_fall_back_to_ridge() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data: Vec<Sample> = (0..30)
            .map(|i| {
                let a = rng.gen_range(-1.0..1.0);
                // Second feature duplicates the first: XtX is singular.
                Sample::new(vec![a, a], i % 2, 2.0 * a + 1.0)
            })
            .collect();
        let model = fit_rc_ols(&data, 2).unwrap();
        assert_eq!(model.ridge_arms, vec![0, 1]);
        // The ridge solution still reproduces the (identifiable) response.
        let pred = model.predict(&[0.5, 0.5]).unwrap();
        assert!((pred[0] - 2.0).abs() < 1e-3);
    }

    #[test]
    fn missing_arm_is_an_error() {
        let truth = vec![vec![1.0, 1.0], vec![2.0, 2.0]];
        let data: Vec<Sample> = linear_samples(20, &truth, 6)
            .into_iter()
            .filter(|s| s.treatment == 0)
            .collect();
        assert!(fit_rc_ols(&data, 2).is_err());
    }

    #[test]
    fn evaluation_scores_a_hand_fixture() {
        // Two rows. The model below picks arm 1 everywhere: right on the
        // first row, wrong on the second.
        let oracle = OracleTable {
            outcomes: vec![vec![2.0, 1.0], vec![0.0, 3.0]],
            optimal: vec![1, 0],
        };
        let xs = vec![vec![0.0], vec![1.0]];
        let model = RcLinearModel {
            coefs: vec![vec![5.0, 0.0], vec![1.0, 0.0]],
            ridge_arms: vec![],
        };
        let report = evaluate_policy(&model, &xs, &oracle).unwrap();
        assert_eq!(report.n, 2);
        assert_eq!(report.oracle_accuracy_pct, 50.0);
        assert_eq!(report.mean_prescribed_outcome, 2.0);
        // Estimates are (5, 1) on both rows; oracle rows differ.
        let want = ((5.0f64 - 2.0).powi(2)
            + (1.0f64 - 1.0).powi(2)
            + (5.0f64 - 0.0).powi(2)
            + (1.0f64 - 3.0).powi(2))
            / 4.0;
        assert_eq!(report.outcome_mse, Some(want));
    }

    #[test]
    fn network_and_tree_policies_match_their_own_predictions() {
        let net = Network::new(3, &[4], 3, 9).unwrap();
        let tree =
            crate::tree::extract_tree(&net, crate::tree::ExtractMode::Exact { bounds: None })
                .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..200 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let arm = prescribe(&net.predict(&x).unwrap());
            assert_eq!(net.decide(&x).unwrap(), arm);
            assert_eq!(tree.decide(&x).unwrap(), arm);
            assert_eq!(net.outcome_estimates(&x).unwrap().unwrap().len(), 3);
            assert!(tree.outcome_estimates(&x).unwrap().is_none());
        }
    }
}
