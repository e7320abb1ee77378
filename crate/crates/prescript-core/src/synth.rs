//! Synthetic observational benchmarks with known counterfactuals.
//!
//! Each dataset draws feature vectors whose odd-indexed coordinates are
//! Bernoulli(1/2) and even-indexed coordinates standard normal, then builds
//! per-arm outcomes from a baseline response and one treatment effect per
//! additional arm. Baseline and effects are standardized against the
//! training population so every benchmark works on the same scale. Smaller
//! outcomes are better throughout.
//!
//! Treatment assignment is confounded on purpose: the probability of
//! receiving a non-default arm grows logistically with the (noiseless,
//! standardized) untreated outcome, so naive per-arm averages mislead.
//! Gaussian noise is added only to the observed training outcomes; the
//! oracle tables keep the noiseless values, which is what makes exact
//! prescription accuracy measurable.
//!
//! All draws come from per-row counter streams of one seeded generator:
//! every row's features, assignment, and noise are functions of `(seed,
//! row)` alone, so datasets are reproducible bit for bit and grow without
//! reshuffling existing rows.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::loss::{prescribe, Sample};
use crate::math;
use crate::{Error, Result};

const FEAT_STREAM: u64 = 1;
const PROP_STREAM: u64 = 2;
const NOISE_STREAM: u64 = 3;
const SCORE_STREAM: u64 = 4;

fn row_rng(seed: u64, tag: u64, row: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((tag << 56) | row as u64);
    rng
}

/// Mean and sample standard deviation of a response over a population.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FnMoments {
    pub mean: f64,
    pub sd: f64,
}

impl FnMoments {
    pub fn standardize(&self, v: f64) -> f64 {
        (v - self.mean) / self.sd
    }
}

fn moments(vals: &[f64]) -> Result<FnMoments> {
    if vals.len() < 2 {
        return Err(Error::Data(String::from(
            "need at least two rows to estimate moments",
        )));
    }
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    let sd = math::sqrt(var);
    if !(sd > 0.0) || !sd.is_finite() {
        return Err(Error::Data(String::from(
            "degenerate population: response has zero or non-finite spread",
        )));
    }
    Ok(FnMoments { mean, sd })
}

/// The response shapes the benchmarks are assembled from. Indices below are
/// 0-based, so even positions are the continuous features.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutcomeFn {
    /// `5 * 1[x0 > 1] - 5`: one jump along one continuous feature.
    Step,
    /// `4 * 1[x0 > 1] 1[x2 > 0] + 4 * 1[x4 > 1] 1[x6 > 0] + 2 x7 x8`: paired
    /// indicator interactions plus a binary-continuous product.
    Interactions,
    /// `(x0^2 + x1 + x2^2 + x3 + x4^2 + x5 + x6^2 + x7 + x8^2 - 11) / 2`:
    /// smooth curvature in the continuous features.
    Quadratic,
    /// `8 - 4 x1 - 2 x3 - x5`: exactly linear in three binary features, so
    /// it takes the values 1 through 8 on the corners.
    BinaryGrid,
}

impl OutcomeFn {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let ind = |c: bool| if c { 1.0 } else { 0.0 };
        match self {
            OutcomeFn::Step => 5.0 * ind(x[0] > 1.0) - 5.0,
            OutcomeFn::Interactions => {
                4.0 * ind(x[0] > 1.0) * ind(x[2] > 0.0)
                    + 4.0 * ind(x[4] > 1.0) * ind(x[6] > 0.0)
                    + 2.0 * x[7] * x[8]
            }
            OutcomeFn::Quadratic => {
                0.5 * (x[0] * x[0]
                    + x[1]
                    + x[2] * x[2]
                    + x[3]
                    + x[4] * x[4]
                    + x[5]
                    + x[6] * x[6]
                    + x[7]
                    + x[8] * x[8]
                    - 11.0)
            }
            OutcomeFn::BinaryGrid => 8.0 - 4.0 * x[1] - 2.0 * x[3] - x[5],
        }
    }

    /// Smallest feature count the formula reads.
    pub fn min_d(&self) -> usize {
        match self {
            OutcomeFn::Step => 1,
            OutcomeFn::Interactions => 9,
            OutcomeFn::Quadratic => 9,
            OutcomeFn::BinaryGrid => 6,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            OutcomeFn::Step => "step",
            OutcomeFn::Interactions => "interactions",
            OutcomeFn::Quadratic => "quadratic",
            OutcomeFn::BinaryGrid => "binary-grid",
        }
    }
}

/// A benchmark recipe: feature width, arm count, baseline response, and one
/// effect per arm beyond the first.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub d: usize,
    pub k: usize,
    pub base: OutcomeFn,
    pub effects: Vec<OutcomeFn>,
}

impl DatasetSpec {
    pub fn new(d: usize, k: usize, base: OutcomeFn, effects: Vec<OutcomeFn>) -> Result<Self> {
        if !(k == 2 || k == 3) {
            return Err(Error::Contract(alloc::format!(
                "only two- and three-arm recipes are defined, got k = {k}"
            )));
        }
        if effects.len() != k - 1 {
            return Err(Error::Contract(alloc::format!(
                "{} arms need {} effects, got {}",
                k,
                k - 1,
                effects.len()
            )));
        }
        let need = effects
            .iter()
            .chain(core::iter::once(&base))
            .map(|f| f.min_d())
            .max()
            .unwrap();
        if d < need {
            return Err(Error::Contract(alloc::format!(
                "recipe reads feature {need} but d = {d}"
            )));
        }
        Ok(DatasetSpec {
            d,
            k,
            base,
            effects,
        })
    }

    /// The six standard benchmarks, all with 20 features. 1 through 4 are
    /// two-arm problems crossing the response shapes; 5 and 6 are three-arm.
    pub fn benchmark(id: usize) -> Result<Self> {
        let (base, effects, k) = match id {
            1 => (OutcomeFn::Step, vec![OutcomeFn::Interactions], 2),
            2 => (OutcomeFn::BinaryGrid, vec![OutcomeFn::Interactions], 2),
            3 => (OutcomeFn::Quadratic, vec![OutcomeFn::BinaryGrid], 2),
            4 => (OutcomeFn::Step, vec![OutcomeFn::Quadratic], 2),
            5 => (
                OutcomeFn::Interactions,
                vec![OutcomeFn::Step, OutcomeFn::Quadratic],
                3,
            ),
            6 => (
                OutcomeFn::Interactions,
                vec![OutcomeFn::Quadratic, OutcomeFn::BinaryGrid],
                3,
            ),
            _ => {
                return Err(Error::Contract(alloc::format!(
                    "benchmark ids run 1 through 6, got {id}"
                )))
            }
        };
        DatasetSpec::new(20, k, base, effects)
    }
}

/// Standardization constants fitted on a training population.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub base: FnMoments,
    pub effects: Vec<FnMoments>,
}

impl Standardization {
    pub fn fit(spec: &DatasetSpec, xs: &[Vec<f64>]) -> Result<Self> {
        for row in xs {
            if row.len() != spec.d {
                return Err(Error::Shape {
                    what: "feature row",
                    expected: spec.d,
                    got: row.len(),
                });
            }
        }
        let base = moments(&xs.iter().map(|x| spec.base.eval(x)).collect::<Vec<f64>>())?;
        let effects = spec
            .effects
            .iter()
            .map(|f| moments(&xs.iter().map(|x| f.eval(x)).collect::<Vec<f64>>()))
            .collect::<Result<Vec<FnMoments>>>()?;
        Ok(Standardization { base, effects })
    }
}

/// Noiseless per-arm outcomes and the resulting best arms.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleTable {
    /// Row per sample, one standardized outcome per arm.
    pub outcomes: Vec<Vec<f64>>,
    /// Argmin of each row, ties to the lowest index.
    pub optimal: Vec<usize>,
}

/// Draws `n` feature rows. Even-indexed coordinates are standard normal,
/// odd-indexed are 0/1 with equal probability. Row `i` depends only on
/// `(seed, i)`.
pub fn gen_features(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            let mut rng = row_rng(seed, FEAT_STREAM, i);
            (0..d)
                .map(|j| {
                    if j % 2 == 0 {
                        rng.sample(StandardNormal)
                    } else if rng.gen_bool(0.5) {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

/// Combines standardized baseline `b` and effects `e` into the outcome of
/// arm `p`. Two arms sit symmetrically around the baseline; with three, arm
/// 0 is the baseline and each other arm adds its own effect:
/// `b + p (2 - p) e0 + p (p - 1) / 2 e1`.
fn arm_outcome(k: usize, b: f64, e: &[f64], p: usize) -> f64 {
    match k {
        2 => b + (p as f64 - 0.5) * e[0],
        3 => {
            let pf = p as f64;
            b + pf * (2.0 - pf) * e[0] + pf * (pf - 1.0) / 2.0 * e[1]
        }
        _ => unreachable!("spec validation pins k to 2 or 3"),
    }
}

/// Evaluates the noiseless standardized outcome table for `xs`.
pub fn gen_outcomes(
    spec: &DatasetSpec,
    xs: &[Vec<f64>],
    std: &Standardization,
) -> Result<OracleTable> {
    if std.effects.len() != spec.k - 1 {
        return Err(Error::Shape {
            what: "standardization effects",
            expected: spec.k - 1,
            got: std.effects.len(),
        });
    }
    let mut outcomes = Vec::with_capacity(xs.len());
    let mut optimal = Vec::with_capacity(xs.len());
    for x in xs {
        if x.len() != spec.d {
            return Err(Error::Shape {
                what: "feature row",
                expected: spec.d,
                got: x.len(),
            });
        }
        let b = std.base.standardize(spec.base.eval(x));
        let e: Vec<f64> = spec
            .effects
            .iter()
            .zip(std.effects.iter())
            .map(|(f, m)| m.standardize(f.eval(x)))
            .collect();
        let row: Vec<f64> = (0..spec.k).map(|p| arm_outcome(spec.k, b, &e, p)).collect();
        optimal.push(prescribe(&row));
        outcomes.push(row);
    }
    Ok(OracleTable { outcomes, optimal })
}

/// Probability of each arm given the untreated outcome `y0`: arm 0 gets
/// `1 / (1 + exp(y0))` and the rest share the remainder evenly. Good
/// untreated outcomes (low `y0`) therefore keep patients on arm 0, tying
/// assignment to prognosis.
fn arm_probabilities(k: usize, y0: f64) -> Vec<f64> {
    let p0 = math::logistic(-y0);
    let rest = (1.0 - p0) / (k as f64 - 1.0);
    let mut probs = vec![rest; k];
    probs[0] = p0;
    probs
}

fn sample_arm<R: Rng>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (j, pr) in probs.iter().enumerate() {
        acc += pr;
        if u < acc {
            return j;
        }
    }
    probs.len() - 1
}

/// Samples one treatment per oracle row from the confounded assignment
/// distribution. Row `i` depends only on `(seed, i)`.
pub fn assign_propensity(oracle: &OracleTable, seed: u64) -> Vec<usize> {
    oracle
        .outcomes
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let probs = arm_probabilities(row.len(), row[0]);
            sample_arm(&probs, &mut row_rng(seed, PROP_STREAM, i))
        })
        .collect()
}

/// Assignment probabilities driven by one observed feature instead of the
/// outcome: standardize column `score_col` against the population, then
/// `P[arm p] = exp((p - 1) z) / S`. Consecutive arms keep the constant odds
/// ratio `exp(z)`, so high scores favor the last arm and low scores the
/// first.
pub fn score_propensity(xs: &[Vec<f64>], score_col: usize, k: usize) -> Result<Vec<Vec<f64>>> {
    if k < 2 {
        return Err(Error::Contract(String::from(
            "score assignment needs at least two arms",
        )));
    }
    for row in xs {
        if score_col >= row.len() {
            return Err(Error::Shape {
                what: "score column",
                expected: row.len(),
                got: score_col,
            });
        }
    }
    let m = moments(&xs.iter().map(|x| x[score_col]).collect::<Vec<f64>>())?;
    Ok(xs
        .iter()
        .map(|x| {
            let z = m.standardize(x[score_col]);
            let weights: Vec<f64> = (0..k).map(|p| math::exp((p as f64 - 1.0) * z)).collect();
            let s: f64 = weights.iter().sum();
            weights.into_iter().map(|w| w / s).collect()
        })
        .collect())
}

/// Samples one arm per row from [`score_propensity`] probabilities. Row `i`
/// depends only on `(seed, i)`.
pub fn assign_by_score(
    xs: &[Vec<f64>],
    score_col: usize,
    k: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    let probs = score_propensity(xs, score_col, k)?;
    Ok(probs
        .iter()
        .enumerate()
        .map(|(i, pr)| sample_arm(pr, &mut row_rng(seed, SCORE_STREAM, i)))
        .collect())
}

/// A fully generated benchmark: confounded noisy training samples plus
/// noiseless oracle tables for both splits.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub spec: DatasetSpec,
    pub seed: u64,
    pub standardization: Standardization,
    /// Observed rows: features, assigned arm, noisy outcome of that arm.
    pub train: Vec<Sample>,
    pub train_oracle: OracleTable,
    pub test_x: Vec<Vec<f64>>,
    pub test_oracle: OracleTable,
}

impl SyntheticDataset {
    /// Draws the full benchmark. Features for train and test come from one
    /// sequence of `n_train + n_test` rows (train first), standardization is
    /// fitted on the training rows only, and noise lands only on the
    /// observed training outcomes.
    pub fn generate(
        spec: &DatasetSpec,
        n_train: usize,
        n_test: usize,
        seed: u64,
    ) -> Result<Self> {
        if n_train < 2 {
            return Err(Error::Data(String::from(
                "need at least two training rows to fit standardization",
            )));
        }
        let xs = gen_features(n_train + n_test, spec.d, seed);
        let standardization = Standardization::fit(spec, &xs[..n_train])?;
        let train_oracle = gen_outcomes(spec, &xs[..n_train], &standardization)?;
        let test_oracle = gen_outcomes(spec, &xs[n_train..], &standardization)?;
        let arms = assign_propensity(&train_oracle, seed);
        let train = (0..n_train)
            .map(|i| {
                let noise: f64 = row_rng(seed, NOISE_STREAM, i).sample(StandardNormal);
                Sample {
                    x: xs[i].clone(),
                    treatment: arms[i],
                    outcome: train_oracle.outcomes[i][arms[i]] + noise,
                }
            })
            .collect();
        Ok(SyntheticDataset {
            spec: spec.clone(),
            seed,
            standardization,
            train,
            train_oracle,
            test_x: xs[n_train..].to_vec(),
            test_oracle,
        })
    }
}
