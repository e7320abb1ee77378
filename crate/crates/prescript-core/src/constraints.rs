//! Hard prescription rules and the feature transforms they may refer to.
//!
//! A rule pairs a polyhedral trigger with a set of allowed arms: whenever
//! every row of `A x - b` is strictly positive, the rule fires and each
//! output outside the allowed set is shifted up by the rule's big-M penalty.
//! With a penalty larger than the network's output spread, a fired rule
//! makes forbidden arms lose every argmin, turning the rule into a hard
//! constraint on prescriptions without touching the network weights. The
//! penalty is a constant for any given input, so gradients never flow
//! through rules.
//!
//! Rules compose additively: each attached rule adds its own penalty where
//! it fires, independent of the others.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::loss::Sample;
use crate::math;
use crate::network::Network;
use crate::{Error, Result};

/// Penalty used when nothing better is known. Large enough to dominate any
/// reasonably scaled outcome model.
pub const DEFAULT_BIG_M: f64 = 1000.0;

/// "If `A x - b > 0` row-wise, only the arms in `allowed` may be
/// prescribed."
#[derive(Debug, Clone, PartialEq)]
pub struct PrescriptiveRule {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    allowed: Vec<usize>,
    big_m: f64,
}

impl PrescriptiveRule {
    /// `allowed` is deduplicated and sorted; arm indices are validated when
    /// the rule is injected into a network (the rule alone does not know K).
    pub fn new(a: Vec<Vec<f64>>, b: Vec<f64>, allowed: Vec<usize>, big_m: f64) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::Contract(String::from("rule needs at least one row")));
        }
        let width = a[0].len();
        if width == 0 {
            return Err(Error::Contract(String::from("rule rows cannot be empty")));
        }
        if a.iter().any(|row| row.len() != width) {
            return Err(Error::Contract(String::from("rule rows must share one width")));
        }
        if b.len() != a.len() {
            return Err(Error::Shape {
                what: "rule offsets",
                expected: a.len(),
                got: b.len(),
            });
        }
        if a.iter().flatten().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Data(String::from("rule contains non-finite coefficients")));
        }
        if allowed.is_empty() {
            return Err(Error::Contract(String::from(
                "rule must allow at least one arm, otherwise no prescription is feasible",
            )));
        }
        if !(big_m.is_finite() && big_m > 0.0) {
            return Err(Error::Contract(String::from("big-M must be positive and finite")));
        }
        let mut allowed = allowed;
        allowed.sort_unstable();
        allowed.dedup();
        Ok(PrescriptiveRule {
            a,
            b,
            allowed,
            big_m,
        })
    }

    /// Whether the rule fires at `x`: strict positivity of every row, so the
    /// trigger boundary itself does not fire, mirroring the strict
    /// activation convention.
    pub fn indicator(&self, x: &[f64]) -> bool {
        self.a
            .iter()
            .zip(self.b.iter())
            .all(|(row, b)| math::dot(row, x) - b > 0.0)
    }

    /// Distance of the closest trigger row to its boundary.
    pub fn boundary_margin(&self, x: &[f64]) -> f64 {
        self.a
            .iter()
            .zip(self.b.iter())
            .map(|(row, b)| (math::dot(row, x) - b).abs())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn allows(&self, arm: usize) -> bool {
        self.allowed.binary_search(&arm).is_ok()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.a
    }

    pub fn offsets(&self) -> &[f64] {
        &self.b
    }

    pub fn allowed(&self) -> &[usize] {
        &self.allowed
    }

    pub fn big_m(&self) -> f64 {
        self.big_m
    }

    pub fn width(&self) -> usize {
        self.a[0].len()
    }
}

/// Attaches a rule to a network after checking that the rule speaks the
/// network's language: row width equal to the input dimension and allowed
/// arms within range.
pub fn inject_rule(net: &mut Network, rule: PrescriptiveRule) -> Result<()> {
    if rule.width() != net.d() {
        return Err(Error::Shape {
            what: "rule row width",
            expected: net.d(),
            got: rule.width(),
        });
    }
    if let Some(&bad) = rule.allowed.iter().find(|&&p| p >= net.k()) {
        return Err(Error::Contract(format!(
            "rule allows arm {bad} but the network has {} arms",
            net.k()
        )));
    }
    net.push_rule(rule);
    Ok(())
}

/// A penalty magnitude guaranteed to dominate the network's output spread on
/// a box of inputs, found by interval arithmetic: push `[lo, hi]` intervals
/// through every layer and take the spread between the largest and smallest
/// possible output, floored at 1. Must be called before any rule is
/// attached, since rule penalties would inflate the spread they are supposed
/// to dominate.
pub fn compute_big_m(net: &Network, input_bounds: &[(f64, f64)]) -> Result<f64> {
    if !net.rules().is_empty() {
        return Err(Error::Contract(String::from(
            "big-M must be computed before rules are attached",
        )));
    }
    if input_bounds.len() != net.d() {
        return Err(Error::Shape {
            what: "input bounds",
            expected: net.d(),
            got: input_bounds.len(),
        });
    }
    for &(lo, hi) in input_bounds {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::Data(String::from("input bounds must be finite with lo <= hi")));
        }
    }
    let mut lo: Vec<f64> = input_bounds.iter().map(|b| b.0).collect();
    let mut hi: Vec<f64> = input_bounds.iter().map(|b| b.1).collect();
    for (li, layer) in net.layers().iter().enumerate() {
        let mut nlo = Vec::with_capacity(layer.out_dim());
        let mut nhi = Vec::with_capacity(layer.out_dim());
        for r in 0..layer.out_dim() {
            let mut acc_lo = layer.bias()[r];
            let mut acc_hi = layer.bias()[r];
            for (w, (l, h)) in layer.row(r).iter().zip(lo.iter().zip(hi.iter())) {
                if *w >= 0.0 {
                    acc_lo += w * l;
                    acc_hi += w * h;
                } else {
                    acc_lo += w * h;
                    acc_hi += w * l;
                }
            }
            nlo.push(acc_lo);
            nhi.push(acc_hi);
        }
        let is_hidden = li < net.depth();
        if is_hidden {
            for v in nlo.iter_mut().chain(nhi.iter_mut()) {
                *v = v.max(0.0);
            }
        }
        lo = nlo;
        hi = nhi;
    }
    let top = hi.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let bottom = lo.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    Ok((top - bottom).max(1.0))
}

/// Drops every sample whose observed treatment a rule forbids at its
/// features. Keeping such samples would make the squared-error term fit
/// penalty-shifted outputs.
pub fn filter_violating(data: &[Sample], rules: &[PrescriptiveRule]) -> Vec<Sample> {
    data.iter()
        .filter(|s| {
            !rules
                .iter()
                .any(|r| r.indicator(&s.x) && !r.allows(s.treatment))
        })
        .cloned()
        .collect()
}

/// Derived-feature recipes, so rules can trigger on quantities like squares
/// or products of raw features.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformOp {
    /// `x[i]^2`
    Square,
    /// Natural log of `x[i]`; the input must be strictly positive.
    Log,
    /// `x[i] * x[j]`
    Product,
}

impl TransformOp {
    fn arity(self) -> usize {
        match self {
            TransformOp::Square | TransformOp::Log => 1,
            TransformOp::Product => 2,
        }
    }
}

/// One derived column. `args` are zero-based indices into the feature vector
/// as extended so far, so a transform may build on the outputs of earlier
/// transforms.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTransform {
    pub name: String,
    pub op: TransformOp,
    pub args: Vec<usize>,
}

impl FeatureTransform {
    pub fn new(name: String, op: TransformOp, args: Vec<usize>) -> Result<Self> {
        if args.len() != op.arity() {
            return Err(Error::Contract(format!(
                "transform {name:?} takes {} argument(s), got {}",
                op.arity(),
                args.len()
            )));
        }
        Ok(FeatureTransform { name, op, args })
    }
}

/// Extends `x` with one derived column per transform, applied in order.
pub fn apply_transforms(x: &[f64], transforms: &[FeatureTransform]) -> Result<Vec<f64>> {
    let mut out = x.to_vec();
    for t in transforms {
        if let Some(&bad) = t.args.iter().find(|&&a| a >= out.len()) {
            return Err(Error::Contract(format!(
                "transform {:?} references column {bad} but only {} are available",
                t.name,
                out.len()
            )));
        }
        let v = match t.op {
            TransformOp::Square => {
                let a = out[t.args[0]];
                a * a
            }
            TransformOp::Log => {
                let a = out[t.args[0]];
                if a <= 0.0 {
                    return Err(Error::Data(format!(
                        "transform {:?}: log of non-positive value {a}",
                        t.name
                    )));
                }
                math::ln(a)
            }
            TransformOp::Product => out[t.args[0]] * out[t.args[1]],
        };
        out.push(v);
    }
    Ok(out)
}
