//! Rule files: polyhedral prescription rules plus the feature transforms
//! they may refer to.
//!
//! ```json
//! {"rules":[{"a":[[1.0,1.0]],"b":[1.0],"allowed":[0],"big_m":1000.0}],
//!  "transforms":[{"name":"x1 squared","op":"square","args":[1]}]}
//! ```
//!
//! `big_m` may be omitted; readers fall back to the default penalty.
//! Transform `args` are 1-based column references in files (matching the
//! `x1..xd` CSV headers) and 0-based in memory.

use serde::{Deserialize, Serialize};
use std::path::Path;

use prescript_core::constraints::DEFAULT_BIG_M;
use prescript_core::{FeatureTransform, PrescriptiveRule, TransformOp};

use crate::error::CliError;
use crate::{jsonfmt, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RuleJson {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub allowed: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub big_m: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransformJson {
    pub name: String,
    pub op: String,
    /// 1-based feature columns, in file form.
    pub args: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RulesFile {
    pub rules: Vec<RuleJson>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub transforms: Vec<TransformJson>,
}

pub fn rule_to_json(rule: &PrescriptiveRule) -> RuleJson {
    RuleJson {
        a: rule.rows().to_vec(),
        b: rule.offsets().to_vec(),
        allowed: rule.allowed().to_vec(),
        big_m: Some(rule.big_m()),
    }
}

pub fn rule_from_json(json: &RuleJson) -> Result<PrescriptiveRule> {
    Ok(PrescriptiveRule::new(
        json.a.clone(),
        json.b.clone(),
        json.allowed.clone(),
        json.big_m.unwrap_or(DEFAULT_BIG_M),
    )?)
}

fn op_name(op: TransformOp) -> &'static str {
    match op {
        TransformOp::Square => "square",
        TransformOp::Log => "log",
        TransformOp::Product => "product",
    }
}

pub fn transform_to_json(t: &FeatureTransform) -> TransformJson {
    TransformJson {
        name: t.name.clone(),
        op: op_name(t.op).to_string(),
        args: t.args.iter().map(|a| a + 1).collect(),
    }
}

pub fn transform_from_json(json: &TransformJson) -> Result<FeatureTransform> {
    let op = match json.op.as_str() {
        "square" => TransformOp::Square,
        "log" => TransformOp::Log,
        "product" => TransformOp::Product,
        other => {
            return Err(CliError::Invalid(format!(
                "unknown transform op {other:?}; expected square, log, or product"
            )))
        }
    };
    let mut args = Vec::with_capacity(json.args.len());
    for &a in &json.args {
        if a == 0 {
            return Err(CliError::Invalid(format!(
                "transform {:?} references column 0; file columns are 1-based",
                json.name
            )));
        }
        args.push(a - 1);
    }
    Ok(FeatureTransform::new(json.name.clone(), op, args)?)
}

pub fn transforms_from_json(json: &[TransformJson]) -> Result<Vec<FeatureTransform>> {
    json.iter().map(transform_from_json).collect()
}

pub fn transforms_to_json(ts: &[FeatureTransform]) -> Vec<TransformJson> {
    ts.iter().map(transform_to_json).collect()
}

pub fn write(path: &Path, rules: &[PrescriptiveRule], transforms: &[FeatureTransform]) -> Result<()> {
    let file = RulesFile {
        rules: rules.iter().map(rule_to_json).collect(),
        transforms: transforms_to_json(transforms),
    };
    jsonfmt::write_file(path, &file)
}

pub fn read(path: &Path) -> Result<(Vec<PrescriptiveRule>, Vec<FeatureTransform>)> {
    let file: RulesFile = jsonfmt::read_file(path)?;
    let rules = file
        .rules
        .iter()
        .map(rule_from_json)
        .collect::<Result<Vec<_>>>()?;
    let transforms = transforms_from_json(&file.transforms)?;
    Ok((rules, transforms))
}
