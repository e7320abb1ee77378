//! Model files: the network's architecture and parameters, any attached
//! rules, and the transforms that produced its input columns.
//!
//! ```json
//! {"d":2,"k":2,"hidden_sizes":[2],
//!  "layers":[{"weights":[[1.0,-1.0],[1.0,1.0]],"bias":[0.0,-0.5]}, ...],
//!  "rules":[...],"transforms":[...],"seed":7}
//! ```
//!
//! `layers` runs hidden-first with the output layer last; each weight row
//! holds one neuron's incoming weights. `hidden_sizes` repeats what the
//! layer shapes imply and is checked on read. `d` counts the network's
//! input columns, including transform outputs; the original feature width
//! is `d` minus the number of transforms.

use serde::{Deserialize, Serialize};
use std::path::Path;

use prescript_core::{inject_rule, FeatureTransform, Layer, Network};

use crate::error::CliError;
use crate::rules_file::{
    rule_from_json, rule_to_json, transforms_from_json, transforms_to_json, RuleJson,
    TransformJson,
};
use crate::{jsonfmt, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerJson {
    /// One row per neuron, `in_dim` entries each.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub d: usize,
    pub k: usize,
    pub hidden_sizes: Vec<usize>,
    pub layers: Vec<LayerJson>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rules: Vec<RuleJson>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub transforms: Vec<TransformJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn layer_to_json(layer: &Layer) -> LayerJson {
    LayerJson {
        weights: (0..layer.out_dim()).map(|r| layer.row(r).to_vec()).collect(),
        bias: layer.bias().to_vec(),
    }
}

pub fn to_file(net: &Network, transforms: &[FeatureTransform], seed: Option<u64>) -> ModelFile {
    ModelFile {
        d: net.d(),
        k: net.k(),
        hidden_sizes: net.hidden_sizes(),
        layers: net.layers().iter().map(layer_to_json).collect(),
        rules: net.rules().iter().map(rule_to_json).collect(),
        transforms: transforms_to_json(transforms),
        seed,
    }
}

pub fn from_file(file: &ModelFile) -> Result<(Network, Vec<FeatureTransform>)> {
    let mut layers = Vec::with_capacity(file.layers.len());
    let mut in_dim = file.d;
    for (li, lj) in file.layers.iter().enumerate() {
        let out_dim = lj.weights.len();
        let mut flat = Vec::with_capacity(out_dim * in_dim);
        for row in &lj.weights {
            if row.len() != in_dim {
                return Err(CliError::Invalid(format!(
                    "layer {li}: weight row has {} entries, expected {in_dim}",
                    row.len()
                )));
            }
            flat.extend_from_slice(row);
        }
        layers.push(Layer::from_parts(in_dim, out_dim, flat, lj.bias.clone())?);
        in_dim = out_dim;
    }
    let mut net = Network::from_parts(file.d, file.k, layers)?;
    if file.hidden_sizes != net.hidden_sizes() {
        return Err(CliError::Invalid(format!(
            "hidden_sizes {:?} disagree with layer shapes {:?}",
            file.hidden_sizes,
            net.hidden_sizes()
        )));
    }
    for rj in &file.rules {
        inject_rule(&mut net, rule_from_json(rj)?)?;
    }
    let transforms = transforms_from_json(&file.transforms)?;
    Ok((net, transforms))
}

pub fn write(
    path: &Path,
    net: &Network,
    transforms: &[FeatureTransform],
    seed: Option<u64>,
) -> Result<()> {
    jsonfmt::write_file(path, &to_file(net, transforms, seed))
}

pub fn read(path: &Path) -> Result<(Network, Vec<FeatureTransform>)> {
    let file: ModelFile = jsonfmt::read_file(path)?;
    from_file(&file)
}

#[cfg(test)]
mod tests {
    use super::*;
    use prescript_core::{PrescriptiveRule, TransformOp};

    #[test]
    fn models_round_trip_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let mut net = Network::new(3, &[4, 2], 2, 123).unwrap();
        inject_rule(
            &mut net,
            PrescriptiveRule::new(vec![vec![1.0, 0.0, 0.5]], vec![0.25], vec![1], 42.0).unwrap(),
        )
        .unwrap();
        let transforms =
            vec![FeatureTransform::new("x2 squared".into(), TransformOp::Square, vec![1]).unwrap()];
        write(&path, &net, &transforms, Some(123)).unwrap();
        let (net2, t2) = read(&path).unwrap();
        assert_eq!(net, net2);
        assert_eq!(transforms, t2);
        let first = std::fs::read(&path).unwrap();
        write(&path, &net2, &t2, Some(123)).unwrap();
        assert_eq!(first, std::fs::read(&path).unwrap());
    }

    #[test]
    fn inconsistent_hidden_sizes_are_rejected() {
        let net = Network::new(2, &[3], 2, 1).unwrap();
        let mut file = to_file(&net, &[], None);
        file.hidden_sizes = vec![4];
        assert!(from_file(&file).is_err());
    }

    #[test]
    fn ragged_weight_rows_are_rejected() {
        let net = Network::new(2, &[2], 2, 1).unwrap();
        let mut file = to_file(&net, &[], None);
        file.layers[0].weights[1].push(9.0);
        assert!(from_file(&file).is_err());
    }
}
