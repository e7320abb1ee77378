//! Tree files and DOT rendering.
//!
//! A tree file stores the arena by id in three arrays: oblique `splits`
//! (with either a `neuron` index or an output `pair` as provenance),
//! polyhedral rule `gates` (which carry no hyperplane of their own; the
//! whole rule trigger is evaluated at the node), and `leaves`. Ids are the
//! preorder arena positions, so `root` is 0 and children follow parents.
//!
//! ```json
//! {"d":2,"k":2,"root":0,
//!  "splits":[{"id":0,"neuron":0,"omega":[1.0,-1.0],"beta":0.0,"left":1,"right":4}],
//!  "gates":[],
//!  "leaves":[{"id":1,"treatment":0}, ...],
//!  "rules":[],"transforms":[]}
//! ```

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

use prescript_core::{FeatureTransform, Node, ObliqueTree, SplitSource};

use crate::error::CliError;
use crate::rules_file::{
    rule_from_json, rule_to_json, transforms_from_json, transforms_to_json, RuleJson,
    TransformJson,
};
use crate::{jsonfmt, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitJson {
    pub id: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neuron: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair: Option<(usize, usize)>,
    pub omega: Vec<f64>,
    pub beta: f64,
    pub left: usize,
    pub right: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GateJson {
    pub id: usize,
    pub rule: usize,
    pub left: usize,
    pub right: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LeafJson {
    pub id: usize,
    pub treatment: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeFile {
    pub d: usize,
    pub k: usize,
    pub root: usize,
    pub splits: Vec<SplitJson>,
    pub gates: Vec<GateJson>,
    pub leaves: Vec<LeafJson>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rules: Vec<RuleJson>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub transforms: Vec<TransformJson>,
}

pub fn to_file(tree: &ObliqueTree, transforms: &[FeatureTransform]) -> TreeFile {
    let mut splits = Vec::new();
    let mut gates = Vec::new();
    let mut leaves = Vec::new();
    for (id, node) in tree.nodes().iter().enumerate() {
        match node {
            Node::Split {
                omega,
                beta,
                source,
                left,
                right,
            } => {
                let (neuron, pair) = match source {
                    SplitSource::Neuron(n) => (Some(*n), None),
                    SplitSource::DiffPair(i, j) => (None, Some((*i, *j))),
                };
                splits.push(SplitJson {
                    id,
                    neuron,
                    pair,
                    omega: omega.clone(),
                    beta: *beta,
                    left: *left,
                    right: *right,
                });
            }
            Node::RuleGate { rule, left, right } => gates.push(GateJson {
                id,
                rule: *rule,
                left: *left,
                right: *right,
            }),
            Node::Leaf { treatment } => leaves.push(LeafJson {
                id,
                treatment: *treatment,
            }),
        }
    }
    TreeFile {
        d: tree.d(),
        k: tree.k(),
        root: tree.root(),
        splits,
        gates,
        leaves,
        rules: tree.rules().iter().map(rule_to_json).collect(),
        transforms: transforms_to_json(transforms),
    }
}

pub fn from_file(file: &TreeFile) -> Result<(ObliqueTree, Vec<FeatureTransform>)> {
    let total = file.splits.len() + file.gates.len() + file.leaves.len();
    let mut nodes: Vec<Option<Node>> = vec![None; total];
    let mut place = |id: usize, node: Node| -> Result<()> {
        let slot = nodes
            .get_mut(id)
            .ok_or_else(|| CliError::Invalid(format!("node id {id} outside 0..{total}")))?;
        if slot.is_some() {
            return Err(CliError::Invalid(format!("node id {id} appears twice")));
        }
        *slot = Some(node);
        Ok(())
    };
    for s in &file.splits {
        let source = match (s.neuron, s.pair) {
            (Some(n), None) => SplitSource::Neuron(n),
            (None, Some((i, j))) => SplitSource::DiffPair(i, j),
            _ => {
                return Err(CliError::Invalid(format!(
                    "split {} needs exactly one of neuron or pair",
                    s.id
                )))
            }
        };
        place(
            s.id,
            Node::Split {
                omega: s.omega.clone(),
                beta: s.beta,
                source,
                left: s.left,
                right: s.right,
            },
        )?;
    }
    for g in &file.gates {
        place(
            g.id,
            Node::RuleGate {
                rule: g.rule,
                left: g.left,
                right: g.right,
            },
        )?;
    }
    for l in &file.leaves {
        place(
            l.id,
            Node::Leaf {
                treatment: l.treatment,
            },
        )?;
    }
    let nodes = nodes
        .into_iter()
        .enumerate()
        .map(|(id, n)| n.ok_or_else(|| CliError::Invalid(format!("node id {id} is missing"))))
        .collect::<Result<Vec<Node>>>()?;
    let rules = file
        .rules
        .iter()
        .map(rule_from_json)
        .collect::<Result<Vec<_>>>()?;
    let tree = ObliqueTree::from_parts(file.d, file.k, nodes, file.root, rules)?;
    let transforms = transforms_from_json(&file.transforms)?;
    Ok((tree, transforms))
}

pub fn write(path: &Path, tree: &ObliqueTree, transforms: &[FeatureTransform]) -> Result<()> {
    jsonfmt::write_file(path, &to_file(tree, transforms))
}

pub fn read(path: &Path) -> Result<(ObliqueTree, Vec<FeatureTransform>)> {
    let file: TreeFile = jsonfmt::read_file(path)?;
    from_file(&file)
}

fn form_label(omega: &[f64], beta: f64) -> String {
    let mut s = String::new();
    for (i, &w) in omega.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        if s.is_empty() {
            if w < 0.0 {
                s.push('-');
            }
        } else {
            s.push_str(if w < 0.0 { " - " } else { " + " });
        }
        let a = w.abs();
        if (a - 1.0).abs() > 1e-12 {
            let _ = write!(s, "{a:.4}*");
        }
        let _ = write!(s, "x{}", i + 1);
    }
    if beta != 0.0 || s.is_empty() {
        if s.is_empty() {
            let _ = write!(s, "{beta:.4}");
        } else {
            let _ = write!(s, " {} {:.4}", if beta < 0.0 { '-' } else { '+' }, beta.abs());
        }
    }
    s
}

/// Renders the tree in Graphviz DOT. Left children are the "no" edges
/// (test failed or rule silent), right children "yes".
pub fn to_dot(tree: &ObliqueTree) -> String {
    let mut out = String::from("digraph tree {\n");
    out.push_str("  node [shape=box, fontname=\"monospace\"];\n");
    for (id, node) in tree.nodes().iter().enumerate() {
        match node {
            Node::Split {
                omega,
                beta,
                source,
                ..
            } => {
                let origin = match source {
                    SplitSource::Neuron(n) => format!("h{n}"),
                    SplitSource::DiffPair(i, j) => format!("f{i}-f{j}"),
                };
                let _ = writeln!(
                    out,
                    "  {id} [label=\"{origin}: {} > 0\"];",
                    form_label(omega, *beta)
                );
            }
            Node::RuleGate { rule, .. } => {
                let _ = writeln!(out, "  {id} [label=\"rule {rule} fires\"];");
            }
            Node::Leaf { treatment } => {
                let _ = writeln!(out, "  {id} [label=\"arm {treatment}\", shape=ellipse];");
            }
        }
    }
    for (id, node) in tree.nodes().iter().enumerate() {
        if let Node::Split { left, right, .. } | Node::RuleGate { left, right, .. } = node {
            let _ = writeln!(out, "  {id} -> {left} [label=\"no\"];");
            let _ = writeln!(out, "  {id} -> {right} [label=\"yes\"];");
        }
    }
    out.push_str("}\n");
    out
}
