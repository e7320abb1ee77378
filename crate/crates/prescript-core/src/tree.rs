//! Conversion of prescriptive networks into oblique decision trees.
//!
//! The network's prescription is constant on each linear region, and within
//! a region it depends only on the signs of the pairwise output differences.
//! A tree that tests, in order, every rule trigger, every hidden neuron's
//! hyperplane, and every pairwise difference therefore reproduces the
//! network's decisions exactly. Splits are oblique: each internal node tests
//! a full affine functional of the input.
//!
//! Two construction modes are offered. `Exact` enumerates all combinations
//! (optionally cutting branches that a bounding box proves empty) and is
//! meant for small networks. `DataDriven` first prunes neurons that a
//! calibration set never exercises, then only branches where the calibration
//! set actually splits, which keeps trees shallow at the cost of fidelity
//! guarantees holding on the calibration distribution rather than
//! everywhere.

use alloc::vec;
use alloc::vec::Vec;

use crate::constraints::PrescriptiveRule;
use crate::loss::prescribe;
use crate::network::Network;
use crate::regions::AffineForm;
use crate::train::prune_neurons;
use crate::{Error, Result};

/// Points closer than this to any decision surface are skipped by
/// [`verify_equivalence`]: across algebraically equal but differently
/// rounded evaluations, sign agreement is only meaningful at a distance.
pub const BOUNDARY_TOL: f64 = 1e-9;

/// Ceiling on `rules + hidden neurons + output pairs` for exact extraction;
/// beyond it the complete tree would be too large to enumerate.
pub const MAX_EXACT_LEVELS: usize = 25;

/// What an internal node's test was derived from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitSource {
    /// Hidden neuron, indexed layer-major across the whole network.
    Neuron(usize),
    /// Sign of `f_i - f_j` for outputs `i < j`.
    DiffPair(usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    /// Oblique test `omega . x + beta > 0`: false goes left, true right.
    Split {
        omega: Vec<f64>,
        beta: f64,
        source: SplitSource,
        left: usize,
        right: usize,
    },
    /// Polyhedral trigger of one attached rule: fires right, else left.
    RuleGate {
        rule: usize,
        left: usize,
        right: usize,
    },
    Leaf {
        treatment: usize,
    },
}

/// An oblique prescription tree. Nodes live in an arena in preorder, so the
/// root is node 0 and children always carry larger ids than their parent.
#[derive(Debug, Clone, PartialEq)]
pub struct ObliqueTree {
    d: usize,
    k: usize,
    nodes: Vec<Node>,
    root: usize,
    rules: Vec<PrescriptiveRule>,
}

impl ObliqueTree {
    /// Reassembles a tree from raw parts (primarily for deserialization) and
    /// validates it.
    pub fn from_parts(
        d: usize,
        k: usize,
        nodes: Vec<Node>,
        root: usize,
        rules: Vec<PrescriptiveRule>,
    ) -> Result<Self> {
        let tree = ObliqueTree {
            d,
            k,
            nodes,
            root,
            rules,
        };
        tree.check_invariants()?;
        Ok(tree)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn rules(&self) -> &[PrescriptiveRule] {
        &self.rules
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn n_splits(&self) -> usize {
        self.nodes.len() - self.n_leaves()
    }

    /// Longest root-to-leaf path, counted in internal nodes.
    pub fn max_depth(&self) -> usize {
        let mut stack = vec![(self.root, 0usize)];
        let mut deepest = 0;
        while let Some((id, depth)) = stack.pop() {
            match &self.nodes[id] {
                Node::Leaf { .. } => deepest = deepest.max(depth),
                Node::Split { left, right, .. } | Node::RuleGate { left, right, .. } => {
                    stack.push((*left, depth + 1));
                    stack.push((*right, depth + 1));
                }
            }
        }
        deepest
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        tree_predict(self, x)
    }

    /// Structural sanity: ids in range, children strictly after parents (the
    /// arena is preorder, which also rules out cycles), every non-root node
    /// referenced exactly once, leaf treatments within range, rule gates
    /// referencing attached rules, and split widths equal to `d`.
    pub fn check_invariants(&self) -> Result<()> {
        let n = self.nodes.len();
        if self.root >= n {
            return Err(Error::Contract(alloc::format!("root id {} out of range", self.root)));
        }
        let mut referenced = vec![0usize; n];
        for (id, node) in self.nodes.iter().enumerate() {
            match node {
                Node::Leaf { treatment } => {
                    if *treatment >= self.k {
                        return Err(Error::Contract(alloc::format!(
                            "leaf {id} prescribes arm {treatment}, tree has {} arms",
                            self.k
                        )));
                    }
                }
                Node::Split {
                    omega, left, right, ..
                } => {
                    if omega.len() != self.d {
                        return Err(Error::Shape {
                            what: "split coefficients",
                            expected: self.d,
                            got: omega.len(),
                        });
                    }
                    for &c in [left, right].into_iter() {
                        if c >= n || c <= id {
                            return Err(Error::Contract(alloc::format!(
                                "node {id} has child {c} outside preorder"
                            )));
                        }
                        referenced[c] += 1;
                    }
                }
                Node::RuleGate { rule, left, right } => {
                    if *rule >= self.rules.len() {
                        return Err(Error::Contract(alloc::format!(
                            "node {id} gates on missing rule {rule}"
                        )));
                    }
                    for &c in [left, right].into_iter() {
                        if c >= n || c <= id {
                            return Err(Error::Contract(alloc::format!(
                                "node {id} has child {c} outside preorder"
                            )));
                        }
                        referenced[c] += 1;
                    }
                }
            }
        }
        for (id, &cnt) in referenced.iter().enumerate() {
            let expect = if id == self.root { 0 } else { 1 };
            if cnt != expect {
                return Err(Error::Contract(alloc::format!(
                    "node {id} referenced {cnt} times, expected {expect}"
                )));
            }
        }
        Ok(())
    }
}

/// Routes `x` through the tree to its prescribed arm.
pub fn tree_predict(tree: &ObliqueTree, x: &[f64]) -> Result<usize> {
    if x.len() != tree.d {
        return Err(Error::Shape {
            what: "tree input",
            expected: tree.d,
            got: x.len(),
        });
    }
    let mut cur = tree.root;
    loop {
        match &tree.nodes[cur] {
            Node::Leaf { treatment } => return Ok(*treatment),
            Node::Split {
                omega,
                beta,
                left,
                right,
                ..
            } => {
                let v = crate::math::dot(omega, x) + beta;
                cur = if v > 0.0 { *right } else { *left };
            }
            Node::RuleGate { rule, left, right } => {
                cur = if tree.rules[*rule].indicator(x) {
                    *right
                } else {
                    *left
                };
            }
        }
    }
}

/// Output pairs `(i, j)`, `i < j`, in lexicographic order. This order is
/// shared by the pairwise head, the decoder, and the tree's diff levels.
pub fn output_pairs(k: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(k * (k - 1) / 2);
    for i in 0..k {
        for j in i + 1..k {
            pairs.push((i, j));
        }
    }
    pairs
}

/// Decodes pairwise comparison bits into the prescribed arm. Bit order
/// follows [`output_pairs`]; bit `(i, j)` is true when `f_i - f_j > 0`. The
/// winner is the first arm that loses no comparison: every later arm at
/// least ties it (bit false) and every earlier arm strictly exceeds it (bit
/// true), reproducing the lowest-index tie rule. Bit combinations that no
/// real outputs can produce decode to arm 0; prediction never reaches them.
pub fn decode_pairwise(k: usize, bits: &[bool]) -> usize {
    debug_assert_eq!(bits.len(), k * (k - 1) / 2);
    let idx = |i: usize, j: usize| -> usize {
        // Offset of the block of pairs starting at i, plus position of j.
        i * (2 * k - i - 1) / 2 + (j - i - 1)
    };
    't: for t in 0..k {
        for j in t + 1..k {
            if bits[idx(t, j)] {
                continue 't;
            }
        }
        for i in 0..t {
            if !bits[idx(i, t)] {
                continue 't;
            }
        }
        return t;
    }
    0
}

/// The locally constant form of a network: its hidden layers followed by
/// one difference neuron per output pair. The prescription depends only on
/// the signs of these outputs, which is what makes tree extraction work.
#[derive(Debug, Clone)]
pub struct PairwiseHead {
    pairs: Vec<(usize, usize)>,
    d: usize,
    k: usize,
    /// Hidden layers of the source network, then the difference head.
    layers: Vec<crate::network::Layer>,
}

impl PairwiseHead {
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// One value per pair: `f_i - f_j` of the source network's outputs.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.d {
            return Err(Error::Shape {
                what: "head input",
                expected: self.d,
                got: x.len(),
            });
        }
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (li, layer) in self.layers.iter().enumerate() {
            layer.affine_into(&cur, &mut next);
            if li < last {
                for v in next.iter_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            core::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    /// The arm the difference signs decode to.
    pub fn decode(&self, diffs: &[f64]) -> usize {
        debug_assert_eq!(diffs.len(), self.pairs.len());
        let bits: Vec<bool> = diffs.iter().map(|&v| v > 0.0).collect();
        decode_pairwise(self.k, &bits)
    }
}

/// Rewires the output layer into one difference neuron per output pair,
/// making the network's prescription a locally constant function of the
/// head's signs. Refuses networks with rules attached: their penalties are
/// per-arm shifts that a difference head cannot carry (the tree extractor
/// handles them instead).
pub fn to_locally_constant(net: &Network) -> Result<PairwiseHead> {
    if !net.rules().is_empty() {
        return Err(Error::Contract(alloc::string::String::from(
            "pairwise heads do not support attached rules; extract a tree instead",
        )));
    }
    let pairs = output_pairs(net.k());
    let out = net.output_layer();
    let mut weights = Vec::with_capacity(pairs.len() * out.in_dim());
    let mut bias = Vec::with_capacity(pairs.len());
    for &(i, j) in &pairs {
        for (wi, wj) in out.row(i).iter().zip(out.row(j).iter()) {
            weights.push(wi - wj);
        }
        bias.push(out.bias()[i] - out.bias()[j]);
    }
    let head_layer = crate::network::Layer::from_parts(out.in_dim(), pairs.len(), weights, bias)?;
    let mut layers: Vec<crate::network::Layer> = net.layers()[..net.depth()].to_vec();
    layers.push(head_layer);
    Ok(PairwiseHead {
        pairs,
        d: net.d(),
        k: net.k(),
        layers,
    })
}

/// How to build the tree.
#[derive(Debug, Clone, Copy)]
pub enum ExtractMode<'a> {
    /// Enumerate every branch. `bounds` (one `(lo, hi)` per input) lets
    /// interval arithmetic cut branches no point in the box can reach; the
    /// tree is then only trusted inside the box.
    Exact { bounds: Option<&'a [(f64, f64)]> },
    /// Prune inactive neurons against `calibration`, then branch only where
    /// the calibration points disagree. Guarantees agreement with the
    /// (pruned) network on every calibration point.
    DataDriven { calibration: &'a [Vec<f64>] },
}

enum Route<'a> {
    All,
    Box(Vec<(f64, f64)>),
    Points(&'a [Vec<f64>]),
}

enum Disp {
    LeftOnly(Vec<usize>),
    RightOnly(Vec<usize>),
    Both(Vec<usize>, Vec<usize>),
}

struct Builder<'a> {
    net: &'a Network,
    pairs: Vec<(usize, usize)>,
    neuron_offsets: Vec<usize>,
    nodes: Vec<Node>,
    route: Route<'a>,
}

impl<'a> Builder<'a> {
    fn interval(&self, form: &AffineForm, bounds: &[(f64, f64)]) -> (f64, f64) {
        let mut lo = form.beta;
        let mut hi = form.beta;
        for (w, &(bl, bh)) in form.omega.iter().zip(bounds.iter()) {
            if *w >= 0.0 {
                lo += w * bl;
                hi += w * bh;
            } else {
                lo += w * bh;
                hi += w * bl;
            }
        }
        (lo, hi)
    }

    fn form_disp(&self, form: &AffineForm, idx: &[usize]) -> Disp {
        match &self.route {
            Route::All => Disp::Both(Vec::new(), Vec::new()),
            Route::Box(bounds) => {
                let (lo, hi) = self.interval(form, bounds);
                if lo > 0.0 {
                    Disp::RightOnly(Vec::new())
                } else if hi <= 0.0 {
                    Disp::LeftOnly(Vec::new())
                } else {
                    Disp::Both(Vec::new(), Vec::new())
                }
            }
            Route::Points(pts) => {
                let mut neg = Vec::new();
                let mut pos = Vec::new();
                for &i in idx {
                    if form.eval(&pts[i]) > 0.0 {
                        pos.push(i);
                    } else {
                        neg.push(i);
                    }
                }
                if pos.is_empty() {
                    Disp::LeftOnly(neg)
                } else if neg.is_empty() {
                    Disp::RightOnly(pos)
                } else {
                    Disp::Both(neg, pos)
                }
            }
        }
    }

    fn rule_disp(&self, rule: &PrescriptiveRule, idx: &[usize]) -> Disp {
        match &self.route {
            Route::All => Disp::Both(Vec::new(), Vec::new()),
            Route::Box(bounds) => {
                // The trigger fires where every row is positive.
                let mut can_fire = true;
                let mut must_fire = true;
                for (row, b) in rule.rows().iter().zip(rule.offsets().iter()) {
                    let form = AffineForm {
                        omega: row.clone(),
                        beta: -b,
                    };
                    let (lo, hi) = self.interval(&form, bounds);
                    if hi <= 0.0 {
                        can_fire = false;
                    }
                    if lo <= 0.0 {
                        must_fire = false;
                    }
                }
                if !can_fire {
                    Disp::LeftOnly(Vec::new())
                } else if must_fire {
                    Disp::RightOnly(Vec::new())
                } else {
                    Disp::Both(Vec::new(), Vec::new())
                }
            }
            Route::Points(pts) => {
                let mut off = Vec::new();
                let mut on = Vec::new();
                for &i in idx {
                    if rule.indicator(&pts[i]) {
                        on.push(i);
                    } else {
                        off.push(i);
                    }
                }
                if on.is_empty() {
                    Disp::LeftOnly(off)
                } else if off.is_empty() {
                    Disp::RightOnly(on)
                } else {
                    Disp::Both(off, on)
                }
            }
        }
    }

    fn identity_forms(&self) -> Vec<AffineForm> {
        let d = self.net.d();
        (0..d)
            .map(|j| {
                let mut omega = vec![0.0; d];
                omega[j] = 1.0;
                AffineForm { omega, beta: 0.0 }
            })
            .collect()
    }

    fn compose_layer(&self, li: usize, prev: &[AffineForm]) -> Vec<AffineForm> {
        let layer = &self.net.layers()[li];
        (0..layer.out_dim())
            .map(|r| crate::regions::compose_row(layer.row(r), layer.bias()[r], prev, self.net.d()))
            .collect()
    }

    fn rec_rules(&mut self, r: usize, rule_bits: &mut Vec<bool>, idx: Vec<usize>) -> Result<usize> {
        if r == self.net.rules().len() {
            let forms = self.identity_forms();
            return self.rec_layer(0, forms, rule_bits, idx);
        }
        match self.rule_disp(&self.net.rules()[r], &idx) {
            Disp::LeftOnly(sub) => {
                rule_bits.push(false);
                let id = self.rec_rules(r + 1, rule_bits, sub)?;
                rule_bits.pop();
                Ok(id)
            }
            Disp::RightOnly(sub) => {
                rule_bits.push(true);
                let id = self.rec_rules(r + 1, rule_bits, sub)?;
                rule_bits.pop();
                Ok(id)
            }
            Disp::Both(l, r_idx) => {
                let id = self.nodes.len();
                self.nodes.push(Node::Leaf { treatment: 0 }); // patched below
                rule_bits.push(false);
                let left = self.rec_rules(r + 1, rule_bits, l)?;
                rule_bits.pop();
                rule_bits.push(true);
                let right = self.rec_rules(r + 1, rule_bits, r_idx)?;
                rule_bits.pop();
                self.nodes[id] = Node::RuleGate {
                    rule: r,
                    left,
                    right,
                };
                Ok(id)
            }
        }
    }

    fn rec_layer(
        &mut self,
        li: usize,
        prev: Vec<AffineForm>,
        rule_bits: &Vec<bool>,
        idx: Vec<usize>,
    ) -> Result<usize> {
        if li == self.net.depth() {
            return self.enter_pairs(&prev, rule_bits, idx);
        }
        let pre_forms = self.compose_layer(li, &prev);
        let mut bits = Vec::with_capacity(pre_forms.len());
        self.rec_neuron(li, 0, &pre_forms, &mut bits, rule_bits, idx)
    }

    fn rec_neuron(
        &mut self,
        li: usize,
        j: usize,
        pre_forms: &[AffineForm],
        bits: &mut Vec<bool>,
        rule_bits: &Vec<bool>,
        idx: Vec<usize>,
    ) -> Result<usize> {
        if j == pre_forms.len() {
            let post: Vec<AffineForm> = pre_forms
                .iter()
                .zip(bits.iter())
                .map(|(f, &b)| {
                    if b {
                        f.clone()
                    } else {
                        AffineForm {
                            omega: vec![0.0; self.net.d()],
                            beta: 0.0,
                        }
                    }
                })
                .collect();
            return self.rec_layer(li + 1, post, rule_bits, idx);
        }
        match self.form_disp(&pre_forms[j], &idx) {
            Disp::LeftOnly(sub) => {
                bits.push(false);
                let id = self.rec_neuron(li, j + 1, pre_forms, bits, rule_bits, sub)?;
                bits.pop();
                Ok(id)
            }
            Disp::RightOnly(sub) => {
                bits.push(true);
                let id = self.rec_neuron(li, j + 1, pre_forms, bits, rule_bits, sub)?;
                bits.pop();
                Ok(id)
            }
            Disp::Both(l, r_idx) => {
                let id = self.nodes.len();
                self.nodes.push(Node::Leaf { treatment: 0 }); // patched below
                bits.push(false);
                let left = self.rec_neuron(li, j + 1, pre_forms, bits, rule_bits, l)?;
                bits.pop();
                bits.push(true);
                let right = self.rec_neuron(li, j + 1, pre_forms, bits, rule_bits, r_idx)?;
                bits.pop();
                self.nodes[id] = Node::Split {
                    omega: pre_forms[j].omega.clone(),
                    beta: pre_forms[j].beta,
                    source: SplitSource::Neuron(self.neuron_offsets[li] + j),
                    left,
                    right,
                };
                Ok(id)
            }
        }
    }

    fn enter_pairs(
        &mut self,
        prev: &[AffineForm],
        rule_bits: &Vec<bool>,
        idx: Vec<usize>,
    ) -> Result<usize> {
        let out_forms = self.compose_layer(self.net.depth(), prev);
        // Penalties from rules fixed to "fired" along this path shift the
        // output constants before the differences are taken.
        let mut offsets = vec![0.0; self.net.k()];
        for (ri, rule) in self.net.rules().iter().enumerate() {
            if rule_bits[ri] {
                for (p, off) in offsets.iter_mut().enumerate() {
                    if !rule.allows(p) {
                        *off += rule.big_m();
                    }
                }
            }
        }
        let pair_forms: Vec<AffineForm> = self
            .pairs
            .iter()
            .map(|&(i, j)| AffineForm {
                omega: out_forms[i]
                    .omega
                    .iter()
                    .zip(out_forms[j].omega.iter())
                    .map(|(a, b)| a - b)
                    .collect(),
                beta: (out_forms[i].beta + offsets[i]) - (out_forms[j].beta + offsets[j]),
            })
            .collect();
        let mut bits = Vec::with_capacity(pair_forms.len());
        self.rec_pair(0, &pair_forms, &mut bits, idx)
    }

    fn rec_pair(
        &mut self,
        p: usize,
        pair_forms: &[AffineForm],
        bits: &mut Vec<bool>,
        idx: Vec<usize>,
    ) -> Result<usize> {
        if p == pair_forms.len() {
            let treatment = decode_pairwise(self.net.k(), bits);
            let id = self.nodes.len();
            self.nodes.push(Node::Leaf { treatment });
            return Ok(id);
        }
        match self.form_disp(&pair_forms[p], &idx) {
            Disp::LeftOnly(sub) => {
                bits.push(false);
                let id = self.rec_pair(p + 1, pair_forms, bits, sub)?;
                bits.pop();
                Ok(id)
            }
            Disp::RightOnly(sub) => {
                bits.push(true);
                let id = self.rec_pair(p + 1, pair_forms, bits, sub)?;
                bits.pop();
                Ok(id)
            }
            Disp::Both(l, r_idx) => {
                let id = self.nodes.len();
                self.nodes.push(Node::Leaf { treatment: 0 }); // patched below
                bits.push(false);
                let left = self.rec_pair(p + 1, pair_forms, bits, l)?;
                bits.pop();
                bits.push(true);
                let right = self.rec_pair(p + 1, pair_forms, bits, r_idx)?;
                bits.pop();
                let (i, j) = self.pairs[p];
                self.nodes[id] = Node::Split {
                    omega: pair_forms[p].omega.clone(),
                    beta: pair_forms[p].beta,
                    source: SplitSource::DiffPair(i, j),
                    left,
                    right,
                };
                Ok(id)
            }
        }
    }
}

/// Converts a network into an oblique tree with the same prescriptions. See
/// [`ExtractMode`] for the fidelity trade-off between the two modes.
pub fn extract_tree(net: &Network, mode: ExtractMode<'_>) -> Result<ObliqueTree> {
    match mode {
        ExtractMode::Exact { bounds } => {
            let levels = net.rules().len() + net.n_hidden() + net.k() * (net.k() - 1) / 2;
            if levels > MAX_EXACT_LEVELS {
                return Err(Error::TreeTooLarge {
                    levels,
                    max: MAX_EXACT_LEVELS,
                });
            }
            let route = match bounds {
                Some(b) => {
                    if b.len() != net.d() {
                        return Err(Error::Shape {
                            what: "extraction bounds",
                            expected: net.d(),
                            got: b.len(),
                        });
                    }
                    for &(lo, hi) in b {
                        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                            return Err(Error::Data(alloc::string::String::from(
                                "extraction bounds must be finite with lo <= hi",
                            )));
                        }
                    }
                    Route::Box(b.to_vec())
                }
                None => Route::All,
            };
            build_with(net, route)
        }
        ExtractMode::DataDriven { calibration } => {
            if calibration.is_empty() {
                return Err(Error::Contract(alloc::string::String::from(
                    "data-driven extraction needs calibration points",
                )));
            }
            let pruned = prune_neurons(net, calibration)?;
            build_with(&pruned, Route::Points(calibration))
        }
    }
}

fn build_with(net: &Network, route: Route<'_>) -> Result<ObliqueTree> {
    let mut offsets = Vec::with_capacity(net.depth());
    let mut acc = 0;
    for w in net.hidden_sizes() {
        offsets.push(acc);
        acc += w;
    }
    let mut builder = Builder {
        net,
        pairs: output_pairs(net.k()),
        neuron_offsets: offsets,
        nodes: Vec::new(),
        route,
    };
    let idx0 = match &builder.route {
        Route::Points(pts) => (0..pts.len()).collect(),
        _ => Vec::new(),
    };
    let mut rule_bits = Vec::new();
    let root = builder.rec_rules(0, &mut rule_bits, idx0)?;
    let tree = ObliqueTree {
        d: net.d(),
        k: net.k(),
        nodes: builder.nodes,
        root,
        rules: net.rules().to_vec(),
    };
    debug_assert!(tree.check_invariants().is_ok());
    Ok(tree)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport {
    pub total: usize,
    /// Points within [`BOUNDARY_TOL`] of any neuron hyperplane, output tie,
    /// or rule trigger boundary; sign comparisons there are noise.
    pub excluded: usize,
    pub checked: usize,
    pub mismatches: usize,
    /// Indices into the point set of the first few mismatches.
    pub first_mismatches: Vec<usize>,
}

/// Compares network and tree prescriptions on a point set, skipping points
/// too close to a decision boundary for sign agreement to be well defined.
pub fn verify_equivalence(
    net: &Network,
    tree: &ObliqueTree,
    points: &[Vec<f64>],
) -> Result<EquivalenceReport> {
    if tree.d() != net.d() {
        return Err(Error::Shape {
            what: "tree input width",
            expected: net.d(),
            got: tree.d(),
        });
    }
    if tree.k() != net.k() {
        return Err(Error::Shape {
            what: "tree arm count",
            expected: net.k(),
            got: tree.k(),
        });
    }
    let mut excluded = 0;
    let mut mismatches = 0;
    let mut first = Vec::new();
    for (pi, x) in points.iter().enumerate() {
        let (out, cache) = net.forward(x)?;
        let mut margin = f64::INFINITY;
        for pre in &cache.pre {
            for &z in pre {
                margin = margin.min(z.abs());
            }
        }
        for i in 0..out.len() {
            for j in i + 1..out.len() {
                margin = margin.min((out[i] - out[j]).abs());
            }
        }
        for rule in net.rules() {
            margin = margin.min(rule.boundary_margin(x));
        }
        if margin < BOUNDARY_TOL {
            excluded += 1;
            continue;
        }
        let net_arm = prescribe(&out);
        let tree_arm = tree_predict(tree, x)?;
        if net_arm != tree_arm {
            mismatches += 1;
            if first.len() < 8 {
                first.push(pi);
            }
        }
    }
    Ok(EquivalenceReport {
        total: points.len(),
        excluded,
        checked: points.len() - excluded,
        mismatches,
        first_mismatches: first,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{inject_rule, PrescriptiveRule};
    use crate::network::Layer;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy_net() -> Network {
        let hidden = Layer::from_parts(2, 2, vec![1.0, -1.0, 1.0, 1.0], vec![0.0, -0.5]).unwrap();
        let out = Layer::from_parts(2, 2, vec![-0.5, 2.0, 0.5, -1.0], vec![0.0, 0.0]).unwrap();
        Network::from_parts(2, 2, vec![hidden, out]).unwrap()
    }

    fn random_points(n: usize, d: usize, lo: f64, hi: f64, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (0..d).map(|_| rng.gen_range(lo..hi)).collect())
            .collect()
    }

    #[test]
    fn exact_toy_tree_is_the_complete_three_level_tree() {
        let net = toy_net();
        let tree = extract_tree(&net, ExtractMode::Exact { bounds: None }).unwrap();
        tree.check_invariants().unwrap();
        assert_eq!(tree.n_splits(), 7);
        assert_eq!(tree.n_leaves(), 8);
        assert_eq!(tree.max_depth(), 3);
        // Root tests the first neuron's hyperplane x1 - x2 > 0.
        match &tree.nodes()[tree.root()] {
            Node::Split {
                omega,
                beta,
                source,
                ..
            } => {
                assert_eq!(omega, &vec![1.0, -1.0]);
                assert_eq!(*beta, 0.0);
                assert_eq!(*source, SplitSource::Neuron(0));
            }
            other => panic!("unexpected root {other:?}"),
        }
    }

    #[test]
    fn exact_tree_agrees_with_the_network_everywhere() {
        let net = toy_net();
        let tree = extract_tree(&net, ExtractMode::Exact { bounds: None }).unwrap();
        for x in random_points(2000, 2, -1.5, 1.5, 3) {
            let arm = prescribe(&net.predict(&x).unwrap());
            assert_eq!(tree_predict(&tree, &x).unwrap(), arm, "at {x:?}");
        }
    }

    #[test]
    fn box_bounds_prune_unreachable_branches() {
        let net = toy_net();
        let full = extract_tree(&net, ExtractMode::Exact { bounds: None }).unwrap();
        // Inside this box the first neuron is always active.
        let bounds = [(0.5, 1.0), (-0.4, 0.4)];
        let pruned = extract_tree(&net, ExtractMode::Exact { bounds: Some(&bounds) }).unwrap();
        assert!(pruned.nodes().len() < full.nodes().len());
        for x in random_points(500, 2, 0.0, 1.0, 4) {
            let x = vec![0.5 + 0.5 * x[0], -0.4 + 0.8 * x[1]];
            let arm = prescribe(&net.predict(&x).unwrap());
            assert_eq!(tree_predict(&pruned, &x).unwrap(), arm);
        }
    }

    #[test]
    fn data_driven_tree_agrees_on_calibration_points() {
        let net = Network::new(3, &[6, 5], 3, 77).unwrap();
        let calibration = random_points(400, 3, -1.0, 1.0, 8);
        let tree = extract_tree(&net, ExtractMode::DataDriven { calibration: &calibration }).unwrap();
        tree.check_invariants().unwrap();
        let exact = extract_tree(&net, ExtractMode::Exact { bounds: None }).unwrap();
        assert!(tree.max_depth() <= exact.max_depth());
        for x in &calibration {
            let arm = prescribe(&net.predict(x).unwrap());
            assert_eq!(tree_predict(&tree, x).unwrap(), arm, "at {x:?}");
        }
    }

    #[test]
    fn constrained_network_extracts_to_a_gated_tree() {
        let mut net = toy_net();
        let rule = PrescriptiveRule::new(
            vec![vec![1.0, 1.0], vec![0.0, 1.0]],
            vec![1.0, 0.5],
            vec![0],
            1000.0,
        )
        .unwrap();
        inject_rule(&mut net, rule).unwrap();
        let tree = extract_tree(&net, ExtractMode::Exact { bounds: None }).unwrap();
        assert!(matches!(tree.nodes()[tree.root()], Node::RuleGate { rule: 0, .. }));
        for x in random_points(3000, 2, -0.5, 1.5, 9) {
            let arm = prescribe(&net.predict(&x).unwrap());
            assert_eq!(tree_predict(&tree, &x).unwrap(), arm, "at {x:?}");
        }
    }

    #[test]
    fn decoder_matches_argmin_for_all_realizable_sign_patterns() {
        // Enumerate every function from arms to value levels; each induces a
        // realizable sign pattern, and together they cover all of them.
        for k in 2..=4usize {
            let pairs = output_pairs(k);
            let mut levels = vec![0usize; k];
            loop {
                let values: Vec<f64> = levels.iter().map(|&l| l as f64).collect();
                let bits: Vec<bool> = pairs.iter().map(|&(i, j)| values[i] > values[j]).collect();
                assert_eq!(
                    decode_pairwise(k, &bits),
                    prescribe(&values),
                    "k={k} levels={levels:?}"
                );
                // Odometer increment.
                let mut pos = 0;
                loop {
                    if pos == k {
                        break;
                    }
                    levels[pos] += 1;
                    if levels[pos] < k {
                        break;
                    }
                    levels[pos] = 0;
                    pos += 1;
                }
                if pos == k {
                    break;
                }
            }
        }
    }

    #[test]
    fn unrealizable_sign_patterns_fall_back_to_arm_zero() {
        // Cyclic pattern for k = 3: f0 > f1, f1 > f2, yet f2 > f0.
        assert_eq!(decode_pairwise(3, &[true, false, true]), 0);
    }

    #[test]
    fn pairwise_head_signs_decode_to_the_prescription() {
        let net = Network::new(4, &[5, 4], 3, 31).unwrap();
        let head = to_locally_constant(&net).unwrap();
        assert_eq!(head.pairs(), &[(0, 1), (0, 2), (1, 2)]);
        for x in random_points(500, 4, -1.0, 1.0, 12) {
            let out = net.predict(&x).unwrap();
            let diffs = head.predict(&x).unwrap();
            for (p, &(i, j)) in head.pairs().iter().enumerate() {
                assert!((diffs[p] - (out[i] - out[j])).abs() < 1e-9);
            }
            assert_eq!(head.decode(&diffs), prescribe(&out));
        }
    }

    #[test]
    fn pairwise_head_handles_two_arms() {
        let net = toy_net();
        let head = to_locally_constant(&net).unwrap();
        assert_eq!(head.pairs(), &[(0, 1)]);
        let diffs = head.predict(&[0.8, 0.6]).unwrap();
        // Outputs there are (1.7, -0.8), so the difference is 2.5 and the
        // smaller arm is 1.
        assert_eq!(diffs.len(), 1);
        assert!((diffs[0] - 2.5).abs() < 1e-12);
        assert_eq!(head.decode(&diffs), 1);
    }

    #[test]
    fn pairwise_head_refuses_rules() {
        let mut net = toy_net();
        let rule = PrescriptiveRule::new(vec![vec![1.0, 0.0]], vec![0.0], vec![0], 5.0).unwrap();
        inject_rule(&mut net, rule).unwrap();
        assert!(to_locally_constant(&net).is_err());
    }

    #[test]
    fn exact_extraction_rejects_oversized_networks() {
        let net = Network::new(2, &[20, 10], 2, 1).unwrap();
        assert!(matches!(
            extract_tree(&net, ExtractMode::Exact { bounds: None }),
            Err(Error::TreeTooLarge { levels: 31, max: 25 })
        ));
    }

    #[test]
    fn verifier_counts_a_corrupted_leaf() {
        let net = toy_net();
        let mut tree = extract_tree(&net, ExtractMode::Exact { bounds: None }).unwrap();
        let points = random_points(4000, 2, 0.0, 1.0, 6);
        let clean = verify_equivalence(&net, &tree, &points).unwrap();
        assert_eq!(clean.mismatches, 0);
        assert_eq!(clean.checked + clean.excluded, clean.total);
        // Flip the leaf that (0.8, 0.6) reaches.
        let mut cur = tree.root();
        loop {
            match &tree.nodes[cur] {
                Node::Leaf { .. } => break,
                Node::Split {
                    omega,
                    beta,
                    left,
                    right,
                    ..
                } => {
                    let v = crate::math::dot(omega, &[0.8, 0.6]) + beta;
                    cur = if v > 0.0 { *right } else { *left };
                }
                Node::RuleGate { .. } => unreachable!(),
            }
        }
        tree.nodes[cur] = Node::Leaf { treatment: 0 };
        let dirty = verify_equivalence(&net, &tree, &points).unwrap();
        assert!(dirty.mismatches > 0);
        assert!(!dirty.first_mismatches.is_empty());
    }

    #[test]
    fn depth_is_bounded_by_rules_neurons_and_pairs() {
        let mut net = Network::new(2, &[4, 3], 3, 55).unwrap();
        let rule = PrescriptiveRule::new(vec![vec![1.0, 0.0]], vec![0.0], vec![0, 1], 50.0).unwrap();
        inject_rule(&mut net, rule).unwrap();
        let tree = extract_tree(&net, ExtractMode::Exact { bounds: None }).unwrap();
        let bound = 1 + 7 + 3;
        assert!(tree.max_depth() <= bound);
    }
}
