//! Dense feed-forward ReLU networks with one output neuron per treatment arm.
//!
//! The hidden activation is `relu(z) = max(0, z)` and the output layer is
//! affine. A neuron counts as active only when its pre-activation is strictly
//! positive; that convention is applied consistently to activation patterns,
//! to the ReLU derivative (zero at zero), and to every downstream consumer,
//! so the polyhedral views in [`crate::regions`] and [`crate::tree`] describe
//! exactly what `forward` computes.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::constraints::PrescriptiveRule;
use crate::math;
use crate::{Error, Result};

/// One dense layer. Weights are row-major with shape `(out_dim, in_dim)`:
/// row `r` holds the incoming weights of output neuron `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub(crate) weights: Vec<f64>,
    pub(crate) bias: Vec<f64>,
    pub(crate) in_dim: usize,
    pub(crate) out_dim: usize,
}

impl Layer {
    /// Builds a layer from explicit parameters, checking dimensions and
    /// rejecting non-finite values.
    pub fn from_parts(in_dim: usize, out_dim: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if weights.len() != in_dim * out_dim {
            return Err(Error::Shape {
                what: "layer weights",
                expected: in_dim * out_dim,
                got: weights.len(),
            });
        }
        if bias.len() != out_dim {
            return Err(Error::Shape {
                what: "layer bias",
                expected: out_dim,
                got: bias.len(),
            });
        }
        if weights.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Data(String::from("layer contains non-finite parameters")));
        }
        Ok(Layer {
            weights,
            bias,
            in_dim,
            out_dim,
        })
    }

    fn xavier(in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let limit = math::sqrt(6.0 / (in_dim + out_dim) as f64);
        let dist = Uniform::new(-limit, limit);
        let weights = (0..in_dim * out_dim).map(|_| dist.sample(rng)).collect();
        Layer {
            weights,
            bias: vec![0.0; out_dim],
            in_dim,
            out_dim,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    /// Row `r` of the weight matrix.
    pub fn row(&self, r: usize) -> &[f64] {
        &self.weights[r * self.in_dim..(r + 1) * self.in_dim]
    }

    /// `out = W x + b`.
    pub(crate) fn affine_into(&self, x: &[f64], out: &mut Vec<f64>) {
        debug_assert_eq!(x.len(), self.in_dim);
        out.clear();
        for r in 0..self.out_dim {
            out.push(math::dot(self.row(r), x) + self.bias[r]);
        }
    }
}

/// The hidden activation bits of one input, in layer order and neuron order
/// within each layer. Bit `true` means the pre-activation was strictly
/// positive. `Ord` is lexicographic, which gives region enumerations a
/// stable, reproducible order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ActivationPattern(pub Vec<bool>);

impl ActivationPattern {
    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// "10110..." with one character per hidden neuron.
    pub fn bit_string(&self) -> String {
        self.0.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }
}

/// Intermediate values of one forward pass, retained for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `post[0]` is the input, `post[i]` the post-activation of hidden
    /// layer `i` (1-based). Length `depth() + 1`.
    pub(crate) post: Vec<Vec<f64>>,
    /// Pre-activations of each hidden layer. Length `depth()`.
    pub(crate) pre: Vec<Vec<f64>>,
}

impl ForwardCache {
    /// The activation pattern realized by the cached pass.
    pub fn pattern(&self) -> ActivationPattern {
        let bits = self
            .pre
            .iter()
            .flat_map(|layer| layer.iter().map(|&z| z > 0.0))
            .collect();
        ActivationPattern(bits)
    }

    /// Pre-activations per hidden layer; their distance from zero says how
    /// far the input sits from each neuron's decision surface.
    pub fn pre_activations(&self) -> &[Vec<f64>] {
        &self.pre
    }
}

/// Parameter gradients with the same shapes as the network's layers.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

#[derive(Debug, Clone)]
pub struct LayerGrad {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Gradients {
    pub fn zeros(net: &Network) -> Self {
        let layers = net
            .layers
            .iter()
            .map(|l| LayerGrad {
                w: vec![0.0; l.weights.len()],
                b: vec![0.0; l.bias.len()],
            })
            .collect();
        Gradients { layers }
    }

    pub fn scale(&mut self, s: f64) {
        for l in &mut self.layers {
            for v in l.w.iter_mut().chain(l.b.iter_mut()) {
                *v *= s;
            }
        }
    }
}

/// A prescriptive network: `depth()` hidden ReLU layers followed by an affine
/// output layer with one neuron per treatment arm. Prescribing means taking
/// the arm with the smallest output (ties to the lowest index).
///
/// Attached [`PrescriptiveRule`]s shift forbidden outputs upward by a large
/// constant wherever a rule fires; see [`crate::constraints`].
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
    d: usize,
    k: usize,
    rules: Vec<PrescriptiveRule>,
}

impl Network {
    /// Fresh network with Xavier-uniform weights (`limit =
    /// sqrt(6 / (fan_in + fan_out))`) and zero biases, drawn from a ChaCha
    /// stream seeded with `seed`. Equal arguments give bitwise-equal networks.
    pub fn new(d: usize, hidden: &[usize], k: usize, seed: u64) -> Result<Self> {
        if d == 0 {
            return Err(Error::Contract(String::from("input dimension must be at least 1")));
        }
        if k < 2 {
            return Err(Error::Contract(String::from("need at least two treatment arms")));
        }
        if hidden.iter().any(|&w| w == 0) {
            return Err(Error::Contract(String::from("hidden layer widths must be nonzero")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut fan_in = d;
        for &width in hidden {
            layers.push(Layer::xavier(fan_in, width, &mut rng));
            fan_in = width;
        }
        layers.push(Layer::xavier(fan_in, k, &mut rng));
        Ok(Network {
            layers,
            d,
            k,
            rules: Vec::new(),
        })
    }

    /// Assembles a network from explicit layers. The last layer is the output
    /// layer; passing exactly one layer yields a purely affine network with
    /// no hidden neurons.
    pub fn from_parts(d: usize, k: usize, layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Contract(String::from("network needs at least an output layer")));
        }
        if k < 2 {
            return Err(Error::Contract(String::from("need at least two treatment arms")));
        }
        let mut fan_in = d;
        for layer in &layers {
            if layer.in_dim != fan_in {
                return Err(Error::Shape {
                    what: "layer input width",
                    expected: fan_in,
                    got: layer.in_dim,
                });
            }
            fan_in = layer.out_dim;
        }
        if fan_in != k {
            return Err(Error::Shape {
                what: "output layer width",
                expected: k,
                got: fan_in,
            });
        }
        Ok(Network {
            layers,
            d,
            k,
            rules: Vec::new(),
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of hidden layers.
    pub fn depth(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn hidden_sizes(&self) -> Vec<usize> {
        self.layers[..self.depth()].iter().map(|l| l.out_dim).collect()
    }

    /// Total hidden neuron count across all layers.
    pub fn n_hidden(&self) -> usize {
        self.layers[..self.depth()].iter().map(|l| l.out_dim).sum()
    }

    /// Hidden layers followed by the output layer.
    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn output_layer(&self) -> &Layer {
        &self.layers[self.depth()]
    }

    pub fn rules(&self) -> &[PrescriptiveRule] {
        &self.rules
    }

    pub(crate) fn push_rule(&mut self, rule: PrescriptiveRule) {
        self.rules.push(rule);
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.d {
            return Err(Error::Shape {
                what: "network input",
                expected: self.d,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Adds every attached rule's penalty to the outputs it forbids at `x`.
    pub(crate) fn apply_rule_offsets(&self, x: &[f64], out: &mut [f64]) {
        for rule in &self.rules {
            if rule.indicator(x) {
                for (p, v) in out.iter_mut().enumerate() {
                    if !rule.allows(p) {
                        *v += rule.big_m();
                    }
                }
            }
        }
    }

    /// Full forward pass. Returns the K outputs (rule penalties included)
    /// together with the cache needed by [`Network::backward_into`].
    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        self.check_input(x)?;
        let depth = self.depth();
        let mut post = Vec::with_capacity(depth + 1);
        let mut pre = Vec::with_capacity(depth);
        post.push(x.to_vec());
        for layer in &self.layers[..depth] {
            let mut z = Vec::new();
            layer.affine_into(post.last().expect("post is never empty"), &mut z);
            let activated = z.iter().map(|&v| v.max(0.0)).collect();
            pre.push(z);
            post.push(activated);
        }
        let mut out = Vec::new();
        self.layers[depth].affine_into(post.last().expect("post is never empty"), &mut out);
        self.apply_rule_offsets(x, &mut out);
        Ok((out, ForwardCache { post, pre }))
    }

    /// Forward pass without retaining intermediates.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let depth = self.depth();
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        for layer in &self.layers[..depth] {
            layer.affine_into(&cur, &mut next);
            for v in next.iter_mut() {
                *v = v.max(0.0);
            }
            core::mem::swap(&mut cur, &mut next);
        }
        let mut out = Vec::new();
        self.layers[depth].affine_into(&cur, &mut out);
        self.apply_rule_offsets(x, &mut out);
        Ok(out)
    }

    /// The hidden activation bits of `x`, layer-major. A bit is set only for
    /// strictly positive pre-activations, so inputs on a neuron's boundary
    /// hyperplane land on the inactive side.
    pub fn activation_pattern(&self, x: &[f64]) -> Result<ActivationPattern> {
        let (_, cache) = self.forward(x)?;
        Ok(cache.pattern())
    }

    /// Accumulates the parameter gradients of one sample into `grads`, given
    /// the loss gradient with respect to the outputs. The ReLU derivative at
    /// exactly zero is zero, matching the strict activation convention. Rule
    /// penalties are input-dependent constants and never carry gradient.
    pub fn backward_into(
        &self,
        cache: &ForwardCache,
        output_grad: &[f64],
        grads: &mut Gradients,
    ) -> Result<()> {
        if output_grad.len() != self.k {
            return Err(Error::Shape {
                what: "output gradient",
                expected: self.k,
                got: output_grad.len(),
            });
        }
        if grads.layers.len() != self.layers.len() {
            return Err(Error::Shape {
                what: "gradient layers",
                expected: self.layers.len(),
                got: grads.layers.len(),
            });
        }
        let mut delta = output_grad.to_vec();
        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            let inputs = &cache.post[li];
            debug_assert_eq!(inputs.len(), layer.in_dim);
            debug_assert_eq!(delta.len(), layer.out_dim);
            let g = &mut grads.layers[li];
            for r in 0..layer.out_dim {
                let dr = delta[r];
                g.b[r] += dr;
                let row = &mut g.w[r * layer.in_dim..(r + 1) * layer.in_dim];
                for (gw, inp) in row.iter_mut().zip(inputs.iter()) {
                    *gw += dr * inp;
                }
            }
            if li > 0 {
                let mut next = vec![0.0; layer.in_dim];
                for r in 0..layer.out_dim {
                    let dr = delta[r];
                    let row = layer.row(r);
                    for (nv, w) in next.iter_mut().zip(row.iter()) {
                        *nv += dr * w;
                    }
                }
                for (nv, &z) in next.iter_mut().zip(cache.pre[li - 1].iter()) {
                    if z <= 0.0 {
                        *nv = 0.0;
                    }
                }
                delta = next;
            }
        }
        Ok(())
    }
}
