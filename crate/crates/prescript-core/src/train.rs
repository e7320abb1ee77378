//! Minibatch training, magnitude masking for sparse networks, and post-hoc
//! removal of neurons that a reference input set never exercises.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::loss::{batch_loss_and_grad, prescribe, LossConfig, Sample};
use crate::network::{Layer, Network};
use crate::optim::{adam_step, AdamState};
use crate::{Error, Result};

/// Stream id for the shuffle generator, kept distinct from weight init so a
/// shared seed does not correlate the two.
const SHUFFLE_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Prescription weight of the loss; see [`crate::loss`].
    pub mu: f64,
    pub seed: u64,
    /// Re-apply [`magnitude_mask`] after every optimizer step.
    pub sparse: bool,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            batch_size: 64,
            lr: 1e-3,
            mu: 1e-4,
            seed: 0,
            sparse: false,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<LossConfig> {
        if self.epochs == 0 {
            return Err(Error::Contract(String::from("epochs must be at least 1")));
        }
        if self.batch_size == 0 {
            return Err(Error::Contract(String::from("batch_size must be at least 1")));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Contract(String::from("lr must be positive and finite")));
        }
        LossConfig::new(self.mu)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Total loss per epoch, summed over all samples seen in that epoch.
    pub epoch_losses: Vec<f64>,
    /// Share of samples (in percent) whose prescription after training
    /// matches the caller-provided optimal arms. Only present when those
    /// were supplied.
    pub final_accuracy: Option<f64>,
}

/// Trains `net` in place with Adam on shuffled minibatches.
///
/// If the network carries prescription rules the data must already be free
/// of rule violations (see [`crate::constraints::filter_violating`]);
/// otherwise the squared-error term would chase penalty-shifted outputs.
/// `optimal` may supply the known best arm per sample purely for the final
/// accuracy figure in the report.
pub fn train(
    net: &mut Network,
    data: &[Sample],
    cfg: &TrainConfig,
    optimal: Option<&[usize]>,
) -> Result<TrainReport> {
    let loss_cfg = cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Contract(String::from("training data is empty")));
    }
    for (i, s) in data.iter().enumerate() {
        if s.x.len() != net.d() {
            return Err(Error::Shape {
                what: "training sample features",
                expected: net.d(),
                got: s.x.len(),
            });
        }
        if s.treatment >= net.k() {
            return Err(Error::Data(format!(
                "sample {i} has treatment {} but the network has {} arms",
                s.treatment,
                net.k()
            )));
        }
        if !s.outcome.is_finite() || s.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data(format!("sample {i} contains non-finite values")));
        }
    }
    if let Some(opt) = optimal {
        if opt.len() != data.len() {
            return Err(Error::Shape {
                what: "optimal arm labels",
                expected: data.len(),
                got: opt.len(),
            });
        }
    }
    if !net.rules().is_empty() {
        let violating = data
            .iter()
            .filter(|s| {
                net.rules()
                    .iter()
                    .any(|r| r.indicator(&s.x) && !r.allows(s.treatment))
            })
            .count();
        if violating > 0 {
            return Err(Error::Contract(format!(
                "{violating} training samples violate the attached prescription rules; \
                 remove them with filter_violating before training"
            )));
        }
    }

    let mut adam = AdamState::new(net, cfg.lr);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(SHUFFLE_STREAM);

    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        let mut epoch_loss = 0.0;
        for (bi, batch) in order.chunks(cfg.batch_size).enumerate() {
            let (batch_loss, grads) = batch_loss_and_grad(net, data, batch, &loss_cfg)?;
            if !batch_loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: bi });
            }
            adam_step(net, &grads, &mut adam)?;
            if cfg.sparse {
                magnitude_mask(net);
            }
            epoch_loss += batch_loss;
        }
        epoch_losses.push(epoch_loss);
    }

    let final_accuracy = match optimal {
        Some(opt) => {
            let mut hits = 0usize;
            for (s, &best) in data.iter().zip(opt.iter()) {
                if prescribe(&net.predict(&s.x)?) == best {
                    hits += 1;
                }
            }
            Some(100.0 * hits as f64 / data.len() as f64)
        }
        None => None,
    };

    Ok(TrainReport {
        epoch_losses,
        final_accuracy,
    })
}

/// Zeroes all but the single largest-magnitude incoming weight of every
/// hidden neuron (lowest input index on ties). Biases and the output layer
/// are untouched, and optimizer moments are deliberately not masked: a
/// masked weight may win back its slot on a later step.
pub fn magnitude_mask(net: &mut Network) {
    let depth = net.depth();
    for layer in &mut net.layers_mut()[..depth] {
        let in_dim = layer.in_dim();
        for r in 0..layer.out_dim() {
            let row = &mut layer.weights[r * in_dim..(r + 1) * in_dim];
            let mut best = 0;
            for (c, w) in row.iter().enumerate().skip(1) {
                if w.abs() > row[best].abs() {
                    best = c;
                }
            }
            for (c, w) in row.iter_mut().enumerate() {
                if c != best {
                    *w = 0.0;
                }
            }
        }
    }
}

/// Activity of each hidden neuron over a probe set.
struct Activity {
    ever: Vec<Vec<bool>>,
    always: Vec<Vec<bool>>,
}

fn measure_activity(net: &Network, data: &[Vec<f64>]) -> Result<Activity> {
    let sizes = net.hidden_sizes();
    let mut ever: Vec<Vec<bool>> = sizes.iter().map(|&w| vec![false; w]).collect();
    let mut always: Vec<Vec<bool>> = sizes.iter().map(|&w| vec![true; w]).collect();
    for x in data {
        let (_, cache) = net.forward(x)?;
        for (l, pre) in cache.pre.iter().enumerate() {
            for (j, &z) in pre.iter().enumerate() {
                let on = z > 0.0;
                ever[l][j] |= on;
                always[l][j] &= on;
            }
        }
    }
    Ok(Activity { ever, always })
}

/// `a (r x m) * b (m x c)`, row-major.
fn matmul(a: &[f64], b: &[f64], r: usize, m: usize, c: usize) -> Vec<f64> {
    let mut out = vec![0.0; r * c];
    for i in 0..r {
        for kk in 0..m {
            let aik = a[i * m + kk];
            if aik == 0.0 {
                continue;
            }
            for j in 0..c {
                out[i * c + j] += aik * b[kk * c + j];
            }
        }
    }
    out
}

/// Returns a copy of `net` with hidden neurons that are never active on
/// `data` removed. If every surviving neuron of a layer is active on all of
/// `data`, the whole layer acts affinely there and is folded into its
/// successor; a network can lose all its hidden layers this way and become
/// purely affine. Behavior is preserved exactly on `data` (and on any input
/// with the same activity profile); elsewhere the pruned network may differ.
pub fn prune_neurons(net: &Network, data: &[Vec<f64>]) -> Result<Network> {
    if data.is_empty() {
        return Err(Error::Contract(String::from(
            "neuron pruning needs at least one probe input",
        )));
    }
    let depth = net.depth();
    if depth == 0 {
        return Ok(net.clone());
    }
    let act = measure_activity(net, data)?;

    // Bridge from the last emitted layer's output `u` to the next original
    // layer's surviving input slots: slot j of `orig_keep` carries row j of
    // the affine map `P u + q`; dropped slots carry zero.
    let mut p: Vec<f64> = (0..net.d() * net.d())
        .map(|i| if i % (net.d() + 1) == 0 { 1.0 } else { 0.0 })
        .collect();
    let mut q: Vec<f64> = vec![0.0; net.d()];
    let mut orig_keep: Vec<usize> = (0..net.d()).collect();
    let mut u_width = net.d();

    let mut new_layers: Vec<Layer> = Vec::new();

    for l in 0..=depth {
        let layer = &net.layers()[l];
        // Restrict to surviving input slots, then fold the bridge in:
        // W' = W[:, orig_keep] * P, b' = b + W[:, orig_keep] * q.
        let rows = layer.out_dim();
        let mut w_sel = vec![0.0; rows * orig_keep.len()];
        for r in 0..rows {
            for (ci, &c) in orig_keep.iter().enumerate() {
                w_sel[r * orig_keep.len() + ci] = layer.weights()[r * layer.in_dim() + c];
            }
        }
        let folded_w = matmul(&w_sel, &p, rows, orig_keep.len(), u_width);
        let mut folded_b = layer.bias().to_vec();
        for r in 0..rows {
            let mut acc = 0.0;
            for (ci, &qv) in q.iter().enumerate() {
                acc += w_sel[r * orig_keep.len() + ci] * qv;
            }
            folded_b[r] += acc;
        }

        if l == depth {
            new_layers.push(Layer::from_parts(u_width, rows, folded_w, folded_b)?);
            break;
        }

        let kept: Vec<usize> = (0..rows).filter(|&j| act.ever[l][j]).collect();
        let take_rows = |w: &[f64], b: &[f64]| {
            let mut wk = Vec::with_capacity(kept.len() * u_width);
            let mut bk = Vec::with_capacity(kept.len());
            for &j in &kept {
                wk.extend_from_slice(&w[j * u_width..(j + 1) * u_width]);
                bk.push(b[j]);
            }
            (wk, bk)
        };
        if kept.iter().all(|&j| act.always[l][j]) {
            // The remaining neurons never clip on the data: fold this layer
            // into the bridge instead of emitting it.
            let (wk, bk) = take_rows(&folded_w, &folded_b);
            p = wk;
            q = bk;
            orig_keep = kept;
        } else {
            let (wk, bk) = take_rows(&folded_w, &folded_b);
            let width = kept.len();
            new_layers.push(Layer::from_parts(u_width, width, wk, bk)?);
            u_width = width;
            p = (0..width * width)
                .map(|i| if i % (width + 1) == 0 { 1.0 } else { 0.0 })
                .collect();
            q = vec![0.0; width];
            orig_keep = kept;
        }
    }

    let mut pruned = Network::from_parts(net.d(), net.k(), new_layers)?;
    for rule in net.rules() {
        pruned.push_rule(rule.clone());
    }
    Ok(pruned)
}
