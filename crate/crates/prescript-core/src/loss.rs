//! The combined prescription/prediction objective.
//!
//! For a sample `(x, p, y)` (observed treatment `p`, observed outcome `y`,
//! smaller outcomes preferred) and network outputs `f(x)`, let `pi` be the
//! prescribed arm, the argmin of the outputs with ties to the lowest index.
//! The per-sample loss is
//!
//! ```text
//! mu     * (y            if pi == p
//!           f(x)[pi]     otherwise)
//! + (1 - mu) * (y - f(x)[p])^2
//! ```
//!
//! summed (not averaged) over the batch. The prescription part charges the
//! model's own estimate of whatever it prescribes when it disagrees with the
//! data, and the observed outcome when it agrees; the prediction part is a
//! plain squared error on the observed arm.
//!
//! The gradient treats `pi` as locally constant: within one linear piece of
//! the network the argmin does not move, so differentiation happens after
//! plugging the prescribed index in. In output space that leaves `mu` on
//! output `pi` (only when `pi != p`) and `-2 (1 - mu) (y - f(x)[p])` on
//! output `p`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::network::{Gradients, Network};
use crate::{Error, Result};

/// One observational record: features, the treatment that was applied, and
/// the outcome that followed. Smaller outcomes are better.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    pub treatment: usize,
    pub outcome: f64,
}

impl Sample {
    pub fn new(x: Vec<f64>, treatment: usize, outcome: f64) -> Self {
        Sample {
            x,
            treatment,
            outcome,
        }
    }
}

/// Loss mix. `mu` close to zero trains an outcome predictor that is gently
/// pushed toward prescribing well; `mu = 1` ignores prediction quality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub mu: f64,
}

impl LossConfig {
    pub fn new(mu: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&mu) {
            return Err(Error::Contract(String::from("mu must lie in [0, 1]")));
        }
        Ok(LossConfig { mu })
    }
}

/// The arm a set of outcome estimates prescribes: the index of the smallest
/// value, lowest index on ties. This tie rule is shared by every consumer in
/// the crate, including the polyhedral views.
pub fn prescribe(outputs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in outputs.iter().enumerate().skip(1) {
        if v < outputs[best] {
            best = i;
        }
    }
    best
}

/// Loss and parameter gradients summed over `samples`.
pub fn loss_and_grad(net: &Network, samples: &[Sample], cfg: &LossConfig) -> Result<(f64, Gradients)> {
    let idx: Vec<usize> = (0..samples.len()).collect();
    batch_loss_and_grad(net, samples, &idx, cfg)
}

/// Same as [`loss_and_grad`] but over an index view, so the trainer can
/// shuffle without materializing batches.
pub(crate) fn batch_loss_and_grad(
    net: &Network,
    data: &[Sample],
    idx: &[usize],
    cfg: &LossConfig,
) -> Result<(f64, Gradients)> {
    let mut grads = Gradients::zeros(net);
    let mut total = 0.0;
    let k = net.k();
    for &i in idx {
        let s = &data[i];
        if s.treatment >= k {
            return Err(Error::Data(alloc::format!(
                "sample {i} has treatment {} but the network has {k} arms",
                s.treatment
            )));
        }
        let (out, cache) = net.forward(&s.x)?;
        let pi = prescribe(&out);

        total += cfg.mu * if pi == s.treatment { s.outcome } else { out[pi] };
        let residual = s.outcome - out[s.treatment];
        total += (1.0 - cfg.mu) * residual * residual;

        let mut out_grad = vec![0.0; k];
        if pi != s.treatment {
            out_grad[pi] += cfg.mu;
        }
        out_grad[s.treatment] += -2.0 * (1.0 - cfg.mu) * residual;
        net.backward_into(&cache, &out_grad, &mut grads)?;
    }
    Ok((total, grads))
}
