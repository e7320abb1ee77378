//! Adam with bias correction, specialized to [`Network`] parameters.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::network::{Gradients, Network};
use crate::{Error, Result};

/// First and second moment estimates plus step bookkeeping. Moments mirror
/// the network's layer shapes exactly.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<Moment>,
    v: Vec<Moment>,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    /// Running powers `beta^t`, updated each step; avoids recomputing them.
    beta1_t: f64,
    beta2_t: f64,
    t: u64,
}

#[derive(Debug, Clone)]
struct Moment {
    w: Vec<f64>,
    b: Vec<f64>,
}

impl AdamState {
    /// Standard hyperparameters: `beta1 = 0.9`, `beta2 = 0.999`,
    /// `eps = 1e-8`.
    pub fn new(net: &Network, lr: f64) -> Self {
        Self::with_hyper(net, lr, 0.9, 0.999, 1e-8)
    }

    pub fn with_hyper(net: &Network, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        let zeros = |n: &Network| {
            n.layers()
                .iter()
                .map(|l| Moment {
                    w: vec![0.0; l.weights().len()],
                    b: vec![0.0; l.bias().len()],
                })
                .collect()
        };
        AdamState {
            m: zeros(net),
            v: zeros(net),
            lr,
            beta1,
            beta2,
            eps,
            beta1_t: 1.0,
            beta2_t: 1.0,
            t: 0,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }
}

/// One Adam update over every network parameter. Rejects non-finite
/// gradients, naming the offending layer (0 = first hidden layer).
pub fn adam_step(net: &mut Network, grads: &Gradients, state: &mut AdamState) -> Result<()> {
    if grads.layers.len() != net.layers().len() || state.m.len() != net.layers().len() {
        return Err(Error::Shape {
            what: "adam gradient layers",
            expected: net.layers().len(),
            got: grads.layers.len(),
        });
    }
    for (li, g) in grads.layers.iter().enumerate() {
        if g.w.iter().chain(g.b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient { layer: li });
        }
    }

    state.t += 1;
    state.beta1_t *= state.beta1;
    state.beta2_t *= state.beta2;
    let bc1 = 1.0 - state.beta1_t;
    let bc2 = 1.0 - state.beta2_t;
    let (b1, b2, lr, eps) = (state.beta1, state.beta2, state.lr, state.eps);

    let update = |param: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *param -= lr * m_hat / (math::sqrt(v_hat) + eps);
    };

    for (li, layer) in net.layers_mut().iter_mut().enumerate() {
        let g = &grads.layers[li];
        let (ms, vs) = (&mut state.m[li], &mut state.v[li]);
        for i in 0..layer.weights.len() {
            update(&mut layer.weights[i], g.w[i], &mut ms.w[i], &mut vs.w[i]);
        }
        for i in 0..layer.bias.len() {
            update(&mut layer.bias[i], g.b[i], &mut ms.b[i], &mut vs.b[i]);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Gradients;

    fn small_net() -> Network {
        Network::new(2, &[3], 2, 1).unwrap()
    }

    #[test]
    fn first_step_moves_by_signed_learning_rate() {
        // At t = 1 the bias-corrected update is lr * g / (|g| + eps), which
        // is lr * sign(g) up to eps.
        let mut net = small_net();
        let before = net.layers()[0].weights().to_vec();
        let mut grads = Gradients::zeros(&net);
        grads.layers[0].w[0] = 0.25;
        grads.layers[0].w[1] = -3.0;
        let mut st = AdamState::new(&net, 1e-3);
        adam_step(&mut net, &grads, &mut st).unwrap();
        let after = net.layers()[0].weights();
        assert!((after[0] - (before[0] - 1e-3 * 0.25 / (0.25 + 1e-8))).abs() < 1e-15);
        assert!((after[1] - (before[1] + 1e-3 * 3.0 / (3.0 + 1e-8))).abs() < 1e-15);
        // Untouched parameters stay put when their gradient is zero.
        assert_eq!(after[2], before[2]);
        assert_eq!(st.steps_taken(), 1);
    }

    #[test]
    fn zero_gradients_leave_parameters_unchanged() {
        let mut net = small_net();
        let before = net.clone();
        let grads = Gradients::zeros(&net);
        let mut st = AdamState::new(&net, 0.1);
        for _ in 0..5 {
            adam_step(&mut net, &grads, &mut st).unwrap();
        }
        assert_eq!(net, before);
    }

    #[test]
    fn bias_correction_tracks_exact_powers() {
        let mut net = small_net();
        let mut grads = Gradients::zeros(&net);
        grads.layers[1].b[0] = 1.0;
        let mut st = AdamState::new(&net, 1e-3);
        for _ in 0..17 {
            adam_step(&mut net, &grads, &mut st).unwrap();
        }
        let mut b1p = 1.0;
        let mut b2p = 1.0;
        for _ in 0..17 {
            b1p *= 0.9;
            b2p *= 0.999;
        }
        assert!((st.beta1_t - b1p).abs() < 1e-15);
        assert!((st.beta2_t - b2p).abs() < 1e-15);
    }

    #[test]
    fn non_finite_gradient_names_the_layer() {
        let mut net = small_net();
        let mut grads = Gradients::zeros(&net);
        grads.layers[1].w[0] = f64::NAN;
        let mut st = AdamState::new(&net, 1e-3);
        assert_eq!(
            adam_step(&mut net, &grads, &mut st),
            Err(Error::NonFiniteGradient { layer: 1 })
        );
    }
}
