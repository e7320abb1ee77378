//! Polyhedral structure of a ReLU network.
//!
//! Fixing every hidden neuron's on/off bit makes the network affine, and the
//! set of inputs realizing a given bit vector is an intersection of
//! halfspaces: one per neuron, oriented by its bit. This module enumerates
//! the patterns a point set realizes, materializes the halfspace description
//! and the per-output affine maps of any pattern, and refines a region into
//! the cells where each treatment wins the argmin.
//!
//! Everything here describes the plain ReLU part of the network. Attached
//! prescription rules add input-dependent constant shifts to the outputs and
//! are handled by the tree extractor, not by the region algebra.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::network::{ActivationPattern, Network};
use crate::{Error, Result};

/// Orientation of a halfspace `omega . x + beta (sense) 0`. `Positive` means
/// strictly greater than zero, matching the strict activation convention;
/// `NonPositive` is its exact complement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Positive,
    NonPositive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Halfspace {
    pub omega: Vec<f64>,
    pub beta: f64,
    pub sense: Sense,
}

impl Halfspace {
    pub fn eval(&self, x: &[f64]) -> f64 {
        math::dot(&self.omega, x) + self.beta
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let v = self.eval(x);
        match self.sense {
            Sense::Positive => v > 0.0,
            Sense::NonPositive => v <= 0.0,
        }
    }
}

/// An affine function `omega . x + beta` of the network input.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineForm {
    pub omega: Vec<f64>,
    pub beta: f64,
}

impl AffineForm {
    pub fn eval(&self, x: &[f64]) -> f64 {
        math::dot(&self.omega, x) + self.beta
    }

    fn zero(d: usize) -> Self {
        AffineForm {
            omega: vec![0.0; d],
            beta: 0.0,
        }
    }
}

/// One linear region: the inputs whose hidden bits equal `pattern`. Inside
/// it the network is the affine map given by `outputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub pattern: ActivationPattern,
    /// One halfspace per hidden neuron, layer-major, oriented by its bit.
    pub halfspaces: Vec<Halfspace>,
    /// The K output functions valid on this region.
    pub outputs: Vec<AffineForm>,
    /// How many probe points landed here (zero when the region was built
    /// from a pattern alone).
    pub support: usize,
}

impl Region {
    /// Exact membership test against the halfspace description.
    pub fn contains(&self, x: &[f64]) -> bool {
        self.halfspaces.iter().all(|h| h.contains(x))
    }
}

/// The part of a region where one treatment is prescribed.
#[derive(Debug, Clone, PartialEq)]
pub struct TreatmentCell {
    pub treatment: usize,
    /// Pairwise-difference halfspaces added on top of the parent region's.
    pub halfspaces: Vec<Halfspace>,
}

impl TreatmentCell {
    pub fn contains(&self, x: &[f64]) -> bool {
        self.halfspaces.iter().all(|h| h.contains(x))
    }
}

/// Counts how many of `points` realize each activation pattern. The map's
/// key order (lexicographic in the bits, inactive before active) makes
/// iteration reproducible.
pub fn enumerate_patterns(
    net: &Network,
    points: &[Vec<f64>],
) -> Result<BTreeMap<ActivationPattern, usize>> {
    let mut counts = BTreeMap::new();
    for x in points {
        let (_, cache) = net.forward(x)?;
        *counts.entry(cache.pattern()).or_insert(0) += 1;
    }
    Ok(counts)
}

/// Propagates the affine forms of each layer under fixed bits: active rows
/// pass through, inactive rows are zeroed. Returns the per-layer
/// pre-activation forms and the final post-activation forms.
fn propagate_forms(net: &Network, pattern: &ActivationPattern) -> Result<(Vec<Vec<AffineForm>>, Vec<AffineForm>)> {
    if pattern.len() != net.n_hidden() {
        return Err(Error::Shape {
            what: "activation pattern",
            expected: net.n_hidden(),
            got: pattern.len(),
        });
    }
    let d = net.d();
    let mut post: Vec<AffineForm> = (0..d)
        .map(|j| {
            let mut omega = vec![0.0; d];
            omega[j] = 1.0;
            AffineForm { omega, beta: 0.0 }
        })
        .collect();
    let mut pre_per_layer = Vec::with_capacity(net.depth());
    let mut bit_cursor = 0;
    for layer in &net.layers()[..net.depth()] {
        let pre: Vec<AffineForm> = (0..layer.out_dim())
            .map(|r| compose_row(layer.row(r), layer.bias()[r], &post, d))
            .collect();
        let mut next_post = Vec::with_capacity(pre.len());
        for form in &pre {
            let bit = pattern.bits()[bit_cursor];
            bit_cursor += 1;
            next_post.push(if bit { form.clone() } else { AffineForm::zero(d) });
        }
        pre_per_layer.push(pre);
        post = next_post;
    }
    Ok((pre_per_layer, post))
}

pub(crate) fn compose_row(row: &[f64], bias: f64, inputs: &[AffineForm], d: usize) -> AffineForm {
    let mut omega = vec![0.0; d];
    let mut beta = bias;
    for (w, form) in row.iter().zip(inputs.iter()) {
        if *w == 0.0 {
            continue;
        }
        for (o, fo) in omega.iter_mut().zip(form.omega.iter()) {
            *o += w * fo;
        }
        beta += w * form.beta;
    }
    AffineForm { omega, beta }
}

/// Builds the region of a pattern: its halfspace description and the affine
/// output maps valid on it. The pattern need not be realizable; an
/// infeasible pattern simply yields an empty region.
pub fn region_halfspaces(net: &Network, pattern: &ActivationPattern) -> Result<Region> {
    let (pre_per_layer, post) = propagate_forms(net, pattern)?;
    let mut halfspaces = Vec::with_capacity(net.n_hidden());
    let mut bit_cursor = 0;
    for pre in &pre_per_layer {
        for form in pre {
            let bit = pattern.bits()[bit_cursor];
            bit_cursor += 1;
            halfspaces.push(Halfspace {
                omega: form.omega.clone(),
                beta: form.beta,
                sense: if bit { Sense::Positive } else { Sense::NonPositive },
            });
        }
    }
    let out_layer = net.output_layer();
    let outputs = (0..net.k())
        .map(|r| compose_row(out_layer.row(r), out_layer.bias()[r], &post, net.d()))
        .collect();
    Ok(Region {
        pattern: pattern.clone(),
        halfspaces,
        outputs,
        support: 0,
    })
}

/// Enumerates the regions `points` visit, with support counts filled in,
/// ordered lexicographically by pattern.
pub fn enumerate_regions(net: &Network, points: &[Vec<f64>]) -> Result<Vec<Region>> {
    let counts = enumerate_patterns(net, points)?;
    counts
        .into_iter()
        .map(|(pattern, support)| {
            let mut region = region_halfspaces(net, &pattern)?;
            region.support = support;
            Ok(region)
        })
        .collect()
}

/// Splits a region into the cells where each treatment is prescribed. Cell
/// `i` claims the inputs where output `i` is strictly below every earlier
/// output and no later output is strictly below it, mirroring the
/// lowest-index tie rule of [`crate::loss::prescribe`]. For any input the
/// pairwise comparisons are evaluated on identical affine forms with exactly
/// complementary senses, so the cells partition the region; only within
/// rounding distance of a three-way tie can the comparisons turn cyclic and
/// leave a point unclaimed.
pub fn treatment_cells(region: &Region) -> Vec<TreatmentCell> {
    let k = region.outputs.len();
    let diff = |i: usize, j: usize| -> (Vec<f64>, f64) {
        let a = &region.outputs[i];
        let b = &region.outputs[j];
        (
            a.omega.iter().zip(b.omega.iter()).map(|(x, y)| x - y).collect(),
            a.beta - b.beta,
        )
    };
    (0..k)
        .map(|i| {
            let mut halfspaces = Vec::with_capacity(k - 1);
            for j in 0..k {
                if j < i {
                    // Earlier outputs must lose strictly: f_j - f_i > 0.
                    let (omega, beta) = diff(j, i);
                    halfspaces.push(Halfspace {
                        omega,
                        beta,
                        sense: Sense::Positive,
                    });
                } else if j > i {
                    // Later outputs lose ties: f_i - f_j <= 0.
                    let (omega, beta) = diff(i, j);
                    halfspaces.push(Halfspace {
                        omega,
                        beta,
                        sense: Sense::NonPositive,
                    });
                }
            }
            TreatmentCell {
                treatment: i,
                halfspaces,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::prescribe;
    use crate::network::Layer;

    fn toy_net() -> Network {
        let hidden = Layer::from_parts(2, 2, vec![1.0, -1.0, 1.0, 1.0], vec![0.0, -0.5]).unwrap();
        let out = Layer::from_parts(2, 2, vec![-0.5, 2.0, 0.5, -1.0], vec![0.0, 0.0]).unwrap();
        Network::from_parts(2, 2, vec![hidden, out]).unwrap()
    }

    fn grid(n: usize) -> Vec<Vec<f64>> {
        let mut pts = Vec::new();
        for i in 0..n {
            for j in 0..n {
                pts.push(vec![i as f64 / (n - 1) as f64, j as f64 / (n - 1) as f64]);
            }
        }
        pts
    }

    #[test]
    fn toy_grid_realizes_all_four_patterns() {
        let net = toy_net();
        let pts = grid(41);
        let counts = enumerate_patterns(&net, &pts).unwrap();
        assert_eq!(counts.len(), 4);
        let total: usize = counts.values().sum();
        assert_eq!(total, pts.len());
        let keys: Vec<_> = counts.keys().map(|p| p.bit_string()).collect();
        assert_eq!(keys, ["00", "01", "10", "11"]);
    }

    #[test]
    fn fully_active_region_has_the_known_affine_outputs() {
        let net = toy_net();
        let pattern = ActivationPattern(vec![true, true]);
        let region = region_halfspaces(&net, &pattern).unwrap();
        // y0 = 1.5 x1 + 2.5 x2 - 1, y1 = -0.5 x1 - 1.5 x2 + 0.5
        let y0 = &region.outputs[0];
        assert!((y0.omega[0] - 1.5).abs() < 1e-12);
        assert!((y0.omega[1] - 2.5).abs() < 1e-12);
        assert!((y0.beta + 1.0).abs() < 1e-12);
        let y1 = &region.outputs[1];
        assert!((y1.omega[0] + 0.5).abs() < 1e-12);
        assert!((y1.omega[1] + 1.5).abs() < 1e-12);
        assert!((y1.beta - 0.5).abs() < 1e-12);
        // Halfspaces are the two neuron hyperplanes, both oriented positive.
        assert_eq!(region.halfspaces.len(), 2);
        assert_eq!(region.halfspaces[0].omega, vec![1.0, -1.0]);
        assert_eq!(region.halfspaces[0].sense, Sense::Positive);
        assert_eq!(region.halfspaces[1].omega, vec![1.0, 1.0]);
        assert!((region.halfspaces[1].beta + 0.5).abs() < 1e-12);
    }

    #[test]
    fn membership_matches_realized_pattern() {
        let net = toy_net();
        let pts = grid(23);
        for x in &pts {
            let p = net.activation_pattern(x).unwrap();
            let region = region_halfspaces(&net, &p).unwrap();
            assert!(region.contains(x), "point {x:?} not in its own region");
        }
    }

    #[test]
    fn region_outputs_match_forward_inside_the_region() {
        let net = toy_net();
        for x in grid(17) {
            let (out, cache) = net.forward(&x).unwrap();
            let region = region_halfspaces(&net, &cache.pattern()).unwrap();
            for (form, o) in region.outputs.iter().zip(out.iter()) {
                assert!((form.eval(&x) - o).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cells_partition_and_agree_with_prescribe() {
        let net = Network::new(3, &[5, 4], 3, 21).unwrap();
        let mut pts = Vec::new();
        for i in 0..200 {
            let t = i as f64 / 199.0;
            pts.push(vec![2.0 * t - 1.0, (3.0 * t - 1.0) % 1.0, 1.0 - 2.0 * t * t]);
        }
        for x in &pts {
            let (out, cache) = net.forward(x).unwrap();
            let region = region_halfspaces(&net, &cache.pattern()).unwrap();
            let cells = treatment_cells(&region);
            let members: Vec<usize> = cells
                .iter()
                .filter(|c| c.contains(x))
                .map(|c| c.treatment)
                .collect();
            assert_eq!(members.len(), 1, "point {x:?} in {members:?}");
            assert_eq!(members[0], prescribe(&out));
        }
    }

    #[test]
    fn enumerate_regions_fills_support() {
        let net = toy_net();
        let pts = grid(11);
        let regions = enumerate_regions(&net, &pts).unwrap();
        assert_eq!(regions.iter().map(|r| r.support).sum::<usize>(), pts.len());
        assert!(regions.windows(2).all(|w| w[0].pattern < w[1].pattern));
    }

    #[test]
    fn pattern_length_is_checked() {
        let net = toy_net();
        let bad = ActivationPattern(vec![true]);
        assert!(region_halfspaces(&net, &bad).is_err());
    }
}
