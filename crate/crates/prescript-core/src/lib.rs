//! Prescriptive ReLU networks and everything needed to inspect them.
//!
//! A prescriptive network is a dense feed-forward ReLU network with one output
//! per treatment arm. Each output estimates the outcome of prescribing that
//! arm, and the network's decision for an input is the arm with the smallest
//! estimate (smaller outcomes are better, ties go to the lowest index). This
//! crate covers the full lifecycle of such models:
//!
//! * [`network`]: the model itself, with forward evaluation, activation
//!   patterns, and manual backpropagation.
//! * [`loss`]: the combined prescription/prediction objective and its exact
//!   gradient under a fixed decision.
//! * [`optim`] and [`train`]: Adam, minibatch training, magnitude masking for
//!   sparse models, and post-hoc neuron pruning.
//! * [`regions`]: enumeration of the polyhedral cells on which the network is
//!   affine, and their refinement into per-treatment cells.
//! * [`tree`]: conversion of a trained network into an oblique decision tree
//!   with identical behavior, plus a sampling-based equivalence checker.
//! * [`constraints`]: hard prescription rules enforced through large additive
//!   penalties on forbidden outputs, and feature transforms for rules over
//!   derived quantities.
//! * [`synth`]: seeded generators for a family of synthetic causal benchmarks
//!   with known counterfactuals.
//! * [`baseline`]: a regress-and-compare linear baseline and policy
//!   evaluation against counterfactual oracles.
//!
//! The crate is `no_std` (it allocates, so `alloc` is required). Everything
//! that touches files, terminals, or clocks lives in the companion crate.
//!
//! # Determinism
//!
//! Every random choice is drawn from a ChaCha generator seeded by the caller.
//! Equal seeds give bitwise-equal networks, datasets, and training runs on
//! every platform; float math goes through `libm` so results do not depend on
//! the host's libm.
//!
//! # Errors and panics
//!
//! Fallible high-level operations return [`Result`]. Panics are reserved for
//! internal index arithmetic that cannot fail unless the crate itself is
//! buggy.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod baseline;
pub mod constraints;
mod error;
pub mod loss;
mod math;
pub mod network;
pub mod optim;
pub mod regions;
pub mod synth;
pub mod train;
pub mod tree;

pub use baseline::{evaluate_policy, fit_rc_ols, EvalReport, Policy, RcLinearModel, RIDGE_LAMBDA};
pub use constraints::{
    apply_transforms, compute_big_m, filter_violating, inject_rule, FeatureTransform,
    PrescriptiveRule, TransformOp,
};
pub use error::{Error, Result};
pub use loss::{loss_and_grad, prescribe, LossConfig, Sample};
pub use network::{ActivationPattern, ForwardCache, Gradients, Layer, Network};
pub use optim::{adam_step, AdamState};
pub use regions::{
    enumerate_patterns, enumerate_regions, region_halfspaces, treatment_cells, AffineForm,
    Halfspace, Region, Sense, TreatmentCell,
};
pub use synth::{
    assign_by_score, assign_propensity, gen_features, gen_outcomes, score_propensity, DatasetSpec,
    FnMoments, OracleTable, OutcomeFn, Standardization, SyntheticDataset,
};
pub use train::{magnitude_mask, prune_neurons, train, TrainConfig, TrainReport};
pub use tree::{
    decode_pairwise, extract_tree, output_pairs, to_locally_constant, tree_predict,
    verify_equivalence, EquivalenceReport, ExtractMode, Node, ObliqueTree, PairwiseHead,
    SplitSource, BOUNDARY_TOL, MAX_EXACT_LEVELS,
};
