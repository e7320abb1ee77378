//! Property tests for the algebraic invariants the crate is built on:
//! region forms replay the network exactly, treatment cells partition each
//! region, decision rules are shift invariant, masking and pruning keep
//! their contracts, and extracted trees stay well formed and faithful.

use prescript_core::{
    adam_step, extract_tree, magnitude_mask, prescribe, region_halfspaces, treatment_cells,
    tree_predict, AdamState, ExtractMode, Gradients, Network,
};
use proptest::prelude::*;

fn small_net() -> impl Strategy<Value = Network> {
    (1usize..4, 1usize..4, 0usize..4, 2usize..5, any::<u64>()).prop_map(
        |(d, w1, w2, k, seed)| {
            let widths = if w2 == 0 { vec![w1] } else { vec![w1, w2] };
            Network::new(d, &widths, k, seed).unwrap()
        },
    )
}

fn point(d: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-2.0f64..2.0, d)
}

fn net_and_point() -> impl Strategy<Value = (Network, Vec<f64>)> {
    small_net().prop_flat_map(|net| {
        let d = net.d();
        (Just(net), point(d))
    })
}

/// Smallest absolute pre-activation and output difference at `x`; properties
/// that compare signs across different evaluation orders only fire when this
/// is comfortably nonzero.
fn margin(net: &Network, x: &[f64]) -> f64 {
    let (out, cache) = net.forward(x).unwrap();
    let mut m = f64::INFINITY;
    for pre in cache.pre_activations() {
        for &z in pre {
            m = m.min(z.abs());
        }
    }
    for i in 0..out.len() {
        for j in i + 1..out.len() {
            m = m.min((out[i] - out[j]).abs());
        }
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn region_forms_replay_the_forward_pass((net, x) in net_and_point()) {
        prop_assume!(margin(&net, &x) > 1e-6);
        let (out, cache) = net.forward(&x).unwrap();
        let region = region_halfspaces(&net, &cache.pattern()).unwrap();
        prop_assert!(region.contains(&x));
        for (form, o) in region.outputs.iter().zip(out.iter()) {
            prop_assert!((form.eval(&x) - o).abs() < 1e-9);
        }
    }

    #[test]
    fn exactly_one_treatment_cell_claims_each_point((net, x) in net_and_point()) {
        prop_assume!(margin(&net, &x) > 1e-6);
        let (out, cache) = net.forward(&x).unwrap();
        let region = region_halfspaces(&net, &cache.pattern()).unwrap();
        let cells = treatment_cells(&region);
        let holders: Vec<usize> = cells
            .iter()
            .filter(|c| c.contains(&x))
            .map(|c| c.treatment)
            .collect();
        prop_assert_eq!(holders, vec![prescribe(&out)]);
    }

    #[test]
    fn prescription_ignores_a_common_shift(
        vals in proptest::collection::vec(-1e6f64..1e6, 2..6),
        shift in -1e3f64..1e3,
    ) {
        let shifted: Vec<f64> = vals.iter().map(|v| v + shift).collect();
        prop_assert_eq!(prescribe(&vals), prescribe(&shifted));
    }

    #[test]
    fn masking_keeps_one_weight_per_hidden_row(net in small_net()) {
        let mut masked = net.clone();
        magnitude_mask(&mut masked);
        for (li, layer) in masked.layers()[..masked.depth()].iter().enumerate() {
            for r in 0..layer.out_dim() {
                let row = layer.row(r);
                let orig = net.layers()[li].row(r);
                let nonzero: Vec<usize> =
                    (0..row.len()).filter(|&c| row[c] != 0.0).collect();
                prop_assert!(nonzero.len() <= 1);
                // The survivor is an entry of largest magnitude.
                if let Some(&c) = nonzero.first() {
                    prop_assert_eq!(row[c], orig[c]);
                    let best = orig.iter().map(|w| w.abs()).fold(0.0, f64::max);
                    prop_assert_eq!(orig[c].abs(), best);
                }
            }
        }
        // Output layer and all biases are untouched.
        prop_assert_eq!(masked.output_layer(), net.output_layer());
        for (a, b) in masked.layers().iter().zip(net.layers().iter()) {
            prop_assert_eq!(a.bias(), b.bias());
        }
    }

    #[test]
    fn adam_ignores_a_zero_gradient(net in small_net(), steps in 1usize..4) {
        let mut stepped = net.clone();
        let mut state = AdamState::new(&stepped, 1e-2);
        let zeros = Gradients::zeros(&stepped);
        for _ in 0..steps {
            adam_step(&mut stepped, &zeros, &mut state).unwrap();
        }
        prop_assert_eq!(stepped.layers(), net.layers());
    }

    #[test]
    fn extracted_trees_stay_well_formed_and_faithful((net, x) in net_and_point()) {
        prop_assume!(margin(&net, &x) > 1e-4);
        let tree = extract_tree(&net, ExtractMode::Exact { bounds: None }).unwrap();
        tree.check_invariants().unwrap();
        let levels = net.n_hidden() + net.k() * (net.k() - 1) / 2;
        prop_assert!(tree.max_depth() <= levels);
        let arm = prescribe(&net.predict(&x).unwrap());
        prop_assert_eq!(tree_predict(&tree, &x).unwrap(), arm);
    }

    #[test]
    fn data_driven_trees_agree_on_their_calibration_set(
        net in small_net(),
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let calibration: Vec<Vec<f64>> = (0..40)
            .map(|_| (0..net.d()).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        // Only keep calibration sets that sit clear of every boundary, so
        // routing by composed forms cannot disagree with the forward pass.
        prop_assume!(calibration.iter().all(|x| margin(&net, x) > 1e-4));
        let tree = extract_tree(&net, ExtractMode::DataDriven { calibration: &calibration })
            .unwrap();
        tree.check_invariants().unwrap();
        for x in &calibration {
            let arm = prescribe(&net.predict(x).unwrap());
            prop_assert_eq!(tree_predict(&tree, x).unwrap(), arm);
        }
    }
}
