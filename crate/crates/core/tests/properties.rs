use ndarray::Array2;
use proptest::prelude::*;
use skipnas_core::analysis::{architecture_depth, smoothness_distance, wl_distinguish_iteration, WlVerdict};
use skipnas_core::autodiff::{Tape, TrainMask};
use skipnas_core::data::{build_batch, GraphRecord};
use skipnas_core::ops::{AggregationKind, Dropout, MergeKind, ReadoutKind};
use skipnas_core::search::repair_architecture;
use skipnas_core::supernet::{gumbel_weights, Architecture, Mode, Provenance, SuperNet, SuperNetConfig, Variant};

fn graph() -> impl Strategy<Value = (usize, Vec<(usize, usize)>, Vec<f64>)> {
    (1usize..8).prop_flat_map(|n| {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
        let m = pairs.len();
        (
            Just(n),
            proptest::sample::subsequence(pairs, 0..=m),
            proptest::collection::vec(-1.0f64..1.0, n * 3),
        )
    })
}

fn relabel(n: usize, edges: &[(usize, usize)], x: &[f64], perm: &[usize]) -> GraphRecord {
    let e: Vec<(usize, usize)> = edges.iter().map(|&(u, v)| (perm[u], perm[v])).collect();
    let mut feats = Array2::zeros((n, 3));
    for u in 0..n {
        for c in 0..3 {
            feats[[perm[u], c]] = x[u * 3 + c];
        }
    }
    GraphRecord::new(n, e, feats, 0).unwrap()
}

fn permuted(n: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..n).collect::<Vec<usize>>()).prop_shuffle()
}

fn arbitrary_arch(variant: Variant, b: usize, c: usize, bits: &[bool]) -> Architecture {
    let mut arch = Architecture::empty(variant, b, c, MergeKind::Sum, ReadoutKind::Gsum, Provenance::new("proptest"));
    for (conn, &on) in arch.connections.iter_mut().zip(bits.iter().cycle()) {
        conn.2 = on;
    }
    arch
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gumbel_weights_form_a_distribution(
        alpha in proptest::collection::vec(0.01f64..10.0, 2..8),
        seed_noise in proptest::collection::vec(-3.0f64..6.0, 8),
        temperature in 0.05f64..5.0,
    ) {
        let noise = &seed_noise[..alpha.len()];
        let w = gumbel_weights(&alpha, temperature, noise).unwrap();
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(w.iter().all(|&p| (0.0..=1.0).contains(&p)));
    }

    #[test]
    fn repair_is_idempotent_and_leaves_no_orphans(
        shape in prop_oneof![
            Just((Variant::Full, 6, 1)),
            Just((Variant::Repeat, 4, 2)),
            Just((Variant::Diverse, 3, 3)),
        ],
        bits in proptest::collection::vec(any::<bool>(), 1..64),
    ) {
        let (variant, b, c) = shape;
        let once = repair_architecture(arbitrary_arch(variant, b, c, &bits));
        prop_assert_eq!(&repair_architecture(once.clone()), &once);
        let layout = once.layout();
        let inc = once.incoming();
        for op in 1..layout.sink() {
            prop_assert!(inc.get(&op).is_some_and(|v| !v.is_empty()), "op {} has no input", op);
            prop_assert!(once.connections.iter().any(|&(s, _, on)| on && s == op), "op {} has no output", op);
        }
        prop_assert!(architecture_depth(&once) >= 1);
    }

    #[test]
    fn smoothness_ignores_row_scale(
        rows in proptest::collection::vec(proptest::collection::vec(0.01f64..1.0, 4), 2..10),
        scales in proptest::collection::vec(0.1f64..50.0, 10),
    ) {
        let n = rows.len();
        let h = Array2::from_shape_fn((n, 4), |(i, j)| rows[i][j]);
        let scaled = Array2::from_shape_fn((n, 4), |(i, j)| rows[i][j] * scales[i]);
        let d = smoothness_distance(&h).unwrap();
        prop_assert!((d - smoothness_distance(&scaled).unwrap()).abs() < 1e-12);
        prop_assert!(d >= 0.0);
    }

    #[test]
    fn wl_cannot_separate_a_relabeling(
        (n, edges, x, perm) in graph().prop_flat_map(|(n, e, x)| (Just(n), Just(e), Just(x), permuted(n))),
    ) {
        let id: Vec<usize> = (0..n).collect();
        let g = relabel(n, &edges, &x, &id);
        let h = relabel(n, &edges, &x, &perm);
        prop_assert_eq!(wl_distinguish_iteration(&g, &h, 6), WlVerdict::Indistinguishable);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn discrete_logits_are_node_permutation_invariant(
        (n, edges, x, perm) in graph().prop_flat_map(|(n, e, x)| (Just(n), Just(e), Just(x), permuted(n))),
        bits in proptest::collection::vec(any::<bool>(), 1..32),
        readout in proptest::sample::select(vec![
            ReadoutKind::Gmean, ReadoutKind::Gmax, ReadoutKind::Gsum,
            ReadoutKind::Gatt, ReadoutKind::Set2set, ReadoutKind::Mema,
        ]),
        merge in proptest::sample::select(MergeKind::ALL.to_vec()),
        gin in any::<bool>(),
        seed in 0u64..1000,
    ) {
        let aggregation = if gin { AggregationKind::Gin } else { AggregationKind::Gcn };
        let (net, store) = SuperNet::build(SuperNetConfig {
            hidden: 6,
            seed,
            aggregation,
            ..SuperNetConfig::full(4, 3, 2)
        })
        .unwrap();
        let mut arch = repair_architecture(arbitrary_arch(Variant::Full, 4, 1, &bits));
        for op in arch.layout().merge_ops() {
            arch.set_merge(op, merge).unwrap();
        }
        arch.readout = readout;

        let logits = |g: &GraphRecord| {
            let batch = build_batch(std::slice::from_ref(g), &[0]).unwrap();
            let tape = Tape::new(TrainMask::Frozen);
            let out = net.forward(&tape, &store, &batch, Mode::Discrete(&arch), &mut Dropout::disabled()).unwrap();
            let v: Array2<f64> = (*out.logits.value()).clone();
            v
        };
        let id: Vec<usize> = (0..n).collect();
        let a = logits(&relabel(n, &edges, &x, &id));
        let b = logits(&relabel(n, &edges, &x, &perm));
        for (p, q) in a.iter().zip(&b) {
            prop_assert!((p - q).abs() < 1e-9, "{} vs {}", p, q);
        }
    }
}
