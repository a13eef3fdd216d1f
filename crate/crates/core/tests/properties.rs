use examforge_core::agent_runtime::{decode_frame, encode_frame, Message};
use examforge_core::assessment::{
    irt_probability, irt_slope, total_difficulty, weighted_difficulty, within_tolerance, FeatureRatings,
    FeatureWeights, IrtParams,
};
use examforge_core::generation::{allocate_counts, allocation_ratios};
use examforge_core::kg_store::{export_graph, import_graph, KnowledgeGraph, NodeId, SubjectId};
use examforge_core::psychometrics::{item_statistics, one_way_anova, two_way_anova, ResponseMatrix};
use examforge_core::ranking::{pagerank, PageRankConfig};
use examforge_core::Parallelism;
use proptest::prelude::*;
use serde_json::Value;

fn ratings() -> impl Strategy<Value = [u8; 7]> {
    prop::array::uniform7(1u8..=3)
}

fn weights() -> impl Strategy<Value = [f64; 7]> {
    prop::array::uniform7(0.0f64..3.0)
}

fn edge_list() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (1usize..30).prop_flat_map(|n| (Just(n), prop::collection::vec((0..n, 0..n), 0..120)))
}

fn graph_from(edges: &[(usize, usize)], order: &[usize]) -> KnowledgeGraph {
    let mut g = KnowledgeGraph::new(SubjectId::new("prop").unwrap());
    for &i in order {
        g.upsert_entity(&format!("v{i}"), examforge_core::kg_store::NodeKind::Text).unwrap();
    }
    for (k, &(u, v)) in edges.iter().enumerate() {
        if u != v {
            g.assert_fact_triple(&format!("v{u}"), &format!("r{k}"), &format!("v{v}")).unwrap();
        }
    }
    g
}

fn by_label(g: &KnowledgeGraph, scores: &std::collections::BTreeMap<NodeId, f64>) -> Vec<(String, f64)> {
    let mut v: Vec<_> = scores.iter().map(|(id, s)| (g.node(id).unwrap().label.clone(), *s)).collect();
    v.sort_by(|a, b| a.0.cmp(&b.0));
    v
}

fn json_value() -> impl Strategy<Value = Value> {
    let leaf = prop_oneof![
        Just(Value::Null),
        any::<bool>().prop_map(Value::from),
        any::<i64>().prop_map(Value::from),
        any::<u64>().prop_map(Value::from),
        prop::num::f64::NORMAL.prop_map(Value::from),
        ".{0,12}".prop_map(Value::from),
    ];
    leaf.prop_recursive(3, 24, 4, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..4).prop_map(Value::Array),
            prop::collection::btree_map(".{0,6}", inner, 0..4).prop_map(|m| Value::Object(m.into_iter().collect())),
        ]
    })
}

fn response_matrix() -> impl Strategy<Value = ResponseMatrix> {
    (4usize..40, 1usize..12).prop_flat_map(|(n, k)| {
        prop::collection::vec(prop::collection::vec(any::<bool>(), k), n).prop_map(move |rows| {
            ResponseMatrix::new(
                (0..n).map(|i| format!("s{i:02}")).collect(),
                (0..k).map(|j| format!("q{j}")).collect(),
                rows,
            )
            .unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn raising_one_rating_raises_difficulty(r in ratings(), w in weights(), i in 0usize..7) {
        prop_assume!(r[i] < 3);
        let mut up = r;
        up[i] += 1;
        let (lo, hi) = (FeatureRatings::new(r).unwrap(), FeatureRatings::new(up).unwrap());
        prop_assert_eq!(total_difficulty(&hi), total_difficulty(&lo) + 1);
        let w = FeatureWeights::new(w).unwrap();
        let gain = weighted_difficulty(&hi, &w).unwrap() - weighted_difficulty(&lo, &w).unwrap();
        prop_assert!((gain - w.values()[i]).abs() < 1e-12);
    }

    #[test]
    fn gate_is_symmetric(d in 0.0f64..30.0, target in 7.0f64..21.0, eps in 0.01f64..5.0) {
        prop_assert_eq!(within_tolerance(d, target, eps), within_tolerance(2.0 * target - d, target, eps));
        prop_assert_eq!(within_tolerance(d, target, eps), within_tolerance(target, d, eps));
        prop_assert!(within_tolerance(target, target, eps));
    }

    #[test]
    fn irt_stays_between_guessing_and_one(a in 0.1f64..4.0, b in -4.0f64..4.0, c in 0.0f64..0.9, theta in -8.0f64..8.0) {
        let p = IrtParams::new(a, b, c).unwrap();
        let v = irt_probability(theta, &p);
        prop_assert!(v >= c && v <= 1.0);
        prop_assert!(irt_slope(theta, &p) >= 0.0);
    }

    #[test]
    fn apportionment_is_exact((counts, total) in (prop::collection::vec(0u64..100, 1..15), 0u64..500)) {
        prop_assume!(counts.iter().any(|&c| c > 0));
        let alpha = allocation_ratios(&counts).unwrap();
        let alloc = allocate_counts(&alpha, total).unwrap();
        prop_assert_eq!(alloc.iter().sum::<u64>(), total);
        for (c, a) in alloc.iter().zip(&alpha) {
            prop_assert!((*c as f64 - a * total as f64).abs() < 1.0);
        }
    }

    #[test]
    fn pagerank_invariants((n, edges) in edge_list(), seed in any::<u64>()) {
        let order: Vec<usize> = (0..n).collect();
        let g = graph_from(&edges, &order);
        let cfg = PageRankConfig { parallelism: Parallelism::Sequential, ..Default::default() };
        let seq = pagerank(&g, &cfg).unwrap();
        prop_assert!(seq.converged);
        let par = pagerank(&g, &PageRankConfig { parallelism: Parallelism::Parallel, ..cfg }).unwrap();
        prop_assert_eq!(&seq.scores, &par.scores);

        let d = cfg.damping;
        for s in seq.scores.values() {
            prop_assert!(*s >= 1.0 - d - 1e-12);
        }
        // mass balance at the fixed point: sum = n(1-d) + d * (mass held by nodes with out-links)
        let held: f64 = seq.scores.iter().filter(|(id, _)| g.out_edges(id).next().is_some()).map(|(_, s)| s).sum();
        let total: f64 = seq.scores.values().sum();
        prop_assert!((total - (n as f64 * (1.0 - d) + d * held)).abs() < 1e-6);

        // insertion order does not matter
        let mut shuffled = order.clone();
        let mut x = seed;
        for i in (1..shuffled.len()).rev() {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(i, (x >> 33) as usize % (i + 1));
        }
        let g2 = graph_from(&edges, &shuffled);
        let again = pagerank(&g2, &cfg).unwrap();
        for ((la, sa), (lb, sb)) in by_label(&g, &seq.scores).iter().zip(by_label(&g2, &again.scores)) {
            prop_assert_eq!(la, &lb);
            prop_assert!((sa - sb).abs() < 1e-9);
        }
    }

    #[test]
    fn snapshot_round_trip_is_stable((n, edges) in edge_list()) {
        let g = graph_from(&edges, &(0..n).collect::<Vec<_>>());
        let bytes = export_graph(&g);
        let back = import_graph(&bytes[..]).unwrap();
        prop_assert_eq!(export_graph(&back), bytes);
        prop_assert_eq!((back.node_count(), back.edge_count()), (g.node_count(), g.edge_count()));
    }

    #[test]
    fn item_statistics_bounds_and_modes(m in response_matrix()) {
        let seq = item_statistics(&m, 0.25, Parallelism::Sequential).unwrap();
        let par = item_statistics(&m, 0.25, Parallelism::Parallel).unwrap();
        prop_assert_eq!(&seq, &par);
        for s in &seq {
            prop_assert!((0.0..=1.0).contains(&s.p_value));
            prop_assert!((-1.0..=1.0).contains(&s.discrimination));
        }
    }

    #[test]
    fn item_statistics_follow_item_permutation(m in response_matrix()) {
        let k = m.item_count();
        let n = m.participant_count();
        let rows: Vec<Vec<bool>> = (0..n).map(|p| (0..k).rev().map(|i| m.response(p, i)).collect()).collect();
        let reversed = ResponseMatrix::new(m.participants().to_vec(), m.items().iter().rev().cloned().collect(), rows).unwrap();
        let mut a = item_statistics(&m, 0.25, Parallelism::Sequential).unwrap();
        let b = item_statistics(&reversed, 0.25, Parallelism::Sequential).unwrap();
        a.reverse();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn one_way_ss_conservation_and_invariance(
        groups in prop::collection::vec(prop::collection::vec(-100.0f64..100.0, 2..15), 2..6),
        shift in -50.0f64..50.0,
        scale in 0.1f64..10.0,
    ) {
        let r = one_way_anova(&groups).unwrap();
        prop_assert!((r.ss_between + r.ss_within - r.ss_total).abs() <= 1e-9 * r.ss_total.max(1.0));
        prop_assume!(!r.degenerate);
        let moved: Vec<Vec<f64>> = groups.iter().map(|g| g.iter().map(|x| x * scale + shift).collect()).collect();
        let r2 = one_way_anova(&moved).unwrap();
        prop_assert!((r.f - r2.f).abs() <= 1e-6 * r.f.max(1.0));
    }

    #[test]
    fn two_way_ss_conservation(
        (a, b, n, xs) in (2usize..5, 2usize..5, 2usize..6)
            .prop_flat_map(|(a, b, n)| (Just(a), Just(b), Just(n), prop::collection::vec(-10.0f64..10.0, a * b * n))),
    ) {
        let cells: Vec<Vec<Vec<f64>>> = xs.chunks(b * n).map(|row| row.chunks(n).map(<[f64]>::to_vec).collect()).collect();
        prop_assert_eq!(cells.len(), a);
        let r = two_way_anova(&cells).unwrap();
        let parts = r.factor_a.ss + r.factor_b.ss + r.interaction.ss + r.residual.ss;
        prop_assert!((parts - r.ss_total).abs() <= 1e-9 * r.ss_total.max(1.0));
        prop_assert_eq!(r.factor_a.df + r.factor_b.df + r.interaction.df + r.residual.df, r.df_total);
    }

    #[test]
    fn codec_round_trip(topic in "[a-z]{1,8}(/[a-z0-9_-]{1,8}){0,3}", corr in ".{0,16}", sender in ".{1,10}", seq in any::<u64>(), payload in json_value()) {
        let m = Message { topic, correlation_id: corr, sender, seq, payload };
        let frame = encode_frame(&m).unwrap();
        let back = decode_frame(&frame).unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(encode_frame(&back).unwrap(), frame);
    }
}
