mod common;

use proptest::prelude::*;
use relnet::graph::{
    avg_path_length, clustering_coefficient, cross_density, modularity, parse_edge_list,
    write_edge_list, Graph, GraphMetrics,
};

#[test]
fn bfs_path_lengths_match_floyd_warshall() {
    let mut checked = 0;
    for seed in 0..40u64 {
        let n = 2 + (seed as usize % 7);
        let g = common::random_graph(n, 0.55, seed);
        match (avg_path_length(&g), common::oracle_avg_path(&g)) {
            (Ok(ours), Some(oracle)) => {
                assert!((ours - oracle).abs() < 1e-12, "seed {seed}: {ours} vs {oracle}");
                checked += 1;
            }
            (Err(_), None) => {}
            (ours, oracle) => panic!("seed {seed}: {ours:?} vs {oracle:?}"),
        }
    }
    assert!(checked >= 10, "only {checked} connected samples");
}

#[test]
fn clustering_matches_pair_enumeration() {
    for seed in 0..20u64 {
        let g = common::random_graph(12, 0.4, 100 + seed);
        let ours = clustering_coefficient(&g);
        assert!((ours - common::oracle_clustering(&g)).abs() < 1e-12, "seed {seed}");
    }
}

#[test]
fn modularity_matches_pairwise_sum() {
    let two_triangles = Graph::from_edge_pairs(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]).unwrap();
    let labels = [0, 0, 0, 1, 1, 1];
    assert_eq!(modularity(&two_triangles, &labels).unwrap(), 0.5);
    assert!((common::oracle_modularity(&two_triangles, &labels) - 0.5).abs() < 1e-15);

    for seed in 0..20u64 {
        let g = common::random_graph(10, 0.35, 200 + seed);
        if g.edge_count() == 0 {
            continue;
        }
        let labels: Vec<usize> = (0..10).map(|i| (i * 7 + seed as usize) % 3).collect();
        let ours = modularity(&g, &labels).unwrap();
        let oracle = common::oracle_modularity(&g, &labels);
        assert!((ours - oracle).abs() < 1e-12, "seed {seed}: {ours} vs {oracle}");
    }
}

#[test]
fn spec_examples() {
    let path = Graph::from_edge_pairs(3, [(0, 1), (1, 2)]).unwrap();
    assert!((avg_path_length(&path).unwrap() - 4.0 / 3.0).abs() < 1e-15);
    let cycle = Graph::from_edge_pairs(6, (0..6).map(|i| (i, (i + 1) % 6))).unwrap();
    assert!((avg_path_length(&cycle).unwrap() - 1.8).abs() < 1e-15);
    assert_eq!(common::oracle_avg_path(&cycle), Some(1.8));

    let split = Graph::from_edge_pairs(7, (0..3).flat_map(|a| (3..7).map(move |b| (a, b))).take(6))
        .unwrap()
        .with_communities(vec![0, 0, 0, 1, 1, 1, 1])
        .unwrap();
    assert_eq!(cross_density(&split).unwrap(), 0.5);
}

fn arb_graph() -> impl Strategy<Value = Graph> {
    (1usize..14).prop_flat_map(|n| {
        proptest::collection::vec((0..n, 0..n), 0..40)
            .prop_map(move |pairs| Graph::from_edge_pairs(n, pairs).unwrap())
    })
}

proptest! {
    #[test]
    fn construction_invariants(g in arb_graph()) {
        prop_assert!(g.check_invariants().is_ok());
        let degree_sum: usize = g.degrees().iter().sum();
        prop_assert_eq!(degree_sum, 2 * g.edge_count());
    }

    #[test]
    fn largest_component_is_idempotent_and_connected(g in arb_graph()) {
        let lc = g.largest_component();
        prop_assert!(lc.is_connected());
        prop_assert!(lc.check_invariants().is_ok());
        prop_assert_eq!(lc.largest_component(), lc.clone());
        let biggest = g.connected_components().iter().map(Vec::len).max().unwrap();
        prop_assert_eq!(lc.node_count(), biggest);
    }

    #[test]
    fn metrics_stay_in_range(g in arb_graph()) {
        let m = GraphMetrics::compute(&g);
        prop_assert!((0.0..=1.0).contains(&m.clustering));
        prop_assert!(m.giant_fraction > 0.0 && m.giant_fraction <= 1.0);
        if let Some(l) = m.avg_path_length {
            prop_assert!(l >= 1.0);
        }
        let labels: Vec<usize> = (0..g.node_count()).map(|i| i % 2).collect();
        if let Ok(q) = modularity(&g, &labels) {
            prop_assert!((-0.5 - 1e-12..=1.0).contains(&q));
        }
    }

    #[test]
    fn edge_list_round_trip(g in arb_graph()) {
        let text = write_edge_list(&g);
        let back = parse_edge_list(&text).unwrap().into_graph().unwrap();
        prop_assert_eq!(back, g);
    }
}
