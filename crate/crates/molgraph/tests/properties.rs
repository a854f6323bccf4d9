use molgraph::{
    classify_ood, fixtures, heavy_graph, partition_ood, subgraph_match, write_dataset, parse_dataset, BondOrder,
    LabeledGraph, MatchMode, OodClass,
};
use proptest::prelude::*;

/// Counts label-preserving injective maps by trying every assignment.
fn brute_force_embeddings(p: &LabeledGraph, t: &LabeledGraph) -> usize {
    fn go(p: &LabeledGraph, t: &LabeledGraph, k: usize, map: &mut Vec<usize>, used: &mut Vec<bool>) -> usize {
        if k == p.node_count() {
            let ok = p.edges().iter().all(|&(i, j, o)| t.edge_label(map[i], map[j]) == Some(o));
            return ok as usize;
        }
        let mut n = 0;
        for v in 0..t.node_count() {
            if used[v] || t.label(v) != p.label(k) {
                continue;
            }
            used[v] = true;
            map.push(v);
            n += go(p, t, k + 1, map, used);
            map.pop();
            used[v] = false;
        }
        n
    }
    if p.node_count() > t.node_count() {
        return 0;
    }
    go(p, t, 0, &mut Vec::new(), &mut vec![false; t.node_count()])
}

fn random_graph(max_nodes: usize, labels: &'static [u8]) -> impl Strategy<Value = LabeledGraph> {
    (1..=max_nodes).prop_flat_map(move |n| {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let np = pairs.len();
        (
            prop::collection::vec(prop::sample::select(labels), n),
            prop::collection::vec(prop::option::weighted(0.35, 1u8..=2), np),
        )
            .prop_map(move |(nodes, present)| {
                let edges = pairs
                    .iter()
                    .zip(present)
                    .filter_map(|(&(i, j), o)| o.map(|o| (i, j, BondOrder::from_code(o).unwrap())))
                    .collect();
                LabeledGraph::new("g", nodes, edges)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn matcher_agrees_with_brute_force(
        p in random_graph(4, &[6, 8]),
        t in random_graph(8, &[6, 8]),
    ) {
        let expected = brute_force_embeddings(&p, &t);
        prop_assert_eq!(subgraph_match(&p, &t, MatchMode::Exists).found(), expected > 0);
        prop_assert_eq!(subgraph_match(&p, &t, MatchMode::Count).count(), expected);
    }

    #[test]
    fn every_reported_embedding_is_valid(p in random_graph(3, &[6, 7, 8]), t in random_graph(7, &[6, 7, 8])) {
        if let molgraph::Matches::All(embs) = subgraph_match(&p, &t, MatchMode::All) {
            for e in embs {
                let mut seen = e.clone();
                seen.sort();
                seen.dedup();
                prop_assert_eq!(seen.len(), e.len());
                for (i, &v) in e.iter().enumerate() {
                    prop_assert_eq!(p.label(i), t.label(v));
                }
                for &(i, j, o) in p.edges() {
                    prop_assert_eq!(t.edge_label(e[i], e[j]), Some(o));
                }
            }
        }
    }

    #[test]
    fn stripping_hydrogens_is_idempotent(g in random_graph(8, &[1, 6, 8])) {
        let once = g.without_hydrogens();
        prop_assert!(once.node_count() <= g.node_count());
        prop_assert_eq!(once.without_hydrogens(), once.clone());
        prop_assert!(once.nodes().iter().all(|&z| z != 1));
    }
}

fn corpus() -> Vec<molgraph::Molecule> {
    vec![
        fixtures::propane(),
        fixtures::methyl_acetate(),
        fixtures::acetaldoxime(),
        fixtures::methylhydroxylamine(),
        fixtures::ester_oxime(),
        fixtures::ethanol(),
        fixtures::benzene(),
        fixtures::acetic_acid(),
    ]
}

#[test]
fn partition_is_exact_and_disjoint() {
    let mols = corpus();
    let parts = partition_ood(&mols);
    assert_eq!(parts.iter().map(Vec::len).sum::<usize>(), mols.len());
    let ids = |v: &Vec<molgraph::Molecule>| v.iter().map(|m| m.id().to_string()).collect::<std::collections::HashSet<_>>();
    let (b, e, o) = (ids(&parts[0]), ids(&parts[1]), ids(&parts[2]));
    assert!(b.is_disjoint(&e) && b.is_disjoint(&o) && e.is_disjoint(&o));
    for (k, class) in OodClass::ALL.iter().enumerate() {
        assert!(parts[k].iter().all(|m| classify_ood(m) == *class));
    }
    assert!(o.contains("ester_oxime"));
}

#[test]
fn dataset_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mols.jsonl");
    let mols = corpus();
    write_dataset(std::fs::File::create(&path).unwrap(), &mols).unwrap();
    let back = parse_dataset(&path).unwrap();
    assert_eq!(back, mols);
    assert_eq!(heavy_graph(&back[1]).unwrap().node_count(), 5);
}

#[test]
fn missing_file_names_the_path() {
    let err = parse_dataset("/nonexistent/x.jsonl").unwrap_err();
    assert!(err.to_string().contains("/nonexistent/x.jsonl"));
}
