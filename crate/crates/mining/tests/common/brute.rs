//! Brute-force frequent connected subgraph enumeration, independent of the
//! DFS-code machinery in the miner.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use molgraph::{BondOrder, LabeledGraph, CARBON};

/// Isomorphism-invariant key: the lexicographically smallest
/// (labels, sorted edges) over every node permutation.
pub type Key = (Vec<u8>, Vec<(usize, usize, u8)>);

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

pub fn canonical_key(nodes: &[u8], edges: &[(usize, usize, u8)]) -> Key {
    permutations(nodes.len())
        .into_iter()
        .map(|perm| {
            // perm[old] = new
            let mut labels = vec![0u8; nodes.len()];
            for (old, &new) in perm.iter().enumerate() {
                labels[new] = nodes[old];
            }
            let mut es: Vec<(usize, usize, u8)> = edges
                .iter()
                .map(|&(i, j, o)| {
                    let (a, b) = (perm[i], perm[j]);
                    (a.min(b), a.max(b), o)
                })
                .collect();
            es.sort();
            (labels, es)
        })
        .min()
        .expect("at least one permutation")
}

pub fn key_of(g: &LabeledGraph) -> Key {
    let edges: Vec<_> = g.edges().iter().map(|&(i, j, o)| (i, j, o.code())).collect();
    canonical_key(g.nodes(), &edges)
}

/// Keys of every connected edge-induced subgraph with at most `max_nodes` nodes.
fn connected_subgraphs(g: &LabeledGraph, max_nodes: usize) -> BTreeSet<Key> {
    let edges = g.edges();
    let nodes_of = |mask: u64| -> BTreeSet<usize> {
        (0..edges.len()).filter(|e| mask >> e & 1 == 1).flat_map(|e| [edges[e].0, edges[e].1]).collect()
    };
    let mut seen: HashSet<u64> = HashSet::new();
    let mut stack: Vec<u64> = (0..edges.len()).map(|e| 1u64 << e).collect();
    let mut keys = BTreeSet::new();
    while let Some(mask) = stack.pop() {
        if !seen.insert(mask) {
            continue;
        }
        let vs = nodes_of(mask);
        let index: BTreeMap<usize, usize> = vs.iter().enumerate().map(|(k, &v)| (v, k)).collect();
        let labels: Vec<u8> = vs.iter().map(|&v| g.label(v)).collect();
        let sub: Vec<_> = (0..edges.len())
            .filter(|e| mask >> e & 1 == 1)
            .map(|e| (index[&edges[e].0], index[&edges[e].1], edges[e].2.code()))
            .collect();
        keys.insert(canonical_key(&labels, &sub));
        for e in 0..edges.len() {
            if mask >> e & 1 == 1 {
                continue;
            }
            let (a, b, _) = edges[e];
            let touches = vs.contains(&a) || vs.contains(&b);
            let grows = !(vs.contains(&a) && vs.contains(&b));
            if touches && vs.len() + grows as usize <= max_nodes {
                stack.push(mask | 1 << e);
            }
        }
    }
    keys
}

/// Frequent patterns with ≥ 2 nodes, ≥ 1 non-carbon and ≤ 2 carbons.
pub fn brute_force_patterns(graphs: &[LabeledGraph], min_support: usize, max_nodes: usize) -> BTreeMap<Key, usize> {
    let mut support: BTreeMap<Key, usize> = BTreeMap::new();
    for g in graphs {
        for k in connected_subgraphs(g, max_nodes) {
            *support.entry(k).or_default() += 1;
        }
    }
    support
        .into_iter()
        .filter(|((labels, _), s)| {
            let c = labels.iter().filter(|&&z| z == CARBON).count();
            *s >= min_support && labels.len() >= 2 && c < labels.len() && c <= 2
        })
        .collect()
}

pub fn random_corpus<R: rand::Rng>(rng: &mut R, max_graphs: usize, max_nodes: usize) -> Vec<LabeledGraph> {
    const LABELS: [u8; 3] = [6, 7, 8];
    let n_graphs = rng.random_range(2..=max_graphs);
    (0..n_graphs)
        .map(|gi| {
            let n = rng.random_range(1..=max_nodes);
            let nodes: Vec<u8> = (0..n).map(|_| LABELS[rng.random_range(0..3)]).collect();
            let mut edges = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    if rng.random_bool(0.3) {
                        let o = if rng.random_bool(0.7) { BondOrder::Single } else { BondOrder::Double };
                        edges.push((i, j, o));
                    }
                }
            }
            LabeledGraph::new(format!("g{gi}"), nodes, edges)
        })
        .collect()
}
