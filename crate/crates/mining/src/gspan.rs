//! gSpan-style frequent connected subgraph mining.
//!
//! Patterns are grown by rightmost extension of DFS codes. A code is only
//! expanded when it is the minimum DFS code of the graph it describes, so every
//! isomorphism class is visited once. The minimum is built greedily: at each
//! step the smallest available extension is taken over all embeddings of the
//! current prefix, with backward edges ordered before forward edges.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet};

use molgraph::{BondOrder, LabeledGraph, CARBON};

/// Limits on emitted patterns. `max_carbons` and `max_nodes` also prune the
/// search since they can only be violated more by growing.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternConstraints {
    pub min_nodes: usize,
    pub min_non_carbons: usize,
    pub max_carbons: usize,
    pub max_nodes: Option<usize>,
}

impl Default for PatternConstraints {
    fn default() -> Self {
        PatternConstraints {
            min_nodes: 2,
            min_non_carbons: 1,
            max_carbons: 2,
            max_nodes: None,
        }
    }
}

impl PatternConstraints {
    pub fn accepts(&self, g: &LabeledGraph) -> bool {
        g.node_count() >= self.min_nodes
            && g.non_carbon_count() >= self.min_non_carbons
            && g.carbon_count() <= self.max_carbons
            && self.max_nodes.is_none_or(|m| g.node_count() <= m)
    }
}

/// A mined pattern with the ids of the graphs that contain it.
#[derive(Debug, Clone, PartialEq)]
pub struct Pattern {
    pub id: String,
    pub graph: LabeledGraph,
    pub support: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DfsEdge {
    pub from: usize,
    pub to: usize,
    pub from_label: u8,
    pub edge_label: u8,
    pub to_label: u8,
}

impl DfsEdge {
    fn is_forward(&self) -> bool {
        self.from < self.to
    }
}

/// Extension order. Variant order puts backward edges first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum ExtKey {
    Backward { to: usize, edge_label: u8 },
    Forward { from: Reverse<usize>, edge_label: u8, to_label: u8 },
}

struct MineGraph {
    labels: Vec<u8>,
    /// (neighbour, edge label, edge id)
    adj: Vec<Vec<(usize, u8, usize)>>,
}

impl MineGraph {
    fn from_labeled(g: &LabeledGraph) -> Self {
        let mut adj = vec![Vec::new(); g.node_count()];
        for (eid, &(i, j, o)) in g.edges().iter().enumerate() {
            adj[i].push((j, o.code(), eid));
            adj[j].push((i, o.code(), eid));
        }
        MineGraph {
            labels: g.nodes().to_vec(),
            adj,
        }
    }
}

#[derive(Debug, Clone)]
struct Embedding {
    graph: usize,
    nodes: Vec<usize>,
    edges: Vec<usize>,
}

fn vertex_count(code: &[DfsEdge]) -> usize {
    code.iter().map(|e| e.from.max(e.to) + 1).max().unwrap_or(0)
}

/// Rightmost path as pattern vertex ids, rightmost vertex first.
fn rightmost_path(code: &[DfsEdge]) -> Vec<usize> {
    let n = vertex_count(code);
    let mut parent = vec![usize::MAX; n];
    for e in code.iter().filter(|e| e.is_forward()) {
        parent[e.to] = e.from;
    }
    let mut path = vec![n - 1];
    let mut v = n - 1;
    while parent[v] != usize::MAX {
        v = parent[v];
        path.push(v);
    }
    path
}

fn code_labels(code: &[DfsEdge]) -> Vec<u8> {
    let mut labels = vec![0u8; vertex_count(code)];
    for e in code {
        labels[e.from] = e.from_label;
        labels[e.to] = e.to_label;
    }
    labels
}

/// All rightmost extensions of `code` over `embs`, grouped and ordered by key.
/// `allow_forward` filters forward extensions by the new vertex label.
fn extensions(
    code: &[DfsEdge],
    embs: &[Embedding],
    graphs: &[MineGraph],
    allow_forward: &dyn Fn(u8) -> bool,
) -> BTreeMap<ExtKey, Vec<Embedding>> {
    let path = rightmost_path(code);
    let rmv = path[0];
    let mut out: BTreeMap<ExtKey, Vec<Embedding>> = BTreeMap::new();
    for emb in embs {
        let g = &graphs[emb.graph];
        let owner = |node: usize| emb.nodes.iter().position(|&x| x == node);
        // backward: rightmost vertex to another rightmost-path vertex
        for &(w, el, eid) in &g.adj[emb.nodes[rmv]] {
            if emb.edges.contains(&eid) {
                continue;
            }
            if let Some(pv) = owner(w) {
                if path[1..].contains(&pv) {
                    let mut e = emb.clone();
                    e.edges.push(eid);
                    out.entry(ExtKey::Backward { to: pv, edge_label: el }).or_default().push(e);
                }
            }
        }
        // forward: any rightmost-path vertex to an unmapped node
        for &pv in &path {
            for &(w, el, eid) in &g.adj[emb.nodes[pv]] {
                if owner(w).is_some() || !allow_forward(g.labels[w]) {
                    continue;
                }
                let mut e = emb.clone();
                e.nodes.push(w);
                e.edges.push(eid);
                out.entry(ExtKey::Forward {
                    from: Reverse(pv),
                    edge_label: el,
                    to_label: g.labels[w],
                })
                .or_default()
                .push(e);
            }
        }
    }
    out
}

fn edge_for_key(code: &[DfsEdge], key: ExtKey) -> DfsEdge {
    let labels = code_labels(code);
    let n = labels.len();
    let rmv = n - 1;
    match key {
        ExtKey::Backward { to, edge_label } => DfsEdge {
            from: rmv,
            to,
            from_label: labels[rmv],
            edge_label,
            to_label: labels[to],
        },
        ExtKey::Forward { from: Reverse(from), edge_label, to_label } => DfsEdge {
            from,
            to: n,
            from_label: labels[from],
            edge_label,
            to_label,
        },
    }
}

fn initial_embeddings(graphs: &[MineGraph]) -> BTreeMap<(u8, u8, u8), Vec<Embedding>> {
    let mut out: BTreeMap<(u8, u8, u8), Vec<Embedding>> = BTreeMap::new();
    for (gi, g) in graphs.iter().enumerate() {
        for u in 0..g.labels.len() {
            for &(v, el, eid) in &g.adj[u] {
                out.entry((g.labels[u], el, g.labels[v])).or_default().push(Embedding {
                    graph: gi,
                    nodes: vec![u, v],
                    edges: vec![eid],
                });
            }
        }
    }
    out
}

/// Minimum DFS code of a connected graph with at least one edge.
pub fn canonical_code(g: &LabeledGraph) -> Vec<DfsEdge> {
    let graphs = [MineGraph::from_labeled(g)];
    let Some(((fl, el, tl), mut embs)) = initial_embeddings(&graphs).into_iter().next() else {
        return Vec::new();
    };
    let mut code = vec![DfsEdge { from: 0, to: 1, from_label: fl, edge_label: el, to_label: tl }];
    while code.len() < g.edge_count() {
        let exts = extensions(&code, &embs, &graphs, &|_| true);
        let Some((key, next)) = exts.into_iter().next() else { break };
        code.push(edge_for_key(&code, key));
        embs = next;
    }
    code
}

fn code_to_graph(code: &[DfsEdge]) -> LabeledGraph {
    let labels = code_labels(code);
    let edges = code
        .iter()
        .map(|e| (e.from, e.to, BondOrder::from_code(e.edge_label).expect("edge label is a bond order")))
        .collect();
    LabeledGraph::new("", labels, edges)
}

fn ext_key_of(e: &DfsEdge) -> ExtKey {
    if e.is_forward() {
        ExtKey::Forward { from: Reverse(e.from), edge_label: e.edge_label, to_label: e.to_label }
    } else {
        ExtKey::Backward { to: e.to, edge_label: e.edge_label }
    }
}

/// True when `code` is the minimum DFS code of the graph it spells.
fn is_min(code: &[DfsEdge]) -> bool {
    let graphs = [MineGraph::from_labeled(&code_to_graph(code))];
    let Some((first, mut embs)) = initial_embeddings(&graphs).into_iter().next() else {
        return false;
    };
    if first != (code[0].from_label, code[0].edge_label, code[0].to_label) {
        return false;
    }
    for t in 1..code.len() {
        let exts = extensions(&code[..t], &embs, &graphs, &|_| true);
        let Some((key, next)) = exts.into_iter().next() else {
            return false;
        };
        if key != ext_key_of(&code[t]) {
            return false;
        }
        embs = next;
    }
    true
}

fn support_of(embs: &[Embedding]) -> BTreeSet<usize> {
    embs.iter().map(|e| e.graph).collect()
}

struct Miner<'a> {
    graphs: Vec<MineGraph>,
    source: &'a [LabeledGraph],
    min_support: usize,
    constraints: &'a PatternConstraints,
    found: Vec<(Vec<DfsEdge>, BTreeSet<usize>)>,
}

impl Miner<'_> {
    fn grow(&mut self, code: &mut Vec<DfsEdge>, embs: Vec<Embedding>) {
        let support = support_of(&embs);
        if support.len() < self.min_support || !is_min(code) {
            return;
        }
        let graph = code_to_graph(code);
        if self.constraints.accepts(&graph) {
            self.found.push((code.clone(), support));
        }
        let n_vertices = graph.node_count();
        let carbons = graph.carbon_count();
        let room = self.constraints.max_nodes.is_none_or(|m| n_vertices < m);
        let max_c = self.constraints.max_carbons;
        let allow = move |label: u8| room && (label != CARBON || carbons < max_c);
        let exts = extensions(code, &embs, &self.graphs, &allow);
        drop(embs);
        for (key, next) in exts {
            code.push(edge_for_key(code, key));
            self.grow(code, next);
            code.pop();
        }
    }
}

/// Mines connected patterns with at least `min_support` supporting graphs,
/// using the default constraints (≥ 2 nodes, ≥ 1 non-carbon, ≤ 2 carbons).
pub fn mine_frequent(graphs: &[LabeledGraph], min_support: usize) -> Vec<Pattern> {
    mine_frequent_with(graphs, min_support, &PatternConstraints::default())
}

/// Output is ordered by canonical DFS code; ids are `P00000`, `P00001`, ...
pub fn mine_frequent_with(graphs: &[LabeledGraph], min_support: usize, constraints: &PatternConstraints) -> Vec<Pattern> {
    let min_support = min_support.max(1);
    let mut miner = Miner {
        graphs: graphs.iter().map(MineGraph::from_labeled).collect(),
        source: graphs,
        min_support,
        constraints,
        found: Vec::new(),
    };
    if constraints.max_nodes.is_some_and(|m| m < 2) {
        return Vec::new();
    }
    let initial = initial_embeddings(&miner.graphs);
    for ((fl, el, tl), embs) in initial {
        let carbons = (fl == CARBON) as usize + (tl == CARBON) as usize;
        if carbons > constraints.max_carbons {
            continue;
        }
        let mut code = vec![DfsEdge { from: 0, to: 1, from_label: fl, edge_label: el, to_label: tl }];
        miner.grow(&mut code, embs);
    }
    let source = miner.source;
    miner
        .found
        .into_iter()
        .enumerate()
        .map(|(k, (code, support))| {
            let id = format!("P{k:05}");
            Pattern {
                graph: code_to_graph(&code).with_id(id.clone()),
                id,
                support: support.into_iter().map(|g| source[g].id().to_string()).collect(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use molgraph::{fixtures, heavy_graph, OXYGEN};

    fn heavy(m: molgraph::Molecule) -> LabeledGraph {
        heavy_graph(&m).unwrap()
    }

    #[test]
    fn alcohols_and_ether_share_c_o() {
        let corpus = vec![heavy(fixtures::ethanol()), heavy(fixtures::methanol()), heavy(fixtures::dimethyl_ether())];
        let pats = mine_frequent(&corpus, 2);
        let co = pats
            .iter()
            .find(|p| p.graph.node_count() == 2 && p.graph.count_element(OXYGEN) == 1 && p.graph.carbon_count() == 1)
            .expect("C–O pattern");
        assert_eq!(co.support.len(), 3);
        // C–O–C only in dimethyl ether, C–C–O only in ethanol
        assert!(pats.iter().all(|p| p.support.len() >= 2));
    }

    #[test]
    fn alkanes_yield_nothing() {
        let corpus = vec![heavy(fixtures::propane()), heavy(fixtures::cyclohexane())];
        assert!(mine_frequent(&corpus, 2).is_empty());
    }

    #[test]
    fn single_graph_below_support() {
        assert!(mine_frequent(&[heavy(fixtures::methyl_acetate())], 2).is_empty());
    }

    #[test]
    fn canonical_code_is_labeling_independent() {
        let a = LabeledGraph::new("a", vec![6, 8, 7], vec![(0, 1, BondOrder::Single), (1, 2, BondOrder::Double)]);
        let b = LabeledGraph::new("b", vec![7, 6, 8], vec![(2, 0, BondOrder::Double), (1, 2, BondOrder::Single)]);
        assert_eq!(canonical_code(&a), canonical_code(&b));
        assert!(is_min(&canonical_code(&a)));
    }

    #[test]
    fn triangle_closure_uses_backward_edge() {
        let g = LabeledGraph::new(
            "t",
            vec![8, 8, 8],
            vec![(0, 1, BondOrder::Single), (1, 2, BondOrder::Single), (2, 0, BondOrder::Single)],
        );
        let code = canonical_code(&g);
        assert_eq!(code.len(), 3);
        assert!(!code[2].is_forward());
    }
}
