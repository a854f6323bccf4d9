use std::ops::ControlFlow;

use crate::{BondOrder, LabeledGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchMode {
    /// Stop at the first embedding.
    Exists,
    Count,
    All,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Matches {
    Exists(bool),
    Count(usize),
    /// Each embedding maps pattern node `i` to target node `emb[i]`.
    All(Vec<Vec<usize>>),
}

impl Matches {
    pub fn found(&self) -> bool {
        match self {
            Matches::Exists(b) => *b,
            Matches::Count(n) => *n > 0,
            Matches::All(v) => !v.is_empty(),
        }
    }

    pub fn count(&self) -> usize {
        match self {
            Matches::Exists(b) => *b as usize,
            Matches::Count(n) => *n,
            Matches::All(v) => v.len(),
        }
    }
}

/// One step of the matching order: the pattern node placed at this depth and
/// its edges to nodes placed earlier.
struct Step {
    node: usize,
    back: Vec<(usize, BondOrder)>,
}

/// Connectivity-first order: each next node maximizes its number of already
/// ordered neighbours, then its degree.
fn matching_order(p: &LabeledGraph) -> Vec<Step> {
    let n = p.node_count();
    let mut placed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for _ in 0..n {
        let next = (0..n)
            .filter(|&u| !placed[u])
            .max_by_key(|&u| {
                let links = p.neighbors(u).iter().filter(|(w, _)| placed[*w]).count();
                (links, p.degree(u), std::cmp::Reverse(u))
            })
            .expect("unplaced node remains");
        placed[next] = true;
        order.push(next);
    }
    let mut pos = vec![usize::MAX; n];
    for (k, &u) in order.iter().enumerate() {
        pos[u] = k;
    }
    order
        .iter()
        .enumerate()
        .map(|(k, &u)| Step {
            node: u,
            back: p
                .neighbors(u)
                .iter()
                .filter(|(w, _)| pos[*w] < k)
                .map(|&(w, o)| (w, o))
                .collect(),
        })
        .collect()
}

struct Matcher<'a> {
    p: &'a LabeledGraph,
    t: &'a LabeledGraph,
    steps: Vec<Step>,
    map: Vec<usize>,
    used: Vec<bool>,
}

impl Matcher<'_> {
    fn feasible(&self, step: &Step, v: usize) -> bool {
        !self.used[v]
            && self.t.label(v) == self.p.label(step.node)
            && self.t.degree(v) >= self.p.degree(step.node)
            && step
                .back
                .iter()
                .all(|&(w, o)| self.t.edge_label(self.map[w], v) == Some(o))
    }

    fn search(&mut self, depth: usize, visit: &mut dyn FnMut(&[usize]) -> ControlFlow<()>) -> ControlFlow<()> {
        if depth == self.steps.len() {
            return visit(&self.map);
        }
        let step = &self.steps[depth];
        // Candidates come from the neighbourhood of an already-mapped neighbour
        // when there is one.
        let candidates: Vec<usize> = match step.back.first() {
            Some(&(w, _)) => self.t.neighbors(self.map[w]).iter().map(|&(v, _)| v).collect(),
            None => (0..self.t.node_count()).collect(),
        };
        for v in candidates {
            if !self.feasible(&self.steps[depth], v) {
                continue;
            }
            let u = self.steps[depth].node;
            self.map[u] = v;
            self.used[v] = true;
            let flow = self.search(depth + 1, visit);
            self.used[v] = false;
            self.map[u] = usize::MAX;
            flow?;
        }
        ControlFlow::Continue(())
    }
}

/// Label-preserving subgraph monomorphisms of `pattern` into `target`: every
/// pattern edge must map onto a target edge with the same bond order, extra
/// target edges are allowed.
pub fn subgraph_match(pattern: &LabeledGraph, target: &LabeledGraph, mode: MatchMode) -> Matches {
    let mut all = Vec::new();
    let mut count = 0usize;
    if pattern.node_count() <= target.node_count() {
        let mut m = Matcher {
            p: pattern,
            t: target,
            steps: matching_order(pattern),
            map: vec![usize::MAX; pattern.node_count()],
            used: vec![false; target.node_count()],
        };
        let _ = m.search(0, &mut |emb| {
            count += 1;
            match mode {
                MatchMode::Exists => ControlFlow::Break(()),
                MatchMode::Count => ControlFlow::Continue(()),
                MatchMode::All => {
                    all.push(emb.to_vec());
                    ControlFlow::Continue(())
                }
            }
        });
    }
    match mode {
        MatchMode::Exists => Matches::Exists(count > 0),
        MatchMode::Count => Matches::Count(count),
        MatchMode::All => Matches::All(all),
    }
}
