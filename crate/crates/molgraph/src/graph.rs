use crate::{BondOrder, MolError, Molecule, CARBON, HYDROGEN};

/// Undirected graph with element-labeled nodes and bond-order-labeled edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledGraph {
    id: String,
    nodes: Vec<u8>,
    edges: Vec<(usize, usize, BondOrder)>,
    adj: Vec<Vec<(usize, BondOrder)>>,
}

impl LabeledGraph {
    /// Builds a graph; edges must reference valid, distinct nodes.
    pub fn new(id: impl Into<String>, nodes: Vec<u8>, edges: Vec<(usize, usize, BondOrder)>) -> Self {
        let mut adj = vec![Vec::new(); nodes.len()];
        for &(i, j, o) in &edges {
            assert!(i < nodes.len() && j < nodes.len() && i != j, "edge ({i}, {j}) invalid for {} nodes", nodes.len());
            adj[i].push((j, o));
            adj[j].push((i, o));
        }
        LabeledGraph {
            id: id.into(),
            nodes,
            edges,
            adj,
        }
    }

    /// Full graph of a molecule, hydrogens included.
    pub fn from_molecule(m: &Molecule) -> Self {
        LabeledGraph::new(
            m.id(),
            m.atoms().iter().map(|a| a.element).collect(),
            m.bonds().iter().map(|b| (b.i, b.j, b.order)).collect(),
        )
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn nodes(&self) -> &[u8] {
        &self.nodes
    }

    pub fn edges(&self) -> &[(usize, usize, BondOrder)] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn label(&self, v: usize) -> u8 {
        self.nodes[v]
    }

    pub fn neighbors(&self, v: usize) -> &[(usize, BondOrder)] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn edge_label(&self, u: usize, v: usize) -> Option<BondOrder> {
        self.adj[u].iter().find(|(w, _)| *w == v).map(|&(_, o)| o)
    }

    pub fn count_element(&self, z: u8) -> usize {
        self.nodes.iter().filter(|&&n| n == z).count()
    }

    pub fn carbon_count(&self) -> usize {
        self.count_element(CARBON)
    }

    pub fn non_carbon_count(&self) -> usize {
        self.nodes.len() - self.carbon_count()
    }

    pub fn is_connected(&self) -> bool {
        if self.nodes.is_empty() {
            return true;
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &(w, _) in &self.adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// Drops hydrogen nodes and re-indexes the rest densely, preserving order.
    pub fn without_hydrogens(&self) -> LabeledGraph {
        let mut remap = vec![usize::MAX; self.nodes.len()];
        let mut nodes = Vec::new();
        for (i, &z) in self.nodes.iter().enumerate() {
            if z != HYDROGEN {
                remap[i] = nodes.len();
                nodes.push(z);
            }
        }
        let edges = self
            .edges
            .iter()
            .filter(|&&(i, j, _)| remap[i] != usize::MAX && remap[j] != usize::MAX)
            .map(|&(i, j, o)| (remap[i], remap[j], o))
            .collect();
        LabeledGraph::new(self.id.clone(), nodes, edges)
    }
}

/// Heavy-atom view of a molecule.
pub fn heavy_graph(m: &Molecule) -> Result<LabeledGraph, MolError> {
    let g = LabeledGraph::from_molecule(m).without_hydrogens();
    if g.node_count() == 0 {
        return Err(MolError::EmptyGraph { id: m.id().to_string() });
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn methane_is_a_single_node() {
        let g = heavy_graph(&fixtures::methane()).unwrap();
        assert_eq!(g.node_count(), 1);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn ethanol_and_benzene() {
        let g = heavy_graph(&fixtures::ethanol()).unwrap();
        assert_eq!(g.nodes(), &[6, 6, 8]);
        assert_eq!(g.edge_count(), 2);

        let g = heavy_graph(&fixtures::benzene()).unwrap();
        assert_eq!(g.node_count(), 6);
        assert_eq!(g.edge_count(), 6);
        assert!(g.edges().iter().all(|e| e.2 == BondOrder::Aromatic));
    }

    #[test]
    fn hydrogen_only_is_an_error() {
        let h2 = fixtures::hydrogen_molecule();
        assert!(matches!(heavy_graph(&h2), Err(MolError::EmptyGraph { .. })));
    }

    #[test]
    fn stripping_is_idempotent() {
        let g = heavy_graph(&fixtures::methyl_acetate()).unwrap();
        assert_eq!(g.without_hydrogens(), g);
    }
}
