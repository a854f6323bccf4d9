use molgraph::Molecule;
use numcore::{Scalar, Tensor};

use crate::{rbf_expand, EncoderConfig};

/// Directed edges with their distance expansion, `rbf` is row-major `[E, K]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct EdgeSet {
    pub src: Vec<usize>,
    pub dst: Vec<usize>,
    pub rbf: Vec<f64>,
}

impl EdgeSet {
    fn push(&mut self, i: usize, j: usize, basis: &[f64]) {
        self.src.extend([i, j]);
        self.dst.extend([j, i]);
        self.rbf.extend_from_slice(basis);
        self.rbf.extend_from_slice(basis);
    }
}

/// Geometry-derived inputs of one molecule, computed once and reused.
#[derive(Debug, Clone, PartialEq)]
pub struct MolFeatures {
    pub(crate) species: Vec<usize>,
    pub(crate) local: EdgeSet,
    pub(crate) global: EdgeSet,
}

impl MolFeatures {
    pub fn new(m: &Molecule, cfg: &EncoderConfig) -> Self {
        let species = m.atoms().iter().map(|a| cfg.species_index(a.element)).collect();
        let mut local = EdgeSet::default();
        for b in m.bonds() {
            local.push(b.i, b.j, &rbf_expand(m.distance(b.i, b.j), cfg.n_rbf, cfg.local_cutoff));
        }
        let mut global = EdgeSet::default();
        if cfg.global_cutoff > 0.0 {
            let n = m.atoms().len();
            for i in 0..n {
                for j in i + 1..n {
                    let d = m.distance(i, j);
                    if d < cfg.global_cutoff {
                        global.push(i, j, &rbf_expand(d, cfg.n_rbf, cfg.global_cutoff));
                    }
                }
            }
        }
        MolFeatures { species, local, global }
    }

    pub fn n_atoms(&self) -> usize {
        self.species.len()
    }
}

/// Several molecules as one disconnected graph.
#[derive(Debug, Clone)]
pub struct GraphBatch<T> {
    pub(crate) species: Vec<usize>,
    pub(crate) graph_of_node: Vec<usize>,
    pub(crate) n_graphs: usize,
    pub(crate) local: (Vec<usize>, Vec<usize>, Tensor<T>),
    pub(crate) global: (Vec<usize>, Vec<usize>, Tensor<T>),
}

impl<T: Scalar> GraphBatch<T> {
    pub fn new(mols: &[&MolFeatures], n_rbf: usize) -> Self {
        let mut species = Vec::new();
        let mut graph_of_node = Vec::new();
        let mut parts: [(Vec<usize>, Vec<usize>, Vec<T>); 2] = Default::default();
        for (g, m) in mols.iter().enumerate() {
            let offset = species.len();
            species.extend_from_slice(&m.species);
            graph_of_node.extend(std::iter::repeat_n(g, m.n_atoms()));
            for (part, es) in parts.iter_mut().zip([&m.local, &m.global]) {
                part.0.extend(es.src.iter().map(|&i| i + offset));
                part.1.extend(es.dst.iter().map(|&i| i + offset));
                part.2.extend(es.rbf.iter().map(|&v| T::c(v)));
            }
        }
        let [l, g] = parts;
        let tensor = |src: &Vec<usize>, data: Vec<T>| Tensor::new(vec![src.len(), n_rbf], data).expect("rbf rows");
        GraphBatch {
            species,
            graph_of_node,
            n_graphs: mols.len(),
            local: (l.0.clone(), l.1, tensor(&l.0, l.2)),
            global: (g.0.clone(), g.1, tensor(&g.0, g.2)),
        }
    }

    pub fn n_graphs(&self) -> usize {
        self.n_graphs
    }

    pub fn n_nodes(&self) -> usize {
        self.species.len()
    }
}
