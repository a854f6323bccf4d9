//! Synthetic corpus with a known context structure.
//!
//! Every pattern is a small heavy-atom core. Molecules are the core plus a few
//! single-bonded carbons, placed in space with rough bond lengths. Bond
//! orders do not show up in the geometry, so a distance-only encoder cannot
//! tell apart cores that differ only in bond orders, and the per-pattern
//! offset is never visible at all: it has to be read off the context.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use molgraph::{
    classify_ood, embed_positions, Atom, Bond, BondOrder, LabeledGraph, Molecule, OodClass, CARBON, NITROGEN, OXYGEN,
};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::contexts::{pattern_rng, sample_contexts};
use crate::gspan::canonical_code;
use crate::io::{write_contexts, write_patterns, MiningError};
use crate::{ContextSequence, Pattern};

/// Label model: per-element and per-bond energies plus a latent offset per
/// pattern, all in eV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTaskSpec {
    pub atom_energy: BTreeMap<u8, f64>,
    /// single, double, triple, aromatic
    pub bond_energy: [f64; 4],
    /// Offsets are drawn as ±U(1, 2) × `offset_scale`.
    pub offset_scale: f64,
    /// Explicit offsets, one per pattern, overriding the random draw.
    pub offsets: Option<Vec<f64>>,
    pub noise: f64,
}

impl Default for SyntheticTaskSpec {
    fn default() -> Self {
        SyntheticTaskSpec {
            atom_energy: BTreeMap::from([(CARBON, -0.25), (NITROGEN, -0.35), (OXYGEN, -0.45)]),
            bond_energy: [-0.15, -0.35, -0.6, -0.25],
            offset_scale: 0.5,
            offsets: None,
            noise: 0.01,
        }
    }
}

impl SyntheticTaskSpec {
    pub fn energy(&self, nodes: &[u8], orders: impl IntoIterator<Item = BondOrder>) -> f64 {
        let atoms: f64 = nodes.iter().map(|z| self.atom_energy.get(z).copied().unwrap_or(0.0)).sum();
        let bonds: f64 = orders.into_iter().map(|o| self.bond_energy[o.code() as usize - 1]).sum();
        atoms + bonds
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub n_patterns: usize,
    pub molecules_per_pattern: usize,
    /// Patterns carrying the ester motif (validation split).
    pub n_ester: usize,
    /// Patterns carrying an N–O bond (held out for evaluation).
    pub n_oxime: usize,
    pub max_extra_carbons: usize,
    pub bond_length: f64,
    pub jitter: f64,
    pub k: usize,
    pub max_contexts_per_pattern: usize,
    /// Every molecule gets exactly this many extra carbons when set.
    pub fixed_extra_carbons: Option<usize>,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_patterns: 40,
            molecules_per_pattern: 120,
            n_ester: 4,
            n_oxime: 6,
            max_extra_carbons: 6,
            bond_length: 1.5,
            jitter: 0.1,
            k: 10,
            max_contexts_per_pattern: 15,
            fixed_extra_carbons: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPattern {
    pub pattern: Pattern,
    pub class: OodClass,
    pub offset: f64,
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub molecules: Vec<Molecule>,
    pub patterns: Vec<SyntheticPattern>,
    /// Contexts per split, indexed like [`OodClass::ALL`].
    pub contexts: [Vec<ContextSequence>; 3],
    pub spec: SyntheticTaskSpec,
}

impl SyntheticCorpus {
    pub fn holdout_ids(&self) -> Vec<String> {
        self.pattern_ids(OodClass::Oxime)
    }

    pub fn pattern_ids(&self, class: OodClass) -> Vec<String> {
        self.patterns.iter().filter(|p| p.class == class).map(|p| p.pattern.id.clone()).collect()
    }

    /// Writes dataset.jsonl, patterns.jsonl, contexts_{base,ester,oxime}.jsonl,
    /// holdout.json and task.json into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<(), MiningError> {
        std::fs::create_dir_all(dir).map_err(|source| MiningError::Io { path: dir.to_path_buf(), source })?;
        let ds = dir.join("dataset.jsonl");
        let io = |source| MiningError::Io { path: ds.clone(), source };
        let f = std::io::BufWriter::new(std::fs::File::create(&ds).map_err(io)?);
        molgraph::write_dataset(f, &self.molecules).map_err(io)?;
        let pats: Vec<Pattern> = self.patterns.iter().map(|p| p.pattern.clone()).collect();
        write_patterns(dir.join("patterns.jsonl"), &pats)?;
        for (class, ctxs) in OodClass::ALL.iter().zip(&self.contexts) {
            write_contexts(dir.join(format!("contexts_{}.jsonl", class.name())), ctxs)?;
        }
        let holdout = serde_json::json!({
            "holdout": self.holdout_ids(),
            "validation": self.pattern_ids(OodClass::Ester),
            "train": self.pattern_ids(OodClass::Base),
        });
        write_json(&dir.join("holdout.json"), &holdout)?;
        let offsets: BTreeMap<&str, f64> = self.patterns.iter().map(|p| (p.pattern.id.as_str(), p.offset)).collect();
        let task = serde_json::json!({ "spec": self.spec, "offsets": offsets });
        write_json(&dir.join("task.json"), &task)
    }
}

fn write_json(path: &Path, v: &serde_json::Value) -> Result<(), MiningError> {
    let text = serde_json::to_string_pretty(v).expect("json value serializes");
    std::fs::write(path, text + "\n").map_err(|source| MiningError::Io { path: path.to_path_buf(), source })
}

fn max_valence(z: u8) -> u8 {
    match z {
        CARBON => 4,
        NITROGEN => 3,
        OXYGEN => 2,
        _ => 1,
    }
}

#[derive(Debug, Clone)]
struct Skeleton {
    nodes: Vec<u8>,
    edges: Vec<(usize, usize, BondOrder)>,
}

impl Skeleton {
    fn used(&self, v: usize) -> u8 {
        self.edges
            .iter()
            .filter(|e| e.0 == v || e.1 == v)
            .map(|e| e.2.code())
            .sum()
    }

    fn free(&self, v: usize) -> u8 {
        max_valence(self.nodes[v]).saturating_sub(self.used(v))
    }

    fn attach<R: Rng + ?Sized>(&mut self, z: u8, max_order: u8, rng: &mut R) -> bool {
        let open: Vec<usize> = (0..self.nodes.len()).filter(|&v| self.free(v) > 0).collect();
        let Some(&parent) = open.choose(rng) else { return false };
        let cap = self.free(parent).min(max_valence(z)).min(max_order);
        let order = BondOrder::from_code(rng.random_range(1..=cap)).expect("order in 1..=3");
        self.nodes.push(z);
        self.edges.push((parent, self.nodes.len() - 1, order));
        true
    }

    fn graph(&self) -> LabeledGraph {
        LabeledGraph::new("", self.nodes.clone(), self.edges.clone())
    }

    fn has_bond(&self, a: u8, b: u8, order: Option<BondOrder>) -> bool {
        self.edges.iter().any(|&(i, j, o)| {
            let (x, y) = (self.nodes[i], self.nodes[j]);
            ((x, y) == (a, b) || (x, y) == (b, a)) && order.is_none_or(|want| want == o)
        })
    }

    /// A carbon with both a double-bonded and a single-bonded oxygen.
    fn has_acid_motif(&self) -> bool {
        (0..self.nodes.len()).filter(|&v| self.nodes[v] == CARBON).any(|c| {
            let around = |order| {
                self.edges.iter().any(|&(i, j, o)| {
                    o == order && ((i == c && self.nodes[j] == OXYGEN) || (j == c && self.nodes[i] == OXYGEN))
                })
            };
            around(BondOrder::Double) && around(BondOrder::Single)
        })
    }
}

fn random_core<R: Rng + ?Sized>(class: OodClass, rng: &mut R) -> Skeleton {
    const ELEMENTS: [u8; 3] = [CARBON, NITROGEN, OXYGEN];
    loop {
        let mut s = match class {
            OodClass::Ester => Skeleton {
                nodes: vec![CARBON, OXYGEN, OXYGEN, CARBON],
                edges: vec![(0, 1, BondOrder::Double), (0, 2, BondOrder::Single), (2, 3, BondOrder::Single)],
            },
            _ => Skeleton {
                nodes: vec![*ELEMENTS.choose(rng).expect("nonempty")],
                edges: Vec::new(),
            },
        };
        let target = match class {
            OodClass::Ester => 5,
            _ => rng.random_range(2..=4),
        };
        while s.nodes.len() < target {
            let z = match class {
                OodClass::Ester => *[NITROGEN, OXYGEN].choose(rng).expect("nonempty"),
                _ => *ELEMENTS.choose(rng).expect("nonempty"),
            };
            if !s.attach(z, 3, rng) {
                break;
            }
        }
        let g = s.graph();
        let n_o = s.has_bond(NITROGEN, OXYGEN, None);
        let ok = g.node_count() >= 2
            && g.non_carbon_count() >= 1
            && g.carbon_count() <= 2
            && (0..s.nodes.len()).any(|v| s.free(v) > 0)
            && match class {
                OodClass::Base => !n_o && !s.has_acid_motif(),
                OodClass::Ester => !n_o,
                OodClass::Oxime => n_o,
            };
        if ok {
            return s;
        }
    }
}

fn distinct_cores<R: Rng + ?Sized>(class: OodClass, n: usize, seen: &mut HashSet<Vec<crate::DfsEdge>>, rng: &mut R) -> Vec<Skeleton> {
    let mut out = Vec::new();
    let mut attempts = 0;
    while out.len() < n {
        attempts += 1;
        assert!(attempts < 100_000, "cannot find {n} distinct {} cores", class.name());
        let s = random_core(class, rng);
        if seen.insert(canonical_code(&s.graph())) {
            out.push(s);
        }
    }
    out
}

/// Builds the corpus in memory. Pattern ids are `S000`, `S001`, ...: base
/// patterns first, then ester, then oxime.
pub fn gen_synthetic(cfg: &SyntheticConfig, spec: &SyntheticTaskSpec, seed: u64) -> Result<SyntheticCorpus, MiningError> {
    if cfg.n_patterns < 2 {
        return Err(MiningError::Invalid("need at least 2 patterns".into()));
    }
    if cfg.n_ester + cfg.n_oxime > cfg.n_patterns {
        return Err(MiningError::Invalid("ester + oxime patterns exceed the total".into()));
    }
    if let Some(o) = &spec.offsets {
        if o.len() != cfg.n_patterns {
            return Err(MiningError::Invalid(format!("{} offsets for {} patterns", o.len(), cfg.n_patterns)));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_base = cfg.n_patterns - cfg.n_ester - cfg.n_oxime;
    let mut seen = HashSet::new();
    let mut cores = Vec::new();
    for (class, n) in [(OodClass::Base, n_base), (OodClass::Ester, cfg.n_ester), (OodClass::Oxime, cfg.n_oxime)] {
        cores.extend(distinct_cores(class, n, &mut seen, &mut rng).into_iter().map(|s| (class, s)));
    }

    let noise = Normal::new(0.0, spec.noise.max(0.0)).expect("finite noise");
    let mut molecules = Vec::new();
    let mut patterns = Vec::new();
    let mut contexts: [Vec<ContextSequence>; 3] = Default::default();
    for (pi, (class, core)) in cores.into_iter().enumerate() {
        let id = format!("S{pi:03}");
        let offset = match &spec.offsets {
            Some(o) => o[pi],
            None => {
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                sign * rng.random_range(1.0..=2.0) * spec.offset_scale
            }
        };
        let mut ids = Vec::with_capacity(cfg.molecules_per_pattern);
        for j in 0..cfg.molecules_per_pattern {
            let mut s = core.clone();
            let extra = cfg.fixed_extra_carbons.unwrap_or_else(|| rng.random_range(0..=cfg.max_extra_carbons));
            for _ in 0..extra {
                s.attach(CARBON, 1, &mut rng);
            }
            let pairs: Vec<(usize, usize)> = s.edges.iter().map(|e| (e.0, e.1)).collect();
            let pos = embed_positions(s.nodes.len(), &pairs, cfg.bond_length, cfg.jitter, &mut rng);
            let eps = if spec.noise > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            let label = spec.energy(&s.nodes, s.edges.iter().map(|e| e.2)) + offset + eps;
            let mid = format!("{id}-{j:04}");
            let atoms = s.nodes.iter().zip(pos).map(|(&element, position)| Atom { element, position }).collect();
            let bonds = s.edges.iter().map(|&(i, j, order)| Bond { i, j, order }).collect();
            let m = Molecule::new(mid.clone(), atoms, bonds, label)
                .map_err(|e| MiningError::Invalid(format!("generated molecule rejected: {e}")))?;
            debug_assert_eq!(classify_ood(&m), class);
            molecules.push(m);
            ids.push(mid);
        }
        let mut crng = pattern_rng(seed, pi as u64);
        contexts[class as usize].extend(sample_contexts(&id, ids.clone(), cfg.k, cfg.max_contexts_per_pattern, &mut crng));
        patterns.push(SyntheticPattern {
            pattern: Pattern {
                graph: core.graph().with_id(id.clone()),
                id,
                support: ids,
            },
            class,
            offset,
        });
    }
    Ok(SyntheticCorpus {
        molecules,
        patterns,
        contexts,
        spec: spec.clone(),
    })
}
