use std::collections::VecDeque;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::{Atom, Bond, BondOrder, MolError, Molecule, HYDROGEN};

fn standard_valence(z: u8) -> f64 {
    match z {
        1 | 9 | 17 => 1.0,
        8 | 16 => 2.0,
        7 => 3.0,
        _ => 4.0,
    }
}

fn unit_vector<R: Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-3 && n <= 1.0 {
            return [v[0] / n, v[1] / n, v[2] / n];
        }
    }
}

/// Random spatial embedding that follows the bond graph breadth-first. Each
/// new atom sits `bond_length ± jitter` from its parent, in the sampled
/// direction that keeps it farthest from atoms already placed. Ring-closure
/// bonds are not length-constrained. Components are spaced 10 Å apart.
pub fn embed_positions<R: Rng + ?Sized>(
    n_atoms: usize,
    bonds: &[(usize, usize)],
    bond_length: f64,
    jitter: f64,
    rng: &mut R,
) -> Vec<[f64; 3]> {
    let mut adj = vec![Vec::new(); n_atoms];
    for &(i, j) in bonds {
        adj[i].push(j);
        adj[j].push(i);
    }
    let mut pos: Vec<Option<[f64; 3]>> = vec![None; n_atoms];
    let mut component = 0.0;
    for root in 0..n_atoms {
        if pos[root].is_some() {
            continue;
        }
        pos[root] = Some([component * 10.0, 0.0, 0.0]);
        component += 1.0;
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            let pu = pos[u].expect("placed");
            for &v in &adj[u] {
                if pos[v].is_some() {
                    continue;
                }
                let len = bond_length + if jitter > 0.0 { rng.random_range(-jitter..=jitter) } else { 0.0 };
                let mut best = None;
                let mut best_gap = f64::NEG_INFINITY;
                for _ in 0..24 {
                    let d = unit_vector(rng);
                    let cand = [pu[0] + len * d[0], pu[1] + len * d[1], pu[2] + len * d[2]];
                    let gap = pos
                        .iter()
                        .flatten()
                        .map(|p| ((p[0] - cand[0]).powi(2) + (p[1] - cand[1]).powi(2) + (p[2] - cand[2]).powi(2)).sqrt())
                        .fold(f64::INFINITY, f64::min);
                    if gap > best_gap {
                        best_gap = gap;
                        best = Some(cand);
                    }
                }
                pos[v] = best;
                queue.push_back(v);
            }
        }
    }
    pos.into_iter().map(|p| p.expect("every atom placed")).collect()
}

/// Incremental molecule construction from a heavy-atom skeleton.
#[derive(Debug, Clone, Default)]
pub struct MoleculeBuilder {
    elements: Vec<u8>,
    bonds: Vec<Bond>,
}

impl MoleculeBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn atom(&mut self, z: u8) -> usize {
        self.elements.push(z);
        self.elements.len() - 1
    }

    pub fn bond(&mut self, i: usize, j: usize, order: BondOrder) -> &mut Self {
        self.bonds.push(Bond { i, j, order });
        self
    }

    /// Caps every atom with hydrogens up to its standard valence.
    pub fn add_hydrogens(&mut self) -> &mut Self {
        let n = self.elements.len();
        let mut used = vec![0.0; n];
        for b in &self.bonds {
            used[b.i] += b.order.valence();
            used[b.j] += b.order.valence();
        }
        for i in 0..n {
            if self.elements[i] == HYDROGEN {
                continue;
            }
            let free = (standard_valence(self.elements[i]) - used[i]).floor().max(0.0) as usize;
            for _ in 0..free {
                let h = self.atom(HYDROGEN);
                self.bonds.push(Bond { i, j: h, order: BondOrder::Single });
            }
        }
        self
    }

    pub fn build<R: Rng + ?Sized>(&self, id: &str, label_u0: f64, rng: &mut R) -> Result<Molecule, MolError> {
        let pairs: Vec<(usize, usize)> = self.bonds.iter().map(|b| (b.i, b.j)).collect();
        let pos = embed_positions(self.elements.len(), &pairs, 1.5, 0.0, rng);
        let atoms = self
            .elements
            .iter()
            .zip(pos)
            .map(|(&element, position)| Atom { element, position })
            .collect();
        Molecule::new(id, atoms, self.bonds.clone(), label_u0)
    }
}

/// Small reference molecules with explicit hydrogens and arbitrary geometry.
pub mod fixtures {
    use super::*;
    use crate::{CARBON as C, NITROGEN as N, OXYGEN as O};
    use BondOrder::{Aromatic, Double, Single};

    fn finish(b: &mut MoleculeBuilder, id: &str) -> Molecule {
        let mut rng = StdRng::seed_from_u64(id.bytes().fold(0u64, |h, c| h.wrapping_mul(31).wrapping_add(c as u64)));
        b.add_hydrogens().build(id, 0.0, &mut rng).expect("fixture is valid")
    }

    fn chain(id: &str, atoms: &[u8], orders: &[BondOrder]) -> Molecule {
        let mut b = MoleculeBuilder::new();
        let ix: Vec<usize> = atoms.iter().map(|&z| b.atom(z)).collect();
        for (k, &o) in orders.iter().enumerate() {
            b.bond(ix[k], ix[k + 1], o);
        }
        finish(&mut b, id)
    }

    fn ring(id: &str, n: usize, order: BondOrder) -> Molecule {
        let mut b = MoleculeBuilder::new();
        let ix: Vec<usize> = (0..n).map(|_| b.atom(C)).collect();
        for k in 0..n {
            b.bond(ix[k], ix[(k + 1) % n], order);
        }
        finish(&mut b, id)
    }

    pub fn methane() -> Molecule {
        chain("methane", &[C], &[])
    }

    pub fn hydrogen_molecule() -> Molecule {
        let mut b = MoleculeBuilder::new();
        let (h1, h2) = (b.atom(HYDROGEN), b.atom(HYDROGEN));
        b.bond(h1, h2, Single);
        b.build("dihydrogen", 0.0, &mut StdRng::seed_from_u64(0)).expect("valid")
    }

    pub fn propane() -> Molecule {
        chain("propane", &[C, C, C], &[Single, Single])
    }

    pub fn methanol() -> Molecule {
        chain("methanol", &[C, O], &[Single])
    }

    pub fn ethanol() -> Molecule {
        chain("ethanol", &[C, C, O], &[Single, Single])
    }

    pub fn dimethyl_ether() -> Molecule {
        chain("dimethyl_ether", &[C, O, C], &[Single, Single])
    }

    pub fn benzene() -> Molecule {
        ring("benzene", 6, Aromatic)
    }

    pub fn cyclohexane() -> Molecule {
        ring("cyclohexane", 6, Single)
    }

    /// CH3–C(=O)–O–CH3
    pub fn methyl_acetate() -> Molecule {
        let mut b = MoleculeBuilder::new();
        let (c1, c2, o1, o2, c3) = (b.atom(C), b.atom(C), b.atom(O), b.atom(O), b.atom(C));
        b.bond(c1, c2, Single).bond(c2, o1, Double).bond(c2, o2, Single).bond(o2, c3, Single);
        finish(&mut b, "methyl_acetate")
    }

    /// CH3–C(=O)–OH
    pub fn acetic_acid() -> Molecule {
        let mut b = MoleculeBuilder::new();
        let (c1, c2, o1, o2) = (b.atom(C), b.atom(C), b.atom(O), b.atom(O));
        b.bond(c1, c2, Single).bond(c2, o1, Double).bond(c2, o2, Single);
        finish(&mut b, "acetic_acid")
    }

    /// CH3–CH=N–OH
    pub fn acetaldoxime() -> Molecule {
        chain("acetaldoxime", &[C, C, N, O], &[Single, Double, Single])
    }

    /// CH3–NH–OH, an N–O single bond without an oxime group.
    pub fn methylhydroxylamine() -> Molecule {
        chain("methylhydroxylamine", &[C, N, O], &[Single, Single])
    }

    /// CH3–O–C(=O)–CH=N–OH: carries both an ester group and an N–O bond.
    pub fn ester_oxime() -> Molecule {
        let mut b = MoleculeBuilder::new();
        let (c1, o1, c2, o2, c3, n, o3) = (b.atom(C), b.atom(O), b.atom(C), b.atom(O), b.atom(C), b.atom(N), b.atom(O));
        b.bond(c1, o1, Single)
            .bond(o1, c2, Single)
            .bond(c2, o2, Double)
            .bond(c2, c3, Single)
            .bond(c3, n, Double)
            .bond(n, o3, Single);
        finish(&mut b, "ester_oxime")
    }
}
