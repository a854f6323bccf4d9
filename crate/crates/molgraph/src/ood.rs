use serde::{Deserialize, Serialize};

use crate::{subgraph_match, BondOrder, LabeledGraph, MatchMode, Molecule, CARBON, NITROGEN, OXYGEN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OodClass {
    Base,
    Ester,
    Oxime,
}

impl OodClass {
    pub const ALL: [OodClass; 3] = [OodClass::Base, OodClass::Ester, OodClass::Oxime];

    pub fn name(self) -> &'static str {
        match self {
            OodClass::Base => "base",
            OodClass::Ester => "ester",
            OodClass::Oxime => "oxime",
        }
    }
}

/// C(=O)–O–C: carbonyl carbon 0, carbonyl oxygen 1, ether oxygen 2, carbon 3.
pub fn ester_pattern() -> LabeledGraph {
    LabeledGraph::new(
        "ester",
        vec![CARBON, OXYGEN, OXYGEN, CARBON],
        vec![
            (0, 1, BondOrder::Double),
            (0, 2, BondOrder::Single),
            (2, 3, BondOrder::Single),
        ],
    )
}

/// Any N–O bond wins over an ester match.
pub fn classify_ood(m: &Molecule) -> OodClass {
    let atoms = m.atoms();
    let has_n_o = m.bonds().iter().any(|b| {
        let (a, c) = (atoms[b.i].element, atoms[b.j].element);
        (a == NITROGEN && c == OXYGEN) || (a == OXYGEN && c == NITROGEN)
    });
    if has_n_o {
        return OodClass::Oxime;
    }
    let heavy = LabeledGraph::from_molecule(m).without_hydrogens();
    if subgraph_match(&ester_pattern(), &heavy, MatchMode::Exists).found() {
        OodClass::Ester
    } else {
        OodClass::Base
    }
}

/// Splits molecules into base / ester / oxime, preserving input order.
pub fn partition_ood(mols: &[Molecule]) -> [Vec<Molecule>; 3] {
    let mut out: [Vec<Molecule>; 3] = Default::default();
    for m in mols {
        out[classify_ood(m) as usize].push(m.clone());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn reference_molecules() {
        assert_eq!(classify_ood(&fixtures::acetaldoxime()), OodClass::Oxime);
        assert_eq!(classify_ood(&fixtures::methyl_acetate()), OodClass::Ester);
        assert_eq!(classify_ood(&fixtures::methylhydroxylamine()), OodClass::Oxime);
        assert_eq!(classify_ood(&fixtures::propane()), OodClass::Base);
        assert_eq!(classify_ood(&fixtures::acetic_acid()), OodClass::Base);
    }

    #[test]
    fn n_o_bond_takes_precedence_over_ester() {
        let m = fixtures::ester_oxime();
        let heavy = LabeledGraph::from_molecule(&m).without_hydrogens();
        assert!(subgraph_match(&ester_pattern(), &heavy, MatchMode::Exists).found());
        assert_eq!(classify_ood(&m), OodClass::Oxime);
    }
}
