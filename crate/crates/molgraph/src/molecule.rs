use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::de::{self, Deserializer, Visitor};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::MolError;

/// Bond order; aromatic is its own label rather than 1.5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Valence contribution, aromatic counted as 1.5.
    pub fn valence(self) -> f64 {
        match self {
            BondOrder::Single => 1.0,
            BondOrder::Double => 2.0,
            BondOrder::Triple => 3.0,
            BondOrder::Aromatic => 1.5,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }

    pub fn from_code(c: u8) -> Option<BondOrder> {
        match c {
            1 => Some(BondOrder::Single),
            2 => Some(BondOrder::Double),
            3 => Some(BondOrder::Triple),
            4 => Some(BondOrder::Aromatic),
            _ => None,
        }
    }
}

impl Serialize for BondOrder {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            BondOrder::Aromatic => s.serialize_str("ar"),
            other => s.serialize_u8(other.code()),
        }
    }
}

impl<'de> Deserialize<'de> for BondOrder {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct OrderVisitor;

        impl Visitor<'_> for OrderVisitor {
            type Value = BondOrder;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("bond order 1, 2, 3 or \"ar\"")
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<BondOrder, E> {
                match v {
                    1..=3 => Ok(BondOrder::from_code(v as u8).expect("1..=3")),
                    _ => Err(E::custom(format!("invalid bond order {v}"))),
                }
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<BondOrder, E> {
                if v < 0 {
                    return Err(E::custom(format!("invalid bond order {v}")));
                }
                self.visit_u64(v as u64)
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<BondOrder, E> {
                match v {
                    "ar" => Ok(BondOrder::Aromatic),
                    _ => Err(E::custom(format!("invalid bond order {v:?}"))),
                }
            }
        }

        d.deserialize_any(OrderVisitor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub element: u8,
    /// Cartesian position in Å.
    pub position: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bond {
    pub i: usize,
    pub j: usize,
    pub order: BondOrder,
}

/// A labeled molecule. Construct through [`Molecule::new`], which validates.
#[derive(Debug, Clone, PartialEq)]
pub struct Molecule {
    id: String,
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    /// Atomization energy U0 in eV.
    label_u0: f64,
}

/// On-disk shape of one JSON line.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    id: String,
    atoms: Vec<(u8, [f64; 3])>,
    bonds: Vec<(usize, usize, BondOrder)>,
    label_u0: f64,
}

impl Molecule {
    pub fn new(id: impl Into<String>, atoms: Vec<Atom>, bonds: Vec<Bond>, label_u0: f64) -> Result<Self, MolError> {
        let m = Molecule {
            id: id.into(),
            atoms,
            bonds,
            label_u0,
        };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<(), MolError> {
        let fail = |msg: String| MolError::Validation { id: self.id.clone(), msg };
        if self.atoms.is_empty() {
            return Err(fail("no atoms".into()));
        }
        if let Some((k, _)) = self
            .atoms
            .iter()
            .enumerate()
            .find(|(_, a)| a.position.iter().any(|c| !c.is_finite()))
        {
            return Err(fail(format!("atom {k} has a non-finite position")));
        }
        if self.atoms.iter().any(|a| a.element == 0) {
            return Err(fail("atomic number 0".into()));
        }
        let n = self.atoms.len();
        let mut seen = HashSet::new();
        for b in &self.bonds {
            if b.i >= n || b.j >= n {
                return Err(fail(format!("bond ({}, {}) references an atom outside 0..{n}", b.i, b.j)));
            }
            if b.i == b.j {
                return Err(fail(format!("self-bond on atom {}", b.i)));
            }
            if !seen.insert((b.i.min(b.j), b.i.max(b.j))) {
                return Err(fail(format!("duplicate bond ({}, {})", b.i, b.j)));
            }
        }
        if !self.label_u0.is_finite() {
            return Err(fail("non-finite label".into()));
        }
        Ok(())
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn label_u0(&self) -> f64 {
        self.label_u0
    }

    pub fn with_label(mut self, label_u0: f64) -> Result<Self, MolError> {
        self.label_u0 = label_u0;
        self.validate()?;
        Ok(self)
    }

    pub fn with_positions(mut self, positions: &[[f64; 3]]) -> Result<Self, MolError> {
        if positions.len() != self.atoms.len() {
            return Err(MolError::Validation {
                id: self.id.clone(),
                msg: format!("{} positions for {} atoms", positions.len(), self.atoms.len()),
            });
        }
        for (a, &p) in self.atoms.iter_mut().zip(positions) {
            a.position = p;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.atoms[i].position, self.atoms[j].position);
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
    }

    pub fn to_json_line(&self) -> String {
        let r = Record {
            id: self.id.clone(),
            atoms: self.atoms.iter().map(|a| (a.element, a.position)).collect(),
            bonds: self.bonds.iter().map(|b| (b.i, b.j, b.order)).collect(),
            label_u0: self.label_u0,
        };
        serde_json::to_string(&r).expect("molecule serializes")
    }

    pub fn from_json_line(line: &str, line_no: usize) -> Result<Self, MolError> {
        let r: Record = serde_json::from_str(line).map_err(|e| MolError::Parse {
            line: line_no,
            msg: e.to_string(),
        })?;
        Molecule::new(
            r.id,
            r.atoms.into_iter().map(|(element, position)| Atom { element, position }).collect(),
            r.bonds.into_iter().map(|(i, j, order)| Bond { i, j, order }).collect(),
            r.label_u0,
        )
    }
}

/// Reads JSON-lines molecules; blank lines are skipped, line numbers are 1-based.
pub fn read_dataset<R: Read>(r: R) -> Result<Vec<Molecule>, MolError> {
    let mut out = Vec::new();
    for (k, line) in BufReader::new(r).lines().enumerate() {
        let line = line.map_err(|e| MolError::Parse {
            line: k + 1,
            msg: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(Molecule::from_json_line(&line, k + 1)?);
    }
    Ok(out)
}

pub fn parse_dataset(path: impl AsRef<Path>) -> Result<Vec<Molecule>, MolError> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|source| MolError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_dataset(f)
}

pub fn write_dataset<W: Write>(mut w: W, mols: &[Molecule]) -> std::io::Result<()> {
    for m in mols {
        writeln!(w, "{}", m.to_json_line())?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    const LINE: &str = r#"{"id":"m1","atoms":[[6,[0,0,0]],[1,[1.09,0,0]]],"bonds":[[0,1,1]],"label_u0":-17.2}"#;

    #[test]
    fn parses_documented_line() {
        let mols = read_dataset(LINE.as_bytes()).unwrap();
        assert_eq!(mols.len(), 1);
        assert_eq!(mols[0].atoms().len(), 2);
        assert_eq!(mols[0].bonds()[0].order, BondOrder::Single);
        assert_eq!(mols[0].label_u0(), -17.2);
    }

    #[test]
    fn empty_input_is_empty_list() {
        assert!(read_dataset(&b""[..]).unwrap().is_empty());
    }

    #[test]
    fn out_of_range_bond_is_a_validation_error() {
        let bad = LINE.replace("[[0,1,1]]", "[[0,5,1]]");
        match read_dataset(bad.as_bytes()) {
            Err(MolError::Validation { id, .. }) => assert_eq!(id, "m1"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let text = format!("{LINE}\n\n{{not json\n");
        match read_dataset(text.as_bytes()) {
            Err(MolError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_duplicate_and_self_bonds() {
        for bonds in ["[[0,1,1],[1,0,2]]", "[[1,1,1]]"] {
            let bad = LINE.replace("[[0,1,1]]", bonds);
            assert!(matches!(read_dataset(bad.as_bytes()), Err(MolError::Validation { .. })));
        }
    }

    #[test]
    fn aromatic_orders_round_trip() {
        let text = LINE.replace("[[0,1,1]]", r#"[[0,1,"ar"]]"#);
        let m = &read_dataset(text.as_bytes()).unwrap()[0];
        assert_eq!(m.bonds()[0].order, BondOrder::Aromatic);
        assert!(m.to_json_line().contains(r#"[0,1,"ar"]"#));
        assert!(read_dataset(LINE.replace("[[0,1,1]]", "[[0,1,5]]").as_bytes()).is_err());
    }
}
