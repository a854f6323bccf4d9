//! Molecular graphs: the dataset model, JSON-lines ingestion, heavy-atom
//! labeled graphs, VF2-style subgraph matching and out-of-distribution
//! classification (ester / N–O containing molecules).

mod builder;
mod error;
mod graph;
mod matching;
mod molecule;
mod ood;

pub use builder::{embed_positions, fixtures, MoleculeBuilder};
pub use error::MolError;
pub use graph::{heavy_graph, LabeledGraph};
pub use matching::{subgraph_match, MatchMode, Matches};
pub use molecule::{parse_dataset, read_dataset, write_dataset, Atom, Bond, BondOrder, Molecule};
pub use ood::{classify_ood, ester_pattern, partition_ood, OodClass};

pub const HYDROGEN: u8 = 1;
pub const CARBON: u8 = 6;
pub const NITROGEN: u8 = 7;
pub const OXYGEN: u8 = 8;
