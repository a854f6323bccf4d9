//! Frequent-subgraph mining over heavy-atom graphs, context sequences built
//! from mined patterns, and a synthetic corpus with planted pattern offsets.

mod contexts;
mod gspan;
mod io;
mod synthetic;

pub use contexts::{build_contexts, fits_pattern, verify_context, ContextConfig, ContextSequence};
pub use gspan::{canonical_code, mine_frequent, mine_frequent_with, DfsEdge, Pattern, PatternConstraints};
pub use io::{read_contexts, read_jsonl, read_patterns, write_contexts, write_jsonl, write_patterns, MiningError};
pub use synthetic::{gen_synthetic, SyntheticConfig, SyntheticCorpus, SyntheticPattern, SyntheticTaskSpec};
