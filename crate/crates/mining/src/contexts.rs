use std::collections::HashMap;

use molgraph::{subgraph_match, LabeledGraph, MatchMode, CARBON};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::Pattern;

/// Ordered molecules sharing one pattern.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextSequence {
    pub pattern_id: String,
    pub molecule_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContextConfig {
    pub k: usize,
    pub max_per_pattern: usize,
    pub max_extra_carbons: usize,
    pub seed: u64,
}

impl Default for ContextConfig {
    fn default() -> Self {
        ContextConfig {
            k: 10,
            max_per_pattern: 15,
            max_extra_carbons: 6,
            seed: 0,
        }
    }
}

/// Pattern-specific RNG so sampling for one pattern does not depend on how
/// many others were processed first.
pub(crate) fn pattern_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    ChaCha8Rng::seed_from_u64(z ^ (z >> 31))
}

/// A molecule qualifies for a pattern when it contains it and every heavy
/// atom outside the embedding is one of at most `max_extra_carbons` carbons.
///
/// Embeddings preserve element labels, so the leftover composition is the
/// same for every embedding; comparing element counts is enough once one
/// embedding exists.
pub fn fits_pattern(pattern: &LabeledGraph, mol: &LabeledGraph, max_extra_carbons: usize) -> bool {
    let mut counts: HashMap<u8, isize> = HashMap::new();
    for &z in mol.nodes() {
        *counts.entry(z).or_default() += 1;
    }
    for &z in pattern.nodes() {
        *counts.entry(z).or_default() -= 1;
    }
    let extra_ok = counts.iter().all(|(&z, &c)| {
        if z == CARBON {
            (0..=max_extra_carbons as isize).contains(&c)
        } else {
            c == 0
        }
    });
    extra_ok && subgraph_match(pattern, mol, MatchMode::Exists).found()
}

/// Shuffles `candidates` and cuts them into disjoint contexts of exactly `k`.
pub(crate) fn sample_contexts(
    pattern_id: &str,
    mut candidates: Vec<String>,
    k: usize,
    max_contexts: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<ContextSequence> {
    candidates.shuffle(rng);
    candidates
        .chunks_exact(k)
        .take(max_contexts)
        .map(|c| ContextSequence {
            pattern_id: pattern_id.to_string(),
            molecule_ids: c.to_vec(),
        })
        .collect()
}

/// Draws up to `max_per_pattern` contexts per pattern without reusing a
/// molecule within the same pattern. Patterns with fewer than `k`
/// candidates contribute nothing.
pub fn build_contexts(patterns: &[Pattern], molecules: &[LabeledGraph], cfg: &ContextConfig) -> Vec<ContextSequence> {
    assert!(cfg.k >= 2, "context length must be at least 2");
    let mut out = Vec::new();
    for (pi, p) in patterns.iter().enumerate() {
        let candidates: Vec<String> = molecules
            .iter()
            .filter(|m| fits_pattern(&p.graph, m, cfg.max_extra_carbons))
            .map(|m| m.id().to_string())
            .collect();
        let mut rng = pattern_rng(cfg.seed, pi as u64);
        out.extend(sample_contexts(&p.id, candidates, cfg.k, cfg.max_per_pattern, &mut rng));
    }
    out
}

/// Re-checks a context against its pattern and the heavy graphs.
pub fn verify_context(
    ctx: &ContextSequence,
    pattern: &LabeledGraph,
    graphs: &HashMap<&str, &LabeledGraph>,
    max_extra_carbons: usize,
) -> Result<(), String> {
    let mut seen = std::collections::HashSet::new();
    for id in &ctx.molecule_ids {
        if !seen.insert(id) {
            return Err(format!("molecule `{id}` repeats in context of {}", ctx.pattern_id));
        }
        let g = graphs.get(id.as_str()).ok_or_else(|| format!("unknown molecule `{id}`"))?;
        if !fits_pattern(pattern, g, max_extra_carbons) {
            return Err(format!("molecule `{id}` does not fit pattern {}", ctx.pattern_id));
        }
    }
    Ok(())
}
