use std::collections::HashMap;

use encoder::{encode_all, EncoderConfig, EncoderParams, EncodingCache};
use mining::{gen_synthetic, SyntheticConfig, SyntheticCorpus, SyntheticTaskSpec};
use numcore::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn small_encoder() -> EncoderConfig {
    EncoderConfig { n_blocks: 2, dim: 16, n_rbf: 8, ..Default::default() }
}

pub fn corpus(n_patterns: usize, per_pattern: usize, k: usize, seed: u64) -> SyntheticCorpus {
    let cfg = SyntheticConfig {
        n_patterns,
        molecules_per_pattern: per_pattern,
        n_ester: 2,
        n_oxime: 2,
        k,
        max_contexts_per_pattern: 6,
        ..Default::default()
    };
    gen_synthetic(&cfg, &SyntheticTaskSpec::default(), seed).unwrap()
}

pub fn cache_and_labels(c: &SyntheticCorpus, seed: u64) -> (EncodingCache, HashMap<String, f64>) {
    let cfg = small_encoder();
    let p = EncoderParams::<f32>::init(&cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    let enc = encode_all(&c.molecules, &p, 64).unwrap();
    let dim = cfg.output_dim();
    let data: Vec<f32> = enc.iter().flat_map(|e| e.concat()).collect();
    let cache = EncodingCache {
        ids: c.molecules.iter().map(|m| m.id().to_string()).collect(),
        encodings: Tensor::new(vec![c.molecules.len(), dim], data).unwrap(),
    };
    let labels = c.molecules.iter().map(|m| (m.id().to_string(), m.label_u0())).collect();
    (cache, labels)
}
