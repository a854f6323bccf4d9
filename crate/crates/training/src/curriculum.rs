use mining::ContextSequence;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Shape of the weights between the last ignored and first full example.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ramp {
    #[default]
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CurriculumState {
    pub step: usize,
    pub period: usize,
}

/// `(L, F)`: the last ignored and first fully weighted example index.
pub fn curriculum_bounds(step: usize, period: usize, k: usize) -> (i64, i64) {
    assert!(k >= 2 && period > 0);
    let stage = (step / period) as i64;
    let k = k as i64;
    ((-5 + stage).min(k - 2), stage.min(k - 1))
}

/// Per-example loss weights: 0 up to `L`, 1 from `F`, linear in between.
pub fn curriculum_weights(s: CurriculumState, k: usize) -> Vec<f64> {
    let (l, f) = curriculum_bounds(s.step, s.period, k);
    (0..k as i64)
        .map(|i| {
            if i <= l {
                0.0
            } else if i >= f {
                1.0
            } else {
                (i - l) as f64 / (f - l) as f64
            }
        })
        .collect()
}

/// Uniformly random reordering of the context's molecules.
pub fn shuffle_context<R: Rng + ?Sized>(c: &ContextSequence, rng: &mut R) -> ContextSequence {
    let mut out = c.clone();
    out.molecule_ids.shuffle(rng);
    out
}
