use std::collections::HashMap;

use encoder::EncodingCache;
use icl::{select, IclParams, Standardizer};
use mining::ContextSequence;
use thiserror::Error;

use crate::fit_minnorm;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("{0}")]
    Input(String),

    #[error("molecule `{0}` is missing from the encodings cache")]
    CacheMiss(String),

    #[error("selection regression needs a trained selection layer")]
    NoSelection,

    #[error(transparent)]
    Model(#[from] icl::IclError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegressionMode {
    /// Selection-layer outputs of a trained in-context model.
    SelectionRegression,
    /// The raw concatenated encoder output.
    FullRegression,
}

/// Feature rows of a context's molecules under `mode`.
pub fn context_features(
    ctx: &ContextSequence,
    cache: &EncodingCache,
    index: &HashMap<&str, usize>,
    mode: RegressionMode,
    selection: Option<(&IclParams<f64>, &Standardizer)>,
) -> Result<Vec<Vec<f64>>, BaselineError> {
    ctx.molecule_ids
        .iter()
        .map(|id| {
            let row = index.get(id.as_str()).ok_or_else(|| BaselineError::CacheMiss(id.clone()))?;
            let enc = cache.row(*row);
            match mode {
                RegressionMode::FullRegression => Ok(enc.iter().map(|&v| v as f64).collect()),
                RegressionMode::SelectionRegression => {
                    let (p, std) = selection.ok_or(BaselineError::NoSelection)?;
                    Ok(select(p, &std.encoding(enc))?)
                }
            }
        })
        .collect()
}

/// Fits on all rows but the last and predicts the last.
pub fn predict_last(features: &[Vec<f64>], labels: &[f64], ridge: f64) -> Result<f64, BaselineError> {
    let k = features.len();
    if k < 2 || labels.len() < k - 1 {
        return Err(BaselineError::Input(format!("context of {k} examples with {} labels", labels.len())));
    }
    let fit = fit_minnorm(&features[..k - 1], &labels[..k - 1], ridge)?;
    Ok(fit.predict(&features[k - 1]))
}

/// Regression readout for the last molecule of `ctx`; labels come from
/// `labels` by molecule id.
pub fn ablation_predict(
    ctx: &ContextSequence,
    mode: RegressionMode,
    cache: &EncodingCache,
    index: &HashMap<&str, usize>,
    labels: &HashMap<&str, f64>,
    selection: Option<(&IclParams<f64>, &Standardizer)>,
) -> Result<f64, BaselineError> {
    let feats = context_features(ctx, cache, index, mode, selection)?;
    let k = ctx.molecule_ids.len();
    let ys = ctx.molecule_ids[..k.saturating_sub(1)]
        .iter()
        .map(|id| labels.get(id.as_str()).copied().ok_or_else(|| BaselineError::Input(format!("no label for `{id}`"))))
        .collect::<Result<Vec<f64>, _>>()?;
    predict_last(&feats, &ys, 0.0)
}
