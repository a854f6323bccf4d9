use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use baselines::{context_features, predict_last, RegressionMode};
use encoder::{EncoderParams, EncodingCache};
use icl::{assemble_sequence, predict, IclParams, Standardizer};
use mining::ContextSequence;
use numcore::Scalar;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Readout {
    SelectionLlm,
    SelectionRegression,
    Regression,
    Encoder,
}

impl Readout {
    pub fn name(self) -> &'static str {
        match self {
            Readout::SelectionLlm => "selection+llm",
            Readout::SelectionRegression => "selection+regression",
            Readout::Regression => "regression",
            Readout::Encoder => "encoder",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub train_set: String,
    pub eval_set: String,
    pub readout: String,
    pub mae_mev: f64,
    pub n_contexts: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub version: u32,
    pub rows: Vec<EvalRow>,
}

impl Default for EvalReport {
    fn default() -> Self {
        EvalReport { version: REPORT_VERSION, rows: Vec::new() }
    }
}

impl EvalReport {
    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).map_err(|e| CliError::Data(e.to_string()))?;
        }
        if self.rows.is_empty() {
            w.write_record(["train_set", "eval_set", "readout", "mae_mev", "n_contexts"])
                .map_err(|e| CliError::Data(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Data(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.to_csv()?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    }

    pub fn table(&self) -> String {
        let mut s = format!("{:<10} {:<10} {:<22} {:>12} {:>10}\n", "train", "eval", "readout", "MAE [meV]", "contexts");
        for r in &self.rows {
            let _ = writeln!(s, "{:<10} {:<10} {:<22} {:>12.2} {:>10}", r.train_set, r.eval_set, r.readout, r.mae_mev, r.n_contexts);
        }
        s
    }
}

/// Mean absolute difference in meV; inputs are in eV.
pub fn mae_mev(pred: &[f64], truth: &[f64]) -> f64 {
    assert_eq!(pred.len(), truth.len());
    if pred.is_empty() {
        return 0.0;
    }
    pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum::<f64>() / pred.len() as f64 * 1000.0
}

fn label_of(labels: &HashMap<String, f64>, id: &str) -> Result<f64, CliError> {
    labels.get(id).copied().ok_or_else(|| CliError::Data(format!("molecule `{id}` has no label")))
}

fn row_of(index: &HashMap<&str, usize>, id: &str) -> Result<usize, CliError> {
    index.get(id).copied().ok_or_else(|| CliError::Data(format!("molecule `{id}` is missing from the encodings cache")))
}

/// Label of each context's final molecule.
pub fn last_labels(ctxs: &[ContextSequence], labels: &HashMap<String, f64>) -> Result<Vec<f64>, CliError> {
    ctxs.iter()
        .map(|c| label_of(labels, c.molecule_ids.last().ok_or_else(|| CliError::Data(format!("empty context for {}", c.pattern_id)))?))
        .collect()
}

/// In-context predictions for each context's final molecule, in eV. The
/// final label is never looked up.
pub fn llm_last_predictions<T: Scalar>(
    p: &IclParams<T>,
    std: &Standardizer,
    ctxs: &[ContextSequence],
    cache: &EncodingCache,
    labels: &HashMap<String, f64>,
) -> Result<Vec<f64>, CliError> {
    let index = cache.index();
    ctxs.par_iter()
        .map(|c| {
            let k = c.molecule_ids.len();
            let pairs = c
                .molecule_ids
                .iter()
                .enumerate()
                .map(|(i, id)| {
                    let y = if i + 1 < k { Some(label_of(labels, id)?) } else { None };
                    Ok((cache.row(row_of(&index, id)?), y))
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            let seq = assemble_sequence::<T>(&pairs, std)?;
            let preds = predict(p, &seq)?;
            Ok(std.unlabel(preds[k - 1].as_f64()))
        })
        .collect()
}

/// Mean absolute error in meV at every context position, predicting each
/// molecule from the ones before it.
pub fn position_mae<T: Scalar>(
    p: &IclParams<T>,
    std: &Standardizer,
    ctxs: &[ContextSequence],
    cache: &EncodingCache,
    labels: &HashMap<String, f64>,
) -> Result<Vec<f64>, CliError> {
    let index = cache.index();
    let errs: Vec<Vec<f64>> = ctxs
        .par_iter()
        .map(|c| {
            let ys = c.molecule_ids.iter().map(|id| label_of(labels, id)).collect::<Result<Vec<_>, _>>()?;
            let pairs = c
                .molecule_ids
                .iter()
                .zip(&ys)
                .map(|(id, &y)| Ok((cache.row(row_of(&index, id)?), Some(y))))
                .collect::<Result<Vec<_>, CliError>>()?;
            let seq = assemble_sequence::<T>(&pairs, std)?;
            let preds = predict(p, &seq)?;
            Ok(preds.iter().zip(&ys).map(|(z, y)| (std.unlabel(z.as_f64()) - y).abs()).collect())
        })
        .collect::<Result<_, CliError>>()?;
    let k = errs.iter().map(Vec::len).max().unwrap_or(0);
    Ok((0..k)
        .map(|i| {
            let col: Vec<f64> = errs.iter().filter_map(|e| e.get(i).copied()).collect();
            col.iter().sum::<f64>() / col.len() as f64 * 1000.0
        })
        .collect())
}

/// Regression readout for each context's final molecule, in eV.
///
/// Per-context mode fits on the first k−1 molecules. Pooled mode fits on
/// the first k−1 molecules of every context sharing the pattern.
pub fn regression_last_predictions(
    ctxs: &[ContextSequence],
    cache: &EncodingCache,
    labels: &HashMap<String, f64>,
    mode: RegressionMode,
    selection: Option<(&IclParams<f64>, &Standardizer)>,
    pooled: bool,
    ridge: f64,
) -> Result<Vec<f64>, CliError> {
    let index = cache.index();
    let feats: Vec<Vec<Vec<f64>>> = ctxs
        .par_iter()
        .map(|c| context_features(c, cache, &index, mode, selection).map_err(CliError::from))
        .collect::<Result<_, _>>()?;
    let heads: Vec<Vec<f64>> = ctxs
        .iter()
        .map(|c| {
            let k = c.molecule_ids.len();
            c.molecule_ids[..k.saturating_sub(1)].iter().map(|id| label_of(labels, id)).collect()
        })
        .collect::<Result<_, _>>()?;
    let mut by_pattern: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, c) in ctxs.iter().enumerate() {
        by_pattern.entry(c.pattern_id.as_str()).or_default().push(i);
    }
    (0..ctxs.len())
        .into_par_iter()
        .map(|i| {
            let k = feats[i].len();
            if k < 2 {
                return Err(CliError::Data(format!("context for {} has fewer than 2 molecules", ctxs[i].pattern_id)));
            }
            if !pooled {
                return Ok(predict_last(&feats[i], &heads[i], ridge)?);
            }
            let mut x = Vec::new();
            let mut y = Vec::new();
            for &j in &by_pattern[ctxs[i].pattern_id.as_str()] {
                let kj = feats[j].len();
                x.extend_from_slice(&feats[j][..kj - 1]);
                y.extend_from_slice(&heads[j]);
            }
            x.push(feats[i][k - 1].clone());
            Ok(predict_last(&x, &y, ridge)?)
        })
        .collect()
}

/// Context-free pretraining readout of each context's final molecule, eV,
/// computed from its cached encoding.
pub fn encoder_last_predictions(
    enc: &EncoderParams<f64>,
    ctxs: &[ContextSequence],
    cache: &EncodingCache,
) -> Result<Vec<f64>, CliError> {
    let cfg = &enc.config;
    if cache.dim() != cfg.output_dim() {
        return Err(CliError::Data(format!("encodings have {} channels, encoder produces {}", cache.dim(), cfg.output_dim())));
    }
    let mut w = Vec::with_capacity(cfg.output_dim());
    let mut bias = 0.0;
    for b in 0..cfg.n_blocks {
        let get = |n: String| enc.store.get(&n).ok_or_else(|| CliError::Data(format!("encoder has no `{n}`")));
        w.extend_from_slice(get(format!("readout{b}.w"))?.data());
        bias += get(format!("readout{b}.b"))?.data()[0];
    }
    let index = cache.index();
    ctxs.iter()
        .map(|c| {
            let id = c.molecule_ids.last().ok_or_else(|| CliError::Data(format!("empty context for {}", c.pattern_id)))?;
            let row = cache.row(row_of(&index, id)?);
            Ok(row.iter().zip(&w).map(|(&x, w)| x as f64 * w).sum::<f64>() + bias)
        })
        .collect()
}
