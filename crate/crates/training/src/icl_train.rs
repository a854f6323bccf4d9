use std::collections::{HashMap, HashSet};

use encoder::EncodingCache;
use icl::{assemble_sequence, forward_icl, masked_loss, predict, IclParams, Standardizer, TokenSequence};
use mining::ContextSequence;
use numcore::{Scalar, Tape, Tensor};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::{
    curriculum_weights, shuffle_context, Adam, CurriculumState, EpochMetrics, IclTrainConfig, MetricsLog,
    PlateauScheduler, TrainError,
};

/// A context resolved against the cache: encoding rows and labels in eV.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextExamples {
    pub rows: Vec<usize>,
    pub labels: Vec<f64>,
}

impl ContextExamples {
    pub fn resolve(
        ctx: &ContextSequence,
        index: &HashMap<&str, usize>,
        labels: &HashMap<String, f64>,
    ) -> Result<Self, TrainError> {
        let mut rows = Vec::with_capacity(ctx.molecule_ids.len());
        let mut ys = Vec::with_capacity(ctx.molecule_ids.len());
        for id in &ctx.molecule_ids {
            rows.push(*index.get(id.as_str()).ok_or_else(|| TrainError::CacheMiss(id.clone()))?);
            ys.push(*labels.get(id).ok_or_else(|| TrainError::MissingLabel(id.clone()))?);
        }
        Ok(ContextExamples { rows, labels: ys })
    }

    /// Standardized sequence; the last label is withheld when `query` is set.
    pub fn sequence<T: Scalar>(
        &self,
        cache: &EncodingCache,
        std: &Standardizer,
        query: bool,
    ) -> Result<TokenSequence<T>, TrainError> {
        let k = self.rows.len();
        let pairs: Vec<(&[f32], Option<f64>)> = self
            .rows
            .iter()
            .zip(&self.labels)
            .enumerate()
            .map(|(i, (&r, &y))| (cache.row(r), if query && i + 1 == k { None } else { Some(y) }))
            .collect();
        Ok(assemble_sequence(&pairs, std)?)
    }
}

fn resolve_all(
    ctxs: &[ContextSequence],
    cache: &EncodingCache,
    labels: &HashMap<String, f64>,
) -> Result<Vec<ContextExamples>, TrainError> {
    let index = cache.index();
    ctxs.iter().map(|c| ContextExamples::resolve(c, &index, labels)).collect()
}

/// Mean absolute error of the last prediction of each context, meV, with
/// the last label withheld.
pub fn context_mae<T: Scalar>(
    p: &IclParams<T>,
    std: &Standardizer,
    ctxs: &[ContextSequence],
    cache: &EncodingCache,
    labels: &HashMap<String, f64>,
) -> Result<f64, TrainError> {
    if ctxs.is_empty() {
        return Err(TrainError::Empty("context list"));
    }
    let resolved = resolve_all(ctxs, cache, labels)?;
    last_example_mae(p, std, &resolved, cache)
}

fn last_example_mae<T: Scalar>(
    p: &IclParams<T>,
    std: &Standardizer,
    ctxs: &[ContextExamples],
    cache: &EncodingCache,
) -> Result<f64, TrainError> {
    let errs: Result<Vec<f64>, TrainError> = ctxs
        .par_iter()
        .map(|c| {
            let seq = c.sequence::<T>(cache, std, true)?;
            let preds = predict(p, &seq)?;
            let last = std.unlabel(preds.last().expect("non-empty context").as_f64());
            Ok((last - c.labels.last().expect("non-empty context")).abs())
        })
        .collect();
    let errs = errs?;
    Ok(errs.iter().sum::<f64>() / errs.len() as f64 * 1000.0)
}

#[derive(Debug, Clone)]
pub struct IclOutcome<T> {
    /// Parameters from the epoch with the best validation metric.
    pub params: IclParams<T>,
    pub standardizer: Standardizer,
    pub best_epoch: usize,
    pub best_mae_mev: f64,
    /// Validation metric before any update.
    pub initial_mae_mev: f64,
}

struct SeqGrad<T> {
    loss: f64,
    last_abs: f64,
    grads: Vec<Tensor<T>>,
}

fn sequence_grad<T: Scalar>(
    p: &IclParams<T>,
    seq: &TokenSequence<T>,
    weights: &[T],
) -> Result<SeqGrad<T>, TrainError> {
    let mut tape = Tape::new();
    let vars = p.store.bind(&mut tape, true);
    let out = forward_icl(&mut tape, p, &vars, seq)?;
    let loss = masked_loss(&mut tape, out.preds, &seq.labels, weights)?;
    let last = *tape.value(out.preds).data().last().expect("non-empty");
    let last_abs = (last - *seq.labels.last().expect("non-empty")).abs().as_f64();
    let mut g = tape.backward(loss)?;
    let grads = vars
        .iter()
        .zip(p.store.tensors())
        .map(|(&v, t)| g.take(v).unwrap_or_else(|| Tensor::zeros(t.shape())))
        .collect();
    Ok(SeqGrad { loss: tape.value(loss).item().as_f64(), last_abs, grads })
}

/// Trains the in-context model on `train` contexts, selecting the epoch with
/// the lowest last-example MAE on `validation` (or on `train` when
/// `validation` is empty).
#[allow(clippy::too_many_arguments)]
pub fn train_icl<T: Scalar>(
    train: &[ContextSequence],
    validation: &[ContextSequence],
    cache: &EncodingCache,
    labels: &HashMap<String, f64>,
    init: IclParams<T>,
    cfg: &IclTrainConfig,
    seed: u64,
    log: &mut MetricsLog,
) -> Result<IclOutcome<T>, TrainError> {
    if train.is_empty() {
        return Err(TrainError::Empty("training context list"));
    }
    if cache.dim() != init.config.input_dim {
        return Err(TrainError::Config(format!(
            "encodings have {} channels, model expects {}",
            cache.dim(),
            init.config.input_dim
        )));
    }
    let index = cache.index();
    for c in train.iter().chain(validation) {
        ContextExamples::resolve(c, &index, labels)?;
    }
    let val_resolved = resolve_all(if validation.is_empty() { train } else { validation }, cache, labels)?;

    let mut seen = HashSet::new();
    let mut rows = Vec::new();
    let mut ys = Vec::new();
    for c in train {
        for id in &c.molecule_ids {
            if seen.insert(id.as_str()) {
                rows.push(cache.row(index[id.as_str()]));
                ys.push(labels[id]);
            }
        }
    }
    let std = Standardizer::fit(&rows, &ys);

    let mut params = init;
    let mut adam = Adam::new(&params.store);
    let mut sched = PlateauScheduler::new(cfg.lr, cfg.patience_epochs, cfg.lr_floor);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = CurriculumState { step: 0, period: cfg.period };

    let initial = last_example_mae(&params, &std, &val_resolved, cache)?;
    sched.observe(initial);
    log.push(EpochMetrics { epoch: 0, split: "validation".into(), mae_mev: initial, lr: cfg.lr });
    let mut best = (initial, 0usize, params.clone());

    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=cfg.epochs {
        let lr = sched.lr;
        order.shuffle(&mut rng);
        let epoch_ctxs: Vec<ContextSequence> = order
            .iter()
            .map(|&i| if cfg.shuffle { shuffle_context(&train[i], &mut rng) } else { train[i].clone() })
            .collect();
        let resolved: Vec<ContextExamples> =
            epoch_ctxs.iter().map(|c| ContextExamples::resolve(c, &index, labels)).collect::<Result<_, _>>()?;
        let mut last_abs = 0.0;
        for (bi, batch) in resolved.chunks(cfg.batch_sequences).enumerate() {
            let inv = 1.0 / batch.len() as f64;
            let parts: Vec<Result<SeqGrad<T>, TrainError>> = batch
                .par_iter()
                .map(|c| {
                    let seq = c.sequence::<T>(cache, &std, false)?;
                    let w: Vec<T> = curriculum_weights(state, c.rows.len()).into_iter().map(T::c).collect();
                    sequence_grad(&params, &seq, &w)
                })
                .collect();
            let mut loss = 0.0;
            let mut grads: Option<Vec<Tensor<T>>> = None;
            for part in parts {
                let sg = part?;
                loss += sg.loss * inv;
                last_abs += sg.last_abs;
                match &mut grads {
                    None => grads = Some(sg.grads),
                    Some(acc) => {
                        for (a, g) in acc.iter_mut().zip(&sg.grads) {
                            a.data_mut().iter_mut().zip(g.data()).for_each(|(a, &b)| *a = *a + b);
                        }
                    }
                }
            }
            let mut grads = grads.expect("non-empty batch");
            for g in &mut grads {
                g.data_mut().iter_mut().for_each(|x| *x = *x * T::c(inv));
            }
            if !loss.is_finite() || grads.iter().any(|g| !g.all_finite()) {
                return Err(TrainError::NonFinite { epoch, step: state.step, detail: format!("loss {loss} in batch {bi}") });
            }
            adam.step(&mut params.store, &grads, lr);
            state.step += 1;
        }
        let train_mae = last_abs / resolved.len() as f64 * std.y_std * 1000.0;
        log.push(EpochMetrics { epoch, split: "train".into(), mae_mev: train_mae, lr });
        let val = last_example_mae(&params, &std, &val_resolved, cache)?;
        log.push(EpochMetrics { epoch, split: "validation".into(), mae_mev: val, lr });
        if val < best.0 {
            best = (val, epoch, params.clone());
        }
        sched.observe(val);
    }
    let (best_mae_mev, best_epoch, params) = best;
    Ok(IclOutcome { params, standardizer: std, best_epoch, best_mae_mev, initial_mae_mev: initial })
}
