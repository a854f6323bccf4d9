use encoder::{forward, readout, EncoderParams, GraphBatch, MolFeatures};
use molgraph::Molecule;
use numcore::{Scalar, Tape, Tensor};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::{Adam, Ema, EpochMetrics, MetricsLog, PretrainConfig, TrainError};

/// Molecules per independent gradient job inside one optimizer step.
const SUB_BATCH: usize = 8;

#[derive(Debug, Clone)]
pub struct PretrainOutcome<T> {
    pub params: EncoderParams<T>,
    pub ema: EncoderParams<T>,
    /// Mean absolute training error per epoch, meV.
    pub history: Vec<f64>,
}

type LossAndGrad<T> = (T, Vec<Tensor<T>>);

/// Sum of |pred − y| over a sub-batch, scaled by `inv_b`, and its gradient.
fn sub_batch_grad<T: Scalar>(
    p: &EncoderParams<T>,
    feats: &[&MolFeatures],
    targets: &[T],
    inv_b: T,
) -> Result<LossAndGrad<T>, TrainError> {
    let batch = GraphBatch::new(feats, p.config.n_rbf);
    let mut tape = Tape::new();
    let vars = p.store.bind(&mut tape, true);
    let pooled = forward(&mut tape, &p.config, &vars, &batch)?;
    let pred = readout(&mut tape, &p.config, &vars, &pooled)?;
    let y = tape.constant(Tensor::new(vec![targets.len(), 1], targets.to_vec())?);
    let r = tape.sub(pred, y)?;
    let a = tape.abs(r);
    let s = tape.sum(a);
    let loss = tape.scale(s, inv_b);
    let mut g = tape.backward(loss)?;
    let grads = vars
        .iter()
        .zip(p.store.tensors())
        .map(|(&v, t)| g.take(v).unwrap_or_else(|| Tensor::zeros(t.shape())))
        .collect();
    Ok((tape.value(loss).item(), grads))
}

/// Rewrites readouts trained on `(y − mean)/std` so they predict `y`.
fn unscale_readout<T: Scalar>(p: &mut EncoderParams<T>, mean: f64, std: f64) {
    let nb = p.config.n_blocks;
    for b in 0..nb {
        let w = p.store.slot(&format!("readout{b}.w")).expect("readout weight");
        p.store.at_mut(w).data_mut().iter_mut().for_each(|x| *x = *x * T::c(std));
        let c = p.store.slot(&format!("readout{b}.b")).expect("readout bias");
        let cb = &mut p.store.at_mut(c).data_mut()[0];
        *cb = *cb * T::c(std) + T::c(mean / nb as f64);
    }
}

/// Fits the encoder and its readout to `label_u0` by mean absolute error.
/// Targets are standardized internally; the returned readouts predict eV.
pub fn pretrain_encoder<T: Scalar>(
    mols: &[Molecule],
    init: EncoderParams<T>,
    cfg: &PretrainConfig,
    seed: u64,
    log: &mut MetricsLog,
) -> Result<PretrainOutcome<T>, TrainError> {
    if mols.is_empty() {
        return Err(TrainError::Empty("pretraining dataset"));
    }
    if cfg.epochs == 0 {
        return Ok(PretrainOutcome { ema: init.clone(), params: init, history: Vec::new() });
    }
    let n = mols.len() as f64;
    let mean = mols.iter().map(Molecule::label_u0).sum::<f64>() / n;
    let var = mols.iter().map(|m| (m.label_u0() - mean).powi(2)).sum::<f64>() / n;
    let std = if var.sqrt() > 1e-8 { var.sqrt() } else { 1.0 };
    let feats: Vec<MolFeatures> = mols.par_iter().map(|m| MolFeatures::new(m, &init.config)).collect();
    let targets: Vec<T> = mols.iter().map(|m| T::c((m.label_u0() - mean) / std)).collect();

    let mut params = init;
    let mut adam = Adam::new(&params.store);
    let mut ema = Ema::new(&params.store, cfg.ema_decay);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..mols.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut step = 0usize;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut abs_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let inv_b = T::c(1.0 / batch.len() as f64);
            let jobs: Vec<&[usize]> = batch.chunks(SUB_BATCH).collect();
            let parts: Vec<Result<LossAndGrad<T>, TrainError>> = jobs
                .par_iter()
                .map(|idx| {
                    let f: Vec<&MolFeatures> = idx.iter().map(|&i| &feats[i]).collect();
                    let y: Vec<T> = idx.iter().map(|&i| targets[i]).collect();
                    sub_batch_grad(&params, &f, &y, inv_b)
                })
                .collect();
            let mut loss = 0.0;
            let mut grads: Option<Vec<Tensor<T>>> = None;
            for part in parts {
                let (l, g) = part?;
                loss += l.as_f64();
                match &mut grads {
                    None => grads = Some(g),
                    Some(acc) => {
                        for (a, g) in acc.iter_mut().zip(&g) {
                            a.data_mut().iter_mut().zip(g.data()).for_each(|(a, &b)| *a = *a + b);
                        }
                    }
                }
            }
            let grads = grads.expect("non-empty batch");
            if !loss.is_finite() || grads.iter().any(|g| !g.all_finite()) {
                let ids: Vec<&str> = batch.iter().map(|&i| mols[i].id()).collect();
                return Err(TrainError::NonFinite {
                    epoch,
                    step,
                    detail: format!("loss {loss}, batch {ids:?}"),
                });
            }
            let lr = if cfg.warmup_steps == 0 {
                cfg.lr
            } else {
                cfg.lr * ((step + 1) as f64 / cfg.warmup_steps as f64).min(1.0)
            };
            adam.step(&mut params.store, &grads, lr);
            ema.update(&params.store);
            abs_sum += loss * batch.len() as f64;
            step += 1;
        }
        let mae_mev = abs_sum / n * std * 1000.0;
        history.push(mae_mev);
        let lr = cfg.lr * (step as f64 / cfg.warmup_steps.max(1) as f64).min(1.0);
        log.push(EpochMetrics { epoch, split: "train".into(), mae_mev, lr });
    }
    let mut ema_params = EncoderParams { config: params.config.clone(), store: ema.shadow };
    unscale_readout(&mut params, mean, std);
    unscale_readout(&mut ema_params, mean, std);
    Ok(PretrainOutcome { params, ema: ema_params, history })
}
