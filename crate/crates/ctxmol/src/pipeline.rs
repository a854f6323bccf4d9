use std::collections::HashMap;
use std::time::Instant;

use baselines::RegressionMode;
use encoder::{encode_all, EncoderConfig, EncoderParams, EncodingCache};
use icl::{IclConfig, IclParams};
use mining::{gen_synthetic, SyntheticConfig, SyntheticTaskSpec};
use molgraph::{classify_ood, Molecule, OodClass};
use numcore::{Scalar, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use training::{pretrain_encoder, train_icl, IclTrainConfig, MetricsLog, PretrainConfig};

use crate::eval::{
    encoder_last_predictions, last_labels, llm_last_predictions, mae_mev, position_mae, regression_last_predictions,
    EvalReport, EvalRow, Readout,
};
use crate::CliError;

/// Molecules per encoder batch when filling a cache.
pub const ENCODE_CHUNK: usize = 64;

/// Encodes `mols` and stores the concatenated block outputs as `f32`.
pub fn build_cache<T: Scalar>(mols: &[Molecule], p: &EncoderParams<T>) -> Result<EncodingCache, CliError> {
    let enc = encode_all(mols, p, ENCODE_CHUNK)?;
    let dim = p.config.output_dim();
    let data: Vec<f32> = enc.iter().flat_map(|e| e.concat()).map(|v| v.as_f64() as f32).collect();
    Ok(EncodingCache {
        ids: mols.iter().map(|m| m.id().to_string()).collect(),
        encodings: Tensor::new(vec![mols.len(), dim], data)?,
    })
}

pub fn label_map(mols: &[Molecule]) -> HashMap<String, f64> {
    mols.iter().map(|m| (m.id().to_string(), m.label_u0())).collect()
}

/// The whole synthetic experiment: generate a corpus, pretrain the encoder
/// on base molecules, train the in-context model on base contexts with
/// ester contexts for validation, then score every readout on oxime
/// contexts.
#[derive(Debug, Clone)]
pub struct BenchmarkConfig {
    pub synthetic: SyntheticConfig,
    pub task: SyntheticTaskSpec,
    pub encoder: EncoderConfig,
    pub pretrain: PretrainConfig,
    pub model: IclConfig,
    pub icl: IclTrainConfig,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        let encoder = EncoderConfig { n_blocks: 3, dim: 64, n_rbf: 16, ..Default::default() };
        BenchmarkConfig {
            synthetic: SyntheticConfig::default(),
            task: SyntheticTaskSpec::default(),
            pretrain: PretrainConfig { lr: 1e-3, epochs: 30, batch_size: 32, warmup_steps: 100, ema_decay: 0.99 },
            model: IclConfig {
                dim: 64,
                n_layers: 4,
                n_heads: 4,
                max_positions: 20,
                input_dim: encoder.output_dim(),
                layer_norm: true,
                mlp_ratio: 4,
            },
            icl: IclTrainConfig { lr: 1e-3, epochs: 60, batch_sequences: 16, period: 100, patience_epochs: 20, ..Default::default() },
            encoder,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkResult {
    /// Oxime and ester rows for every readout.
    pub report: EvalReport,
    /// Held-out (oxime) last-example MAE per readout, meV.
    pub holdout: HashMap<Readout, f64>,
    /// Held-out MAE at each context position, meV.
    pub position_mae: Vec<f64>,
    pub pretrain_history: Vec<f64>,
    pub icl_best_epoch: usize,
    pub seconds: f64,
}

pub fn run_benchmark(cfg: &BenchmarkConfig, seed: u64) -> Result<BenchmarkResult, CliError> {
    let t0 = Instant::now();
    let corpus = gen_synthetic(&cfg.synthetic, &cfg.task, seed)?;
    let labels = label_map(&corpus.molecules);
    let base_mols: Vec<Molecule> =
        corpus.molecules.iter().filter(|m| classify_ood(m) == OodClass::Base).cloned().collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED);
    let init = EncoderParams::<f32>::init(&cfg.encoder, &mut rng)?;
    let pre = pretrain_encoder(&base_mols, init, &cfg.pretrain, seed, &mut MetricsLog::new())?;
    let cache = build_cache(&corpus.molecules, &pre.ema)?;
    let enc64 = pre.ema.cast::<f64>();

    let model = IclConfig { input_dim: cache.dim(), ..cfg.model.clone() };
    let icl_init = IclParams::<f32>::init(&model, &mut rng)?;
    let [base, ester, oxime] = &corpus.contexts;
    let out = train_icl(base, ester, &cache, &labels, icl_init, &cfg.icl, seed, &mut MetricsLog::new())?;
    let sel64 = out.params.cast::<f64>();

    let mut report = EvalReport::default();
    let mut holdout = HashMap::new();
    for (name, ctxs) in [("ester", ester), ("oxime", oxime)] {
        if ctxs.is_empty() {
            continue;
        }
        let truth = last_labels(ctxs, &labels)?;
        let preds = [
            (Readout::SelectionLlm, llm_last_predictions(&out.params, &out.standardizer, ctxs, &cache, &labels)?),
            (
                Readout::SelectionRegression,
                regression_last_predictions(
                    ctxs,
                    &cache,
                    &labels,
                    RegressionMode::SelectionRegression,
                    Some((&sel64, &out.standardizer)),
                    false,
                    0.0,
                )?,
            ),
            (
                Readout::Regression,
                regression_last_predictions(ctxs, &cache, &labels, RegressionMode::FullRegression, None, false, 0.0)?,
            ),
            (Readout::Encoder, encoder_last_predictions(&enc64, ctxs, &cache)?),
        ];
        for (readout, p) in preds {
            let mae = mae_mev(&p, &truth);
            if name == "oxime" {
                holdout.insert(readout, mae);
            }
            report.rows.push(EvalRow {
                train_set: "base".into(),
                eval_set: name.into(),
                readout: readout.name().into(),
                mae_mev: mae,
                n_contexts: ctxs.len(),
            });
        }
    }
    let position_mae = if oxime.is_empty() {
        Vec::new()
    } else {
        position_mae(&out.params, &out.standardizer, oxime, &cache, &labels)?
    };
    Ok(BenchmarkResult {
        report,
        holdout,
        position_mae,
        pretrain_history: pre.history,
        icl_best_epoch: out.best_epoch,
        seconds: t0.elapsed().as_secs_f64(),
    })
}
