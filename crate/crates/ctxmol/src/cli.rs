use std::collections::HashMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use baselines::RegressionMode;
use clap::{Parser, Subcommand, ValueEnum};
use encoder::{load_encodings, save_encodings, EncoderParams, EncodingCache};
use icl::{load_model, save_model, IclConfig, IclParams, Standardizer};
use mining::{
    build_contexts, gen_synthetic, mine_frequent_with, read_contexts, read_patterns, write_contexts, write_patterns,
    ContextConfig, ContextSequence, PatternConstraints, SyntheticConfig, SyntheticTaskSpec,
};
use molgraph::{heavy_graph, parse_dataset, partition_ood, write_dataset, LabeledGraph, Molecule, OodClass};
use numcore::Scalar;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use training::{pretrain_encoder, train_icl, MetricsLog, RunConfig};

use crate::eval::{
    encoder_last_predictions, last_labels, llm_last_predictions, mae_mev, regression_last_predictions, EvalReport,
    EvalRow, Readout,
};
use crate::pipeline::{build_cache, label_map};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Parser)]
#[command(name = "ctxmol", version, about = "In-context molecular property regression")]
pub struct Cli {
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Worker threads; 1 gives fully deterministic runs.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[arg(long, global = true, value_enum, default_value_t = Precision::F32)]
    pub precision: Precision,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Partition a dataset into base, ester and oxime files.
    SplitOod {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mine frequent substructures from a dataset's heavy-atom graphs.
    Mine {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Defaults to the context length.
        #[arg(long)]
        min_support: Option<usize>,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long)]
        max_nodes: Option<usize>,
    },
    /// Build context sequences for mined patterns.
    MakeContexts {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        patterns: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = 15)]
        max_per_pattern: usize,
        #[arg(long, default_value_t = 6)]
        max_extra_carbons: usize,
    },
    /// Write a synthetic corpus with latent per-pattern offsets.
    GenSynthetic {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 40)]
        patterns: usize,
        #[arg(long, default_value_t = 120)]
        per_pattern: usize,
        #[arg(long, default_value_t = 4)]
        ester: usize,
        #[arg(long, default_value_t = 6)]
        oxime: usize,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = 15)]
        max_per_pattern: usize,
    },
    /// Train the encoder and its readout on labelled molecules.
    PretrainEncoder {
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Averaged (EMA) parameters.
        #[arg(long)]
        out: PathBuf,
        /// Final raw parameters.
        #[arg(long)]
        raw_out: Option<PathBuf>,
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Cache encoder outputs for every molecule of a dataset.
    Encode {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        encoder: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the in-context model on cached encodings.
    TrainIcl {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        contexts: Option<PathBuf>,
        #[arg(long)]
        validation: Option<PathBuf>,
        #[arg(long)]
        encodings: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Score the in-context model and the regression readouts.
    Eval {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        encodings: Option<PathBuf>,
        /// One file per evaluation set; repeatable.
        #[arg(long, required = true)]
        contexts: Vec<PathBuf>,
        /// Adds the context-free encoder readout.
        #[arg(long)]
        encoder: Option<PathBuf>,
        #[arg(long, default_value = "base")]
        train_set: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Fit regressions on all contexts of a pattern.
        #[arg(long)]
        pooled: bool,
        #[arg(long, default_value_t = 0.0)]
        ridge: f64,
    },
    /// Score only the regression readouts.
    Ablate {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        encodings: Option<PathBuf>,
        #[arg(long, required = true)]
        contexts: Vec<PathBuf>,
        /// Enables selection-feature regression.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value = "base")]
        train_set: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        pooled: bool,
        #[arg(long, default_value_t = 0.0)]
        ridge: f64,
    },
}

/// Parses arguments, runs, and returns the process exit code.
pub fn main_with_args<I: IntoIterator<Item = OsString>>(args: I) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn pick(arg: Option<PathBuf>, cfg: &Option<PathBuf>, flag: &str) -> Result<PathBuf, CliError> {
    arg.or_else(|| cfg.clone()).ok_or_else(|| CliError::Usage(format!("{flag} is required (flag or [data] config entry)")))
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

fn load_dataset(path: &Path) -> Result<Vec<Molecule>, CliError> {
    parse_dataset(path).map_err(|e| CliError::from(e).at(path))
}

fn save_dataset(path: &Path, mols: &[Molecule]) -> Result<(), CliError> {
    let f = File::create(path).map_err(|e| io_err(path, e))?;
    write_dataset(BufWriter::new(f), mols).map_err(|e| io_err(path, e))
}

fn load_contexts(path: &Path) -> Result<Vec<ContextSequence>, CliError> {
    Ok(read_contexts(path)?)
}

fn load_cache(path: &Path) -> Result<EncodingCache, CliError> {
    load_encodings(path).map_err(|e| CliError::from(e).at(path))
}

fn heavy_graphs(mols: &[Molecule]) -> Result<Vec<LabeledGraph>, CliError> {
    mols.iter().map(|m| heavy_graph(m).map_err(CliError::from)).collect()
}

/// `contexts_oxime.jsonl` → `oxime`.
fn set_name(path: &Path) -> String {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    stem.strip_prefix("contexts_").map(str::to_string).unwrap_or(stem)
}

fn emit(report: &EvalReport, out: &Option<PathBuf>) -> Result<(), CliError> {
    print!("{}", report.table());
    match out {
        Some(p) => report.write_csv(p),
        None => {
            print!("{}", report.to_csv()?);
            Ok(())
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p).map_err(|e| CliError::Usage(e.to_string()))?,
        None => RunConfig::default(),
    };
    let data = cfg.data.clone();
    match cli.command {
        Command::SplitOod { dataset, out } => {
            let mols = load_dataset(&pick(dataset, &data.dataset, "--dataset")?)?;
            std::fs::create_dir_all(&out).map_err(|e| io_err(&out, e))?;
            let parts = partition_ood(&mols);
            for (class, part) in OodClass::ALL.iter().zip(&parts) {
                save_dataset(&out.join(format!("{}.jsonl", class.name())), part)?;
                println!("{} {}", class.name(), part.len());
            }
            Ok(())
        }
        Command::Mine { dataset, out, min_support, k, max_nodes } => {
            let mols = load_dataset(&pick(dataset, &data.dataset, "--dataset")?)?;
            let graphs = heavy_graphs(&mols)?;
            let constraints = PatternConstraints { max_nodes, ..Default::default() };
            let patterns = mine_frequent_with(&graphs, min_support.unwrap_or(k).max(1), &constraints);
            write_patterns(&out, &patterns)?;
            println!("{} patterns", patterns.len());
            Ok(())
        }
        Command::MakeContexts { dataset, patterns, out, k, max_per_pattern, max_extra_carbons } => {
            if k < 2 {
                return Err(CliError::Usage("--k must be at least 2".into()));
            }
            let mols = load_dataset(&pick(dataset, &data.dataset, "--dataset")?)?;
            let graphs = heavy_graphs(&mols)?;
            let pats = read_patterns(&patterns)?;
            let ccfg = ContextConfig { k, max_per_pattern, max_extra_carbons, seed: cli.seed };
            let ctxs = build_contexts(&pats, &graphs, &ccfg);
            write_contexts(&out, &ctxs)?;
            println!("{} contexts from {} patterns", ctxs.len(), pats.len());
            Ok(())
        }
        Command::GenSynthetic { out, patterns, per_pattern, ester, oxime, k, max_per_pattern } => {
            let scfg = SyntheticConfig {
                n_patterns: patterns,
                molecules_per_pattern: per_pattern,
                n_ester: ester,
                n_oxime: oxime,
                k,
                max_contexts_per_pattern: max_per_pattern,
                ..Default::default()
            };
            let corpus = gen_synthetic(&scfg, &SyntheticTaskSpec::default(), cli.seed).map_err(|e| match e {
                mining::MiningError::Invalid(m) => CliError::Usage(m),
                e => e.into(),
            })?;
            std::fs::create_dir_all(&out).map_err(|e| io_err(&out, e))?;
            corpus.write_to(&out)?;
            let [b, e, o] = &corpus.contexts;
            println!("{} molecules, contexts base {} ester {} oxime {}", corpus.molecules.len(), b.len(), e.len(), o.len());
            Ok(())
        }
        Command::PretrainEncoder { dataset, out, raw_out, metrics } => {
            let mols = load_dataset(&pick(dataset, &data.dataset, "--dataset")?)?;
            match cli.precision {
                Precision::F32 => pretrain::<f32>(&cfg, &mols, cli.seed, &out, raw_out.as_deref(), metrics.as_deref()),
                Precision::F64 => pretrain::<f64>(&cfg, &mols, cli.seed, &out, raw_out.as_deref(), metrics.as_deref()),
            }
        }
        Command::Encode { dataset, encoder, out } => {
            let mols = load_dataset(&pick(dataset, &data.dataset, "--dataset")?)?;
            let cache = match cli.precision {
                Precision::F32 => build_cache(&mols, &EncoderParams::<f32>::load(&encoder)?)?,
                Precision::F64 => build_cache(&mols, &EncoderParams::<f64>::load(&encoder)?)?,
            };
            save_encodings(&out, &cache)?;
            println!("{} encodings of width {}", cache.ids.len(), cache.dim());
            Ok(())
        }
        Command::TrainIcl { dataset, contexts, validation, encodings, out, metrics } => {
            let labels = label_map(&load_dataset(&pick(dataset, &data.dataset, "--dataset")?)?);
            let train = load_contexts(&pick(contexts, &data.contexts, "--contexts")?)?;
            let val = match validation.or(data.validation_contexts.clone()) {
                Some(p) => load_contexts(&p)?,
                None => Vec::new(),
            };
            let cache = load_cache(&pick(encodings, &data.encodings, "--encodings")?)?;
            let mut log = match &metrics {
                Some(p) => MetricsLog::to_file(p)?,
                None => MetricsLog::new(),
            };
            let model = IclConfig { input_dim: cache.dim(), ..cfg.model.clone() };
            let args = (&train[..], &val[..], &cache, &labels, &model);
            match cli.precision {
                Precision::F32 => train_and_save::<f32>(args, &cfg, cli.seed, &out, &mut log),
                Precision::F64 => train_and_save::<f64>(args, &cfg, cli.seed, &out, &mut log),
            }
        }
        Command::Eval { dataset, model, encodings, contexts, encoder, train_set, out, pooled, ridge } => {
            let labels = label_map(&load_dataset(&pick(dataset, &data.dataset, "--dataset")?)?);
            let cache = load_cache(&pick(encodings, &data.encodings, "--encodings")?)?;
            let enc = encoder.as_deref().map(EncoderParams::<f64>::load).transpose()?;
            let report = match cli.precision {
                Precision::F32 => {
                    let (p, s) = load_model::<f32>(&model)?;
                    evaluate(Some((&p, &s)), enc.as_ref(), &contexts, &cache, &labels, &train_set, pooled, ridge)?
                }
                Precision::F64 => {
                    let (p, s) = load_model::<f64>(&model)?;
                    evaluate(Some((&p, &s)), enc.as_ref(), &contexts, &cache, &labels, &train_set, pooled, ridge)?
                }
            };
            emit(&report, &out)
        }
        Command::Ablate { dataset, encodings, contexts, model, train_set, out, pooled, ridge } => {
            let labels = label_map(&load_dataset(&pick(dataset, &data.dataset, "--dataset")?)?);
            let cache = load_cache(&pick(encodings, &data.encodings, "--encodings")?)?;
            let loaded = model.as_deref().map(load_model::<f64>).transpose()?;
            let sel = loaded.as_ref().map(|(p, s)| (p, s));
            let mut report = evaluate(sel, None, &contexts, &cache, &labels, &train_set, pooled, ridge)?;
            report.rows.retain(|r| r.readout != Readout::SelectionLlm.name());
            emit(&report, &out)
        }
    }
}

fn pretrain<T: Scalar>(
    cfg: &RunConfig,
    mols: &[Molecule],
    seed: u64,
    out: &Path,
    raw_out: Option<&Path>,
    metrics: Option<&Path>,
) -> Result<(), CliError> {
    let mut log = match metrics {
        Some(p) => MetricsLog::to_file(p)?,
        None => MetricsLog::new(),
    };
    let init = EncoderParams::<T>::init(&cfg.encoder, &mut ChaCha8Rng::seed_from_u64(seed))?;
    let res = pretrain_encoder(mols, init, &cfg.pretrain, seed, &mut log)?;
    res.ema.save(out)?;
    if let Some(p) = raw_out {
        res.params.save(p)?;
    }
    if let Some(last) = res.history.last() {
        println!("{} epochs, final train MAE {last:.2} meV", res.history.len());
    }
    Ok(())
}

type TrainArgs<'a> = (&'a [ContextSequence], &'a [ContextSequence], &'a EncodingCache, &'a HashMap<String, f64>, &'a IclConfig);

fn train_and_save<T: Scalar>(
    (train, val, cache, labels, model): TrainArgs<'_>,
    cfg: &RunConfig,
    seed: u64,
    out: &Path,
    log: &mut MetricsLog,
) -> Result<(), CliError> {
    let init = IclParams::<T>::init(model, &mut ChaCha8Rng::seed_from_u64(seed))?;
    let res = train_icl(train, val, cache, labels, init, &cfg.icl, seed, log)?;
    save_model(out, &res.params, &res.standardizer)?;
    println!(
        "best epoch {}: last-example MAE {:.2} meV (initial {:.2})",
        res.best_epoch, res.best_mae_mev, res.initial_mae_mev
    );
    Ok(())
}

/// One row per (context file, readout). The in-context row needs a model,
/// the encoder row needs `enc`.
#[allow(clippy::too_many_arguments)]
pub fn evaluate<T: Scalar>(
    model: Option<(&IclParams<T>, &Standardizer)>,
    enc: Option<&EncoderParams<f64>>,
    contexts: &[PathBuf],
    cache: &EncodingCache,
    labels: &HashMap<String, f64>,
    train_set: &str,
    pooled: bool,
    ridge: f64,
) -> Result<EvalReport, CliError> {
    if let Some((p, _)) = model {
        if p.config.input_dim != cache.dim() {
            return Err(CliError::Data(format!(
                "checkpoint expects {} encoding channels, cache has {}",
                p.config.input_dim,
                cache.dim()
            )));
        }
    }
    let sel64 = model.map(|(p, s)| (p.cast::<f64>(), s.clone()));
    let mut report = EvalReport::default();
    for path in contexts {
        let ctxs = load_contexts(path)?;
        if ctxs.is_empty() {
            return Err(CliError::Data(format!("{}: no contexts", path.display())));
        }
        let truth = last_labels(&ctxs, labels)?;
        let mut preds = Vec::new();
        if let Some((p, s)) = model {
            preds.push((Readout::SelectionLlm, llm_last_predictions(p, s, &ctxs, cache, labels)?));
        }
        if let Some((p, s)) = &sel64 {
            let sel = Some((p, s));
            preds.push((
                Readout::SelectionRegression,
                regression_last_predictions(&ctxs, cache, labels, RegressionMode::SelectionRegression, sel, pooled, ridge)?,
            ));
        }
        preds.push((
            Readout::Regression,
            regression_last_predictions(&ctxs, cache, labels, RegressionMode::FullRegression, None, pooled, ridge)?,
        ));
        if let Some(e) = enc {
            preds.push((Readout::Encoder, encoder_last_predictions(e, &ctxs, cache)?));
        }
        for (readout, p) in preds {
            report.rows.push(EvalRow {
                train_set: train_set.to_string(),
                eval_set: set_name(path),
                readout: readout.name().into(),
                mae_mev: mae_mev(&p, &truth),
                n_contexts: ctxs.len(),
            });
        }
    }
    Ok(report)
}
