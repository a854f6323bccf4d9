use std::path::Path;

use molgraph::Molecule;
use numcore::{read_container, write_container, NumError, ParamStore, Scalar, Tape, Tensor, Var};
use rand::Rng;
use rayon::prelude::*;

use crate::{EncoderConfig, EncoderError, GraphBatch, MolFeatures};

/// Tensors per interaction block, in slot order.
const PER_BLOCK: [&str; 7] = ["local_w", "local_f", "global_w", "global_f", "self_w", "update_w", "update_b"];

/// Pooled node states after each block, `blocks[b].len() == dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockEncodings<T> {
    pub blocks: Vec<Vec<T>>,
}

impl<T: Scalar> BlockEncodings<T> {
    pub fn concat(&self) -> Vec<T> {
        self.blocks.concat()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams<T> {
    pub config: EncoderConfig,
    pub store: ParamStore<T>,
}

fn block_name(b: usize, what: &str) -> String {
    format!("block{b}.{what}")
}

impl<T: Scalar> EncoderParams<T> {
    pub fn init<R: Rng + ?Sized>(config: &EncoderConfig, rng: &mut R) -> Result<Self, EncoderError> {
        config.validate()?;
        let (d, k, nb) = (config.dim, config.n_rbf, config.n_blocks);
        let sd = 1.0 / (d as f64).sqrt();
        let mut store = ParamStore::new();
        store.insert("embed", Tensor::randn(&[config.n_species, d], 1.0, rng));
        for b in 0..nb {
            store.insert(block_name(b, "local_w"), Tensor::randn(&[d, d], sd, rng));
            store.insert(block_name(b, "local_f"), Tensor::randn(&[k, d], 1.0 / (k as f64).sqrt(), rng));
            store.insert(block_name(b, "global_w"), Tensor::randn(&[d, d], sd, rng));
            store.insert(block_name(b, "global_f"), Tensor::randn(&[k, d], 1.0 / (k as f64).sqrt(), rng));
            store.insert(block_name(b, "self_w"), Tensor::randn(&[d, d], sd, rng));
            store.insert(block_name(b, "update_w"), Tensor::randn(&[d, d], sd, rng));
            store.insert(block_name(b, "update_b"), Tensor::zeros(&[d]));
        }
        for b in 0..nb {
            store.insert(format!("readout{b}.w"), Tensor::randn(&[d, 1], 0.1 * sd, rng));
            store.insert(format!("readout{b}.b"), Tensor::zeros(&[1]));
        }
        Ok(EncoderParams { config: config.clone(), store })
    }

    /// Wraps an existing store after checking it has this config's layout.
    pub fn from_store(config: &EncoderConfig, store: ParamStore<T>) -> Result<Self, EncoderError> {
        config.validate()?;
        let layout: EncoderParams<T> = Self::zeros(config);
        if !layout.store.same_layout(&store) {
            return Err(EncoderError::Config("parameter layout does not match the encoder config".into()));
        }
        Ok(EncoderParams { config: config.clone(), store })
    }

    fn zeros(config: &EncoderConfig) -> Self {
        let mut p = Self::init(config, &mut <rand::rngs::StdRng as rand::SeedableRng>::seed_from_u64(0)).expect("validated config");
        for t in p.store.tensors_mut() {
            t.data_mut().fill(T::zero());
        }
        p
    }

    pub fn cast<U: Scalar>(&self) -> EncoderParams<U> {
        EncoderParams { config: self.config.clone(), store: self.store.cast() }
    }

    /// Writes the tensors to `path` and the config to `path.json`.
    pub fn save(&self, path: &Path) -> Result<(), EncoderError> {
        let io = |p: &Path| {
            let p = p.to_path_buf();
            move |source| EncoderError::Io { path: p, source }
        };
        let f = std::fs::File::create(path).map_err(io(path))?;
        write_container(std::io::BufWriter::new(f), &self.store.to_named())?;
        let side = sidecar(path);
        let json = serde_json::json!({ "encoder": self.config });
        std::fs::write(&side, serde_json::to_string_pretty(&json).expect("config serializes")).map_err(io(&side))
    }

    pub fn load(path: &Path) -> Result<Self, EncoderError> {
        let side = sidecar(path);
        let text = std::fs::read_to_string(&side).map_err(|source| EncoderError::Io { path: side.clone(), source })?;
        let v: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| EncoderError::Format { path: side.clone(), msg: e.to_string() })?;
        let config: EncoderConfig = serde_json::from_value(v["encoder"].clone())
            .map_err(|e| EncoderError::Format { path: side.clone(), msg: e.to_string() })?;
        let f = std::fs::File::open(path).map_err(|source| EncoderError::Io { path: path.to_path_buf(), source })?;
        let named = read_container(std::io::BufReader::new(f))?;
        let layout = Self::zeros(&config);
        let store = ParamStore::from_named(&named, &layout.store)?;
        Ok(EncoderParams { config, store })
    }
}

pub(crate) fn sidecar(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}

/// Runs the blocks and returns one `[G, dim]` pooled tensor per block.
/// `params` are the store's tensors bound in slot order.
pub fn forward<T: Scalar>(
    tape: &mut Tape<T>,
    cfg: &EncoderConfig,
    params: &[Var],
    batch: &GraphBatch<T>,
) -> Result<Vec<Var>, NumError> {
    let n = batch.n_nodes();
    let mut h = tape.gather_rows(params[0], &batch.species)?;
    let mut pooled = Vec::with_capacity(cfg.n_blocks);
    for b in 0..cfg.n_blocks {
        let p = &params[1 + b * PER_BLOCK.len()..1 + (b + 1) * PER_BLOCK.len()];
        let mut agg: Option<Var> = None;
        for (edges, w, f) in [(&batch.local, p[0], p[1]), (&batch.global, p[2], p[3])] {
            let (src, dst, rbf) = edges;
            if src.is_empty() {
                continue;
            }
            let hw = tape.matmul(h, w)?;
            let from = tape.gather_rows(hw, src)?;
            let basis = tape.constant(rbf.clone());
            let filter = tape.matmul(basis, f)?;
            let msg = tape.mul(from, filter)?;
            let summed = tape.scatter_add_rows(msg, dst, n)?;
            agg = Some(match agg {
                Some(a) => tape.add(a, summed)?,
                None => summed,
            });
        }
        let mut pre = tape.matmul(h, p[4])?;
        if let Some(a) = agg {
            let upd = tape.matmul(a, p[5])?;
            pre = tape.add(pre, upd)?;
        }
        let pre = tape.add_bias(pre, p[6])?;
        let act = tape.silu(pre);
        h = tape.add(h, act)?;
        pooled.push(tape.scatter_add_rows(h, &batch.graph_of_node, batch.n_graphs)?);
    }
    Ok(pooled)
}

/// Sum of per-block linear readouts, `[G, 1]`.
pub fn readout<T: Scalar>(tape: &mut Tape<T>, cfg: &EncoderConfig, params: &[Var], pooled: &[Var]) -> Result<Var, NumError> {
    let base = 1 + cfg.n_blocks * PER_BLOCK.len();
    let mut total: Option<Var> = None;
    for (b, &e) in pooled.iter().enumerate() {
        let y = tape.linear(e, params[base + 2 * b], params[base + 2 * b + 1])?;
        total = Some(match total {
            Some(t) => tape.add(t, y)?,
            None => y,
        });
    }
    total.ok_or_else(|| NumError::Shape { op: "readout", record: tape.len(), detail: "no blocks".into() })
}

/// Encodes a batch without recording gradients.
pub fn encode_batch<T: Scalar>(feats: &[&MolFeatures], p: &EncoderParams<T>) -> Result<Vec<BlockEncodings<T>>, NumError> {
    let batch = GraphBatch::new(feats, p.config.n_rbf);
    let mut tape = Tape::new();
    let vars = p.store.bind(&mut tape, false);
    let pooled = forward(&mut tape, &p.config, &vars, &batch)?;
    Ok((0..feats.len())
        .map(|g| BlockEncodings { blocks: pooled.iter().map(|&v| tape.value(v).row(g).to_vec()).collect() })
        .collect())
}

pub fn encode<T: Scalar>(m: &Molecule, p: &EncoderParams<T>) -> Result<BlockEncodings<T>, NumError> {
    let f = MolFeatures::new(m, &p.config);
    Ok(encode_batch(&[&f], p)?.remove(0))
}

/// Encodes every molecule, in parallel over fixed-size chunks. Output order
/// follows the input.
pub fn encode_all<T: Scalar>(mols: &[Molecule], p: &EncoderParams<T>, chunk: usize) -> Result<Vec<BlockEncodings<T>>, NumError> {
    let feats: Vec<MolFeatures> = mols.par_iter().map(|m| MolFeatures::new(m, &p.config)).collect();
    let parts: Result<Vec<Vec<BlockEncodings<T>>>, NumError> = feats
        .par_chunks(chunk.max(1))
        .map(|c| encode_batch(&c.iter().collect::<Vec<_>>(), p))
        .collect();
    Ok(parts?.into_iter().flatten().collect())
}

/// `Σ_b (w_b · e_b + c_b)`.
pub fn pretrain_readout<T: Scalar>(e: &BlockEncodings<T>, p: &EncoderParams<T>) -> T {
    e.blocks
        .iter()
        .enumerate()
        .map(|(b, eb)| {
            let w = p.store.get(&format!("readout{b}.w")).expect("readout weight");
            let c = p.store.get(&format!("readout{b}.b")).expect("readout bias");
            eb.iter().zip(w.data()).map(|(&x, &y)| x * y).sum::<T>() + c.data()[0]
        })
        .sum()
}
