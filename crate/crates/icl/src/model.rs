use numcore::{ParamStore, Scalar, Tape, Tensor, Var};
use rand::Rng;

use crate::{IclConfig, IclError, Standardizer};

/// Standardized inputs of one context. `labels` has one entry per molecule,
/// or one fewer when the last label is the query.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenSequence<T> {
    pub enc: Tensor<T>,
    pub labels: Vec<T>,
}

impl<T: Scalar> TokenSequence<T> {
    pub fn n_examples(&self) -> usize {
        self.enc.shape()[0]
    }

    pub fn len(&self) -> usize {
        self.n_examples() + self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Standardizes `(encoding, label)` pairs into a token sequence.
pub fn assemble_sequence<T: Scalar>(
    pairs: &[(&[f32], Option<f64>)],
    std: &Standardizer,
) -> Result<TokenSequence<T>, IclError> {
    let dim = std.enc_mean.len();
    if pairs.is_empty() {
        return Err(IclError::Shape("empty context".into()));
    }
    let mut enc = Vec::with_capacity(pairs.len() * dim);
    let mut labels = Vec::with_capacity(pairs.len());
    for (i, (x, y)) in pairs.iter().enumerate() {
        if x.len() != dim {
            return Err(IclError::Shape(format!("encoding {i} has length {}, expected {dim}", x.len())));
        }
        enc.extend(std.encoding(x).into_iter().map(T::c));
        match y {
            Some(y) => labels.push(T::c(std.label(*y))),
            None if i + 1 == pairs.len() => {}
            None => return Err(IclError::Shape(format!("label missing for non-final example {i}"))),
        }
    }
    Ok(TokenSequence { enc: Tensor::new(vec![pairs.len(), dim], enc)?, labels })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IclParams<T> {
    pub config: IclConfig,
    pub store: ParamStore<T>,
}

fn layer(l: usize, what: &str) -> String {
    format!("layer{l}.{what}")
}

impl<T: Scalar> IclParams<T> {
    pub fn init<R: Rng + ?Sized>(config: &IclConfig, rng: &mut R) -> Result<Self, IclError> {
        config.validate()?;
        let d = config.dim;
        let hidden = d * config.mlp_ratio;
        let fan = |n: usize| 1.0 / (n as f64).sqrt();
        let resid = 1.0 / (2.0 * config.n_layers.max(1) as f64).sqrt();
        let mut s = ParamStore::new();
        s.insert("select.w", Tensor::randn(&[config.input_dim, d], fan(config.input_dim), rng));
        s.insert("select.b", Tensor::zeros(&[d]));
        s.insert("label_embed.w", Tensor::randn(&[1, d], 1.0, rng));
        s.insert("label_embed.b", Tensor::zeros(&[d]));
        s.insert("pos_embed", Tensor::randn(&[config.max_positions, d], 0.1, rng));
        for l in 0..config.n_layers {
            if config.layer_norm {
                s.insert(layer(l, "ln1.g"), Tensor::full(&[d], T::one()));
                s.insert(layer(l, "ln1.b"), Tensor::zeros(&[d]));
            }
            for w in ["attn.wq", "attn.wk", "attn.wv"] {
                s.insert(layer(l, w), Tensor::randn(&[d, d], fan(d), rng));
                s.insert(layer(l, &w.replace(".w", ".b")), Tensor::zeros(&[d]));
            }
            s.insert(layer(l, "attn.wo"), Tensor::randn(&[d, d], fan(d) * resid, rng));
            s.insert(layer(l, "attn.bo"), Tensor::zeros(&[d]));
            if config.layer_norm {
                s.insert(layer(l, "ln2.g"), Tensor::full(&[d], T::one()));
                s.insert(layer(l, "ln2.b"), Tensor::zeros(&[d]));
            }
            s.insert(layer(l, "mlp.w1"), Tensor::randn(&[d, hidden], fan(d), rng));
            s.insert(layer(l, "mlp.b1"), Tensor::zeros(&[hidden]));
            s.insert(layer(l, "mlp.w2"), Tensor::randn(&[hidden, d], fan(hidden) * resid, rng));
            s.insert(layer(l, "mlp.b2"), Tensor::zeros(&[d]));
        }
        if config.layer_norm {
            s.insert("ln_f.g", Tensor::full(&[d], T::one()));
            s.insert("ln_f.b", Tensor::zeros(&[d]));
        }
        s.insert("head.w", Tensor::randn(&[d, 1], 0.1 * fan(d), rng));
        s.insert("head.b", Tensor::zeros(&[1]));
        Ok(IclParams { config: config.clone(), store: s })
    }

    /// Zero-valued parameters with this config's layout.
    pub fn layout(config: &IclConfig) -> Result<Self, IclError> {
        let mut p = Self::init(config, &mut <rand::rngs::StdRng as rand::SeedableRng>::seed_from_u64(0))?;
        for t in p.store.tensors_mut() {
            t.data_mut().fill(T::zero());
        }
        Ok(p)
    }

    pub fn cast<U: Scalar>(&self) -> IclParams<U> {
        IclParams { config: self.config.clone(), store: self.store.cast() }
    }
}

/// Outputs of one forward pass: head values at every position (`[len, 1]`)
/// and the subset at structure positions (`[k, 1]`).
#[derive(Debug, Clone, Copy)]
pub struct IclOutputs {
    pub head_all: Var,
    pub preds: Var,
}

struct Bound<'a, T> {
    p: &'a IclParams<T>,
    vars: &'a [Var],
}

impl<T: Scalar> Bound<'_, T> {
    fn get(&self, name: &str) -> Var {
        self.vars[self.p.store.slot(name).unwrap_or_else(|| panic!("missing parameter {name}"))]
    }
}

/// Runs the model on `seq`. `vars` are `p.store` bound in slot order.
pub fn forward_icl<T: Scalar>(
    tape: &mut Tape<T>,
    p: &IclParams<T>,
    vars: &[Var],
    seq: &TokenSequence<T>,
) -> Result<IclOutputs, IclError> {
    let cfg = &p.config;
    let b = Bound { p, vars };
    let k = seq.n_examples();
    let m = seq.labels.len();
    let len = seq.len();
    if len > cfg.max_positions {
        return Err(IclError::Shape(format!("sequence of {len} tokens exceeds {} positions", cfg.max_positions)));
    }
    if seq.enc.last_dim() != cfg.input_dim {
        return Err(IclError::Shape(format!("encoding length {} != input_dim {}", seq.enc.last_dim(), cfg.input_dim)));
    }
    if m != k && m + 1 != k {
        return Err(IclError::Shape(format!("{m} labels for {k} examples")));
    }

    let enc = tape.constant(seq.enc.clone());
    let s_tok = tape.linear(enc, b.get("select.w"), b.get("select.b"))?;
    let mut x = if m > 0 {
        let lab = tape.constant(Tensor::new(vec![m, 1], seq.labels.clone())?);
        let l_tok = tape.linear(lab, b.get("label_embed.w"), b.get("label_embed.b"))?;
        let stacked = tape.concat_rows(&[s_tok, l_tok])?;
        let order: Vec<usize> = (0..k).flat_map(|i| if i < m { vec![i, k + i] } else { vec![i] }).collect();
        tape.gather_rows(stacked, &order)?
    } else {
        s_tok
    };
    let pos = tape.gather_rows(b.get("pos_embed"), &(0..len).collect::<Vec<_>>())?;
    x = tape.add(x, pos)?;

    let dh = cfg.head_dim();
    let inv = T::c(1.0 / (dh as f64).sqrt());
    for l in 0..cfg.n_layers {
        let a = if cfg.layer_norm { tape.layer_norm(x, b.get(&layer(l, "ln1.g")), b.get(&layer(l, "ln1.b")))? } else { x };
        let q = tape.linear(a, b.get(&layer(l, "attn.wq")), b.get(&layer(l, "attn.bq")))?;
        let kk = tape.linear(a, b.get(&layer(l, "attn.wk")), b.get(&layer(l, "attn.bk")))?;
        let v = tape.linear(a, b.get(&layer(l, "attn.wv")), b.get(&layer(l, "attn.bv")))?;
        let mut heads = Vec::with_capacity(cfg.n_heads);
        for h in 0..cfg.n_heads {
            let (qh, kh, vh) = if cfg.n_heads == 1 {
                (q, kk, v)
            } else {
                (tape.slice_cols(q, h * dh, dh)?, tape.slice_cols(kk, h * dh, dh)?, tape.slice_cols(v, h * dh, dh)?)
            };
            let scores = tape.matmul_nt(qh, kh)?;
            let scores = tape.scale(scores, inv);
            let att = tape.softmax_rows(scores, true)?;
            heads.push(tape.matmul(att, vh)?);
        }
        let o = if heads.len() == 1 { heads[0] } else { tape.concat_cols(&heads)? };
        let o = tape.linear(o, b.get(&layer(l, "attn.wo")), b.get(&layer(l, "attn.bo")))?;
        x = tape.add(x, o)?;

        let a = if cfg.layer_norm { tape.layer_norm(x, b.get(&layer(l, "ln2.g")), b.get(&layer(l, "ln2.b")))? } else { x };
        let hdn = tape.linear(a, b.get(&layer(l, "mlp.w1")), b.get(&layer(l, "mlp.b1")))?;
        let hdn = tape.gelu(hdn);
        let out = tape.linear(hdn, b.get(&layer(l, "mlp.w2")), b.get(&layer(l, "mlp.b2")))?;
        x = tape.add(x, out)?;
    }
    if cfg.layer_norm {
        x = tape.layer_norm(x, b.get("ln_f.g"), b.get("ln_f.b"))?;
    }
    let head_all = tape.linear(x, b.get("head.w"), b.get("head.b"))?;
    let even: Vec<usize> = (0..k).map(|i| 2 * i).collect();
    let preds = tape.gather_rows(head_all, &even)?;
    Ok(IclOutputs { head_all, preds })
}

/// `Σ w_i (pred_i − label_i)² / Σ w_i` over a `[k, 1]` prediction column.
pub fn masked_loss<T: Scalar>(tape: &mut Tape<T>, preds: Var, labels: &[T], weights: &[T]) -> Result<Var, IclError> {
    let k = tape.value(preds).len();
    if labels.len() != k || weights.len() != k {
        return Err(IclError::Shape(format!("{k} predictions, {} labels, {} weights", labels.len(), weights.len())));
    }
    if weights.iter().any(|&w| w < T::zero() || !w.is_finite()) {
        return Err(IclError::Shape("loss weights must be finite and non-negative".into()));
    }
    let total: T = weights.iter().copied().sum();
    if total == T::zero() {
        return Err(IclError::ZeroWeights);
    }
    let y = tape.constant(Tensor::new(vec![k, 1], labels.to_vec())?);
    let w = tape.constant(Tensor::new(vec![k, 1], weights.to_vec())?);
    let r = tape.sub(preds, y)?;
    let sq = tape.square(r);
    let weighted = tape.mul(sq, w)?;
    let s = tape.sum(weighted);
    Ok(tape.scale(s, T::one() / total))
}

/// Standardized predictions at every structure position.
pub fn predict<T: Scalar>(p: &IclParams<T>, seq: &TokenSequence<T>) -> Result<Vec<T>, IclError> {
    let mut tape = Tape::new();
    let vars = p.store.bind(&mut tape, false);
    let out = forward_icl(&mut tape, p, &vars, seq)?;
    Ok(tape.value(out.preds).data().to_vec())
}

/// The selection layer alone applied to one (already standardized) encoding.
pub fn select<T: Scalar>(p: &IclParams<T>, enc: &[T]) -> Result<Vec<T>, IclError> {
    if enc.len() != p.config.input_dim {
        return Err(IclError::Shape(format!("encoding length {} != input_dim {}", enc.len(), p.config.input_dim)));
    }
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::new(vec![1, enc.len()], enc.to_vec())?);
    let w = tape.constant(p.store.get("select.w").expect("select.w").clone());
    let b = tape.constant(p.store.get("select.b").expect("select.b").clone());
    let y = tape.linear(x, w, b)?;
    Ok(tape.value(y).data().to_vec())
}
