use crate::{NumError, Scalar, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Unary {
    Exp,
    Tanh,
    Silu,
    Gelu,
    Square,
    Abs,
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, T),
    AddBias(usize, usize),
    MatMul { a: usize, b: usize, b_transposed: bool },
    Unary(usize, Unary),
    Softmax { x: usize },
    LayerNorm { x: usize, gamma: usize, beta: usize, xhat: Vec<T>, rstd: Vec<T> },
    Sum(usize),
    Mean(usize),
    GatherRows { x: usize, idx: Vec<usize> },
    ScatterAddRows { x: usize, idx: Vec<usize> },
    ConcatCols(Vec<usize>),
    ConcatRows(Vec<usize>),
    SliceCols { x: usize, start: usize },
    Reshape(usize),
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    needs_grad: bool,
}

/// Eager computation trace. Records are appended in evaluation order, so the
/// record list is always topologically sorted.
#[derive(Debug, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

/// Gradients of a scalar with respect to every leaf that required them.
#[derive(Debug)]
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<T>> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }
}

const LN_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn shape_err(&self, op: &'static str, detail: String) -> NumError {
        NumError::Shape {
            op,
            record: self.nodes.len(),
            detail,
        }
    }

    pub fn leaf(&mut self, t: Tensor<T>, requires_grad: bool) -> Var {
        self.push(t, Op::Leaf, requires_grad)
    }

    pub fn constant(&mut self, t: Tensor<T>) -> Var {
        self.leaf(t, false)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(), NumError> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(self.shape_err(op, format!("{sa:?} vs {sb:?}")));
        }
        Ok(())
    }

    fn zip(&mut self, a: Var, b: Var, f: impl Fn(T, T) -> T) -> Tensor<T> {
        let (va, vb) = (self.value(a), self.value(b));
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::new(va.shape().to_vec(), data).expect("same shape")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        self.same_shape("add", a, b)?;
        let v = self.zip(a, b, |x, y| x + y);
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(v, Op::Add(a.0, b.0), ng))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        self.same_shape("sub", a, b)?;
        let v = self.zip(a, b, |x, y| x - y);
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(v, Op::Sub(a.0, b.0), ng))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        self.same_shape("mul", a, b)?;
        let v = self.zip(a, b, |x, y| x * y);
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(v, Op::Mul(a.0, b.0), ng))
    }

    pub fn scale(&mut self, a: Var, c: T) -> Var {
        let v = self.value(a).map(|x| x * c);
        let ng = self.ng(a);
        self.push(v, Op::Scale(a.0, c), ng)
    }

    /// Adds a vector of length `last_dim(x)` to every leading-index slice of `x`.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var, NumError> {
        let (vx, vb) = (self.value(x), self.value(b));
        let m = vx.last_dim();
        if vb.len() != m || vb.rank() != 1 {
            return Err(self.shape_err("add_bias", format!("{:?} + {:?}", vx.shape(), vb.shape())));
        }
        let bias = vb.data();
        let data = vx
            .data()
            .chunks(m)
            .flat_map(|row| row.iter().zip(bias).map(|(&r, &c)| r + c))
            .collect();
        let v = Tensor::new(vx.shape().to_vec(), data).expect("same shape");
        let ng = self.ng(x) || self.ng(b);
        Ok(self.push(v, Op::AddBias(x.0, b.0), ng))
    }

    fn mm(&mut self, a: Var, b: Var, b_transposed: bool) -> Result<Var, NumError> {
        let op = if b_transposed { "matmul_nt" } else { "matmul" };
        let (va, vb) = (self.value(a), self.value(b));
        if va.rank() != 2 || vb.rank() != 2 {
            return Err(self.shape_err(op, format!("rank-2 operands required, got {:?} and {:?}", va.shape(), vb.shape())));
        }
        let (m, k) = (va.shape()[0], va.shape()[1]);
        let (kb, n, rsb, csb) = if b_transposed {
            (vb.shape()[1], vb.shape()[0], 1, vb.shape()[1] as isize)
        } else {
            (vb.shape()[0], vb.shape()[1], vb.shape()[1] as isize, 1)
        };
        if k != kb {
            return Err(self.shape_err(op, format!("{:?} x {:?}", va.shape(), vb.shape())));
        }
        let mut out = vec![T::zero(); m * n];
        T::gemm(m, k, n, va.data(), k as isize, 1, vb.data(), rsb, csb, T::zero(), &mut out, n as isize, 1);
        let v = Tensor::new(vec![m, n], out).expect("mm shape");
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(v, Op::MatMul { a: a.0, b: b.0, b_transposed }, ng))
    }

    /// `a · b` for rank-2 operands.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        self.mm(a, b, false)
    }

    /// `a · bᵀ` for rank-2 operands.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var, NumError> {
        self.mm(a, b, true)
    }

    /// `x · w + b`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var, NumError> {
        let y = self.matmul(x, w)?;
        self.add_bias(y, b)
    }

    fn unary(&mut self, a: Var, kind: Unary) -> Var {
        let f: fn(T) -> T = match kind {
            Unary::Exp => |x| x.exp(),
            Unary::Tanh => |x| x.tanh(),
            Unary::Silu => |x| x * sigmoid(x),
            Unary::Gelu => |x| {
                let c = T::c(GELU_C);
                let inner = c * (x + T::c(0.044715) * x * x * x);
                T::c(0.5) * x * (T::one() + inner.tanh())
            },
            Unary::Square => |x| x * x,
            Unary::Abs => |x| x.abs(),
        };
        let v = self.value(a).map(f);
        let ng = self.ng(a);
        self.push(v, Op::Unary(a.0, kind), ng)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, Unary::Exp)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, Unary::Tanh)
    }

    pub fn silu(&mut self, a: Var) -> Var {
        self.unary(a, Unary::Silu)
    }

    /// Tanh-approximated GELU.
    pub fn gelu(&mut self, a: Var) -> Var {
        self.unary(a, Unary::Gelu)
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.unary(a, Unary::Square)
    }

    pub fn abs(&mut self, a: Var) -> Var {
        self.unary(a, Unary::Abs)
    }

    /// Row-wise softmax over the last axis. With `causal`, the input must be
    /// square and entry `(i, j)` with `j > i` is masked to an exact zero.
    pub fn softmax_rows(&mut self, x: Var, causal: bool) -> Result<Var, NumError> {
        let vx = self.value(x);
        let c = vx.last_dim();
        let r = vx.len() / c.max(1);
        if causal && (vx.rank() != 2 || r != c) {
            return Err(self.shape_err("softmax_rows", format!("causal mask needs a square matrix, got {:?}", vx.shape())));
        }
        let mut out = vec![T::zero(); vx.len()];
        for (i, (row, o)) in vx.data().chunks(c).zip(out.chunks_mut(c)).enumerate() {
            let lim = if causal { i + 1 } else { c };
            let mx = row[..lim].iter().copied().fold(T::neg_infinity(), T::max);
            let mut s = T::zero();
            for j in 0..lim {
                o[j] = (row[j] - mx).exp();
                s = s + o[j];
            }
            for v in &mut o[..lim] {
                *v = *v / s;
            }
        }
        let v = Tensor::new(vx.shape().to_vec(), out).expect("softmax shape");
        let ng = self.ng(x);
        Ok(self.push(v, Op::Softmax { x: x.0 }, ng))
    }

    /// Normalizes each row over the last axis, then applies `gamma ⊙ x̂ + beta`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Result<Var, NumError> {
        let (vx, vg, vb) = (self.value(x), self.value(gamma), self.value(beta));
        let m = vx.last_dim();
        if vg.len() != m || vb.len() != m {
            return Err(self.shape_err("layer_norm", format!("x {:?}, gamma {:?}, beta {:?}", vx.shape(), vg.shape(), vb.shape())));
        }
        let rows = vx.len() / m;
        let mut xhat = vec![T::zero(); vx.len()];
        let mut rstd = vec![T::zero(); rows];
        let mut out = vec![T::zero(); vx.len()];
        let mf = T::c(m as f64);
        for i in 0..rows {
            let row = &vx.data()[i * m..(i + 1) * m];
            let mean = row.iter().copied().sum::<T>() / mf;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / mf;
            let rs = T::one() / (var + T::c(LN_EPS)).sqrt();
            rstd[i] = rs;
            for j in 0..m {
                let h = (row[j] - mean) * rs;
                xhat[i * m + j] = h;
                out[i * m + j] = vg.data()[j] * h + vb.data()[j];
            }
        }
        let v = Tensor::new(vx.shape().to_vec(), out).expect("ln shape");
        let ng = self.ng(x) || self.ng(gamma) || self.ng(beta);
        Ok(self.push(
            v,
            Op::LayerNorm { x: x.0, gamma: gamma.0, beta: beta.0, xhat, rstd },
            ng,
        ))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().copied().sum();
        let ng = self.ng(a);
        self.push(Tensor::scalar(s), Op::Sum(a.0), ng)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let va = self.value(a);
        let s = va.data().iter().copied().sum::<T>() / T::c(va.len() as f64);
        let ng = self.ng(a);
        self.push(Tensor::scalar(s), Op::Mean(a.0), ng)
    }

    /// `out[r] = x[idx[r]]` over rows of a rank-2 tensor.
    pub fn gather_rows(&mut self, x: Var, idx: &[usize]) -> Result<Var, NumError> {
        let vx = self.value(x);
        if vx.rank() != 2 {
            return Err(self.shape_err("gather_rows", format!("rank-2 input required, got {:?}", vx.shape())));
        }
        let (n, m) = (vx.shape()[0], vx.shape()[1]);
        if let Some(&bad) = idx.iter().find(|&&i| i >= n) {
            return Err(self.shape_err("gather_rows", format!("row {bad} out of range for {n} rows")));
        }
        let mut out = Vec::with_capacity(idx.len() * m);
        for &i in idx {
            out.extend_from_slice(&vx.data()[i * m..(i + 1) * m]);
        }
        let v = Tensor::new(vec![idx.len(), m], out).expect("gather shape");
        let ng = self.ng(x);
        Ok(self.push(v, Op::GatherRows { x: x.0, idx: idx.to_vec() }, ng))
    }

    /// `out[idx[r]] += x[r]`, producing `n_out` rows.
    pub fn scatter_add_rows(&mut self, x: Var, idx: &[usize], n_out: usize) -> Result<Var, NumError> {
        let vx = self.value(x);
        if vx.rank() != 2 || vx.shape()[0] != idx.len() {
            return Err(self.shape_err("scatter_add_rows", format!("input {:?} with {} indices", vx.shape(), idx.len())));
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= n_out) {
            return Err(self.shape_err("scatter_add_rows", format!("target row {bad} out of range for {n_out} rows")));
        }
        let m = vx.shape()[1];
        let mut out = vec![T::zero(); n_out * m];
        for (r, &i) in idx.iter().enumerate() {
            let src = &vx.data()[r * m..(r + 1) * m];
            for (o, &s) in out[i * m..(i + 1) * m].iter_mut().zip(src) {
                *o = *o + s;
            }
        }
        let v = Tensor::new(vec![n_out, m], out).expect("scatter shape");
        let ng = self.ng(x);
        Ok(self.push(v, Op::ScatterAddRows { x: x.0, idx: idx.to_vec() }, ng))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, NumError> {
        let rows = match parts.first() {
            Some(&p) => self.value(p).shape().first().copied().unwrap_or(0),
            None => return Err(self.shape_err("concat_cols", "no inputs".into())),
        };
        for &p in parts {
            let s = self.value(p).shape();
            if s.len() != 2 || s[0] != rows {
                return Err(self.shape_err("concat_cols", format!("part {s:?} does not have {rows} rows")));
            }
        }
        let total: usize = parts.iter().map(|&p| self.value(p).shape()[1]).sum();
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &p in parts {
                out.extend_from_slice(self.value(p).row(r));
            }
        }
        let v = Tensor::new(vec![rows, total], out).expect("concat shape");
        let ng = parts.iter().any(|&p| self.ng(p));
        Ok(self.push(v, Op::ConcatCols(parts.iter().map(|p| p.0).collect()), ng))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, NumError> {
        let cols = match parts.first() {
            Some(&p) => self.value(p).last_dim(),
            None => return Err(self.shape_err("concat_rows", "no inputs".into())),
        };
        let mut out = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let s = self.value(p).shape();
            if s.len() != 2 || s[1] != cols {
                return Err(self.shape_err("concat_rows", format!("part {s:?} does not have {cols} columns")));
            }
            rows += s[0];
            out.extend_from_slice(self.value(p).data());
        }
        let v = Tensor::new(vec![rows, cols], out).expect("concat shape");
        let ng = parts.iter().any(|&p| self.ng(p));
        Ok(self.push(v, Op::ConcatRows(parts.iter().map(|p| p.0).collect()), ng))
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var, NumError> {
        let vx = self.value(x);
        if vx.rank() != 2 || start + len > vx.shape()[1] {
            return Err(self.shape_err("slice_cols", format!("columns {start}..{} of {:?}", start + len, vx.shape())));
        }
        let rows = vx.shape()[0];
        let mut out = Vec::with_capacity(rows * len);
        for r in 0..rows {
            out.extend_from_slice(&vx.row(r)[start..start + len]);
        }
        let v = Tensor::new(vec![rows, len], out).expect("slice shape");
        let ng = self.ng(x);
        Ok(self.push(v, Op::SliceCols { x: x.0, start }, ng))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var, NumError> {
        let n: usize = shape.iter().product();
        let vx = self.value(x);
        if n != vx.len() {
            return Err(self.shape_err("reshape", format!("{:?} -> {shape:?}", vx.shape())));
        }
        let v = Tensor::new(shape.to_vec(), vx.data().to_vec()).expect("reshape");
        let ng = self.ng(x);
        Ok(self.push(v, Op::Reshape(x.0), ng))
    }

    /// Reverse sweep from a single-element output.
    pub fn backward(&self, out: Var) -> Result<Gradients<T>, NumError> {
        self.backward_retaining(out, &[])
    }

    /// Like [`Tape::backward`], additionally keeping the gradients of the
    /// intermediate values in `keep`.
    pub fn backward_retaining(&self, out: Var, keep: &[Var]) -> Result<Gradients<T>, NumError> {
        let root = &self.nodes[out.0];
        if root.value.len() != 1 {
            return Err(NumError::Shape {
                op: "backward",
                record: out.0,
                detail: format!("output must hold one element, got {:?}", root.value.shape()),
            });
        }
        let mut grads: Vec<Option<Vec<T>>> = Vec::with_capacity(self.nodes.len());
        grads.resize_with(self.nodes.len(), || None);
        grads[out.0] = Some(vec![T::one()]);

        for i in (0..=out.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.backprop_node(node, &g, &mut grads);
            if matches!(node.op, Op::Leaf) || keep.contains(&Var(i)) {
                grads[i] = Some(g);
            }
        }

        let grads = grads
            .into_iter()
            .enumerate()
            .zip(&self.nodes)
            .map(|((i, g), n)| match g {
                Some(g) if matches!(n.op, Op::Leaf) || keep.contains(&Var(i)) => {
                    Some(Tensor::new(n.value.shape().to_vec(), g).expect("grad shape"))
                }
                _ => None,
            })
            .collect();
        Ok(Gradients { grads })
    }

    fn accum<'g>(&self, grads: &'g mut [Option<Vec<T>>], j: usize) -> Option<&'g mut Vec<T>> {
        if !self.nodes[j].needs_grad {
            return None;
        }
        let n = self.nodes[j].value.len();
        Some(grads[j].get_or_insert_with(|| vec![T::zero(); n]))
    }

    fn backprop_node(&self, node: &Node<T>, g: &[T], grads: &mut [Option<Vec<T>>]) {
        let val = |j: usize| self.nodes[j].value.data();
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                for j in [*a, *b] {
                    if let Some(d) = self.accum(grads, j) {
                        d.iter_mut().zip(g).for_each(|(d, &g)| *d = *d + g);
                    }
                }
            }
            Op::Sub(a, b) => {
                if let Some(d) = self.accum(grads, *a) {
                    d.iter_mut().zip(g).for_each(|(d, &g)| *d = *d + g);
                }
                if let Some(d) = self.accum(grads, *b) {
                    d.iter_mut().zip(g).for_each(|(d, &g)| *d = *d - g);
                }
            }
            Op::Mul(a, b) => {
                let (va, vb) = (val(*a).to_vec(), val(*b).to_vec());
                if let Some(d) = self.accum(grads, *a) {
                    for ((d, &g), &y) in d.iter_mut().zip(g).zip(&vb) {
                        *d = *d + g * y;
                    }
                }
                if let Some(d) = self.accum(grads, *b) {
                    for ((d, &g), &x) in d.iter_mut().zip(g).zip(&va) {
                        *d = *d + g * x;
                    }
                }
            }
            Op::Scale(a, c) => {
                if let Some(d) = self.accum(grads, *a) {
                    d.iter_mut().zip(g).for_each(|(d, &g)| *d = *d + g * *c);
                }
            }
            Op::AddBias(x, b) => {
                if let Some(d) = self.accum(grads, *x) {
                    d.iter_mut().zip(g).for_each(|(d, &g)| *d = *d + g);
                }
                let m = self.nodes[*b].value.len();
                if let Some(d) = self.accum(grads, *b) {
                    for row in g.chunks(m) {
                        d.iter_mut().zip(row).for_each(|(d, &g)| *d = *d + g);
                    }
                }
            }
            Op::MatMul { a, b, b_transposed } => {
                let (sa, sb) = (self.nodes[*a].value.shape(), self.nodes[*b].value.shape());
                let (m, k) = (sa[0], sa[1]);
                let n = if *b_transposed { sb[0] } else { sb[1] };
                let (ki, ni) = (k as isize, n as isize);
                let one = T::one();
                let (av, bv) = (val(*a), val(*b));
                if let Some(da) = self.accum(grads, *a) {
                    if *b_transposed {
                        // dA = dC · B, with B stored [n, k]
                        T::gemm(m, n, k, g, ni, 1, bv, ki, 1, one, da, ki, 1);
                    } else {
                        // dA = dC · Bᵀ, with B stored [k, n]
                        T::gemm(m, n, k, g, ni, 1, bv, 1, ni, one, da, ki, 1);
                    }
                }
                if let Some(db) = self.accum(grads, *b) {
                    if *b_transposed {
                        // dB = dCᵀ · A, shape [n, k]
                        T::gemm(n, m, k, g, 1, ni, av, ki, 1, one, db, ki, 1);
                    } else {
                        // dB = Aᵀ · dC, shape [k, n]
                        T::gemm(k, m, n, av, 1, ki, g, ni, 1, one, db, ni, 1);
                    }
                }
            }
            Op::Unary(a, kind) => {
                let xs = val(*a).to_vec();
                let ys = node.value.data();
                if let Some(d) = self.accum(grads, *a) {
                    for i in 0..d.len() {
                        let (x, y) = (xs[i], ys[i]);
                        let dydx = match kind {
                            Unary::Exp => y,
                            Unary::Tanh => T::one() - y * y,
                            Unary::Silu => {
                                let s = sigmoid(x);
                                s * (T::one() + x * (T::one() - s))
                            }
                            Unary::Gelu => {
                                let c = T::c(GELU_C);
                                let a3 = T::c(0.044715);
                                let t = (c * (x + a3 * x * x * x)).tanh();
                                let half = T::c(0.5);
                                half * (T::one() + t)
                                    + half * x * (T::one() - t * t) * c * (T::one() + T::c(3.0) * a3 * x * x)
                            }
                            Unary::Square => T::c(2.0) * x,
                            Unary::Abs => x.signum() * if x == T::zero() { T::zero() } else { T::one() },
                        };
                        d[i] = d[i] + g[i] * dydx;
                    }
                }
            }
            Op::Softmax { x } => {
                let c = node.value.last_dim();
                let ys = node.value.data();
                if let Some(d) = self.accum(grads, *x) {
                    for ((drow, grow), yrow) in d.chunks_mut(c).zip(g.chunks(c)).zip(ys.chunks(c)) {
                        let dot: T = grow.iter().zip(yrow).map(|(&g, &y)| g * y).sum();
                        for j in 0..c {
                            drow[j] = drow[j] + yrow[j] * (grow[j] - dot);
                        }
                    }
                }
            }
            Op::LayerNorm { x, gamma, beta, xhat, rstd } => {
                let m = node.value.last_dim();
                let gam = val(*gamma).to_vec();
                if let Some(d) = self.accum(grads, *x) {
                    let mf = T::c(m as f64);
                    for (i, &rs) in rstd.iter().enumerate() {
                        let gr = &g[i * m..(i + 1) * m];
                        let xh = &xhat[i * m..(i + 1) * m];
                        let mut s1 = T::zero();
                        let mut s2 = T::zero();
                        for j in 0..m {
                            let dxh = gr[j] * gam[j];
                            s1 = s1 + dxh;
                            s2 = s2 + dxh * xh[j];
                        }
                        for j in 0..m {
                            let dxh = gr[j] * gam[j];
                            d[i * m + j] = d[i * m + j] + rs / mf * (mf * dxh - s1 - xh[j] * s2);
                        }
                    }
                }
                if let Some(d) = self.accum(grads, *gamma) {
                    for (gr, xh) in g.chunks(m).zip(xhat.chunks(m)) {
                        for j in 0..m {
                            d[j] = d[j] + gr[j] * xh[j];
                        }
                    }
                }
                if let Some(d) = self.accum(grads, *beta) {
                    for gr in g.chunks(m) {
                        d.iter_mut().zip(gr).for_each(|(d, &g)| *d = *d + g);
                    }
                }
            }
            Op::Sum(a) => {
                if let Some(d) = self.accum(grads, *a) {
                    d.iter_mut().for_each(|d| *d = *d + g[0]);
                }
            }
            Op::Mean(a) => {
                let n = T::c(self.nodes[*a].value.len() as f64);
                if let Some(d) = self.accum(grads, *a) {
                    d.iter_mut().for_each(|d| *d = *d + g[0] / n);
                }
            }
            Op::GatherRows { x, idx } => {
                let m = node.value.last_dim();
                if let Some(d) = self.accum(grads, *x) {
                    for (r, &i) in idx.iter().enumerate() {
                        for j in 0..m {
                            d[i * m + j] = d[i * m + j] + g[r * m + j];
                        }
                    }
                }
            }
            Op::ScatterAddRows { x, idx } => {
                let m = node.value.last_dim();
                if let Some(d) = self.accum(grads, *x) {
                    for (r, &i) in idx.iter().enumerate() {
                        for j in 0..m {
                            d[r * m + j] = d[r * m + j] + g[i * m + j];
                        }
                    }
                }
            }
            Op::ConcatCols(parts) => {
                let total = node.value.last_dim();
                let rows = node.value.len() / total.max(1);
                let mut off = 0;
                for &p in parts {
                    let w = self.nodes[p].value.last_dim();
                    if let Some(d) = self.accum(grads, p) {
                        for r in 0..rows {
                            for j in 0..w {
                                d[r * w + j] = d[r * w + j] + g[r * total + off + j];
                            }
                        }
                    }
                    off += w;
                }
            }
            Op::ConcatRows(parts) => {
                let mut off = 0;
                for &p in parts {
                    let n = self.nodes[p].value.len();
                    if let Some(d) = self.accum(grads, p) {
                        d.iter_mut().zip(&g[off..off + n]).for_each(|(d, &g)| *d = *d + g);
                    }
                    off += n;
                }
            }
            Op::SliceCols { x, start } => {
                let len = node.value.last_dim();
                let w = self.nodes[*x].value.last_dim();
                if let Some(d) = self.accum(grads, *x) {
                    for (r, gr) in g.chunks(len).enumerate() {
                        for j in 0..len {
                            d[r * w + start + j] = d[r * w + start + j] + gr[j];
                        }
                    }
                }
            }
            Op::Reshape(x) => {
                if let Some(d) = self.accum(grads, *x) {
                    d.iter_mut().zip(g).for_each(|(d, &g)| *d = *d + g);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_of_squares() {
        let mut t = Tape::<f64>::new();
        let x = t.leaf(Tensor::vector(vec![1.0, 2.0]), true);
        let y = t.mul(x, x).unwrap();
        let s = t.sum(y);
        assert_eq!(t.value(s).item(), 5.0);
        let g = t.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[2.0, 4.0]);
    }

    #[test]
    fn sum_of_zeros() {
        let mut t = Tape::<f64>::new();
        let x = t.leaf(Tensor::zeros(&[3]), true);
        let s = t.sum(x);
        assert_eq!(t.value(s).item(), 0.0);
        assert_eq!(t.backward(s).unwrap().get(x).unwrap().data(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn shape_error_names_op() {
        let mut t = Tape::<f32>::new();
        let a = t.leaf(Tensor::zeros(&[2, 3]), true);
        let b = t.leaf(Tensor::zeros(&[2, 3]), true);
        let err = t.matmul(a, b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("matmul") && msg.contains("#2"), "{msg}");
    }

    #[test]
    fn causal_softmax_masks_future() {
        let mut t = Tape::<f64>::new();
        let x = t.leaf(Tensor::matrix(2, 2, vec![0.3, 5.0, 1.0, 2.0]).unwrap(), true);
        let y = t.softmax_rows(x, true).unwrap();
        let v = t.value(y).data().to_vec();
        assert_eq!(v[0], 1.0);
        assert_eq!(v[1], 0.0);
        assert!((v[2] + v[3] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constants_get_no_gradient() {
        let mut t = Tape::<f64>::new();
        let x = t.leaf(Tensor::vector(vec![1.0]), true);
        let c = t.constant(Tensor::vector(vec![3.0]));
        let y = t.mul(x, c).unwrap();
        let s = t.sum(y);
        let g = t.backward(s).unwrap();
        assert!(g.get(c).is_none());
        assert_eq!(g.get(x).unwrap().data(), &[3.0]);
    }
}
