use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{AutodiffError, Result};
use crate::params::{Gradients, ParamId, ParamStore};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

const LAYER_NORM_EPS: f64 = 1e-5;

/// Whether stochastic operations are active.
///
/// `Train` seeds the dropout generator, so two graphs built with the same
/// seed and the same sequence of operations draw identical masks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Eval,
    Train { seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op<S> {
    Input,
    Param(ParamId),
    MatMul(NodeId, NodeId),
    MatMulBt(NodeId, NodeId),
    Transpose(NodeId),
    Add(NodeId, NodeId),
    AddRow(NodeId, NodeId),
    Mul(NodeId, NodeId),
    MulConst(NodeId, Tensor<S>),
    Scale(NodeId, S),
    Tanh(NodeId),
    Relu(NodeId),
    Sigmoid(NodeId),
    ConcatCols(Vec<NodeId>),
    ConcatRows(Vec<NodeId>),
    SliceCols {
        x: NodeId,
        start: usize,
    },
    SelectRows {
        x: NodeId,
        rows: Vec<usize>,
    },
    Conv1d {
        x: NodeId,
        w: NodeId,
        b: NodeId,
        width: usize,
    },
    MaxRows {
        x: NodeId,
        argmax: Vec<usize>,
    },
    SumRows(NodeId),
    Sum(NodeId),
    SoftmaxRows(NodeId),
    LayerNorm {
        x: NodeId,
        gain: NodeId,
        bias: NodeId,
        xhat: Vec<S>,
        inv_std: Vec<S>,
    },
    SoftmaxCe {
        logits: NodeId,
        targets: Vec<usize>,
        probs: Vec<S>,
    },
}

struct Node<S> {
    op: Op<S>,
    /// `None` for parameter leaves, whose value lives in the store.
    value: Option<Tensor<S>>,
}

/// Define-by-run computation graph over a borrowed parameter store.
pub struct Graph<'p, S: Scalar> {
    store: &'p ParamStore<S>,
    nodes: Vec<Node<S>>,
    rng: Option<ChaCha8Rng>,
}

impl<'p, S: Scalar> Graph<'p, S> {
    pub fn new(store: &'p ParamStore<S>, mode: Mode) -> Self {
        let rng = match mode {
            Mode::Eval => None,
            Mode::Train { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        };
        Self {
            store,
            nodes: Vec::new(),
            rng,
        }
    }

    pub fn is_train(&self) -> bool {
        self.rng.is_some()
    }

    /// Dropout generator; `None` in eval mode.
    pub fn rng(&mut self) -> Option<&mut ChaCha8Rng> {
        self.rng.as_mut()
    }

    pub fn store(&self) -> &'p ParamStore<S> {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor<S> {
        let node = &self.nodes[id.0];
        match (&node.value, &node.op) {
            (Some(v), _) => v,
            (None, Op::Param(p)) => self.store.value(*p),
            (None, _) => unreachable!("only parameter leaves omit their value"),
        }
    }

    fn dims(&self, id: NodeId) -> (usize, usize) {
        let v = self.value(id);
        (v.rows(), v.cols())
    }

    fn push(&mut self, op: Op<S>, value: Tensor<S>) -> NodeId {
        self.nodes.push(Node {
            op,
            value: Some(value),
        });
        NodeId(self.nodes.len() - 1)
    }

    fn shape_err(&self, op: &'static str, detail: String) -> AutodiffError {
        AutodiffError::Shape {
            op,
            node: self.nodes.len(),
            detail,
        }
    }

    fn out(rows: usize, cols: usize, data: Vec<S>) -> Tensor<S> {
        Tensor::new(vec![rows, cols], data).expect("operator produced consistent buffer")
    }

    pub fn input(&mut self, value: Tensor<S>) -> NodeId {
        self.push(Op::Input, value)
    }

    pub fn param(&mut self, id: ParamId) -> NodeId {
        self.nodes.push(Node {
            op: Op::Param(id),
            value: None,
        });
        NodeId(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (m, k) = self.dims(a);
        let (k2, n) = self.dims(b);
        if k != k2 {
            return Err(self.shape_err("matmul", format!("{m}x{k} times {k2}x{n}")));
        }
        let data = matmul(self.value(a).data(), self.value(b).data(), m, k, n);
        Ok(self.push(Op::MatMul(a, b), Self::out(m, n, data)))
    }

    /// `a · bᵀ`.
    pub fn matmul_bt(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (m, k) = self.dims(a);
        let (n, k2) = self.dims(b);
        if k != k2 {
            return Err(self.shape_err("matmul_bt", format!("{m}x{k} times ({n}x{k2})^T")));
        }
        let data = matmul_bt(self.value(a).data(), self.value(b).data(), m, k, n);
        Ok(self.push(Op::MatMulBt(a, b), Self::out(m, n, data)))
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let (m, n) = self.dims(a);
        let src = self.value(a).data();
        let mut data = vec![S::zero(); m * n];
        for i in 0..m {
            for j in 0..n {
                data[j * m + i] = src[i * n + j];
            }
        }
        self.push(Op::Transpose(a), Self::out(n, m, data))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (da, db) = (self.dims(a), self.dims(b));
        if da != db {
            return Err(self.shape_err("add", format!("{da:?} vs {db:?}")));
        }
        let data = zip_map(self.value(a).data(), self.value(b).data(), |x, y| x + y);
        Ok(self.push(Op::Add(a, b), Self::out(da.0, da.1, data)))
    }

    /// Adds a `1 x n` row to every row of `a`.
    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> Result<NodeId> {
        let (m, n) = self.dims(a);
        let dr = self.dims(row);
        if dr != (1, n) {
            return Err(self.shape_err("add_row", format!("{m}x{n} plus row {dr:?}")));
        }
        let r = self.value(row).data();
        let data = self
            .value(a)
            .data()
            .chunks(n)
            .flat_map(|src| src.iter().zip(r).map(|(x, y)| *x + *y))
            .collect();
        Ok(self.push(Op::AddRow(a, row), Self::out(m, n, data)))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (da, db) = (self.dims(a), self.dims(b));
        if da != db {
            return Err(self.shape_err("mul", format!("{da:?} vs {db:?}")));
        }
        let data = zip_map(self.value(a).data(), self.value(b).data(), |x, y| x * y);
        Ok(self.push(Op::Mul(a, b), Self::out(da.0, da.1, data)))
    }

    /// Element-wise product with a constant (dropout masks, loss weights).
    pub fn mul_const(&mut self, a: NodeId, c: Tensor<S>) -> Result<NodeId> {
        let (m, n) = self.dims(a);
        if (c.rows(), c.cols()) != (m, n) {
            return Err(self.shape_err(
                "mul_const",
                format!("{m}x{n} vs constant {}x{}", c.rows(), c.cols()),
            ));
        }
        let data = zip_map(self.value(a).data(), c.data(), |x, y| x * y);
        Ok(self.push(Op::MulConst(a, c), Self::out(m, n, data)))
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> NodeId {
        let (m, n) = self.dims(a);
        let f = S::from_f(factor);
        let data = self.value(a).data().iter().map(|&x| x * f).collect();
        self.push(Op::Scale(a, f), Self::out(m, n, data))
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        self.unary(a, |x| x.tanh(), Op::Tanh)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        self.unary(a, |x| if x > S::zero() { x } else { S::zero() }, Op::Relu)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        self.unary(a, sigmoid, Op::Sigmoid)
    }

    fn unary(&mut self, a: NodeId, f: impl Fn(S) -> S, op: fn(NodeId) -> Op<S>) -> NodeId {
        let (m, n) = self.dims(a);
        let data = self.value(a).data().iter().map(|&x| f(x)).collect();
        self.push(op(a), Self::out(m, n, data))
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let Some(&first) = parts.first() else {
            return Err(self.shape_err("concat_cols", "no inputs".into()));
        };
        let m = self.dims(first).0;
        if let Some(bad) = parts.iter().find(|&&p| self.dims(p).0 != m) {
            let r = self.dims(*bad).0;
            return Err(self.shape_err("concat_cols", format!("row counts {m} and {r}")));
        }
        let n: usize = parts.iter().map(|&p| self.dims(p).1).sum();
        let mut data = Vec::with_capacity(m * n);
        for i in 0..m {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(i));
            }
        }
        Ok(self.push(Op::ConcatCols(parts.to_vec()), Self::out(m, n, data)))
    }

    pub fn concat_rows(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let Some(&first) = parts.first() else {
            return Err(self.shape_err("concat_rows", "no inputs".into()));
        };
        let n = self.dims(first).1;
        if let Some(bad) = parts.iter().find(|&&p| self.dims(p).1 != n) {
            let c = self.dims(*bad).1;
            return Err(self.shape_err("concat_rows", format!("column counts {n} and {c}")));
        }
        let mut data = Vec::new();
        for &p in parts {
            data.extend_from_slice(self.value(p).data());
        }
        let m = data.len() / n.max(1);
        Ok(self.push(Op::ConcatRows(parts.to_vec()), Self::out(m, n, data)))
    }

    pub fn slice_cols(&mut self, a: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let (m, n) = self.dims(a);
        if start + len > n || len == 0 {
            return Err(self.shape_err(
                "slice_cols",
                format!("columns {start}..{} of {n}", start + len),
            ));
        }
        let src = self.value(a);
        let mut data = Vec::with_capacity(m * len);
        for i in 0..m {
            data.extend_from_slice(&src.row(i)[start..start + len]);
        }
        Ok(self.push(Op::SliceCols { x: a, start }, Self::out(m, len, data)))
    }

    /// Gathers rows by index; rows may repeat. Used for embedding lookup.
    pub fn select_rows(&mut self, a: NodeId, rows: &[usize]) -> Result<NodeId> {
        let (m, n) = self.dims(a);
        if rows.is_empty() {
            return Err(self.shape_err("select_rows", "empty row selection".into()));
        }
        if let Some(&bad) = rows.iter().find(|&&r| r >= m) {
            return Err(self.shape_err("select_rows", format!("row {bad} of {m}")));
        }
        let src = self.value(a);
        let mut data = Vec::with_capacity(rows.len() * n);
        for &r in rows {
            data.extend_from_slice(src.row(r));
        }
        Ok(self.push(
            Op::SelectRows {
                x: a,
                rows: rows.to_vec(),
            },
            Self::out(rows.len(), n, data),
        ))
    }

    /// 1-d convolution over the row (time) axis with zero "same" padding.
    ///
    /// `x` is `T x d`, `w` is `(width·d) x F` with the rows of each window
    /// position stacked in order, `b` is `1 x F`; the output is `T x F`.
    pub fn conv1d(&mut self, x: NodeId, w: NodeId, b: NodeId, width: usize) -> Result<NodeId> {
        let (t, d) = self.dims(x);
        let (wr, f) = self.dims(w);
        if width == 0 || wr != width * d || self.dims(b) != (1, f) {
            return Err(self.shape_err(
                "conv1d",
                format!(
                    "input {t}x{d}, filter {wr}x{f}, bias {:?}, width {width}",
                    self.dims(b)
                ),
            ));
        }
        let (xv, wv, bv) = (self.value(x).data(), self.value(w).data(), self.value(b).data());
        let pad = (width - 1) / 2;
        let mut data = Vec::with_capacity(t * f);
        for step in 0..t {
            let mut acc = bv.to_vec();
            for j in 0..width {
                let Some(src) = (step + j).checked_sub(pad).filter(|&s| s < t) else {
                    continue;
                };
                let xrow = &xv[src * d..(src + 1) * d];
                for (c, &xc) in xrow.iter().enumerate() {
                    if xc == S::zero() {
                        continue;
                    }
                    let wrow = &wv[(j * d + c) * f..(j * d + c + 1) * f];
                    for (a, &wv) in acc.iter_mut().zip(wrow) {
                        *a += xc * wv;
                    }
                }
            }
            data.extend(acc);
        }
        Ok(self.push(Op::Conv1d { x, w, b, width }, Self::out(t, f, data)))
    }

    /// Column-wise maximum over rows: `T x n -> 1 x n`.
    pub fn max_rows(&mut self, a: NodeId) -> NodeId {
        let (m, n) = self.dims(a);
        let v = self.value(a);
        let mut argmax = vec![0usize; n];
        let mut data = v.row(0).to_vec();
        for i in 1..m {
            for (j, &x) in v.row(i).iter().enumerate() {
                if x > data[j] {
                    data[j] = x;
                    argmax[j] = i;
                }
            }
        }
        self.push(Op::MaxRows { x: a, argmax }, Self::out(1, n, data))
    }

    /// Column-wise sum over rows: `T x n -> 1 x n`.
    ///
    /// Each column is summed in sorted order, so the result is bit-identical
    /// under any permutation of the rows.
    pub fn sum_rows(&mut self, a: NodeId) -> NodeId {
        let (m, n) = self.dims(a);
        let v = self.value(a);
        let mut column = Vec::with_capacity(m);
        let data = (0..n)
            .map(|j| {
                column.clear();
                column.extend((0..m).map(|i| v.get(i, j)));
                column.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
                column.iter().fold(S::zero(), |acc, &x| acc + x)
            })
            .collect();
        self.push(Op::SumRows(a), Self::out(1, n, data))
    }

    /// Sum of all entries, `1 x 1`.
    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let total = self.value(a).data().iter().fold(S::zero(), |acc, &x| acc + x);
        self.push(Op::Sum(a), Tensor::scalar(total))
    }

    pub fn softmax_rows(&mut self, a: NodeId) -> NodeId {
        let (m, n) = self.dims(a);
        let mut data = Vec::with_capacity(m * n);
        for i in 0..m {
            data.extend(softmax(self.value(a).row(i)));
        }
        self.push(Op::SoftmaxRows(a), Self::out(m, n, data))
    }

    /// Row-wise layer normalization with learned gain and bias (`1 x n` each).
    pub fn layer_norm(&mut self, x: NodeId, gain: NodeId, bias: NodeId) -> Result<NodeId> {
        let (m, n) = self.dims(x);
        if self.dims(gain) != (1, n) || self.dims(bias) != (1, n) {
            return Err(self.shape_err("layer_norm", format!("input {m}x{n}")));
        }
        let (xv, gv, bv) = (self.value(x), self.value(gain).data(), self.value(bias).data());
        let nn = S::from_f(n as f64);
        let eps = S::from_f(LAYER_NORM_EPS);
        let mut xhat = Vec::with_capacity(m * n);
        let mut inv_std = Vec::with_capacity(m);
        let mut data = Vec::with_capacity(m * n);
        for i in 0..m {
            let row = xv.row(i);
            let mean = row.iter().fold(S::zero(), |a, &v| a + v) / nn;
            let var = row.iter().fold(S::zero(), |a, &v| a + (v - mean) * (v - mean)) / nn;
            let inv = S::one() / (var + eps).sqrt();
            inv_std.push(inv);
            for (j, &v) in row.iter().enumerate() {
                let h = (v - mean) * inv;
                xhat.push(h);
                data.push(h * gv[j] + bv[j]);
            }
        }
        Ok(self.push(
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            },
            Self::out(m, n, data),
        ))
    }

    /// Mean softmax cross-entropy of `N x C` logits against `N` class indices.
    pub fn softmax_cross_entropy(&mut self, logits: NodeId, targets: &[usize]) -> Result<NodeId> {
        let (m, n) = self.dims(logits);
        if targets.len() != m || targets.iter().any(|&t| t >= n) {
            return Err(self.shape_err(
                "softmax_cross_entropy",
                format!("{m}x{n} logits with {} targets", targets.len()),
            ));
        }
        let mut probs = Vec::with_capacity(m * n);
        let mut loss = 0.0f64;
        for (i, &t) in targets.iter().enumerate() {
            let p = softmax(self.value(logits).row(i));
            let pt = p[t].to_f();
            loss -= if pt.is_nan() { pt } else { pt.max(f64::MIN_POSITIVE).ln() };
            probs.extend(p);
        }
        let loss = S::from_f(loss / m as f64);
        Ok(self.push(
            Op::SoftmaxCe {
                logits,
                targets: targets.to_vec(),
                probs,
            },
            Tensor::scalar(loss),
        ))
    }

    /// Inverted dropout mask of shape `rows x cols`, or `None` in eval mode
    /// or when `p` is zero. Kept entries are scaled by `1/(1-p)`.
    pub fn dropout_mask(&mut self, rows: usize, cols: usize, p: f64) -> Option<Tensor<S>> {
        if p <= 0.0 {
            return None;
        }
        let rng = self.rng.as_mut()?;
        let keep = 1.0 - p;
        let scale = S::from_f(1.0 / keep);
        let data = (0..rows * cols)
            .map(|_| if rng.gen::<f64>() < keep { scale } else { S::zero() })
            .collect();
        Some(Self::out(rows, cols, data))
    }

    /// Inverted dropout; identity in eval mode.
    pub fn dropout(&mut self, a: NodeId, p: f64) -> Result<NodeId> {
        let (m, n) = self.dims(a);
        match self.dropout_mask(m, n, p) {
            Some(mask) => self.mul_const(a, mask),
            None => Ok(a),
        }
    }

    /// `x · w + b` with `b` a `1 x n` row.
    pub fn linear(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let y = self.matmul(x, w)?;
        self.add_row(y, b)
    }

    /// One LSTM step. `x_proj` is the `1 x 4H` input projection (bias
    /// included); gates are ordered input, forget, candidate, output.
    /// Returns the new hidden and cell states.
    pub fn lstm_step(
        &mut self,
        x_proj: NodeId,
        h: NodeId,
        c: NodeId,
        w_hh: NodeId,
    ) -> Result<(NodeId, NodeId)> {
        let hidden = self.dims(h).1;
        let rec = self.matmul(h, w_hh)?;
        let gates = self.add(x_proj, rec)?;
        let i = self.slice_cols(gates, 0, hidden)?;
        let f = self.slice_cols(gates, hidden, hidden)?;
        let g = self.slice_cols(gates, 2 * hidden, hidden)?;
        let o = self.slice_cols(gates, 3 * hidden, hidden)?;
        let (i, f, g, o) = (self.sigmoid(i), self.sigmoid(f), self.tanh(g), self.sigmoid(o));
        let keep = self.mul(f, c)?;
        let write = self.mul(i, g)?;
        let c_next = self.add(keep, write)?;
        let squashed = self.tanh(c_next);
        let h_next = self.mul(o, squashed)?;
        Ok((h_next, c_next))
    }

    /// Scaled dot-product attention for one head. Returns the attended
    /// values and the (pre-dropout) attention weights.
    pub fn attention(
        &mut self,
        q: NodeId,
        k: NodeId,
        v: NodeId,
        dropout: f64,
    ) -> Result<(NodeId, NodeId)> {
        let dk = self.dims(k).1;
        let scores = self.matmul_bt(q, k)?;
        let scores = self.scale(scores, 1.0 / (dk as f64).sqrt());
        let weights = self.softmax_rows(scores);
        let dropped = self.dropout(weights, dropout)?;
        let out = self.matmul(dropped, v)?;
        Ok((out, weights))
    }

    /// Graph convolution `ReLU(Â·H·W + b)` for a constant normalized
    /// adjacency `Â`.
    pub fn graph_conv(&mut self, adj: NodeId, h: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let mixed = self.matmul(adj, h)?;
        let y = self.linear(mixed, w, b)?;
        Ok(self.relu(y))
    }

    /// Reverse pass from a `1 x 1` loss.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients<S>> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(AutodiffError::NonScalarLoss(lv.shape().to_vec()));
        }
        let mut grads: Vec<Option<Vec<S>>> = Vec::new();
        grads.resize_with(loss.0 + 1, || None);
        grads[loss.0] = Some(vec![S::one()]);
        let mut out = Gradients::with_capacity(self.store.len());

        for i in (0..=loss.0).rev() {
            let Some(gy) = grads[i].take() else {
                continue;
            };
            let y = self.value(NodeId(i));
            let (ym, yn) = (y.rows(), y.cols());
            match &self.nodes[i].op {
                Op::Input => {}
                Op::Param(p) => {
                    let shape = self.store.value(*p).shape().to_vec();
                    out.add(*p, Tensor::new(shape, gy).expect("gradient matches parameter"));
                }
                Op::MatMul(a, b) => {
                    let (m, k) = self.dims(*a);
                    let n = yn;
                    let da = matmul_bt(&gy, self.value(*b).data(), m, n, k);
                    add_into(slot(&mut grads, *a, m * k), &da);
                    let db = matmul_at(self.value(*a).data(), &gy, m, k, n);
                    add_into(slot(&mut grads, *b, k * n), &db);
                }
                Op::MatMulBt(a, b) => {
                    let (m, k) = self.dims(*a);
                    let n = yn;
                    let da = matmul(&gy, self.value(*b).data(), m, n, k);
                    add_into(slot(&mut grads, *a, m * k), &da);
                    let db = matmul_at(&gy, self.value(*a).data(), m, n, k);
                    add_into(slot(&mut grads, *b, n * k), &db);
                }
                Op::Transpose(a) => {
                    let (m, n) = self.dims(*a);
                    let g = slot(&mut grads, *a, m * n);
                    for r in 0..m {
                        for c in 0..n {
                            g[r * n + c] += gy[c * m + r];
                        }
                    }
                }
                Op::Add(a, b) => {
                    add_into(slot(&mut grads, *a, gy.len()), &gy);
                    add_into(slot(&mut grads, *b, gy.len()), &gy);
                }
                Op::AddRow(a, row) => {
                    add_into(slot(&mut grads, *a, gy.len()), &gy);
                    let g = slot(&mut grads, *row, yn);
                    for chunk in gy.chunks(yn) {
                        add_into(g, chunk);
                    }
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                    let ga = zip_map(&gy, bv, |g, x| g * x);
                    let gb = zip_map(&gy, av, |g, x| g * x);
                    add_into(slot(&mut grads, *a, gy.len()), &ga);
                    add_into(slot(&mut grads, *b, gy.len()), &gb);
                }
                Op::MulConst(a, c) => {
                    let ga = zip_map(&gy, c.data(), |g, x| g * x);
                    add_into(slot(&mut grads, *a, gy.len()), &ga);
                }
                Op::Scale(a, f) => {
                    let ga: Vec<S> = gy.iter().map(|&g| g * *f).collect();
                    add_into(slot(&mut grads, *a, gy.len()), &ga);
                }
                Op::Tanh(a) => {
                    let ga = zip_map(&gy, y.data(), |g, t| g * (S::one() - t * t));
                    add_into(slot(&mut grads, *a, gy.len()), &ga);
                }
                Op::Relu(a) => {
                    let ga = zip_map(&gy, y.data(), |g, r| if r > S::zero() { g } else { S::zero() });
                    add_into(slot(&mut grads, *a, gy.len()), &ga);
                }
                Op::Sigmoid(a) => {
                    let ga = zip_map(&gy, y.data(), |g, s| g * s * (S::one() - s));
                    add_into(slot(&mut grads, *a, gy.len()), &ga);
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let pn = self.dims(p).1;
                        let g = slot(&mut grads, p, ym * pn);
                        for r in 0..ym {
                            add_into(
                                &mut g[r * pn..(r + 1) * pn],
                                &gy[r * yn + offset..r * yn + offset + pn],
                            );
                        }
                        offset += pn;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let len = self.value(p).len();
                        add_into(slot(&mut grads, p, len), &gy[offset..offset + len]);
                        offset += len;
                    }
                }
                Op::SliceCols { x, start } => {
                    let (m, n) = self.dims(*x);
                    let g = slot(&mut grads, *x, m * n);
                    for r in 0..m {
                        add_into(&mut g[r * n + start..r * n + start + yn], &gy[r * yn..(r + 1) * yn]);
                    }
                }
                Op::SelectRows { x, rows } => {
                    let (m, n) = self.dims(*x);
                    let g = slot(&mut grads, *x, m * n);
                    for (k, &r) in rows.iter().enumerate() {
                        add_into(&mut g[r * n..(r + 1) * n], &gy[k * n..(k + 1) * n]);
                    }
                }
                Op::Conv1d { x, w, b, width } => {
                    let (t, d) = self.dims(*x);
                    let f = yn;
                    let (xv, wv) = (self.value(*x).data(), self.value(*w).data());
                    let pad = (width - 1) / 2;
                    let mut gx = vec![S::zero(); t * d];
                    let mut gw = vec![S::zero(); width * d * f];
                    let mut gb = vec![S::zero(); f];
                    for step in 0..t {
                        let grow = &gy[step * f..(step + 1) * f];
                        add_into(&mut gb, grow);
                        for j in 0..*width {
                            let Some(src) = (step + j).checked_sub(pad).filter(|&s| s < t) else {
                                continue;
                            };
                            for c in 0..d {
                                let wi = (j * d + c) * f;
                                let xc = xv[src * d + c];
                                let mut acc = S::zero();
                                for q in 0..f {
                                    gw[wi + q] += xc * grow[q];
                                    acc += wv[wi + q] * grow[q];
                                }
                                gx[src * d + c] += acc;
                            }
                        }
                    }
                    add_into(slot(&mut grads, *x, t * d), &gx);
                    add_into(slot(&mut grads, *w, width * d * f), &gw);
                    add_into(slot(&mut grads, *b, f), &gb);
                }
                Op::MaxRows { x, argmax } => {
                    let (m, n) = self.dims(*x);
                    let g = slot(&mut grads, *x, m * n);
                    for (j, &r) in argmax.iter().enumerate() {
                        g[r * n + j] += gy[j];
                    }
                }
                Op::SumRows(x) => {
                    let (m, n) = self.dims(*x);
                    let g = slot(&mut grads, *x, m * n);
                    for r in 0..m {
                        add_into(&mut g[r * n..(r + 1) * n], &gy);
                    }
                }
                Op::Sum(x) => {
                    let len = self.value(*x).len();
                    let g = slot(&mut grads, *x, len);
                    for v in g.iter_mut() {
                        *v += gy[0];
                    }
                }
                Op::SoftmaxRows(x) => {
                    let yv = y.data();
                    let mut gx = vec![S::zero(); ym * yn];
                    for r in 0..ym {
                        let (yr, gr) = (&yv[r * yn..(r + 1) * yn], &gy[r * yn..(r + 1) * yn]);
                        let dot = yr.iter().zip(gr).fold(S::zero(), |a, (&p, &g)| a + p * g);
                        for c in 0..yn {
                            gx[r * yn + c] = yr[c] * (gr[c] - dot);
                        }
                    }
                    add_into(slot(&mut grads, *x, ym * yn), &gx);
                }
                Op::LayerNorm {
                    x,
                    gain,
                    bias,
                    xhat,
                    inv_std,
                } => {
                    let gv = self.value(*gain).data();
                    let nn = S::from_f(yn as f64);
                    let mut gx = vec![S::zero(); ym * yn];
                    let mut ggain = vec![S::zero(); yn];
                    let mut gbias = vec![S::zero(); yn];
                    for r in 0..ym {
                        let (hr, gr) = (&xhat[r * yn..(r + 1) * yn], &gy[r * yn..(r + 1) * yn]);
                        let mut sum_dh = S::zero();
                        let mut sum_dh_h = S::zero();
                        for c in 0..yn {
                            ggain[c] += gr[c] * hr[c];
                            gbias[c] += gr[c];
                            let dh = gr[c] * gv[c];
                            sum_dh += dh;
                            sum_dh_h += dh * hr[c];
                        }
                        for c in 0..yn {
                            let dh = gr[c] * gv[c];
                            gx[r * yn + c] =
                                inv_std[r] / nn * (nn * dh - sum_dh - hr[c] * sum_dh_h);
                        }
                    }
                    add_into(slot(&mut grads, *x, ym * yn), &gx);
                    add_into(slot(&mut grads, *gain, yn), &ggain);
                    add_into(slot(&mut grads, *bias, yn), &gbias);
                }
                Op::SoftmaxCe {
                    logits,
                    targets,
                    probs,
                } => {
                    let (m, n) = self.dims(*logits);
                    let scale = gy[0] / S::from_f(m as f64);
                    let mut gx: Vec<S> = probs.iter().map(|&p| p * scale).collect();
                    for (r, &t) in targets.iter().enumerate() {
                        gx[r * n + t] -= scale;
                    }
                    add_into(slot(&mut grads, *logits, m * n), &gx);
                }
            }
        }
        Ok(out)
    }
}

fn slot<S: Scalar>(grads: &mut [Option<Vec<S>>], id: NodeId, len: usize) -> &mut Vec<S> {
    grads[id.0].get_or_insert_with(|| vec![S::zero(); len])
}

fn add_into<S: Scalar>(dst: &mut [S], src: &[S]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += *s;
    }
}

fn zip_map<S: Scalar>(a: &[S], b: &[S], f: impl Fn(S, S) -> S) -> Vec<S> {
    a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
}

fn sigmoid<S: Scalar>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}

fn softmax<S: Scalar>(row: &[S]) -> Vec<S> {
    let max = row.iter().fold(S::neg_infinity(), |a, &b| a.max(b));
    let exps: Vec<S> = row.iter().map(|&x| (x - max).exp()).collect();
    let total = exps.iter().fold(S::zero(), |a, &b| a + b);
    exps.into_iter().map(|e| e / total).collect()
}

/// `[m,k] · [k,n]`.
fn matmul<S: Scalar>(a: &[S], b: &[S], m: usize, k: usize, n: usize) -> Vec<S> {
    let mut out = vec![S::zero(); m * n];
    for i in 0..m {
        let orow = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == S::zero() {
                continue;
            }
            for (o, &bv) in orow.iter_mut().zip(&b[p * n..(p + 1) * n]) {
                *o += av * bv;
            }
        }
    }
    out
}

/// `[m,k] · [n,k]ᵀ`.
fn matmul_bt<S: Scalar>(a: &[S], b: &[S], m: usize, k: usize, n: usize) -> Vec<S> {
    let mut out = Vec::with_capacity(m * n);
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..n {
            let brow = &b[j * k..(j + 1) * k];
            out.push(arow.iter().zip(brow).fold(S::zero(), |acc, (&x, &y)| acc + x * y));
        }
    }
    out
}

/// `[m,k]ᵀ · [m,n]`.
fn matmul_at<S: Scalar>(a: &[S], b: &[S], m: usize, k: usize, n: usize) -> Vec<S> {
    let mut out = vec![S::zero(); k * n];
    for i in 0..m {
        let brow = &b[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == S::zero() {
                continue;
            }
            for (o, &bv) in out[p * n..(p + 1) * n].iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}
