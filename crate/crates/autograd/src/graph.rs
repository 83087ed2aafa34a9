//! Tape-based reverse-mode differentiation over 2-D tensors.
//!
//! A [`Graph`] records every op applied during a forward pass. Parameter
//! leaves borrow their values from a [`ParamStore`], so building a graph never
//! copies weights. [`Graph::backward`] walks the tape in reverse and returns
//! [`Gradients`] keyed by parameter; callers merge them into the store.
//!
//! Every reduction runs in ascending index order, so forward and backward
//! passes are bit-reproducible for identical inputs.

use crate::error::{shape_err, Result, TensorError};
use crate::params::{Gradients, ParamId, ParamStore};
use crate::tensor::{gemm, Tensor};

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    Rows,
    Cols,
}

#[derive(Debug)]
enum Op {
    Constant,
    Param(ParamId),
    MatMul(Var, Var),
    MatMulNt(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Softmax(Var),
    LayerNorm { x: Var, inv_std: Vec<f64> },
    Relu(Var),
    Gelu(Var),
    Embedding { table: Var, ids: Vec<usize> },
    ConcatRows(Vec<Var>),
    ConcatCols(Vec<Var>),
    SliceRows(Var, usize),
    SliceCols(Var, usize),
    Reshape(Var),
    Transpose(Var),
    Sum(Var, Axis),
    Mean(Var, Axis),
    SumAll(Var),
    CrossEntropy { logits: Var, probs: Tensor, targets: Vec<usize>, mask: Vec<bool>, count: usize },
    Sse { input: Var, wavelengths: Var },
}

struct Node {
    value: Option<Tensor>,
    op: Op,
}

pub struct Graph<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Self {
            params,
            nodes: Vec::new(),
        }
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        let node = &self.nodes[v.0];
        match (&node.op, &node.value) {
            (Op::Param(id), _) => self.params.value(*id),
            (_, Some(t)) => t,
            (_, None) => unreachable!("non-param node without value"),
        }
    }

    fn push(&mut self, value: Tensor, op: Op, name: &'static str) -> Result<Var> {
        if cfg!(debug_assertions) && !value.is_finite() {
            return Err(TensorError::NonFinite { op: name });
        }
        self.nodes.push(Node {
            value: Some(value),
            op,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value: Some(value),
            op: Op::Constant,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        self.nodes.push(Node {
            value: None,
            op: Op::Param(id),
        });
        Var(self.nodes.len() - 1)
    }

    fn dims2(&self, v: Var) -> (usize, usize) {
        let t = self.value(v);
        (t.rows(), t.cols())
    }

    /// `[m, k] @ [k, n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.dims2(a);
        let (k2, n) = self.dims2(b);
        if k != k2 {
            return Err(shape_err("matmul", format!("[{m},{k}] @ [{k2},{n}]")));
        }
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, self.value(a).data(), false, self.value(b).data(), false, &mut out, 0.0);
        self.push(Tensor::matrix(m, n, out)?, Op::MatMul(a, b), "matmul")
    }

    /// `[m, k] @ [n, k]^T`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.dims2(a);
        let (n, k2) = self.dims2(b);
        if k != k2 {
            return Err(shape_err("matmul_nt", format!("[{m},{k}] @ [{n},{k2}]^T")));
        }
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, self.value(a).data(), false, self.value(b).data(), true, &mut out, 0.0);
        self.push(Tensor::matrix(m, n, out)?, Op::MatMulNt(a, b), "matmul_nt")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err("add", format!("{:?} + {:?}", ta.shape(), tb.shape())));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x + y).collect();
        let out = Tensor::new(ta.shape().to_vec(), data)?;
        self.push(out, Op::Add(a, b), "add")
    }

    /// Adds a length-`n` row vector to every row of an `[m, n]` matrix.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (m, n) = self.dims2(a);
        let tr = self.value(row);
        if tr.len() != n {
            return Err(shape_err("add_row", format!("[{m},{n}] + row of {}", tr.len())));
        }
        let ta = self.value(a);
        let mut data = ta.data().to_vec();
        for r in 0..m {
            for (x, b) in data[r * n..(r + 1) * n].iter_mut().zip(tr.data()) {
                *x += b;
            }
        }
        let out = Tensor::new(ta.shape().to_vec(), data)?;
        self.push(out, Op::AddRow(a, row), "add_row")
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err("mul", format!("{:?} * {:?}", ta.shape(), tb.shape())));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x * y).collect();
        let out = Tensor::new(ta.shape().to_vec(), data)?;
        self.push(out, Op::Mul(a, b), "mul")
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let ta = self.value(a);
        let data = ta.data().iter().map(|x| x * c).collect();
        let out = Tensor::new(ta.shape().to_vec(), data)?;
        self.push(out, Op::Scale(a, c), "scale")
    }

    /// Row-wise softmax.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let ta = self.value(a);
        let (m, n) = (ta.rows(), ta.cols());
        let mut data = ta.data().to_vec();
        for r in 0..m {
            softmax_in_place(&mut data[r * n..(r + 1) * n]);
        }
        let out = Tensor::new(ta.shape().to_vec(), data)?;
        self.push(out, Op::Softmax(a), "softmax")
    }

    /// Row-wise normalization to zero mean and unit (biased) variance. No affine part.
    pub fn layer_norm(&mut self, a: Var, eps: f64) -> Result<Var> {
        let ta = self.value(a);
        let (m, n) = (ta.rows(), ta.cols());
        let mut data = ta.data().to_vec();
        let mut inv_std = Vec::with_capacity(m);
        for r in 0..m {
            let row = &mut data[r * n..(r + 1) * n];
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
            let is = 1.0 / (var + eps).sqrt();
            for x in row.iter_mut() {
                *x = (*x - mean) * is;
            }
            inv_std.push(is);
        }
        let out = Tensor::new(ta.shape().to_vec(), data)?;
        self.push(out, Op::LayerNorm { x: a, inv_std }, "layer_norm")
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let ta = self.value(a);
        let data = ta.data().iter().map(|x| x.max(0.0)).collect();
        let out = Tensor::new(ta.shape().to_vec(), data)?;
        self.push(out, Op::Relu(a), "relu")
    }

    /// Tanh-approximated GELU.
    pub fn gelu(&mut self, a: Var) -> Result<Var> {
        let ta = self.value(a);
        let data = ta
            .data()
            .iter()
            .map(|&x| 0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh()))
            .collect();
        let out = Tensor::new(ta.shape().to_vec(), data)?;
        self.push(out, Op::Gelu(a), "gelu")
    }

    /// Gathers rows of a `[V, H]` table.
    pub fn embedding(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let tt = self.value(table);
        let (v, h) = (tt.rows(), tt.cols());
        let mut data = Vec::with_capacity(ids.len() * h);
        for &id in ids {
            if id >= v {
                return Err(TensorError::IndexOutOfRange {
                    op: "embedding",
                    index: id,
                    len: v,
                });
            }
            data.extend_from_slice(tt.row(id));
        }
        let out = Tensor::matrix(ids.len(), h, data)?;
        self.push(out, Op::Embedding { table, ids: ids.to_vec() }, "embedding")
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(shape_err("concat_rows", "no inputs"));
        };
        let n = self.value(first).cols();
        let mut data = Vec::new();
        let mut m = 0;
        for &p in parts {
            let t = self.value(p);
            if t.cols() != n {
                return Err(shape_err("concat_rows", format!("cols {} vs {n}", t.cols())));
            }
            m += t.rows();
            data.extend_from_slice(t.data());
        }
        let out = Tensor::matrix(m, n, data)?;
        self.push(out, Op::ConcatRows(parts.to_vec()), "concat_rows")
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(shape_err("concat_cols", "no inputs"));
        };
        let m = self.value(first).rows();
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let t = self.value(p);
            if t.rows() != m {
                return Err(shape_err("concat_cols", format!("rows {} vs {m}", t.rows())));
            }
            widths.push(t.cols());
        }
        let n: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(m * n);
        for r in 0..m {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(r));
            }
        }
        let out = Tensor::matrix(m, n, data)?;
        self.push(out, Op::ConcatCols(parts.to_vec()), "concat_cols")
    }

    /// Rows `start..end`.
    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let (m, n) = self.dims2(a);
        if start > end || end > m {
            return Err(shape_err("slice_rows", format!("{start}..{end} of {m}")));
        }
        let data = self.value(a).data()[start * n..end * n].to_vec();
        let out = Tensor::matrix(end - start, n, data)?;
        self.push(out, Op::SliceRows(a, start), "slice_rows")
    }

    /// Columns `start..end`.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let (m, n) = self.dims2(a);
        if start > end || end > n {
            return Err(shape_err("slice_cols", format!("{start}..{end} of {n}")));
        }
        let ta = self.value(a);
        let mut data = Vec::with_capacity(m * (end - start));
        for r in 0..m {
            data.extend_from_slice(&ta.row(r)[start..end]);
        }
        let out = Tensor::matrix(m, end - start, data)?;
        self.push(out, Op::SliceCols(a, start), "slice_cols")
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let ta = self.value(a);
        let out = Tensor::new(shape.to_vec(), ta.data().to_vec())?;
        self.push(out, Op::Reshape(a), "reshape")
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let (m, n) = self.dims2(a);
        let ta = self.value(a);
        let mut data = vec![0.0; m * n];
        for r in 0..m {
            for c in 0..n {
                data[c * m + r] = ta.data()[r * n + c];
            }
        }
        let out = Tensor::matrix(n, m, data)?;
        self.push(out, Op::Transpose(a), "transpose")
    }

    /// `Axis::Rows` collapses rows (`[m,n] -> [1,n]`), `Axis::Cols` collapses columns (`[m,n] -> [m,1]`).
    pub fn sum(&mut self, a: Var, axis: Axis) -> Result<Var> {
        let out = reduce(self.value(a), axis, 1.0)?;
        self.push(out, Op::Sum(a, axis), "sum")
    }

    pub fn mean(&mut self, a: Var, axis: Axis) -> Result<Var> {
        let t = self.value(a);
        let count = match axis {
            Axis::Rows => t.rows(),
            Axis::Cols => t.cols(),
        };
        let out = reduce(t, axis, 1.0 / count.max(1) as f64)?;
        self.push(out, Op::Mean(a, axis), "mean")
    }

    pub fn sum_all(&mut self, a: Var) -> Result<Var> {
        let s = self.value(a).data().iter().sum::<f64>();
        self.push(Tensor::scalar(s), Op::SumAll(a), "sum_all")
    }

    /// Mean token cross-entropy over rows whose `mask` entry is true.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize], mask: &[bool]) -> Result<Var> {
        let tl = self.value(logits);
        let (t, v) = (tl.rows(), tl.cols());
        if targets.len() != t || mask.len() != t {
            return Err(shape_err(
                "cross_entropy",
                format!("{t} rows, {} targets, {} mask", targets.len(), mask.len()),
            ));
        }
        let mut probs = tl.data().to_vec();
        let mut total = 0.0;
        let mut count = 0;
        for r in 0..t {
            let row = &mut probs[r * v..(r + 1) * v];
            let logits_row = tl.row(r);
            let max = logits_row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + logits_row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
            softmax_in_place(row);
            if mask[r] {
                let y = targets[r];
                if y >= v {
                    return Err(TensorError::IndexOutOfRange {
                        op: "cross_entropy",
                        index: y,
                        len: v,
                    });
                }
                total += lse - logits_row[y];
                count += 1;
            }
        }
        let loss = if count == 0 { 0.0 } else { total / count as f64 };
        let probs = Tensor::matrix(t, v, probs)?;
        self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy {
                logits,
                probs,
                targets: targets.to_vec(),
                mask: mask.to_vec(),
                count,
            },
            "cross_entropy",
        )
    }

    /// Sinusoidal embedding of a column of scalars: `[n, 1]` -> `[n, 2W]`
    /// with `out[r, 2i] = sin(s_r / w_i)` and `out[r, 2i+1] = cos(s_r / w_i)`.
    pub fn sse(&mut self, input: Var, wavelengths: Var) -> Result<Var> {
        let ts = self.value(input);
        let tw = self.value(wavelengths);
        if ts.cols() != 1 && ts.shape().len() != 1 {
            return Err(shape_err("sse", format!("input {:?} is not a column", ts.shape())));
        }
        let n = ts.len();
        let w = tw.len();
        let mut data = Vec::with_capacity(n * 2 * w);
        for &s in ts.data() {
            for &wi in tw.data() {
                let (sin, cos) = (s / wi).sin_cos();
                data.push(sin);
                data.push(cos);
            }
        }
        let out = Tensor::matrix(n, 2 * w, data)?;
        self.push(out, Op::Sse { input, wavelengths }, "sse")
    }

    /// Reverse pass from a single-element `loss`, seeded with `1.0`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        self.backward_with_seed(loss, 1.0)
    }

    pub fn backward_with_seed(&self, loss: Var, seed: f64) -> Result<Gradients> {
        let lt = self.value(loss);
        if lt.len() != 1 {
            return Err(shape_err("backward", format!("loss has shape {:?}", lt.shape())));
        }
        let mut grads: Vec<Option<Tensor>> = Vec::with_capacity(loss.0 + 1);
        grads.resize_with(loss.0 + 1, || None);
        grads[loss.0] = Some(Tensor::new(lt.shape().to_vec(), vec![seed])?);
        let mut out = Gradients::new(self.params.len());

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => out.add(*id, &g),
                Op::MatMul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
                    let mut ga = vec![0.0; m * k];
                    gemm(m, n, k, g.data(), false, tb.data(), true, &mut ga, 0.0);
                    let mut gb = vec![0.0; k * n];
                    gemm(k, m, n, ta.data(), true, g.data(), false, &mut gb, 0.0);
                    accumulate(&mut grads, *a, ta.shape(), ga);
                    accumulate(&mut grads, *b, tb.shape(), gb);
                }
                Op::MatMulNt(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let (m, k, n) = (ta.rows(), ta.cols(), tb.rows());
                    let mut ga = vec![0.0; m * k];
                    gemm(m, n, k, g.data(), false, tb.data(), false, &mut ga, 0.0);
                    let mut gb = vec![0.0; n * k];
                    gemm(n, m, k, g.data(), true, ta.data(), false, &mut gb, 0.0);
                    accumulate(&mut grads, *a, ta.shape(), ga);
                    accumulate(&mut grads, *b, tb.shape(), gb);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.shape(), g.data().to_vec());
                    accumulate(&mut grads, *b, g.shape(), g.data().to_vec());
                }
                Op::AddRow(a, row) => {
                    let n = g.cols();
                    let mut gr = vec![0.0; n];
                    for r in 0..g.rows() {
                        for (acc, x) in gr.iter_mut().zip(g.row(r)) {
                            *acc += x;
                        }
                    }
                    accumulate(&mut grads, *a, g.shape(), g.data().to_vec());
                    let row_shape = self.value(*row).shape().to_vec();
                    accumulate(&mut grads, *row, &row_shape, gr);
                }
                Op::Mul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let ga = g.data().iter().zip(tb.data()).map(|(x, y)| x * y).collect();
                    let gb = g.data().iter().zip(ta.data()).map(|(x, y)| x * y).collect();
                    accumulate(&mut grads, *a, ta.shape(), ga);
                    accumulate(&mut grads, *b, tb.shape(), gb);
                }
                Op::Scale(a, c) => {
                    let ga = g.data().iter().map(|x| x * c).collect();
                    accumulate(&mut grads, *a, g.shape(), ga);
                }
                Op::Softmax(a) => {
                    let y = node.value.as_ref().expect("softmax value");
                    let n = y.cols();
                    let mut ga = vec![0.0; y.len()];
                    for r in 0..y.rows() {
                        let (yr, gr) = (y.row(r), g.row(r));
                        let dot: f64 = yr.iter().zip(gr).map(|(p, q)| p * q).sum();
                        for c in 0..n {
                            ga[r * n + c] = yr[c] * (gr[c] - dot);
                        }
                    }
                    accumulate(&mut grads, *a, y.shape(), ga);
                }
                Op::LayerNorm { x, inv_std } => {
                    let y = node.value.as_ref().expect("layer_norm value");
                    let n = y.cols();
                    let nf = n as f64;
                    let mut gx = vec![0.0; y.len()];
                    for r in 0..y.rows() {
                        let (yr, gr) = (y.row(r), g.row(r));
                        let mean_g = gr.iter().sum::<f64>() / nf;
                        let mean_gy = gr.iter().zip(yr).map(|(p, q)| p * q).sum::<f64>() / nf;
                        for c in 0..n {
                            gx[r * n + c] = inv_std[r] * (gr[c] - mean_g - yr[c] * mean_gy);
                        }
                    }
                    accumulate(&mut grads, *x, y.shape(), gx);
                }
                Op::Relu(a) => {
                    let ta = self.value(*a);
                    let ga = g
                        .data()
                        .iter()
                        .zip(ta.data())
                        .map(|(d, x)| if *x > 0.0 { *d } else { 0.0 })
                        .collect();
                    accumulate(&mut grads, *a, ta.shape(), ga);
                }
                Op::Gelu(a) => {
                    let ta = self.value(*a);
                    let ga = g
                        .data()
                        .iter()
                        .zip(ta.data())
                        .map(|(d, &x)| {
                            let t = (GELU_C * (x + GELU_A * x * x * x)).tanh();
                            let dt = (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x);
                            d * (0.5 * (1.0 + t) + 0.5 * x * dt)
                        })
                        .collect();
                    accumulate(&mut grads, *a, ta.shape(), ga);
                }
                Op::Embedding { table, ids } => {
                    let tt = self.value(*table);
                    let h = tt.cols();
                    let mut gt = vec![0.0; tt.len()];
                    for (r, &id) in ids.iter().enumerate() {
                        for (acc, x) in gt[id * h..(id + 1) * h].iter_mut().zip(g.row(r)) {
                            *acc += x;
                        }
                    }
                    accumulate(&mut grads, *table, tt.shape(), gt);
                }
                Op::ConcatRows(parts) => {
                    let n = g.cols();
                    let mut offset = 0;
                    for p in parts {
                        let shape = self.value(*p).shape().to_vec();
                        let rows = self.value(*p).rows();
                        let gp = g.data()[offset * n..(offset + rows) * n].to_vec();
                        accumulate(&mut grads, *p, &shape, gp);
                        offset += rows;
                    }
                }
                Op::ConcatCols(parts) => {
                    let m = g.rows();
                    let mut offset = 0;
                    for p in parts {
                        let shape = self.value(*p).shape().to_vec();
                        let w = self.value(*p).cols();
                        let mut gp = Vec::with_capacity(m * w);
                        for r in 0..m {
                            gp.extend_from_slice(&g.row(r)[offset..offset + w]);
                        }
                        accumulate(&mut grads, *p, &shape, gp);
                        offset += w;
                    }
                }
                Op::SliceRows(a, start) => {
                    let ta = self.value(*a);
                    let n = ta.cols();
                    let mut ga = vec![0.0; ta.len()];
                    ga[start * n..start * n + g.len()].copy_from_slice(g.data());
                    accumulate(&mut grads, *a, ta.shape(), ga);
                }
                Op::SliceCols(a, start) => {
                    let ta = self.value(*a);
                    let n = ta.cols();
                    let w = g.cols();
                    let mut ga = vec![0.0; ta.len()];
                    for r in 0..g.rows() {
                        ga[r * n + start..r * n + start + w].copy_from_slice(g.row(r));
                    }
                    accumulate(&mut grads, *a, ta.shape(), ga);
                }
                Op::Reshape(a) => {
                    let shape = self.value(*a).shape().to_vec();
                    accumulate(&mut grads, *a, &shape, g.data().to_vec());
                }
                Op::Transpose(a) => {
                    let ta = self.value(*a);
                    let (m, n) = (ta.rows(), ta.cols());
                    let mut ga = vec![0.0; m * n];
                    for r in 0..m {
                        for c in 0..n {
                            ga[r * n + c] = g.data()[c * m + r];
                        }
                    }
                    accumulate(&mut grads, *a, ta.shape(), ga);
                }
                Op::Sum(a, axis) | Op::Mean(a, axis) => {
                    let ta = self.value(*a);
                    let (m, n) = (ta.rows(), ta.cols());
                    let factor = match (&node.op, axis) {
                        (Op::Mean(..), Axis::Rows) => 1.0 / m as f64,
                        (Op::Mean(..), Axis::Cols) => 1.0 / n as f64,
                        _ => 1.0,
                    };
                    let mut ga = vec![0.0; m * n];
                    for r in 0..m {
                        for c in 0..n {
                            let gi = match axis {
                                Axis::Rows => g.data()[c],
                                Axis::Cols => g.data()[r],
                            };
                            ga[r * n + c] = gi * factor;
                        }
                    }
                    accumulate(&mut grads, *a, ta.shape(), ga);
                }
                Op::SumAll(a) => {
                    let ta = self.value(*a);
                    accumulate(&mut grads, *a, ta.shape(), vec![g.item(); ta.len()]);
                }
                Op::CrossEntropy {
                    logits,
                    probs,
                    targets,
                    mask,
                    count,
                } => {
                    let v = probs.cols();
                    let mut gl = vec![0.0; probs.len()];
                    if *count > 0 {
                        let scale = g.item() / *count as f64;
                        for r in 0..probs.rows() {
                            if !mask[r] {
                                continue;
                            }
                            for c in 0..v {
                                gl[r * v + c] = probs.data()[r * v + c] * scale;
                            }
                            gl[r * v + targets[r]] -= scale;
                        }
                    }
                    accumulate(&mut grads, *logits, probs.shape(), gl);
                }
                Op::Sse { input, wavelengths } => {
                    let ts = self.value(*input);
                    let tw = self.value(*wavelengths);
                    let w = tw.len();
                    let mut gs = vec![0.0; ts.len()];
                    let mut gw = vec![0.0; w];
                    for (r, &s) in ts.data().iter().enumerate() {
                        for (i, &wi) in tw.data().iter().enumerate() {
                            let (sin, cos) = (s / wi).sin_cos();
                            let g_sin = g.data()[r * 2 * w + 2 * i];
                            let g_cos = g.data()[r * 2 * w + 2 * i + 1];
                            // d/du sin(u) = cos(u), d/du cos(u) = -sin(u), u = s / w
                            let du = g_sin * cos - g_cos * sin;
                            gs[r] += du / wi;
                            gw[i] -= du * s / (wi * wi);
                        }
                    }
                    let (ss, ws) = (ts.shape().to_vec(), tw.shape().to_vec());
                    accumulate(&mut grads, *input, &ss, gs);
                    accumulate(&mut grads, *wavelengths, &ws, gw);
                }
            }
        }
        Ok(out)
    }
}

fn accumulate(grads: &mut [Option<Tensor>], v: Var, shape: &[usize], data: Vec<f64>) {
    match &mut grads[v.0] {
        Some(acc) => {
            for (a, b) in acc.data_mut().iter_mut().zip(&data) {
                *a += b;
            }
        }
        slot @ None => *slot = Some(Tensor::new(shape.to_vec(), data).expect("gradient shape")),
    }
}

fn reduce(t: &Tensor, axis: Axis, factor: f64) -> Result<Tensor> {
    let (m, n) = (t.rows(), t.cols());
    match axis {
        Axis::Rows => {
            let mut out = vec![0.0; n];
            for r in 0..m {
                for (acc, x) in out.iter_mut().zip(t.row(r)) {
                    *acc += x;
                }
            }
            out.iter_mut().for_each(|x| *x *= factor);
            Tensor::matrix(1, n, out)
        }
        Axis::Cols => {
            let out = (0..m).map(|r| t.row(r).iter().sum::<f64>() * factor).collect();
            Tensor::matrix(m, 1, out)
        }
    }
}

/// Numerically stable in-place softmax of one row.
pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in row.iter_mut() {
        *x /= sum;
    }
}
