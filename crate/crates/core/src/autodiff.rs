//! Tape-based reverse-mode differentiation over dense matrices.
//!
//! Every operation evaluates eagerly and appends a node to the [`Tape`].
//! [`Tape::backward`] walks the tape in reverse and returns the gradient of
//! a scalar (`1 x 1`) output with respect to every leaf.
//!
//! The op set is exactly what the three node models and their losses need;
//! fused ops (layer normalization, neighbor attention, the losses) keep the
//! tape short and their backward rules explicit.

use std::rc::Rc;

use crate::tensor::{dot, Matrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

const LAYER_NORM_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

enum Op {
    Leaf,
    MatMul(usize, usize),
    MatMulT(usize, usize),
    Add(usize, usize),
    AddRow(usize, usize),
    MulRow(usize, usize),
    Scale(usize, f64),
    GatherRows(usize, Vec<usize>),
    GatherTable {
        table: usize,
        row: usize,
        index: Rc<[usize]>,
    },
    ColSlice(usize, usize),
    ConcatCols(Vec<usize>),
    SoftmaxRows(usize),
    LayerNorm(usize, Vec<f64>),
    Gelu(usize),
    Tanh(usize),
    Elu(usize),
    NeighborAttention {
        src: usize,
        dst: usize,
        values: usize,
        neighbors: Rc<[Vec<usize>]>,
        slope: f64,
        pre: Vec<Vec<f64>>,
        weights: Vec<Vec<f64>>,
    },
    CrossEntropy(usize, Vec<Option<u8>>, Matrix),
    ExpectedDistance(usize, Vec<Option<u8>>, Matrix),
    SoftBinaryCe(usize, Vec<Option<u8>>),
    SquaredOrdinal(usize, Vec<Option<u8>>),
    WeightedSum(usize, Matrix),
}

struct Node {
    value: Matrix,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of one backward pass, indexed by leaf.
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    /// `None` when the output does not depend on `v`.
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Matrix> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

fn labeled_count(labels: &[Option<u8>]) -> usize {
    labels.iter().filter(|l| l.is_some()).count()
}

fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|&z| (z - max).exp()).sum::<f64>().ln()
}

fn softmax_rows(x: &Matrix) -> Matrix {
    let mut out = x.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    out
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + 0.044715 * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
}

fn accumulate(grads: &mut [Option<Matrix>], idx: usize, g: Matrix) {
    match &mut grads[idx] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        let m = self.value(v);
        debug_assert_eq!(m.shape(), (1, 1));
        m.get(0, 0)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).matmul(self.value(b));
        self.push(value, Op::MatMul(a.0, b.0))
    }

    /// `a * b^T`.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).matmul_t(self.value(b));
        self.push(value, Op::MatMulT(a.0, b.0))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let mut value = self.value(a).clone();
        value.add_assign(self.value(b));
        self.push(value, Op::Add(a.0, b.0))
    }

    /// Adds a `1 x cols` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let r = self.value(row);
        assert_eq!(r.shape(), (1, self.value(a).cols()), "add_row shape");
        let r = r.row(0).to_vec();
        let mut value = self.value(a).clone();
        for i in 0..value.rows() {
            for (v, b) in value.row_mut(i).iter_mut().zip(&r) {
                *v += b;
            }
        }
        self.push(value, Op::AddRow(a.0, row.0))
    }

    /// Multiplies every row of `a` elementwise by a `1 x cols` row.
    pub fn mul_row(&mut self, a: Var, row: Var) -> Var {
        let r = self.value(row);
        assert_eq!(r.shape(), (1, self.value(a).cols()), "mul_row shape");
        let r = r.row(0).to_vec();
        let mut value = self.value(a).clone();
        for i in 0..value.rows() {
            for (v, b) in value.row_mut(i).iter_mut().zip(&r) {
                *v *= b;
            }
        }
        self.push(value, Op::MulRow(a.0, row.0))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let value = self.value(a).map(|v| v * s);
        self.push(value, Op::Scale(a.0, s))
    }

    /// Row `index[i]` of `table` becomes row `i` of the output.
    pub fn gather_rows(&mut self, table: Var, index: Vec<usize>) -> Var {
        let t = self.value(table);
        let mut value = Matrix::zeros(index.len(), t.cols());
        for (i, &k) in index.iter().enumerate() {
            value.row_mut(i).copy_from_slice(t.row(k));
        }
        self.push(value, Op::GatherRows(table.0, index))
    }

    /// `out[i][j] = table[row][index[i * n + j]]`, an `n x n` matrix.
    pub fn gather_table(&mut self, table: Var, row: usize, index: Rc<[usize]>, n: usize) -> Var {
        assert_eq!(index.len(), n * n, "gather_table index length");
        let t = self.value(table).row(row);
        let value = Matrix::from_vec(n, n, index.iter().map(|&k| t[k]).collect());
        self.push(value, Op::GatherTable { table: table.0, row, index })
    }

    pub fn col_slice(&mut self, a: Var, start: usize, width: usize) -> Var {
        let src = self.value(a);
        let mut value = Matrix::zeros(src.rows(), width);
        for i in 0..src.rows() {
            value
                .row_mut(i)
                .copy_from_slice(&src.row(i)[start..start + width]);
        }
        self.push(value, Op::ColSlice(a.0, start))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows();
        let cols: usize = parts.iter().map(|p| self.value(*p).cols()).sum();
        let mut value = Matrix::zeros(rows, cols);
        for i in 0..rows {
            let mut offset = 0;
            for p in parts {
                let src = self.value(*p);
                let w = src.cols();
                value.row_mut(i)[offset..offset + w].copy_from_slice(src.row(i));
                offset += w;
            }
        }
        self.push(value, Op::ConcatCols(parts.iter().map(|p| p.0).collect()))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let value = softmax_rows(self.value(a));
        self.push(value, Op::SoftmaxRows(a.0))
    }

    /// Per-row standardization without affine terms.
    pub fn layer_norm(&mut self, a: Var) -> Var {
        let src = self.value(a);
        let mut value = src.clone();
        let mut inv_stds = Vec::with_capacity(src.rows());
        let n = src.cols() as f64;
        for i in 0..value.rows() {
            let row = value.row_mut(i);
            let mean = row.iter().sum::<f64>() / n;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let inv_std = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            for v in row.iter_mut() {
                *v = (*v - mean) * inv_std;
            }
            inv_stds.push(inv_std);
        }
        self.push(value, Op::LayerNorm(a.0, inv_stds))
    }

    /// Tanh-approximated GELU.
    pub fn gelu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(gelu);
        self.push(value, Op::Gelu(a.0))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::tanh);
        self.push(value, Op::Tanh(a.0))
    }

    pub fn elu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| if x > 0.0 { x } else { x.exp_m1() });
        self.push(value, Op::Elu(a.0))
    }

    /// Attention restricted to each node's neighbor list.
    ///
    /// For node `i` and each `j` in `neighbors[i]`, the score is
    /// `leaky_relu(dst[i] + src[j])`; scores are softmaxed over the list and
    /// the output row is the weighted sum of `values[j]`. Nodes outside the
    /// list contribute nothing, not even a multiplication by zero.
    pub fn neighbor_attention(
        &mut self,
        src: Var,
        dst: Var,
        values: Var,
        neighbors: Rc<[Vec<usize>]>,
        slope: f64,
    ) -> Var {
        let s = self.value(src);
        let d = self.value(dst);
        let v = self.value(values);
        let n = v.rows();
        assert_eq!(neighbors.len(), n, "neighbor list count");
        let mut out = Matrix::zeros(n, v.cols());
        let mut pre = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for i in 0..n {
            let e: Vec<f64> = neighbors[i]
                .iter()
                .map(|&j| d.get(i, 0) + s.get(j, 0))
                .collect();
            let z: Vec<f64> = e.iter().map(|&x| if x > 0.0 { x } else { slope * x }).collect();
            let w = crate::tensor::softmax(&z);
            let row = out.row_mut(i);
            for (&j, &a) in neighbors[i].iter().zip(&w) {
                for (o, &x) in row.iter_mut().zip(v.row(j)) {
                    *o += a * x;
                }
            }
            pre.push(e);
            weights.push(w);
        }
        self.push(
            out,
            Op::NeighborAttention {
                src: src.0,
                dst: dst.0,
                values: values.0,
                neighbors,
                slope,
                pre,
                weights,
            },
        )
    }

    /// Attention weights recorded by a [`Tape::neighbor_attention`] node.
    pub fn attention_weights(&self, v: Var) -> Option<&[Vec<f64>]> {
        match &self.nodes[v.0].op {
            Op::NeighborAttention { weights, .. } => Some(weights),
            _ => None,
        }
    }

    /// Mean cross-entropy of the gold class over labeled rows.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[Option<u8>]) -> Var {
        let z = self.value(logits);
        let m = labeled_count(labels) as f64;
        let probs = softmax_rows(z);
        let mut total = 0.0;
        for (i, l) in labels.iter().enumerate() {
            if let Some(g) = l {
                let row = z.row(i);
                total += log_sum_exp(row) - row[*g as usize];
            }
        }
        self.push(
            Matrix::filled(1, 1, total / m),
            Op::CrossEntropy(logits.0, labels.to_vec(), probs),
        )
    }

    /// Mean over labeled rows of `sum_c p_c * |c - gold|`.
    pub fn expected_distance(&mut self, logits: Var, labels: &[Option<u8>]) -> Var {
        let m = labeled_count(labels) as f64;
        let probs = softmax_rows(self.value(logits));
        let mut total = 0.0;
        for (i, l) in labels.iter().enumerate() {
            if let Some(g) = l {
                total += probs
                    .row(i)
                    .iter()
                    .enumerate()
                    .map(|(c, p)| p * (c as f64 - *g as f64).abs())
                    .sum::<f64>();
            }
        }
        self.push(
            Matrix::filled(1, 1, total / m),
            Op::ExpectedDistance(logits.0, labels.to_vec(), probs),
        )
    }

    /// Binary cross-entropy of `sigmoid(logit)` against the soft target
    /// `gold / 4`, averaged over labeled rows. `logits` is `n x 1`.
    pub fn soft_binary_ce(&mut self, logits: Var, labels: &[Option<u8>]) -> Var {
        let z = self.value(logits);
        let m = labeled_count(labels) as f64;
        let mut total = 0.0;
        for (i, l) in labels.iter().enumerate() {
            if let Some(g) = l {
                let zi = z.get(i, 0);
                total += softplus(zi) - f64::from(*g) / 4.0 * zi;
            }
        }
        self.push(
            Matrix::filled(1, 1, total / m),
            Op::SoftBinaryCe(logits.0, labels.to_vec()),
        )
    }

    /// Mean squared ordinal error `(4 * sigmoid(logit) - gold)^2`.
    pub fn squared_ordinal(&mut self, logits: Var, labels: &[Option<u8>]) -> Var {
        let z = self.value(logits);
        let m = labeled_count(labels) as f64;
        let mut total = 0.0;
        for (i, l) in labels.iter().enumerate() {
            if let Some(g) = l {
                let r = 4.0 * sigmoid(z.get(i, 0)) - f64::from(*g);
                total += r * r;
            }
        }
        self.push(
            Matrix::filled(1, 1, total / m),
            Op::SquaredOrdinal(logits.0, labels.to_vec()),
        )
    }

    /// `sum(a ⊙ weights)` as a `1 x 1` value; `weights` is a constant.
    pub fn weighted_sum(&mut self, a: Var, weights: Matrix) -> Var {
        assert_eq!(self.value(a).shape(), weights.shape(), "weighted_sum shape");
        let total = dot(self.value(a).data(), weights.data());
        self.push(Matrix::filled(1, 1, total), Op::WeightedSum(a.0, weights))
    }

    /// Gradients of the scalar `output` with respect to every leaf.
    pub fn backward(&self, output: Var) -> Gradients {
        assert_eq!(self.value(output).shape(), (1, 1), "backward needs a scalar");
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(Matrix::filled(1, 1, 1.0));

        for idx in (0..=output.0).rev() {
            let node = &self.nodes[idx];
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            let y = &node.value;
            match &node.op {
                Op::Leaf => unreachable!(),
                Op::MatMul(a, b) => {
                    let (va, vb) = (&self.nodes[*a].value, &self.nodes[*b].value);
                    accumulate(&mut grads, *a, g.matmul_t(vb));
                    accumulate(&mut grads, *b, va.t_matmul(&g));
                }
                Op::MatMulT(a, b) => {
                    let (va, vb) = (&self.nodes[*a].value, &self.nodes[*b].value);
                    accumulate(&mut grads, *a, g.matmul(vb));
                    accumulate(&mut grads, *b, g.t_matmul(va));
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *b, g.clone());
                    accumulate(&mut grads, *a, g);
                }
                Op::AddRow(a, r) => {
                    accumulate(&mut grads, *r, g.sum_rows());
                    accumulate(&mut grads, *a, g);
                }
                Op::MulRow(a, r) => {
                    let va = &self.nodes[*a].value;
                    let vr = self.nodes[*r].value.row(0);
                    let mut da = g.clone();
                    let mut dr = Matrix::zeros(1, vr.len());
                    for i in 0..g.rows() {
                        for (c, (d, &gi)) in da.row_mut(i).iter_mut().zip(g.row(i)).enumerate() {
                            *d = gi * vr[c];
                        }
                        for (c, (&gi, &ai)) in g.row(i).iter().zip(va.row(i)).enumerate() {
                            dr.data_mut()[c] += gi * ai;
                        }
                    }
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *r, dr);
                }
                Op::Scale(a, s) => accumulate(&mut grads, *a, g.map(|v| v * s)),
                Op::GatherRows(t, index) => {
                    let vt = &self.nodes[*t].value;
                    let mut dt = Matrix::zeros(vt.rows(), vt.cols());
                    for (i, &k) in index.iter().enumerate() {
                        for (d, &gi) in dt.row_mut(k).iter_mut().zip(g.row(i)) {
                            *d += gi;
                        }
                    }
                    accumulate(&mut grads, *t, dt);
                }
                Op::GatherTable { table, row, index } => {
                    let vt = &self.nodes[*table].value;
                    let mut dt = Matrix::zeros(vt.rows(), vt.cols());
                    let trow = dt.row_mut(*row);
                    for (&k, &gi) in index.iter().zip(g.data()) {
                        trow[k] += gi;
                    }
                    accumulate(&mut grads, *table, dt);
                }
                Op::ColSlice(a, start) => {
                    let va = &self.nodes[*a].value;
                    let mut da = Matrix::zeros(va.rows(), va.cols());
                    let w = g.cols();
                    for i in 0..g.rows() {
                        da.row_mut(i)[*start..start + w].copy_from_slice(g.row(i));
                    }
                    accumulate(&mut grads, *a, da);
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let w = self.nodes[p].value.cols();
                        let mut dp = Matrix::zeros(g.rows(), w);
                        for i in 0..g.rows() {
                            dp.row_mut(i).copy_from_slice(&g.row(i)[offset..offset + w]);
                        }
                        offset += w;
                        accumulate(&mut grads, p, dp);
                    }
                }
                Op::SoftmaxRows(a) => {
                    let mut da = g.clone();
                    for i in 0..g.rows() {
                        let s = dot(g.row(i), y.row(i));
                        for (d, (&gi, &yi)) in da.row_mut(i).iter_mut().zip(g.row(i).iter().zip(y.row(i))) {
                            *d = yi * (gi - s);
                        }
                    }
                    accumulate(&mut grads, *a, da);
                }
                Op::LayerNorm(a, inv_stds) => {
                    let n = g.cols() as f64;
                    let mut da = g.clone();
                    for i in 0..g.rows() {
                        let gr = g.row(i);
                        let yr = y.row(i);
                        let mean_g = gr.iter().sum::<f64>() / n;
                        let mean_gy = dot(gr, yr) / n;
                        for (d, (&gi, &yi)) in da.row_mut(i).iter_mut().zip(gr.iter().zip(yr)) {
                            *d = inv_stds[i] * (gi - mean_g - yi * mean_gy);
                        }
                    }
                    accumulate(&mut grads, *a, da);
                }
                Op::Gelu(a) => {
                    let x = &self.nodes[*a].value;
                    let mut da = g;
                    for (d, &xi) in da.data_mut().iter_mut().zip(x.data()) {
                        *d *= gelu_grad(xi);
                    }
                    accumulate(&mut grads, *a, da);
                }
                Op::Tanh(a) => {
                    let mut da = g;
                    for (d, &yi) in da.data_mut().iter_mut().zip(y.data()) {
                        *d *= 1.0 - yi * yi;
                    }
                    accumulate(&mut grads, *a, da);
                }
                Op::Elu(a) => {
                    let x = &self.nodes[*a].value;
                    let mut da = g;
                    for ((d, &xi), &yi) in da.data_mut().iter_mut().zip(x.data()).zip(y.data()) {
                        if xi <= 0.0 {
                            *d *= yi + 1.0;
                        }
                    }
                    accumulate(&mut grads, *a, da);
                }
                Op::NeighborAttention {
                    src,
                    dst,
                    values,
                    neighbors,
                    slope,
                    pre,
                    weights,
                } => {
                    let v = &self.nodes[*values].value;
                    let n = v.rows();
                    let mut ds = Matrix::zeros(n, 1);
                    let mut dd = Matrix::zeros(n, 1);
                    let mut dv = Matrix::zeros(n, v.cols());
                    for i in 0..n {
                        let gi = g.row(i);
                        let nb = &neighbors[i];
                        let w = &weights[i];
                        let dw: Vec<f64> = nb.iter().map(|&j| dot(gi, v.row(j))).collect();
                        let mix = dot(w, &dw);
                        for (k, &j) in nb.iter().enumerate() {
                            for (d, &x) in dv.row_mut(j).iter_mut().zip(gi) {
                                *d += w[k] * x;
                            }
                            let dz = w[k] * (dw[k] - mix);
                            let de = if pre[i][k] > 0.0 { dz } else { slope * dz };
                            dd.data_mut()[i] += de;
                            ds.data_mut()[j] += de;
                        }
                    }
                    accumulate(&mut grads, *src, ds);
                    accumulate(&mut grads, *dst, dd);
                    accumulate(&mut grads, *values, dv);
                }
                Op::CrossEntropy(a, labels, probs) => {
                    let scale = g.get(0, 0) / labeled_count(labels) as f64;
                    let mut da = Matrix::zeros(probs.rows(), probs.cols());
                    for (i, l) in labels.iter().enumerate() {
                        if let Some(gold) = l {
                            for (d, &p) in da.row_mut(i).iter_mut().zip(probs.row(i)) {
                                *d = p * scale;
                            }
                            da.row_mut(i)[*gold as usize] -= scale;
                        }
                    }
                    accumulate(&mut grads, *a, da);
                }
                Op::ExpectedDistance(a, labels, probs) => {
                    let scale = g.get(0, 0) / labeled_count(labels) as f64;
                    let mut da = Matrix::zeros(probs.rows(), probs.cols());
                    for (i, l) in labels.iter().enumerate() {
                        if let Some(gold) = l {
                            let p = probs.row(i);
                            let w: Vec<f64> = (0..p.len()).map(|c| (c as f64 - *gold as f64).abs()).collect();
                            let expected = dot(p, &w);
                            for (c, d) in da.row_mut(i).iter_mut().enumerate() {
                                *d = scale * p[c] * (w[c] - expected);
                            }
                        }
                    }
                    accumulate(&mut grads, *a, da);
                }
                Op::SoftBinaryCe(a, labels) => {
                    let z = &self.nodes[*a].value;
                    let scale = g.get(0, 0) / labeled_count(labels) as f64;
                    let mut da = Matrix::zeros(z.rows(), 1);
                    for (i, l) in labels.iter().enumerate() {
                        if let Some(gold) = l {
                            da.data_mut()[i] = scale * (sigmoid(z.get(i, 0)) - f64::from(*gold) / 4.0);
                        }
                    }
                    accumulate(&mut grads, *a, da);
                }
                Op::SquaredOrdinal(a, labels) => {
                    let z = &self.nodes[*a].value;
                    let scale = g.get(0, 0) / labeled_count(labels) as f64;
                    let mut da = Matrix::zeros(z.rows(), 1);
                    for (i, l) in labels.iter().enumerate() {
                        if let Some(gold) = l {
                            let s = sigmoid(z.get(i, 0));
                            let r = 4.0 * s - f64::from(*gold);
                            da.data_mut()[i] = scale * 2.0 * r * 4.0 * s * (1.0 - s);
                        }
                    }
                    accumulate(&mut grads, *a, da);
                }
                Op::WeightedSum(a, w) => accumulate(&mut grads, *a, w.map(|x| x * g.get(0, 0))),
            }
        }

        for (i, node) in self.nodes.iter().enumerate() {
            if !matches!(node.op, Op::Leaf) {
                grads[i] = None;
            }
        }
        Gradients { grads }
    }
}

pub(crate) fn sigmoid_scalar(z: f64) -> f64 {
    sigmoid(z)
}
