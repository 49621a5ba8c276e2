//! Reverse-mode tape.
//!
//! A [`Graph`] records every operation as a node that refers to its inputs by
//! index. Inputs always precede their consumers, so walking the node list
//! backwards is a valid reverse topological order.

use crate::kernels::{gemm_nn, gemm_nt, gemm_tn};
use crate::tensor::split_at_axis;
use crate::{DiffError, Tensor};

const LAYER_NORM_EPS: f64 = 1e-5;

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    /// `b` is broadcast over the leading dimensions of `a`.
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    /// `a[.., m, k] · b[k, n]`
    MatMulShared { a: Var, b: Var, m: usize, k: usize, n: usize },
    /// `a[batch, m, k] · b[batch, k, n]`, or with `b` transposed when `bt`.
    MatMulBatched { a: Var, b: Var, batch: usize, m: usize, k: usize, n: usize, bt: bool },
    Reshape(Var),
    Permute { x: Var, perm: Vec<usize> },
    Softmax { x: Var, axis: usize },
    LogSoftmax { x: Var, axis: usize },
    LayerNorm { x: Var, gain: Var, bias: Var, xhat: Vec<f64>, rstd: Vec<f64> },
    Relu(Var),
    Concat { inputs: Vec<Var>, axis: usize },
    Cumsum { x: Var, axis: usize },
    /// Picks `x[b, idx[b], ..]` for every `b`.
    Gather { x: Var, idx: Vec<usize> },
    Sum(Var),
    Mean(Var),
    SumSq(Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
    grad: Option<Tensor>,
}

/// Operation tape. Build values with the op methods, then call
/// [`Graph::backward`] on a scalar.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Adds an input tensor.
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op: Op::Leaf, requires_grad, grad: None });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Gradient accumulated by [`Graph::backward`], if the node was reached.
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.nodes[v.0].grad.as_ref()
    }

    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    fn push(&mut self, value: Tensor, op: Op, inputs: &[Var]) -> Var {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node { value, op, requires_grad, grad: None });
        Var(self.nodes.len() - 1)
    }

    fn check_axis(&self, x: Var, axis: usize) -> Result<(), DiffError> {
        let rank = self.shape(x).len();
        if axis >= rank {
            Err(DiffError::Axis { axis, rank })
        } else {
            Ok(())
        }
    }

    // ----- elementwise -------------------------------------------------

    /// `a + b`, where `b` may have the shape of a suffix of `a`'s dimensions
    /// (bias vectors, positional tables).
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sb.len() > sa.len() || sa[sa.len() - sb.len()..] != *sb {
            return Err(DiffError::shape("add", format!("{sa:?} + {sb:?}")));
        }
        let bv = self.value(b).data();
        let nb = bv.len();
        let out: Vec<f64> = if nb == 0 {
            vec![]
        } else {
            self.value(a).data().iter().enumerate().map(|(i, x)| x + bv[i % nb]).collect()
        };
        let t = Tensor::new(sa.to_vec(), out)?;
        Ok(self.push(t, Op::Add(a, b), &[a, b]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        self.same_shape("sub", a, b)?;
        let out = zip_map(self.value(a).data(), self.value(b).data(), |x, y| x - y);
        let t = Tensor::new(self.shape(a).to_vec(), out)?;
        Ok(self.push(t, Op::Sub(a, b), &[a, b]))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        self.same_shape("mul", a, b)?;
        let out = zip_map(self.value(a).data(), self.value(b).data(), |x, y| x * y);
        let t = Tensor::new(self.shape(a).to_vec(), out)?;
        Ok(self.push(t, Op::Mul(a, b), &[a, b]))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let x = self.value(a);
        let t = Tensor::new(x.shape().to_vec(), x.data().iter().map(|v| v * c).collect())
            .expect("same shape");
        self.push(t, Op::Scale(a, c), &[a])
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let t = Tensor::new(x.shape().to_vec(), x.data().iter().map(|&v| v.max(0.0)).collect())
            .expect("same shape");
        self.push(t, Op::Relu(a), &[a])
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(), DiffError> {
        if self.shape(a) != self.shape(b) {
            return Err(DiffError::shape(op, format!("{:?} vs {:?}", self.shape(a), self.shape(b))));
        }
        Ok(())
    }

    // ----- products ------------------------------------------------------

    /// Matrix product. `a[.., m, k] · b[k, n]` shares `b` across the leading
    /// dimensions of `a`; `a[.., m, k] · b[.., k, n]` with equal leading
    /// dimensions multiplies batch by batch.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa.len() < 2 || sb.len() < 2 {
            return Err(DiffError::shape("matmul", format!("{sa:?} · {sb:?} needs rank >= 2")));
        }
        let (m, k) = (sa[sa.len() - 2], sa[sa.len() - 1]);
        let (kb, n) = (sb[sb.len() - 2], sb[sb.len() - 1]);
        if k != kb {
            return Err(DiffError::shape("matmul", format!("inner dims {sa:?} · {sb:?}")));
        }
        let mut out_shape = sa[..sa.len() - 1].to_vec();
        out_shape.push(n);
        if sb.len() == 2 {
            let rows = sa[..sa.len() - 1].iter().product();
            let mut c = vec![0.0; rows * n];
            gemm_nn(rows, k, n, self.value(a).data(), self.value(b).data(), &mut c);
            let t = Tensor::new(out_shape, c)?;
            return Ok(self.push(t, Op::MatMulShared { a, b, m: rows, k, n }, &[a, b]));
        }
        if sa[..sa.len() - 2] != sb[..sb.len() - 2] {
            return Err(DiffError::shape("matmul", format!("batch dims {sa:?} · {sb:?}")));
        }
        let batch = sa[..sa.len() - 2].iter().product();
        let c = batched(batch, m, k, n, self.value(a).data(), self.value(b).data(), false);
        let t = Tensor::new(out_shape, c)?;
        Ok(self.push(t, Op::MatMulBatched { a, b, batch, m, k, n, bt: false }, &[a, b]))
    }

    /// Batched `a[.., m, k] · b[.., n, k]ᵀ`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa.len() < 2 || sa.len() != sb.len() || sa[..sa.len() - 2] != sb[..sb.len() - 2] {
            return Err(DiffError::shape("matmul_nt", format!("{sa:?} · {sb:?}ᵀ")));
        }
        let (m, k) = (sa[sa.len() - 2], sa[sa.len() - 1]);
        let (n, kb) = (sb[sb.len() - 2], sb[sb.len() - 1]);
        if k != kb {
            return Err(DiffError::shape("matmul_nt", format!("inner dims {sa:?} · {sb:?}ᵀ")));
        }
        let batch = sa[..sa.len() - 2].iter().product();
        let c = batched(batch, m, k, n, self.value(a).data(), self.value(b).data(), true);
        let mut out_shape = sa[..sa.len() - 1].to_vec();
        out_shape.push(n);
        let t = Tensor::new(out_shape, c)?;
        Ok(self.push(t, Op::MatMulBatched { a, b, batch, m, k, n, bt: true }, &[a, b]))
    }

    /// `x · w + b` over the last dimension of `x`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var, DiffError> {
        let y = self.matmul(x, w)?;
        self.add(y, b)
    }

    // ----- layout ----------------------------------------------------------

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var, DiffError> {
        let t = self.value(x).clone().reshape(shape.to_vec())?;
        Ok(self.push(t, Op::Reshape(x), &[x]))
    }

    /// Reorders dimensions: output dimension `i` is input dimension `perm[i]`.
    pub fn permute(&mut self, x: Var, perm: &[usize]) -> Result<Var, DiffError> {
        let shape = self.shape(x).to_vec();
        let mut seen = vec![false; shape.len()];
        if perm.len() != shape.len() || perm.iter().any(|&p| p >= shape.len() || std::mem::replace(&mut seen[p], true)) {
            return Err(DiffError::shape("permute", format!("{perm:?} on {shape:?}")));
        }
        let (out_shape, data) = permute_data(&shape, self.value(x).data(), perm);
        let t = Tensor::new(out_shape, data)?;
        Ok(self.push(t, Op::Permute { x, perm: perm.to_vec() }, &[x]))
    }

    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var, DiffError> {
        let first = inputs.first().ok_or_else(|| DiffError::shape("concat", "no inputs"))?;
        self.check_axis(*first, axis)?;
        let base = self.shape(*first).to_vec();
        let mut total = 0;
        for &v in inputs {
            let s = self.shape(v);
            if s.len() != base.len()
                || s.iter().zip(&base).enumerate().any(|(i, (a, b))| i != axis && a != b)
            {
                return Err(DiffError::shape("concat", format!("{s:?} vs {base:?} on axis {axis}")));
            }
            total += s[axis];
        }
        let (outer, _, inner) = split_at_axis(&base, axis);
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &v in inputs {
                let len = self.shape(v)[axis] * inner;
                out.extend_from_slice(&self.value(v).data()[o * len..(o + 1) * len]);
            }
        }
        let mut shape = base;
        shape[axis] = total;
        let t = Tensor::new(shape, out)?;
        Ok(self.push(t, Op::Concat { inputs: inputs.to_vec(), axis }, inputs))
    }

    /// Picks `x[b, idx[b], ..]`, turning `[B, K, ..]` into `[B, ..]`.
    pub fn gather(&mut self, x: Var, idx: &[usize]) -> Result<Var, DiffError> {
        let s = self.shape(x).to_vec();
        if s.len() < 2 || s[0] != idx.len() || idx.iter().any(|&i| i >= s[1]) {
            return Err(DiffError::shape("gather", format!("indices {idx:?} into {s:?}")));
        }
        let rest: usize = s[2..].iter().product();
        let data = self.value(x).data();
        let mut out = Vec::with_capacity(idx.len() * rest);
        for (b, &k) in idx.iter().enumerate() {
            let start = (b * s[1] + k) * rest;
            out.extend_from_slice(&data[start..start + rest]);
        }
        let mut shape = vec![s[0]];
        shape.extend_from_slice(&s[2..]);
        let t = Tensor::new(shape, out)?;
        Ok(self.push(t, Op::Gather { x, idx: idx.to_vec() }, &[x]))
    }

    // ----- normalisation -----------------------------------------------------

    /// Softmax along `axis`, stabilised by subtracting the max.
    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var, DiffError> {
        self.check_axis(x, axis)?;
        let t = softmax_along(self.value(x), axis, false);
        Ok(self.push(t, Op::Softmax { x, axis }, &[x]))
    }

    pub fn log_softmax(&mut self, x: Var, axis: usize) -> Result<Var, DiffError> {
        self.check_axis(x, axis)?;
        let t = softmax_along(self.value(x), axis, true);
        Ok(self.push(t, Op::LogSoftmax { x, axis }, &[x]))
    }

    /// Normalises the last dimension, then applies `gain` and `bias`.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Result<Var, DiffError> {
        let s = self.shape(x).to_vec();
        let d = *s.last().ok_or_else(|| DiffError::shape("layer_norm", "scalar input"))?;
        if self.shape(gain) != [d] || self.shape(bias) != [d] {
            return Err(DiffError::shape(
                "layer_norm",
                format!("x {s:?}, gain {:?}, bias {:?}", self.shape(gain), self.shape(bias)),
            ));
        }
        let rows = if d == 0 { 0 } else { self.value(x).numel() / d };
        let xv = self.value(x).data();
        let (g, b) = (self.value(gain).data(), self.value(bias).data());
        let mut xhat = vec![0.0; rows * d];
        let mut rstd = vec![0.0; rows];
        let mut out = vec![0.0; rows * d];
        for r in 0..rows {
            let row = &xv[r * d..(r + 1) * d];
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let rs = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            rstd[r] = rs;
            for j in 0..d {
                let h = (row[j] - mean) * rs;
                xhat[r * d + j] = h;
                out[r * d + j] = h * g[j] + b[j];
            }
        }
        let t = Tensor::new(s, out)?;
        Ok(self.push(t, Op::LayerNorm { x, gain, bias, xhat, rstd }, &[x, gain, bias]))
    }

    /// Running sum along `axis`.
    pub fn cumsum(&mut self, x: Var, axis: usize) -> Result<Var, DiffError> {
        self.check_axis(x, axis)?;
        let s = self.shape(x).to_vec();
        let (outer, len, inner) = split_at_axis(&s, axis);
        let mut out = self.value(x).data().to_vec();
        for o in 0..outer {
            for j in 0..inner {
                let mut acc = 0.0;
                for a in 0..len {
                    let i = (o * len + a) * inner + j;
                    acc += out[i];
                    out[i] = acc;
                }
            }
        }
        let t = Tensor::new(s, out)?;
        Ok(self.push(t, Op::Cumsum { x, axis }, &[x]))
    }

    // ----- reductions ----------------------------------------------------

    pub fn sum(&mut self, x: Var) -> Var {
        let v = self.value(x).data().iter().sum();
        self.push(Tensor::scalar(v), Op::Sum(x), &[x])
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let d = self.value(x).data();
        let v = d.iter().sum::<f64>() / d.len() as f64;
        self.push(Tensor::scalar(v), Op::Mean(x), &[x])
    }

    /// Sum of squares.
    pub fn sum_sq(&mut self, x: Var) -> Var {
        let v = self.value(x).data().iter().map(|v| v * v).sum();
        self.push(Tensor::scalar(v), Op::SumSq(x), &[x])
    }

    // ----- backward ------------------------------------------------------

    /// Back-propagates from a one-element `loss`. Gradients accumulate into
    /// every node that requires grad and is reachable from `loss`; all other
    /// nodes keep whatever gradient they had.
    pub fn backward(&mut self, loss: Var) -> Result<(), DiffError> {
        let loss_shape = self.shape(loss);
        if self.value(loss).numel() != 1 {
            return Err(DiffError::NonScalarLoss(loss_shape.to_vec()));
        }
        if !self.nodes[loss.0].requires_grad {
            return Ok(());
        }
        let mut grads: Vec<Option<Vec<f64>>> = Vec::new();
        grads.resize_with(loss.0 + 1, || None);
        grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        for (i, g) in grads.into_iter().enumerate() {
            let Some(g) = g else { continue };
            let node = &mut self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            match &mut node.grad {
                Some(existing) => {
                    for (e, v) in existing.data_mut().iter_mut().zip(&g) {
                        *e += v;
                    }
                }
                None => node.grad = Some(Tensor::new(node.value.shape().to_vec(), g)?),
            }
        }
        Ok(())
    }

    fn propagate(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[i];
        let val = |v: &Var| self.nodes[v.0].value.data();
        let wants = |v: &Var| self.nodes[v.0].requires_grad;
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                if wants(a) {
                    accumulate(grads, *a, g.len(), |buf| add_into(buf, g));
                }
                if wants(b) {
                    let nb = val(b).len();
                    accumulate(grads, *b, nb, |buf| {
                        for (j, v) in g.iter().enumerate() {
                            buf[j % nb] += v;
                        }
                    });
                }
            }
            Op::Sub(a, b) => {
                if wants(a) {
                    accumulate(grads, *a, g.len(), |buf| add_into(buf, g));
                }
                if wants(b) {
                    accumulate(grads, *b, g.len(), |buf| {
                        for (o, v) in buf.iter_mut().zip(g) {
                            *o -= v;
                        }
                    });
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (val(a), val(b));
                if wants(a) {
                    accumulate(grads, *a, g.len(), |buf| {
                        for ((o, gv), y) in buf.iter_mut().zip(g).zip(bv) {
                            *o += gv * y;
                        }
                    });
                }
                if wants(b) {
                    accumulate(grads, *b, g.len(), |buf| {
                        for ((o, gv), x) in buf.iter_mut().zip(g).zip(av) {
                            *o += gv * x;
                        }
                    });
                }
            }
            Op::Scale(a, c) => {
                if wants(a) {
                    accumulate(grads, *a, g.len(), |buf| {
                        for (o, gv) in buf.iter_mut().zip(g) {
                            *o += gv * c;
                        }
                    });
                }
            }
            Op::Relu(a) => {
                if wants(a) {
                    let x = val(a);
                    accumulate(grads, *a, g.len(), |buf| {
                        for ((o, gv), xv) in buf.iter_mut().zip(g).zip(x) {
                            if *xv > 0.0 {
                                *o += gv;
                            }
                        }
                    });
                }
            }
            Op::MatMulShared { a, b, m, k, n } => {
                let (m, k, n) = (*m, *k, *n);
                if wants(a) {
                    // dA = G · Bᵀ
                    accumulate(grads, *a, m * k, |buf| gemm_nt(m, n, k, g, val(b), buf));
                }
                if wants(b) {
                    // dB = Aᵀ · G
                    accumulate(grads, *b, k * n, |buf| gemm_tn(m, k, n, val(a), g, buf));
                }
            }
            Op::MatMulBatched { a, b, batch, m, k, n, bt } => {
                let (batch, m, k, n) = (*batch, *m, *k, *n);
                let (av, bv) = (val(a), val(b));
                if wants(a) {
                    accumulate(grads, *a, batch * m * k, |buf| {
                        for p in 0..batch {
                            let gp = &g[p * m * n..(p + 1) * m * n];
                            let bp = &bv[p * k * n..(p + 1) * k * n];
                            let out = &mut buf[p * m * k..(p + 1) * m * k];
                            if *bt {
                                // B stored [n, k]: dA = G · B
                                gemm_nn(m, n, k, gp, bp, out);
                            } else {
                                gemm_nt(m, n, k, gp, bp, out);
                            }
                        }
                    });
                }
                if wants(b) {
                    accumulate(grads, *b, batch * k * n, |buf| {
                        for p in 0..batch {
                            let gp = &g[p * m * n..(p + 1) * m * n];
                            let ap = &av[p * m * k..(p + 1) * m * k];
                            let out = &mut buf[p * k * n..(p + 1) * k * n];
                            if *bt {
                                // dB[n, k] = Gᵀ · A
                                gemm_tn(m, n, k, gp, ap, out);
                            } else {
                                gemm_tn(m, k, n, ap, gp, out);
                            }
                        }
                    });
                }
            }
            Op::Reshape(x) => {
                if wants(x) {
                    accumulate(grads, *x, g.len(), |buf| add_into(buf, g));
                }
            }
            Op::Permute { x, perm } => {
                if wants(x) {
                    let mut inverse = vec![0; perm.len()];
                    for (i, &p) in perm.iter().enumerate() {
                        inverse[p] = i;
                    }
                    let (_, back) = permute_data(node.value.shape(), g, &inverse);
                    accumulate(grads, *x, g.len(), |buf| add_into(buf, &back));
                }
            }
            Op::Softmax { x, axis } => {
                if wants(x) {
                    let y = node.value.data();
                    let (outer, len, inner) = split_at_axis(node.value.shape(), *axis);
                    accumulate(grads, *x, g.len(), |buf| {
                        for o in 0..outer {
                            for j in 0..inner {
                                let at = |a: usize| (o * len + a) * inner + j;
                                let dot: f64 = (0..len).map(|a| g[at(a)] * y[at(a)]).sum();
                                for a in 0..len {
                                    buf[at(a)] += y[at(a)] * (g[at(a)] - dot);
                                }
                            }
                        }
                    });
                }
            }
            Op::LogSoftmax { x, axis } => {
                if wants(x) {
                    let y = node.value.data();
                    let (outer, len, inner) = split_at_axis(node.value.shape(), *axis);
                    accumulate(grads, *x, g.len(), |buf| {
                        for o in 0..outer {
                            for j in 0..inner {
                                let at = |a: usize| (o * len + a) * inner + j;
                                let total: f64 = (0..len).map(|a| g[at(a)]).sum();
                                for a in 0..len {
                                    buf[at(a)] += g[at(a)] - y[at(a)].exp() * total;
                                }
                            }
                        }
                    });
                }
            }
            Op::LayerNorm { x, gain, bias, xhat, rstd } => {
                let d = *node.value.shape().last().unwrap();
                let rows = rstd.len();
                let gv = val(gain);
                if wants(gain) {
                    accumulate(grads, *gain, d, |buf| {
                        for r in 0..rows {
                            for j in 0..d {
                                buf[j] += g[r * d + j] * xhat[r * d + j];
                            }
                        }
                    });
                }
                if wants(bias) {
                    accumulate(grads, *bias, d, |buf| {
                        for r in 0..rows {
                            add_into(buf, &g[r * d..(r + 1) * d]);
                        }
                    });
                }
                if wants(x) {
                    accumulate(grads, *x, rows * d, |buf| {
                        let mut gh = vec![0.0; d];
                        for r in 0..rows {
                            let h = &xhat[r * d..(r + 1) * d];
                            for j in 0..d {
                                gh[j] = g[r * d + j] * gv[j];
                            }
                            let m1 = gh.iter().sum::<f64>() / d as f64;
                            let m2 = gh.iter().zip(h).map(|(a, b)| a * b).sum::<f64>() / d as f64;
                            for j in 0..d {
                                buf[r * d + j] += rstd[r] * (gh[j] - m1 - h[j] * m2);
                            }
                        }
                    });
                }
            }
            Op::Concat { inputs, axis } => {
                let (outer, total, inner) = split_at_axis(node.value.shape(), *axis);
                let mut offset = 0;
                for v in inputs {
                    let len = self.nodes[v.0].value.shape()[*axis];
                    if wants(v) {
                        accumulate(grads, *v, outer * len * inner, |buf| {
                            for o in 0..outer {
                                let src = &g[(o * total + offset) * inner..(o * total + offset + len) * inner];
                                add_into(&mut buf[o * len * inner..(o + 1) * len * inner], src);
                            }
                        });
                    }
                    offset += len;
                }
            }
            Op::Cumsum { x, axis } => {
                if wants(x) {
                    let (outer, len, inner) = split_at_axis(node.value.shape(), *axis);
                    accumulate(grads, *x, g.len(), |buf| {
                        for o in 0..outer {
                            for j in 0..inner {
                                let mut acc = 0.0;
                                for a in (0..len).rev() {
                                    let i = (o * len + a) * inner + j;
                                    acc += g[i];
                                    buf[i] += acc;
                                }
                            }
                        }
                    });
                }
            }
            Op::Gather { x, idx } => {
                if wants(x) {
                    let s = self.nodes[x.0].value.shape();
                    let (k, rest) = (s[1], s[2..].iter().product::<usize>());
                    accumulate(grads, *x, self.nodes[x.0].value.numel(), |buf| {
                        for (b, &sel) in idx.iter().enumerate() {
                            let start = (b * k + sel) * rest;
                            add_into(&mut buf[start..start + rest], &g[b * rest..(b + 1) * rest]);
                        }
                    });
                }
            }
            Op::Sum(x) => {
                if wants(x) {
                    let n = val(x).len();
                    accumulate(grads, *x, n, |buf| buf.iter_mut().for_each(|o| *o += g[0]));
                }
            }
            Op::Mean(x) => {
                if wants(x) {
                    let n = val(x).len();
                    let s = g[0] / n as f64;
                    accumulate(grads, *x, n, |buf| buf.iter_mut().for_each(|o| *o += s));
                }
            }
            Op::SumSq(x) => {
                if wants(x) {
                    let xv = val(x);
                    accumulate(grads, *x, xv.len(), |buf| {
                        for (o, v) in buf.iter_mut().zip(xv) {
                            *o += 2.0 * v * g[0];
                        }
                    });
                }
            }
        }
    }
}

fn accumulate(
    grads: &mut [Option<Vec<f64>>],
    v: Var,
    len: usize,
    f: impl FnOnce(&mut [f64]),
) {
    let slot = grads[v.0].get_or_insert_with(|| vec![0.0; len]);
    f(slot);
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

fn zip_map(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| f(*x, *y)).collect()
}

fn batched(batch: usize, m: usize, k: usize, n: usize, a: &[f64], b: &[f64], bt: bool) -> Vec<f64> {
    let mut c = vec![0.0; batch * m * n];
    for p in 0..batch {
        let ap = &a[p * m * k..(p + 1) * m * k];
        let bp = &b[p * k * n..(p + 1) * k * n];
        let cp = &mut c[p * m * n..(p + 1) * m * n];
        if bt {
            gemm_nt(m, k, n, ap, bp, cp);
        } else {
            gemm_nn(m, k, n, ap, bp, cp);
        }
    }
    c
}

fn permute_data(shape: &[usize], data: &[f64], perm: &[usize]) -> (Vec<usize>, Vec<f64>) {
    let rank = shape.len();
    let out_shape: Vec<usize> = perm.iter().map(|&p| shape[p]).collect();
    let mut in_strides = vec![1; rank];
    for i in (0..rank.saturating_sub(1)).rev() {
        in_strides[i] = in_strides[i + 1] * shape[i + 1];
    }
    // stride in the input for each output dimension
    let strides: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();
    let mut out = Vec::with_capacity(data.len());
    if data.is_empty() {
        return (out_shape, out);
    }
    let mut counter = vec![0usize; rank];
    let mut offset = 0usize;
    for _ in 0..data.len() {
        out.push(data[offset]);
        for d in (0..rank).rev() {
            counter[d] += 1;
            offset += strides[d];
            if counter[d] < out_shape[d] {
                break;
            }
            offset -= strides[d] * out_shape[d];
            counter[d] = 0;
        }
    }
    (out_shape, out)
}

fn softmax_along(x: &Tensor, axis: usize, log: bool) -> Tensor {
    let (outer, len, inner) = split_at_axis(x.shape(), axis);
    let xv = x.data();
    let mut out = vec![0.0; xv.len()];
    for o in 0..outer {
        for j in 0..inner {
            let at = |a: usize| (o * len + a) * inner + j;
            let max = (0..len).map(|a| xv[at(a)]).fold(f64::NEG_INFINITY, f64::max);
            let total: f64 = (0..len).map(|a| (xv[at(a)] - max).exp()).sum();
            if log {
                let lse = total.ln();
                for a in 0..len {
                    out[at(a)] = xv[at(a)] - max - lse;
                }
            } else {
                for a in 0..len {
                    out[at(a)] = (xv[at(a)] - max).exp() / total;
                }
            }
        }
    }
    Tensor::new(x.shape().to_vec(), out).expect("same shape")
}
