//! Tape-based reverse-mode differentiation over [`Tensor`] values.
//!
//! Every op appends a node whose parents were created earlier, so node order
//! is already a topological order and `backward` is a single reverse sweep.

use super::tensor::{broadcast_index_map, broadcast_shape, gemm_nn, gemm_nt, gemm_tn, permute_index_map, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

const LOG_FLOOR: f64 = 1e-12;

#[derive(Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    MatMul(Var, Var),
    Bmm(Var, Var),
    Relu(Var),
    Sigmoid(Var),
    Log(Var),
    Exp(Var),
    Softmax(Var),
    LogSoftmax(Var),
    LayerNorm { input: Var, inv_std: Vec<f64> },
    Embedding { table: Var, indices: Vec<usize> },
    Concat { parts: Vec<Var>, axis: usize },
    MaskedFill { input: Var, mask: Vec<bool> },
    Sum(Var),
    Mean(Var),
    Reshape(Var),
    Permute { input: Var, map: Vec<usize> },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Records a forward computation for later differentiation.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&[f64]> {
        self.grads.get(var.0).and_then(|g| g.as_deref())
    }

    pub fn take(&mut self, var: Var) -> Option<Vec<f64>> {
        self.grads.get_mut(var.0).and_then(Option::take)
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

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// A differentiable input.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A non-differentiable input.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn binary(&mut self, op: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Result<(Tensor, bool)> {
        let (va, vb) = (self.value(a), self.value(b));
        let shape = broadcast_shape(va.shape(), vb.shape())
            .ok_or_else(|| Error::shape(op, format!("{:?} vs {:?}", va.shape(), vb.shape())))?;
        let data = if va.shape() == vb.shape() {
            va.data().iter().zip(vb.data()).map(|(&x, &y)| f(x, y)).collect()
        } else {
            let ma = broadcast_index_map(va.shape(), &shape);
            let mb = broadcast_index_map(vb.shape(), &shape);
            let (da, db) = (va.data(), vb.data());
            ma.iter().zip(&mb).map(|(&i, &j)| f(da[i], db[j])).collect()
        };
        Ok((Tensor::new(shape, data)?, self.rg(a) || self.rg(b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (t, rg) = self.binary("add", a, b, |x, y| x + y)?;
        Ok(self.push(t, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (t, rg) = self.binary("sub", a, b, |x, y| x - y)?;
        Ok(self.push(t, Op::Sub(a, b), rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (t, rg) = self.binary("mul", a, b, |x, y| x * y)?;
        Ok(self.push(t, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a);
        let data = v.data().iter().map(|x| x * c).collect();
        let t = Tensor::new(v.shape().to_vec(), data).expect("same shape");
        let rg = self.rg(a);
        self.push(t, Op::Scale(a, c), rg)
    }

    /// `[.., m, k] × [k, n] -> [.., m, n]`
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa.len() < 2 || sb.len() != 2 || sa[sa.len() - 1] != sb[0] {
            return Err(Error::shape("matmul", format!("{sa:?} x {sb:?}")));
        }
        let k = sb[0];
        let n = sb[1];
        let m: usize = sa[..sa.len() - 1].iter().product();
        let mut out = vec![0.0; m * n];
        gemm_nn(self.value(a).data(), self.value(b).data(), &mut out, m, k, n);
        let mut shape = sa.clone();
        *shape.last_mut().unwrap() = n;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::new(shape, out)?, Op::MatMul(a, b), rg))
    }

    /// `[b, m, k] × [b, k, n] -> [b, m, n]`
    pub fn bmm(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa.len() != 3 || sb.len() != 3 || sa[0] != sb[0] || sa[2] != sb[1] {
            return Err(Error::shape("bmm", format!("{sa:?} x {sb:?}")));
        }
        let (batch, m, k, n) = (sa[0], sa[1], sa[2], sb[2]);
        let mut out = vec![0.0; batch * m * n];
        let (da, db) = (self.value(a).data(), self.value(b).data());
        for i in 0..batch {
            gemm_nn(
                &da[i * m * k..(i + 1) * m * k],
                &db[i * k * n..(i + 1) * k * n],
                &mut out[i * m * n..(i + 1) * m * n],
                m,
                k,
                n,
            );
        }
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::new(vec![batch, m, n], out)?, Op::Bmm(a, b), rg))
    }

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let v = self.value(a);
        let data = v.data().iter().map(|&x| f(x)).collect();
        let t = Tensor::new(v.shape().to_vec(), data).expect("same shape");
        let rg = self.rg(a);
        self.push(t, op, rg)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, |x| if x > 0.0 { x } else { 0.0 }, Op::Relu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, sigmoid, Op::Sigmoid(a))
    }

    /// Natural log with the input clamped to at least `1e-12`.
    pub fn log(&mut self, a: Var) -> Var {
        self.unary(a, |x| x.max(LOG_FLOOR).ln(), Op::Log(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, f64::exp, Op::Exp(a))
    }

    fn last_axis(&self, op: &'static str, a: Var) -> Result<usize> {
        match self.shape(a).last() {
            Some(&n) if n > 0 => Ok(n),
            _ => Err(Error::shape(op, format!("{:?}", self.shape(a)))),
        }
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let n = self.last_axis("softmax", a)?;
        let v = self.value(a);
        let mut out = v.data().to_vec();
        for row in out.chunks_mut(n) {
            softmax_in_place(row);
        }
        let t = Tensor::new(v.shape().to_vec(), out)?;
        let rg = self.rg(a);
        Ok(self.push(t, Op::Softmax(a), rg))
    }

    /// Log-softmax over the last axis.
    pub fn log_softmax(&mut self, a: Var) -> Result<Var> {
        let n = self.last_axis("log_softmax", a)?;
        let v = self.value(a);
        let mut out = v.data().to_vec();
        for row in out.chunks_mut(n) {
            let lse = log_sum_exp(row);
            row.iter_mut().for_each(|x| *x -= lse);
        }
        let t = Tensor::new(v.shape().to_vec(), out)?;
        let rg = self.rg(a);
        Ok(self.push(t, Op::LogSoftmax(a), rg))
    }

    /// Normalizes the last axis to zero mean and unit variance (no gain/bias).
    pub fn layer_norm(&mut self, a: Var, eps: f64) -> Result<Var> {
        let n = self.last_axis("layer_norm", a)?;
        let v = self.value(a);
        let mut out = v.data().to_vec();
        let mut inv_std = Vec::with_capacity(out.len() / n);
        for row in out.chunks_mut(n) {
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
            let is = 1.0 / (var + eps).sqrt();
            row.iter_mut().for_each(|x| *x = (*x - mean) * is);
            inv_std.push(is);
        }
        let t = Tensor::new(v.shape().to_vec(), out)?;
        let rg = self.rg(a);
        Ok(self.push(t, Op::LayerNorm { input: a, inv_std }, rg))
    }

    /// Gathers rows of a `[vocab, dim]` table -> `[indices.len(), dim]`.
    pub fn embedding(&mut self, table: Var, indices: &[usize]) -> Result<Var> {
        let s = self.shape(table).to_vec();
        if s.len() != 2 {
            return Err(Error::shape("embedding", format!("table {s:?}")));
        }
        let (vocab, dim) = (s[0], s[1]);
        if let Some(&bad) = indices.iter().find(|&&i| i >= vocab) {
            return Err(Error::shape(
                "embedding",
                format!("index {bad} out of range for table {s:?}"),
            ));
        }
        let d = self.value(table).data();
        let mut out = Vec::with_capacity(indices.len() * dim);
        for &i in indices {
            out.extend_from_slice(&d[i * dim..(i + 1) * dim]);
        }
        let t = Tensor::new(vec![indices.len(), dim], out)?;
        let rg = self.rg(table);
        Ok(self.push(
            t,
            Op::Embedding {
                table,
                indices: indices.to_vec(),
            },
            rg,
        ))
    }

    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let first = parts.first().ok_or_else(|| Error::shape("concat", "no inputs"))?;
        let base = self.shape(*first).to_vec();
        if axis >= base.len() {
            return Err(Error::shape("concat", format!("axis {axis} for {base:?}")));
        }
        let mut total_axis = 0;
        for &p in parts {
            let s = self.shape(p);
            let ok = s.len() == base.len() && s.iter().zip(&base).enumerate().all(|(i, (x, y))| i == axis || x == y);
            if !ok {
                return Err(Error::shape("concat", format!("{base:?} vs {s:?}")));
            }
            total_axis += s[axis];
        }
        let outer: usize = base[..axis].iter().product();
        let inner: usize = base[axis + 1..].iter().product();
        let mut out = Vec::with_capacity(outer * total_axis * inner);
        for o in 0..outer {
            for &p in parts {
                let v = self.value(p);
                let chunk = v.shape()[axis] * inner;
                out.extend_from_slice(&v.data()[o * chunk..(o + 1) * chunk]);
            }
        }
        let mut shape = base;
        shape[axis] = total_axis;
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(
            Tensor::new(shape, out)?,
            Op::Concat {
                parts: parts.to_vec(),
                axis,
            },
            rg,
        ))
    }

    /// Replaces elements where `mask` is true with `fill`. The mask is
    /// broadcast from the trailing dims of the input.
    pub fn masked_fill(&mut self, a: Var, mask: &[bool], fill: f64) -> Result<Var> {
        let v = self.value(a);
        if mask.is_empty() || !v.len().is_multiple_of(mask.len()) {
            return Err(Error::shape(
                "masked_fill",
                format!("mask of {} for {:?}", mask.len(), v.shape()),
            ));
        }
        let full: Vec<bool> = (0..v.len()).map(|i| mask[i % mask.len()]).collect();
        let data = v
            .data()
            .iter()
            .zip(&full)
            .map(|(&x, &m)| if m { fill } else { x })
            .collect();
        let t = Tensor::new(v.shape().to_vec(), data)?;
        let rg = self.rg(a);
        Ok(self.push(t, Op::MaskedFill { input: a, mask: full }, rg))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        let rg = self.rg(a);
        self.push(Tensor::scalar(s), Op::Sum(a), rg)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let s = v.data().iter().sum::<f64>() / v.len().max(1) as f64;
        let rg = self.rg(a);
        self.push(Tensor::scalar(s), Op::Mean(a), rg)
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let t = self.value(a).clone().reshaped(shape.to_vec())?;
        let rg = self.rg(a);
        Ok(self.push(t, Op::Reshape(a), rg))
    }

    pub fn permute(&mut self, a: Var, perm: &[usize]) -> Result<Var> {
        let s = self.shape(a).to_vec();
        let mut seen = vec![false; s.len()];
        let valid = perm.len() == s.len()
            && perm
                .iter()
                .all(|&p| p < s.len() && !std::mem::replace(&mut seen[p], true));
        if !valid {
            return Err(Error::shape("permute", format!("{perm:?} for {s:?}")));
        }
        let (shape, map) = permute_index_map(&s, perm);
        let d = self.value(a).data();
        let data = map.iter().map(|&i| d[i]).collect();
        let rg = self.rg(a);
        Ok(self.push(Tensor::new(shape, data)?, Op::Permute { input: a, map }, rg))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(Error::NonScalarLoss(lv.shape().to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Vec<f64>>], v: Var, f: impl FnOnce(&mut [f64])) {
        if !self.rg(v) {
            return;
        }
        let slot = grads[v.0].get_or_insert_with(|| vec![0.0; self.nodes[v.0].value.len()]);
        f(slot);
    }

    fn reduce_broadcast(
        &self,
        grads: &mut [Option<Vec<f64>>],
        v: Var,
        out_shape: &[usize],
        g: &[f64],
        scale: Option<&[f64]>,
    ) {
        if !self.rg(v) {
            return;
        }
        let in_shape = self.shape(v).to_vec();
        let map = broadcast_index_map(&in_shape, out_shape);
        self.accumulate(grads, v, |acc| match scale {
            Some(s) => {
                for ((&i, &gv), &sv) in map.iter().zip(g).zip(s) {
                    acc[i] += gv * sv;
                }
            }
            None => {
                for (&i, &gv) in map.iter().zip(g) {
                    acc[i] += gv;
                }
            }
        });
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let out_shape = node.value.shape();
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.reduce_broadcast(grads, *a, out_shape, g, None);
                self.reduce_broadcast(grads, *b, out_shape, g, None);
            }
            Op::Sub(a, b) => {
                self.reduce_broadcast(grads, *a, out_shape, g, None);
                let neg: Vec<f64> = g.iter().map(|x| -x).collect();
                self.reduce_broadcast(grads, *b, out_shape, &neg, None);
            }
            Op::Mul(a, b) => {
                // each operand's gradient is g times the other operand, broadcast
                for (this, other) in [(*a, *b), (*b, *a)] {
                    if !self.rg(this) {
                        continue;
                    }
                    let ov = self.value(other);
                    let om = broadcast_index_map(ov.shape(), out_shape);
                    let od = ov.data();
                    let s: Vec<f64> = om.iter().map(|&i| od[i]).collect();
                    self.reduce_broadcast(grads, this, out_shape, g, Some(&s));
                }
            }
            Op::Scale(a, c) => {
                self.accumulate(grads, *a, |acc| acc.iter_mut().zip(g).for_each(|(x, gv)| *x += gv * c));
            }
            Op::MatMul(a, b) => {
                let sb = self.shape(*b);
                let (k, n) = (sb[0], sb[1]);
                let m = g.len() / n;
                if self.rg(*a) {
                    let bd = self.value(*b).data();
                    self.accumulate(grads, *a, |acc| gemm_nt(g, bd, acc, m, n, k));
                }
                if self.rg(*b) {
                    let ad = self.value(*a).data();
                    self.accumulate(grads, *b, |acc| gemm_tn(ad, g, acc, m, k, n));
                }
            }
            Op::Bmm(a, b) => {
                let sa = self.shape(*a);
                let sb = self.shape(*b);
                let (batch, m, k, n) = (sa[0], sa[1], sa[2], sb[2]);
                if self.rg(*a) {
                    let bd = self.value(*b).data();
                    self.accumulate(grads, *a, |acc| {
                        for i in 0..batch {
                            gemm_nt(
                                &g[i * m * n..(i + 1) * m * n],
                                &bd[i * k * n..(i + 1) * k * n],
                                &mut acc[i * m * k..(i + 1) * m * k],
                                m,
                                n,
                                k,
                            );
                        }
                    });
                }
                if self.rg(*b) {
                    let ad = self.value(*a).data();
                    self.accumulate(grads, *b, |acc| {
                        for i in 0..batch {
                            gemm_tn(
                                &ad[i * m * k..(i + 1) * m * k],
                                &g[i * m * n..(i + 1) * m * n],
                                &mut acc[i * k * n..(i + 1) * k * n],
                                m,
                                k,
                                n,
                            );
                        }
                    });
                }
            }
            Op::Relu(a) => {
                let x = self.value(*a).data();
                self.accumulate(grads, *a, |acc| {
                    for ((s, &xv), &gv) in acc.iter_mut().zip(x).zip(g) {
                        if xv > 0.0 {
                            *s += gv;
                        }
                    }
                });
            }
            Op::Sigmoid(a) => {
                let y = node.value.data();
                self.accumulate(grads, *a, |acc| {
                    for ((s, &yv), &gv) in acc.iter_mut().zip(y).zip(g) {
                        *s += gv * yv * (1.0 - yv);
                    }
                });
            }
            Op::Log(a) => {
                let x = self.value(*a).data();
                self.accumulate(grads, *a, |acc| {
                    for ((s, &xv), &gv) in acc.iter_mut().zip(x).zip(g) {
                        if xv > LOG_FLOOR {
                            *s += gv / xv;
                        }
                    }
                });
            }
            Op::Exp(a) => {
                let y = node.value.data();
                self.accumulate(grads, *a, |acc| {
                    for ((s, &yv), &gv) in acc.iter_mut().zip(y).zip(g) {
                        *s += gv * yv;
                    }
                });
            }
            Op::Softmax(a) => {
                let n = *out_shape.last().unwrap();
                let y = node.value.data();
                self.accumulate(grads, *a, |acc| {
                    for ((s, yr), gr) in acc.chunks_mut(n).zip(y.chunks(n)).zip(g.chunks(n)) {
                        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for ((sv, &yv), &gv) in s.iter_mut().zip(yr).zip(gr) {
                            *sv += yv * (gv - dot);
                        }
                    }
                });
            }
            Op::LogSoftmax(a) => {
                let n = *out_shape.last().unwrap();
                let y = node.value.data();
                self.accumulate(grads, *a, |acc| {
                    for ((s, yr), gr) in acc.chunks_mut(n).zip(y.chunks(n)).zip(g.chunks(n)) {
                        let total: f64 = gr.iter().sum();
                        for ((sv, &yv), &gv) in s.iter_mut().zip(yr).zip(gr) {
                            *sv += gv - yv.exp() * total;
                        }
                    }
                });
            }
            Op::LayerNorm { input, inv_std } => {
                let n = *out_shape.last().unwrap();
                let y = node.value.data();
                self.accumulate(grads, *input, |acc| {
                    for (((s, yr), gr), &is) in acc.chunks_mut(n).zip(y.chunks(n)).zip(g.chunks(n)).zip(inv_std) {
                        let mg = gr.iter().sum::<f64>() / n as f64;
                        let mgy = gr.iter().zip(yr).map(|(a, b)| a * b).sum::<f64>() / n as f64;
                        for ((sv, &yv), &gv) in s.iter_mut().zip(yr).zip(gr) {
                            *sv += is * (gv - mg - yv * mgy);
                        }
                    }
                });
            }
            Op::Embedding { table, indices } => {
                let dim = self.shape(*table)[1];
                self.accumulate(grads, *table, |acc| {
                    for (row, &i) in g.chunks(dim).zip(indices) {
                        for (s, &gv) in acc[i * dim..(i + 1) * dim].iter_mut().zip(row) {
                            *s += gv;
                        }
                    }
                });
            }
            Op::Concat { parts, axis } => {
                let outer: usize = out_shape[..*axis].iter().product();
                let inner: usize = out_shape[axis + 1..].iter().product();
                let row = out_shape[*axis] * inner;
                let mut offset = 0;
                for &p in parts {
                    let chunk = self.shape(p)[*axis] * inner;
                    self.accumulate(grads, p, |acc| {
                        for o in 0..outer {
                            let src = &g[o * row + offset..o * row + offset + chunk];
                            for (s, &gv) in acc[o * chunk..(o + 1) * chunk].iter_mut().zip(src) {
                                *s += gv;
                            }
                        }
                    });
                    offset += chunk;
                }
            }
            Op::MaskedFill { input, mask } => {
                self.accumulate(grads, *input, |acc| {
                    for ((s, &gv), &m) in acc.iter_mut().zip(g).zip(mask) {
                        if !m {
                            *s += gv;
                        }
                    }
                });
            }
            Op::Sum(a) => {
                let gv = g[0];
                self.accumulate(grads, *a, |acc| acc.iter_mut().for_each(|s| *s += gv));
            }
            Op::Mean(a) => {
                let n = self.value(*a).len().max(1) as f64;
                let gv = g[0] / n;
                self.accumulate(grads, *a, |acc| acc.iter_mut().for_each(|s| *s += gv));
            }
            Op::Reshape(a) => {
                self.accumulate(grads, *a, |acc| acc.iter_mut().zip(g).for_each(|(s, &gv)| *s += gv));
            }
            Op::Permute { input, map } => {
                self.accumulate(grads, *input, |acc| {
                    for (&i, &gv) in map.iter().zip(g) {
                        acc[i] += gv;
                    }
                });
            }
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn softmax_in_place(row: &mut [f64]) {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in row.iter_mut() {
        *x = (*x - m).exp();
        total += *x;
    }
    row.iter_mut().for_each(|x| *x /= total);
}
