use std::collections::HashMap;

use super::kernels;
use super::{ParamId, ParamStore, Tensor};
use crate::error::{contract, Error, Result};

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnaryOp {
    Sigmoid,
    Tanh,
    Exp,
    Relu,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    BatchMatMul(Var, Var),
    Binary(BinaryOp, Var, Var),
    Scale(Var, f64),
    Unary(UnaryOp, Var),
    Softmax(Var),
    Concat {
        inputs: Vec<Var>,
        axis: usize,
    },
    Slice {
        input: Var,
        axis: usize,
        start: usize,
    },
    Reshape(Var),
    Permute {
        input: Var,
        perm: Vec<usize>,
    },
    Sum(Var),
    Mean(Var),
    Gather {
        table: Var,
        ids: Vec<usize>,
    },
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        normed: Vec<f64>,
        inv_std: Vec<f64>,
    },
    CrossEntropy {
        logits: Var,
        targets: Vec<usize>,
        mask: Vec<bool>,
        probs: Vec<f64>,
        count: usize,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    grad: Option<Vec<f64>>,
    op: Op,
    requires_grad: bool,
}

/// Define-by-run computation graph.
///
/// Every operation appends a node, so node order is already a topological
/// order and [`Graph::backward`] is a single reverse sweep. A graph is built
/// fresh for each forward pass and dropped afterwards.
#[derive(Debug)]
pub struct Graph {
    nodes: Vec<Node>,
    params: HashMap<ParamId, Var>,
    track_params: bool,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

/// Checks that `rhs` equals `lhs` or a trailing suffix of it.
fn broadcast_len(op: &'static str, lhs: &[usize], rhs: &[usize]) -> Result<usize> {
    let ok = rhs.len() <= lhs.len() && lhs[lhs.len() - rhs.len()..] == *rhs;
    if !ok {
        return Err(Error::Dimension {
            op,
            lhs: lhs.to_vec(),
            rhs: rhs.to_vec(),
        });
    }
    Ok(rhs.iter().product())
}

fn slot<'a>(nodes: &[Node], grads: &'a mut [Option<Vec<f64>>], v: Var) -> Option<&'a mut Vec<f64>> {
    let node = &nodes[v.0];
    if !node.requires_grad {
        return None;
    }
    Some(grads[v.0].get_or_insert_with(|| vec![0.0; node.value.numel()]))
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

impl Graph {
    /// A graph whose parameter leaves require gradients.
    pub fn new() -> Self {
        Graph {
            nodes: Vec::new(),
            params: HashMap::new(),
            track_params: true,
        }
    }

    /// A graph for inference only: nothing requires gradients.
    pub fn inference() -> Self {
        Graph {
            track_params: false,
            ..Self::new()
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Drops every node created after the first `len`, e.g. the scratch
    /// nodes of one decoding step. Vars pointing past `len` become invalid.
    pub fn truncate(&mut self, len: usize) {
        self.nodes.truncate(len);
        self.params.retain(|_, v| v.0 < len);
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            grad: None,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// A leaf that never receives gradients.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// A leaf that accumulates gradients.
    pub fn variable(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Binds a stored parameter; repeated calls return the same node.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let track = self.track_params;
        let v = self.push(store.value(id).clone(), Op::Leaf, track);
        self.params.insert(id, v);
        v
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.nodes[v.0].grad.as_deref()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.rg(v)
    }

    /// Adds the gradients of every bound parameter into the store.
    pub fn accumulate_param_grads(&self, store: &mut ParamStore) {
        for (&id, &v) in &self.params {
            if let Some(g) = &self.nodes[v.0].grad {
                add_into(&mut store.get_mut(id).grad, g);
            }
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::Dimension {
                op: "matmul",
                lhs: sa.to_vec(),
                rhs: sb.to_vec(),
            });
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let data = kernels::matmul(self.value(a).data(), self.value(b).data(), m, k, n);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::new(&[m, n], data)?, Op::MatMul(a, b), rg))
    }

    /// Batched product `[B,m,k] · [B,k,n] -> [B,m,n]`.
    pub fn batch_matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 3 || sb.len() != 3 || sa[0] != sb[0] || sa[2] != sb[1] {
            return Err(Error::Dimension {
                op: "batch_matmul",
                lhs: sa.to_vec(),
                rhs: sb.to_vec(),
            });
        }
        let (bs, m, k, n) = (sa[0], sa[1], sa[2], sb[2]);
        let mut out = vec![0.0; bs * m * n];
        let (av, bv) = (self.value(a).data(), self.value(b).data());
        for i in 0..bs {
            kernels::matmul_acc(
                &av[i * m * k..(i + 1) * m * k],
                &bv[i * k * n..(i + 1) * k * n],
                &mut out[i * m * n..(i + 1) * m * n],
                m,
                k,
                n,
            );
        }
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::new(&[bs, m, n], out)?, Op::BatchMatMul(a, b), rg))
    }

    /// Pointwise binary op. `b` may equal `a`'s shape or any trailing suffix of it.
    pub fn binary(&mut self, op: BinaryOp, a: Var, b: Var) -> Result<Var> {
        let nb = broadcast_len("elementwise", self.shape(a), self.shape(b))?;
        let (av, bv) = (self.value(a), self.value(b).data());
        let f = match op {
            BinaryOp::Add => |x: f64, y: f64| x + y,
            BinaryOp::Sub => |x: f64, y: f64| x - y,
            BinaryOp::Mul => |x: f64, y: f64| x * y,
        };
        let data = av.data().iter().enumerate().map(|(i, &x)| f(x, bv[i % nb])).collect();
        let value = Tensor::new(av.shape(), data)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::Binary(op, a, b), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryOp::Add, a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryOp::Sub, a, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryOp::Mul, a, b)
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let av = self.value(a);
        let data = av.data().iter().map(|x| x * factor).collect();
        let value = Tensor::new(av.shape(), data).expect("same shape");
        let rg = self.rg(a);
        self.push(value, Op::Scale(a, factor), rg)
    }

    pub fn unary(&mut self, op: UnaryOp, a: Var) -> Var {
        let av = self.value(a);
        let f = match op {
            UnaryOp::Sigmoid => |x: f64| {
                if x >= 0.0 {
                    1.0 / (1.0 + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (1.0 + e)
                }
            },
            UnaryOp::Tanh => f64::tanh,
            UnaryOp::Exp => f64::exp,
            UnaryOp::Relu => |x: f64| x.max(0.0),
        };
        let data = av.data().iter().map(|&x| f(x)).collect();
        let value = Tensor::new(av.shape(), data).expect("same shape");
        let rg = self.rg(a);
        self.push(value, Op::Unary(op, a), rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(UnaryOp::Sigmoid, a)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(UnaryOp::Tanh, a)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(UnaryOp::Exp, a)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(UnaryOp::Relu, a)
    }

    /// Softmax over the last axis, stabilized by subtracting each slice's max.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let av = self.value(a);
        let n = *av.shape().last().ok_or_else(|| contract("softmax of a scalar"))?;
        if n == 0 {
            return Err(contract("softmax over an empty axis"));
        }
        let mut data = av.data().to_vec();
        for row in data.chunks_mut(n) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for x in row.iter_mut() {
                *x = (*x - max).exp();
                total += *x;
            }
            row.iter_mut().for_each(|x| *x /= total);
        }
        let value = Tensor::new(av.shape(), data)?;
        let rg = self.rg(a);
        Ok(self.push(value, Op::Softmax(a), rg))
    }

    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        let first = *inputs.first().ok_or_else(|| contract("concat of nothing"))?;
        let base = self.shape(first).to_vec();
        if axis >= base.len() {
            return Err(contract(format!("concat axis {axis} for rank {}", base.len())));
        }
        let mut extent = 0;
        for &v in inputs {
            let s = self.shape(v);
            let compatible =
                s.len() == base.len() && s.iter().zip(&base).enumerate().all(|(i, (x, y))| i == axis || x == y);
            if !compatible {
                return Err(Error::Dimension {
                    op: "concat",
                    lhs: base,
                    rhs: s.to_vec(),
                });
            }
            extent += s[axis];
        }
        let outer: usize = base[..axis].iter().product();
        let inner: usize = base[axis + 1..].iter().product();
        let mut shape = base.clone();
        shape[axis] = extent;
        let mut data = Vec::with_capacity(outer * extent * inner);
        for o in 0..outer {
            for &v in inputs {
                let block = self.shape(v)[axis] * inner;
                data.extend_from_slice(&self.value(v).data()[o * block..(o + 1) * block]);
            }
        }
        let rg = inputs.iter().any(|&v| self.rg(v));
        Ok(self.push(
            Tensor::new(&shape, data)?,
            Op::Concat {
                inputs: inputs.to_vec(),
                axis,
            },
            rg,
        ))
    }

    /// `len` entries along `axis` starting at `start`.
    pub fn slice(&mut self, a: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        if axis >= shape.len() || start + len > shape[axis] {
            return Err(Error::Dimension {
                op: "slice",
                lhs: shape,
                rhs: vec![axis, start, len],
            });
        }
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let src = self.value(a).data();
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * shape[axis] + start) * inner;
            data.extend_from_slice(&src[base..base + len * inner]);
        }
        let mut out_shape = shape;
        out_shape[axis] = len;
        let rg = self.rg(a);
        Ok(self.push(Tensor::new(&out_shape, data)?, Op::Slice { input: a, axis, start }, rg))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(a).reshaped(shape).map_err(|_| Error::Dimension {
            op: "reshape",
            lhs: self.shape(a).to_vec(),
            rhs: shape.to_vec(),
        })?;
        let rg = self.rg(a);
        Ok(self.push(value, Op::Reshape(a), rg))
    }

    /// Reorders axes: output axis `i` is input axis `perm[i]`.
    pub fn permute(&mut self, a: Var, perm: &[usize]) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        let mut seen = vec![false; shape.len()];
        let valid = perm.len() == shape.len()
            && perm
                .iter()
                .all(|&p| p < shape.len() && !std::mem::replace(&mut seen[p], true));
        if !valid {
            return Err(Error::Dimension {
                op: "permute",
                lhs: shape,
                rhs: perm.to_vec(),
            });
        }
        let offsets = kernels::permute_offsets(&shape, perm);
        let src = self.value(a).data();
        let data = offsets.iter().map(|&o| src[o]).collect();
        let out_shape: Vec<usize> = perm.iter().map(|&p| shape[p]).collect();
        let rg = self.rg(a);
        Ok(self.push(
            Tensor::new(&out_shape, data)?,
            Op::Permute {
                input: a,
                perm: perm.to_vec(),
            },
            rg,
        ))
    }

    /// Swaps the last two axes.
    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let rank = self.shape(a).len();
        if rank < 2 {
            return Err(contract("transpose needs rank >= 2"));
        }
        let mut perm: Vec<usize> = (0..rank).collect();
        perm.swap(rank - 2, rank - 1);
        self.permute(a, &perm)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let total = self.value(a).data().iter().sum();
        let rg = self.rg(a);
        self.push(Tensor::scalar(total), Op::Sum(a), rg)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let total: f64 = v.data().iter().sum();
        let mean = total / v.numel().max(1) as f64;
        let rg = self.rg(a);
        self.push(Tensor::scalar(mean), Op::Mean(a), rg)
    }

    /// Gathers rows of a `[rows, d]` table: result is `[ids.len(), d]`.
    pub fn gather_rows(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let shape = self.shape(table).to_vec();
        if shape.len() != 2 {
            return Err(contract(format!("gather from table of shape {shape:?}")));
        }
        let (rows, d) = (shape[0], shape[1]);
        if let Some(&bad) = ids.iter().find(|&&id| id >= rows) {
            return Err(Error::Index {
                what: "embedding table",
                index: bad,
                size: rows,
            });
        }
        let src = self.value(table).data();
        let mut data = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            data.extend_from_slice(&src[id * d..(id + 1) * d]);
        }
        let rg = self.rg(table);
        Ok(self.push(
            Tensor::new(&[ids.len(), d], data)?,
            Op::Gather {
                table,
                ids: ids.to_vec(),
            },
            rg,
        ))
    }

    /// Normalizes each last-axis slice, then applies `gain` and `bias` (both `[d]`).
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let d = *shape.last().ok_or_else(|| contract("layer_norm of a scalar"))?;
        for p in [gain, bias] {
            if self.shape(p) != [d] {
                return Err(Error::Dimension {
                    op: "layer_norm",
                    lhs: shape,
                    rhs: self.shape(p).to_vec(),
                });
            }
        }
        let (g, b) = (self.value(gain).data(), self.value(bias).data());
        let xv = self.value(x).data();
        let rows = xv.len() / d.max(1);
        let mut normed = Vec::with_capacity(xv.len());
        let mut inv_std = Vec::with_capacity(rows);
        let mut out = Vec::with_capacity(xv.len());
        for row in xv.chunks(d) {
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let r = 1.0 / (var + eps).sqrt();
            inv_std.push(r);
            for (j, v) in row.iter().enumerate() {
                let n = (v - mean) * r;
                normed.push(n);
                out.push(n * g[j] + b[j]);
            }
        }
        let rg = self.rg(x) || self.rg(gain) || self.rg(bias);
        Ok(self.push(
            Tensor::new(&shape, out)?,
            Op::LayerNorm {
                x,
                gain,
                bias,
                normed,
                inv_std,
            },
            rg,
        ))
    }

    /// Mean token cross-entropy over unmasked rows of `logits` (`[..., V]`).
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize], mask: &[bool]) -> Result<Var> {
        let shape = self.shape(logits).to_vec();
        let v = *shape.last().ok_or_else(|| contract("cross_entropy of a scalar"))?;
        let rows = shape.iter().product::<usize>() / v.max(1);
        if targets.len() != rows || mask.len() != rows {
            return Err(Error::Dimension {
                op: "cross_entropy",
                lhs: shape,
                rhs: vec![targets.len(), mask.len()],
            });
        }
        let count = mask.iter().filter(|&&m| m).count();
        if count == 0 {
            return Err(contract("cross_entropy with every position padded"));
        }
        let lv = self.value(logits).data();
        let mut probs = vec![0.0; lv.len()];
        let mut total = 0.0;
        for (r, row) in lv.chunks(v).enumerate() {
            if !mask[r] {
                continue;
            }
            let t = targets[r];
            if t >= v {
                return Err(Error::Index {
                    what: "target vocabulary",
                    index: t,
                    size: v,
                });
            }
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = row.iter().map(|x| (x - max).exp()).sum();
            let log_z = max + z.ln();
            total += log_z - row[t];
            for (p, x) in probs[r * v..(r + 1) * v].iter_mut().zip(row) {
                *p = (x - log_z).exp();
            }
        }
        let rg = self.rg(logits);
        Ok(self.push(
            Tensor::scalar(total / count as f64),
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
                mask: mask.to_vec(),
                probs,
                count,
            },
            rg,
        ))
    }

    /// Accumulates d(root)/d(node) into every reachable node that requires
    /// gradients. Gradients add onto whatever a previous call left behind.
    pub fn backward(&mut self, root: Var) -> Result<()> {
        if self.value(root).numel() != 1 {
            return Err(contract(format!(
                "backward from non-scalar root of shape {:?}",
                self.shape(root)
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; root.0 + 1];
        grads[root.0] = Some(vec![1.0]);
        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if !self.nodes[i].requires_grad {
                continue;
            }
            self.propagate(i, &g, &mut grads);
            let node = &mut self.nodes[i];
            match &mut node.grad {
                Some(acc) => add_into(acc, &g),
                None => node.grad = Some(g),
            }
        }
        Ok(())
    }

    /// Clears gradients held by graph nodes (not by the parameter store).
    pub fn zero_grads(&mut self) {
        for node in &mut self.nodes {
            node.grad = None;
        }
    }

    fn propagate(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let nodes = &self.nodes;
        let out = &nodes[i].value;
        match &nodes[i].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (&nodes[a.0].value, &nodes[b.0].value);
                let (m, k, n) = (av.shape()[0], av.shape()[1], bv.shape()[1]);
                if let Some(da) = slot(nodes, grads, *a) {
                    kernels::matmul_grad_lhs(g, bv.data(), da, m, k, n);
                }
                if let Some(db) = slot(nodes, grads, *b) {
                    kernels::matmul_grad_rhs(av.data(), g, db, m, k, n);
                }
            }
            Op::BatchMatMul(a, b) => {
                let (av, bv) = (&nodes[a.0].value, &nodes[b.0].value);
                let (bs, m, k, n) = (av.shape()[0], av.shape()[1], av.shape()[2], bv.shape()[2]);
                let (sa, sb, sc) = (m * k, k * n, m * n);
                if let Some(da) = slot(nodes, grads, *a) {
                    for t in 0..bs {
                        kernels::matmul_grad_lhs(
                            &g[t * sc..(t + 1) * sc],
                            &bv.data()[t * sb..(t + 1) * sb],
                            &mut da[t * sa..(t + 1) * sa],
                            m,
                            k,
                            n,
                        );
                    }
                }
                if let Some(db) = slot(nodes, grads, *b) {
                    for t in 0..bs {
                        kernels::matmul_grad_rhs(
                            &av.data()[t * sa..(t + 1) * sa],
                            &g[t * sc..(t + 1) * sc],
                            &mut db[t * sb..(t + 1) * sb],
                            m,
                            k,
                            n,
                        );
                    }
                }
            }
            Op::Binary(op, a, b) => {
                let nb = nodes[b.0].value.numel();
                let (av, bv) = (nodes[a.0].value.data(), nodes[b.0].value.data());
                let op = *op;
                if let Some(da) = slot(nodes, grads, *a) {
                    for (idx, d) in da.iter_mut().enumerate() {
                        *d += match op {
                            BinaryOp::Add | BinaryOp::Sub => g[idx],
                            BinaryOp::Mul => g[idx] * bv[idx % nb],
                        };
                    }
                }
                if let Some(db) = slot(nodes, grads, *b) {
                    for (idx, &gi) in g.iter().enumerate() {
                        db[idx % nb] += match op {
                            BinaryOp::Add => gi,
                            BinaryOp::Sub => -gi,
                            BinaryOp::Mul => gi * av[idx],
                        };
                    }
                }
            }
            Op::Scale(a, factor) => {
                if let Some(da) = slot(nodes, grads, *a) {
                    for (d, gi) in da.iter_mut().zip(g) {
                        *d += gi * factor;
                    }
                }
            }
            Op::Unary(op, a) => {
                let y = out.data();
                let op = *op;
                if let Some(da) = slot(nodes, grads, *a) {
                    for ((d, gi), &yi) in da.iter_mut().zip(g).zip(y) {
                        *d += gi
                            * match op {
                                UnaryOp::Sigmoid => yi * (1.0 - yi),
                                UnaryOp::Tanh => 1.0 - yi * yi,
                                UnaryOp::Exp => yi,
                                UnaryOp::Relu => {
                                    if yi > 0.0 {
                                        1.0
                                    } else {
                                        0.0
                                    }
                                }
                            };
                    }
                }
            }
            Op::Softmax(a) => {
                let n = *out.shape().last().unwrap();
                if let Some(da) = slot(nodes, grads, *a) {
                    for ((drow, grow), yrow) in da.chunks_mut(n).zip(g.chunks(n)).zip(out.data().chunks(n)) {
                        let dot: f64 = grow.iter().zip(yrow).map(|(x, y)| x * y).sum();
                        for ((d, gi), yi) in drow.iter_mut().zip(grow).zip(yrow) {
                            *d += yi * (gi - dot);
                        }
                    }
                }
            }
            Op::Concat { inputs, axis } => {
                let shape = out.shape();
                let outer: usize = shape[..*axis].iter().product();
                let inner: usize = shape[axis + 1..].iter().product();
                let row = shape[*axis] * inner;
                let mut start = 0;
                for v in inputs {
                    let block = nodes[v.0].value.shape()[*axis] * inner;
                    if let Some(dv) = slot(nodes, grads, *v) {
                        for o in 0..outer {
                            add_into(
                                &mut dv[o * block..(o + 1) * block],
                                &g[o * row + start..o * row + start + block],
                            );
                        }
                    }
                    start += block;
                }
            }
            Op::Slice { input, axis, start } => {
                let in_shape = nodes[input.0].value.shape();
                let outer: usize = in_shape[..*axis].iter().product();
                let inner: usize = in_shape[axis + 1..].iter().product();
                let len = out.shape()[*axis];
                if let Some(da) = slot(nodes, grads, *input) {
                    for o in 0..outer {
                        let base = (o * in_shape[*axis] + start) * inner;
                        add_into(
                            &mut da[base..base + len * inner],
                            &g[o * len * inner..(o + 1) * len * inner],
                        );
                    }
                }
            }
            Op::Reshape(a) => {
                if let Some(da) = slot(nodes, grads, *a) {
                    add_into(da, g);
                }
            }
            Op::Permute { input, perm } => {
                let offsets = kernels::permute_offsets(nodes[input.0].value.shape(), perm);
                if let Some(da) = slot(nodes, grads, *input) {
                    for (&o, gi) in offsets.iter().zip(g) {
                        da[o] += gi;
                    }
                }
            }
            Op::Sum(a) => {
                if let Some(da) = slot(nodes, grads, *a) {
                    da.iter_mut().for_each(|d| *d += g[0]);
                }
            }
            Op::Mean(a) => {
                if let Some(da) = slot(nodes, grads, *a) {
                    let scale = g[0] / da.len().max(1) as f64;
                    da.iter_mut().for_each(|d| *d += scale);
                }
            }
            Op::Gather { table, ids } => {
                let d = nodes[table.0].value.shape()[1];
                if let Some(dt) = slot(nodes, grads, *table) {
                    for (r, &id) in ids.iter().enumerate() {
                        add_into(&mut dt[id * d..(id + 1) * d], &g[r * d..(r + 1) * d]);
                    }
                }
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                normed,
                inv_std,
            } => {
                let d = nodes[gain.0].value.numel();
                let gv = nodes[gain.0].value.data();
                if let Some(dg) = slot(nodes, grads, *gain) {
                    for (grow, nrow) in g.chunks(d).zip(normed.chunks(d)) {
                        for j in 0..d {
                            dg[j] += grow[j] * nrow[j];
                        }
                    }
                }
                if let Some(db) = slot(nodes, grads, *bias) {
                    for grow in g.chunks(d) {
                        add_into(db, grow);
                    }
                }
                if let Some(dx) = slot(nodes, grads, *x) {
                    for (r, (grow, nrow)) in g.chunks(d).zip(normed.chunks(d)).enumerate() {
                        let dn: Vec<f64> = grow.iter().zip(gv).map(|(a, b)| a * b).collect();
                        let mean_dn = dn.iter().sum::<f64>() / d as f64;
                        let mean_dn_n = dn.iter().zip(nrow).map(|(a, b)| a * b).sum::<f64>() / d as f64;
                        for j in 0..d {
                            dx[r * d + j] += inv_std[r] * (dn[j] - mean_dn - nrow[j] * mean_dn_n);
                        }
                    }
                }
            }
            Op::CrossEntropy {
                logits,
                targets,
                mask,
                probs,
                count,
            } => {
                let v = *nodes[logits.0].value.shape().last().unwrap();
                let scale = g[0] / *count as f64;
                if let Some(dl) = slot(nodes, grads, *logits) {
                    for (r, &t) in targets.iter().enumerate() {
                        if !mask[r] {
                            continue;
                        }
                        for j in 0..v {
                            dl[r * v + j] += scale * probs[r * v + j];
                        }
                        dl[r * v + t] -= scale;
                    }
                }
            }
        }
    }
}
