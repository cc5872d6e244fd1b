//! Reverse-mode differentiation over an append-only node arena.
//!
//! A [`Graph`] records every operation applied during a forward pass. Nodes
//! are addressed by the copyable [`Var`] handle and are only ever appended,
//! so node order is a valid topological order and [`Graph::backward`] is a
//! single reverse sweep.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use super::dense::{axis_extents, broadcast_index_pairs, broadcast_shapes, sum_to_shape};
use super::kernels::{self, ConvGeom, PoolGeom};
use super::param::{ParamId, ParamStore};
use super::{Tensor, TensorError};

/// Handle to a node inside one [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    MatMul(Var, Var),
    Conv2d {
        input: Var,
        weight: Var,
        bias: Option<Var>,
        geom: ConvGeom,
    },
    AvgPool2d(Var, PoolGeom),
    GlobalAvgPool(Var),
    Relu(Var),
    Sigmoid(Var),
    Exp(Var),
    Log(Var),
    Sqrt(Var),
    Scale(Var, f64),
    AddScalar(Var),
    ClampMin(Var, f64),
    Softmax(Var, usize),
    LogSoftmax(Var, usize),
    Sum(Var),
    SumAxis(Var, usize),
    L2Norm(Var, Vec<usize>),
    Reshape(Var),
    Concat(Vec<Var>, usize),
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Computation graph for one forward/backward pass.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    bound: Vec<Option<Var>>,
    store_addr: Option<usize>,
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

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn grad_of(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// Input that receives a gradient.
    pub fn variable(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Input that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Leaf for a stored parameter; repeated calls return the same node.
    ///
    /// # Panics
    /// If the graph already holds parameters of a different store.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        let addr = store as *const ParamStore as usize;
        assert_eq!(
            *self.store_addr.get_or_insert(addr),
            addr,
            "a graph binds parameters of a single ParamStore"
        );
        if self.bound.len() <= id.index() {
            self.bound.resize(id.index() + 1, None);
        }
        if let Some(v) = self.bound[id.index()] {
            return v;
        }
        let p = store.get(id);
        let v = self.push(p.tensor.clone(), Op::Leaf, p.trainable);
        self.bound[id.index()] = Some(v);
        v
    }

    fn binary(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var, TensorError> {
        let (ta, tb) = (self.value(a), self.value(b));
        let value = if ta.shape() == tb.shape() {
            ta.zip_map(tb, f)
        } else {
            let out_shape = broadcast_shapes(ta.shape(), tb.shape()).ok_or_else(|| {
                TensorError::ShapeMismatch {
                    op: name,
                    lhs: ta.shape().to_vec(),
                    rhs: tb.shape().to_vec(),
                }
            })?;
            let (ia, ib) = broadcast_index_pairs(ta.shape(), tb.shape(), &out_shape);
            let data = ia
                .iter()
                .zip(&ib)
                .map(|(&i, &j)| f(ta.data()[i], tb.data()[j]))
                .collect();
            Tensor::new(&out_shape, data)?
        };
        let rg = self.grad_of(&[a, b]);
        Ok(self.push(value, op, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.binary("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.binary("div", a, b, |x, y| x / y, Op::Div(a, b))
    }

    /// Matrix product of two rank-2 tensors.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (sa, sb) = (ta.shape(), tb.shape());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(TensorError::ShapeMismatch {
                op: "matmul",
                lhs: sa.to_vec(),
                rhs: sb.to_vec(),
            });
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * n];
        kernels::matmul_acc(ta.data(), tb.data(), &mut out, m, k, n);
        let rg = self.grad_of(&[a, b]);
        Ok(self.push(Tensor::new(&[m, n], out)?, Op::MatMul(a, b), rg))
    }

    /// 3x3 convolution, zero padding 1. Input `(C,H,W)`, weight `(O,C,3,3)`, bias `(O)`.
    pub fn conv2d(
        &mut self,
        input: Var,
        weight: Var,
        bias: Option<Var>,
        stride: usize,
    ) -> Result<Var, TensorError> {
        let (sx, sw) = (self.shape(input).to_vec(), self.shape(weight).to_vec());
        let mismatch = || TensorError::ShapeMismatch {
            op: "conv2d",
            lhs: sx.clone(),
            rhs: sw.clone(),
        };
        if sx.len() != 3 || sw.len() != 4 || sw[1] != sx[0] || sw[2] != 3 || sw[3] != 3 {
            return Err(mismatch());
        }
        if !(stride == 1 || stride == 2) {
            return Err(TensorError::Contract(format!(
                "conv2d stride {stride} not in {{1, 2}}"
            )));
        }
        if let Some(b) = bias {
            if self.shape(b) != [sw[0]] {
                return Err(TensorError::ShapeMismatch {
                    op: "conv2d bias",
                    lhs: self.shape(b).to_vec(),
                    rhs: vec![sw[0]],
                });
            }
        }
        let geom = ConvGeom {
            c_in: sx[0],
            c_out: sw[0],
            h: sx[1],
            w: sx[2],
            stride,
        };
        let out = kernels::conv3x3_forward(
            self.value(input).data(),
            self.value(weight).data(),
            bias.map(|b| self.value(b).data()),
            geom,
        );
        let value = Tensor::new(&[geom.c_out, geom.out_h(), geom.out_w()], out)?;
        let mut deps = vec![input, weight];
        deps.extend(bias);
        let rg = self.grad_of(&deps);
        Ok(self.push(
            value,
            Op::Conv2d {
                input,
                weight,
                bias,
                geom,
            },
            rg,
        ))
    }

    /// k x k average pooling over a `(C,H,W)` tensor with zero padding.
    pub fn avg_pool2d(
        &mut self,
        x: Var,
        kernel: usize,
        stride: usize,
        pad: usize,
    ) -> Result<Var, TensorError> {
        let s = self.shape(x).to_vec();
        if s.len() != 3
            || kernel == 0
            || stride == 0
            || s[1] + 2 * pad < kernel
            || s[2] + 2 * pad < kernel
        {
            return Err(TensorError::Contract(format!(
                "avg_pool2d kernel {kernel} stride {stride} pad {pad} on shape {s:?}"
            )));
        }
        let geom = PoolGeom {
            channels: s[0],
            h: s[1],
            w: s[2],
            kernel,
            stride,
            pad,
        };
        let out = kernels::avg_pool_forward(self.value(x).data(), geom);
        let value = Tensor::new(&[s[0], geom.out_h(), geom.out_w()], out)?;
        let rg = self.grad_of(&[x]);
        Ok(self.push(value, Op::AvgPool2d(x, geom), rg))
    }

    /// Stride-1 pooling that keeps spatial size (odd `kernel`).
    pub fn avg_pool_same(&mut self, x: Var, kernel: usize) -> Result<Var, TensorError> {
        self.avg_pool2d(x, kernel, 1, kernel / 2)
    }

    /// `(C,H,W) -> (C)`.
    pub fn global_avg_pool(&mut self, x: Var) -> Result<Var, TensorError> {
        let t = self.value(x);
        if t.rank() != 3 {
            return Err(TensorError::Contract(format!(
                "global_avg_pool expects (C,H,W), got {:?}",
                t.shape()
            )));
        }
        let c = t.shape()[0];
        let plane = t.len() / c;
        let data = t
            .data()
            .chunks(plane)
            .map(|ch| ch.iter().sum::<f64>() / plane as f64)
            .collect();
        let rg = self.grad_of(&[x]);
        Ok(self.push(Tensor::new(&[c], data)?, Op::GlobalAvgPool(x), rg))
    }

    fn unary(&mut self, x: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let value = self.value(x).map(f);
        let rg = self.grad_of(&[x]);
        self.push(value, op, rg)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.unary(x, |v| v.max(0.0), Op::Relu(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(x, sigmoid, Op::Sigmoid(x))
    }

    pub fn exp(&mut self, x: Var) -> Var {
        self.unary(x, f64::exp, Op::Exp(x))
    }

    pub fn log(&mut self, x: Var) -> Var {
        self.unary(x, f64::ln, Op::Log(x))
    }

    pub fn sqrt(&mut self, x: Var) -> Var {
        self.unary(x, f64::sqrt, Op::Sqrt(x))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        self.unary(x, |v| v * c, Op::Scale(x, c))
    }

    pub fn neg(&mut self, x: Var) -> Var {
        self.scale(x, -1.0)
    }

    pub fn add_scalar(&mut self, x: Var, c: f64) -> Var {
        self.unary(x, |v| v + c, Op::AddScalar(x))
    }

    /// `max(x, floor)`; the gradient is passed only where `x > floor`.
    pub fn clamp_min(&mut self, x: Var, floor: f64) -> Var {
        self.unary(x, |v| v.max(floor), Op::ClampMin(x, floor))
    }

    fn check_axis(&self, x: Var, axis: usize) -> Result<(), TensorError> {
        let rank = self.value(x).rank();
        if axis >= rank {
            return Err(TensorError::AxisOutOfRange { axis, rank });
        }
        Ok(())
    }

    /// Softmax along `axis`, computed with max subtraction.
    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var, TensorError> {
        self.check_axis(x, axis)?;
        let value = softmax_along(self.value(x), axis, false);
        let rg = self.grad_of(&[x]);
        Ok(self.push(value, Op::Softmax(x, axis), rg))
    }

    pub fn log_softmax(&mut self, x: Var, axis: usize) -> Result<Var, TensorError> {
        self.check_axis(x, axis)?;
        let value = softmax_along(self.value(x), axis, true);
        let rg = self.grad_of(&[x]);
        Ok(self.push(value, Op::LogSoftmax(x, axis), rg))
    }

    /// Sum of all elements as a rank-0 tensor.
    pub fn sum(&mut self, x: Var) -> Var {
        let value = Tensor::scalar(self.value(x).sum());
        let rg = self.grad_of(&[x]);
        self.push(value, Op::Sum(x), rg)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let n = self.value(x).len() as f64;
        let s = self.sum(x);
        self.scale(s, 1.0 / n)
    }

    /// Sum over one axis, removing it from the shape.
    pub fn sum_axis(&mut self, x: Var, axis: usize) -> Result<Var, TensorError> {
        self.check_axis(x, axis)?;
        let t = self.value(x);
        let (outer, len, inner) = axis_extents(t.shape(), axis);
        let mut data = vec![0.0; outer * inner];
        for o in 0..outer {
            for k in 0..len {
                let src = &t.data()[(o * len + k) * inner..(o * len + k + 1) * inner];
                for (d, s) in data[o * inner..(o + 1) * inner].iter_mut().zip(src) {
                    *d += s;
                }
            }
        }
        let mut shape = t.shape().to_vec();
        shape.remove(axis);
        let value = Tensor::new(&shape, data)?;
        let rg = self.grad_of(&[x]);
        Ok(self.push(value, Op::SumAxis(x, axis), rg))
    }

    pub fn mean_axis(&mut self, x: Var, axis: usize) -> Result<Var, TensorError> {
        self.check_axis(x, axis)?;
        let n = self.shape(x)[axis] as f64;
        let s = self.sum_axis(x, axis)?;
        Ok(self.scale(s, 1.0 / n))
    }

    /// Euclidean norm over `axes`, which are removed from the shape.
    ///
    /// The gradient at a zero-norm slice is taken to be zero.
    pub fn l2_norm(&mut self, x: Var, axes: &[usize]) -> Result<Var, TensorError> {
        let shape = self.shape(x).to_vec();
        let mut axes = axes.to_vec();
        axes.sort_unstable();
        axes.dedup();
        for &a in &axes {
            self.check_axis(x, a)?;
        }
        if axes.is_empty() {
            return Err(TensorError::Contract(
                "l2_norm needs at least one axis".into(),
            ));
        }
        let (kept, map) = reduction_map(&shape, &axes);
        let mut acc = vec![0.0; kept.iter().product()];
        for (v, &m) in self.value(x).data().iter().zip(&map) {
            acc[m] += v * v;
        }
        acc.iter_mut().for_each(|v| *v = v.sqrt());
        let value = Tensor::new(&kept, acc)?;
        let rg = self.grad_of(&[x]);
        Ok(self.push(value, Op::L2Norm(x, axes), rg))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var, TensorError> {
        let value = self
            .value(x)
            .reshaped(shape)
            .map_err(|_| TensorError::ShapeMismatch {
                op: "reshape",
                lhs: self.shape(x).to_vec(),
                rhs: shape.to_vec(),
            })?;
        let rg = self.grad_of(&[x]);
        Ok(self.push(value, Op::Reshape(x), rg))
    }

    /// Concatenate along `axis`; all other extents must agree.
    pub fn concat(&mut self, xs: &[Var], axis: usize) -> Result<Var, TensorError> {
        let first = xs
            .first()
            .ok_or_else(|| TensorError::Contract("concat of zero tensors".into()))?;
        self.check_axis(*first, axis)?;
        let base = self.shape(*first).to_vec();
        let mut total = 0;
        for &v in xs {
            let s = self.shape(v);
            let compatible = s.len() == base.len()
                && s.iter()
                    .zip(&base)
                    .enumerate()
                    .all(|(i, (a, b))| i == axis || a == b);
            if !compatible {
                return Err(TensorError::ShapeMismatch {
                    op: "concat",
                    lhs: base.clone(),
                    rhs: s.to_vec(),
                });
            }
            total += s[axis];
        }
        let (outer, _, inner) = axis_extents(&base, axis);
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &v in xs {
                let t = self.value(v);
                let chunk = t.shape()[axis] * inner;
                data.extend_from_slice(&t.data()[o * chunk..(o + 1) * chunk]);
            }
        }
        let mut shape = base;
        shape[axis] = total;
        let value = Tensor::new(&shape, data)?;
        let rg = self.grad_of(xs);
        Ok(self.push(value, Op::Concat(xs.to_vec(), axis), rg))
    }

    /// Hash of every piecewise branch taken in this graph (ReLU signs,
    /// clamp activity). Two evaluations with equal signatures lie on the
    /// same smooth piece of the function.
    pub fn branch_signature(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for node in &self.nodes {
            match node.op {
                Op::Relu(x) => {
                    for &v in self.value(x).data() {
                        (v > 0.0).hash(&mut h);
                    }
                }
                Op::ClampMin(x, floor) => {
                    for &v in self.value(x).data() {
                        (v > floor).hash(&mut h);
                    }
                }
                _ => {}
            }
        }
        h.finish()
    }

    /// Reverse sweep from a single-element `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients, TensorError> {
        let lt = self.value(loss);
        if lt.len() != 1 {
            return Err(TensorError::NonScalarLoss {
                shape: lt.shape().to_vec(),
            });
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::ones(lt.shape()));
        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients {
            grads,
            bound: self.bound.clone(),
        })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        match &mut grads[v.0] {
            Some(acc) => acc.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
    }

    fn propagate(&self, i: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let out = &self.nodes[i].value;
        match &self.nodes[i].op {
            Op::Leaf => {}
            &Op::Add(a, b) => {
                self.accumulate(grads, a, sum_to_shape(g, self.shape(a)));
                self.accumulate(grads, b, sum_to_shape(g, self.shape(b)));
            }
            &Op::Sub(a, b) => {
                self.accumulate(grads, a, sum_to_shape(g, self.shape(a)));
                self.accumulate(grads, b, sum_to_shape(&g.map(|v| -v), self.shape(b)));
            }
            &Op::Mul(a, b) => {
                let (ga, gb) = self.binary_grads(a, b, g, |_, y, gv| gv * y, |x, _, gv| gv * x);
                self.accumulate(grads, a, ga);
                self.accumulate(grads, b, gb);
            }
            &Op::Div(a, b) => {
                let (ga, gb) =
                    self.binary_grads(a, b, g, |_, y, gv| gv / y, |x, y, gv| -gv * x / (y * y));
                self.accumulate(grads, a, ga);
                self.accumulate(grads, b, gb);
            }
            &Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(a), self.value(b));
                let (m, k, n) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
                if self.nodes[a.0].requires_grad {
                    let bt = kernels::transpose(tb.data(), k, n);
                    let mut ga = vec![0.0; m * k];
                    kernels::matmul_acc(g.data(), &bt, &mut ga, m, n, k);
                    self.accumulate(grads, a, Tensor::new(&[m, k], ga).expect("matmul grad"));
                }
                if self.nodes[b.0].requires_grad {
                    let at = kernels::transpose(ta.data(), m, k);
                    let mut gb = vec![0.0; k * n];
                    kernels::matmul_acc(&at, g.data(), &mut gb, k, m, n);
                    self.accumulate(grads, b, Tensor::new(&[k, n], gb).expect("matmul grad"));
                }
            }
            &Op::Conv2d {
                input,
                weight,
                bias,
                geom,
            } => {
                let (gx, gw, gb) = kernels::conv3x3_backward(
                    self.value(input).data(),
                    self.value(weight).data(),
                    g.data(),
                    geom,
                );
                self.accumulate(
                    grads,
                    input,
                    Tensor::new(self.shape(input), gx).expect("conv grad"),
                );
                self.accumulate(
                    grads,
                    weight,
                    Tensor::new(self.shape(weight), gw).expect("conv grad"),
                );
                if let Some(b) = bias {
                    self.accumulate(grads, b, Tensor::new(&[geom.c_out], gb).expect("conv grad"));
                }
            }
            &Op::AvgPool2d(x, geom) => {
                let gx = kernels::avg_pool_backward(g.data(), geom);
                self.accumulate(grads, x, Tensor::new(self.shape(x), gx).expect("pool grad"));
            }
            &Op::GlobalAvgPool(x) => {
                let s = self.shape(x);
                let plane = s[1] * s[2];
                let inv = 1.0 / plane as f64;
                let data = g
                    .data()
                    .iter()
                    .flat_map(|&gv| std::iter::repeat(gv * inv).take(plane))
                    .collect();
                self.accumulate(grads, x, Tensor::new(s, data).expect("gap grad"));
            }
            &Op::Relu(x) => {
                let gx = self
                    .value(x)
                    .zip_map(g, |v, gv| if v > 0.0 { gv } else { 0.0 });
                self.accumulate(grads, x, gx);
            }
            &Op::Sigmoid(x) => {
                self.accumulate(grads, x, out.zip_map(g, |s, gv| gv * s * (1.0 - s)));
            }
            &Op::Exp(x) => {
                self.accumulate(grads, x, out.zip_map(g, |e, gv| gv * e));
            }
            &Op::Log(x) => {
                self.accumulate(grads, x, self.value(x).zip_map(g, |v, gv| gv / v));
            }
            &Op::Sqrt(x) => {
                self.accumulate(grads, x, out.zip_map(g, |r, gv| gv / (2.0 * r)));
            }
            &Op::Scale(x, c) => {
                self.accumulate(grads, x, g.map(|gv| gv * c));
            }
            &Op::AddScalar(x) => {
                self.accumulate(grads, x, g.clone());
            }
            &Op::ClampMin(x, floor) => {
                let gx = self
                    .value(x)
                    .zip_map(g, |v, gv| if v > floor { gv } else { 0.0 });
                self.accumulate(grads, x, gx);
            }
            &Op::Softmax(x, axis) => {
                let (outer, len, inner) = axis_extents(out.shape(), axis);
                let mut gx = vec![0.0; out.len()];
                for o in 0..outer {
                    for j in 0..inner {
                        let idx = |k: usize| (o * len + k) * inner + j;
                        let dot: f64 = (0..len)
                            .map(|k| g.data()[idx(k)] * out.data()[idx(k)])
                            .sum();
                        for k in 0..len {
                            gx[idx(k)] = out.data()[idx(k)] * (g.data()[idx(k)] - dot);
                        }
                    }
                }
                self.accumulate(
                    grads,
                    x,
                    Tensor::new(out.shape(), gx).expect("softmax grad"),
                );
            }
            &Op::LogSoftmax(x, axis) => {
                let (outer, len, inner) = axis_extents(out.shape(), axis);
                let mut gx = vec![0.0; out.len()];
                for o in 0..outer {
                    for j in 0..inner {
                        let idx = |k: usize| (o * len + k) * inner + j;
                        let gsum: f64 = (0..len).map(|k| g.data()[idx(k)]).sum();
                        for k in 0..len {
                            gx[idx(k)] = g.data()[idx(k)] - out.data()[idx(k)].exp() * gsum;
                        }
                    }
                }
                self.accumulate(
                    grads,
                    x,
                    Tensor::new(out.shape(), gx).expect("log_softmax grad"),
                );
            }
            &Op::Sum(x) => {
                self.accumulate(grads, x, Tensor::full(self.shape(x), g.item()));
            }
            &Op::SumAxis(x, axis) => {
                let s = self.shape(x);
                let (outer, len, inner) = axis_extents(s, axis);
                let mut gx = vec![0.0; outer * len * inner];
                for o in 0..outer {
                    let src = &g.data()[o * inner..(o + 1) * inner];
                    for k in 0..len {
                        gx[(o * len + k) * inner..(o * len + k + 1) * inner].copy_from_slice(src);
                    }
                }
                self.accumulate(grads, x, Tensor::new(s, gx).expect("sum_axis grad"));
            }
            Op::L2Norm(x, axes) => {
                let x = *x;
                let tx = self.value(x);
                let (_, map) = reduction_map(tx.shape(), axes);
                let gx = tx
                    .data()
                    .iter()
                    .zip(&map)
                    .map(|(&v, &m)| {
                        let n = out.data()[m];
                        if n > 0.0 {
                            g.data()[m] * v / n
                        } else {
                            0.0
                        }
                    })
                    .collect();
                self.accumulate(grads, x, Tensor::new(tx.shape(), gx).expect("norm grad"));
            }
            &Op::Reshape(x) => {
                self.accumulate(grads, x, g.reshaped(self.shape(x)).expect("reshape grad"));
            }
            Op::Concat(xs, axis) => {
                let (outer, _, inner) = axis_extents(out.shape(), *axis);
                let total = out.shape()[*axis];
                let mut offset = 0;
                for &v in xs {
                    let s = self.shape(v);
                    let chunk = s[*axis] * inner;
                    let mut gv = Vec::with_capacity(outer * chunk);
                    for o in 0..outer {
                        let start = o * total * inner + offset;
                        gv.extend_from_slice(&g.data()[start..start + chunk]);
                    }
                    offset += chunk;
                    self.accumulate(grads, v, Tensor::new(s, gv).expect("concat grad"));
                }
            }
        }
    }

    fn binary_grads(
        &self,
        a: Var,
        b: Var,
        g: &Tensor,
        da: impl Fn(f64, f64, f64) -> f64,
        db: impl Fn(f64, f64, f64) -> f64,
    ) -> (Tensor, Tensor) {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() == tb.shape() {
            let n = g.len();
            let mut ga = vec![0.0; n];
            let mut gb = vec![0.0; n];
            for i in 0..n {
                let (x, y, gv) = (ta.data()[i], tb.data()[i], g.data()[i]);
                ga[i] = da(x, y, gv);
                gb[i] = db(x, y, gv);
            }
            return (
                Tensor::new(ta.shape(), ga).expect("grad shape"),
                Tensor::new(tb.shape(), gb).expect("grad shape"),
            );
        }
        let (ia, ib) = broadcast_index_pairs(ta.shape(), tb.shape(), g.shape());
        let mut ga = Tensor::zeros(ta.shape());
        let mut gb = Tensor::zeros(tb.shape());
        for ((&i, &j), &gv) in ia.iter().zip(&ib).zip(g.data()) {
            let (x, y) = (ta.data()[i], tb.data()[j]);
            ga.data_mut()[i] += da(x, y, gv);
            gb.data_mut()[j] += db(x, y, gv);
        }
        (ga, gb)
    }
}

/// Per-node gradients produced by [`Graph::backward`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    bound: Vec<Option<Var>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient for every parameter in `store`; unreachable ones are zero.
    pub fn for_params(&self, store: &ParamStore) -> Vec<Tensor> {
        store
            .iter()
            .map(|(id, p)| {
                self.bound
                    .get(id.index())
                    .copied()
                    .flatten()
                    .and_then(|v| self.get(v).cloned())
                    .filter(|_| p.trainable)
                    .unwrap_or_else(|| Tensor::zeros(p.tensor.shape()))
            })
            .collect()
    }
}

pub(crate) fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

fn softmax_along(t: &Tensor, axis: usize, log: bool) -> Tensor {
    let (outer, len, inner) = axis_extents(t.shape(), axis);
    let mut out = vec![0.0; t.len()];
    for o in 0..outer {
        for j in 0..inner {
            let idx = |k: usize| (o * len + k) * inner + j;
            let max = (0..len)
                .map(|k| t.data()[idx(k)])
                .fold(f64::NEG_INFINITY, f64::max);
            let denom: f64 = (0..len).map(|k| (t.data()[idx(k)] - max).exp()).sum();
            for k in 0..len {
                let shifted = t.data()[idx(k)] - max;
                out[idx(k)] = if log {
                    shifted - denom.ln()
                } else {
                    shifted.exp() / denom
                };
            }
        }
    }
    Tensor::new(t.shape(), out).expect("softmax shape")
}

/// Kept shape after removing `axes`, and the kept-index of every element.
fn reduction_map(shape: &[usize], axes: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let kept: Vec<usize> = shape
        .iter()
        .enumerate()
        .filter(|(i, _)| !axes.contains(i))
        .map(|(_, &d)| d)
        .collect();
    let numel: usize = shape.iter().product();
    let mut map = Vec::with_capacity(numel);
    let mut idx = vec![0usize; shape.len()];
    for _ in 0..numel {
        let mut m = 0;
        for (d, &i) in idx.iter().enumerate() {
            if !axes.contains(&d) {
                m = m * shape[d] + i;
            }
        }
        map.push(m);
        for d in (0..shape.len()).rev() {
            idx[d] += 1;
            if idx[d] < shape[d] {
                break;
            }
            idx[d] = 0;
        }
    }
    (kept, map)
}
