//! Tape-based reverse-mode automatic differentiation.
//!
//! A [`Graph`] records every operation applied to its variables. Calling
//! [`Graph::backward`] on a scalar walks the tape in reverse and returns a
//! gradient for every node that depends on a parameter or on a leaf created
//! with [`Graph::leaf`]. Nodes built only from constants never receive
//! gradients, which keeps input-sensitivity passes cheap.

use indexmap::IndexMap;

use crate::error::{Error, Result};

use super::params::ParameterSet;
use super::real::Real;
use super::tensor::Tensor;

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Minimum(usize, usize),
    Affine {
        x: usize,
        scale: f64,
    },
    Relu(usize),
    Tanh(usize),
    Sigmoid(usize),
    Exp(usize),
    Square(usize),
    Clamp {
        x: usize,
        lo: f64,
        hi: f64,
    },
    Linear {
        x: usize,
        w: usize,
        b: Option<usize>,
    },
    Conv {
        x: usize,
        w: usize,
        b: Option<usize>,
        stride: usize,
    },
    SliceCols {
        x: usize,
        start: usize,
    },
    GatherRows {
        x: usize,
        idx: Vec<usize>,
    },
    Reshape(usize),
    CosineRows {
        a: usize,
        b: usize,
    },
    SumCols(usize),
    Mean(usize),
    ScaleCols {
        x: usize,
        scale: Vec<f64>,
    },
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op,
    needs_grad: bool,
    param: Option<String>,
}

/// Recorded computation.
#[derive(Debug, Default)]
pub struct Graph<T: Real = f32> {
    nodes: Vec<Node<T>>,
}

/// Gradients produced by one backward pass, indexed by node.
#[derive(Debug)]
pub struct Grads<T> {
    grads: Vec<Option<Vec<T>>>,
    params: Vec<(String, usize, Vec<usize>)>,
}

impl<T: Real> Grads<T> {
    /// Gradient with respect to `var`, if any flowed into it.
    pub fn wrt(&self, var: Var) -> Option<&[T]> {
        self.grads.get(var.0).and_then(|g| g.as_deref())
    }

    /// Parameter gradients keyed by parameter name. Parameters that the loss
    /// does not depend on get zero gradients.
    pub fn params(&self) -> IndexMap<String, Tensor<T>> {
        self.params
            .iter()
            .map(|(name, node, shape)| {
                let numel = shape.iter().product();
                let data = self.grads[*node]
                    .clone()
                    .unwrap_or_else(|| vec![T::zero(); numel]);
                (
                    name.clone(),
                    Tensor::new(shape, data).expect("gradient shape"),
                )
            })
            .collect()
    }
}

fn same_shape(a: &[usize], b: &[usize], op: &str) -> Result<()> {
    if a != b {
        return Err(Error::shape(format!("{op}: shapes {a:?} and {b:?} differ")));
    }
    Ok(())
}

/// Circular padding split: `(k - 1) / 2` samples on the left, the rest on
/// the right.
pub fn circular_pad_left(k: usize) -> usize {
    (k - 1) / 2
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op, parents: &[usize]) -> Var {
        let needs_grad = parents.iter().any(|&p| self.nodes[p].needs_grad);
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
            param: None,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// A value that never receives a gradient.
    pub fn constant(&mut self, t: Tensor<T>) -> Var {
        self.nodes.push(Node {
            value: t,
            op: Op::Leaf,
            needs_grad: false,
            param: None,
        });
        Var(self.nodes.len() - 1)
    }

    /// An input whose gradient should be tracked (sensitivity analysis).
    pub fn leaf(&mut self, t: Tensor<T>) -> Var {
        self.nodes.push(Node {
            value: t,
            op: Op::Leaf,
            needs_grad: true,
            param: None,
        });
        Var(self.nodes.len() - 1)
    }

    /// Register a named parameter; its gradient is reported by
    /// [`Grads::params`].
    pub fn param(&mut self, params: &ParameterSet<T>, name: &str) -> Result<Var> {
        let t = params
            .get(name)
            .ok_or_else(|| Error::config(format!("unknown parameter `{name}`")))?;
        self.nodes.push(Node {
            value: t.clone(),
            op: Op::Leaf,
            needs_grad: true,
            param: Some(name.to_string()),
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Like [`Graph::param`] but the parameter is treated as frozen.
    pub fn frozen_param(&mut self, params: &ParameterSet<T>, name: &str) -> Result<Var> {
        let t = params
            .get(name)
            .ok_or_else(|| Error::config(format!("unknown parameter `{name}`")))?;
        Ok(self.constant(t.clone()))
    }

    fn map(&mut self, x: Var, op: Op, f: impl Fn(T) -> T) -> Var {
        let src = &self.nodes[x.0].value;
        let data = src.data().iter().map(|&v| f(v)).collect();
        let value = Tensor::new(src.shape(), data).expect("elementwise shape");
        self.push(value, op, &[x.0])
    }

    fn zip(&mut self, a: Var, b: Var, op: Op, name: &str, f: impl Fn(T, T) -> T) -> Result<Var> {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        same_shape(ta.shape(), tb.shape(), name)?;
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let value = Tensor::new(ta.shape(), data)?;
        Ok(self.push(value, op, &[a.0, b.0]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, Op::Add(a.0, b.0), "add", |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, Op::Sub(a.0, b.0), "sub", |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, Op::Mul(a.0, b.0), "mul", |x, y| x * y)
    }

    pub fn minimum(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, Op::Minimum(a.0, b.0), "minimum", |x, y| {
            if x <= y {
                x
            } else {
                y
            }
        })
    }

    /// `scale * x + shift`.
    pub fn affine(&mut self, x: Var, scale: f64, shift: f64) -> Var {
        let (s, c) = (T::from_f64(scale), T::from_f64(shift));
        self.map(x, Op::Affine { x: x.0, scale }, |v| s * v + c)
    }

    pub fn one_minus(&mut self, x: Var) -> Var {
        self.affine(x, -1.0, 1.0)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.map(
            x,
            Op::Relu(x.0),
            |v| if v > T::zero() { v } else { T::zero() },
        )
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.map(x, Op::Tanh(x.0), |v| v.tanh())
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.map(x, Op::Sigmoid(x.0), sigmoid)
    }

    pub fn exp(&mut self, x: Var) -> Var {
        self.map(x, Op::Exp(x.0), |v| v.exp())
    }

    pub fn square(&mut self, x: Var) -> Var {
        self.map(x, Op::Square(x.0), |v| v * v)
    }

    pub fn clamp(&mut self, x: Var, lo: f64, hi: f64) -> Var {
        let (l, h) = (T::from_f64(lo), T::from_f64(hi));
        self.map(x, Op::Clamp { x: x.0, lo, hi }, |v| v.max(l).min(h))
    }

    /// `x @ w^T + b` with `x: [batch, in]`, `w: [out, in]`, `b: [out]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let (tx, tw) = (&self.nodes[x.0].value, &self.nodes[w.0].value);
        if tx.shape().len() != 2 || tw.shape().len() != 2 || tx.dim(1) != tw.dim(1) {
            return Err(Error::shape(format!(
                "linear: input {:?} incompatible with weight {:?}",
                tx.shape(),
                tw.shape()
            )));
        }
        let (batch, fan_in, fan_out) = (tx.dim(0), tx.dim(1), tw.dim(0));
        let mut out = vec![T::zero(); batch * fan_out];
        if let Some(b) = b {
            let tb = self.nodes[b.0].value.data();
            if tb.len() != fan_out {
                return Err(Error::shape(format!(
                    "linear: bias of length {} for {fan_out} outputs",
                    tb.len()
                )));
            }
            for row in out.chunks_mut(fan_out) {
                row.copy_from_slice(tb);
            }
        }
        let beta = if b.is_some() { T::one() } else { T::zero() };
        T::gemm(
            batch,
            fan_in,
            fan_out,
            T::one(),
            tx.data(),
            fan_in as isize,
            1,
            tw.data(),
            1,
            fan_in as isize,
            beta,
            &mut out,
            fan_out as isize,
            1,
        );
        let value = Tensor::new(&[batch, fan_out], out)?;
        let mut parents = vec![x.0, w.0];
        parents.extend(b.map(|v| v.0));
        Ok(self.push(
            value,
            Op::Linear {
                x: x.0,
                w: w.0,
                b: b.map(|v| v.0),
            },
            &parents,
        ))
    }

    /// Batched circular 1-D convolution.
    ///
    /// `x: [n, c_in, len]`, `w: [c_out, c_in, k]`, optional `b: [c_out]`.
    /// The ring is padded with `k - 1` wrapped samples (see
    /// [`circular_pad_left`]) so the output length is exactly `len / stride`.
    pub fn conv1d_circular(
        &mut self,
        x: Var,
        w: Var,
        b: Option<Var>,
        stride: usize,
    ) -> Result<Var> {
        let (tx, tw) = (&self.nodes[x.0].value, &self.nodes[w.0].value);
        if tx.shape().len() != 3 || tw.shape().len() != 3 {
            return Err(Error::config(format!(
                "conv1d: expected 3-d input and kernel, got {:?} and {:?}",
                tx.shape(),
                tw.shape()
            )));
        }
        let (n, c_in, len) = (tx.dim(0), tx.dim(1), tx.dim(2));
        let (c_out, k) = (tw.dim(0), tw.dim(2));
        if tw.dim(1) != c_in {
            return Err(Error::config(format!(
                "conv1d: kernel expects {} input channels, input has {c_in}",
                tw.dim(1)
            )));
        }
        if stride == 0 || len % stride != 0 {
            return Err(Error::config(format!(
                "conv1d: length {len} not divisible by stride {stride}"
            )));
        }
        if k == 0 || k > len {
            return Err(Error::config(format!(
                "conv1d: kernel size {k} vs length {len}"
            )));
        }
        let bias = match b {
            Some(b) => {
                let tb = self.nodes[b.0].value.data();
                if tb.len() != c_out {
                    return Err(Error::config(format!(
                        "conv1d: bias of length {} for {c_out} channels",
                        tb.len()
                    )));
                }
                Some(tb.to_vec())
            }
            None => None,
        };
        let geom = ConvGeom {
            n,
            c_in,
            len,
            c_out,
            k,
            stride,
        };
        let out = conv_forward(&geom, tx.data(), tw.data(), bias.as_deref());
        let value = Tensor::new(&[n, c_out, geom.len_out()], out)?;
        let mut parents = vec![x.0, w.0];
        parents.extend(b.map(|v| v.0));
        Ok(self.push(
            value,
            Op::Conv {
                x: x.0,
                w: w.0,
                b: b.map(|v| v.0),
                stride,
            },
            &parents,
        ))
    }

    /// Columns `[start, start + len)` of a `[batch, features]` tensor.
    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let tx = &self.nodes[x.0].value;
        if tx.shape().len() != 2 || start + len > tx.dim(1) {
            return Err(Error::shape(format!(
                "slice_cols: [{start}, {}) out of {:?}",
                start + len,
                tx.shape()
            )));
        }
        let (rows, cols) = (tx.dim(0), tx.dim(1));
        let mut out = Vec::with_capacity(rows * len);
        for r in 0..rows {
            out.extend_from_slice(&tx.data()[r * cols + start..r * cols + start + len]);
        }
        let value = Tensor::new(&[rows, len], out)?;
        Ok(self.push(value, Op::SliceCols { x: x.0, start }, &[x.0]))
    }

    /// Select rows (first-axis slices) of `x` by index; repeats allowed.
    pub fn gather_rows(&mut self, x: Var, idx: &[usize]) -> Result<Var> {
        let tx = &self.nodes[x.0].value;
        let rows = tx.dim(0);
        let width = tx.numel() / rows.max(1);
        let mut out = Vec::with_capacity(idx.len() * width);
        for &i in idx {
            if i >= rows {
                return Err(Error::shape(format!("gather_rows: index {i} >= {rows}")));
            }
            out.extend_from_slice(&tx.data()[i * width..(i + 1) * width]);
        }
        let mut shape = tx.shape().to_vec();
        shape[0] = idx.len();
        let value = Tensor::new(&shape, out)?;
        Ok(self.push(
            value,
            Op::GatherRows {
                x: x.0,
                idx: idx.to_vec(),
            },
            &[x.0],
        ))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let value = self.nodes[x.0].value.clone().reshape(shape)?;
        Ok(self.push(value, Op::Reshape(x.0), &[x.0]))
    }

    /// Row-wise cosine similarity of two `[batch, dim]` tensors.
    pub fn cosine_rows(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        same_shape(ta.shape(), tb.shape(), "cosine")?;
        if ta.shape().len() != 2 {
            return Err(Error::shape(format!(
                "cosine: expected 2-d, got {:?}",
                ta.shape()
            )));
        }
        let dim = ta.dim(1);
        let mut out = Vec::with_capacity(ta.dim(0));
        for (ra, rb) in ta.data().chunks(dim).zip(tb.data().chunks(dim)) {
            out.push(cosine_similarity(ra, rb)?);
        }
        let value = Tensor::from_vec(out);
        Ok(self.push(value, Op::CosineRows { a: a.0, b: b.0 }, &[a.0, b.0]))
    }

    /// Sum over the last axis of a `[batch, features]` tensor.
    pub fn sum_cols(&mut self, x: Var) -> Result<Var> {
        let tx = &self.nodes[x.0].value;
        if tx.shape().len() != 2 {
            return Err(Error::shape(format!(
                "sum_cols: expected 2-d, got {:?}",
                tx.shape()
            )));
        }
        let cols = tx.dim(1);
        let out = tx
            .data()
            .chunks(cols)
            .map(|r| r.iter().copied().sum())
            .collect();
        Ok(self.push(Tensor::from_vec(out), Op::SumCols(x.0), &[x.0]))
    }

    /// `(x[r, c] - shift[c]) * scale[c]` for a 2-d `x` with constant
    /// per-column `shift` and `scale`.
    pub fn scale_cols(&mut self, x: Var, shift: &[f64], scale: &[f64]) -> Result<Var> {
        let tx = &self.nodes[x.0].value;
        if tx.shape().len() != 2 || tx.dim(1) != shift.len() || shift.len() != scale.len() {
            return Err(Error::shape(format!(
                "scale_cols: {:?} against {} shifts and {} scales",
                tx.shape(),
                shift.len(),
                scale.len()
            )));
        }
        let cols = shift.len();
        let data = tx
            .data()
            .iter()
            .enumerate()
            .map(|(k, &v)| (v - T::from_f64(shift[k % cols])) * T::from_f64(scale[k % cols]))
            .collect();
        let value = Tensor::new(tx.shape(), data)?;
        Ok(self.push(
            value,
            Op::ScaleCols {
                x: x.0,
                scale: scale.to_vec(),
            },
            &[x.0],
        ))
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let tx = &self.nodes[x.0].value;
        let n = T::from_f64(tx.numel() as f64);
        let s: T = tx.data().iter().copied().sum();
        self.push(Tensor::scalar(s / n), Op::Mean(x.0), &[x.0])
    }

    /// Gradients of the scalar `loss` with respect to every tracked node.
    pub fn backward(&self, loss: Var) -> Result<Grads<T>> {
        let t = &self.nodes[loss.0].value;
        if t.numel() != 1 {
            return Err(Error::shape(format!(
                "backward needs a scalar loss, got shape {:?}",
                t.shape()
            )));
        }
        self.backward_seeded(loss, vec![T::one()])
    }

    /// Vector-Jacobian product: propagate `seed` (same shape as `out`) back
    /// through the tape. The graph is left untouched, so several seeds can
    /// be pushed through one forward pass.
    pub fn backward_seeded(&self, out: Var, seed: Vec<T>) -> Result<Grads<T>> {
        if seed.len() != self.nodes[out.0].value.numel() {
            return Err(Error::shape("seed does not match output size".to_string()));
        }
        let mut grads: Vec<Option<Vec<T>>> = vec![None; out.0 + 1];
        grads[out.0] = Some(seed);
        for i in (0..=out.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if self.nodes[i].needs_grad {
                self.propagate(i, &g, &mut grads);
            }
            grads[i] = Some(g);
        }
        let params = self
            .nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| {
                n.param
                    .as_ref()
                    .map(|name| (name.clone(), i, n.value.shape().to_vec()))
            })
            .collect();
        grads.resize(self.nodes.len(), None);
        Ok(Grads { grads, params })
    }

    fn wants(&self, node: usize) -> bool {
        self.nodes[node].needs_grad
    }

    fn propagate(&self, i: usize, g: &[T], grads: &mut [Option<Vec<T>>]) {
        let node = &self.nodes[i];
        let val = |j: usize| self.nodes[j].value.data();
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                if self.wants(*a) {
                    accumulate(grads, *a, g.iter().copied());
                }
                if self.wants(*b) {
                    accumulate(grads, *b, g.iter().copied());
                }
            }
            Op::Sub(a, b) => {
                if self.wants(*a) {
                    accumulate(grads, *a, g.iter().copied());
                }
                if self.wants(*b) {
                    accumulate(grads, *b, g.iter().map(|&v| -v));
                }
            }
            Op::Mul(a, b) => {
                if self.wants(*a) {
                    let vb = val(*b);
                    accumulate(grads, *a, g.iter().zip(vb).map(|(&gv, &bv)| gv * bv));
                }
                if self.wants(*b) {
                    let va = val(*a);
                    accumulate(grads, *b, g.iter().zip(va).map(|(&gv, &av)| gv * av));
                }
            }
            Op::Minimum(a, b) => {
                let (va, vb) = (val(*a), val(*b));
                if self.wants(*a) {
                    let it =
                        g.iter().zip(va.iter().zip(vb)).map(
                            |(&gv, (&x, &y))| {
                                if x <= y {
                                    gv
                                } else {
                                    T::zero()
                                }
                            },
                        );
                    accumulate(grads, *a, it);
                }
                if self.wants(*b) {
                    let it =
                        g.iter().zip(va.iter().zip(vb)).map(
                            |(&gv, (&x, &y))| {
                                if x <= y {
                                    T::zero()
                                } else {
                                    gv
                                }
                            },
                        );
                    accumulate(grads, *b, it);
                }
            }
            Op::Affine { x, scale } => {
                let s = T::from_f64(*scale);
                accumulate(grads, *x, g.iter().map(|&v| v * s));
            }
            Op::Relu(x) => {
                let vx = val(*x);
                accumulate(
                    grads,
                    *x,
                    g.iter()
                        .zip(vx)
                        .map(|(&gv, &xv)| if xv > T::zero() { gv } else { T::zero() }),
                );
            }
            Op::Tanh(x) => {
                let y = node.value.data();
                accumulate(
                    grads,
                    *x,
                    g.iter().zip(y).map(|(&gv, &yv)| gv * (T::one() - yv * yv)),
                );
            }
            Op::Sigmoid(x) => {
                let y = node.value.data();
                accumulate(
                    grads,
                    *x,
                    g.iter().zip(y).map(|(&gv, &yv)| gv * yv * (T::one() - yv)),
                );
            }
            Op::Exp(x) => {
                let y = node.value.data();
                accumulate(grads, *x, g.iter().zip(y).map(|(&gv, &yv)| gv * yv));
            }
            Op::Square(x) => {
                let two = T::from_f64(2.0);
                let vx = val(*x);
                accumulate(grads, *x, g.iter().zip(vx).map(|(&gv, &xv)| gv * two * xv));
            }
            Op::Clamp { x, lo, hi } => {
                let (l, h) = (T::from_f64(*lo), T::from_f64(*hi));
                let vx = val(*x);
                accumulate(
                    grads,
                    *x,
                    g.iter()
                        .zip(vx)
                        .map(|(&gv, &xv)| if xv >= l && xv <= h { gv } else { T::zero() }),
                );
            }
            Op::Linear { x, w, b } => {
                let (tx, tw) = (&self.nodes[*x].value, &self.nodes[*w].value);
                let (batch, fan_in, fan_out) = (tx.dim(0), tx.dim(1), tw.dim(0));
                if self.wants(*x) {
                    let mut dx = vec![T::zero(); batch * fan_in];
                    T::gemm(
                        batch,
                        fan_out,
                        fan_in,
                        T::one(),
                        g,
                        fan_out as isize,
                        1,
                        tw.data(),
                        fan_in as isize,
                        1,
                        T::zero(),
                        &mut dx,
                        fan_in as isize,
                        1,
                    );
                    accumulate(grads, *x, dx.into_iter());
                }
                if self.wants(*w) {
                    let mut dw = vec![T::zero(); fan_out * fan_in];
                    T::gemm(
                        fan_out,
                        batch,
                        fan_in,
                        T::one(),
                        g,
                        1,
                        fan_out as isize,
                        tx.data(),
                        fan_in as isize,
                        1,
                        T::zero(),
                        &mut dw,
                        fan_in as isize,
                        1,
                    );
                    accumulate(grads, *w, dw.into_iter());
                }
                if let Some(b) = b {
                    if self.wants(*b) {
                        let mut db = vec![T::zero(); fan_out];
                        for row in g.chunks(fan_out) {
                            for (d, &v) in db.iter_mut().zip(row) {
                                *d += v;
                            }
                        }
                        accumulate(grads, *b, db.into_iter());
                    }
                }
            }
            Op::Conv { x, w, b, stride } => {
                let (tx, tw) = (&self.nodes[*x].value, &self.nodes[*w].value);
                let geom = ConvGeom {
                    n: tx.dim(0),
                    c_in: tx.dim(1),
                    len: tx.dim(2),
                    c_out: tw.dim(0),
                    k: tw.dim(2),
                    stride: *stride,
                };
                let (dx, dw) = conv_backward(
                    &geom,
                    tx.data(),
                    tw.data(),
                    g,
                    self.wants(*x),
                    self.wants(*w),
                );
                if let Some(dx) = dx {
                    accumulate(grads, *x, dx.into_iter());
                }
                if let Some(dw) = dw {
                    accumulate(grads, *w, dw.into_iter());
                }
                if let Some(b) = b {
                    if self.wants(*b) {
                        let lo = geom.len_out();
                        let mut db = vec![T::zero(); geom.c_out];
                        for sample in g.chunks(geom.c_out * lo) {
                            for (c, ch) in sample.chunks(lo).enumerate() {
                                db[c] += ch.iter().copied().sum();
                            }
                        }
                        accumulate(grads, *b, db.into_iter());
                    }
                }
            }
            Op::SliceCols { x, start } => {
                let tx = &self.nodes[*x].value;
                let (rows, cols) = (tx.dim(0), tx.dim(1));
                let len = node.value.dim(1);
                let mut dx = vec![T::zero(); rows * cols];
                for r in 0..rows {
                    dx[r * cols + start..r * cols + start + len]
                        .copy_from_slice(&g[r * len..(r + 1) * len]);
                }
                accumulate(grads, *x, dx.into_iter());
            }
            Op::GatherRows { x, idx } => {
                let tx = &self.nodes[*x].value;
                let width = tx.numel() / tx.dim(0).max(1);
                let slot = grads[*x].get_or_insert_with(|| vec![T::zero(); tx.numel()]);
                for (r, &src) in idx.iter().enumerate() {
                    for (d, &v) in slot[src * width..(src + 1) * width]
                        .iter_mut()
                        .zip(&g[r * width..(r + 1) * width])
                    {
                        *d += v;
                    }
                }
            }
            Op::Reshape(x) => accumulate(grads, *x, g.iter().copied()),
            Op::CosineRows { a, b } => {
                let (va, vb) = (val(*a), val(*b));
                let dim = self.nodes[*a].value.dim(1);
                let mut da = vec![T::zero(); va.len()];
                let mut db = vec![T::zero(); vb.len()];
                for (r, &gr) in g.iter().enumerate() {
                    let ra = &va[r * dim..(r + 1) * dim];
                    let rb = &vb[r * dim..(r + 1) * dim];
                    let na = norm(ra);
                    let nb = norm(rb);
                    let c = node.value.data()[r];
                    for j in 0..dim {
                        da[r * dim + j] = gr * (rb[j] / (na * nb) - c * ra[j] / (na * na));
                        db[r * dim + j] = gr * (ra[j] / (na * nb) - c * rb[j] / (nb * nb));
                    }
                }
                if self.wants(*a) {
                    accumulate(grads, *a, da.into_iter());
                }
                if self.wants(*b) {
                    accumulate(grads, *b, db.into_iter());
                }
            }
            Op::SumCols(x) => {
                let cols = self.nodes[*x].value.dim(1);
                accumulate(
                    grads,
                    *x,
                    g.iter().flat_map(|&v| std::iter::repeat_n(v, cols)),
                );
            }
            Op::Mean(x) => {
                let n = self.nodes[*x].value.numel();
                let gv = g[0] / T::from_f64(n as f64);
                accumulate(grads, *x, std::iter::repeat_n(gv, n));
            }
            Op::ScaleCols { x, scale } => {
                let cols = scale.len();
                accumulate(
                    grads,
                    *x,
                    g.iter()
                        .enumerate()
                        .map(|(k, &v)| v * T::from_f64(scale[k % cols])),
                );
            }
        }
    }
}

fn accumulate<T: Real>(grads: &mut [Option<Vec<T>>], node: usize, it: impl Iterator<Item = T>) {
    match &mut grads[node] {
        Some(existing) => {
            for (d, v) in existing.iter_mut().zip(it) {
                *d += v;
            }
        }
        slot @ None => *slot = Some(it.collect()),
    }
}

fn norm<T: Real>(v: &[T]) -> T {
    v.iter().map(|&x| x * x).sum::<T>().sqrt()
}

pub(crate) fn sigmoid<T: Real>(v: T) -> T {
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

/// Cosine similarity of two nonzero vectors.
pub fn cosine_similarity<T: Real>(a: &[T], b: &[T]) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::shape(format!(
            "cosine: lengths {} and {} differ",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (norm(a), norm(b));
    let tiny = T::min_positive_value().sqrt();
    if !(na > tiny && nb > tiny) {
        return Err(Error::Numerical(
            "cosine similarity of a zero-norm vector".into(),
        ));
    }
    let dot: T = a.iter().zip(b).map(|(&x, &y)| x * y).sum();
    let c = dot / (na * nb);
    Ok(c.max(-T::one()).min(T::one()))
}

struct ConvGeom {
    n: usize,
    c_in: usize,
    len: usize,
    c_out: usize,
    k: usize,
    stride: usize,
}

impl ConvGeom {
    fn len_out(&self) -> usize {
        self.len / self.stride
    }

    /// Samples per GEMM call.
    fn chunk(&self) -> usize {
        (512 / self.len_out()).clamp(1, self.n.max(1))
    }

    /// im2col for samples `[s0, s0 + p)`: rows `(ci, m)`, columns `(sample, o)`.
    fn im2col<T: Real>(&self, x: &[T], s0: usize, p: usize, cols: &mut [T]) {
        let lo = self.len_out();
        let width = p * lo;
        let left = circular_pad_left(self.k);
        for ci in 0..self.c_in {
            for m in 0..self.k {
                let row = &mut cols[(ci * self.k + m) * width..(ci * self.k + m + 1) * width];
                for s in 0..p {
                    let src = &x[((s0 + s) * self.c_in + ci) * self.len..][..self.len];
                    let dst = &mut row[s * lo..(s + 1) * lo];
                    let mut pos = (m + self.len - left) % self.len;
                    for d in dst.iter_mut() {
                        *d = src[pos];
                        pos += self.stride;
                        if pos >= self.len {
                            pos -= self.len;
                        }
                    }
                }
            }
        }
    }

    fn col2im<T: Real>(&self, cols: &[T], s0: usize, p: usize, dx: &mut [T]) {
        let lo = self.len_out();
        let width = p * lo;
        let left = circular_pad_left(self.k);
        for ci in 0..self.c_in {
            for m in 0..self.k {
                let row = &cols[(ci * self.k + m) * width..(ci * self.k + m + 1) * width];
                for s in 0..p {
                    let dst = &mut dx[((s0 + s) * self.c_in + ci) * self.len..][..self.len];
                    let src = &row[s * lo..(s + 1) * lo];
                    let mut pos = (m + self.len - left) % self.len;
                    for &v in src {
                        dst[pos] += v;
                        pos += self.stride;
                        if pos >= self.len {
                            pos -= self.len;
                        }
                    }
                }
            }
        }
    }
}

fn conv_forward<T: Real>(geom: &ConvGeom, x: &[T], w: &[T], bias: Option<&[T]>) -> Vec<T> {
    let lo = geom.len_out();
    let ck = geom.c_in * geom.k;
    let mut out = vec![T::zero(); geom.n * geom.c_out * lo];
    let chunk = geom.chunk();
    let mut cols = vec![T::zero(); ck * chunk * lo];
    let mut tmp = vec![T::zero(); geom.c_out * chunk * lo];
    let mut s0 = 0;
    while s0 < geom.n {
        let p = chunk.min(geom.n - s0);
        let width = p * lo;
        geom.im2col(x, s0, p, &mut cols[..ck * width]);
        T::gemm(
            geom.c_out,
            ck,
            width,
            T::one(),
            w,
            ck as isize,
            1,
            &cols[..ck * width],
            width as isize,
            1,
            T::zero(),
            &mut tmp[..geom.c_out * width],
            width as isize,
            1,
        );
        for s in 0..p {
            for c in 0..geom.c_out {
                let dst = &mut out[((s0 + s) * geom.c_out + c) * lo..][..lo];
                let src = &tmp[c * width + s * lo..][..lo];
                let bv = bias.map_or(T::zero(), |b| b[c]);
                for (d, &v) in dst.iter_mut().zip(src) {
                    *d = v + bv;
                }
            }
        }
        s0 += p;
    }
    out
}

fn conv_backward<T: Real>(
    geom: &ConvGeom,
    x: &[T],
    w: &[T],
    g: &[T],
    want_x: bool,
    want_w: bool,
) -> (Option<Vec<T>>, Option<Vec<T>>) {
    let lo = geom.len_out();
    let ck = geom.c_in * geom.k;
    let chunk = geom.chunk();
    let mut dx = want_x.then(|| vec![T::zero(); x.len()]);
    let mut dw = want_w.then(|| vec![T::zero(); w.len()]);
    let mut cols = vec![T::zero(); ck * chunk * lo];
    let mut gt = vec![T::zero(); geom.c_out * chunk * lo];
    let mut s0 = 0;
    while s0 < geom.n {
        let p = chunk.min(geom.n - s0);
        let width = p * lo;
        for s in 0..p {
            for c in 0..geom.c_out {
                gt[c * width + s * lo..][..lo]
                    .copy_from_slice(&g[((s0 + s) * geom.c_out + c) * lo..][..lo]);
            }
        }
        let gt = &gt[..geom.c_out * width];
        if let Some(dw) = dw.as_mut() {
            geom.im2col(x, s0, p, &mut cols[..ck * width]);
            // dw += g @ cols^T
            T::gemm(
                geom.c_out,
                width,
                ck,
                T::one(),
                gt,
                width as isize,
                1,
                &cols[..ck * width],
                1,
                width as isize,
                T::one(),
                dw,
                ck as isize,
                1,
            );
        }
        if let Some(dx) = dx.as_mut() {
            // dcols = w^T @ g
            T::gemm(
                ck,
                geom.c_out,
                width,
                T::one(),
                w,
                1,
                ck as isize,
                gt,
                width as isize,
                1,
                T::zero(),
                &mut cols[..ck * width],
                width as isize,
                1,
            );
            geom.col2im(&cols[..ck * width], s0, p, dx);
        }
        s0 += p;
    }
    (dx, dw)
}
