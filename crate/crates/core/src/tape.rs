//! Reverse-mode differentiation over a linear record of primitive calls.
//!
//! A [`Graph`] owns every intermediate value produced during a forward
//! pass. [`Graph::backward`] walks the record from the loss back to the
//! first node, calling each primitive's adjoint, and accumulates parameter
//! gradients into the [`ParamStore`] the parameters were read from.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicU32, Ordering};

use crate::error::{Error, Result};
use crate::ops::{self, Activation, Conv2dSpec, GrnParams};
use crate::param::{ParamId, ParamStore};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::wavelet;

static NEXT_GRAPH_ID: AtomicU32 = AtomicU32::new(1);

/// Handle to a value recorded on a particular [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var {
    idx: usize,
    graph: u32,
}

impl Var {
    pub fn index(self) -> usize {
        self.idx
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    Conv2d { x: usize, w: usize, b: Option<usize>, spec: Conv2dSpec },
    Gelu(usize),
    Grn { x: usize, gamma: usize, beta: usize, eps: f64 },
    Softmax(usize),
    Matmul(usize, usize),
    Transpose(usize),
    Reshape(usize),
    Add(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    Sum(usize),
    Slice { x: usize, start: usize },
    Concat(Vec<usize>),
    Dwt2(usize),
    Idwt2(usize),
    GlobalAvgPool(usize),
    Linear { x: usize, w: usize, b: usize },
    CrossEntropy { logits: usize, labels: Vec<usize> },
}

struct Node<T> {
    value: Tensor<T>,
    op: Op,
}

/// Subband handles returned by [`Graph::dwt2`].
#[derive(Clone, Copy, Debug)]
pub struct SubbandVars {
    pub ll: Var,
    pub lh: Var,
    pub hl: Var,
    pub hh: Var,
}

pub struct Graph<T = f32> {
    id: u32,
    recording: bool,
    activation: Activation,
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Graph<T> {
    /// A graph that records for a later [`backward`](Self::backward).
    pub fn new() -> Self {
        Self {
            id: NEXT_GRAPH_ID.fetch_add(1, Ordering::Relaxed),
            recording: true,
            activation: Activation::GELU,
            nodes: Vec::new(),
        }
    }

    /// A graph for forward-only evaluation; `backward` on it is an error.
    pub fn inference() -> Self {
        Self { recording: false, ..Self::new() }
    }

    /// Replaces the function behind [`gelu`](Self::gelu) nodes. Only the
    /// self-test harness uses this.
    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    pub fn is_recording(&self) -> bool {
        self.recording
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var { idx: self.nodes.len() - 1, graph: self.id }
    }

    fn idx(&self, v: Var) -> Result<usize> {
        if v.graph != self.id || v.idx >= self.nodes.len() {
            return Err(Error::usage("variable was not recorded on this graph"));
        }
        Ok(v.idx)
    }

    fn val(&self, i: usize) -> &Tensor<T> {
        &self.nodes[i].value
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        let i = self.idx(v).expect("variable belongs to this graph");
        &self.nodes[i].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.value(v).shape()
    }

    /// A constant input; receives a gradient but is not a parameter.
    pub fn leaf(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf)
    }

    pub fn param(&mut self, store: &ParamStore<T>, id: ParamId) -> Var {
        self.push(store.value(id).clone(), Op::Param(id))
    }

    pub fn conv2d(&mut self, x: Var, w: Var, b: Option<Var>, spec: Conv2dSpec) -> Result<Var> {
        let (xi, wi) = (self.idx(x)?, self.idx(w)?);
        let bi = b.map(|b| self.idx(b)).transpose()?;
        let out = ops::conv2d(self.val(xi), self.val(wi), bi.map(|b| self.val(b)), spec)?;
        Ok(self.push(out, Op::Conv2d { x: xi, w: wi, b: bi, spec }))
    }

    pub fn gelu(&mut self, x: Var) -> Result<Var> {
        let xi = self.idx(x)?;
        let out = self.activation.forward(self.val(xi));
        Ok(self.push(out, Op::Gelu(xi)))
    }

    pub fn grn(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let (xi, gi, bi) = (self.idx(x)?, self.idx(gamma)?, self.idx(beta)?);
        let p = GrnParams { gamma: self.val(gi).clone(), beta: self.val(bi).clone(), epsilon: T::from_f64(eps) };
        let out = ops::grn(self.val(xi), &p)?;
        Ok(self.push(out, Op::Grn { x: xi, gamma: gi, beta: bi, eps }))
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let xi = self.idx(x)?;
        let out = ops::softmax_last(self.val(xi));
        Ok(self.push(out, Op::Softmax(xi)))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ai, bi) = (self.idx(a)?, self.idx(b)?);
        let out = ops::matmul(self.val(ai), self.val(bi))?;
        Ok(self.push(out, Op::Matmul(ai, bi)))
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let xi = self.idx(x)?;
        let out = ops::transpose_last2(self.val(xi))?;
        Ok(self.push(out, Op::Transpose(xi)))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let xi = self.idx(x)?;
        let out = self.val(xi).clone().reshape(shape)?;
        Ok(self.push(out, Op::Reshape(xi)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ai, bi) = (self.idx(a)?, self.idx(b)?);
        let out = self.val(ai).add(self.val(bi))?;
        Ok(self.push(out, Op::Add(ai, bi)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ai, bi) = (self.idx(a)?, self.idx(b)?);
        let out = self.val(ai).zip_map(self.val(bi), |x, y| x * y)?;
        Ok(self.push(out, Op::Mul(ai, bi)))
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Result<Var> {
        let xi = self.idx(x)?;
        let out = self.val(xi).scale(T::from_f64(s));
        Ok(self.push(out, Op::Scale(xi, s)))
    }

    /// Sum of all elements, as a `[1]` tensor.
    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let xi = self.idx(x)?;
        let out = Tensor::scalar(self.val(xi).sum());
        Ok(self.push(out, Op::Sum(xi)))
    }

    pub fn slice_channels(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let xi = self.idx(x)?;
        let out = ops::slice_channels(self.val(xi), start, len)?;
        Ok(self.push(out, Op::Slice { x: xi, start }))
    }

    pub fn concat_channels(&mut self, parts: &[Var]) -> Result<Var> {
        let idxs = parts.iter().map(|&p| self.idx(p)).collect::<Result<Vec<_>>>()?;
        let refs: Vec<&Tensor<T>> = idxs.iter().map(|&i| self.val(i)).collect();
        let out = ops::concat_channels(&refs)?;
        Ok(self.push(out, Op::Concat(idxs)))
    }

    /// Haar analysis; the four subbands are channel slices of one packed node.
    pub fn dwt2(&mut self, x: Var) -> Result<SubbandVars> {
        let xi = self.idx(x)?;
        let c = self.val(xi).dims4()?[1];
        let packed = wavelet::dwt2_packed(self.val(xi))?;
        let p = self.push(packed, Op::Dwt2(xi));
        Ok(SubbandVars {
            ll: self.slice_channels(p, 0, c)?,
            lh: self.slice_channels(p, c, c)?,
            hl: self.slice_channels(p, 2 * c, c)?,
            hh: self.slice_channels(p, 3 * c, c)?,
        })
    }

    pub fn idwt2(&mut self, bands: SubbandVars) -> Result<Var> {
        let shapes = [bands.ll, bands.lh, bands.hl, bands.hh].map(|b| self.shape(b).to_vec());
        if shapes.iter().any(|s| *s != shapes[0]) {
            return Err(Error::config(format!("subband shapes differ: {shapes:?}")));
        }
        let packed = self.concat_channels(&[bands.ll, bands.lh, bands.hl, bands.hh])?;
        let pi = self.idx(packed)?;
        let out = wavelet::idwt2_packed(self.val(pi))?;
        Ok(self.push(out, Op::Idwt2(pi)))
    }

    pub fn global_avg_pool(&mut self, x: Var) -> Result<Var> {
        let xi = self.idx(x)?;
        let out = ops::global_avg_pool(self.val(xi))?;
        Ok(self.push(out, Op::GlobalAvgPool(xi)))
    }

    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xi, wi, bi) = (self.idx(x)?, self.idx(w)?, self.idx(b)?);
        let out = ops::linear(self.val(xi), self.val(wi), self.val(bi))?;
        Ok(self.push(out, Op::Linear { x: xi, w: wi, b: bi }))
    }

    /// Mean cross-entropy of `logits: [N, K]` against integer labels.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let li = self.idx(logits)?;
        let loss = ops::cross_entropy(self.val(li), labels)?;
        Ok(self.push(Tensor::scalar(loss), Op::CrossEntropy { logits: li, labels: labels.to_vec() }))
    }

    /// Runs the chain rule from `loss` back to the first recorded node.
    ///
    /// Parameter gradients are added to `store` (they accumulate across
    /// calls until [`ParamStore::zero_grad`]); gradients of every node,
    /// including leaves, are returned.
    pub fn backward(&self, loss: Var, store: &mut ParamStore<T>) -> Result<Gradients<T>> {
        if !self.recording {
            return Err(Error::usage("backward on a graph created for inference"));
        }
        let li = self.idx(loss)?;
        if self.val(li).numel() != 1 {
            return Err(Error::usage(format!("backward needs a scalar loss, got shape {:?}", self.val(li).shape())));
        }
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; self.nodes.len()];
        grads[li] = Some(Tensor::full(self.val(li).shape(), T::ONE));
        let mut visited = Vec::new();

        for i in (0..=li).rev() {
            let Some(g) = grads[i].take() else { continue };
            visited.push(i);
            self.propagate(i, &g, &mut grads, store)?;
            grads[i] = Some(g);
        }
        Ok(Gradients { graph: self.id, grads, visited })
    }

    fn propagate(
        &self,
        i: usize,
        g: &Tensor<T>,
        grads: &mut [Option<Tensor<T>>],
        store: &mut ParamStore<T>,
    ) -> Result<()> {
        let mut acc = |j: usize, t: Tensor<T>| -> Result<()> {
            match &mut grads[j] {
                Some(existing) => existing.accumulate(&t),
                slot => {
                    *slot = Some(t);
                    Ok(())
                }
            }
        };
        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::Param(id) => store.get_mut(*id).grad.accumulate(g)?,
            Op::Conv2d { x, w, b, spec } => {
                let r = ops::conv2d_backward(self.val(*x), self.val(*w), b.is_some(), *spec, g)?;
                acc(*x, r.input)?;
                acc(*w, r.weight)?;
                if let (Some(b), Some(db)) = (b, r.bias) {
                    acc(*b, db)?;
                }
            }
            Op::Gelu(x) => acc(*x, self.activation.backward(self.val(*x), g)?)?,
            Op::Grn { x, gamma, beta, eps } => {
                let p = GrnParams {
                    gamma: self.val(*gamma).clone(),
                    beta: self.val(*beta).clone(),
                    epsilon: T::from_f64(*eps),
                };
                let r = ops::grn_backward(self.val(*x), &p, g)?;
                acc(*x, r.input)?;
                acc(*gamma, r.gamma)?;
                acc(*beta, r.beta)?;
            }
            Op::Softmax(x) => acc(*x, ops::softmax_last_backward(self.val(i), g))?,
            Op::Matmul(a, b) => {
                let (da, db) = ops::matmul_backward(self.val(*a), self.val(*b), g)?;
                acc(*a, da)?;
                acc(*b, db)?;
            }
            Op::Transpose(x) => acc(*x, ops::transpose_last2(g)?)?,
            Op::Reshape(x) => acc(*x, g.clone().reshape(self.val(*x).shape())?)?,
            Op::Add(a, b) => {
                acc(*a, g.clone())?;
                acc(*b, g.clone())?;
            }
            Op::Mul(a, b) => {
                acc(*a, g.zip_map(self.val(*b), |gv, bv| gv * bv)?)?;
                acc(*b, g.zip_map(self.val(*a), |gv, av| gv * av)?)?;
            }
            Op::Scale(x, s) => acc(*x, g.scale(T::from_f64(*s)))?,
            Op::Sum(x) => acc(*x, Tensor::full(self.val(*x).shape(), g.data()[0]))?,
            Op::Slice { x, start } => acc(*x, ops::slice_channels_backward(self.val(*x).shape(), *start, g)?)?,
            Op::Concat(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let c = self.val(p).shape()[1];
                    acc(p, ops::slice_channels(g, offset, c)?)?;
                    offset += c;
                }
            }
            Op::Dwt2(x) => acc(*x, wavelet::idwt2_packed(g)?)?,
            Op::Idwt2(x) => acc(*x, wavelet::dwt2_packed(g)?)?,
            Op::GlobalAvgPool(x) => acc(*x, ops::global_avg_pool_backward(self.val(*x).shape(), g)?)?,
            Op::Linear { x, w, b } => {
                let r = ops::linear_backward(self.val(*x), self.val(*w), self.val(*b), g)?;
                acc(*x, r.input)?;
                acc(*w, r.weight)?;
                acc(*b, r.bias)?;
            }
            Op::CrossEntropy { logits, labels } => {
                acc(*logits, ops::cross_entropy_backward(self.val(*logits), labels, g.data()[0])?)?
            }
        }
        Ok(())
    }
}

/// Per-node gradients from one [`Graph::backward`] call.
pub struct Gradients<T> {
    graph: u32,
    grads: Vec<Option<Tensor<T>>>,
    visited: Vec<usize>,
}

impl<T: Scalar> Gradients<T> {
    /// `None` when `v` does not influence the loss.
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        if v.graph != self.graph {
            return None;
        }
        self.grads.get(v.idx).and_then(Option::as_ref)
    }

    /// Node indices in the order their adjoints ran.
    pub fn visit_order(&self) -> &[usize] {
        &self.visited
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::rng::TestRng;

    #[test]
    fn quadratic_gradient_is_two_w() {
        let mut store = ParamStore::<f64>::new();
        let mut rng = TestRng::new(1);
        let w0 = rng.tensor(&[3, 4]);
        let id = store.register("w", w0.clone()).unwrap();
        let mut g = Graph::new();
        let w = g.param(&store, id);
        let sq = g.mul(w, w).unwrap();
        let loss = g.sum(sq).unwrap();
        g.backward(loss, &mut store).unwrap();
        assert_eq!(store.get(id).grad, w0.scale(2.0));
    }

    #[test]
    fn gradients_accumulate_until_zeroed() {
        let mut store = ParamStore::<f64>::new();
        let id = store.register("w", Tensor::full(&[2], 3.0)).unwrap();
        for _ in 0..2 {
            let mut g = Graph::new();
            let w = g.param(&store, id);
            let loss = g.sum(w).unwrap();
            g.backward(loss, &mut store).unwrap();
        }
        assert_eq!(store.get(id).grad.data(), &[2.0, 2.0]);
        store.zero_grad();
        assert_eq!(store.get(id).grad.data(), &[0.0, 0.0]);
    }

    #[test]
    fn unreachable_parameter_keeps_zero_grad() {
        let mut store = ParamStore::<f64>::new();
        let a = store.register("a", Tensor::full(&[2], 1.0)).unwrap();
        let b = store.register("b", Tensor::full(&[2], 1.0)).unwrap();
        let mut g = Graph::new();
        let va = g.param(&store, a);
        let _vb = g.param(&store, b);
        let loss = g.sum(va).unwrap();
        let grads = g.backward(loss, &mut store).unwrap();
        assert_eq!(store.get(b).grad.data(), &[0.0, 0.0]);
        assert!(grads.get(_vb).is_none());
    }

    #[test]
    fn visits_in_reverse_execution_order() {
        let mut store = ParamStore::<f64>::new();
        let mut g = Graph::new();
        let x = g.leaf(Tensor::full(&[1, 2, 2, 2], 0.5));
        let y = g.gelu(x).unwrap();
        let z = g.scale(y, 3.0).unwrap();
        let w = g.add(z, x).unwrap();
        let loss = g.sum(w).unwrap();
        let grads = g.backward(loss, &mut store).unwrap();
        assert_eq!(grads.visit_order(), &[4, 3, 2, 1, 0]);
    }

    #[test]
    fn usage_errors() {
        let mut store = ParamStore::<f64>::new();
        let mut other = Graph::<f64>::new();
        let foreign = other.leaf(Tensor::scalar(1.0));
        let g = Graph::<f64>::new();
        assert!(matches!(g.backward(foreign, &mut store), Err(Error::Usage(_))));

        let mut g = Graph::<f64>::new();
        let v = g.leaf(Tensor::zeros(&[2]));
        assert!(matches!(g.backward(v, &mut store), Err(Error::Usage(_))));

        let mut g = Graph::<f64>::inference();
        let v = g.leaf(Tensor::scalar(1.0));
        assert!(matches!(g.backward(v, &mut store), Err(Error::Usage(_))));
    }
}
