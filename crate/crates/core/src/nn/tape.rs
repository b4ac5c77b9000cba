//! A small reverse-mode automatic differentiation tape over `f64` vectors.
//!
//! Values are vectors; matrices only appear as learnable parameters, which
//! the tape reads from a borrowed [`ParamSet`] instead of copying. Calling
//! [`Tape::backward`] with one or more seeded scalar outputs yields a
//! [`Grads`] with the same layout as the parameter set.

use crate::error::{Error, Result};

pub type ParamId = usize;

/// A named, row-major parameter matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(name: impl Into<String>, rows: usize, cols: usize) -> Self {
        Self {
            name: name.into(),
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamSet {
    tensors: Vec<Tensor>,
}

impl ParamSet {
    pub fn add(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> ParamId {
        self.tensors.push(Tensor::zeros(name, rows, cols));
        self.tensors.len() - 1
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id]
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.tensors.iter().position(|t| t.name == name)
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    pub fn zero_grads(&self) -> Grads {
        Grads(self.tensors.iter().map(|t| vec![0.0; t.data.len()]).collect())
    }

    /// Name of the first tensor holding a NaN or infinity.
    pub fn first_non_finite(&self) -> Option<&str> {
        self.tensors
            .iter()
            .find(|t| t.data.iter().any(|v| !v.is_finite()))
            .map(|t| t.name.as_str())
    }
}

/// Gradients laid out like the [`ParamSet`] they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads(pub Vec<Vec<f64>>);

impl Grads {
    pub fn add_assign(&mut self, other: &Grads) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for v in self.0.iter_mut().flatten() {
            *v *= factor;
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.0.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Rescales so the global L2 norm is at most `max_norm`.
    pub fn clip_norm(&mut self, max_norm: f64) {
        let norm = self.l2_norm();
        if norm > max_norm && norm > 0.0 {
            self.scale(max_norm / norm);
        }
    }

    pub fn check_finite(&self, params: &ParamSet) -> Result<()> {
        for (g, t) in self.0.iter().zip(params.tensors()) {
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    param: t.name.clone(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Input,
    /// Copy of a parameter tensor, used as a vector.
    Param(ParamId),
    /// `W x` for a parameter matrix `W`.
    MatVec(ParamId, Var),
    /// `x + b` for a parameter vector `b`.
    AddParam(Var, ParamId),
    Add(Var, Var),
    Mul(Var, Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    /// Contiguous slice starting at the given offset.
    Slice(Var, usize),
    /// `w · x` for a `1 x D` parameter `w`; yields a length-1 value.
    Dot(ParamId, Var),
    /// Gathers scalars into a vector; `None` entries hold [`MASKED_SCORE`].
    Stack(Vec<Option<Var>>),
    Mean(Vec<Var>),
    Sum(Vec<Var>),
    /// `log softmax(x)[k]`.
    LogSoftmaxPick(Var, usize),
}

/// Score assigned to items that may not be selected. After max-subtraction
/// its exponential underflows to exactly zero.
pub const MASKED_SCORE: f64 = -1e9;

struct Node {
    value: Vec<f64>,
    op: Op,
}

pub struct Tape<'p> {
    params: &'p ParamSet,
    nodes: Vec<Node>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Numerically stable softmax; entries at [`MASKED_SCORE`] come out as 0.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = out.iter().sum();
    for p in &mut out {
        *p /= total;
    }
    out
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamSet) -> Self {
        Self {
            params,
            nodes: Vec::with_capacity(256),
        }
    }

    pub fn params(&self) -> &'p ParamSet {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[0]
    }

    fn push(&mut self, value: Vec<f64>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn input(&mut self, value: Vec<f64>) -> Var {
        self.push(value, Op::Input)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        let value = self.params.get(id).data.clone();
        self.push(value, Op::Param(id))
    }

    pub fn matvec(&mut self, w: ParamId, x: Var) -> Var {
        let t = self.params.get(w);
        let xv = &self.nodes[x.0].value;
        debug_assert_eq!(t.cols, xv.len(), "matvec shape mismatch for {}", t.name);
        let value = (0..t.rows)
            .map(|r| t.row(r).iter().zip(xv).map(|(a, b)| a * b).sum())
            .collect();
        self.push(value, Op::MatVec(w, x))
    }

    pub fn add_param(&mut self, x: Var, b: ParamId) -> Var {
        let bias = &self.params.get(b).data;
        let value = self.nodes[x.0].value.iter().zip(bias).map(|(a, b)| a + b).collect();
        self.push(value, Op::AddParam(x, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = self.nodes[a.0]
            .value
            .iter()
            .zip(&self.nodes[b.0].value)
            .map(|(x, y)| x + y)
            .collect();
        self.push(value, Op::Add(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let value = self.nodes[a.0]
            .value
            .iter()
            .zip(&self.nodes[b.0].value)
            .map(|(x, y)| x * y)
            .collect();
        self.push(value, Op::Mul(a, b))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.nodes[a.0].value.iter().map(|&x| sigmoid(x)).collect();
        self.push(value, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.nodes[a.0].value.iter().map(|x| x.tanh()).collect();
        self.push(value, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.nodes[a.0].value.iter().map(|x| x.max(0.0)).collect();
        self.push(value, Op::Relu(a))
    }

    pub fn slice(&mut self, a: Var, offset: usize, len: usize) -> Var {
        let value = self.nodes[a.0].value[offset..offset + len].to_vec();
        self.push(value, Op::Slice(a, offset))
    }

    pub fn dot(&mut self, w: ParamId, x: Var) -> Var {
        let wv = &self.params.get(w).data;
        let s = wv.iter().zip(&self.nodes[x.0].value).map(|(a, b)| a * b).sum();
        self.push(vec![s], Op::Dot(w, x))
    }

    /// Gathers length-1 nodes into a score vector; `None` marks a masked slot.
    pub fn stack(&mut self, items: Vec<Option<Var>>) -> Var {
        let value = items
            .iter()
            .map(|v| v.map_or(MASKED_SCORE, |v| self.nodes[v.0].value[0]))
            .collect();
        self.push(value, Op::Stack(items))
    }

    pub fn mean(&mut self, items: Vec<Var>) -> Var {
        let dim = self.nodes[items[0].0].value.len();
        let mut value = vec![0.0; dim];
        for v in &items {
            for (acc, x) in value.iter_mut().zip(&self.nodes[v.0].value) {
                *acc += x;
            }
        }
        let n = items.len() as f64;
        value.iter_mut().for_each(|x| *x /= n);
        self.push(value, Op::Mean(items))
    }

    /// Sum of length-1 nodes; an empty sum is the constant 0.
    pub fn sum(&mut self, items: Vec<Var>) -> Var {
        let s = items.iter().map(|v| self.nodes[v.0].value[0]).sum();
        self.push(vec![s], Op::Sum(items))
    }

    pub fn log_softmax_pick(&mut self, scores: Var, pick: usize) -> Var {
        let s = &self.nodes[scores.0].value;
        let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + s.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
        let value = vec![s[pick] - lse];
        self.push(value, Op::LogSoftmaxPick(scores, pick))
    }

    /// Reverse pass. Each seed `(v, w)` contributes `w * ∂v/∂θ` where `v` is
    /// a length-1 node.
    pub fn backward(&self, seeds: &[(Var, f64)]) -> Grads {
        let mut grads = self.params.zero_grads();
        let mut adj: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        for &(v, w) in seeds {
            let slot = adj[v.0].get_or_insert_with(|| vec![0.0; self.nodes[v.0].value.len()]);
            slot[0] += w;
        }

        fn acc<'a>(adj: &'a mut [Option<Vec<f64>>], nodes: &[Node], v: Var) -> &'a mut Vec<f64> {
            adj[v.0].get_or_insert_with(|| vec![0.0; nodes[v.0].value.len()])
        }

        for i in (0..self.nodes.len()).rev() {
            let Some(g) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Input => {}
                Op::Param(id) => {
                    for (d, x) in grads.0[*id].iter_mut().zip(&g) {
                        *d += x;
                    }
                }
                Op::MatVec(w, x) => {
                    let t = self.params.get(*w);
                    let xv = &self.nodes[x.0].value;
                    let gw = &mut grads.0[*w];
                    for r in 0..t.rows {
                        let gr = g[r];
                        if gr != 0.0 {
                            for (d, xc) in gw[r * t.cols..(r + 1) * t.cols].iter_mut().zip(xv) {
                                *d += gr * xc;
                            }
                        }
                    }
                    let gx = acc(&mut adj, &self.nodes, *x);
                    for r in 0..t.rows {
                        let gr = g[r];
                        if gr != 0.0 {
                            for (d, wc) in gx.iter_mut().zip(t.row(r)) {
                                *d += gr * wc;
                            }
                        }
                    }
                }
                Op::AddParam(x, b) => {
                    for (d, v) in grads.0[*b].iter_mut().zip(&g) {
                        *d += v;
                    }
                    add_into(acc(&mut adj, &self.nodes, *x), &g);
                }
                Op::Add(a, b) => {
                    add_into(acc(&mut adj, &self.nodes, *a), &g);
                    add_into(acc(&mut adj, &self.nodes, *b), &g);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    let ga: Vec<f64> = g.iter().zip(bv).map(|(x, y)| x * y).collect();
                    let gb: Vec<f64> = g.iter().zip(av).map(|(x, y)| x * y).collect();
                    add_into(acc(&mut adj, &self.nodes, *a), &ga);
                    add_into(acc(&mut adj, &self.nodes, *b), &gb);
                }
                Op::Sigmoid(a) => {
                    let ga = acc(&mut adj, &self.nodes, *a);
                    for ((d, y), gi) in ga.iter_mut().zip(&node.value).zip(&g) {
                        *d += gi * y * (1.0 - y);
                    }
                }
                Op::Tanh(a) => {
                    let ga = acc(&mut adj, &self.nodes, *a);
                    for ((d, y), gi) in ga.iter_mut().zip(&node.value).zip(&g) {
                        *d += gi * (1.0 - y * y);
                    }
                }
                Op::Relu(a) => {
                    let ga = acc(&mut adj, &self.nodes, *a);
                    for ((d, y), gi) in ga.iter_mut().zip(&node.value).zip(&g) {
                        if *y > 0.0 {
                            *d += gi;
                        }
                    }
                }
                Op::Slice(a, offset) => {
                    let ga = acc(&mut adj, &self.nodes, *a);
                    add_into(&mut ga[*offset..*offset + g.len()], &g);
                }
                Op::Dot(w, x) => {
                    let s = g[0];
                    let xv = &self.nodes[x.0].value;
                    for (d, xc) in grads.0[*w].iter_mut().zip(xv) {
                        *d += s * xc;
                    }
                    let wv = &self.params.get(*w).data;
                    let gx = acc(&mut adj, &self.nodes, *x);
                    for (d, wc) in gx.iter_mut().zip(wv) {
                        *d += s * wc;
                    }
                }
                Op::Stack(items) => {
                    for (v, gi) in items.iter().zip(&g) {
                        if let Some(v) = v {
                            acc(&mut adj, &self.nodes, *v)[0] += gi;
                        }
                    }
                }
                Op::Mean(items) => {
                    let scale = 1.0 / items.len() as f64;
                    let gs: Vec<f64> = g.iter().map(|x| x * scale).collect();
                    for v in items {
                        add_into(acc(&mut adj, &self.nodes, *v), &gs);
                    }
                }
                Op::Sum(items) => {
                    for v in items {
                        acc(&mut adj, &self.nodes, *v)[0] += g[0];
                    }
                }
                Op::LogSoftmaxPick(scores, pick) => {
                    let probs = softmax(&self.nodes[scores.0].value);
                    let gs = acc(&mut adj, &self.nodes, *scores);
                    for (j, (d, p)) in gs.iter_mut().zip(&probs).enumerate() {
                        let indicator = if j == *pick { 1.0 } else { 0.0 };
                        *d += g[0] * (indicator - p);
                    }
                }
            }
        }
        grads
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}
