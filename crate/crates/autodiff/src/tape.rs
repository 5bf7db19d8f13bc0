//! The recording tape and reverse-mode differentiation.
//!
//! Every operation appends a node holding its value and a description of
//! how it was computed. [`grad`] walks the nodes in reverse and expresses
//! each vector-Jacobian product with the same taped operations, so the
//! gradients it returns are themselves differentiable. Differentiating a
//! function of a gradient (a gradient penalty, say) is just another call
//! to [`grad`].
//!
//! The op set is closed under differentiation: the VJP of every op is
//! written in terms of ops from the same set.

use std::cell::RefCell;
use std::fmt;
use std::rc::Rc;

use crate::error::{AdError, AdResult};
use crate::tensor::{avg_pool_adjoint, avg_pool_forward, conv_forward, conv_transpose_input, conv_weight_grad, Tensor};

/// A linear map that equals its own adjoint under the real inner product.
/// Used as an opaque differentiable node; its VJP is the map itself.
pub trait SelfAdjointOp {
    fn apply(&self, x: &Tensor) -> AdResult<Tensor>;
}

#[derive(Clone)]
enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Neg(usize),
    Scale(usize, f64),
    MulConst(usize, Rc<Tensor>),
    AddConst(usize),
    /// Tensor times a one-element variable.
    ScaleVar(usize, usize),
    Sum(usize),
    Broadcast(usize),
    /// `1/x`, with `1/0` defined as 0.
    Recip(usize),
    Sqrt(usize),
    Conv(usize, usize),
    ConvT(usize, usize),
    ConvW(usize, usize),
    ChannelBias(usize, usize),
    ChannelSum(usize),
    ChannelBroadcast(usize),
    AvgPool(usize, usize),
    AvgPoolAdj(usize, usize),
    MatVec(usize, usize),
    MatVecT(usize, usize),
    Outer(usize, usize),
    Concat(Vec<usize>),
    Slice(usize, usize),
    Embed(usize, usize),
    Reshape(usize),
    SelfAdjoint(usize, Rc<dyn SelfAdjointOp>),
}

impl Op {
    fn parents(&self) -> Vec<usize> {
        use Op::*;
        match self {
            Leaf => vec![],
            Neg(a)
            | Scale(a, _)
            | MulConst(a, _)
            | AddConst(a)
            | Sum(a)
            | Broadcast(a)
            | Recip(a)
            | Sqrt(a)
            | ChannelSum(a)
            | ChannelBroadcast(a)
            | AvgPool(a, _)
            | AvgPoolAdj(a, _)
            | Slice(a, _)
            | Embed(a, _)
            | Reshape(a)
            | SelfAdjoint(a, _) => vec![*a],
            Add(a, b)
            | Sub(a, b)
            | Mul(a, b)
            | ScaleVar(a, b)
            | Conv(a, b)
            | ConvT(a, b)
            | ConvW(a, b)
            | ChannelBias(a, b)
            | MatVec(a, b)
            | MatVecT(a, b)
            | Outer(a, b) => vec![*a, *b],
            Concat(v) => v.clone(),
        }
    }
}

struct Node {
    value: Rc<Tensor>,
    op: Op,
    requires_grad: bool,
}

struct TapeInner {
    nodes: Vec<Node>,
    recording: bool,
}

/// Append-only record of a computation. Cloning shares the same tape.
#[derive(Clone)]
pub struct Tape {
    inner: Rc<RefCell<TapeInner>>,
}

impl Default for Tape {
    fn default() -> Self {
        Tape::new()
    }
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tape({} nodes)", self.len())
    }
}

const UNRECORDED: usize = usize::MAX;

impl Tape {
    pub fn new() -> Tape {
        Tape { inner: Rc::new(RefCell::new(TapeInner { nodes: Vec::new(), recording: true })) }
    }

    /// A tape that records nothing: values flow, memory is released as
    /// variables drop, and [`grad`] refuses to run. Used for inference.
    pub fn no_grad() -> Tape {
        Tape { inner: Rc::new(RefCell::new(TapeInner { nodes: Vec::new(), recording: false })) }
    }

    pub fn is_recording(&self) -> bool {
        self.inner.borrow().recording
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn same(&self, other: &Tape) -> bool {
        Rc::ptr_eq(&self.inner, &other.inner)
    }

    fn push(&self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        let value = Rc::new(value);
        let mut inner = self.inner.borrow_mut();
        if !inner.recording {
            return Var { tape: self.clone(), id: UNRECORDED, value, requires_grad: false };
        }
        let id = inner.nodes.len();
        inner.nodes.push(Node { value: value.clone(), op, requires_grad });
        Var { tape: self.clone(), id, value, requires_grad }
    }

    /// A constant input; gradients never flow into it.
    pub fn constant(&self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// A trainable leaf.
    pub fn param(&self, t: Tensor) -> Var {
        let rg = self.is_recording();
        self.push(t, Op::Leaf, rg)
    }

    pub fn scalar(&self, v: f64) -> Var {
        self.constant(Tensor::scalar(v))
    }

    fn var(&self, id: usize) -> Var {
        let inner = self.inner.borrow();
        let n = &inner.nodes[id];
        Var { tape: self.clone(), id, value: n.value.clone(), requires_grad: n.requires_grad }
    }
}

/// A value on a tape.
#[derive(Clone)]
pub struct Var {
    tape: Tape,
    id: usize,
    value: Rc<Tensor>,
    requires_grad: bool,
}

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var(#{}, dims {:?})", self.id, self.value.dims())
    }
}

fn shape_err(what: &str, a: &Var, b: &Var) -> AdError {
    AdError::Shape(format!("{what}: {:?} vs {:?}", a.dims(), b.dims()))
}

impl Var {
    pub fn value(&self) -> &Tensor {
        &self.value
    }

    pub fn dims(&self) -> &[usize] {
        self.value.dims()
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn item(&self) -> f64 {
        self.value.item()
    }

    pub fn requires_grad(&self) -> bool {
        self.requires_grad
    }

    pub fn tape(&self) -> &Tape {
        &self.tape
    }

    fn unary(&self, value: Tensor, op: Op) -> Var {
        self.tape.push(value, op, self.requires_grad)
    }

    fn binary(&self, other: &Var, value: Tensor, op: Op) -> AdResult<Var> {
        if !self.tape.same(&other.tape) {
            return Err(AdError::ForeignTape);
        }
        Ok(self.tape.push(value, op, self.requires_grad || other.requires_grad))
    }

    fn same_dims(&self, other: &Var, what: &str) -> AdResult<()> {
        if self.dims() != other.dims() {
            return Err(shape_err(what, self, other));
        }
        Ok(())
    }

    pub fn add(&self, other: &Var) -> AdResult<Var> {
        self.same_dims(other, "add")?;
        let v = self.value.zip(&other.value, |a, b| a + b)?;
        self.binary(other, v, Op::Add(self.id, other.id))
    }

    pub fn sub(&self, other: &Var) -> AdResult<Var> {
        self.same_dims(other, "sub")?;
        let v = self.value.zip(&other.value, |a, b| a - b)?;
        self.binary(other, v, Op::Sub(self.id, other.id))
    }

    /// Elementwise product.
    pub fn mul(&self, other: &Var) -> AdResult<Var> {
        self.same_dims(other, "mul")?;
        let v = self.value.zip(&other.value, |a, b| a * b)?;
        self.binary(other, v, Op::Mul(self.id, other.id))
    }

    pub fn neg(&self) -> Var {
        self.unary(self.value.map(|a| -a), Op::Neg(self.id))
    }

    pub fn scale(&self, c: f64) -> Var {
        self.unary(self.value.map(|a| a * c), Op::Scale(self.id, c))
    }

    /// Elementwise product with a constant tensor.
    pub fn mul_const(&self, m: Rc<Tensor>) -> AdResult<Var> {
        let v = self.value.zip(&m, |a, b| a * b)?;
        Ok(self.unary(v, Op::MulConst(self.id, m)))
    }

    pub fn add_const(&self, c: &Tensor) -> AdResult<Var> {
        let v = self.value.zip(c, |a, b| a + b)?;
        Ok(self.unary(v, Op::AddConst(self.id)))
    }

    /// `s * self` for a one-element `s`.
    pub fn scale_by(&self, s: &Var) -> AdResult<Var> {
        if s.len() != 1 {
            return Err(AdError::Shape(format!("scale_by needs a one-element scale, got {:?}", s.dims())));
        }
        let c = s.item();
        let v = self.value.map(|a| a * c);
        s.binary(self, v, Op::ScaleVar(self.id, s.id))
    }

    /// Sum of all entries, as a `[1]` tensor.
    pub fn sum(&self) -> Var {
        self.unary(Tensor::scalar(self.value.sum()), Op::Sum(self.id))
    }

    pub fn mean(&self) -> Var {
        let n = self.len() as f64;
        self.sum().scale(1.0 / n)
    }

    /// Repeat a one-element value over `dims`.
    pub fn broadcast(&self, dims: &[usize]) -> AdResult<Var> {
        if self.len() != 1 {
            return Err(AdError::Shape(format!("broadcast source must have one element, got {:?}", self.dims())));
        }
        Ok(self.unary(Tensor::filled(dims, self.item()), Op::Broadcast(self.id)))
    }

    /// Elementwise reciprocal; zero entries map to zero.
    pub fn recip(&self) -> Var {
        self.unary(self.value.map(|a| if a == 0.0 { 0.0 } else { 1.0 / a }), Op::Recip(self.id))
    }

    /// Elementwise square root; the derivative at 0 is taken as 0.
    pub fn sqrt(&self) -> Var {
        self.unary(self.value.map(f64::sqrt), Op::Sqrt(self.id))
    }

    pub fn square(&self) -> Var {
        self.mul(self).expect("same dims")
    }

    pub fn sum_squares(&self) -> Var {
        self.square().sum()
    }

    /// Same-padded, stride-1, bias-free cross-correlation with kernel `w`.
    pub fn conv(&self, w: &Var) -> AdResult<Var> {
        let v = conv_forward(&self.value, &w.value)?;
        self.binary(w, v, Op::Conv(self.id, w.id))
    }

    /// Adjoint of `conv` in its input, applied to `self`.
    pub fn conv_transpose(&self, w: &Var) -> AdResult<Var> {
        let v = conv_transpose_input(&self.value, &w.value)?;
        self.binary(w, v, Op::ConvT(self.id, w.id))
    }

    /// Kernel-shaped correlation of `self` (input) with `g` (output-side gradient).
    pub fn conv_weight_grad(&self, g: &Var, kdims: &[usize]) -> AdResult<Var> {
        let v = conv_weight_grad(&self.value, &g.value, kdims)?;
        self.binary(g, v, Op::ConvW(self.id, g.id))
    }

    /// Add `b[c]` to every entry of channel `c`.
    pub fn add_channel_bias(&self, b: &Var) -> AdResult<Var> {
        let c = self.dims()[0];
        if b.dims() != [c] {
            return Err(shape_err("channel bias", self, b));
        }
        let per = self.len() / c;
        let mut v = (*self.value).clone();
        for (i, x) in v.data_mut().iter_mut().enumerate() {
            *x += b.value.data()[i / per];
        }
        self.binary(b, v, Op::ChannelBias(self.id, b.id))
    }

    /// Per-channel sums, `[C, ...] -> [C]`.
    pub fn channel_sum(&self) -> Var {
        let c = self.dims()[0];
        let per = self.len() / c;
        let v: Vec<f64> = self.value.data().chunks(per).map(|ch| ch.iter().sum()).collect();
        self.unary(Tensor::new(&[c], v).expect("channel count"), Op::ChannelSum(self.id))
    }

    /// Per-channel means, `[C, ...] -> [C]`.
    pub fn channel_mean(&self) -> Var {
        let per = self.len() / self.dims()[0];
        self.channel_sum().scale(1.0 / per as f64)
    }

    /// `[C] -> dims` with `dims[0] == C`, repeating each channel value.
    pub fn channel_broadcast(&self, dims: &[usize]) -> AdResult<Var> {
        if self.dims().len() != 1 || dims.first() != Some(&self.dims()[0]) {
            return Err(AdError::Shape(format!("channel broadcast {:?} -> {dims:?}", self.dims())));
        }
        let mut t = Tensor::zeros(dims);
        let per = t.len() / dims[0];
        for (i, x) in t.data_mut().iter_mut().enumerate() {
            *x = self.value.data()[i / per];
        }
        Ok(self.unary(t, Op::ChannelBroadcast(self.id)))
    }

    pub fn avg_pool(&self, f: usize) -> AdResult<Var> {
        let v = avg_pool_forward(&self.value, f)?;
        Ok(self.unary(v, Op::AvgPool(self.id, f)))
    }

    /// Adjoint of `avg_pool(f)` back onto an input of dims `in_dims`.
    pub fn avg_pool_adjoint(&self, f: usize, in_dims: &[usize]) -> AdResult<Var> {
        let v = avg_pool_adjoint(&self.value, f, in_dims)?;
        Ok(self.unary(v, Op::AvgPoolAdj(self.id, f)))
    }

    /// `W x` for `W: [m, n]`, `x: [n]`.
    pub fn matvec(&self, x: &Var) -> AdResult<Var> {
        let (m, n) = mat_dims(self)?;
        if x.dims() != [n] {
            return Err(shape_err("matvec", self, x));
        }
        let w = self.value.data();
        let xv = x.value.data();
        let v: Vec<f64> = (0..m).map(|i| w[i * n..(i + 1) * n].iter().zip(xv).map(|(a, b)| a * b).sum()).collect();
        self.binary(x, Tensor::new(&[m], v)?, Op::MatVec(self.id, x.id))
    }

    /// `Wᵀ g` for `W: [m, n]`, `g: [m]`.
    pub fn matvec_t(&self, g: &Var) -> AdResult<Var> {
        let (m, n) = mat_dims(self)?;
        if g.dims() != [m] {
            return Err(shape_err("matvec_t", self, g));
        }
        let w = self.value.data();
        let mut v = vec![0.0; n];
        for i in 0..m {
            let gi = g.value.data()[i];
            for (o, wij) in v.iter_mut().zip(&w[i * n..(i + 1) * n]) {
                *o += wij * gi;
            }
        }
        self.binary(g, Tensor::new(&[n], v)?, Op::MatVecT(self.id, g.id))
    }

    /// `a bᵀ` as an `[m, n]` matrix.
    pub fn outer(&self, b: &Var) -> AdResult<Var> {
        if self.dims().len() != 1 || b.dims().len() != 1 {
            return Err(shape_err("outer", self, b));
        }
        let (m, n) = (self.len(), b.len());
        let mut v = Vec::with_capacity(m * n);
        for &a in self.value.data() {
            v.extend(b.value.data().iter().map(|&x| a * x));
        }
        self.binary(b, Tensor::new(&[m, n], v)?, Op::Outer(self.id, b.id))
    }

    /// Flattened entries `offset..offset+len` as a `[len]` vector.
    pub fn slice(&self, offset: usize, len: usize) -> AdResult<Var> {
        if offset + len > self.len() {
            return Err(AdError::Shape(format!("slice {offset}+{len} of {} entries", self.len())));
        }
        let t = Tensor::new(&[len], self.value.data()[offset..offset + len].to_vec())?;
        Ok(self.unary(t, Op::Slice(self.id, offset)))
    }

    /// Place the flattened entries at `offset` inside a zero `[total]` vector.
    pub fn embed(&self, offset: usize, total: usize) -> AdResult<Var> {
        if offset + self.len() > total {
            return Err(AdError::Shape(format!("embed {}+{} into {total}", offset, self.len())));
        }
        let mut t = Tensor::zeros(&[total]);
        t.data_mut()[offset..offset + self.len()].copy_from_slice(self.value.data());
        Ok(self.unary(t, Op::Embed(self.id, offset)))
    }

    pub fn reshape(&self, dims: &[usize]) -> AdResult<Var> {
        let t = self.value.reshaped(dims)?;
        Ok(self.unary(t, Op::Reshape(self.id)))
    }

    pub fn apply_self_adjoint(&self, op: Rc<dyn SelfAdjointOp>) -> AdResult<Var> {
        let v = op.apply(&self.value)?;
        if v.dims() != self.dims() {
            return Err(AdError::Shape(format!("self-adjoint op changed dims {:?} -> {:?}", self.dims(), v.dims())));
        }
        Ok(self.unary(v, Op::SelfAdjoint(self.id, op)))
    }
}

fn mat_dims(w: &Var) -> AdResult<(usize, usize)> {
    match w.dims() {
        [m, n] => Ok((*m, *n)),
        d => Err(AdError::Shape(format!("expected a matrix, got {d:?}"))),
    }
}

/// Flatten and join vectors end to end.
pub fn concat(parts: &[Var]) -> AdResult<Var> {
    let first = parts.first().ok_or_else(|| AdError::Shape("concat of nothing".into()))?;
    let mut data = Vec::new();
    let mut rg = false;
    for p in parts {
        if !p.tape.same(&first.tape) {
            return Err(AdError::ForeignTape);
        }
        data.extend_from_slice(p.value.data());
        rg |= p.requires_grad;
    }
    let n = data.len();
    Ok(first.tape.push(Tensor::new(&[n], data)?, Op::Concat(parts.iter().map(|p| p.id).collect()), rg))
}

/// Vector-Jacobian products of one node: `(parent id, contribution)` pairs.
fn vjp(tape: &Tape, id: usize, op: &Op, g: &Var) -> AdResult<Vec<(usize, Var)>> {
    use Op::*;
    let v = |i: usize| tape.var(i);
    let out = v(id);
    Ok(match op {
        Leaf => vec![],
        Add(a, b) => vec![(*a, g.clone()), (*b, g.clone())],
        Sub(a, b) => vec![(*a, g.clone()), (*b, g.neg())],
        Mul(a, b) => vec![(*a, g.mul(&v(*b))?), (*b, g.mul(&v(*a))?)],
        Neg(a) => vec![(*a, g.neg())],
        Scale(a, c) => vec![(*a, g.scale(*c))],
        MulConst(a, m) => vec![(*a, g.mul_const(m.clone())?)],
        AddConst(a) => vec![(*a, g.clone())],
        ScaleVar(a, s) => vec![(*a, g.scale_by(&v(*s))?), (*s, g.mul(&v(*a))?.sum())],
        Sum(a) => vec![(*a, g.broadcast(v(*a).dims())?)],
        Broadcast(s) => vec![(*s, g.sum().reshape(v(*s).dims())?)],
        Recip(a) => vec![(*a, g.mul(&out.square())?.neg())],
        Sqrt(a) => vec![(*a, g.mul(&out.recip())?.scale(0.5))],
        Conv(x, w) => {
            let (xv, wv) = (v(*x), v(*w));
            vec![(*x, g.conv_transpose(&wv)?), (*w, xv.conv_weight_grad(g, wv.dims())?)]
        }
        ConvT(g0, w) => {
            let (gv, wv) = (v(*g0), v(*w));
            vec![(*g0, g.conv(&wv)?), (*w, g.conv_weight_grad(&gv, wv.dims())?)]
        }
        ConvW(x, g0) => {
            let (xv, gv) = (v(*x), v(*g0));
            vec![(*x, gv.conv_transpose(g)?), (*g0, xv.conv(g)?)]
        }
        ChannelBias(x, b) => vec![(*x, g.clone()), (*b, g.channel_sum())],
        ChannelSum(x) => vec![(*x, g.channel_broadcast(v(*x).dims())?)],
        ChannelBroadcast(b) => vec![(*b, g.channel_sum())],
        AvgPool(x, f) => vec![(*x, g.avg_pool_adjoint(*f, v(*x).dims())?)],
        AvgPoolAdj(g0, f) => vec![(*g0, g.avg_pool(*f)?)],
        MatVec(w, x) => vec![(*w, g.outer(&v(*x))?), (*x, v(*w).matvec_t(g)?)],
        MatVecT(w, g0) => vec![(*w, v(*g0).outer(g)?), (*g0, v(*w).matvec(g)?)],
        Outer(a, b) => vec![(*a, g.matvec(&v(*b))?), (*b, g.matvec_t(&v(*a))?)],
        Concat(parts) => {
            let mut off = 0;
            let mut res = Vec::with_capacity(parts.len());
            for &p in parts {
                let pv = v(p);
                res.push((p, g.slice(off, pv.len())?.reshape(pv.dims())?));
                off += pv.len();
            }
            res
        }
        Slice(a, off) => {
            let av = v(*a);
            vec![(*a, g.embed(*off, av.len())?.reshape(av.dims())?)]
        }
        Embed(a, off) => {
            let av = v(*a);
            vec![(*a, g.slice(*off, av.len())?.reshape(av.dims())?)]
        }
        Reshape(a) => vec![(*a, g.reshape(v(*a).dims())?)],
        SelfAdjoint(a, op) => vec![(*a, g.apply_self_adjoint(op.clone())?)],
    })
}

/// Gradients of the scalar `root` with respect to each of `wrt`.
///
/// The returned variables live on the same tape, so they can feed further
/// computation and be differentiated again. Variables that `root` does not
/// depend on get zero gradients.
pub fn grad(root: &Var, wrt: &[&Var]) -> AdResult<Vec<Var>> {
    let tape = root.tape.clone();
    if !tape.is_recording() {
        return Err(AdError::NotRecording);
    }
    if root.len() != 1 {
        return Err(AdError::NonScalarRoot(root.dims().to_vec()));
    }
    for w in wrt {
        if !w.tape.same(&tape) {
            return Err(AdError::ForeignTape);
        }
    }
    let n = root.id + 1;
    // Only nodes downstream of a requested variable need gradients.
    let mut needed = vec![false; n];
    {
        let inner = tape.inner.borrow();
        for w in wrt {
            if w.id < n {
                needed[w.id] = true;
            }
        }
        for id in 0..n {
            if !needed[id] && inner.nodes[id].requires_grad {
                needed[id] = inner.nodes[id].op.parents().iter().any(|&p| needed[p]);
            }
        }
    }
    let mut grads: Vec<Option<Var>> = vec![None; n];
    grads[root.id] = Some(tape.constant(Tensor::filled(root.dims(), 1.0)));
    for id in (0..n).rev() {
        if !needed[id] {
            continue;
        }
        let Some(g) = grads[id].clone() else { continue };
        let op = tape.inner.borrow().nodes[id].op.clone();
        for (p, contrib) in vjp(&tape, id, &op, &g)? {
            if !needed[p] {
                continue;
            }
            grads[p] = Some(match grads[p].take() {
                None => contrib,
                Some(acc) => acc.add(&contrib)?,
            });
        }
    }
    Ok(wrt
        .iter()
        .map(|w| match grads.get(w.id).and_then(|g| g.clone()) {
            Some(g) => g,
            None => tape.constant(Tensor::zeros(w.dims())),
        })
        .collect())
}

/// Convenience: first-order gradient values, detached from the tape.
pub fn grad_values(root: &Var, wrt: &[&Var]) -> AdResult<Vec<Tensor>> {
    Ok(grad(root, wrt)?.into_iter().map(|g| g.value().clone()).collect())
}
