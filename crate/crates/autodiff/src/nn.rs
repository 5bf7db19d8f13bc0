//! Layers built from taped ops, plus named parameter containers.

use std::collections::BTreeMap;
use std::rc::Rc;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{AdError, AdResult};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

/// `x` where `x >= 0`, `slope * x` elsewhere; zero takes the positive branch.
pub fn leaky_relu(x: &Var, slope: f64) -> AdResult<Var> {
    if !(slope > 0.0 && slope < 1.0) {
        return Err(AdError::Shape(format!("leaky slope must lie in (0, 1), got {slope}")));
    }
    let m = x.value().map(|v| if v >= 0.0 { 1.0 } else { slope });
    x.mul_const(Rc::new(m))
}

/// Same-padded convolution with optional per-channel bias.
pub fn conv(x: &Var, w: &Var, b: Option<&Var>) -> AdResult<Var> {
    let y = x.conv(w)?;
    match b {
        Some(b) => y.add_channel_bias(b),
        None => Ok(y),
    }
}

pub fn avg_pool(x: &Var, factor: usize) -> AdResult<Var> {
    if factor == 1 {
        return Ok(x.clone());
    }
    x.avg_pool(factor)
}

/// `W x + b` on the flattened input.
pub fn dense(x: &Var, w: &Var, b: &Var) -> AdResult<Var> {
    let flat = if x.dims().len() == 1 { x.clone() } else { x.reshape(&[x.len()])? };
    w.matvec(&flat)?.add(b)
}

/// He-normal initialization, std `sqrt(2 / fan_in)`.
pub fn he_normal(dims: &[usize], fan_in: usize, rng: &mut impl Rng) -> Tensor {
    let std = (2.0 / fan_in.max(1) as f64).sqrt();
    let dist = Normal::new(0.0, std).expect("finite std");
    let n = dims.iter().product();
    Tensor::new(dims, (0..n).map(|_| dist.sample(rng)).collect()).expect("dims match")
}

/// Ordered, named tensors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet {
    names: Vec<String>,
    tensors: Vec<Tensor>,
    index: BTreeMap<String, usize>,
}

impl ParamSet {
    pub fn new() -> ParamSet {
        ParamSet::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) {
        let name = name.into();
        if let Some(&i) = self.index.get(&name) {
            self.tensors[i] = t;
            return;
        }
        self.index.insert(name.clone(), self.names.len());
        self.names.push(name);
        self.tensors.push(t);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.index.get(name).map(|&i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.index.get(name).map(|&i| &mut self.tensors[i])
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::is_finite)
    }

    /// Put every tensor on `tape` as a trainable leaf.
    pub fn bind(&self, tape: &Tape) -> BoundParams {
        BoundParams { vars: self.tensors.iter().map(|t| tape.param(t.clone())).collect(), index: self.index.clone() }
    }

    /// Put every tensor on `tape` as a constant.
    pub fn bind_const(&self, tape: &Tape) -> BoundParams {
        BoundParams { vars: self.tensors.iter().map(|t| tape.constant(t.clone())).collect(), index: self.index.clone() }
    }

    /// Name existing variables after this set's entries, in order; dims must match.
    pub fn attach(&self, vars: &[Var]) -> AdResult<BoundParams> {
        if vars.len() != self.tensors.len() {
            return Err(AdError::Shape(format!("{} variables for {} parameters", vars.len(), self.tensors.len())));
        }
        for ((n, t), v) in self.iter().zip(vars) {
            if t.dims() != v.dims() {
                return Err(AdError::Shape(format!("{n}: dims {:?}, expected {:?}", v.dims(), t.dims())));
            }
        }
        Ok(BoundParams { vars: vars.to_vec(), index: self.index.clone() })
    }

    /// Keep only entries whose name starts with `prefix`, stripping it.
    pub fn with_prefix(&self, prefix: &str) -> ParamSet {
        let mut out = ParamSet::new();
        for (n, t) in self.iter() {
            if let Some(rest) = n.strip_prefix(prefix) {
                out.insert(rest, t.clone());
            }
        }
        out
    }

    /// Copy all entries in, prefixing their names.
    pub fn extend_prefixed(&mut self, prefix: &str, other: &ParamSet) {
        for (n, t) in other.iter() {
            self.insert(format!("{prefix}{n}"), t.clone());
        }
    }
}

/// A [`ParamSet`] placed on a tape, in the same order.
#[derive(Clone, Debug)]
pub struct BoundParams {
    vars: Vec<Var>,
    index: BTreeMap<String, usize>,
}

impl BoundParams {
    pub fn get(&self, name: &str) -> AdResult<&Var> {
        self.index.get(name).map(|&i| &self.vars[i]).ok_or_else(|| AdError::Shape(format!("no parameter named {name}")))
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub fn refs(&self) -> Vec<&Var> {
        self.vars.iter().collect()
    }
}
