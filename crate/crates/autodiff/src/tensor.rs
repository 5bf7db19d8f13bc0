//! Dense real tensors and the raw numerical kernels behind the taped ops.
//!
//! Convolution tensors are channel-first: activations are `[C, H, W]` or
//! `[C, D, H, W]`, kernels `[Cout, Cin, kh, kw]` or `[Cout, Cin, kd, kh, kw]`.
//! Internally both layouts are handled as three spatial axes with a unit
//! depth for 2D data.

use crate::error::{AdError, AdResult};

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(dims: &[usize], data: Vec<f64>) -> AdResult<Tensor> {
        let n: usize = dims.iter().product();
        if n != data.len() {
            return Err(AdError::Shape(format!("dims {dims:?} hold {n} values, got {}", data.len())));
        }
        Ok(Tensor { dims: dims.to_vec(), data })
    }

    pub fn zeros(dims: &[usize]) -> Tensor {
        Tensor::filled(dims, 0.0)
    }

    pub fn filled(dims: &[usize], v: f64) -> Tensor {
        Tensor { dims: dims.to_vec(), data: vec![v; dims.iter().product()] }
    }

    pub fn scalar(v: f64) -> Tensor {
        Tensor { dims: vec![1], data: vec![v] }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> f64 {
        assert_eq!(self.data.len(), 1, "item() on a tensor with dims {:?}", self.dims);
        self.data[0]
    }

    pub fn reshaped(&self, dims: &[usize]) -> AdResult<Tensor> {
        Tensor::new(dims, self.data.clone())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor { dims: self.dims.clone(), data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> AdResult<Tensor> {
        if self.dims != other.dims {
            return Err(AdError::Shape(format!("{:?} vs {:?}", self.dims, other.dims)));
        }
        Ok(Tensor {
            dims: self.dims.clone(),
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn dot(&self, other: &Tensor) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Spatial extent of a channel-first activation as `[D, H, W]`.
pub(crate) fn spatial3(dims: &[usize]) -> AdResult<[usize; 3]> {
    match dims.len() {
        3 => Ok([1, dims[1], dims[2]]),
        4 => Ok([dims[1], dims[2], dims[3]]),
        _ => Err(AdError::Shape(format!("expected [C,H,W] or [C,D,H,W], got {dims:?}"))),
    }
}

pub(crate) fn kernel3(dims: &[usize]) -> AdResult<[usize; 3]> {
    let k = match dims.len() {
        4 => [1, dims[2], dims[3]],
        5 => [dims[2], dims[3], dims[4]],
        _ => return Err(AdError::Shape(format!("expected a 2D or 3D kernel, got {dims:?}"))),
    };
    if k.iter().any(|&v| v % 2 == 0) {
        return Err(AdError::Shape(format!("same padding needs odd kernel extents, got {dims:?}")));
    }
    Ok(k)
}

/// `out[p] += a * x[p + off]` over every `p` whose shifted index stays inside the volume.
fn shifted_axpy(out: &mut [f64], x: &[f64], s: [usize; 3], off: [isize; 3], a: f64) {
    let [sd, sh, sw] = s;
    let w_lo = (-off[2]).max(0) as usize;
    let w_hi = (sw as isize - off[2]).min(sw as isize).max(0) as usize;
    if w_lo >= w_hi {
        return;
    }
    for d in 0..sd {
        let dd = d as isize + off[0];
        if dd < 0 || dd >= sd as isize {
            continue;
        }
        for h in 0..sh {
            let hh = h as isize + off[1];
            if hh < 0 || hh >= sh as isize {
                continue;
            }
            let o = (d * sh + h) * sw;
            let i = ((dd as usize * sh + hh as usize) * sw) as isize + off[2];
            let dst = &mut out[o + w_lo..o + w_hi];
            let src = &x[(i + w_lo as isize) as usize..(i + w_hi as isize) as usize];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += a * s;
            }
        }
    }
}

/// `Σ_p g[p] * x[p + off]` over the valid region.
fn shifted_dot(g: &[f64], x: &[f64], s: [usize; 3], off: [isize; 3]) -> f64 {
    let [sd, sh, sw] = s;
    let w_lo = (-off[2]).max(0) as usize;
    let w_hi = (sw as isize - off[2]).min(sw as isize).max(0) as usize;
    if w_lo >= w_hi {
        return 0.0;
    }
    let mut acc = 0.0;
    for d in 0..sd {
        let dd = d as isize + off[0];
        if dd < 0 || dd >= sd as isize {
            continue;
        }
        for h in 0..sh {
            let hh = h as isize + off[1];
            if hh < 0 || hh >= sh as isize {
                continue;
            }
            let o = (d * sh + h) * sw;
            let i = ((dd as usize * sh + hh as usize) * sw) as isize + off[2];
            let a = &g[o + w_lo..o + w_hi];
            let b = &x[(i + w_lo as isize) as usize..(i + w_hi as isize) as usize];
            acc += a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
        }
    }
    acc
}

fn taps(k: [usize; 3]) -> impl Iterator<Item = (usize, [isize; 3])> {
    let (kd, kh, kw) = (k[0], k[1], k[2]);
    (0..kd * kh * kw).map(move |t| {
        let (a, b, c) = (t / (kh * kw), (t / kw) % kh, t % kw);
        (t, [a as isize - (kd / 2) as isize, b as isize - (kh / 2) as isize, c as isize - (kw / 2) as isize])
    })
}

fn neg(o: [isize; 3]) -> [isize; 3] {
    [-o[0], -o[1], -o[2]]
}

/// Same-padded cross-correlation `y[co,p] = Σ_{ci,t} w[co,ci,t] x[ci,p+t-pad]`.
pub fn conv_forward(x: &Tensor, w: &Tensor) -> AdResult<Tensor> {
    let s = spatial3(x.dims())?;
    let k = kernel3(w.dims())?;
    let (cout, cin) = (w.dims()[0], w.dims()[1]);
    if x.dims()[0] != cin || x.dims().len() + 1 != w.dims().len() {
        return Err(AdError::ChannelMismatch { expected: cin, got: x.dims()[0] });
    }
    let n: usize = s.iter().product();
    let kt: usize = k.iter().product();
    let mut dims = x.dims().to_vec();
    dims[0] = cout;
    let mut out = Tensor::zeros(&dims);
    for co in 0..cout {
        let dst = &mut out.data[co * n..(co + 1) * n];
        for ci in 0..cin {
            let src = &x.data[ci * n..(ci + 1) * n];
            for (t, off) in taps(k) {
                let wv = w.data[(co * cin + ci) * kt + t];
                if wv != 0.0 {
                    shifted_axpy(dst, src, s, off, wv);
                }
            }
        }
    }
    Ok(out)
}

/// Adjoint of [`conv_forward`] in its input: `x̄[ci,q] = Σ_{co,t} w[co,ci,t] g[co,q-t+pad]`.
pub fn conv_transpose_input(g: &Tensor, w: &Tensor) -> AdResult<Tensor> {
    let s = spatial3(g.dims())?;
    let k = kernel3(w.dims())?;
    let (cout, cin) = (w.dims()[0], w.dims()[1]);
    if g.dims()[0] != cout {
        return Err(AdError::ChannelMismatch { expected: cout, got: g.dims()[0] });
    }
    let n: usize = s.iter().product();
    let kt: usize = k.iter().product();
    let mut dims = g.dims().to_vec();
    dims[0] = cin;
    let mut out = Tensor::zeros(&dims);
    for ci in 0..cin {
        let dst = &mut out.data[ci * n..(ci + 1) * n];
        for co in 0..cout {
            let src = &g.data[co * n..(co + 1) * n];
            for (t, off) in taps(k) {
                let wv = w.data[(co * cin + ci) * kt + t];
                if wv != 0.0 {
                    shifted_axpy(dst, src, s, neg(off), wv);
                }
            }
        }
    }
    Ok(out)
}

/// Kernel gradient `w̄[co,ci,t] = Σ_p g[co,p] x[ci,p+t-pad]` for a kernel of dims `kdims`.
pub fn conv_weight_grad(x: &Tensor, g: &Tensor, kdims: &[usize]) -> AdResult<Tensor> {
    let s = spatial3(x.dims())?;
    let k = kernel3(kdims)?;
    let (cout, cin) = (kdims[0], kdims[1]);
    if x.dims()[0] != cin || g.dims()[0] != cout || x.dims()[1..] != g.dims()[1..] {
        return Err(AdError::Shape(format!("weight grad of {kdims:?} from x {:?}, g {:?}", x.dims(), g.dims())));
    }
    let n: usize = s.iter().product();
    let kt: usize = k.iter().product();
    let mut out = Tensor::zeros(kdims);
    for co in 0..cout {
        let gs = &g.data[co * n..(co + 1) * n];
        for ci in 0..cin {
            let xs = &x.data[ci * n..(ci + 1) * n];
            for (t, off) in taps(k) {
                out.data[(co * cin + ci) * kt + t] = shifted_dot(gs, xs, s, off);
            }
        }
    }
    Ok(out)
}

/// Output extent of pooling `n` by `f`, padding the tail up to a multiple of `f`.
pub fn pooled_len(n: usize, f: usize) -> usize {
    n.div_ceil(f)
}

fn pool_geometry(dims: &[usize], f: usize) -> AdResult<(usize, usize, usize)> {
    if f == 0 || dims.len() < 2 {
        return Err(AdError::Shape(format!("cannot pool dims {dims:?} by {f}")));
    }
    let r = dims.len();
    Ok((dims[..r - 2].iter().product(), dims[r - 2], dims[r - 1]))
}

/// Non-overlapping window means over the last two axes; windows hanging
/// over the edge average only their in-range entries.
pub fn avg_pool_forward(x: &Tensor, f: usize) -> AdResult<Tensor> {
    let (outer, h, w) = pool_geometry(x.dims(), f)?;
    let (ph, pw) = (pooled_len(h, f), pooled_len(w, f));
    let mut dims = x.dims().to_vec();
    let r = dims.len();
    dims[r - 2] = ph;
    dims[r - 1] = pw;
    let mut out = Tensor::zeros(&dims);
    for o in 0..outer {
        for i in 0..h {
            for j in 0..w {
                out.data[(o * ph + i / f) * pw + j / f] += x.data[(o * h + i) * w + j];
            }
        }
        for i in 0..ph {
            let ch = (h - i * f).min(f);
            for j in 0..pw {
                let cw = (w - j * f).min(f);
                out.data[(o * ph + i) * pw + j] /= (ch * cw) as f64;
            }
        }
    }
    Ok(out)
}

/// Adjoint of [`avg_pool_forward`]: spreads each pooled value over its window, divided by the window count.
pub fn avg_pool_adjoint(g: &Tensor, f: usize, in_dims: &[usize]) -> AdResult<Tensor> {
    let (outer, h, w) = pool_geometry(in_dims, f)?;
    let (ph, pw) = (pooled_len(h, f), pooled_len(w, f));
    let (go, gh, gw) = pool_geometry(g.dims(), 1)?;
    if (go, gh, gw) != (outer, ph, pw) {
        return Err(AdError::Shape(format!("pool adjoint of {:?} into {in_dims:?}", g.dims())));
    }
    let mut out = Tensor::zeros(in_dims);
    for o in 0..outer {
        for i in 0..h {
            let ch = (h - (i / f) * f).min(f);
            for j in 0..w {
                let cw = (w - (j / f) * f).min(f);
                out.data[(o * h + i) * w + j] = g.data[(o * ph + i / f) * pw + j / f] / (ch * cw) as f64;
            }
        }
    }
    Ok(out)
}
