//! Dense complex n-dimensional grids in row-major order.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which domain a grid's samples live in. Metadata only; no operation
/// changes behavior based on it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    #[default]
    Image,
    Kspace,
}

impl Domain {
    pub fn as_str(&self) -> &'static str {
        match self {
            Domain::Image => "image",
            Domain::Kspace => "kspace",
        }
    }

    pub fn parse(s: &str) -> Option<Domain> {
        match s {
            "image" => Some(Domain::Image),
            "kspace" => Some(Domain::Kspace),
            _ => None,
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexGrid {
    dims: Vec<usize>,
    data: Vec<Complex64>,
    domain: Domain,
}

pub fn num_elements(dims: &[usize]) -> usize {
    dims.iter().product()
}

/// Row-major strides for `dims`.
pub fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * dims[i + 1];
    }
    s
}

/// First index of the centered `part`-long window in a `full`-long axis:
/// the window keeps index `part/2` aligned with index `full/2`.
pub fn centered_start(full: usize, part: usize) -> usize {
    debug_assert!(part <= full);
    full / 2 - part / 2
}

impl ComplexGrid {
    pub fn zeros(dims: &[usize], domain: Domain) -> Self {
        ComplexGrid { dims: dims.to_vec(), data: vec![Complex64::new(0.0, 0.0); num_elements(dims)], domain }
    }

    pub fn filled(dims: &[usize], value: Complex64, domain: Domain) -> Self {
        ComplexGrid { dims: dims.to_vec(), data: vec![value; num_elements(dims)], domain }
    }

    pub fn from_vec(dims: &[usize], data: Vec<Complex64>, domain: Domain) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::InvalidArgument(format!("grid dims must be positive, got {dims:?}")));
        }
        if data.len() != num_elements(dims) {
            return Err(Error::InvalidArgument(format!("data length {} does not match dims {:?}", data.len(), dims)));
        }
        Ok(ComplexGrid { dims: dims.to_vec(), data, domain })
    }

    pub fn from_fn(dims: &[usize], domain: Domain, mut f: impl FnMut(&[usize]) -> Complex64) -> Self {
        let n = num_elements(dims);
        let mut idx = vec![0usize; dims.len()];
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(f(&idx));
            for ax in (0..dims.len()).rev() {
                idx[ax] += 1;
                if idx[ax] < dims[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
        ComplexGrid { dims: dims.to_vec(), data, domain }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = domain;
        self
    }

    pub fn set_domain(&mut self, domain: Domain) {
        self.domain = domain;
    }

    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dims.len());
        idx.iter().zip(&self.dims).fold(0, |acc, (&i, &d)| acc * d + i)
    }

    pub fn get(&self, idx: &[usize]) -> Complex64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: Complex64) {
        let o = self.offset(idx);
        self.data[o] = v;
    }

    /// Reinterpret with new dims of equal element count.
    pub fn reshape(mut self, dims: &[usize]) -> Result<Self> {
        if num_elements(dims) != self.data.len() {
            return Err(Error::dims(&self.dims, dims));
        }
        self.dims = dims.to_vec();
        Ok(self)
    }

    /// Sub-grid at index `i` along the leading axis (e.g. one coil).
    pub fn slice_leading(&self, i: usize) -> ComplexGrid {
        let inner = &self.dims[1..];
        let n = num_elements(inner);
        ComplexGrid { dims: inner.to_vec(), data: self.data[i * n..(i + 1) * n].to_vec(), domain: self.domain }
    }

    /// Stack equally shaped grids along a new leading axis.
    pub fn stack(parts: &[ComplexGrid]) -> Result<ComplexGrid> {
        let first = parts.first().ok_or_else(|| Error::InvalidArgument("cannot stack zero grids".into()))?;
        let mut dims = vec![parts.len()];
        dims.extend_from_slice(first.dims());
        let mut data = Vec::with_capacity(num_elements(&dims));
        for p in parts {
            if p.dims() != first.dims() {
                return Err(Error::dims(first.dims(), p.dims()));
            }
            data.extend_from_slice(p.data());
        }
        Ok(ComplexGrid { dims, data, domain: first.domain })
    }

    pub fn check_dims(&self, expected: &[usize]) -> Result<()> {
        if self.dims != expected {
            return Err(Error::dims(expected, &self.dims));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> ComplexGrid {
        ComplexGrid { dims: self.dims.clone(), data: self.data.iter().map(|&v| f(v)).collect(), domain: self.domain }
    }

    pub fn zip_map(&self, other: &ComplexGrid, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<ComplexGrid> {
        other.check_dims(&self.dims)?;
        Ok(ComplexGrid {
            dims: self.dims.clone(),
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
            domain: self.domain,
        })
    }

    pub fn add(&self, other: &ComplexGrid) -> Result<ComplexGrid> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ComplexGrid) -> Result<ComplexGrid> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, s: Complex64) -> ComplexGrid {
        self.map(|v| v * s)
    }

    pub fn scale_real(&self, s: f64) -> ComplexGrid {
        self.map(|v| v * s)
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: Complex64, other: &ComplexGrid) -> Result<()> {
        other.check_dims(&self.dims)?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
        Ok(())
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn magnitude(&self) -> Vec<f64> {
        self.data.iter().map(|v| v.norm()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn ensure_finite(&self, what: &str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(what.to_string()))
        }
    }

    /// Σ conj(self_i) · other_i
    pub fn inner(&self, other: &ComplexGrid) -> Result<Complex64> {
        inner_product(self, other)
    }
}

/// Σ conj(a_i) · b_i over all elements.
pub fn inner_product(a: &ComplexGrid, b: &ComplexGrid) -> Result<Complex64> {
    b.check_dims(a.dims())?;
    Ok(a.data.iter().zip(&b.data).map(|(x, y)| x.conj() * y).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::random_grid;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn inner_product_of_ones() {
        let a = ComplexGrid::filled(&[4], c(1.0, 0.0), Domain::Image);
        assert_eq!(inner_product(&a, &a).unwrap(), c(4.0, 0.0));
    }

    #[test]
    fn inner_product_orthogonal() {
        let a = ComplexGrid::from_vec(&[2], vec![c(1.0, 0.0), c(0.0, 0.0)], Domain::Image).unwrap();
        let b = ComplexGrid::from_vec(&[2], vec![c(0.0, 0.0), c(1.0, 0.0)], Domain::Image).unwrap();
        assert_eq!(inner_product(&a, &b).unwrap(), c(0.0, 0.0));
    }

    #[test]
    fn inner_product_matches_direct_sum() {
        let a = random_grid(&[8, 8], 1);
        let b = random_grid(&[8, 8], 2);
        let mut re = 0.0;
        let mut im = 0.0;
        for i in 0..64 {
            let (x, y) = (a.data()[i], b.data()[i]);
            // (xr - i xi)(yr + i yi)
            re += x.re * y.re + x.im * y.im;
            im += x.re * y.im - x.im * y.re;
        }
        let got = inner_product(&a, &b).unwrap();
        assert!((got.re - re).abs() < 1e-12 && (got.im - im).abs() < 1e-12);
    }

    #[test]
    fn inner_product_dim_mismatch() {
        let a = ComplexGrid::zeros(&[4], Domain::Image);
        let b = ComplexGrid::zeros(&[2, 2], Domain::Image);
        assert!(matches!(inner_product(&a, &b), Err(Error::DimMismatch { .. })));
    }

    #[test]
    fn from_fn_is_row_major() {
        let g = ComplexGrid::from_fn(&[2, 3], Domain::Image, |i| c((i[0] * 10 + i[1]) as f64, 0.0));
        let re: Vec<f64> = g.data().iter().map(|v| v.re).collect();
        assert_eq!(re, vec![0.0, 1.0, 2.0, 10.0, 11.0, 12.0]);
        assert_eq!(g.get(&[1, 2]).re, 12.0);
        assert_eq!(strides(&[2, 3, 4]), vec![12, 4, 1]);
    }

    proptest! {
        #[test]
        fn self_inner_is_real_nonnegative(seed in any::<u64>(), zero in any::<bool>()) {
            let mut a = random_grid(&[5, 3], seed);
            if zero {
                a = ComplexGrid::zeros(&[5, 3], Domain::Image);
            }
            let v = inner_product(&a, &a).unwrap();
            prop_assert!(v.im.abs() < 1e-12);
            prop_assert!(v.re >= 0.0);
            prop_assert_eq!(v.re == 0.0, zero);
        }

        #[test]
        fn inner_is_conjugate_symmetric(s1 in any::<u64>(), s2 in any::<u64>()) {
            let a = random_grid(&[6, 4], s1);
            let b = random_grid(&[6, 4], s2);
            let ab = inner_product(&a, &b).unwrap();
            let ba = inner_product(&b, &a).unwrap();
            prop_assert!((ab - ba.conj()).norm() < 1e-12);
        }
    }
}
