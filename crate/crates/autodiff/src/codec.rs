//! Complex images as two real channels (real part, then imaginary part).

use num_complex::Complex64;
use srr_core::{ComplexGrid, Domain};

use crate::error::{AdError, AdResult};
use crate::tensor::Tensor;

/// `[...dims] complex -> [2, ...dims] real`.
pub fn complex_to_channels(g: &ComplexGrid) -> Tensor {
    let mut data = Vec::with_capacity(2 * g.len());
    data.extend(g.data().iter().map(|v| v.re));
    data.extend(g.data().iter().map(|v| v.im));
    let mut dims = vec![2];
    dims.extend_from_slice(g.dims());
    Tensor::new(&dims, data).expect("two channels")
}

/// Inverse of [`complex_to_channels`].
pub fn channels_to_complex(t: &Tensor, domain: Domain) -> AdResult<ComplexGrid> {
    if t.dims().first() != Some(&2) {
        return Err(AdError::Shape(format!("expected 2 leading channels, got {:?}", t.dims())));
    }
    let n = t.len() / 2;
    let (re, im) = t.data().split_at(n);
    let data = re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect();
    Ok(ComplexGrid::from_vec(&t.dims()[1..], data, domain)?)
}
