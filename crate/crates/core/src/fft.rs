//! Centered, unitary discrete Fourier transforms.
//!
//! DC sits at index `N/2` (floor) on every transformed axis, and both
//! directions are scaled by `1/sqrt(N)` so the transform preserves norms.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{strides, ComplexGrid, Domain};

#[derive(Clone, Copy, PartialEq, Eq)]
enum Direction {
    Forward,
    Inverse,
}

/// Centered unitary forward DFT along `axes`.
pub fn dft(g: &ComplexGrid, axes: &[usize]) -> Result<ComplexGrid> {
    let mut out = transform(g, axes, Direction::Forward)?;
    out.set_domain(Domain::Kspace);
    Ok(out)
}

/// Centered unitary inverse DFT along `axes`.
pub fn idft(g: &ComplexGrid, axes: &[usize]) -> Result<ComplexGrid> {
    let mut out = transform(g, axes, Direction::Inverse)?;
    out.set_domain(Domain::Image);
    Ok(out)
}

/// Axes `first..rank`, the usual "spatial axes after a leading coil axis".
pub fn trailing_axes(rank: usize, first: usize) -> Vec<usize> {
    (first..rank).collect()
}

fn transform(g: &ComplexGrid, axes: &[usize], dir: Direction) -> Result<ComplexGrid> {
    let rank = g.rank();
    for &ax in axes {
        if ax >= rank {
            return Err(Error::InvalidAxis { axis: ax, rank });
        }
    }
    let mut out = g.clone();
    let mut planner = FftPlanner::<f64>::new();
    let dims = g.dims().to_vec();
    let st = strides(&dims);
    for &ax in axes {
        let n = dims[ax];
        if n == 1 {
            continue;
        }
        let plan = match dir {
            Direction::Forward => planner.plan_fft_forward(n),
            Direction::Inverse => planner.plan_fft_inverse(n),
        };
        transform_axis(out.data_mut(), &dims, &st, ax, plan.as_ref());
    }
    Ok(out)
}

fn transform_axis(data: &mut [Complex64], dims: &[usize], st: &[usize], ax: usize, plan: &dyn Fft<f64>) {
    let n = dims[ax];
    let stride = st[ax];
    let c = n / 2;
    let scale = 1.0 / (n as f64).sqrt();
    let outer: usize = dims[..ax].iter().product();
    let inner = stride;
    let mut lane = vec![Complex64::new(0.0, 0.0); n];
    let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
    // Pre-shift takes x[(m + c) % n]; post-shift writes out[k] = Y[(k - c) % n].
    // The centered kernel is symmetric in (k, n), so both directions shift alike.
    let (pre, post) = (c, n - c);
    for o in 0..outer {
        for i in 0..inner {
            let base = o * n * stride + i;
            for (m, v) in lane.iter_mut().enumerate() {
                *v = data[base + ((m + pre) % n) * stride];
            }
            plan.process_with_scratch(&mut lane, &mut scratch);
            for k in 0..n {
                data[base + k * stride] = lane[(k + post) % n] * scale;
            }
        }
    }
}
