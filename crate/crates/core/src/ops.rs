//! The acquisition operator `A = M H F C` and its adjoint.
//!
//! `C` weights an HR image by every coil map, `F` is the centered unitary DFT
//! over the spatial axes, `H` keeps the centered LR block of k-space, and `M`
//! zeroes unsampled LR locations. Adjoints run the chain backwards: `M`,
//! centered zero-padding, inverse DFT, conjugate coil combination.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fft::{dft, idft, trailing_axes};
use crate::grid::{centered_start, num_elements, ComplexGrid, Domain};
use crate::mask::SamplingMask;

/// Allowed excess of the coil root-sum-of-squares over 1.
pub const RSS_TOLERANCE: f64 = 1e-6;

/// Per-coil complex maps over the HR grid, dims `[coil, ...spatial]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SensitivitySet {
    maps: ComplexGrid,
}

impl SensitivitySet {
    /// Wraps already normalized maps; rejects any voxel whose RSS exceeds 1.
    pub fn new(maps: ComplexGrid) -> Result<Self> {
        if maps.rank() < 2 {
            return Err(Error::InvalidArgument("sensitivity maps need a coil axis and spatial axes".into()));
        }
        let set = SensitivitySet { maps: maps.with_domain(Domain::Image) };
        let worst = set.rss().into_iter().fold(0.0, f64::max);
        if worst > 1.0 + RSS_TOLERANCE {
            return Err(Error::InvalidArgument(format!("coil RSS {worst} exceeds 1")));
        }
        Ok(set)
    }

    /// Divide every voxel by its RSS where the RSS exceeds `eps`; zero elsewhere.
    pub fn normalize(maps: ComplexGrid, eps: f64) -> Result<Self> {
        if maps.rank() < 2 {
            return Err(Error::InvalidArgument("sensitivity maps need a coil axis and spatial axes".into()));
        }
        let rss = rss_of(&maps);
        let n = rss.len();
        let mut maps = maps;
        for (i, v) in maps.data_mut().iter_mut().enumerate() {
            let r = rss[i % n];
            *v = if r > eps { *v / r } else { Complex64::new(0.0, 0.0) };
        }
        SensitivitySet::new(maps)
    }

    pub fn maps(&self) -> &ComplexGrid {
        &self.maps
    }

    pub fn n_coils(&self) -> usize {
        self.maps.dims()[0]
    }

    pub fn spatial_dims(&self) -> &[usize] {
        &self.maps.dims()[1..]
    }

    pub fn coil(&self, c: usize) -> ComplexGrid {
        self.maps.slice_leading(c)
    }

    /// Root-sum-of-squares over coils, one value per voxel.
    pub fn rss(&self) -> Vec<f64> {
        rss_of(&self.maps)
    }
}

fn rss_of(maps: &ComplexGrid) -> Vec<f64> {
    let n = num_elements(&maps.dims()[1..]);
    let mut acc = vec![0.0; n];
    for (i, v) in maps.data().iter().enumerate() {
        acc[i % n] += v.norm_sqr();
    }
    acc.into_iter().map(f64::sqrt).collect()
}

fn spatial_target(dims: &[usize], spatial: &[usize]) -> Result<Vec<usize>> {
    if spatial.len() > dims.len() {
        return Err(Error::dims(dims, spatial));
    }
    let lead = dims.len() - spatial.len();
    let mut out = dims[..lead].to_vec();
    out.extend_from_slice(spatial);
    Ok(out)
}

/// Odometer over `dims`, calling `f(offset_in_small, idx)`.
fn for_each_index(dims: &[usize], mut f: impl FnMut(usize, &[usize])) {
    let n = num_elements(dims);
    let mut idx = vec![0usize; dims.len()];
    for lin in 0..n {
        f(lin, &idx);
        for ax in (0..dims.len()).rev() {
            idx[ax] += 1;
            if idx[ax] < dims[ax] {
                break;
            }
            idx[ax] = 0;
        }
    }
}

fn block_offset(big: &[usize], starts: &[usize], idx: &[usize]) -> usize {
    idx.iter().zip(starts).zip(big).fold(0, |acc, ((&i, &s), &d)| acc * d + i + s)
}

/// `H`: the centered `lr_dims` block of the trailing axes of `k`.
pub fn crop_kspace(k: &ComplexGrid, lr_dims: &[usize]) -> Result<ComplexGrid> {
    let out_dims = spatial_target(k.dims(), lr_dims)?;
    if out_dims.iter().zip(k.dims()).any(|(o, d)| o > d) {
        return Err(Error::InvalidArgument(format!("crop size {lr_dims:?} exceeds grid {:?}", k.dims())));
    }
    let starts: Vec<usize> = k.dims().iter().zip(&out_dims).map(|(&d, &o)| centered_start(d, o)).collect();
    let mut data = vec![Complex64::new(0.0, 0.0); num_elements(&out_dims)];
    for_each_index(&out_dims, |lin, idx| data[lin] = k.data()[block_offset(k.dims(), &starts, idx)]);
    ComplexGrid::from_vec(&out_dims, data, k.domain())
}

/// `H*`: embed `k` at the center of a zero grid whose trailing axes are `hr_dims`.
pub fn zeropad_kspace(k: &ComplexGrid, hr_dims: &[usize]) -> Result<ComplexGrid> {
    let out_dims = spatial_target(k.dims(), hr_dims)?;
    if out_dims.iter().zip(k.dims()).any(|(o, d)| o < d) {
        return Err(Error::InvalidArgument(format!("pad size {hr_dims:?} smaller than grid {:?}", k.dims())));
    }
    let starts: Vec<usize> = out_dims.iter().zip(k.dims()).map(|(&o, &d)| centered_start(o, d)).collect();
    let mut out = ComplexGrid::zeros(&out_dims, k.domain());
    let data = out.data_mut();
    for_each_index(k.dims(), |lin, idx| data[block_offset(&out_dims, &starts, idx)] = k.data()[lin]);
    Ok(out)
}

/// `C`: coil-stacked `map_c * x`.
pub fn apply_sens(x: &ComplexGrid, s: &SensitivitySet) -> Result<ComplexGrid> {
    x.check_dims(s.spatial_dims())?;
    let n = x.len();
    let data = s.maps.data().iter().enumerate().map(|(i, m)| m * x.data()[i % n]).collect();
    ComplexGrid::from_vec(s.maps.dims(), data, Domain::Image)
}

/// `C*`: `Σ_c conj(map_c) * z_c`.
pub fn combine_sens(multi: &ComplexGrid, s: &SensitivitySet) -> Result<ComplexGrid> {
    multi.check_dims(s.maps.dims())?;
    let n = num_elements(s.spatial_dims());
    let mut out = ComplexGrid::zeros(s.spatial_dims(), Domain::Image);
    let acc = out.data_mut();
    for (i, (m, z)) in s.maps.data().iter().zip(multi.data()).enumerate() {
        acc[i % n] += m.conj() * z;
    }
    Ok(out)
}

/// `M` (and `M*`, which is the same projection): zero unsampled trailing-axis locations.
pub fn apply_mask(k: &ComplexGrid, mask: &SamplingMask) -> Result<ComplexGrid> {
    let rank = k.rank();
    let mr = mask.dims().len();
    if mr > rank || &k.dims()[rank - mr..] != mask.dims() {
        return Err(Error::dims(mask.dims(), k.dims()));
    }
    let n = mask.sampled().len();
    let mut out = k.clone();
    for (i, v) in out.data_mut().iter_mut().enumerate() {
        if !mask.sampled()[i % n] {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    Ok(out)
}

/// Acquisition model binding a mask on the LR grid to coil maps on the HR grid.
#[derive(Clone, Debug)]
pub struct ForwardModel {
    mask: SamplingMask,
    lr_dims: Vec<usize>,
    hr_dims: Vec<usize>,
    sens: SensitivitySet,
}

impl ForwardModel {
    pub fn new(mask: SamplingMask, sens: SensitivitySet) -> Result<Self> {
        let lr_dims = mask.dims().to_vec();
        let hr_dims = sens.spatial_dims().to_vec();
        if lr_dims.len() != hr_dims.len() {
            return Err(Error::dims(&hr_dims, &lr_dims));
        }
        if lr_dims.iter().zip(&hr_dims).any(|(l, h)| l > h) {
            return Err(Error::InvalidArgument(format!("LR dims {lr_dims:?} exceed HR dims {hr_dims:?}")));
        }
        Ok(ForwardModel { mask, lr_dims, hr_dims, sens })
    }

    pub fn mask(&self) -> &SamplingMask {
        &self.mask
    }

    pub fn sens(&self) -> &SensitivitySet {
        &self.sens
    }

    pub fn lr_dims(&self) -> &[usize] {
        &self.lr_dims
    }

    pub fn hr_dims(&self) -> &[usize] {
        &self.hr_dims
    }

    pub fn n_coils(&self) -> usize {
        self.sens.n_coils()
    }

    /// Dims of measured data: `[coil, ...lr_dims]`.
    pub fn kspace_dims(&self) -> Vec<usize> {
        let mut d = vec![self.n_coils()];
        d.extend_from_slice(&self.lr_dims);
        d
    }

    fn spatial_axes(&self) -> Vec<usize> {
        trailing_axes(self.hr_dims.len() + 1, 1)
    }

    /// `A x = M H F C x`.
    pub fn forward(&self, x: &ComplexGrid) -> Result<ComplexGrid> {
        x.check_dims(&self.hr_dims)?;
        let coil_images = apply_sens(x, &self.sens)?;
        let k = dft(&coil_images, &self.spatial_axes())?;
        let k = crop_kspace(&k, &self.lr_dims)?;
        apply_mask(&k, &self.mask)
    }

    /// `A* y = C* F* H* M* y`.
    pub fn adjoint(&self, y: &ComplexGrid) -> Result<ComplexGrid> {
        y.check_dims(&self.kspace_dims())?;
        let k = apply_mask(y, &self.mask)?;
        let k = zeropad_kspace(&k, &self.hr_dims)?;
        let coil_images = idft(&k, &self.spatial_axes())?;
        combine_sens(&coil_images, &self.sens)
    }

    /// `A* A x`.
    pub fn normal(&self, x: &ComplexGrid) -> Result<ComplexGrid> {
        self.adjoint(&self.forward(x)?)
    }

    /// Zero-filled reconstruction `A* y`.
    pub fn zero_filled(&self, y: &ComplexGrid) -> Result<ComplexGrid> {
        self.adjoint(y)
    }

    /// `½‖A x − y‖²`.
    pub fn fidelity(&self, x: &ComplexGrid, y: &ComplexGrid) -> Result<f64> {
        Ok(0.5 * self.forward(x)?.sub(y)?.norm_sqr())
    }

    /// `∇F(s) = A*(A s − y)`.
    pub fn data_fidelity_grad(&self, s: &ComplexGrid, y: &ComplexGrid) -> Result<ComplexGrid> {
        y.check_dims(&self.kspace_dims())?;
        self.adjoint(&self.forward(s)?.sub(y)?)
    }

    /// Largest eigenvalue of `A*A` (i.e. ‖A‖²) by power iteration.
    pub fn norm_sq_estimate(&self, iters: usize, seed: u64) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = ComplexGrid::from_fn(&self.hr_dims, Domain::Image, |_| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let n0 = v.norm();
        v = v.scale_real(1.0 / n0);
        let mut lambda = 0.0;
        for _ in 0..iters {
            let w = self.normal(&v)?;
            lambda = v.inner(&w)?.re;
            let nw = w.norm();
            if nw == 0.0 {
                return Ok(0.0);
            }
            v = w.scale_real(1.0 / nw);
        }
        Ok(lambda)
    }
}

/// Free-function form of [`ForwardModel::data_fidelity_grad`].
pub fn data_fidelity_grad(model: &ForwardModel, s: &ComplexGrid, y: &ComplexGrid) -> Result<ComplexGrid> {
    model.data_fidelity_grad(s, y)
}
