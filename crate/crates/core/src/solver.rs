//! Classical reconstruction: proximal gradient on the data fidelity, the
//! zero-padding (sinc) interpolator and the two-step LR-recon-then-upsample pipeline.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{dft, idft};
use crate::grid::{num_elements, ComplexGrid};
use crate::ops::{zeropad_kspace, ForwardModel};
use crate::phantom::resample_sens;

/// Fidelity may grow to this multiple of its initial value before the solve is abandoned.
pub const DIVERGENCE_FACTOR: f64 = 10.0;

pub fn soft_threshold_scalar(v: Complex64, tau: f64) -> Complex64 {
    let m = v.norm();
    if m <= tau || m == 0.0 {
        Complex64::new(0.0, 0.0)
    } else {
        v * ((m - tau) / m)
    }
}

/// Magnitude soft-thresholding, phase preserved.
pub fn soft_threshold(g: &ComplexGrid, tau: f64) -> ComplexGrid {
    g.map(|v| soft_threshold_scalar(v, tau))
}

/// Largest number of Haar levels a 2D grid of these dims supports.
pub fn max_haar_levels(dims: &[usize]) -> usize {
    dims.iter().map(|&d| if d == 0 { 0 } else { d.trailing_zeros() as usize }).min().unwrap_or(0)
}

fn check_haar(g: &ComplexGrid, levels: usize) -> Result<()> {
    if g.rank() != 2 {
        return Err(Error::InvalidArgument(format!("Haar transform needs a 2D grid, got {:?}", g.dims())));
    }
    if levels > max_haar_levels(g.dims()) {
        return Err(Error::InvalidArgument(format!("dims {:?} do not support {levels} Haar levels", g.dims())));
    }
    Ok(())
}

/// One orthonormal Haar analysis (or synthesis) pass along a strided lane of length `n`.
fn haar_lane(data: &mut [Complex64], start: usize, stride: usize, n: usize, inverse: bool, tmp: &mut Vec<Complex64>) {
    let h = n / 2;
    let r = std::f64::consts::FRAC_1_SQRT_2;
    tmp.clear();
    tmp.extend((0..n).map(|i| data[start + i * stride]));
    for i in 0..h {
        if inverse {
            let (a, d) = (tmp[i], tmp[h + i]);
            data[start + 2 * i * stride] = (a + d) * r;
            data[start + (2 * i + 1) * stride] = (a - d) * r;
        } else {
            let (a, b) = (tmp[2 * i], tmp[2 * i + 1]);
            data[start + i * stride] = (a + b) * r;
            data[start + (h + i) * stride] = (a - b) * r;
        }
    }
}

/// Multilevel orthonormal 2D Haar transform in Mallat layout: the coarse
/// approximation occupies the top-left `(ny >> levels) × (nx >> levels)` block.
pub fn haar2(g: &ComplexGrid, levels: usize) -> Result<ComplexGrid> {
    check_haar(g, levels)?;
    let (ny, nx) = (g.dims()[0], g.dims()[1]);
    let mut out = g.clone();
    let mut tmp = Vec::new();
    let data = out.data_mut();
    for l in 0..levels {
        let (h, w) = (ny >> l, nx >> l);
        for y in 0..h {
            haar_lane(data, y * nx, 1, w, false, &mut tmp);
        }
        for x in 0..w {
            haar_lane(data, x, nx, h, false, &mut tmp);
        }
    }
    Ok(out)
}

pub fn ihaar2(coeffs: &ComplexGrid, levels: usize) -> Result<ComplexGrid> {
    check_haar(coeffs, levels)?;
    let (ny, nx) = (coeffs.dims()[0], coeffs.dims()[1]);
    let mut out = coeffs.clone();
    let mut tmp = Vec::new();
    let data = out.data_mut();
    for l in (0..levels).rev() {
        let (h, w) = (ny >> l, nx >> l);
        for x in 0..w {
            haar_lane(data, x, nx, h, true, &mut tmp);
        }
        for y in 0..h {
            haar_lane(data, y * nx, 1, w, true, &mut tmp);
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ProxKind {
    Identity,
    SoftThreshold,
    /// Soft-threshold the Haar detail coefficients; the coarse block is kept.
    Haar {
        levels: usize,
    },
}

impl ProxKind {
    pub fn parse(s: &str) -> Option<ProxKind> {
        match s {
            "identity" | "none" => Some(ProxKind::Identity),
            "soft" | "l1" => Some(ProxKind::SoftThreshold),
            "haar" => Some(ProxKind::Haar { levels: 3 }),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProxOperator {
    pub kind: ProxKind,
    pub tau: f64,
}

impl ProxOperator {
    pub fn new(kind: ProxKind, tau: f64) -> Result<ProxOperator> {
        if !(tau >= 0.0) {
            return Err(Error::InvalidArgument(format!("threshold must be nonnegative, got {tau}")));
        }
        Ok(ProxOperator { kind, tau })
    }

    pub fn identity() -> ProxOperator {
        ProxOperator { kind: ProxKind::Identity, tau: 0.0 }
    }

    pub fn apply(&self, g: &ComplexGrid) -> Result<ComplexGrid> {
        match self.kind {
            ProxKind::Identity => Ok(g.clone()),
            ProxKind::SoftThreshold => Ok(soft_threshold(g, self.tau)),
            ProxKind::Haar { levels } => {
                let levels = levels.min(max_haar_levels(g.dims()));
                let mut c = haar2(g, levels)?;
                let nx = g.dims()[1];
                let (ay, ax) = (g.dims()[0] >> levels, nx >> levels);
                for (i, v) in c.data_mut().iter_mut().enumerate() {
                    if i / nx >= ay || i % nx >= ax {
                        *v = soft_threshold_scalar(*v, self.tau);
                    }
                }
                ihaar2(&c, levels)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Gradient step η.
    pub eta: f64,
    /// Penalty weight ρ; the prox threshold is `tau / rho`.
    pub rho: f64,
    pub tau: f64,
    pub max_iters: usize,
    /// Stop once `‖x_{k+1} - x_k‖ / ‖x_k‖` falls below this.
    pub tol: f64,
    pub prox: ProxKind,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { eta: 1.0, rho: 1.0, tau: 0.0, max_iters: 200, tol: 1e-6, prox: ProxKind::Identity }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) || !(self.rho > 0.0) || !(self.tau >= 0.0) || !(self.tol >= 0.0) {
            return Err(Error::InvalidArgument(format!("invalid solver config {self:?}")));
        }
        Ok(())
    }

    pub fn prox_operator(&self) -> Result<ProxOperator> {
        ProxOperator::new(self.prox, self.tau / self.rho)
    }

    /// Whether `eta <= 1/‖A‖²` with `‖A‖²` from power iteration; larger steps
    /// lose the monotone-fidelity guarantee.
    pub fn step_is_safe(&self, model: &ForwardModel) -> Result<bool> {
        let l = model.norm_sq_estimate(30, 0)?;
        Ok(l == 0.0 || self.eta <= (1.0 + 1e-6) / l)
    }
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub x: ComplexGrid,
    /// `½‖A x_k − y‖²` for `k = 0..=iterations`, starting with the zero-filled `x_0`.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Proximal gradient: `s = prox(x_k)`, `x_{k+1} = s − η A*(A s − y)`, from `x_0 = A* y`.
pub fn solve_variational(model: &ForwardModel, y: &ComplexGrid, config: &SolverConfig) -> Result<SolveResult> {
    config.validate()?;
    let prox = config.prox_operator()?;
    let aty = model.adjoint(y)?;
    let mut x = aty.clone();
    let f0 = model.fidelity(&x, y)?;
    let mut trace = vec![f0];
    let mut converged = false;
    let mut iterations = 0;
    for k in 0..config.max_iters {
        let s = prox.apply(&x)?;
        let grad = model.normal(&s)?.sub(&aty)?;
        let mut next = s;
        next.axpy(Complex64::new(-config.eta, 0.0), &grad)?;
        let f = model.fidelity(&next, y)?;
        trace.push(f);
        iterations = k + 1;
        if !f.is_finite() || f > DIVERGENCE_FACTOR * f0 && f0 > 0.0 {
            return Err(Error::Diverged { iteration: iterations, value: f, trace });
        }
        let denom = x.norm();
        let change = next.sub(&x)?.norm();
        x = next;
        if change <= config.tol * denom || (denom == 0.0 && change == 0.0) {
            converged = true;
            break;
        }
    }
    Ok(SolveResult { x, trace, iterations, converged })
}

/// Sinc (k-space zero-padding) upsampling, scaled so constants are preserved.
pub fn kspace_interp_sr(x_lr: &ComplexGrid, hr_dims: &[usize]) -> Result<ComplexGrid> {
    if hr_dims.len() != x_lr.rank() || hr_dims.iter().zip(x_lr.dims()).any(|(h, l)| h < l) {
        return Err(Error::InvalidArgument(format!("cannot upsample {:?} to {hr_dims:?}", x_lr.dims())));
    }
    let axes: Vec<usize> = (0..x_lr.rank()).collect();
    let k = zeropad_kspace(&dft(x_lr, &axes)?, hr_dims)?;
    let scale = (num_elements(hr_dims) as f64 / x_lr.len() as f64).sqrt();
    Ok(idft(&k, &axes)?.scale_real(scale))
}

/// The LR-grid model used by the two-step pipeline: same mask, coil maps
/// resampled to the LR grid, no truncation.
pub fn lowres_model(model: &ForwardModel) -> Result<ForwardModel> {
    let sens = resample_sens(model.sens(), model.lr_dims())?;
    ForwardModel::new(model.mask().clone(), sens)
}

/// Variational recon on the LR grid, then k-space interpolation to `hr_dims`.
pub fn strategy2_pipeline(
    model_lr: &ForwardModel,
    y: &ComplexGrid,
    hr_dims: &[usize],
    config: &SolverConfig,
) -> Result<ComplexGrid> {
    let x_lr = solve_variational(model_lr, y, config)?.x;
    kspace_interp_sr(&x_lr, hr_dims)
}

/// LR model and data for measurements acquired through the HR model `A = M H F C`.
///
/// The unitary HR transform puts the measured samples on a scale √(N/n) larger
/// than a unitary LR acquisition of the same object would, so `y` is scaled by
/// √(n/N). Images reconstructed on the LR grid then carry the intensity of the
/// HR image and the constant-preserving interpolation applies unchanged.
pub fn lowres_problem(model: &ForwardModel, y: &ComplexGrid) -> Result<(ForwardModel, ComplexGrid)> {
    let model_lr = lowres_model(model)?;
    let scale = (num_elements(model.lr_dims()) as f64 / num_elements(model.hr_dims()) as f64).sqrt();
    Ok((model_lr, y.scale_real(scale)))
}

/// [`strategy2_pipeline`] for HR-acquired data, via [`lowres_problem`].
pub fn strategy2_from_hr_model(model: &ForwardModel, y: &ComplexGrid, config: &SolverConfig) -> Result<ComplexGrid> {
    let (model_lr, y_lr) = lowres_problem(model, y)?;
    strategy2_pipeline(&model_lr, &y_lr, model.hr_dims(), config)
}

/// Zero-filled LR image of HR-acquired data, interpolated to the HR grid.
pub fn ki_zero_filled(model: &ForwardModel, y: &ComplexGrid) -> Result<ComplexGrid> {
    let (model_lr, y_lr) = lowres_problem(model, y)?;
    kspace_interp_sr(&model_lr.zero_filled(&y_lr)?, model.hr_dims())
}

/// True when the model has no truncation (image grid equals k-space grid).
pub fn is_lowres_model(model: &ForwardModel) -> bool {
    model.lr_dims() == model.hr_dims()
}
