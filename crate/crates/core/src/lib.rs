//! Super-resolution-involved MRI reconstruction: grids, acquisition operators,
//! sampling masks, synthetic data, classical solvers and image metrics.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fft;
pub mod grid;
pub mod io;
pub mod mask;
pub mod metrics;
pub mod ops;
pub mod phantom;
pub mod solver;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
pub use grid::{inner_product, ComplexGrid, Domain};
pub use mask::{equivalent_af, MaskKind, MaskSpec, SamplingMask};
pub use metrics::{psnr, ssim, MetricReport};
pub use ops::{ForwardModel, SensitivitySet};
pub use phantom::{build_dataset, make_phantom, make_sens, DatasetSpec, Manifest, PhantomSpec, Record, Split};
pub use solver::{
    ki_zero_filled, kspace_interp_sr, lowres_problem, solve_variational, strategy2_from_hr_model, strategy2_pipeline,
    ProxKind, SolverConfig,
};
