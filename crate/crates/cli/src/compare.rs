//! Side-by-side evaluation of the three acquisition strategies at a common
//! equivalent acceleration:
//!
//! * `strategy1`: HR acquisition with an HR mask, variational HR recon from the zero-filled start.
//! * `strategy2`: the dataset's LR acquisition, variational LR recon, then k-space interpolation.
//! * `strategy3`: the same LR acquisition through the trained unrolled network.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use srr_core::io::write_grid;
use srr_core::mask::generate_mask;
use srr_core::metrics::{metric_row, MetricRow};
use srr_core::phantom::acquire;
use srr_core::{
    equivalent_af, solve_variational, strategy2_from_hr_model, ForwardModel, Manifest, MaskKind, MaskSpec,
    MetricReport, SamplingMask, SolverConfig, Split,
};
use srr_net::{srr_forward, UnrolledModelParams};

use crate::{stage_seed, CliError, CliResult};

/// Largest accepted relative spread of equivalent accelerations, `(max − min) / min`.
pub const AF_TOLERANCE: f64 = 0.05;

pub const STRATEGIES: [&str; 3] = ["strategy1", "strategy2", "strategy3"];

#[derive(Clone, Debug)]
pub struct CompareConfig {
    /// Target acceleration of the HR mask; the dataset's equivalent AF when unset.
    pub hr_af: Option<f64>,
    /// Fully sampled HR center; the dataset mask's center when unset.
    pub hr_center: Option<Vec<usize>>,
    pub solver: SolverConfig,
    pub mask_seed: u64,
    pub noise_seed: u64,
    pub jobs: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct StrategyAf {
    pub strategy: String,
    pub equivalent_af: f64,
}

#[derive(Clone, Debug)]
pub struct CompareOutcome {
    pub report: MetricReport,
    pub afs: Vec<StrategyAf>,
}

/// Refuse unless all equivalent accelerations agree within [`AF_TOLERANCE`].
pub fn check_equivalent_afs(afs: &[StrategyAf]) -> CliResult<()> {
    let min = afs.iter().map(|a| a.equivalent_af).fold(f64::INFINITY, f64::min);
    let max = afs.iter().map(|a| a.equivalent_af).fold(0.0, f64::max);
    if afs.is_empty() || (max - min) / min <= AF_TOLERANCE {
        return Ok(());
    }
    let listed: Vec<String> = afs.iter().map(|a| format!("{} {:.3}", a.strategy, a.equivalent_af)).collect();
    Err(CliError::AfMismatch(listed.join(", ")))
}

fn ratio_f64(r: num_rational::Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Run all three strategies on every test record; with `out`, also write each
/// reconstruction to `<out>/<strategy>/<record id>`.
pub fn compare_strategies(
    manifest: &Manifest,
    gen: &UnrolledModelParams,
    cfg: &CompareConfig,
    out: Option<&Path>,
) -> CliResult<CompareOutcome> {
    let entries: Vec<_> = manifest.entries(Split::Test).cloned().collect();
    let label = manifest.path().display().to_string();
    if entries.is_empty() {
        return Ok(CompareOutcome { report: MetricReport::from_rows(label, Vec::new()), afs: Vec::new() });
    }
    let hr_dims = manifest.spec.phantom.hr_dims.clone();
    let first = manifest.load_record(&entries[0])?;
    let lr_mask = first.mask.clone();
    let af_lr = ratio_f64(equivalent_af(&lr_mask, &hr_dims)?);
    let center = cfg.hr_center.clone().unwrap_or_else(|| lr_mask.center_size().to_vec());
    let hr_mask =
        generate_mask(MaskKind::Poisson, &MaskSpec::new(&hr_dims, cfg.hr_af.unwrap_or(af_lr), &center, cfg.mask_seed))?;
    let afs = vec![
        StrategyAf { strategy: STRATEGIES[0].into(), equivalent_af: ratio_f64(equivalent_af(&hr_mask, &hr_dims)?) },
        StrategyAf { strategy: STRATEGIES[1].into(), equivalent_af: af_lr },
        StrategyAf { strategy: STRATEGIES[2].into(), equivalent_af: af_lr },
    ];
    check_equivalent_afs(&afs)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.max(1))
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start workers: {e}")))?;
    let per_record: Vec<CliResult<Vec<MetricRow>>> = pool.install(|| {
        entries
            .par_iter()
            .map(|entry| {
                let rec = manifest.load_record(entry)?;
                let noise = stage_seed(cfg.noise_seed, &entry.id);
                let y_hr = acquire(&rec.truth, &rec.sens, &hr_mask, &hr_dims, manifest.spec.phantom.noise_std, noise)?;
                let hr_model = ForwardModel::new(SamplingMask::clone(&hr_mask), rec.sens.clone())?;
                let lr_model = rec.model()?;
                let outputs = [
                    solve_variational(&hr_model, &y_hr, &cfg.solver)?.x,
                    strategy2_from_hr_model(&lr_model, &rec.kspace, &cfg.solver)?,
                    srr_forward(gen, &lr_model, &rec.kspace)?,
                ];
                let mut rows = Vec::with_capacity(3);
                for (name, x) in STRATEGIES.iter().zip(&outputs) {
                    if let Some(dir) = out {
                        write_grid(dir.join(name).join(&rec.id), x)?;
                    }
                    rows.push(metric_row(&rec.id, name, &rec.truth, x)?);
                }
                Ok(rows)
            })
            .collect()
    });
    let mut rows = Vec::with_capacity(3 * entries.len());
    for r in per_record {
        rows.extend(r?);
    }
    Ok(CompareOutcome { report: MetricReport::from_rows(label, rows), afs })
}
