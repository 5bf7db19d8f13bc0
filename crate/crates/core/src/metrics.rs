//! Reference-based image quality metrics on magnitude images, and reports.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ComplexGrid;
use crate::io::{data_path, header_path, read_grid};
use crate::phantom::{Manifest, Split};

/// Value returned when the squared error is negligible relative to the peak.
pub const PSNR_CAP: f64 = 99.0;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn check_pair(reference: &ComplexGrid, test: &ComplexGrid) -> Result<()> {
    if reference.dims() != test.dims() {
        return Err(Error::dims(reference.dims(), test.dims()));
    }
    Ok(())
}

/// PSNR in dB between magnitude images, peak = max |ref|.
pub fn psnr(reference: &ComplexGrid, test: &ComplexGrid) -> Result<f64> {
    check_pair(reference, test)?;
    psnr_magnitude(&reference.magnitude(), &test.magnitude())
}

pub fn psnr_magnitude(reference: &[f64], test: &[f64]) -> Result<f64> {
    if reference.len() != test.len() {
        return Err(Error::dims(&[reference.len()], &[test.len()]));
    }
    let peak = reference.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return Err(Error::InvalidArgument("PSNR reference is identically zero".into()));
    }
    let mse = reference.iter().zip(test).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / reference.len() as f64;
    if mse < 1e-12 * peak * peak {
        return Ok(PSNR_CAP);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

fn gaussian_window() -> Vec<f64> {
    let c = (SSIM_WINDOW / 2) as f64;
    let w: Vec<f64> =
        (0..SSIM_WINDOW).map(|i| (-((i as f64 - c).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Valid-mode separable filtering of an `ny × nx` image.
fn filter_valid(img: &[f64], ny: usize, nx: usize, w: &[f64]) -> Vec<f64> {
    let k = w.len();
    let (oy, ox) = (ny - k + 1, nx - k + 1);
    let mut rows = vec![0.0; ny * ox];
    for y in 0..ny {
        for x in 0..ox {
            rows[y * ox + x] = (0..k).map(|j| w[j] * img[y * nx + x + j]).sum();
        }
    }
    let mut out = vec![0.0; oy * ox];
    for y in 0..oy {
        for x in 0..ox {
            out[y * ox + x] = (0..k).map(|j| w[j] * rows[(y + j) * ox + x]).sum();
        }
    }
    out
}

/// Mean SSIM between magnitude images with dynamic range `max |ref|`.
pub fn ssim(reference: &ComplexGrid, test: &ComplexGrid) -> Result<f64> {
    check_pair(reference, test)?;
    let range = reference.max_abs();
    if range == 0.0 {
        return Err(Error::InvalidArgument("SSIM reference is identically zero".into()));
    }
    ssim_with_range(reference, test, range)
}

/// Mean SSIM with an externally fixed dynamic range, symmetric in its inputs.
pub fn ssim_with_range(reference: &ComplexGrid, test: &ComplexGrid, range: f64) -> Result<f64> {
    check_pair(reference, test)?;
    if reference.rank() != 2 {
        return Err(Error::InvalidArgument(format!("SSIM needs a 2D image, got dims {:?}", reference.dims())));
    }
    let (ny, nx) = (reference.dims()[0], reference.dims()[1]);
    ssim_magnitude(&reference.magnitude(), &test.magnitude(), ny, nx, range)
}

pub fn ssim_magnitude(a: &[f64], b: &[f64], ny: usize, nx: usize, range: f64) -> Result<f64> {
    if ny < SSIM_WINDOW || nx < SSIM_WINDOW {
        return Err(Error::InvalidArgument(format!("image {ny}x{nx} is smaller than the {SSIM_WINDOW}-pixel window")));
    }
    if a.len() != ny * nx || b.len() != ny * nx {
        return Err(Error::dims(&[ny * nx], &[a.len().min(b.len())]));
    }
    if !(range > 0.0) {
        return Err(Error::InvalidArgument("SSIM dynamic range must be positive".into()));
    }
    let w = gaussian_window();
    let prod = |f: &dyn Fn(f64, f64) -> f64| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| f(*x, *y)).collect() };
    let mu_a = filter_valid(a, ny, nx, &w);
    let mu_b = filter_valid(b, ny, nx, &w);
    let aa = filter_valid(&prod(&|x, _| x * x), ny, nx, &w);
    let bb = filter_valid(&prod(&|_, y| y * y), ny, nx, &w);
    let ab = filter_valid(&prod(&|x, y| x * y), ny, nx, &w);
    let c1 = (SSIM_K1 * range).powi(2);
    let c2 = (SSIM_K2 * range).powi(2);
    let mut total = 0.0;
    for i in 0..mu_a.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = aa[i] - ma * ma;
        let vb = bb[i] - mb * mb;
        let cov = ab[i] - ma * mb;
        total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    Ok(total / mu_a.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub record: String,
    pub method: String,
    pub psnr: f64,
    pub ssim: f64,
}

/// Aggregates over one method; `std` is the population standard deviation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub count: usize,
    pub psnr_mean: f64,
    pub psnr_std: f64,
    pub ssim_mean: f64,
    pub ssim_std: f64,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// The dataset manifest the rows refer to.
    pub manifest: String,
    pub rows: Vec<MetricRow>,
    pub summaries: Vec<MethodSummary>,
}

impl MetricReport {
    pub fn from_rows(manifest: impl Into<String>, rows: Vec<MetricRow>) -> MetricReport {
        let mut methods: Vec<String> = Vec::new();
        for r in &rows {
            if !methods.contains(&r.method) {
                methods.push(r.method.clone());
            }
        }
        let summaries = methods
            .into_iter()
            .map(|m| {
                let sel: Vec<&MetricRow> = rows.iter().filter(|r| r.method == m).collect();
                let (psnr_mean, psnr_std) = mean_std(&sel.iter().map(|r| r.psnr).collect::<Vec<_>>());
                let (ssim_mean, ssim_std) = mean_std(&sel.iter().map(|r| r.ssim).collect::<Vec<_>>());
                MethodSummary { method: m, count: sel.len(), psnr_mean, psnr_std, ssim_mean, ssim_std }
            })
            .collect();
        MetricReport { manifest: manifest.into(), rows, summaries }
    }

    pub fn summary(&self, method: &str) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.method == method)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_table(&self) -> String {
        let width = self.rows.iter().map(|r| r.method.len()).chain(self.summaries.iter().map(|s| s.method.len()));
        let mw = width.max().unwrap_or(6).max(6);
        let rw = self.rows.iter().map(|r| r.record.len()).max().unwrap_or(6).max(6);
        let mut out = String::new();
        let _ = writeln!(out, "{:<rw$}  {:<mw$}  {:>9}  {:>7}", "record", "method", "PSNR(dB)", "SSIM");
        for r in &self.rows {
            let _ = writeln!(out, "{:<rw$}  {:<mw$}  {:>9.3}  {:>7.4}", r.record, r.method, r.psnr, r.ssim);
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "{:<mw$}  {:>5}  {:>16}  {:>16}", "method", "n", "PSNR mean±std", "SSIM mean±std");
        for s in &self.summaries {
            let _ = writeln!(
                out,
                "{:<mw$}  {:>5}  {:>8.3}±{:<7.3}  {:>8.4}±{:<7.4}",
                s.method, s.count, s.psnr_mean, s.psnr_std, s.ssim_mean, s.ssim_std
            );
        }
        out
    }

    pub fn write(&self, json_path: impl AsRef<Path>) -> Result<()> {
        let p = json_path.as_ref();
        std::fs::write(p, self.to_json()).map_err(|e| Error::io(p, e))?;
        let txt = p.with_extension("txt");
        std::fs::write(&txt, self.to_table()).map_err(|e| Error::io(&txt, e))
    }
}

pub fn metric_row(record: &str, method: &str, truth: &ComplexGrid, output: &ComplexGrid) -> Result<MetricRow> {
    Ok(MetricRow {
        record: record.to_string(),
        method: method.to_string(),
        psnr: psnr(truth, output)?,
        ssim: ssim(truth, output)?,
    })
}

/// Score `<outputs>/<record id>` grids against the ground truth of every test record.
pub fn evaluate(manifest: &Manifest, outputs: impl AsRef<Path>, method: &str) -> Result<MetricReport> {
    let outputs = outputs.as_ref();
    let mut rows = Vec::new();
    for entry in manifest.entries(Split::Test) {
        let out_path = outputs.join(&entry.id);
        if !header_path(&out_path).exists() || !data_path(&out_path).exists() {
            return Err(Error::MissingRecord(format!("{} (expected {})", entry.id, out_path.display())));
        }
        let truth = read_grid(manifest.root.join(&entry.truth))?;
        let output = read_grid(&out_path)?;
        rows.push(metric_row(&entry.id, method, &truth, &output)?);
    }
    Ok(MetricReport::from_rows(manifest.path().display().to_string(), rows))
}
