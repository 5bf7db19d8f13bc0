//! Synthetic ground truth, coil maps, retrospective acquisition and datasets.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::{dft, idft, trailing_axes};
use crate::grid::{num_elements, ComplexGrid, Domain};
use crate::io::{read_grid, write_grid};
use crate::mask::{generate_mask, MaskKind, MaskSpec, SamplingMask};
use crate::ops::{crop_kspace, zeropad_kspace, ForwardModel, SensitivitySet};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

/// Upper bound on `|∂map/∂u|` for generated coil maps, where `u` is the
/// normalized field-of-view coordinate spanning [-1, 1) on each axis.
pub const SENS_GRADIENT_BOUND: f64 = 4.0;

const EDGE_WIDTH: f64 = 0.03;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub hr_dims: Vec<usize>,
    pub n_shapes: usize,
    /// Per-shape amplitude range, within [0, 1].
    pub intensity_range: (f64, f64),
    /// Give each shape its own constant phase.
    pub complex_phase: bool,
    pub seed: u64,
    /// Standard deviation of the k-space noise, per real/imaginary component.
    pub noise_std: f64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        PhantomSpec {
            hr_dims: vec![64, 64],
            n_shapes: 8,
            intensity_range: (0.1, 1.0),
            complex_phase: false,
            seed: 0,
            noise_std: 0.01,
        }
    }
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        if self.hr_dims.len() != 2 || self.hr_dims.contains(&0) {
            return Err(Error::InvalidArgument(format!("phantom dims must be 2D and positive: {:?}", self.hr_dims)));
        }
        let (lo, hi) = self.intensity_range;
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
            return Err(Error::InvalidArgument(format!("intensity range must lie in [0,1]: {lo}..{hi}")));
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::InvalidArgument("noise std must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Normalized coordinate of pixel `i` on an axis of length `n`: 0 at the center index.
fn norm_coord(i: usize, n: usize) -> f64 {
    (i as f64 - (n / 2) as f64) / (n as f64 / 2.0)
}

struct Ellipse {
    cy: f64,
    cx: f64,
    ay: f64,
    ax: f64,
    angle: f64,
    value: Complex64,
}

impl Ellipse {
    fn weight(&self, u: f64, v: f64) -> f64 {
        let (s, c) = self.angle.sin_cos();
        let dy = u - self.cy;
        let dx = v - self.cx;
        let ry = (c * dy - s * dx) / self.ay;
        let rx = (s * dy + c * dx) / self.ax;
        let rho = (ry * ry + rx * rx).sqrt();
        0.5 * (1.0 + ((1.0 - rho) / EDGE_WIDTH).tanh())
    }
}

/// Soft-edged random ellipses summed then clamped to unit magnitude.
/// The first shape is a large "body" ellipse, later ones are smaller inclusions.
pub fn make_phantom(spec: &PhantomSpec) -> Result<ComplexGrid> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (lo, hi) = spec.intensity_range;
    let mut shapes = Vec::with_capacity(spec.n_shapes);
    for k in 0..spec.n_shapes {
        let amp = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        let phase = if spec.complex_phase { rng.random_range(-1.0..1.0) } else { 0.0 };
        let angle = rng.random_range(0.0..std::f64::consts::PI);
        let shape = if k == 0 {
            Ellipse {
                cy: rng.random_range(-0.05..0.05),
                cx: rng.random_range(-0.05..0.05),
                ay: rng.random_range(0.65..0.85),
                ax: rng.random_range(0.55..0.8),
                angle,
                value: Complex64::from_polar(amp, phase),
            }
        } else {
            Ellipse {
                cy: rng.random_range(-0.5..0.5),
                cx: rng.random_range(-0.5..0.5),
                ay: rng.random_range(0.05..0.35),
                ax: rng.random_range(0.05..0.35),
                angle,
                value: Complex64::from_polar(amp * 0.5, phase),
            }
        };
        shapes.push(shape);
    }
    let (ny, nx) = (spec.hr_dims[0], spec.hr_dims[1]);
    Ok(ComplexGrid::from_fn(&spec.hr_dims, Domain::Image, |idx| {
        let u = norm_coord(idx[0], ny);
        let v = norm_coord(idx[1], nx);
        let sum: Complex64 = shapes.iter().map(|s| s.value * s.weight(u, v)).sum();
        let m = sum.norm();
        if m > 1.0 {
            // Shrink a hair below 1 so rounding in |v| never reports > 1.
            sum * ((1.0 - 4.0 * f64::EPSILON) / m)
        } else {
            sum
        }
    }))
}

/// Smooth Gaussian-profiled coils on a ring around the field of view,
/// RSS-normalized to exactly 1 and phase-referenced to coil 0.
pub fn make_sens(hr_dims: &[usize], n_coils: usize, seed: u64) -> Result<SensitivitySet> {
    if n_coils == 0 {
        return Err(Error::InvalidArgument("need at least one coil".into()));
    }
    if hr_dims.len() != 2 || hr_dims.contains(&0) {
        return Err(Error::InvalidArgument(format!("coil maps need 2D dims, got {hr_dims:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    struct Coil {
        py: f64,
        px: f64,
        width: f64,
        phase0: f64,
        ky: f64,
        kx: f64,
    }
    let coils: Vec<Coil> = (0..n_coils)
        .map(|c| {
            let theta = std::f64::consts::TAU * c as f64 / n_coils as f64 + rng.random_range(-0.2..0.2);
            let radius = rng.random_range(1.3..1.6);
            Coil {
                py: radius * theta.sin(),
                px: radius * theta.cos(),
                width: rng.random_range(0.9..1.2),
                phase0: rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
                ky: rng.random_range(-0.8..0.8),
                kx: rng.random_range(-0.8..0.8),
            }
        })
        .collect();
    let (ny, nx) = (hr_dims[0], hr_dims[1]);
    let mut dims = vec![n_coils];
    dims.extend_from_slice(hr_dims);
    let raw = ComplexGrid::from_fn(&dims, Domain::Image, |idx| {
        let coil = &coils[idx[0]];
        let u = norm_coord(idx[1], ny);
        let v = norm_coord(idx[2], nx);
        let d2 = (u - coil.py).powi(2) + (v - coil.px).powi(2);
        let amp = (-d2 / (2.0 * coil.width * coil.width)).exp();
        Complex64::from_polar(amp, coil.phase0 + coil.ky * u + coil.kx * v)
    });
    phase_referenced(SensitivitySet::normalize(raw, 0.0)?)
}

/// Rotate every voxel so coil 0 is real and nonnegative.
fn phase_referenced(s: SensitivitySet) -> Result<SensitivitySet> {
    let mut maps = s.maps().clone();
    let n = num_elements(s.spatial_dims());
    let refs: Vec<Complex64> = maps.data()[..n]
        .iter()
        .map(|m| if m.norm() > 0.0 { m.conj() / m.norm() } else { Complex64::new(1.0, 0.0) })
        .collect();
    for (i, v) in maps.data_mut().iter_mut().enumerate() {
        *v *= refs[i % n];
    }
    SensitivitySet::new(maps)
}

/// Retrospective acquisition `y = M H F C x + b` with complex Gaussian noise
/// (std `noise_std` per component) on sampled locations only.
pub fn acquire(
    x: &ComplexGrid,
    sens: &SensitivitySet,
    mask: &SamplingMask,
    lr_dims: &[usize],
    noise_std: f64,
    seed: u64,
) -> Result<ComplexGrid> {
    if mask.dims() != lr_dims {
        return Err(Error::dims(lr_dims, mask.dims()));
    }
    if !(noise_std >= 0.0) {
        return Err(Error::InvalidArgument("noise std must be nonnegative".into()));
    }
    let model = ForwardModel::new(mask.clone(), sens.clone())?;
    let mut y = model.forward(x)?;
    if noise_std > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = mask.sampled().len();
        for (i, v) in y.data_mut().iter_mut().enumerate() {
            if mask.sampled()[i % n] {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                *v += Complex64::new(re, im) * noise_std;
            }
        }
    }
    Ok(y)
}

/// Low-resolution coil-map estimate from a fully sampled calibration block:
/// per-coil inverse DFT of the zero-padded block, divided by the RSS over coils.
/// Voxels whose RSS is at most `eps_rel * max(RSS)` get zero maps.
pub fn estimate_sens_lowres(y_center: &ComplexGrid, hr_dims: &[usize], eps_rel: f64) -> Result<SensitivitySet> {
    if y_center.rank() != hr_dims.len() + 1 {
        return Err(Error::dims(hr_dims, y_center.dims()));
    }
    let padded = zeropad_kspace(y_center, hr_dims)?;
    let images = idft(&padded, &trailing_axes(padded.rank(), 1))?;
    let rss_max = {
        let n = num_elements(hr_dims);
        let mut acc = vec![0.0; n];
        for (i, v) in images.data().iter().enumerate() {
            acc[i % n] += v.norm_sqr();
        }
        acc.into_iter().fold(0.0, f64::max).sqrt()
    };
    let eps = eps_rel * rss_max;
    let set = SensitivitySet::normalize(images, eps)?;
    if rss_max == 0.0 {
        return Ok(set);
    }
    phase_referenced(set)
}

/// The fully sampled calibration block `[coil, ...center]` of LR k-space data.
pub fn calibration_block(y: &ComplexGrid, center_size: &[usize]) -> Result<ComplexGrid> {
    crop_kspace(y, center_size)
}

/// Resample coil maps to another grid by centered k-space crop/pad, then
/// renormalize to unit RSS.
pub fn resample_sens(sens: &SensitivitySet, dims: &[usize]) -> Result<SensitivitySet> {
    let axes = trailing_axes(sens.maps().rank(), 1);
    let k = dft(sens.maps(), &axes)?;
    let spatial = sens.spatial_dims();
    let k = if dims.iter().zip(spatial).all(|(d, s)| d <= s) {
        crop_kspace(&k, dims)?
    } else if dims.iter().zip(spatial).all(|(d, s)| d >= s) {
        zeropad_kspace(&k, dims)?
    } else {
        return Err(Error::InvalidArgument(format!("cannot resample {spatial:?} to mixed {dims:?}")));
    };
    let maps = idft(&k, &axes)?;
    let rss_max = maps.max_abs();
    SensitivitySet::normalize(maps, 1e-9 * rss_max.max(1e-300))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    /// Template for every record; its `seed` is replaced per record.
    pub phantom: PhantomSpec,
    pub n_coils: usize,
    pub mask_kind: MaskKind,
    /// LR-grid mask shared by all records; `mask.dims` are the LR dims.
    pub mask: MaskSpec,
    pub n_records: usize,
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            phantom: PhantomSpec::default(),
            n_coils: 8,
            mask_kind: MaskKind::Poisson,
            mask: MaskSpec::new(&[32, 32], 4.0, &[8, 8], 0),
            n_records: 10,
            train_fraction: 0.8,
            val_fraction: 0.0,
            seed: 0,
        }
    }
}

impl DatasetSpec {
    pub fn lr_dims(&self) -> &[usize] {
        &self.mask.dims
    }

    pub fn split_counts(&self) -> (usize, usize, usize) {
        let n = self.n_records;
        let train = ((n as f64) * self.train_fraction).round() as usize;
        let val = (((n as f64) * self.val_fraction).round() as usize).min(n - train.min(n));
        let train = train.min(n);
        (train, val, n - train - val)
    }

    pub fn validate(&self) -> Result<()> {
        self.phantom.validate()?;
        if self.n_coils == 0 {
            return Err(Error::InvalidArgument("need at least one coil".into()));
        }
        if self.lr_dims().len() != 2 || self.lr_dims().iter().zip(&self.phantom.hr_dims).any(|(l, h)| l > h) {
            return Err(Error::InvalidArgument(format!(
                "LR dims {:?} must be 2D and fit in HR dims {:?}",
                self.lr_dims(),
                self.phantom.hr_dims
            )));
        }
        let ok = |f: f64| (0.0..=1.0).contains(&f);
        if !ok(self.train_fraction) || !ok(self.val_fraction) || self.train_fraction + self.val_fraction > 1.0 {
            return Err(Error::InvalidArgument("split fractions must lie in [0,1] and sum to at most 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordEntry {
    pub id: String,
    pub split: Split,
    pub phantom_seed: u64,
    pub sens_seed: u64,
    pub noise_seed: u64,
    /// Paths relative to the manifest directory.
    pub truth: String,
    pub sens: String,
    pub kspace: String,
    pub mask: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub spec: DatasetSpec,
    pub records: Vec<RecordEntry>,
    #[serde(skip)]
    pub root: PathBuf,
}

/// One loaded, dimension-checked record.
#[derive(Clone, Debug)]
pub struct Record {
    pub id: String,
    pub split: Split,
    pub truth: ComplexGrid,
    pub sens: SensitivitySet,
    pub kspace: ComplexGrid,
    pub mask: SamplingMask,
}

impl Record {
    pub fn model(&self) -> Result<ForwardModel> {
        ForwardModel::new(self.mask.clone(), self.sens.clone())
    }

    pub fn validate(&self) -> Result<()> {
        let hr = self.sens.spatial_dims();
        self.truth.check_dims(hr)?;
        let mut kd = vec![self.sens.n_coils()];
        kd.extend_from_slice(self.mask.dims());
        self.kspace.check_dims(&kd)?;
        if self.mask.dims().iter().zip(hr).any(|(l, h)| l > h) {
            return Err(Error::InvalidArgument(format!("record {}: LR mask exceeds HR grid", self.id)));
        }
        Ok(())
    }
}

fn record_seeds(global: u64, n: usize) -> Vec<(u64, u64, u64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(global);
    (0..n).map(|_| (rng.random(), rng.random(), rng.random())).collect()
}

/// Shared LR mask for a [`DatasetSpec`].
pub fn dataset_mask(spec: &DatasetSpec) -> Result<SamplingMask> {
    generate_mask(spec.mask_kind, &spec.mask)
}

/// Generate record `entry` in memory from the dataset seeds alone.
pub fn generate_record(spec: &DatasetSpec, mask: &SamplingMask, entry: &RecordEntry) -> Result<Record> {
    let phantom = PhantomSpec { seed: entry.phantom_seed, ..spec.phantom.clone() };
    let mut truth = make_phantom(&phantom)?;
    let peak = truth.max_abs();
    if peak > 0.0 {
        truth = truth.scale_real(1.0 / peak);
    }
    let sens = make_sens(&spec.phantom.hr_dims, spec.n_coils, entry.sens_seed)?;
    let kspace = acquire(&truth, &sens, mask, mask.dims(), spec.phantom.noise_std, entry.noise_seed)?;
    let record = Record { id: entry.id.clone(), split: entry.split, truth, sens, kspace, mask: mask.clone() };
    record.validate()?;
    Ok(record)
}

/// Generate every record and write grids plus `manifest.json` under `out_dir`.
pub fn build_dataset(spec: &DatasetSpec, out_dir: impl AsRef<Path>) -> Result<Manifest> {
    spec.validate()?;
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let (n_train, n_val, _) = spec.split_counts();
    let mut records = Vec::with_capacity(spec.n_records);
    for (i, (phantom_seed, sens_seed, noise_seed)) in record_seeds(spec.seed, spec.n_records).into_iter().enumerate() {
        let id = format!("rec{i:05}");
        let split = if i < n_train {
            Split::Train
        } else if i < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        };
        records.push(RecordEntry {
            truth: format!("records/{id}_truth"),
            sens: format!("records/{id}_sens"),
            kspace: format!("records/{id}_kspace"),
            mask: "mask".to_string(),
            id,
            split,
            phantom_seed,
            sens_seed,
            noise_seed,
        });
    }
    let manifest =
        Manifest { schema_version: MANIFEST_SCHEMA_VERSION, spec: spec.clone(), records, root: out_dir.to_path_buf() };
    if !manifest.records.is_empty() {
        let mask = dataset_mask(spec)?;
        write_grid(out_dir.join("mask"), &mask.to_grid())?;
        for entry in &manifest.records {
            let rec = generate_record(spec, &mask, entry)?;
            write_grid(out_dir.join(&entry.truth), &rec.truth)?;
            write_grid(out_dir.join(&entry.sens), rec.sens.maps())?;
            write_grid(out_dir.join(&entry.kspace), &rec.kspace)?;
        }
    }
    manifest.save()?;
    Ok(manifest)
}

impl Manifest {
    pub fn path(&self) -> PathBuf {
        self.root.join(MANIFEST_FILE)
    }

    pub fn save(&self) -> Result<()> {
        let path = self.path();
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Json { path: path.clone(), source: e })?;
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    /// Load from a manifest file or a directory containing `manifest.json`.
    pub fn load(path: impl AsRef<Path>) -> Result<Manifest> {
        let path = path.as_ref();
        let file = if path.is_dir() { path.join(MANIFEST_FILE) } else { path.to_path_buf() };
        let text = fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
        let mut m: Manifest = serde_json::from_str(&text).map_err(|e| Error::Json { path: file.clone(), source: e })?;
        if m.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(Error::Manifest(format!("unsupported schema version {}", m.schema_version)));
        }
        m.root = file.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(m)
    }

    pub fn entries(&self, split: Split) -> impl Iterator<Item = &RecordEntry> {
        self.records.iter().filter(move |r| r.split == split)
    }

    pub fn load_record(&self, entry: &RecordEntry) -> Result<Record> {
        let mask = SamplingMask::from_grid(&read_grid(self.root.join(&entry.mask))?)?;
        let record = Record {
            id: entry.id.clone(),
            split: entry.split,
            truth: read_grid(self.root.join(&entry.truth))?,
            sens: SensitivitySet::new(read_grid(self.root.join(&entry.sens))?)?,
            kspace: read_grid(self.root.join(&entry.kspace))?,
            mask,
        };
        record.validate()?;
        Ok(record)
    }

    pub fn load_split(&self, split: Split) -> Result<Vec<Record>> {
        self.entries(split).map(|e| self.load_record(e)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::poisson_disk_mask;

    fn spec(seed: u64, n_shapes: usize) -> PhantomSpec {
        PhantomSpec { seed, n_shapes, ..PhantomSpec::default() }
    }

    #[test]
    fn zero_shapes_zero_image() {
        assert_eq!(make_phantom(&spec(1, 0)).unwrap().norm_sqr(), 0.0);
    }

    #[test]
    fn phantom_deterministic_and_bounded() {
        assert_eq!(make_phantom(&spec(5, 6)).unwrap(), make_phantom(&spec(5, 6)).unwrap());
        let mut worst: f64 = 0.0;
        for seed in 0..100 {
            let p = PhantomSpec { complex_phase: seed % 2 == 0, n_shapes: 12, ..spec(seed, 12) };
            worst = worst.max(make_phantom(&p).unwrap().max_abs());
        }
        assert!(worst <= 1.0);
    }

    #[test]
    fn single_coil_is_all_ones() {
        let s = make_sens(&[16, 16], 1, 3).unwrap();
        for v in s.maps().data() {
            assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn eight_coil_rss_is_one() {
        let s = make_sens(&[64, 64], 8, 3).unwrap();
        assert!(s.rss().iter().all(|r| (r - 1.0).abs() < 1e-6));
    }

    #[test]
    fn maps_are_smooth() {
        for seed in 0..5 {
            let s = make_sens(&[64, 64], 8, seed).unwrap();
            let step = 2.0 / 64.0;
            let m = s.maps();
            let mut worst: f64 = 0.0;
            for c in 0..8 {
                for y in 0..64 {
                    for x in 0..64 {
                        let v = m.get(&[c, y, x]);
                        if y + 1 < 64 {
                            worst = worst.max((m.get(&[c, y + 1, x]) - v).norm() / step);
                        }
                        if x + 1 < 64 {
                            worst = worst.max((m.get(&[c, y, x + 1]) - v).norm() / step);
                        }
                    }
                }
            }
            assert!(worst < SENS_GRADIENT_BOUND, "max gradient {worst}");
        }
    }

    fn setup() -> (ComplexGrid, SensitivitySet, SamplingMask) {
        let x = make_phantom(&spec(3, 6)).unwrap();
        let s = make_sens(&[64, 64], 8, 4).unwrap();
        let m = poisson_disk_mask(&MaskSpec::new(&[32, 32], 4.0, &[8, 8], 5)).unwrap();
        (x, s, m)
    }

    #[test]
    fn noiseless_acquisition_is_forward() {
        let (x, s, m) = setup();
        let y = acquire(&x, &s, &m, &[32, 32], 0.0, 1).unwrap();
        let model = ForwardModel::new(m.clone(), s.clone()).unwrap();
        assert_eq!(y, model.forward(&x).unwrap());
        let zero = ComplexGrid::zeros(&[64, 64], Domain::Image);
        assert_eq!(acquire(&zero, &s, &m, &[32, 32], 0.0, 1).unwrap().norm_sqr(), 0.0);
        // End-to-end consistency: A*y == A*A x.
        let diff = model.adjoint(&y).unwrap().sub(&model.normal(&x).unwrap()).unwrap();
        assert!(diff.norm() < 1e-12);
    }

    #[test]
    fn noise_statistics() {
        let m = SamplingMask::full(&[100, 100]);
        let s = make_sens(&[100, 100], 1, 0).unwrap();
        let zero = ComplexGrid::zeros(&[100, 100], Domain::Image);
        let sigma = 0.05;
        let y = acquire(&zero, &s, &m, &[100, 100], sigma, 9).unwrap();
        let n = (2 * y.len()) as f64;
        let var = y.data().iter().map(|v| v.re * v.re + v.im * v.im).sum::<f64>() / n;
        assert!((var.sqrt() - sigma).abs() / sigma < 0.05);
        // Unsampled points stay exactly zero.
        let (x, s, mk) = setup();
        let y = acquire(&x, &s, &mk, &[32, 32], 0.1, 2).unwrap();
        for (i, v) in y.data().iter().enumerate() {
            if !mk.sampled()[i % 1024] {
                assert_eq!(*v, Complex64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn lowres_estimate_single_coil() {
        let x = make_phantom(&PhantomSpec { hr_dims: vec![32, 32], ..spec(2, 5) }).unwrap();
        let s = make_sens(&[32, 32], 1, 0).unwrap();
        let y = acquire(&x, &s, &SamplingMask::full(&[32, 32]), &[32, 32], 0.0, 0).unwrap();
        let est = estimate_sens_lowres(&calibration_block(&y, &[12, 12]).unwrap(), &[32, 32], 0.05).unwrap();
        for v in est.maps().data() {
            assert!(v.norm() == 0.0 || (v - Complex64::new(1.0, 0.0)).norm() < 1e-9);
        }
    }

    #[test]
    fn lowres_estimate_recovers_smooth_maps() {
        let (x, s, _) = setup();
        let full = SamplingMask::full(&[64, 64]);
        let y = acquire(&x, &s, &full, &[64, 64], 0.0, 0).unwrap();
        let est = estimate_sens_lowres(&calibration_block(&y, &[24, 24]).unwrap(), &[64, 64], 0.05).unwrap();
        let rss = est.rss();
        let mut worst: f64 = 0.0;
        for (i, &r) in rss.iter().enumerate() {
            if r > 0.5 && x.data()[i].norm() > 0.1 {
                for c in 0..8 {
                    let a = est.maps().data()[c * 4096 + i];
                    let b = s.maps().data()[c * 4096 + i];
                    worst = worst.max((a - b).norm());
                }
            }
        }
        assert!(worst < 0.1, "max map error {worst}");
    }

    #[test]
    fn lowres_estimate_of_zero() {
        let z = ComplexGrid::zeros(&[4, 8, 8], Domain::Kspace);
        let est = estimate_sens_lowres(&z, &[32, 32], 0.05).unwrap();
        assert_eq!(est.maps().norm_sqr(), 0.0);
    }

    #[test]
    fn resample_sens_is_smooth_and_normalized() {
        let s = make_sens(&[64, 64], 4, 1).unwrap();
        let lr = resample_sens(&s, &[32, 32]).unwrap();
        assert!(lr.rss().iter().all(|r| (r - 1.0).abs() < 1e-6));
        let direct = make_sens(&[32, 32], 4, 1).unwrap();
        // Crop ringing concentrates at the FOV border; compare the interior.
        let mut err: f64 = 0.0;
        for c in 0..4 {
            for y in 6..26 {
                for x in 6..26 {
                    err = err.max((lr.maps().get(&[c, y, x]) - direct.maps().get(&[c, y, x])).norm());
                }
            }
        }
        assert!(err < 0.05, "resampled vs directly generated maps differ by {err}");
    }

    #[test]
    fn dataset_splits_and_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let spec = DatasetSpec {
            phantom: PhantomSpec { hr_dims: vec![32, 32], ..PhantomSpec::default() },
            n_coils: 4,
            mask: MaskSpec::new(&[16, 16], 2.0, &[4, 4], 1),
            n_records: 10,
            ..DatasetSpec::default()
        };
        let m = build_dataset(&spec, dir.path()).unwrap();
        assert_eq!(m.entries(Split::Train).count(), 8);
        assert_eq!(m.entries(Split::Test).count(), 2);
        let loaded = Manifest::load(dir.path()).unwrap();
        assert_eq!(loaded.records, m.records);
        let mask = dataset_mask(&loaded.spec).unwrap();
        for entry in &loaded.records {
            let on_disk = loaded.load_record(entry).unwrap();
            let regen = generate_record(&loaded.spec, &mask, entry).unwrap();
            assert_eq!(on_disk.truth, regen.truth);
            assert_eq!(on_disk.kspace, regen.kspace);
            assert_eq!(on_disk.sens.maps(), regen.sens.maps());
            assert!((on_disk.truth.max_abs() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_dataset_writes_no_records() {
        let dir = tempfile::tempdir().unwrap();
        let spec = DatasetSpec { n_records: 0, ..DatasetSpec::default() };
        let m = build_dataset(&spec, dir.path()).unwrap();
        assert!(m.records.is_empty());
        let files: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(files, vec![std::ffi::OsString::from(MANIFEST_FILE)]);
    }
}
