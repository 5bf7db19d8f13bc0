//! Undersampling masks over 2D phase-encode grids.
//!
//! Every generator samples a fully populated central calibration block; the
//! variable-density Poisson-disk generator fills the rest by dart throwing
//! with a radius that grows linearly with distance from the k-space center,
//! then bisects on the base radius until the requested acceleration is met.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{centered_start, num_elements, ComplexGrid, Domain};

const POISSON_ATTEMPTS: usize = 30;
const MAX_BISECTIONS: usize = 30;

#[derive(Clone, Debug, PartialEq)]
pub struct SamplingMask {
    dims: Vec<usize>,
    sampled: Vec<bool>,
    center_size: Vec<usize>,
    achieved_af: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskKind {
    Poisson,
    Uniform,
    Center,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskSpec {
    pub dims: Vec<usize>,
    pub target_af: f64,
    pub center_size: Vec<usize>,
    pub seed: u64,
    /// Allowed relative deviation of the achieved AF from `target_af`.
    pub af_tolerance: f64,
    /// Radius growth: `r(d) = r0 * (1 + radius_growth * d / d_max)`.
    pub radius_growth: f64,
}

impl MaskSpec {
    pub fn new(dims: &[usize], target_af: f64, center_size: &[usize], seed: u64) -> Self {
        MaskSpec {
            dims: dims.to_vec(),
            target_af,
            center_size: center_size.to_vec(),
            seed,
            af_tolerance: 0.05,
            radius_growth: 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.len() != 2 || self.dims.contains(&0) {
            return Err(Error::InvalidArgument(format!("mask dims must be 2D and positive, got {:?}", self.dims)));
        }
        if self.center_size.len() != 2 || self.center_size.iter().zip(&self.dims).any(|(c, d)| c > d) {
            return Err(Error::InvalidArgument(format!(
                "center {:?} must be 2D and fit in {:?}",
                self.center_size, self.dims
            )));
        }
        if !(self.target_af >= 1.0) || !self.target_af.is_finite() {
            return Err(Error::InvalidArgument(format!("target AF must be >= 1, got {}", self.target_af)));
        }
        if !(self.af_tolerance >= 0.0) {
            return Err(Error::InvalidArgument("AF tolerance must be nonnegative".into()));
        }
        if !(self.radius_growth >= 0.0) {
            return Err(Error::InvalidArgument("radius growth must be nonnegative".into()));
        }
        let total = num_elements(&self.dims) as f64;
        let center = num_elements(&self.center_size) as f64;
        let max_af = if center > 0.0 { total / center } else { total };
        if self.target_af > max_af {
            return Err(Error::UnachievableAf {
                target: self.target_af,
                max: max_af,
                center: self.center_size.clone(),
            });
        }
        Ok(())
    }

    fn target_count(&self) -> usize {
        (num_elements(&self.dims) as f64 / self.target_af).ceil() as usize
    }
}

impl SamplingMask {
    pub fn from_sampled(dims: &[usize], sampled: Vec<bool>, center_size: &[usize]) -> Result<Self> {
        if sampled.len() != num_elements(dims) {
            return Err(Error::InvalidArgument("mask length does not match dims".into()));
        }
        let count = sampled.iter().filter(|&&s| s).count();
        if count == 0 {
            return Err(Error::EmptyMask);
        }
        Ok(SamplingMask {
            dims: dims.to_vec(),
            achieved_af: num_elements(dims) as f64 / count as f64,
            sampled,
            center_size: center_size.to_vec(),
        })
    }

    pub fn full(dims: &[usize]) -> Self {
        SamplingMask {
            dims: dims.to_vec(),
            sampled: vec![true; num_elements(dims)],
            center_size: dims.to_vec(),
            achieved_af: 1.0,
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn sampled(&self) -> &[bool] {
        &self.sampled
    }

    pub fn center_size(&self) -> &[usize] {
        &self.center_size
    }

    pub fn achieved_af(&self) -> f64 {
        self.achieved_af
    }

    pub fn count(&self) -> usize {
        self.sampled.iter().filter(|&&s| s).count()
    }

    pub fn is_sampled(&self, idx: &[usize]) -> bool {
        let o = idx.iter().zip(&self.dims).fold(0, |acc, (&i, &d)| acc * d + i);
        self.sampled[o]
    }

    /// Sampled positions as (row, col) pairs; only for 2D masks.
    pub fn points(&self) -> Vec<(usize, usize)> {
        let nx = self.dims[1];
        self.sampled.iter().enumerate().filter(|(_, &s)| s).map(|(i, _)| (i / nx, i % nx)).collect()
    }

    /// Real part 1 at sampled points, 0 elsewhere.
    pub fn to_grid(&self) -> ComplexGrid {
        let data = self.sampled.iter().map(|&s| Complex64::new(if s { 1.0 } else { 0.0 }, 0.0)).collect();
        ComplexGrid::from_vec(&self.dims, data, Domain::Kspace).expect("mask dims are valid")
    }

    /// Inverse of [`to_grid`](Self::to_grid). The center size is recovered
    /// as the largest fully sampled centered block.
    pub fn from_grid(g: &ComplexGrid) -> Result<Self> {
        let sampled: Vec<bool> = g.data().iter().map(|v| v.re > 0.5).collect();
        let mut mask = SamplingMask::from_sampled(g.dims(), sampled, &vec![0; g.rank()])?;
        mask.center_size = mask.largest_center_block();
        Ok(mask)
    }

    fn block_fully_sampled(&self, size: &[usize]) -> bool {
        let starts: Vec<usize> = self.dims.iter().zip(size).map(|(&d, &s)| centered_start(d, s)).collect();
        let total = num_elements(size);
        let mut idx = vec![0usize; size.len()];
        for _ in 0..total {
            let full: Vec<usize> = idx.iter().zip(&starts).map(|(i, s)| i + s).collect();
            if !self.is_sampled(&full) {
                return false;
            }
            for ax in (0..size.len()).rev() {
                idx[ax] += 1;
                if idx[ax] < size[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
        true
    }

    fn largest_center_block(&self) -> Vec<usize> {
        let mut size = vec![0; self.dims.len()];
        loop {
            let mut grown = false;
            for ax in 0..size.len() {
                if size[ax] < self.dims[ax] {
                    let mut trial = size.clone();
                    trial[ax] += 1;
                    if trial.iter().all(|&t| t > 0) && !self.block_fully_sampled(&trial) {
                        continue;
                    }
                    size = trial;
                    grown = true;
                }
            }
            if !grown {
                break;
            }
        }
        if size.contains(&0) {
            vec![0; size.len()]
        } else {
            size
        }
    }
}

/// `product(target_dims) / sampled points`, the acceleration relative to the
/// voxel count of the image actually being reconstructed.
pub fn equivalent_af(mask: &SamplingMask, target_dims: &[usize]) -> Result<num_rational::Ratio<u64>> {
    let count = mask.count();
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(num_rational::Ratio::new(num_elements(target_dims) as u64, count as u64))
}

struct CenterWindow {
    start: [usize; 2],
    size: [usize; 2],
}

impl CenterWindow {
    fn new(dims: &[usize], size: &[usize]) -> Self {
        CenterWindow {
            start: [centered_start(dims[0], size[0]), centered_start(dims[1], size[1])],
            size: [size[0], size[1]],
        }
    }

    fn contains(&self, y: usize, x: usize) -> bool {
        y >= self.start[0] && y < self.start[0] + self.size[0] && x >= self.start[1] && x < self.start[1] + self.size[1]
    }

    fn fill(&self, sampled: &mut [bool], nx: usize) {
        for y in self.start[0]..self.start[0] + self.size[0] {
            for x in self.start[1]..self.start[1] + self.size[1] {
                sampled[y * nx + x] = true;
            }
        }
    }
}

/// Smallest distance from the k-space center to a cell outside the centered block.
pub fn center_edge_distance(dims: &[usize], center_size: &[usize]) -> f64 {
    dims.iter()
        .zip(center_size)
        .map(|(&d, &n)| {
            let c = d / 2;
            let start = centered_start(d, n);
            let below = if start > 0 { c - (start - 1) } else { usize::MAX };
            let above = if start + n < d { start + n - c } else { usize::MAX };
            below.min(above)
        })
        .min()
        .map(|v| v as f64)
        .unwrap_or(0.0)
}

fn max_center_distance(dims: &[usize]) -> f64 {
    let (cy, cx) = ((dims[0] / 2) as f64, (dims[1] / 2) as f64);
    let dy = cy.max((dims[0] - 1) as f64 - cy);
    let dx = cx.max((dims[1] - 1) as f64 - cx);
    (dy * dy + dx * dx).sqrt().max(1.0)
}

/// Disk radius at a grid position for base radius `r0`.
pub fn poisson_radius(dims: &[usize], r0: f64, growth: f64, y: f64, x: f64) -> f64 {
    let (cy, cx) = ((dims[0] / 2) as f64, (dims[1] / 2) as f64);
    let d = ((y - cy).powi(2) + (x - cx).powi(2)).sqrt();
    r0 * (1.0 + growth * d / max_center_distance(dims))
}

/// One Bridson-style fill outside the center window. Candidates are snapped to
/// grid cells before the distance test, so the guarantee holds on the grid:
/// every accepted pair is at least `max(r(p), r(q))` apart.
fn poisson_fill(dims: &[usize], window: &CenterWindow, r0: f64, growth: f64, seed: u64) -> Vec<bool> {
    let (ny, nx) = (dims[0], dims[1]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut occupied = vec![false; ny * nx];
    let outside: Vec<usize> = (0..ny * nx).filter(|&i| !window.contains(i / nx, i % nx)).collect();
    if outside.is_empty() {
        return occupied;
    }
    let radius = |y: usize, x: usize| poisson_radius(dims, r0, growth, y as f64, x as f64);
    let reach = (r0 * (1.0 + growth)).ceil() as isize;

    let accepts = |occ: &[bool], y: usize, x: usize| -> bool {
        if window.contains(y, x) || occ[y * nx + x] {
            return false;
        }
        let r = radius(y, x);
        for dy in -reach..=reach {
            let qy = y as isize + dy;
            if qy < 0 || qy >= ny as isize {
                continue;
            }
            for dx in -reach..=reach {
                let qx = x as isize + dx;
                if qx < 0 || qx >= nx as isize || !occ[qy as usize * nx + qx as usize] {
                    continue;
                }
                let dist = ((dy * dy + dx * dx) as f64).sqrt();
                if dist < r.max(radius(qy as usize, qx as usize)) {
                    return false;
                }
            }
        }
        true
    };

    let first = outside[rng.random_range(0..outside.len())];
    occupied[first] = true;
    let mut points = vec![(first / nx, first % nx)];
    let mut active = vec![0usize];
    while !active.is_empty() {
        let slot = rng.random_range(0..active.len());
        let (py, px) = points[active[slot]];
        let r = radius(py, px);
        let mut placed = false;
        for _ in 0..POISSON_ATTEMPTS {
            let theta = rng.random_range(0.0..std::f64::consts::TAU);
            let rho = rng.random_range(r..2.0 * r);
            let cy = (py as f64 + rho * theta.sin()).round();
            let cx = (px as f64 + rho * theta.cos()).round();
            if cy < 0.0 || cx < 0.0 || cy >= ny as f64 || cx >= nx as f64 {
                continue;
            }
            let (cy, cx) = (cy as usize, cx as usize);
            if accepts(&occupied, cy, cx) {
                occupied[cy * nx + cx] = true;
                active.push(points.len());
                points.push((cy, cx));
                placed = true;
                break;
            }
        }
        if !placed {
            active.swap_remove(slot);
        }
    }
    occupied
}

/// Variable-density Poisson-disk mask with a fully sampled center block.
pub fn poisson_disk_mask(spec: &MaskSpec) -> Result<SamplingMask> {
    poisson_disk_search(spec).map(|(m, _)| m)
}

/// As [`poisson_disk_mask`], also returning the base radius `r0` the search settled on.
pub fn poisson_disk_search(spec: &MaskSpec) -> Result<(SamplingMask, f64)> {
    spec.validate()?;
    if spec.target_af <= 1.0 {
        return Ok((SamplingMask::full(&spec.dims), 0.0));
    }
    let dims = &spec.dims;
    let nx = dims[1];
    let window = CenterWindow::new(dims, &spec.center_size);
    let target = spec.target_af;
    let build = |r0: f64| -> SamplingMask {
        let mut sampled = poisson_fill(dims, &window, r0, spec.radius_growth, spec.seed);
        window.fill(&mut sampled, nx);
        SamplingMask::from_sampled(dims, sampled, &spec.center_size).expect("center or seed point is sampled")
    };

    let mut lo = 0.5;
    let mut hi = (dims[0].max(dims[1])) as f64;
    let mut best: Option<(SamplingMask, f64)> = None;
    let rel = |m: &SamplingMask| (m.achieved_af - target).abs() / target;
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let mask = build(mid);
        if mask.achieved_af < target {
            lo = mid;
        } else {
            hi = mid;
        }
        let done = rel(&mask) <= spec.af_tolerance * 0.2;
        if best.as_ref().is_none_or(|(b, _)| rel(&mask) < rel(b)) {
            best = Some((mask, mid));
        }
        if done {
            break;
        }
    }
    let (best, r0) = best.expect("at least one bisection step");
    if rel(&best) <= spec.af_tolerance {
        Ok((best, r0))
    } else {
        Err(Error::AfToleranceNotMet { target, achieved: best.achieved_af })
    }
}

/// Center block plus uniformly drawn points, `ceil(N / af)` in total.
pub fn uniform_random_mask(spec: &MaskSpec) -> Result<SamplingMask> {
    spec.validate()?;
    let dims = &spec.dims;
    let nx = dims[1];
    let total = num_elements(dims);
    let window = CenterWindow::new(dims, &spec.center_size);
    let mut sampled = vec![false; total];
    window.fill(&mut sampled, nx);
    let center_count = num_elements(&spec.center_size);
    let want = spec.target_count().max(center_count).max(1);
    let outside: Vec<usize> = (0..total).filter(|&i| !sampled[i]).collect();
    let extra = want - center_count;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for i in rand::seq::index::sample(&mut rng, outside.len(), extra.min(outside.len())) {
        sampled[outside[i]] = true;
    }
    let mask = SamplingMask::from_sampled(dims, sampled, &spec.center_size)?;
    if (mask.achieved_af - spec.target_af).abs() / spec.target_af > spec.af_tolerance {
        return Err(Error::AfToleranceNotMet { target: spec.target_af, achieved: mask.achieved_af });
    }
    Ok(mask)
}

/// Only the centered `center_size` block is sampled.
pub fn center_block_mask(dims: &[usize], center_size: &[usize]) -> Result<SamplingMask> {
    if dims.len() != 2 || center_size.len() != 2 || center_size.iter().zip(dims).any(|(c, d)| c > d) {
        return Err(Error::InvalidArgument(format!("center {center_size:?} must be 2D and fit in {dims:?}")));
    }
    let window = CenterWindow::new(dims, center_size);
    let mut sampled = vec![false; num_elements(dims)];
    window.fill(&mut sampled, dims[1]);
    SamplingMask::from_sampled(dims, sampled, center_size)
}

pub fn generate_mask(kind: MaskKind, spec: &MaskSpec) -> Result<SamplingMask> {
    match kind {
        MaskKind::Poisson => poisson_disk_mask(spec),
        MaskKind::Uniform => uniform_random_mask(spec),
        MaskKind::Center => center_block_mask(&spec.dims, &spec.center_size),
    }
}
