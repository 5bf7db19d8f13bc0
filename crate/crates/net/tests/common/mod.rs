#![allow(dead_code)]

use srr_core::mask::generate_mask;
use srr_core::phantom::{acquire, Record};
use srr_core::{make_phantom, make_sens, MaskKind, MaskSpec, PhantomSpec, Split};

/// In-memory record on an `hr`² grid with a 4× mask on the `lr`² grid
/// (Poisson from 16² up, uniform random below).
pub fn record(seed: u64, hr: usize, lr: usize, coils: usize, noise: f64) -> Record {
    let center = (lr / 4).max(2);
    let kind = if lr >= 16 { MaskKind::Poisson } else { MaskKind::Uniform };
    let mask = generate_mask(kind, &MaskSpec::new(&[lr, lr], 4.0, &[center, center], 7)).unwrap();
    let spec = PhantomSpec { hr_dims: vec![hr, hr], seed, noise_std: noise, ..PhantomSpec::default() };
    let mut truth = make_phantom(&spec).unwrap();
    truth = truth.scale_real(1.0 / truth.max_abs());
    let sens = make_sens(&[hr, hr], coils, seed + 100).unwrap();
    let kspace = acquire(&truth, &sens, &mask, &[lr, lr], noise, seed + 300).unwrap();
    Record { id: format!("rec{seed:05}"), split: Split::Train, truth, sens, kspace, mask }
}
