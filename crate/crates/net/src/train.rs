//! Deterministic training loop, checkpoints and inference.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::rc::Rc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use srr_autodiff::{
    adam_step, complex_to_channels, exp_decay_lr, grad_values, AdamConfig, AdamState, Checkpoint, ParamSet, Tape,
    Tensor,
};
use srr_core::phantom::Record;
use srr_core::{ComplexGrid, ForwardModel, SamplingMask, SensitivitySet};

use crate::discriminator::{DiscConfig, DiscriminatorParams};
use crate::error::{NetError, NetResult};
use crate::generator::{srr_forward, srr_forward_taped, GeneratorConfig, UnrolledModelParams};
use crate::loss::{loss_discriminator, loss_generator, mse};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GanConfig {
    /// Gradient-penalty weight λ.
    pub lambda: f64,
    /// Weight of the L2 term in the generator loss.
    pub eta_gan: f64,
    /// Critic updates per generator update.
    pub n_disc: usize,
    pub lr: f64,
    pub lr_disc: f64,
    /// Learning rates are multiplied by this once per epoch.
    pub decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Stop after this many generator updates, even mid-epoch.
    pub max_steps: Option<usize>,
    pub adversarial: bool,
    pub beta1: f64,
    pub beta2: f64,
}

impl Default for GanConfig {
    fn default() -> Self {
        GanConfig {
            lambda: 10.0,
            eta_gan: 100.0,
            n_disc: 1,
            lr: 1e-3,
            lr_disc: 1e-3,
            decay: 0.95,
            epochs: 1,
            batch_size: 1,
            max_steps: None,
            adversarial: true,
            beta1: 0.9,
            beta2: 0.999,
        }
    }
}

impl GanConfig {
    pub fn validate(&self) -> NetResult<()> {
        let bad = |m: &str| Err(NetError::Config(m.to_string()));
        if !(self.lambda >= 0.0) || !(self.eta_gan >= 0.0) {
            return bad("lambda and eta_gan must be nonnegative");
        }
        if !(self.lr > 0.0) || !(self.lr_disc > 0.0) {
            return bad("learning rates must be positive");
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return bad("decay must lie in (0, 1]");
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1");
        }
        if self.adversarial && self.n_disc == 0 {
            return bad("adversarial training needs at least one critic step");
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig { beta1: self.beta1, beta2: self.beta2, ..AdamConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub generator: GeneratorConfig,
    pub discriminator: DiscConfig,
    pub gan: GanConfig,
    pub seed: u64,
}

/// One record of the per-step training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: usize,
    pub epoch: usize,
    pub record: String,
    pub loss_g: f64,
    pub loss_d: Option<f64>,
    /// `½‖A x̃ − y‖²` of the generator output before the update.
    pub fidelity: f64,
    pub lr: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub generator: UnrolledModelParams,
    pub discriminator: DiscriminatorParams,
    pub log: Vec<StepLog>,
    pub checkpoints: Vec<PathBuf>,
    pub steps: usize,
    pub initial_val_l2: Option<f64>,
    pub final_val_l2: Option<f64>,
}

pub const FINAL_CHECKPOINT: &str = "model.ckpt";
pub const TRAIN_LOG: &str = "train_log.jsonl";

struct Prepared<'a> {
    record: &'a Record,
    model: Rc<ForwardModel>,
    truth: Tensor,
}

fn prepare(records: &[Record]) -> NetResult<Vec<Prepared<'_>>> {
    records
        .iter()
        .map(|r| Ok(Prepared { record: r, model: Rc::new(r.model()?), truth: complex_to_channels(&r.truth) }))
        .collect()
}

/// Mean over `records` of the per-entry squared error of the generator output.
pub fn validation_l2(gen: &UnrolledModelParams, records: &[Record]) -> NetResult<Option<f64>> {
    if records.is_empty() {
        return Ok(None);
    }
    let mut acc = 0.0;
    for r in records {
        let out = srr_forward(gen, &r.model()?, &r.kspace)?;
        acc += out.sub(&r.truth)?.norm_sqr() / (2 * out.len()) as f64;
    }
    Ok(Some(acc / records.len() as f64))
}

fn io_err(path: &Path, e: std::io::Error) -> NetError {
    NetError::Io { path: path.to_path_buf(), source: e }
}

pub fn save_checkpoint(
    path: &Path,
    gen: &UnrolledModelParams,
    disc: &DiscriminatorParams,
    epoch: usize,
    step: usize,
) -> NetResult<()> {
    let mut params = ParamSet::new();
    params.extend_prefixed("generator.", &gen.params);
    params.extend_prefixed("discriminator.", &disc.params);
    let meta = serde_json::json!({
        "generator": gen.config,
        "discriminator": disc.config,
        "epoch": epoch,
        "step": step,
    });
    Checkpoint::new(meta, params).save(path)?;
    Ok(())
}

/// Load generator and critic from a checkpoint written by [`save_checkpoint`].
pub fn load_checkpoint(path: &Path) -> NetResult<(UnrolledModelParams, DiscriminatorParams, serde_json::Value)> {
    let ck = Checkpoint::load(path)?;
    let field = |name: &str| {
        ck.meta.get(name).cloned().ok_or_else(|| NetError::Config(format!("checkpoint meta lacks {name}")))
    };
    let gcfg: GeneratorConfig =
        serde_json::from_value(field("generator")?).map_err(|e| NetError::Config(format!("generator config: {e}")))?;
    let dcfg: DiscConfig = serde_json::from_value(field("discriminator")?)
        .map_err(|e| NetError::Config(format!("discriminator config: {e}")))?;
    let gen = UnrolledModelParams::from_params(gcfg, ck.params.with_prefix("generator."))?;
    let disc = DiscriminatorParams { config: dcfg, params: ck.params.with_prefix("discriminator.") };
    Ok((gen, disc, ck.meta))
}

fn average(mut acc: Vec<Tensor>, n: usize) -> Vec<Tensor> {
    for t in &mut acc {
        for v in t.data_mut() {
            *v /= n as f64;
        }
    }
    acc
}

fn accumulate(acc: &mut Option<Vec<Tensor>>, g: Vec<Tensor>) {
    match acc {
        None => *acc = Some(g),
        Some(a) => {
            for (x, y) in a.iter_mut().zip(&g) {
                for (p, q) in x.data_mut().iter_mut().zip(y.data()) {
                    *p += q;
                }
            }
        }
    }
}

fn init_from(master: &mut ChaCha8Rng, cfg: &TrainConfig) -> NetResult<(UnrolledModelParams, DiscriminatorParams)> {
    let gen = UnrolledModelParams::init(&cfg.generator, master.random())?;
    let disc = DiscriminatorParams::init(&cfg.discriminator, master.random())?;
    Ok((gen, disc))
}

/// The parameters [`train`] starts from for this config.
pub fn initial_params(cfg: &TrainConfig) -> NetResult<(UnrolledModelParams, DiscriminatorParams)> {
    init_from(&mut ChaCha8Rng::seed_from_u64(cfg.seed), cfg)
}

fn blowup(e: NetError, step: usize, last: &Option<PathBuf>) -> NetError {
    match e {
        NetError::NonFiniteBlock { .. } => NetError::NonFiniteLoss { step, last_checkpoint: last.clone() },
        e => e,
    }
}

/// Train from `cfg.seed`; with `out_dir`, write per-epoch checkpoints, the
/// final `model.ckpt` and a JSON-lines step log there.
pub fn train(
    train_set: &[Record],
    val_set: &[Record],
    cfg: &TrainConfig,
    out_dir: Option<&Path>,
) -> NetResult<TrainOutcome> {
    cfg.gan.validate()?;
    cfg.generator.validate()?;
    cfg.discriminator.validate()?;
    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut gen, mut disc) = init_from(&mut master, cfg)?;
    let mut order_rng = ChaCha8Rng::seed_from_u64(master.random());
    let mut eps_rng = ChaCha8Rng::seed_from_u64(master.random());
    let mut g_state = AdamState::new(&gen.params);
    let mut d_state = AdamState::new(&disc.params);
    let adam = cfg.gan.adam();

    let mut log_file = match out_dir {
        Some(d) => {
            fs::create_dir_all(d).map_err(|e| io_err(d, e))?;
            let p = d.join(TRAIN_LOG);
            Some((fs::File::create(&p).map_err(|e| io_err(&p, e))?, p))
        }
        None => None,
    };
    let initial_val_l2 = validation_l2(&gen, val_set)?;
    let prepared = prepare(train_set)?;
    let mut log = Vec::new();
    let mut checkpoints = Vec::new();
    let mut last_good: Option<PathBuf> = None;
    if let Some(d) = out_dir {
        let p = d.join(format!("ckpt_epoch{:04}.ckpt", 0));
        save_checkpoint(&p, &gen, &disc, 0, 0)?;
        checkpoints.push(p.clone());
        last_good = Some(p);
    }
    let mut step = 0usize;
    let max_steps = cfg.gan.max_steps.unwrap_or(usize::MAX);
    let b = cfg.gan.batch_size;

    'epochs: for epoch in 0..cfg.gan.epochs {
        if step >= max_steps || prepared.is_empty() {
            break;
        }
        let lr = exp_decay_lr(cfg.gan.lr, cfg.gan.decay, epoch);
        let lr_d = exp_decay_lr(cfg.gan.lr_disc, cfg.gan.decay, epoch);
        let mut order: Vec<usize> = (0..prepared.len()).collect();
        order.shuffle(&mut order_rng);
        for batch in order.chunks(b) {
            if step >= max_steps {
                break 'epochs;
            }
            let mut loss_d = None;
            if cfg.gan.adversarial {
                for _ in 0..cfg.gan.n_disc {
                    let mut acc = None;
                    let mut total = 0.0;
                    for &i in batch {
                        let p = &prepared[i];
                        let fake = complex_to_channels(
                            &srr_forward(&gen, &p.model, &p.record.kspace).map_err(|e| blowup(e, step, &last_good))?,
                        );
                        let tape = Tape::new();
                        let bound = disc.params.bind(&tape);
                        let x = tape.constant(p.truth.clone());
                        let xf = tape.constant(fake);
                        let eps: f64 = eps_rng.random_range(0.0..=1.0);
                        let l = loss_discriminator(&bound, &disc.config, &x, &xf, cfg.gan.lambda, eps)?;
                        total += l.total.item();
                        accumulate(&mut acc, grad_values(&l.total, &bound.refs())?);
                    }
                    let total = total / batch.len() as f64;
                    if !total.is_finite() {
                        return Err(NetError::NonFiniteLoss { step, last_checkpoint: last_good });
                    }
                    adam_step(&mut disc.params, &average(acc.unwrap(), batch.len()), &mut d_state, lr_d, &adam)?;
                    loss_d = Some(total);
                }
            }
            let mut acc = None;
            let mut loss_g = 0.0;
            let mut fidelity = 0.0;
            for &i in batch {
                let p = &prepared[i];
                let tape = Tape::new();
                let bound = gen.params.bind(&tape);
                let out = srr_forward_taped(&tape, &bound, &gen.config, p.model.clone(), &p.record.kspace, false)
                    .map_err(|e| blowup(e, step, &last_good))?
                    .output;
                let x = tape.constant(p.truth.clone());
                let l = if cfg.gan.adversarial {
                    let dbound = disc.params.bind_const(&tape);
                    loss_generator(&dbound, &disc.config, &x, &out, cfg.gan.eta_gan)?
                } else {
                    mse(&x, &out)?
                };
                let img = srr_autodiff::channels_to_complex(out.value(), srr_core::Domain::Image)?;
                fidelity += p.model.fidelity(&img, &p.record.kspace)?;
                loss_g += l.item();
                accumulate(&mut acc, grad_values(&l, &bound.refs())?);
            }
            loss_g /= batch.len() as f64;
            fidelity /= batch.len() as f64;
            if !loss_g.is_finite() {
                return Err(NetError::NonFiniteLoss { step, last_checkpoint: last_good });
            }
            adam_step(&mut gen.params, &average(acc.unwrap(), batch.len()), &mut g_state, lr, &adam)?;
            if !gen.params.is_finite() || !disc.params.is_finite() {
                return Err(NetError::NonFiniteLoss { step, last_checkpoint: last_good });
            }
            let rec = StepLog {
                step,
                epoch,
                record: batch.iter().map(|&i| prepared[i].record.id.as_str()).collect::<Vec<_>>().join(","),
                loss_g,
                loss_d,
                fidelity,
                lr,
            };
            if let Some((f, p)) = log_file.as_mut() {
                let line = serde_json::to_string(&rec).expect("log record serializes");
                writeln!(f, "{line}").map_err(|e| io_err(p, e))?;
            }
            log.push(rec);
            step += 1;
        }
        if let Some(d) = out_dir {
            let p = d.join(format!("ckpt_epoch{:04}.ckpt", epoch + 1));
            save_checkpoint(&p, &gen, &disc, epoch + 1, step)?;
            checkpoints.push(p.clone());
            last_good = Some(p);
        }
    }
    if let Some(d) = out_dir {
        let p = d.join(FINAL_CHECKPOINT);
        let epochs_done = log.last().map(|l| l.epoch + 1).unwrap_or(0);
        save_checkpoint(&p, &gen, &disc, epochs_done, step)?;
        checkpoints.push(p);
    }
    let final_val_l2 = validation_l2(&gen, val_set).map_err(|e| blowup(e, step, &last_good))?;
    Ok(TrainOutcome {
        generator: gen,
        discriminator: disc,
        log,
        checkpoints,
        steps: step,
        initial_val_l2,
        final_val_l2,
    })
}

/// Reconstruct an HR image from LR k-space with a trained generator.
pub fn infer(
    gen: &UnrolledModelParams,
    y: &ComplexGrid,
    mask: &SamplingMask,
    sens: &SensitivitySet,
    hr_dims: &[usize],
) -> NetResult<ComplexGrid> {
    if sens.spatial_dims() != hr_dims {
        return Err(NetError::Config(format!("coil maps {:?} do not match HR dims {hr_dims:?}", sens.spatial_dims())));
    }
    let model = ForwardModel::new(mask.clone(), sens.clone())?;
    srr_forward(gen, &model, y)
}

/// [`infer`] from a checkpoint file.
pub fn infer_from_checkpoint(
    ckpt: &Path,
    y: &ComplexGrid,
    mask: &SamplingMask,
    sens: &SensitivitySet,
    hr_dims: &[usize],
) -> NetResult<ComplexGrid> {
    let (gen, _, _) = load_checkpoint(ckpt)?;
    infer(&gen, y, mask, sens, hr_dims)
}
