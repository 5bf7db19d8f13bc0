use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;
use serde::Serialize;
use srr_core::io::{read_grid, write_grid};
use srr_core::mask::generate_mask;
use srr_core::metrics::evaluate;
use srr_core::phantom::Record;
use srr_core::{
    build_dataset, equivalent_af, ki_zero_filled, kspace_interp_sr, lowres_problem, solve_variational, ComplexGrid,
    DatasetSpec, ForwardModel, Manifest, MaskKind, MaskSpec, PhantomSpec, ProxKind, SamplingMask, SensitivitySet,
    SolverConfig, Split,
};
use srr_net::train::FINAL_CHECKPOINT;
use srr_net::{load_checkpoint, srr_forward, train, DiscConfig, GanConfig, GeneratorConfig, TrainConfig};

use crate::args::*;
use crate::compare::{compare_strategies, CompareConfig};
use crate::{create_dir, io_err, stage_seed, write_json, write_run, Cli, CliError, CliResult};

/// Name of the output grid when a single acquisition is reconstructed.
pub const SINGLE_OUTPUT: &str = "output";

impl From<MaskKindArg> for MaskKind {
    fn from(k: MaskKindArg) -> MaskKind {
        match k {
            MaskKindArg::Poisson => MaskKind::Poisson,
            MaskKindArg::Uniform => MaskKind::Uniform,
            MaskKindArg::Center => MaskKind::Center,
        }
    }
}

impl ProxArg {
    fn kind(self, levels: usize) -> ProxKind {
        match self {
            ProxArg::Identity => ProxKind::Identity,
            ProxArg::Soft => ProxKind::SoftThreshold,
            ProxArg::Haar => ProxKind::Haar { levels },
        }
    }
}

impl Cli {
    /// Redirect every output of the run into `dir`.
    pub fn set_output(&mut self, dir: &Path) -> CliResult<()> {
        match &mut self.command {
            Command::Simulate(a) => a.out = dir.to_path_buf(),
            Command::Mask(a) => a.out = dir.to_path_buf(),
            Command::Recon(a) => a.out = dir.to_path_buf(),
            Command::Train(a) => a.out = dir.to_path_buf(),
            Command::Infer(a) => a.out = dir.to_path_buf(),
            Command::Compare(a) => a.out = dir.to_path_buf(),
            Command::Eval(a) => {
                let name = a.report.file_name().map(PathBuf::from).unwrap_or_else(|| "report.json".into());
                a.report = dir.join(name);
            }
            Command::Rerun(_) => return Err(CliError::Usage("a recorded run cannot itself be a rerun".into())),
        }
        Ok(())
    }
}

pub(crate) fn dispatch(cli: Cli) -> CliResult<()> {
    match &cli.command {
        Command::Simulate(a) => simulate(&cli, a),
        Command::Mask(a) => mask(&cli, a),
        Command::Recon(a) => recon(&cli, a),
        Command::Train(a) => train_cmd(&cli, a),
        Command::Infer(a) => infer(&cli, a),
        Command::Eval(a) => eval(&cli, a),
        Command::Compare(a) => compare(&cli, a),
        Command::Rerun(a) => rerun(a),
    }
}

fn seeds(cli: &Cli, stages: &[&str]) -> Vec<(String, u64)> {
    stages.iter().map(|s| (s.to_string(), stage_seed(cli.seed, s))).collect()
}

fn pool(jobs: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {jobs} workers: {e}")))
}

fn simulate(cli: &Cli, a: &SimulateArgs) -> CliResult<()> {
    let stage = seeds(cli, &["simulate.dataset", "simulate.mask"]);
    write_run(&a.out, cli, &stage)?;
    let spec = DatasetSpec {
        phantom: PhantomSpec {
            hr_dims: a.hr_dims.0.clone(),
            n_shapes: a.shapes,
            complex_phase: a.complex_phase,
            noise_std: a.noise,
            ..PhantomSpec::default()
        },
        n_coils: a.coils,
        mask_kind: a.mask_kind.into(),
        mask: MaskSpec::new(&a.lr_dims, a.af, &a.center, stage[1].1),
        n_records: a.records,
        train_fraction: a.train_fraction,
        val_fraction: a.val_fraction,
        seed: stage[0].1,
    };
    let manifest = build_dataset(&spec, &a.out)?;
    let (tr, va, te) = spec.split_counts();
    println!(
        "wrote {} records ({tr} train, {va} val, {te} test) to {}",
        manifest.records.len(),
        manifest.path().display()
    );
    Ok(())
}

#[derive(Serialize)]
struct MaskSummary {
    dims: Vec<usize>,
    kind: MaskKindArg,
    target_af: f64,
    achieved_af: f64,
    sampled: usize,
    center: Vec<usize>,
    hr_dims: Option<Vec<usize>>,
    equivalent_af: Option<f64>,
    equivalent_af_ratio: Option<String>,
}

fn mask(cli: &Cli, a: &MaskArgs) -> CliResult<()> {
    let stage = seeds(cli, &["mask"]);
    write_run(&a.out, cli, &stage)?;
    let m = generate_mask(a.kind.into(), &MaskSpec::new(&a.dims, a.af, &a.center, stage[0].1))?;
    write_grid(a.out.join("mask"), &m.to_grid())?;
    let eq = a.hr_dims.as_deref().map(|hr| equivalent_af(&m, hr)).transpose()?;
    let summary = MaskSummary {
        dims: a.dims.0.clone(),
        kind: a.kind,
        target_af: a.af,
        achieved_af: m.achieved_af(),
        sampled: m.count(),
        center: m.center_size().to_vec(),
        hr_dims: a.hr_dims.as_ref().map(|d| d.0.clone()),
        equivalent_af: eq.map(|r| *r.numer() as f64 / *r.denom() as f64),
        equivalent_af_ratio: eq.map(|r| r.to_string()),
    };
    write_json(&a.out.join("mask.json"), &summary)?;
    match summary.equivalent_af {
        Some(e) => {
            println!("mask AF {:.3}, equivalent AF {e:.3} against {:?}", summary.achieved_af, summary.hr_dims.unwrap())
        }
        None => println!("mask AF {:.3}", summary.achieved_af),
    }
    Ok(())
}

/// One acquisition to reconstruct.
struct Job {
    name: String,
    y: ComplexGrid,
    model: ForwardModel,
}

fn load_jobs(src: &Source) -> CliResult<Vec<Job>> {
    let jobs = if let Some(path) = &src.manifest {
        let manifest = Manifest::load(path)?;
        let records: Vec<Record> = manifest.load_split(Split::Test)?;
        records
            .into_iter()
            .map(|r| Ok(Job { model: r.model()?, name: r.id, y: r.kspace }))
            .collect::<CliResult<Vec<_>>>()?
    } else {
        let (Some(input), Some(mask), Some(sens)) = (&src.input, &src.mask, &src.sens) else {
            return Err(CliError::Usage("give either --manifest or all of --input, --mask and --sens".into()));
        };
        let mask = SamplingMask::from_grid(&read_grid(mask)?)?;
        let sens = SensitivitySet::new(read_grid(sens)?)?;
        let y = read_grid(input)?;
        vec![Job { name: SINGLE_OUTPUT.into(), y, model: ForwardModel::new(mask, sens)? }]
    };
    if let Some(hr) = &src.hr_dims {
        for j in &jobs {
            if j.model.hr_dims() != &hr[..] {
                return Err(CliError::Usage(format!(
                    "--hr-dims {hr:?} disagree with coil maps of size {:?}",
                    j.model.hr_dims()
                )));
            }
        }
    }
    Ok(jobs)
}

#[derive(Serialize)]
struct TraceFile<'a> {
    method: ReconMethod,
    iterations: usize,
    converged: bool,
    /// Data fidelity `½‖A x_k − y‖²` per iterate, on the grid the solver ran on.
    fidelity: &'a [f64],
}

/// A reconstruction plus, for iterative methods, its fidelity trace, iteration count and convergence flag.
type Recon = (ComplexGrid, Option<(Vec<f64>, usize, bool)>);

fn recon(cli: &Cli, a: &ReconArgs) -> CliResult<()> {
    write_run(&a.out, cli, &[])?;
    let jobs = load_jobs(&a.source)?;
    let cfg = SolverConfig {
        eta: a.eta,
        rho: a.rho,
        tau: a.tau,
        max_iters: a.iters,
        tol: a.tol,
        prox: a.prox.kind(a.haar_levels),
    };
    cfg.validate()?;
    let results: Vec<CliResult<Recon>> = pool(cli.jobs)?.install(|| {
        jobs.par_iter()
            .map(|j| -> CliResult<_> {
                Ok(match a.method {
                    ReconMethod::Zerofill => (j.model.zero_filled(&j.y)?, None),
                    ReconMethod::Ki => (ki_zero_filled(&j.model, &j.y)?, None),
                    ReconMethod::Pgd => {
                        let r = solve_variational(&j.model, &j.y, &cfg)?;
                        (r.x, Some((r.trace, r.iterations, r.converged)))
                    }
                    ReconMethod::Strategy2 => {
                        let (lr, y_lr) = lowres_problem(&j.model, &j.y)?;
                        let r = solve_variational(&lr, &y_lr, &cfg)?;
                        (kspace_interp_sr(&r.x, j.model.hr_dims())?, Some((r.trace, r.iterations, r.converged)))
                    }
                })
            })
            .collect()
    });
    for (j, res) in jobs.iter().zip(results) {
        let (x, trace) = res?;
        write_grid(a.out.join(&j.name), &x)?;
        let (fid, iterations, converged) = trace.unwrap_or_default();
        let tf = TraceFile { method: a.method, iterations, converged, fidelity: &fid };
        write_json(&a.out.join(format!("{}.trace.json", j.name)), &tf)?;
        info!("{}: {iterations} iterations", j.name);
    }
    println!("reconstructed {} acquisition(s) into {}", jobs.len(), a.out.display());
    Ok(())
}

#[derive(Serialize)]
struct TrainSummary {
    steps: usize,
    held_out_split: Split,
    held_out_records: usize,
    initial_held_out_l2: Option<f64>,
    final_held_out_l2: Option<f64>,
    checkpoints: Vec<PathBuf>,
}

fn train_cmd(cli: &Cli, a: &TrainArgs) -> CliResult<()> {
    let stage = seeds(cli, &["train"]);
    write_run(&a.out, cli, &stage)?;
    let manifest = Manifest::load(&a.manifest)?;
    let train_set = manifest.load_split(Split::Train)?;
    let (held_split, held) = match manifest.load_split(Split::Val)? {
        v if !v.is_empty() => (Split::Val, v),
        _ => (Split::Test, manifest.load_split(Split::Test)?),
    };
    let hr = manifest.spec.phantom.hr_dims.clone();
    let cfg = TrainConfig {
        generator: GeneratorConfig {
            blocks: a.blocks,
            channels: a.channels,
            kernel: a.kernel.0.clone(),
            ..GeneratorConfig::default()
        },
        discriminator: DiscConfig { magnitude_input: a.magnitude_critic, ..DiscConfig::pyramid(&hr) },
        gan: GanConfig {
            lambda: a.lambda,
            eta_gan: a.eta_gan,
            n_disc: a.ndisc,
            lr: a.lr,
            lr_disc: a.lr_disc.unwrap_or(a.lr),
            decay: a.decay,
            epochs: a.epochs,
            batch_size: a.batch,
            max_steps: a.max_steps,
            adversarial: a.adv == OnOff::On,
            ..GanConfig::default()
        },
        seed: stage[0].1,
    };
    info!("training on {} records, {} held out", train_set.len(), held.len());
    let out = train(&train_set, &held, &cfg, Some(&a.out))?;
    let summary = TrainSummary {
        steps: out.steps,
        held_out_split: held_split,
        held_out_records: held.len(),
        initial_held_out_l2: out.initial_val_l2,
        final_held_out_l2: out.final_val_l2,
        checkpoints: out.checkpoints.clone(),
    };
    write_json(&a.out.join("train_summary.json"), &summary)?;
    println!("trained {} steps; checkpoint {}", out.steps, a.out.join(FINAL_CHECKPOINT).display());
    Ok(())
}

fn infer(cli: &Cli, a: &InferArgs) -> CliResult<()> {
    write_run(&a.out, cli, &[])?;
    let (gen, _, _) = load_checkpoint(&a.ckpt)?;
    let jobs = load_jobs(&a.source)?;
    let results: Vec<CliResult<ComplexGrid>> =
        pool(cli.jobs)?.install(|| jobs.par_iter().map(|j| Ok(srr_forward(&gen, &j.model, &j.y)?)).collect());
    for (j, x) in jobs.iter().zip(results) {
        write_grid(a.out.join(&j.name), &x?)?;
    }
    println!("inferred {} acquisition(s) into {}", jobs.len(), a.out.display());
    Ok(())
}

fn eval(cli: &Cli, a: &EvalArgs) -> CliResult<()> {
    let dir = a.report.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    write_run(dir, cli, &[])?;
    let manifest = Manifest::load(&a.manifest)?;
    let report = evaluate(&manifest, &a.outputs, &a.method)?;
    report.write(&a.report)?;
    print!("{}", report.to_table());
    Ok(())
}

fn compare(cli: &Cli, a: &CompareArgs) -> CliResult<()> {
    let stage = seeds(cli, &["compare.hr-mask", "compare.noise"]);
    write_run(&a.out, cli, &stage)?;
    let manifest = Manifest::load(&a.manifest)?;
    let (gen, _, _) = load_checkpoint(&a.ckpt)?;
    let cfg = CompareConfig {
        hr_af: a.hr_af,
        hr_center: a.hr_center.as_ref().map(|d| d.0.clone()),
        solver: SolverConfig { tau: a.tau, max_iters: a.iters, prox: a.prox.kind(3), ..SolverConfig::default() },
        mask_seed: stage[0].1,
        noise_seed: stage[1].1,
        jobs: cli.jobs,
    };
    let outcome = compare_strategies(&manifest, &gen, &cfg, Some(&a.out))?;
    write_json(&a.out.join("afs.json"), &outcome.afs)?;
    outcome.report.write(a.out.join("compare.json"))?;
    print!("{}", outcome.report.to_table());
    Ok(())
}

fn rerun(a: &RerunArgs) -> CliResult<()> {
    let text = std::fs::read_to_string(&a.run_json).map_err(|e| io_err(&a.run_json, e))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("{} is not a run record: {e}", a.run_json.display())))?;
    let mut cli: Cli = serde_json::from_value(value.get("config").cloned().unwrap_or_default())
        .map_err(|e| CliError::Usage(format!("{} has no usable config: {e}", a.run_json.display())))?;
    cli.set_output(&a.out)?;
    create_dir(&a.out)?;
    crate::execute(cli)
}
