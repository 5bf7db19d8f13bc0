//! The unrolled generator: K blocks of a learned refinement
//! `s = C_k(x) + α_k x` followed by data consistency `x ← s − γ_k A*(A s − y)`.

use std::rc::Rc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use srr_autodiff::nn::{conv, he_normal, leaky_relu, DEFAULT_LEAKY_SLOPE};
use srr_autodiff::{
    channels_to_complex, complex_to_channels, AdResult, BoundParams, ParamSet, SelfAdjointOp, Tape, Tensor, Var,
};
use srr_core::{ComplexGrid, Domain, ForwardModel};

use crate::error::{NetError, NetResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub blocks: usize,
    /// Width of the two hidden convolutions.
    pub channels: usize,
    /// Spatial kernel extents: two entries for 2D, three for 3D.
    pub kernel: Vec<usize>,
    pub slope: f64,
    pub alpha_init: f64,
    pub gamma_init: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            blocks: 4,
            channels: 32,
            kernel: vec![3, 3],
            slope: DEFAULT_LEAKY_SLOPE,
            alpha_init: 1.0,
            gamma_init: 1.0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> NetResult<()> {
        if self.blocks == 0 || self.channels == 0 {
            return Err(NetError::Config("generator needs at least one block and one channel".into()));
        }
        if !(2..=3).contains(&self.kernel.len()) || self.kernel.iter().any(|k| k % 2 == 0) {
            return Err(NetError::Config(format!("kernel {:?} must be 2D or 3D with odd extents", self.kernel)));
        }
        if !(self.slope > 0.0 && self.slope < 1.0) {
            return Err(NetError::Config(format!("leaky slope {} must lie in (0, 1)", self.slope)));
        }
        if !self.alpha_init.is_finite() || !self.gamma_init.is_finite() {
            return Err(NetError::Config("alpha and gamma must be finite".into()));
        }
        Ok(())
    }

    fn kernel_dims(&self, cout: usize, cin: usize) -> Vec<usize> {
        let mut d = vec![cout, cin];
        d.extend_from_slice(&self.kernel);
        d
    }

    /// `(name, kernel dims)` of the three convolutions of one block.
    fn convs(&self) -> [(&'static str, Vec<usize>); 3] {
        let c = self.channels;
        [("conv1", self.kernel_dims(c, 2)), ("conv2", self.kernel_dims(c, c)), ("conv3", self.kernel_dims(2, c))]
    }
}

fn pname(k: usize, leaf: &str) -> String {
    format!("block{k}.{leaf}")
}

/// Per-block convolution stacks, residual scales α_k and step sizes γ_k.
#[derive(Clone, Debug, PartialEq)]
pub struct UnrolledModelParams {
    pub config: GeneratorConfig,
    pub params: ParamSet,
}

impl UnrolledModelParams {
    /// He-normal kernels, zero biases, `α = alpha_init`, `γ = gamma_init`.
    pub fn init(config: &GeneratorConfig, seed: u64) -> NetResult<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Self::build(config, |dims| {
            let fan_in = dims[1..].iter().product();
            he_normal(dims, fan_in, &mut rng)
        }))
    }

    /// All kernels zero: every block reduces to `s = α x` followed by data consistency.
    pub fn zeros(config: &GeneratorConfig) -> NetResult<Self> {
        config.validate()?;
        Ok(Self::build(config, Tensor::zeros))
    }

    fn build(config: &GeneratorConfig, mut kernel: impl FnMut(&[usize]) -> Tensor) -> Self {
        let mut params = ParamSet::new();
        for k in 0..config.blocks {
            for (name, dims) in config.convs() {
                params.insert(pname(k, &format!("{name}.weight")), kernel(&dims));
                params.insert(pname(k, &format!("{name}.bias")), Tensor::zeros(&[dims[0]]));
            }
            params.insert(pname(k, "alpha"), Tensor::scalar(config.alpha_init));
            params.insert(pname(k, "gamma"), Tensor::scalar(config.gamma_init));
        }
        UnrolledModelParams { config: config.clone(), params }
    }

    pub fn from_params(config: GeneratorConfig, params: ParamSet) -> NetResult<Self> {
        config.validate()?;
        let expected = Self::zeros(&config)?;
        for (name, t) in expected.params.iter() {
            match params.get(name) {
                Some(p) if p.dims() == t.dims() => {}
                Some(p) => {
                    return Err(NetError::Config(format!("{name}: dims {:?}, expected {:?}", p.dims(), t.dims())))
                }
                None => return Err(NetError::Config(format!("missing generator parameter {name}"))),
            }
        }
        if params.len() != expected.params.len() {
            return Err(NetError::Config("unexpected extra generator parameters".into()));
        }
        Ok(UnrolledModelParams { config, params })
    }

    pub fn count(&self) -> usize {
        self.params.count()
    }

    pub fn alpha(&self, k: usize) -> f64 {
        self.params.get(&pname(k, "alpha")).map(Tensor::item).unwrap_or(f64::NAN)
    }

    pub fn gamma(&self, k: usize) -> f64 {
        self.params.get(&pname(k, "gamma")).map(Tensor::item).unwrap_or(f64::NAN)
    }

    pub fn set_alpha(&mut self, k: usize, v: f64) {
        self.params.insert(pname(k, "alpha"), Tensor::scalar(v));
    }

    pub fn set_gamma(&mut self, k: usize, v: f64) {
        self.params.insert(pname(k, "gamma"), Tensor::scalar(v));
    }
}

/// `A*A` acting on two-channel real images.
pub struct NormalOp {
    model: Rc<ForwardModel>,
}

impl NormalOp {
    pub fn new(model: Rc<ForwardModel>) -> NormalOp {
        NormalOp { model }
    }
}

impl SelfAdjointOp for NormalOp {
    fn apply(&self, x: &Tensor) -> AdResult<Tensor> {
        let img = channels_to_complex(x, Domain::Image)?;
        Ok(complex_to_channels(&self.model.normal(&img)?))
    }
}

/// Output and optional per-block iterates of a taped forward pass.
pub struct ForwardTrace {
    pub output: Var,
    /// `x_0, x_1, ..., x_K` when requested, otherwise empty.
    pub iterates: Vec<Var>,
}

/// One data-consistency step `s − γ (A*A s − A*y)`, taped.
pub fn data_consistency(s: &Var, gamma: &Var, normal: &Rc<NormalOp>, aty: &Tensor) -> AdResult<Var> {
    let op: Rc<dyn SelfAdjointOp> = normal.clone();
    let residual = s.apply_self_adjoint(op)?.add_const(&aty.map(|v| -v))?;
    s.sub(&residual.scale_by(gamma)?)
}

/// Taped generator pass with parameters already bound to `tape`.
pub fn srr_forward_taped(
    tape: &Tape,
    params: &BoundParams,
    config: &GeneratorConfig,
    model: Rc<ForwardModel>,
    y: &ComplexGrid,
    keep_iterates: bool,
) -> NetResult<ForwardTrace> {
    let aty = complex_to_channels(&model.adjoint(y)?);
    if aty.dims().len() != config.kernel.len() + 1 {
        return Err(NetError::Config(format!(
            "{}D kernels cannot process an image of dims {:?}",
            config.kernel.len(),
            &aty.dims()[1..]
        )));
    }
    let normal = Rc::new(NormalOp::new(model));
    let mut x = tape.constant(aty.clone());
    let mut iterates = Vec::new();
    if keep_iterates {
        iterates.push(x.clone());
    }
    for k in 0..config.blocks {
        let p = |leaf: &str| params.get(&pname(k, leaf));
        let h = leaky_relu(&conv(&x, p("conv1.weight")?, Some(p("conv1.bias")?))?, config.slope)?;
        let h = leaky_relu(&conv(&h, p("conv2.weight")?, Some(p("conv2.bias")?))?, config.slope)?;
        let c = conv(&h, p("conv3.weight")?, Some(p("conv3.bias")?))?;
        let s = c.add(&x.scale_by(p("alpha")?)?)?;
        x = data_consistency(&s, p("gamma")?, &normal, &aty)?;
        if !x.value().is_finite() {
            return Err(NetError::NonFiniteBlock { block: k });
        }
        if keep_iterates {
            iterates.push(x.clone());
        }
    }
    Ok(ForwardTrace { output: x, iterates })
}

/// Untaped generator pass returning the HR image.
pub fn srr_forward(params: &UnrolledModelParams, model: &ForwardModel, y: &ComplexGrid) -> NetResult<ComplexGrid> {
    let tape = Tape::no_grad();
    let bound = params.params.bind_const(&tape);
    let trace = srr_forward_taped(&tape, &bound, &params.config, Rc::new(model.clone()), y, false)?;
    Ok(channels_to_complex(trace.output.value(), Domain::Image)?)
}

/// Untaped pass that also returns every iterate `x_0..x_K`.
pub fn srr_forward_iterates(
    params: &UnrolledModelParams,
    model: &ForwardModel,
    y: &ComplexGrid,
) -> NetResult<Vec<ComplexGrid>> {
    let tape = Tape::no_grad();
    let bound = params.params.bind_const(&tape);
    let trace = srr_forward_taped(&tape, &bound, &params.config, Rc::new(model.clone()), y, true)?;
    trace.iterates.iter().map(|v| Ok(channels_to_complex(v.value(), Domain::Image)?)).collect()
}
