//! Critics for adversarial training: a pyramid-pooling network and a
//! linear critic whose input gradient is known in closed form.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use srr_autodiff::nn::{avg_pool, conv, dense, he_normal, leaky_relu, DEFAULT_LEAKY_SLOPE};
use srr_autodiff::{concat, BoundParams, ParamSet, Tensor, Var};

use crate::error::{NetError, NetResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum DiscKind {
    /// Trunk convolution, then one branch per pooling scale
    /// (pool, conv, leaky rectifier, channel mean), concatenated into a dense head.
    Pyramid { trunk_channels: usize, branch_channels: usize, scales: Vec<usize> },
    /// `D(x) = <w, x> + b`.
    Linear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscConfig {
    pub kind: DiscKind,
    /// Spatial dims of the images scored.
    pub image_dims: Vec<usize>,
    /// Score the magnitude image instead of the real/imaginary channels.
    pub magnitude_input: bool,
    pub slope: f64,
}

impl DiscConfig {
    pub fn pyramid(image_dims: &[usize]) -> DiscConfig {
        DiscConfig {
            kind: DiscKind::Pyramid { trunk_channels: 16, branch_channels: 16, scales: vec![1, 2, 4] },
            image_dims: image_dims.to_vec(),
            magnitude_input: false,
            slope: DEFAULT_LEAKY_SLOPE,
        }
    }

    pub fn linear(image_dims: &[usize]) -> DiscConfig {
        DiscConfig {
            kind: DiscKind::Linear,
            image_dims: image_dims.to_vec(),
            magnitude_input: false,
            slope: DEFAULT_LEAKY_SLOPE,
        }
    }

    pub fn in_channels(&self) -> usize {
        if self.magnitude_input {
            1
        } else {
            2
        }
    }

    pub fn input_dims(&self) -> Vec<usize> {
        let mut d = vec![self.in_channels()];
        d.extend_from_slice(&self.image_dims);
        d
    }

    pub fn validate(&self) -> NetResult<()> {
        if self.image_dims.len() != 2 || self.image_dims.contains(&0) {
            return Err(NetError::Config(format!("critic images must be 2D, got {:?}", self.image_dims)));
        }
        if let DiscKind::Pyramid { trunk_channels, branch_channels, scales } = &self.kind {
            if *trunk_channels == 0 || *branch_channels == 0 || scales.is_empty() || scales.contains(&0) {
                return Err(NetError::Config(format!("invalid pyramid critic {:?}", self.kind)));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiscriminatorParams {
    pub config: DiscConfig,
    pub params: ParamSet,
}

impl DiscriminatorParams {
    pub fn init(config: &DiscConfig, seed: u64) -> NetResult<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ParamSet::new();
        match &config.kind {
            DiscKind::Pyramid { trunk_channels: t, branch_channels: b, scales } => {
                let ci = config.in_channels();
                p.insert("trunk.weight", he_normal(&[*t, ci, 3, 3], ci * 9, &mut rng));
                p.insert("trunk.bias", Tensor::zeros(&[*t]));
                for s in scales {
                    p.insert(format!("branch{s}.weight"), he_normal(&[*b, *t, 3, 3], t * 9, &mut rng));
                    p.insert(format!("branch{s}.bias"), Tensor::zeros(&[*b]));
                }
                let feat = b * scales.len();
                p.insert("head.weight", he_normal(&[1, feat], feat, &mut rng));
                p.insert("head.bias", Tensor::zeros(&[1]));
            }
            DiscKind::Linear => {
                let dims = config.input_dims();
                let n: usize = dims.iter().product();
                p.insert("linear.weight", he_normal(&dims, n, &mut rng));
                p.insert("linear.bias", Tensor::zeros(&[1]));
            }
        }
        Ok(DiscriminatorParams { config: config.clone(), params: p })
    }

    /// Same layout with every entry zero, so the critic scores everything 0.
    pub fn zeros(config: &DiscConfig) -> NetResult<Self> {
        let mut d = Self::init(config, 0)?;
        for t in d.params.tensors_mut() {
            t.data_mut().fill(0.0);
        }
        Ok(d)
    }

    pub fn count(&self) -> usize {
        self.params.count()
    }
}

fn magnitude(x: &Var) -> NetResult<Var> {
    let n = x.len() / 2;
    let re = x.slice(0, n)?;
    let im = x.slice(n, n)?;
    let mut dims = x.dims().to_vec();
    dims[0] = 1;
    Ok(re.square().add(&im.square())?.sqrt().reshape(&dims)?)
}

/// Score of one two-channel image `[2, H, W]`, as a `[1]` variable.
pub fn discriminator_forward(params: &BoundParams, config: &DiscConfig, image: &Var) -> NetResult<Var> {
    let mut expect = vec![2];
    expect.extend_from_slice(&config.image_dims);
    if image.dims() != expect.as_slice() {
        return Err(NetError::Config(format!("critic expects {:?}, got {:?}", expect, image.dims())));
    }
    let x = if config.magnitude_input { magnitude(image)? } else { image.clone() };
    match &config.kind {
        DiscKind::Linear => {
            let w = params.get("linear.weight")?;
            Ok(x.mul(w)?.sum().add(params.get("linear.bias")?)?)
        }
        DiscKind::Pyramid { scales, .. } => {
            let trunk =
                leaky_relu(&conv(&x, params.get("trunk.weight")?, Some(params.get("trunk.bias")?))?, config.slope)?;
            let mut feats = Vec::with_capacity(scales.len());
            for s in scales {
                let pooled = avg_pool(&trunk, *s)?;
                let w = params.get(&format!("branch{s}.weight"))?;
                let b = params.get(&format!("branch{s}.bias"))?;
                feats.push(leaky_relu(&conv(&pooled, w, Some(b))?, config.slope)?.channel_mean());
            }
            let f = concat(&feats)?;
            Ok(dense(&f, params.get("head.weight")?, params.get("head.bias")?)?)
        }
    }
}
