//! Modified WGAN-GP objectives.
//!
//! Critic: `L_D = D(x̃) − D(x) + λ (‖∇_x̂ D(x̂)‖₂ − 1)²` with `x̂ = ε x + (1 − ε) x̃`.
//! Generator: `L_G = −D(x̃) + η_gan · mean((x − x̃)²)`.

use srr_autodiff::{grad, BoundParams, Tensor, Var};

use crate::discriminator::{discriminator_forward, DiscConfig};
use crate::error::{NetError, NetResult};

/// The critic loss and its parts, all `[1]` variables on the same tape.
pub struct DiscLoss {
    pub total: Var,
    pub d_real: Var,
    pub d_fake: Var,
    pub penalty: Var,
}

/// `x` and `x̃` are two-channel images on the critic's tape; `x̃` should be
/// detached from the generator. `eps` lies in `[0, 1]`.
pub fn loss_discriminator(
    params: &BoundParams,
    config: &DiscConfig,
    x: &Var,
    x_fake: &Var,
    lambda: f64,
    eps: f64,
) -> NetResult<DiscLoss> {
    if x.dims() != x_fake.dims() {
        return Err(NetError::Config(format!("real {:?} vs fake {:?}", x.dims(), x_fake.dims())));
    }
    if !(0.0..=1.0).contains(&eps) {
        return Err(NetError::Config(format!("interpolation weight {eps} outside [0, 1]")));
    }
    let tape = x.tape();
    let d_real = discriminator_forward(params, config, x)?;
    let d_fake = discriminator_forward(params, config, x_fake)?;
    let hat = x.value().zip(x_fake.value(), |a, b| eps * a + (1.0 - eps) * b)?;
    let x_hat = tape.param(hat);
    let d_hat = discriminator_forward(params, config, &x_hat)?;
    let g = grad(&d_hat, &[&x_hat])?.remove(0);
    let dev = g.sum_squares().sqrt().add_const(&Tensor::scalar(-1.0))?;
    let penalty = dev.square().scale(lambda);
    let total = d_fake.sub(&d_real)?.add(&penalty)?;
    Ok(DiscLoss { total, d_real, d_fake, penalty })
}

/// Generator loss; `x_fake` carries the generator's graph.
pub fn loss_generator(
    params: &BoundParams,
    config: &DiscConfig,
    x: &Var,
    x_fake: &Var,
    eta_gan: f64,
) -> NetResult<Var> {
    let l2 = mse(x, x_fake)?.scale(eta_gan);
    let d = discriminator_forward(params, config, x_fake)?;
    Ok(l2.sub(&d)?)
}

/// Mean squared difference over every real/imaginary entry.
pub fn mse(x: &Var, x_fake: &Var) -> NetResult<Var> {
    Ok(x_fake.sub(x)?.square().mean())
}
