//! Every differentiable tape op, each wrapped as a scalar function of random
//! inputs. Shared by the gradient tests and the acceptance suite.

use std::rc::Rc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use srr_autodiff::nn::{avg_pool, conv, dense, leaky_relu};
use srr_autodiff::{concat, AdResult, SelfAdjointOp, Tape, Tensor, Var};

pub fn rand_t(dims: &[usize], seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = dims.iter().product();
    Tensor::new(dims, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Values bounded away from zero, for ops with kinks or poles there.
pub fn rand_away(dims: &[usize], seed: u64, lo: f64) -> Tensor {
    rand_t(dims, seed).map(|v| if v >= 0.0 { v + lo } else { v - lo })
}

/// A fixed random weighting turns any tensor output into a scalar with a generic gradient.
pub fn weighted(y: &Var, seed: u64) -> AdResult<Var> {
    let w = y.tape().constant(rand_t(y.dims(), seed));
    Ok(y.mul(&w)?.sum())
}

/// Symmetric 4-point real operator used to exercise opaque self-adjoint nodes.
pub struct SymMatrix(Tensor);

impl SelfAdjointOp for SymMatrix {
    fn apply(&self, x: &Tensor) -> AdResult<Tensor> {
        let n = x.len();
        let m = self.0.data();
        let v = (0..n).map(|i| (0..n).map(|j| m[i * n + j] * x.data()[j]).sum()).collect();
        Tensor::new(x.dims(), v)
    }
}

pub fn sym4() -> Rc<dyn SelfAdjointOp> {
    let a = rand_t(&[4, 4], 77);
    let mut s = Tensor::zeros(&[4, 4]);
    for i in 0..4 {
        for j in 0..4 {
            s.data_mut()[i * 4 + j] = a.data()[i * 4 + j] + a.data()[j * 4 + i];
        }
    }
    Rc::new(SymMatrix(s))
}

pub type Case = (&'static str, Box<dyn Fn(&Tape, &[Var]) -> AdResult<Var>>, Vec<Tensor>);

pub fn cases() -> Vec<Case> {
    vec![
        ("add", Box::new(|_, v| weighted(&v[0].add(&v[1])?, 1)), vec![rand_t(&[3, 4], 1), rand_t(&[3, 4], 2)]),
        ("sub", Box::new(|_, v| weighted(&v[0].sub(&v[1])?, 1)), vec![rand_t(&[5], 3), rand_t(&[5], 4)]),
        ("mul", Box::new(|_, v| weighted(&v[0].mul(&v[1])?, 1)), vec![rand_t(&[2, 3], 5), rand_t(&[2, 3], 6)]),
        ("neg_scale", Box::new(|_, v| weighted(&v[0].neg().scale(2.5), 2)), vec![rand_t(&[4], 7)]),
        ("mul_const", Box::new(|_, v| weighted(&v[0].mul_const(Rc::new(rand_t(&[6], 9)))?, 3)), vec![rand_t(&[6], 8)]),
        ("scale_by", Box::new(|_, v| weighted(&v[0].scale_by(&v[1])?, 4)), vec![rand_t(&[3, 3], 10), rand_t(&[1], 11)]),
        ("sum_broadcast", Box::new(|_, v| weighted(&v[0].sum().broadcast(&[2, 2])?, 5)), vec![rand_t(&[7], 12)]),
        ("recip", Box::new(|_, v| weighted(&v[0].recip(), 6)), vec![rand_away(&[5], 13, 0.5)]),
        ("sqrt", Box::new(|_, v| weighted(&v[0].sqrt(), 7)), vec![rand_t(&[5], 14).map(|x| x.abs() + 0.3)]),
        (
            "conv2d_bias",
            Box::new(|_, v| weighted(&conv(&v[0], &v[1], Some(&v[2]))?, 8)),
            vec![rand_t(&[2, 8, 8], 15), rand_t(&[3, 2, 3, 3], 16), rand_t(&[3], 17)],
        ),
        (
            "conv3d",
            Box::new(|_, v| weighted(&v[0].conv(&v[1])?, 9)),
            vec![rand_t(&[2, 3, 4, 5], 18), rand_t(&[2, 2, 3, 3, 3], 19)],
        ),
        (
            "conv_transpose",
            Box::new(|_, v| weighted(&v[0].conv_transpose(&v[1])?, 10)),
            vec![rand_t(&[3, 5, 6], 20), rand_t(&[3, 2, 3, 3], 21)],
        ),
        (
            "conv_weight_grad",
            Box::new(|_, v| weighted(&v[0].conv_weight_grad(&v[1], &[3, 2, 3, 3])?, 11)),
            vec![rand_t(&[2, 5, 6], 22), rand_t(&[3, 5, 6], 23)],
        ),
        (
            "channel_ops",
            Box::new(|_, v| {
                let y = v[0].add_channel_bias(&v[1])?;
                let m = y.channel_mean();
                weighted(&m.channel_broadcast(&[3, 2, 2])?.add(&y.avg_pool(2)?)?, 12)
            }),
            vec![rand_t(&[3, 4, 3], 24), rand_t(&[3], 25)],
        ),
        ("avg_pool_ragged", Box::new(|_, v| weighted(&avg_pool(&v[0], 3)?, 13)), vec![rand_t(&[2, 7, 5], 26)]),
        (
            "avg_pool_adjoint",
            Box::new(|_, v| weighted(&v[0].avg_pool_adjoint(2, &[2, 5, 3])?, 14)),
            vec![rand_t(&[2, 3, 2], 27)],
        ),
        (
            "matvec_family",
            Box::new(|_, v| {
                let y = v[0].matvec(&v[1])?;
                let z = v[0].matvec_t(&y)?;
                weighted(&v[1].outer(&z)?, 15)
            }),
            vec![rand_t(&[3, 4], 28), rand_t(&[4], 29)],
        ),
        (
            "concat_slice_embed_reshape",
            Box::new(|_, v| {
                let c = concat(&[v[0].clone(), v[1].reshape(&[6])?])?;
                let s = c.slice(2, 5)?.embed(1, 9)?.reshape(&[3, 3])?;
                weighted(&s, 16)
            }),
            vec![rand_t(&[4], 30), rand_t(&[2, 3], 31)],
        ),
        ("leaky_relu", Box::new(|_, v| weighted(&leaky_relu(&v[0], 0.2)?, 17)), vec![rand_away(&[10], 32, 1e-3)]),
        (
            "dense",
            Box::new(|_, v| weighted(&dense(&v[0], &v[1], &v[2])?, 18)),
            vec![rand_t(&[2, 3], 33), rand_t(&[4, 6], 34), rand_t(&[4], 35)],
        ),
        ("self_adjoint", Box::new(|_, v| weighted(&v[0].apply_self_adjoint(sym4())?, 19)), vec![rand_t(&[2, 2], 36)]),
    ]
}
