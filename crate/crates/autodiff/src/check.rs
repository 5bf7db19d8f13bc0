//! Central finite-difference gradient checks.

use crate::error::AdResult;
use crate::tape::{grad, Tape, Var};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CheckReport {
    /// Worst over inputs of `‖analytic − numeric‖ / max(‖analytic‖, ‖numeric‖)`,
    /// restricted to the probed entries.
    pub max_rel_err: f64,
    pub probed: usize,
}

/// Compare taped gradients of the scalar `f(inputs)` with central differences.
///
/// Every input is bound as a trainable leaf. When `max_probes` is set, at most
/// that many evenly spaced entries of each input are perturbed.
pub fn check_gradients<F>(f: F, inputs: &[Tensor], step: f64, max_probes: Option<usize>) -> AdResult<CheckReport>
where
    F: Fn(&Tape, &[Var]) -> AdResult<Var>,
{
    let tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let root = f(&tape, &vars)?;
    let analytic = grad(&root, &vars.iter().collect::<Vec<_>>())?;
    let eval = |perturbed: &[Tensor]| -> AdResult<f64> {
        let t = Tape::new();
        let vs: Vec<Var> = perturbed.iter().map(|x| t.param(x.clone())).collect();
        Ok(f(&t, &vs)?.item())
    };
    let mut worst: f64 = 0.0;
    let mut probed = 0;
    for (k, input) in inputs.iter().enumerate() {
        let n = input.len();
        let stride = match max_probes {
            Some(m) if m > 0 && n > m => n.div_ceil(m),
            _ => 1,
        };
        let (mut diff, mut na, mut nn) = (0.0, 0.0, 0.0);
        let mut work = inputs.to_vec();
        for j in (0..n).step_by(stride) {
            let orig = input.data()[j];
            work[k].data_mut()[j] = orig + step;
            let fp = eval(&work)?;
            work[k].data_mut()[j] = orig - step;
            let fm = eval(&work)?;
            work[k].data_mut()[j] = orig;
            let num = (fp - fm) / (2.0 * step);
            let ana = analytic[k].value().data()[j];
            diff += (ana - num).powi(2);
            na += ana * ana;
            nn += num * num;
            probed += 1;
        }
        let scale = na.sqrt().max(nn.sqrt());
        if scale > 0.0 {
            worst = worst.max(diff.sqrt() / scale);
        }
    }
    Ok(CheckReport { max_rel_err: worst, probed })
}
