//! Layer-level parameter bundles on top of the tape primitives.

use serde::{Deserialize, Serialize};

use crate::error::{size_err, Result};
use crate::scalar::Scalar;
use crate::tape::{Tape, Var};

/// Batch-norm behaviour for a forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Batch statistics, running statistics updated.
    Train,
    /// Running statistics only; nothing mutated.
    Eval,
}

pub const BN_MOMENTUM: f64 = 0.1;
pub const BN_EPS: f64 = 1e-5;

/// Tape handles of one convolution's parameters.
#[derive(Debug, Clone, Copy)]
pub struct Conv2dParams {
    pub weight: Var,
    pub bias: Var,
    pub stride: usize,
    pub padding: usize,
}

/// Running statistics and hyper-parameters of one batch-norm layer.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormState<T> {
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    pub momentum: T,
    pub eps: T,
    pub mode: Mode,
}

impl<T: Scalar> BatchNormState<T> {
    pub fn new(channels: usize, mode: Mode) -> Self {
        Self {
            running_mean: vec![T::zero(); channels],
            running_var: vec![T::one(); channels],
            momentum: T::from_f64_lossy(BN_MOMENTUM),
            eps: T::from_f64_lossy(BN_EPS),
            mode,
        }
    }
}

/// Batch-norm over `[N, C, H, W]` with affine parameters `gamma`, `beta`.
///
/// In train mode the running statistics move toward the batch mean and the
/// biased batch variance by `momentum`.
#[allow(clippy::too_many_arguments)]
pub fn batchnorm2d<T: Scalar>(
    tape: &mut Tape<T>,
    x: Var,
    gamma: Var,
    beta: Var,
    running_mean: &mut [T],
    running_var: &mut [T],
    momentum: T,
    eps: T,
    mode: Mode,
) -> Result<Var> {
    let c = tape.value(x).dims4()?[1];
    if running_mean.len() != c || running_var.len() != c {
        return Err(size_err!("running statistics do not match {c} channels"));
    }
    match mode {
        Mode::Eval => tape.batchnorm_eval(x, gamma, beta, running_mean, running_var, eps),
        Mode::Train => {
            let (y, mean, var) = tape.batchnorm_train(x, gamma, beta, eps)?;
            let keep = T::one() - momentum;
            for ch in 0..c {
                running_mean[ch] = keep * running_mean[ch] + momentum * mean[ch];
                running_var[ch] = keep * running_var[ch] + momentum * var[ch];
            }
            Ok(y)
        }
    }
}

impl<T: Scalar> BatchNormState<T> {
    pub fn forward(&mut self, tape: &mut Tape<T>, x: Var, gamma: Var, beta: Var) -> Result<Var> {
        batchnorm2d(
            tape,
            x,
            gamma,
            beta,
            &mut self.running_mean,
            &mut self.running_var,
            self.momentum,
            self.eps,
            self.mode,
        )
    }
}

pub fn conv2d<T: Scalar>(tape: &mut Tape<T>, x: Var, p: &Conv2dParams) -> Result<Var> {
    tape.conv2d(x, p.weight, Some(p.bias), p.stride, p.padding)
}

pub fn conv_transpose2d<T: Scalar>(tape: &mut Tape<T>, x: Var, p: &Conv2dParams) -> Result<Var> {
    tape.conv_transpose2d(x, p.weight, Some(p.bias), p.stride, p.padding)
}
