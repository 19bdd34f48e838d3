//! Emulated mixed precision: autocast policy and dynamic loss scaling.
//!
//! Under autocast only convolutions run on binary16-rounded operands (see
//! [`Graph::forward`]); batch-norm, losses and reductions stay in the host type.
//! Master weights are never rounded.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{Forward, Graph};
use crate::nn::Mode;
use crate::optim::AdamState;
use crate::scalar::Scalar;
use crate::tape::{Grads, Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossScalerState {
    pub scale: f64,
    pub growth_interval: u32,
    pub growth_factor: f64,
    pub backoff_factor: f64,
    pub good_step_streak: u32,
}

impl Default for LossScalerState {
    fn default() -> Self {
        Self {
            scale: 65536.0,
            growth_interval: 2000,
            growth_factor: 2.0,
            backoff_factor: 0.5,
            good_step_streak: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Applied,
    Skipped,
}

/// Forward pass with the autocast policy switched by `amp`.
pub fn autocast_forward<T: Scalar>(
    graph: &mut Graph<T>,
    tape: &mut Tape<T>,
    batch: Var,
    mode: Mode,
    amp: bool,
) -> Result<Forward> {
    graph.forward(tape, batch, mode, amp)
}

/// Backward from `loss * scale`.
pub fn scale_and_backward<T: Scalar>(
    tape: &Tape<T>,
    loss: Var,
    scaler: &LossScalerState,
) -> Result<Grads<T>> {
    tape.backward_seeded(loss, T::from_f64_lossy(scaler.scale))
}

/// Divides gradient slots by the loss scale, then either applies an Adam step
/// or, if any gradient is non-finite, skips it and backs the scale off.
/// Gradient slots are cleared in both cases.
pub fn unscale_check_update<T: Scalar>(
    graph: &mut Graph<T>,
    adam: &mut AdamState<T>,
    scaler: &mut LossScalerState,
) -> Result<StepOutcome> {
    let scale = T::from_f64_lossy(scaler.scale);
    let mut finite = true;
    for p in graph.params_mut().values_mut() {
        if let Some(g) = p.grad_mut() {
            for v in g.iter_mut() {
                *v /= scale;
                finite &= v.is_finite();
            }
        }
    }
    let outcome = if finite {
        adam.step(graph)?;
        scaler.good_step_streak += 1;
        if scaler.good_step_streak >= scaler.growth_interval {
            scaler.scale *= scaler.growth_factor;
            scaler.good_step_streak = 0;
        }
        StepOutcome::Applied
    } else {
        scaler.scale *= scaler.backoff_factor;
        scaler.good_step_streak = 0;
        StepOutcome::Skipped
    };
    graph.zero_grad();
    Ok(outcome)
}
