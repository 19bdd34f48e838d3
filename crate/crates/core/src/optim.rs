//! Adam with bias correction.

use crate::error::{Error, Result};
use crate::model::Graph;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    /// Applied (non-skipped) steps so far.
    pub step_count: u64,
    /// First-moment estimates, one buffer per parameter in graph order.
    pub m: Vec<Vec<T>>,
    /// Second-moment estimates.
    pub v: Vec<Vec<T>>,
}

pub const DEFAULT_LR: f64 = 1e-3;

impl<T: Scalar> AdamState<T> {
    pub fn new(graph: &Graph<T>, lr: f64) -> Self {
        let zeros: Vec<Vec<T>> = graph
            .params()
            .values()
            .map(|t| vec![T::zero(); t.len()])
            .collect();
        Self {
            lr: T::from_f64_lossy(lr),
            beta1: T::from_f64_lossy(0.9),
            beta2: T::from_f64_lossy(0.999),
            eps: T::from_f64_lossy(1e-8),
            step_count: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// One update of every parameter of `graph` from its gradient slot.
    /// Gradient slots are left untouched.
    pub fn step(&mut self, graph: &mut Graph<T>) -> Result<()> {
        if self.m.len() != graph.params().len() {
            return Err(Error::Contract(format!(
                "optimizer tracks {} parameters, graph has {}",
                self.m.len(),
                graph.params().len()
            )));
        }
        for (name, p) in graph.params() {
            match p.grad() {
                None => return Err(Error::Contract(format!("parameter {name} has no gradient"))),
                Some(g) if g.iter().any(|v| !v.is_finite()) => {
                    return Err(Error::Contract(format!(
                        "parameter {name} has a non-finite gradient"
                    )))
                }
                Some(_) => {}
            }
        }
        self.step_count += 1;
        let t = i32::try_from(self.step_count).unwrap_or(i32::MAX);
        let one = T::one();
        let c1 = one - self.beta1.powi(t);
        let c2 = one - self.beta2.powi(t);
        for ((p, m), v) in graph
            .params_mut()
            .values_mut()
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            let g = p.grad().expect("checked above").to_vec();
            for (i, theta) in p.data_mut().iter_mut().enumerate() {
                m[i] = self.beta1 * m[i] + (one - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (one - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                *theta -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

/// Free-function form of [`AdamState::step`].
pub fn adam_step<T: Scalar>(graph: &mut Graph<T>, state: &mut AdamState<T>) -> Result<()> {
    state.step(graph)
}
