//! RMSprop optimizer with optional per-tensor freezing.
//!
//! Update rule, applied element-wise:
//!
//! ```text
//! sq_avg <- decay * sq_avg + (1 - decay) * g^2
//! p      <- p - lr * g / (sqrt(sq_avg) + epsilon)
//! ```

use crate::error::{Error, Result};
use crate::nn::GradStack;
use crate::tensor::Tensor;

pub const DEFAULT_DECAY: f64 = 0.99;
pub const DEFAULT_EPSILON: f64 = 1e-5;

/// Squared-gradient moving averages, one tensor per parameter tensor.
#[derive(Debug, Clone)]
pub struct RmsPropState {
    pub sq_avg: Vec<Tensor>,
    pub decay: f64,
    pub epsilon: f64,
}

impl RmsPropState {
    pub fn new(params: &[&Tensor]) -> Self {
        Self::with_hyper(params, DEFAULT_DECAY, DEFAULT_EPSILON).unwrap()
    }

    pub fn with_hyper(params: &[&Tensor], decay: f64, epsilon: f64) -> Result<Self> {
        if !(0.0 < decay && decay < 1.0) {
            return Err(Error::InvalidConfig(format!("rmsprop decay must be in (0,1), got {decay}")));
        }
        if epsilon <= 0.0 {
            return Err(Error::InvalidConfig(format!("rmsprop epsilon must be > 0, got {epsilon}")));
        }
        Ok(RmsPropState {
            sq_avg: params.iter().map(|p| Tensor::zeros(p.rows(), p.cols())).collect(),
            decay,
            epsilon,
        })
    }
}

/// Which parameter tensors an optimizer step may touch. Frozen tensors are
/// skipped entirely: no parameter change and no state decay.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FreezeMask {
    trainable: Vec<bool>,
}

impl FreezeMask {
    pub fn new(trainable: Vec<bool>) -> Result<Self> {
        if !trainable.iter().any(|t| *t) {
            return Err(Error::InvalidConfig("freeze mask leaves no trainable tensors".into()));
        }
        Ok(FreezeMask { trainable })
    }

    pub fn all_trainable(n: usize) -> Self {
        FreezeMask { trainable: vec![true; n] }
    }

    #[inline]
    pub fn is_trainable(&self, tensor: usize) -> bool {
        self.trainable[tensor]
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.trainable.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.trainable.is_empty()
    }

    pub fn frozen_indices(&self) -> Vec<usize> {
        self.trainable
            .iter()
            .enumerate()
            .filter(|(_, t)| !**t)
            .map(|(i, _)| i)
            .collect()
    }
}

pub fn rmsprop_step(
    params: &mut [&mut Tensor],
    grads: &GradStack,
    state: &mut RmsPropState,
    lr: f64,
) -> Result<()> {
    rmsprop_step_masked(params, grads, state, lr, None)
}

/// Validates everything before mutating anything, so a bad gradient aborts
/// the step instead of corrupting parameters or optimizer state.
pub fn rmsprop_step_masked(
    params: &mut [&mut Tensor],
    grads: &GradStack,
    state: &mut RmsPropState,
    lr: f64,
    mask: Option<&FreezeMask>,
) -> Result<()> {
    if params.len() != grads.tensors.len() || params.len() != state.sq_avg.len() {
        return Err(Error::shape(
            "rmsprop_step",
            format!("{} parameter tensors", params.len()),
            format!("{} grads, {} state", grads.tensors.len(), state.sq_avg.len()),
        ));
    }
    if let Some(m) = mask {
        if m.len() != params.len() {
            return Err(Error::shape(
                "rmsprop_step mask",
                format!("{} tensors", params.len()),
                format!("{} mask entries", m.len()),
            ));
        }
    }
    for (i, (p, g)) in params.iter().zip(&grads.tensors).enumerate() {
        if !p.same_shape(g) || !p.same_shape(&state.sq_avg[i]) {
            return Err(Error::shape(
                format!("rmsprop_step tensor {i}"),
                format!("{:?}", p.shape()),
                format!("grad {:?}, state {:?}", g.shape(), state.sq_avg[i].shape()),
            ));
        }
        if !g.all_finite() {
            return Err(Error::non_finite("gradient", format!("tensor {i} contains NaN/Inf")));
        }
    }

    let decay = state.decay;
    let eps = state.epsilon;
    for (i, p) in params.iter_mut().enumerate() {
        if let Some(m) = mask {
            if !m.is_trainable(i) {
                continue;
            }
        }
        let g = grads.tensors[i].data();
        let s = state.sq_avg[i].data_mut();
        let pd = p.data_mut();
        for k in 0..g.len() {
            s[k] = decay * s[k] + (1.0 - decay) * g[k] * g[k];
            pd[k] -= lr * g[k] / (s[k].sqrt() + eps);
        }
    }
    Ok(())
}

/// Scales `grads` down to `max_norm` when their global L2 norm exceeds it.
/// Returns the pre-clip norm.
pub fn clip_global_norm(grads: &mut GradStack, max_norm: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > max_norm && norm > 0.0 {
        grads.scale(max_norm / norm);
    }
    norm
}
