//! Evaluation protocol: mean and sample standard deviation of the cumulative
//! reward over full-episode rollouts.
//!
//! Rollouts sample actions stochastically from the policy by default; the
//! deterministic mode takes the Gaussian mean instead. Rollout `j` draws from
//! its own RNG stream derived from the evaluation seed, so reports are
//! reproducible and independent of caller RNG state.

use crate::env::{make_variant, EnvCursor, MorphologySpec};
use crate::error::Result;
use crate::policy::{mean_action, sample_action, ActorNetwork};
use crate::rng::{stream, STREAM_EVAL_BASE};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    Stochastic,
    MeanAction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub env_name: String,
    pub n_rollouts: usize,
    pub mean_return: f64,
    pub std_return: f64,
    /// False when `n_rollouts < 2` (std reported as 0 in that case).
    pub std_is_defined: bool,
    pub per_rollout_returns: Vec<f64>,
}

/// Sample mean and (n-1)-denominator standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64, bool) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0, false);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0, false);
    }
    let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    (mean, (ss / (n - 1) as f64).sqrt(), true)
}

/// 20-rollout protocol entry point (stochastic actions).
pub fn evaluate(
    actor: &ActorNetwork,
    env_name: &str,
    head_id: usize,
    n_rollouts: usize,
    seed: u64,
) -> Result<EvalReport> {
    let spec = make_variant(env_name)?;
    evaluate_spec(actor, &spec, head_id, n_rollouts, seed, EvalMode::Stochastic)
}

pub fn evaluate_spec(
    actor: &ActorNetwork,
    spec: &MorphologySpec,
    head_id: usize,
    n_rollouts: usize,
    seed: u64,
    mode: EvalMode,
) -> Result<EvalReport> {
    let mut returns = Vec::with_capacity(n_rollouts);
    for j in 0..n_rollouts {
        let mut rng = stream(seed, STREAM_EVAL_BASE + j as u64);
        let mut cursor = EnvCursor::new(spec.clone());
        let mut total = 0.0;
        loop {
            let params = actor.forward(&cursor.obs(), head_id)?;
            let action = match mode {
                EvalMode::Stochastic => sample_action(&params, &mut rng),
                EvalMode::MeanAction => mean_action(&params),
            };
            let result = cursor.step(&action)?;
            total += result.reward;
            if result.done {
                break;
            }
        }
        returns.push(total);
    }
    let (mean_return, std_return, std_is_defined) = mean_std(&returns);
    Ok(EvalReport {
        env_name: spec.name.clone(),
        n_rollouts,
        mean_return,
        std_return,
        std_is_defined,
        per_rollout_returns: returns,
    })
}
