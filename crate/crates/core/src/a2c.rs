//! Advantage actor-critic on t_max-step rollout segments.
//!
//! The trainer alternates `collect_segment` (up to t_max env steps, stopping
//! early at episode end) with one combined RMSprop update per segment. The
//! per-segment loss, summed over the k recorded steps, is
//!
//! ```text
//! L = sum_t [ -log pi(a_t|s_t) * A_t - entropy_coef * H(pi(s_t)) ]
//!   + value_coef * sum_t (R_t - V(s_t))^2
//! ```
//!
//! where `R_t` is the n-step return bootstrapped with the critic's value of
//! the state after the segment and `A_t = R_t - values[t]`. Advantages are
//! constants in the policy term: no gradient reaches the critic through it.
//! Every transition is consumed by exactly one update and then dropped.

use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;

use crate::checkpoint::Checkpoint;
use crate::curve::CurveRow;
use crate::env::{make_variant, EnvCursor, MorphologySpec, ACTION_DIM, OBS_DIM};
use crate::error::{Error, Result};
use crate::eval::{evaluate_spec, EvalMode};
use crate::nn::GradStack;
use crate::optim::{clip_global_norm, rmsprop_step_masked, FreezeMask, RmsPropState};
use crate::policy::{
    entropy, entropy_grad, log_prob, log_prob_grad, sample_action, ActorNetwork, CriticNetwork,
};
use crate::rng::{stream, STREAM_ACTOR_INIT, STREAM_CRITIC_INIT, STREAM_TRAIN};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub gamma: f64,
    pub t_max: usize,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub total_env_steps: usize,
    /// Evaluate (and record a curve row) each time this many env steps pass.
    pub eval_every: usize,
    pub eval_rollouts: usize,
    pub seed: u64,
    /// Optional max global gradient norm, applied per network. Off by default.
    pub grad_clip: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.0007,
            gamma: 0.99,
            t_max: 5,
            entropy_coef: 0.01,
            value_coef: 0.5,
            total_env_steps: 200_000,
            eval_every: 10_000,
            eval_rollouts: 20,
            seed: 0,
            grad_clip: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.lr > 0.0) {
            return bad(format!("lr must be > 0, got {}", self.lr));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad(format!("gamma must be in [0,1], got {}", self.gamma));
        }
        if self.t_max == 0 {
            return bad("t_max must be >= 1".into());
        }
        if self.entropy_coef < 0.0 || self.value_coef < 0.0 {
            return bad("entropy_coef and value_coef must be >= 0".into());
        }
        if self.eval_every == 0 {
            return bad("eval_every must be >= 1".into());
        }
        if self.eval_rollouts == 0 {
            return bad("n_rollouts must be >= 1".into());
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0) {
                return bad(format!("grad_clip must be > 0, got {c}"));
            }
        }
        Ok(())
    }
}

/// Up-to-t_max on-policy trajectory slice.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutSegment {
    pub observations: Vec<[f64; OBS_DIM]>,
    pub actions: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    /// Critic estimates V(s_t) recorded at collection time.
    pub values: Vec<f64>,
    /// True when the segment ended at a terminal state.
    pub done: bool,
    /// V(s_{t+k}) from the critic; 0 when `done`.
    pub bootstrap_value: f64,
    pub head_id: usize,
}

impl RolloutSegment {
    #[inline]
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

/// Steps the environment up to `t_max` times under the head's current policy.
/// On episode end the segment is truncated, marked done, and the cursor is
/// reset for the next call.
pub fn collect_segment(
    cursor: &mut EnvCursor,
    actor: &ActorNetwork,
    critic: &CriticNetwork,
    head_id: usize,
    t_max: usize,
    rng: &mut ChaCha8Rng,
) -> Result<RolloutSegment> {
    assert!(t_max >= 1, "t_max must be >= 1");
    let mut seg = RolloutSegment {
        observations: Vec::with_capacity(t_max),
        actions: Vec::with_capacity(t_max),
        rewards: Vec::with_capacity(t_max),
        values: Vec::with_capacity(t_max),
        done: false,
        bootstrap_value: 0.0,
        head_id,
    };
    for _ in 0..t_max {
        let obs = cursor.obs();
        let params = actor.forward(&obs, head_id)?;
        let action = sample_action(&params, rng);
        let value = critic.value(&obs, head_id)?;
        let result = cursor.step(&action)?;
        seg.observations.push(obs);
        seg.actions.push(action);
        seg.rewards.push(result.reward);
        seg.values.push(value);
        if result.done {
            seg.done = true;
            cursor.reset();
            break;
        }
    }
    if !seg.done {
        seg.bootstrap_value = critic.value(&cursor.obs(), head_id)?;
    }
    Ok(seg)
}

/// n-step discounted returns and advantages:
/// `R_t = sum_i gamma^i r_{t+i} + gamma^(k-t) * bootstrap`, `A_t = R_t - values[t]`.
pub fn compute_advantages_returns(seg: &RolloutSegment, gamma: f64) -> (Vec<f64>, Vec<f64>) {
    let k = seg.len();
    let mut returns = vec![0.0; k];
    let mut running = seg.bootstrap_value;
    for t in (0..k).rev() {
        running = seg.rewards[t] + gamma * running;
        returns[t] = running;
    }
    let advantages = returns
        .iter()
        .zip(&seg.values)
        .map(|(r, v)| r - v)
        .collect();
    (advantages, returns)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    /// `sum_t [-log pi * A - entropy_coef * H]`
    pub policy_loss: f64,
    /// `sum_t (R_t - V(s_t))^2` (unweighted)
    pub value_loss: f64,
    /// `sum_t H(pi(s_t))`
    pub entropy_sum: f64,
    /// `policy_loss + value_coef * value_loss`
    pub total_loss: f64,
}

fn a2c_forward(
    actor: &ActorNetwork,
    critic: &CriticNetwork,
    seg: &RolloutSegment,
    config: &TrainConfig,
    mut grads: Option<(&mut GradStack, &mut GradStack)>,
) -> Result<UpdateStats> {
    let (advantages, returns) = compute_advantages_returns(seg, config.gamma);
    let mut policy_loss = 0.0;
    let mut value_loss = 0.0;
    let mut entropy_sum = 0.0;
    for t in 0..seg.len() {
        let obs = &seg.observations[t];
        let action = &seg.actions[t];
        let (params, actor_cache) = actor.forward_cached(obs, seg.head_id)?;
        let lp = log_prob(&params, action);
        let ent = entropy(&params);
        policy_loss += -lp * advantages[t] - config.entropy_coef * ent;
        entropy_sum += ent;

        let (v, critic_cache) = critic.forward_cached(obs, seg.head_id)?;
        let err = returns[t] - v;
        value_loss += err * err;

        if let Some((actor_grads, critic_grads)) = grads.as_mut() {
            let (lp_dm, lp_dlv) = log_prob_grad(&params, action);
            let (_, ent_dlv) = entropy_grad(&params);
            let d_mean: Vec<f64> = lp_dm.iter().map(|g| -advantages[t] * g).collect();
            let d_lv: Vec<f64> = lp_dlv
                .iter()
                .zip(&ent_dlv)
                .map(|(g, e)| -advantages[t] * g - config.entropy_coef * e)
                .collect();
            actor.backward_into(&actor_cache, &d_mean, &d_lv, actor_grads)?;
            critic.backward_into(&critic_cache, config.value_coef * 2.0 * (v - returns[t]), critic_grads)?;
        }
    }
    let total_loss = policy_loss + config.value_coef * value_loss;
    if !total_loss.is_finite() {
        return Err(Error::non_finite(
            "a2c loss",
            format!(
                "policy_loss={policy_loss}, value_loss={value_loss}, entropy_sum={entropy_sum}, head={}, segment_len={}",
                seg.head_id,
                seg.len()
            ),
        ));
    }
    Ok(UpdateStats {
        policy_loss,
        value_loss,
        entropy_sum,
        total_loss,
    })
}

/// Loss statistics only; the finite-difference path of gradient checks.
pub fn a2c_loss(
    actor: &ActorNetwork,
    critic: &CriticNetwork,
    seg: &RolloutSegment,
    config: &TrainConfig,
) -> Result<UpdateStats> {
    a2c_forward(actor, critic, seg, config, None)
}

/// Loss statistics plus analytic gradients for both networks.
pub fn a2c_loss_and_grads(
    actor: &ActorNetwork,
    critic: &CriticNetwork,
    seg: &RolloutSegment,
    config: &TrainConfig,
) -> Result<(UpdateStats, GradStack, GradStack)> {
    let mut actor_grads = GradStack::zeros_like(&actor.params());
    let mut critic_grads = GradStack::zeros_like(&critic.params());
    let stats = a2c_forward(actor, critic, seg, config, Some((&mut actor_grads, &mut critic_grads)))?;
    Ok((stats, actor_grads, critic_grads))
}

/// Optimizer state for one actor-critic pair, with optional freeze masks
/// (used by fine-tuning transfer).
#[derive(Debug, Clone)]
pub struct A2cOptimizer {
    pub actor_state: RmsPropState,
    pub critic_state: RmsPropState,
    pub actor_mask: Option<FreezeMask>,
    pub critic_mask: Option<FreezeMask>,
}

impl A2cOptimizer {
    pub fn new(actor: &ActorNetwork, critic: &CriticNetwork) -> Self {
        A2cOptimizer {
            actor_state: RmsPropState::new(&actor.params()),
            critic_state: RmsPropState::new(&critic.params()),
            actor_mask: None,
            critic_mask: None,
        }
    }
}

/// One RMSprop step on actor and critic from a collected segment.
pub fn a2c_update(
    actor: &mut ActorNetwork,
    critic: &mut CriticNetwork,
    seg: &RolloutSegment,
    config: &TrainConfig,
    opt: &mut A2cOptimizer,
) -> Result<UpdateStats> {
    let (stats, mut actor_grads, mut critic_grads) = a2c_loss_and_grads(actor, critic, seg, config)?;
    if let Some(max_norm) = config.grad_clip {
        clip_global_norm(&mut actor_grads, max_norm);
        clip_global_norm(&mut critic_grads, max_norm);
    }
    rmsprop_step_masked(
        &mut actor.params_mut(),
        &actor_grads,
        &mut opt.actor_state,
        config.lr,
        opt.actor_mask.as_ref(),
    )?;
    rmsprop_step_masked(
        &mut critic.params_mut(),
        &critic_grads,
        &mut opt.critic_state,
        config.lr,
        opt.critic_mask.as_ref(),
    )?;
    Ok(stats)
}

/// Sequential collect/update loop on one environment and head, recording an
/// evaluation curve row every `eval_every` env steps. Consumes exactly
/// `total_env_steps` steps.
pub(crate) fn run_a2c_loop(
    actor: &mut ActorNetwork,
    critic: &mut CriticNetwork,
    spec: &MorphologySpec,
    head_id: usize,
    config: &TrainConfig,
    opt: &mut A2cOptimizer,
) -> Result<Vec<CurveRow>> {
    let mut cursor = EnvCursor::new(spec.clone());
    let mut rng = stream(config.seed, STREAM_TRAIN);
    let mut curves = Vec::new();
    let mut consumed = 0usize;
    let mut next_eval = config.eval_every;
    while consumed < config.total_env_steps {
        let t_max = config.t_max.min(config.total_env_steps - consumed);
        let seg = collect_segment(&mut cursor, actor, critic, head_id, t_max, &mut rng)?;
        consumed += seg.len();
        a2c_update(actor, critic, &seg, config, opt)?;
        if consumed >= next_eval {
            let report = evaluate_spec(actor, spec, head_id, config.eval_rollouts, config.seed, EvalMode::Stochastic)?;
            curves.push(CurveRow {
                env_name: spec.name.clone(),
                env_steps: consumed,
                mean_return: report.mean_return,
                std_return: report.std_return,
                wall_clock_s: 0.0,
            });
            next_eval = (consumed / config.eval_every + 1) * config.eval_every;
        }
    }
    Ok(curves)
}

/// Trains a fresh single-head actor-critic pair on one environment.
pub fn train_single(env_name: &str, config: &TrainConfig) -> Result<(Checkpoint, Vec<CurveRow>)> {
    config.validate()?;
    let spec = make_variant(env_name)?;
    let mut actor = ActorNetwork::new(OBS_DIM, ACTION_DIM, 1, &mut stream(config.seed, STREAM_ACTOR_INIT));
    let mut critic = CriticNetwork::new(OBS_DIM, 1, &mut stream(config.seed, STREAM_CRITIC_INIT));
    let mut opt = A2cOptimizer::new(&actor, &critic);
    let curves = run_a2c_loop(&mut actor, &mut critic, &spec, 0, config, &mut opt)?;
    let ckpt = Checkpoint::from_networks(
        &actor,
        Some(&critic),
        vec![env_name.to_string()],
        config_snapshot(config),
        config.seed,
        "train",
    );
    Ok((ckpt, curves))
}

pub(crate) fn config_snapshot(config: &TrainConfig) -> BTreeMap<String, String> {
    crate::config::train_config_kv(config)
}
