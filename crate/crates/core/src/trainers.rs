//! Vanilla multi-task training and fine-tuning transfer.
//!
//! Multi-task training cycles the environments in fixed order, running
//! `steps_per_visit` env steps of A2C on the visited environment's actor and
//! critic heads (trunks shared, other heads untouched) until every
//! environment has consumed its budget exactly.
//!
//! Fine-tuning copies all weights from a single-task checkpoint and trains on
//! the target environment with everything frozen except the final layer of
//! the actor and the final layer of the critic (a flag unfreezes the whole
//! network for comparison). Optimizer state is not transferred.

use crate::a2c::{a2c_update, collect_segment, run_a2c_loop, A2cOptimizer, TrainConfig};
use crate::checkpoint::Checkpoint;
use crate::curve::CurveRow;
use crate::env::{make_variant, EnvCursor, ACTION_DIM, OBS_DIM};
use crate::error::{Error, Result};
use crate::eval::{evaluate_spec, EvalMode, EvalReport};
use crate::rng::{stream, STREAM_ACTOR_INIT, STREAM_CRITIC_INIT, STREAM_TRAIN};
use crate::policy::{ActorNetwork, CriticNetwork};

/// Fixed round-robin over environments.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiTaskSchedule {
    pub env_names: Vec<String>,
    /// Env steps spent per visit; must be a multiple of t_max.
    pub steps_per_visit: usize,
    pub total_steps_per_env: usize,
}

impl MultiTaskSchedule {
    pub fn new(env_names: Vec<String>, steps_per_visit: usize, total_steps_per_env: usize) -> Self {
        MultiTaskSchedule {
            env_names,
            steps_per_visit,
            total_steps_per_env,
        }
    }

    pub fn validate(&self, t_max: usize) -> Result<()> {
        if self.steps_per_visit == 0 {
            return Err(Error::InvalidConfig("steps_per_visit must be >= 1".into()));
        }
        if self.steps_per_visit % t_max != 0 {
            return Err(Error::InvalidConfig(format!(
                "steps_per_visit {} is not a multiple of t_max {t_max}",
                self.steps_per_visit
            )));
        }
        Ok(())
    }

    /// Visit order as environment indices. Every environment appears once per
    /// round, so between two visits to env i every other env is visited
    /// exactly once.
    pub fn visit_plan(&self) -> Vec<usize> {
        let n = self.env_names.len();
        if n == 0 || self.total_steps_per_env == 0 {
            return Vec::new();
        }
        let visits_per_env = self.total_steps_per_env.div_ceil(self.steps_per_visit);
        let mut plan = Vec::with_capacity(visits_per_env * n);
        for _ in 0..visits_per_env {
            plan.extend(0..n);
        }
        plan
    }
}

/// Round-robin A2C over n >= 2 environments with per-env actor/critic heads.
pub fn train_vanilla_multitask(
    schedule: &MultiTaskSchedule,
    config: &TrainConfig,
) -> Result<(Checkpoint, Vec<CurveRow>)> {
    let n = schedule.env_names.len();
    if n < 2 {
        return Err(Error::InvalidConfig(format!(
            "multi-task training needs >= 2 environments, got {n}"
        )));
    }
    config.validate()?;
    schedule.validate(config.t_max)?;

    let specs = schedule
        .env_names
        .iter()
        .map(|name| make_variant(name))
        .collect::<Result<Vec<_>>>()?;
    let mut actor = ActorNetwork::new(OBS_DIM, ACTION_DIM, n, &mut stream(config.seed, STREAM_ACTOR_INIT));
    let mut critic = CriticNetwork::new(OBS_DIM, n, &mut stream(config.seed, STREAM_CRITIC_INIT));
    let mut opt = A2cOptimizer::new(&actor, &critic);
    let mut rng = stream(config.seed, STREAM_TRAIN);

    let total = schedule.total_steps_per_env;
    let mut cursors: Vec<EnvCursor> = specs.iter().map(|s| EnvCursor::new(s.clone())).collect();
    let mut consumed = vec![0usize; n];
    let mut next_eval = vec![config.eval_every; n];
    let mut curves = Vec::new();

    for &i in &schedule.visit_plan() {
        if consumed[i] >= total {
            continue;
        }
        let mut visit_left = schedule.steps_per_visit.min(total - consumed[i]);
        while visit_left > 0 {
            let t_max = config.t_max.min(visit_left);
            let seg = collect_segment(&mut cursors[i], &actor, &critic, i, t_max, &mut rng)?;
            consumed[i] += seg.len();
            visit_left -= seg.len();
            a2c_update(&mut actor, &mut critic, &seg, config, &mut opt)?;
        }
        if consumed[i] >= next_eval[i] {
            let report =
                evaluate_spec(&actor, &specs[i], i, config.eval_rollouts, config.seed, EvalMode::Stochastic)?;
            curves.push(CurveRow {
                env_name: specs[i].name.clone(),
                env_steps: consumed[i],
                mean_return: report.mean_return,
                std_return: report.std_return,
                wall_clock_s: 0.0,
            });
            next_eval[i] = (consumed[i] / config.eval_every + 1) * config.eval_every;
        }
    }
    debug_assert!(consumed.iter().all(|c| *c == total));

    let ckpt = Checkpoint::from_networks(
        &actor,
        Some(&critic),
        schedule.env_names.clone(),
        crate::config::train_config_kv(config),
        config.seed,
        "multitask",
    );
    Ok((ckpt, curves))
}

/// Copies a single-task checkpoint and fine-tunes it on `target_env`.
/// `full_network = false` freezes everything but the final actor and critic
/// layers; `true` fine-tunes every tensor.
pub fn transfer_and_finetune(
    source: &Checkpoint,
    target_env: &str,
    config: &TrainConfig,
    full_network: bool,
) -> Result<(Checkpoint, Vec<CurveRow>)> {
    config.validate()?;
    let spec = make_variant(target_env)?;
    let (mut actor, critic) = source.build_networks()?;
    let Some(mut critic) = critic else {
        return Err(Error::ArchitectureMismatch(
            "fine-tuning needs an actor-critic checkpoint (no critic found)".into(),
        ));
    };
    if actor.n_heads() != 1 {
        return Err(Error::ArchitectureMismatch(format!(
            "fine-tuning expects a single-task checkpoint, got {} heads",
            actor.n_heads()
        )));
    }
    if actor.obs_dim() != OBS_DIM || actor.action_dim() != ACTION_DIM {
        return Err(Error::ArchitectureMismatch(format!(
            "checkpoint dims ({}, {}) do not match env dims ({OBS_DIM}, {ACTION_DIM})",
            actor.obs_dim(),
            actor.action_dim()
        )));
    }

    // fresh optimizer state: second moments from the source run do not carry over
    let mut opt = A2cOptimizer::new(&actor, &critic);
    if !full_network {
        opt.actor_mask = Some(actor.final_layer_mask());
        opt.critic_mask = Some(critic.final_layer_mask());
    }
    let curves = run_a2c_loop(&mut actor, &mut critic, &spec, 0, config, &mut opt)?;
    let ckpt = Checkpoint::from_networks(
        &actor,
        Some(&critic),
        vec![target_env.to_string()],
        crate::config::train_config_kv(config),
        config.seed,
        "finetune",
    );
    Ok((ckpt, curves))
}

/// Evaluates a checkpoint on each listed environment: the Table-shaped
/// `env -> mean +- std over n rollouts` report.
pub fn evaluate_matrix(
    checkpoint: &Checkpoint,
    env_names: &[String],
    n_rollouts: usize,
    seed: u64,
    mode: EvalMode,
) -> Result<Vec<EvalReport>> {
    let (actor, _) = checkpoint.build_networks()?;
    let mut reports = Vec::with_capacity(env_names.len());
    for env in env_names {
        let head = checkpoint.head_for_env(env)?;
        let spec = make_variant(env)?;
        reports.push(evaluate_spec(&actor, &spec, head, n_rollouts, seed, mode)?);
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::a2c::train_single;

    fn quick_config(seed: u64, total: usize) -> TrainConfig {
        TrainConfig {
            total_env_steps: total,
            eval_every: total.max(1),
            eval_rollouts: 2,
            seed,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn visit_plan_is_fair_round_robin() {
        let schedule = MultiTaskSchedule::new(vec!["A".into(), "B".into()], 5, 10);
        assert_eq!(schedule.visit_plan(), vec![0, 1, 0, 1]);

        let schedule = MultiTaskSchedule::new(vec!["A".into(), "B".into(), "C".into()], 5, 20);
        let plan = schedule.visit_plan();
        // between consecutive visits to env i, every other env appears exactly once
        for i in 0..3usize {
            let positions: Vec<usize> = plan
                .iter()
                .enumerate()
                .filter(|(_, e)| **e == i)
                .map(|(p, _)| p)
                .collect();
            for w in positions.windows(2) {
                let between: Vec<usize> = plan[w[0] + 1..w[1]].to_vec();
                let mut sorted = between.clone();
                sorted.sort_unstable();
                let expect: Vec<usize> = (0..3).filter(|e| *e != i).collect();
                assert_eq!(sorted, expect);
            }
        }
    }

    #[test]
    fn schedule_validation() {
        let schedule = MultiTaskSchedule::new(vec!["A".into(), "B".into()], 7, 100);
        assert!(schedule.validate(5).is_err());
        assert!(schedule.validate(7).is_ok());
        let schedule = MultiTaskSchedule::new(vec!["A".into(), "B".into()], 0, 100);
        assert!(schedule.validate(5).is_err());
    }

    #[test]
    fn multitask_needs_two_envs() {
        let schedule = MultiTaskSchedule::new(vec!["Base".into()], 5, 10);
        assert!(train_vanilla_multitask(&schedule, &quick_config(0, 10)).is_err());
    }

    #[test]
    fn multitask_budget_is_exact_and_curves_interleave() {
        let schedule = MultiTaskSchedule::new(vec!["SmallMass".into(), "BigMass".into()], 5, 20);
        let config = TrainConfig {
            total_env_steps: 20,
            eval_every: 10,
            eval_rollouts: 1,
            seed: 3,
            ..TrainConfig::default()
        };
        let (ckpt, curves) = train_vanilla_multitask(&schedule, &config).unwrap();
        assert_eq!(ckpt.env_names, vec!["SmallMass".to_string(), "BigMass".to_string()]);
        // one row per env at steps 10 and 20
        let steps_for = |env: &str| -> Vec<usize> {
            curves
                .iter()
                .filter(|r| r.env_name == env)
                .map(|r| r.env_steps)
                .collect()
        };
        assert_eq!(steps_for("SmallMass"), vec![10, 20]);
        assert_eq!(steps_for("BigMass"), vec![10, 20]);
    }

    #[test]
    fn multitask_is_deterministic_per_seed() {
        let schedule = MultiTaskSchedule::new(vec!["SmallDrag".into(), "BigDrag".into()], 5, 30);
        let config = quick_config(9, 30);
        let (a, ca) = train_vanilla_multitask(&schedule, &config).unwrap();
        let (b, cb) = train_vanilla_multitask(&schedule, &config).unwrap();
        assert_eq!(a, b);
        assert_eq!(ca, cb);
    }

    #[test]
    fn finetune_zero_budget_returns_source_weights() {
        let (source, _) = train_single("SmallMass", &quick_config(1, 100)).unwrap();
        let (out, curves) = transfer_and_finetune(&source, "SmallDrag", &quick_config(2, 0), false).unwrap();
        assert!(curves.is_empty());
        assert_eq!(out.params, source.params);
        assert_eq!(out.env_names, vec!["SmallDrag".to_string()]);
    }

    #[test]
    fn finetune_freezes_all_but_final_layers() {
        let (source, _) = train_single("SmallMass", &quick_config(4, 200)).unwrap();
        let (tuned, _) = transfer_and_finetune(&source, "SmallDrag", &quick_config(5, 200), false).unwrap();

        let (src_actor, src_critic) = source.build_networks().unwrap();
        let (new_actor, new_critic) = tuned.build_networks().unwrap();
        let (src_critic, new_critic) = (src_critic.unwrap(), new_critic.unwrap());

        let actor_mask = src_actor.final_layer_mask();
        for (i, (a, b)) in src_actor.params().iter().zip(new_actor.params()).enumerate() {
            if actor_mask.is_trainable(i) {
                assert_ne!(a.data(), b.data(), "actor tensor {i} should have trained");
            } else {
                assert_eq!(a.data(), b.data(), "actor tensor {i} should be frozen");
            }
        }
        let critic_mask = src_critic.final_layer_mask();
        for (i, (a, b)) in src_critic.params().iter().zip(new_critic.params()).enumerate() {
            if critic_mask.is_trainable(i) {
                assert_ne!(a.data(), b.data(), "critic tensor {i} should have trained");
            } else {
                assert_eq!(a.data(), b.data(), "critic tensor {i} should be frozen");
            }
        }
    }

    #[test]
    fn full_network_flag_unfreezes_everything() {
        let (source, _) = train_single("SmallMass", &quick_config(6, 200)).unwrap();
        let (tuned, _) = transfer_and_finetune(&source, "SmallDrag", &quick_config(7, 200), true).unwrap();
        let (src_actor, _) = source.build_networks().unwrap();
        let (new_actor, _) = tuned.build_networks().unwrap();
        // trunk moved too
        assert_ne!(src_actor.params()[0].data(), new_actor.params()[0].data());
    }

    #[test]
    fn finetune_rejects_multihead_and_actor_only_sources() {
        let schedule = MultiTaskSchedule::new(vec!["SmallMass".into(), "BigMass".into()], 5, 10);
        let (multi, _) = train_vanilla_multitask(&schedule, &quick_config(8, 10)).unwrap();
        assert!(matches!(
            transfer_and_finetune(&multi, "SmallDrag", &quick_config(8, 10), false),
            Err(Error::ArchitectureMismatch(_))
        ));

        let mut actor_only = multi.clone();
        actor_only.architecture.critic = None;
        actor_only.params.retain(|t| t.name.starts_with("actor."));
        actor_only.architecture.n_heads = 2;
        assert!(matches!(
            transfer_and_finetune(&actor_only, "SmallDrag", &quick_config(8, 10), false),
            Err(Error::ArchitectureMismatch(_))
        ));
    }

    #[test]
    fn multitask_visit_leaves_other_heads_bitwise_unchanged() {
        use crate::rng::seeded;
        let mut actor = ActorNetwork::new(OBS_DIM, ACTION_DIM, 3, &mut seeded(20));
        let mut critic = CriticNetwork::new(OBS_DIM, 3, &mut seeded(21));
        let mut opt = A2cOptimizer::new(&actor, &critic);
        let mut cursor = EnvCursor::for_variant("SmallMass").unwrap();
        let mut rng = stream(22, STREAM_TRAIN);
        let config = TrainConfig::default();

        let actor_snapshot = |net: &ActorNetwork, head: usize| -> Vec<Vec<u64>> {
            net.head_tensor_range(head)
                .map(|i| net.params()[i].data().iter().map(|v| v.to_bits()).collect())
                .collect()
        };
        let critic_snapshot = |net: &CriticNetwork, head: usize| -> Vec<Vec<u64>> {
            net.head_tensor_range(head)
                .map(|i| net.params()[i].data().iter().map(|v| v.to_bits()).collect())
                .collect()
        };
        let before = (
            actor_snapshot(&actor, 0),
            actor_snapshot(&actor, 2),
            critic_snapshot(&critic, 0),
            critic_snapshot(&critic, 2),
        );
        // one visit to env/head 1
        let seg = collect_segment(&mut cursor, &actor, &critic, 1, 5, &mut rng).unwrap();
        a2c_update(&mut actor, &mut critic, &seg, &config, &mut opt).unwrap();
        let after = (
            actor_snapshot(&actor, 0),
            actor_snapshot(&actor, 2),
            critic_snapshot(&critic, 0),
            critic_snapshot(&critic, 2),
        );
        assert_eq!(before, after);
        // the visited heads moved
        assert_ne!(actor_snapshot(&actor, 1), {
            let (fresh, _) = (ActorNetwork::new(OBS_DIM, ACTION_DIM, 3, &mut seeded(20)), ());
            actor_snapshot(&fresh, 1)
        });
    }

    #[test]
    fn evaluate_matrix_shapes_and_head_routing() {
        let envs: Vec<String> = crate::env::SCALED_VARIANTS.iter().map(|s| s.to_string()).collect();
        let schedule = MultiTaskSchedule::new(envs.clone(), 5, 10);
        let (multi, _) = train_vanilla_multitask(&schedule, &quick_config(10, 10)).unwrap();
        let reports = evaluate_matrix(&multi, &envs, 20, 77, EvalMode::Stochastic).unwrap();
        assert_eq!(reports.len(), 6);
        for (r, env) in reports.iter().zip(&envs) {
            assert_eq!(&r.env_name, env);
            assert_eq!(r.n_rollouts, 20);
            assert_eq!(r.per_rollout_returns.len(), 20);
        }
        // unknown env for a multi-head checkpoint is an error
        assert!(evaluate_matrix(&multi, &["Base".into()], 2, 0, EvalMode::Stochastic).is_err());

        // single-head checkpoints evaluate anywhere via head 0
        let (single, _) = train_single("Base", &quick_config(11, 10)).unwrap();
        let reports = evaluate_matrix(
            &single,
            &["SmallDrag".into(), "BigDrag".into()],
            2,
            0,
            EvalMode::Stochastic,
        )
        .unwrap();
        assert_eq!(reports.len(), 2);
    }
}
