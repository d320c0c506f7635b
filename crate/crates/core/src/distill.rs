//! Policy distillation: train student heads to match frozen teacher policies
//! under the Gaussian KL loss.
//!
//! Data collection rolls t_max-step segments with a behavior policy chosen
//! per segment: the student with probability `p_student`, otherwise the
//! teacher. Each batch stores the observations and the teacher's policy
//! parameters at those observations (teachers are frozen, so recording at
//! collection time is an exact cache). Updates minimize the batch-mean
//! `kl_diag_gaussian(teacher, student)` through the student's trunk and the
//! batch's head; other heads receive zero gradient.
//!
//! Multi-task distillation cycles the environments, samples from the student
//! (`p_student = 1`), and trains no critic.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::checkpoint::Checkpoint;
use crate::curve::CurveRow;
use crate::env::{make_variant, EnvCursor, ACTION_DIM, OBS_DIM};
use crate::error::{Error, Result};
use crate::eval::{evaluate_spec, EvalMode};
use crate::nn::GradStack;
use crate::optim::{rmsprop_step, RmsPropState};
use crate::policy::{kl_diag_gaussian, kl_grad_student, sample_action, ActorNetwork, GaussianPolicyParams};
use crate::rng::{stream, STREAM_ACTOR_INIT, STREAM_TRAIN};

#[derive(Debug, Clone, PartialEq)]
pub struct DistillConfig {
    /// Probability that a segment's behavior policy is the student.
    pub p_student: f64,
    pub t_max: usize,
    pub lr: f64,
    /// Env-step budget per environment.
    pub total_env_steps: usize,
    pub eval_every: usize,
    pub eval_rollouts: usize,
    pub seed: u64,
}

impl Default for DistillConfig {
    fn default() -> Self {
        DistillConfig {
            p_student: 0.5,
            t_max: 5,
            lr: 0.0007,
            total_env_steps: 200_000,
            eval_every: 10_000,
            eval_rollouts: 20,
            seed: 0,
        }
    }
}

impl DistillConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p_student) {
            return Err(Error::InvalidConfig(format!(
                "p_student must be in [0,1], got {}",
                self.p_student
            )));
        }
        if self.t_max == 0 {
            return Err(Error::InvalidConfig("t_max must be >= 1".into()));
        }
        if !(self.lr > 0.0) {
            return Err(Error::InvalidConfig(format!("lr must be > 0, got {}", self.lr)));
        }
        if self.eval_every == 0 || self.eval_rollouts == 0 {
            return Err(Error::InvalidConfig("eval_every and n_rollouts must be >= 1".into()));
        }
        Ok(())
    }
}

/// One collected batch: observations plus the teacher's policy params there.
#[derive(Debug, Clone, PartialEq)]
pub struct DistillBatch {
    pub observations: Vec<[f64; OBS_DIM]>,
    pub teacher_params: Vec<GaussianPolicyParams>,
    pub env_id: usize,
    /// Which policy generated the behavior for this segment.
    pub behavior_was_student: bool,
}

impl DistillBatch {
    #[inline]
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

/// Rolls one t_max-length segment (shorter at episode end, auto-resetting the
/// cursor). The behavior policy is drawn once per segment.
pub fn collect_distill_batch(
    cursor: &mut EnvCursor,
    teacher: &ActorNetwork,
    student: &ActorNetwork,
    head_id: usize,
    config: &DistillConfig,
    rng: &mut ChaCha8Rng,
) -> Result<DistillBatch> {
    let use_student = rng.random::<f64>() < config.p_student;
    let mut batch = DistillBatch {
        observations: Vec::with_capacity(config.t_max),
        teacher_params: Vec::with_capacity(config.t_max),
        env_id: head_id,
        behavior_was_student: use_student,
    };
    for _ in 0..config.t_max {
        let obs = cursor.obs();
        let teacher_params = teacher.forward(&obs, 0)?;
        let behavior = if use_student {
            student.forward(&obs, head_id)?
        } else {
            teacher_params.clone()
        };
        let action = sample_action(&behavior, rng);
        batch.observations.push(obs);
        batch.teacher_params.push(teacher_params);
        let result = cursor.step(&action)?;
        if result.done {
            cursor.reset();
            break;
        }
    }
    Ok(batch)
}

/// Batch-mean KL without touching the student; finite-difference path.
pub fn distill_loss(student: &ActorNetwork, batch: &DistillBatch) -> Result<f64> {
    distill_forward(student, batch, None)
}

pub fn distill_loss_and_grads(student: &ActorNetwork, batch: &DistillBatch) -> Result<(f64, GradStack)> {
    let mut grads = GradStack::zeros_like(&student.params());
    let loss = distill_forward(student, batch, Some(&mut grads))?;
    Ok((loss, grads))
}

fn distill_forward(student: &ActorNetwork, batch: &DistillBatch, mut grads: Option<&mut GradStack>) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::InvalidData("empty distillation batch".into()));
    }
    if batch.env_id >= student.n_heads() {
        return Err(Error::HeadOutOfRange {
            head: batch.env_id,
            n_heads: student.n_heads(),
        });
    }
    let n = batch.len() as f64;
    let mut kl_sum = 0.0;
    for (obs, teacher_params) in batch.observations.iter().zip(&batch.teacher_params) {
        let (student_params, cache) = student.forward_cached(obs, batch.env_id)?;
        kl_sum += kl_diag_gaussian(teacher_params, &student_params)?;
        if let Some(g) = grads.as_mut() {
            let (dm, dlv) = kl_grad_student(teacher_params, &student_params)?;
            let d_mean: Vec<f64> = dm.iter().map(|v| v / n).collect();
            let d_lv: Vec<f64> = dlv.iter().map(|v| v / n).collect();
            student.backward_into(&cache, &d_mean, &d_lv, g)?;
        }
    }
    let mean_kl = kl_sum / n;
    if !mean_kl.is_finite() {
        return Err(Error::non_finite(
            "distillation loss",
            format!("mean KL over {} observations, env {}", batch.len(), batch.env_id),
        ));
    }
    Ok(mean_kl)
}

/// One RMSprop step on the student; returns the batch-mean KL before the step.
pub fn distill_update(
    student: &mut ActorNetwork,
    batch: &DistillBatch,
    state: &mut RmsPropState,
    lr: f64,
) -> Result<f64> {
    let (mean_kl, grads) = distill_loss_and_grads(student, batch)?;
    rmsprop_step(&mut student.params_mut(), &grads, state, lr)?;
    Ok(mean_kl)
}

/// Per-head KL trajectory of a distillation run: the first and last batch-mean
/// KL seen by each environment's head.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadDistillStats {
    pub env_name: String,
    pub initial_kl: f64,
    pub final_kl: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DistillStats {
    pub per_env: Vec<HeadDistillStats>,
}

/// Multi-task distillation: one teacher per environment, a fresh multi-head
/// student (actor only, no critic), environments cycled one batch at a time,
/// behavior sampled from the student.
pub fn train_distill_multitask(
    env_names: &[String],
    teacher_checkpoints: &[Checkpoint],
    config: &DistillConfig,
) -> Result<(Checkpoint, Vec<CurveRow>, DistillStats)> {
    let forced = DistillConfig {
        p_student: 1.0,
        ..config.clone()
    };
    run_distill(env_names, teacher_checkpoints, &forced, "distill-multitask")
}

/// Single-environment distillation with the configured student/teacher mixing.
pub fn train_distill_single(
    env_name: &str,
    teacher_checkpoint: &Checkpoint,
    config: &DistillConfig,
) -> Result<(Checkpoint, Vec<CurveRow>, DistillStats)> {
    run_distill(
        &[env_name.to_string()],
        std::slice::from_ref(teacher_checkpoint),
        config,
        "distill",
    )
}

fn run_distill(
    env_names: &[String],
    teacher_checkpoints: &[Checkpoint],
    config: &DistillConfig,
    produced_by: &str,
) -> Result<(Checkpoint, Vec<CurveRow>, DistillStats)> {
    config.validate()?;
    if env_names.is_empty() {
        return Err(Error::InvalidConfig("distillation needs at least one environment".into()));
    }
    if teacher_checkpoints.len() != env_names.len() {
        return Err(Error::TeacherCountMismatch {
            teachers: teacher_checkpoints.len(),
            envs: env_names.len(),
        });
    }
    let n = env_names.len();
    let mut teachers = Vec::with_capacity(n);
    for (ckpt, env) in teacher_checkpoints.iter().zip(env_names) {
        let (actor, _) = ckpt.build_networks()?;
        if actor.n_heads() != 1 {
            return Err(Error::ArchitectureMismatch(format!(
                "teacher for {env} has {} heads; expected a single-task teacher",
                actor.n_heads()
            )));
        }
        if actor.obs_dim() != OBS_DIM || actor.action_dim() != ACTION_DIM {
            return Err(Error::ArchitectureMismatch(format!(
                "teacher for {env} has dims ({}, {}); expected ({OBS_DIM}, {ACTION_DIM})",
                actor.obs_dim(),
                actor.action_dim()
            )));
        }
        teachers.push(actor);
    }

    let specs: Vec<_> = env_names
        .iter()
        .map(|name| make_variant(name))
        .collect::<Result<Vec<_>>>()?;
    let mut student = ActorNetwork::new(OBS_DIM, ACTION_DIM, n, &mut stream(config.seed, STREAM_ACTOR_INIT));
    let mut opt = RmsPropState::new(&student.params());
    let mut rng = stream(config.seed, STREAM_TRAIN);

    let mut cursors: Vec<EnvCursor> = specs.iter().map(|s| EnvCursor::new(s.clone())).collect();
    let mut consumed = vec![0usize; n];
    let mut next_eval = vec![config.eval_every; n];
    let mut initial_kl = vec![None; n];
    let mut final_kl = vec![0.0; n];
    let mut curves = Vec::new();

    while consumed.iter().any(|c| *c < config.total_env_steps) {
        for i in 0..n {
            if consumed[i] >= config.total_env_steps {
                continue;
            }
            let visit = DistillConfig {
                t_max: config.t_max.min(config.total_env_steps - consumed[i]),
                ..config.clone()
            };
            let batch = collect_distill_batch(&mut cursors[i], &teachers[i], &student, i, &visit, &mut rng)?;
            consumed[i] += batch.len();
            let kl = distill_update(&mut student, &batch, &mut opt, config.lr)?;
            initial_kl[i].get_or_insert(kl);
            final_kl[i] = kl;
            if consumed[i] >= next_eval[i] {
                let report =
                    evaluate_spec(&student, &specs[i], i, config.eval_rollouts, config.seed, EvalMode::Stochastic)?;
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
    }

    let stats = DistillStats {
        per_env: env_names
            .iter()
            .enumerate()
            .map(|(i, env)| HeadDistillStats {
                env_name: env.clone(),
                initial_kl: initial_kl[i].unwrap_or(0.0),
                final_kl: final_kl[i],
            })
            .collect(),
    };
    let ckpt = Checkpoint::from_networks(
        &student,
        None,
        env_names.to_vec(),
        crate::config::distill_config_kv(config),
        config.seed,
        produced_by,
    );
    Ok((ckpt, curves, stats))
}
