//! Diagonal-Gaussian policies and the actor/critic networks.
//!
//! An actor maps an observation through a shared tanh trunk and a per-task
//! linear head to `2d` outputs: the first `d` are the action mean, the last
//! `d` the log variance (clamped to [`LOG_VAR_MIN`], [`LOG_VAR_MAX`] before
//! use). Critics share the same trunk+heads layout with scalar heads.
//!
//! The free functions on [`GaussianPolicyParams`] implement sampling,
//! log-likelihood, entropy, and the Gaussian KL divergence used as the
//! distillation loss, together with their analytic gradients.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::nn::{ForwardCache, GradStack, Mlp};
use crate::tensor::Tensor;

pub const LOG_2PI: f64 = 1.8378770664093453;
/// Clamp bounds applied to raw log-variance head outputs. Unbounded log
/// variance is the dominant instability in Gaussian actor-critic training.
pub const LOG_VAR_MIN: f64 = -10.0;
pub const LOG_VAR_MAX: f64 = 4.0;

/// Per-state diagonal Gaussian: `N(mean, diag(exp(log_var)))`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicyParams {
    pub mean: Vec<f64>,
    pub log_var: Vec<f64>,
}

impl GaussianPolicyParams {
    pub fn new(mean: Vec<f64>, log_var: Vec<f64>) -> Self {
        assert_eq!(mean.len(), log_var.len(), "mean/log_var dims differ");
        GaussianPolicyParams { mean, log_var }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// `action = mean + exp(log_var / 2) .* z`, `z ~ N(0, I)`.
pub fn sample_action(params: &GaussianPolicyParams, rng: &mut ChaCha8Rng) -> Vec<f64> {
    params
        .mean
        .iter()
        .zip(&params.log_var)
        .map(|(m, lv)| {
            let z: f64 = rng.sample(StandardNormal);
            m + (0.5 * lv).exp() * z
        })
        .collect()
}

pub fn mean_action(params: &GaussianPolicyParams) -> Vec<f64> {
    params.mean.clone()
}

/// `-1/2 * sum_i [ (a_i - mu_i)^2 * exp(-lv_i) + lv_i + log 2pi ]`
pub fn log_prob(params: &GaussianPolicyParams, action: &[f64]) -> f64 {
    assert_eq!(action.len(), params.dim(), "action dim mismatch");
    let mut total = 0.0;
    for i in 0..params.dim() {
        let diff = action[i] - params.mean[i];
        let lv = params.log_var[i];
        total += diff * diff * (-lv).exp() + lv + LOG_2PI;
    }
    -0.5 * total
}

/// Gradient of [`log_prob`] w.r.t. `(mean, log_var)`.
pub fn log_prob_grad(params: &GaussianPolicyParams, action: &[f64]) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(action.len(), params.dim(), "action dim mismatch");
    let mut d_mean = Vec::with_capacity(params.dim());
    let mut d_lv = Vec::with_capacity(params.dim());
    for i in 0..params.dim() {
        let diff = action[i] - params.mean[i];
        let inv_var = (-params.log_var[i]).exp();
        d_mean.push(diff * inv_var);
        d_lv.push(0.5 * diff * diff * inv_var - 0.5);
    }
    (d_mean, d_lv)
}

/// `1/2 * sum_i (log 2pi e + lv_i)`
pub fn entropy(params: &GaussianPolicyParams) -> f64 {
    params
        .log_var
        .iter()
        .map(|lv| 0.5 * (LOG_2PI + 1.0 + lv))
        .sum()
}

/// Gradient of [`entropy`]: zero w.r.t. mean, 1/2 per log-variance component.
pub fn entropy_grad(params: &GaussianPolicyParams) -> (Vec<f64>, Vec<f64>) {
    (vec![0.0; params.dim()], vec![0.5; params.dim()])
}

/// Gaussian KL for diagonal covariances:
///
/// ```text
/// 1/2 [ sum_i (lvT_i - lvS_i) - d + sum_i exp(lvS_i - lvT_i) ]
///   + 1/2 sum_i (muT_i - muS_i)^2 * exp(-lvT_i)
/// ```
///
/// With arguments `(teacher, student)` this is KL(S || T) in the standard
/// convention: `E_{a~S}[log p_S(a) - log p_T(a)]`.
pub fn kl_diag_gaussian(teacher: &GaussianPolicyParams, student: &GaussianPolicyParams) -> Result<f64> {
    if teacher.dim() != student.dim() {
        return Err(Error::shape(
            "kl_diag_gaussian",
            format!("dim {}", teacher.dim()),
            format!("dim {}", student.dim()),
        ));
    }
    let d = teacher.dim() as f64;
    let mut trace_log = 0.0;
    let mut quad = 0.0;
    for i in 0..teacher.dim() {
        let lv_t = teacher.log_var[i];
        let lv_s = student.log_var[i];
        trace_log += (lv_t - lv_s) + (lv_s - lv_t).exp();
        let diff = teacher.mean[i] - student.mean[i];
        quad += diff * diff * (-lv_t).exp();
    }
    Ok(0.5 * (trace_log - d) + 0.5 * quad)
}

/// Gradient of [`kl_diag_gaussian`] w.r.t. the student parameters.
pub fn kl_grad_student(
    teacher: &GaussianPolicyParams,
    student: &GaussianPolicyParams,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if teacher.dim() != student.dim() {
        return Err(Error::shape(
            "kl_grad_student",
            format!("dim {}", teacher.dim()),
            format!("dim {}", student.dim()),
        ));
    }
    let mut d_mean = Vec::with_capacity(student.dim());
    let mut d_lv = Vec::with_capacity(student.dim());
    for i in 0..student.dim() {
        let inv_var_t = (-teacher.log_var[i]).exp();
        d_mean.push((student.mean[i] - teacher.mean[i]) * inv_var_t);
        d_lv.push(0.5 * ((student.log_var[i] - teacher.log_var[i]).exp() - 1.0));
    }
    Ok((d_mean, d_lv))
}

/// Shared trunk plus one linear head per task; head `i` emits
/// `(mean || log_var)` for environment `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorNetwork {
    trunk: Mlp,
    heads: Vec<Mlp>,
    action_dim: usize,
}

/// Activations recorded by [`ActorNetwork::forward_cached`].
#[derive(Debug, Clone)]
pub struct ActorCache {
    trunk: ForwardCache,
    head: ForwardCache,
    head_id: usize,
    raw_log_var: Vec<f64>,
}

impl ActorNetwork {
    /// Standard architecture: two tanh hidden layers of 64 units.
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, action_dim: usize, n_heads: usize, rng: &mut R) -> Self {
        Self::with_hidden(obs_dim, action_dim, n_heads, &[64, 64], rng)
    }

    pub fn with_hidden<R: Rng + ?Sized>(
        obs_dim: usize,
        action_dim: usize,
        n_heads: usize,
        hidden: &[usize],
        rng: &mut R,
    ) -> Self {
        assert!(n_heads >= 1, "actor needs at least one head");
        assert!(!hidden.is_empty(), "actor trunk needs at least one hidden layer");
        let mut dims = vec![obs_dim];
        dims.extend_from_slice(hidden);
        let trunk = Mlp::feature_stack(&dims, rng);
        let feat = *hidden.last().unwrap();
        let heads = (0..n_heads)
            .map(|_| Mlp::network(&[feat, 2 * action_dim], rng))
            .collect();
        ActorNetwork { trunk, heads, action_dim }
    }

    /// All-zero weights; used when rebuilding from a checkpoint.
    pub fn zeros(obs_dim: usize, action_dim: usize, n_heads: usize, hidden: &[usize]) -> Self {
        let mut rng = crate::rng::seeded(0);
        let mut net = Self::with_hidden(obs_dim, action_dim, n_heads, hidden, &mut rng);
        for t in net.params_mut() {
            t.data_mut().fill(0.0);
        }
        net
    }

    #[inline]
    pub fn n_heads(&self) -> usize {
        self.heads.len()
    }

    #[inline]
    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    #[inline]
    pub fn obs_dim(&self) -> usize {
        self.trunk.in_dim()
    }

    /// Trunk hidden-layer widths, e.g. `[64, 64]`.
    pub fn hidden_widths(&self) -> Vec<usize> {
        self.trunk.layers().iter().map(|l| l.out_dim()).collect()
    }

    pub fn trunk(&self) -> &Mlp {
        &self.trunk
    }

    pub fn heads(&self) -> &[Mlp] {
        &self.heads
    }

    fn check_head(&self, head_id: usize) -> Result<()> {
        if head_id >= self.heads.len() {
            return Err(Error::HeadOutOfRange {
                head: head_id,
                n_heads: self.heads.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, obs: &[f64], head_id: usize) -> Result<GaussianPolicyParams> {
        Ok(self.forward_cached(obs, head_id)?.0)
    }

    pub fn forward_cached(&self, obs: &[f64], head_id: usize) -> Result<(GaussianPolicyParams, ActorCache)> {
        self.check_head(head_id)?;
        let (features, trunk_cache) = self.trunk.forward(obs)?;
        let (raw, head_cache) = self.heads[head_id].forward(&features)?;
        let d = self.action_dim;
        let mean = raw[..d].to_vec();
        let raw_log_var = raw[d..].to_vec();
        let log_var = raw_log_var
            .iter()
            .map(|lv| lv.clamp(LOG_VAR_MIN, LOG_VAR_MAX))
            .collect();
        Ok((
            GaussianPolicyParams { mean, log_var },
            ActorCache {
                trunk: trunk_cache,
                head: head_cache,
                head_id,
                raw_log_var,
            },
        ))
    }

    /// Accumulates dL/dparams into `grads` given dL/dmean and dL/dlog_var.
    /// Components clamped in the forward pass receive zero gradient. Heads
    /// other than the cached one are untouched.
    pub fn backward_into(
        &self,
        cache: &ActorCache,
        d_mean: &[f64],
        d_log_var: &[f64],
        grads: &mut GradStack,
    ) -> Result<()> {
        let d = self.action_dim;
        assert_eq!(d_mean.len(), d, "d_mean dim mismatch");
        assert_eq!(d_log_var.len(), d, "d_log_var dim mismatch");
        let mut d_out = Vec::with_capacity(2 * d);
        d_out.extend_from_slice(d_mean);
        for (g, raw) in d_log_var.iter().zip(&cache.raw_log_var) {
            let passes = *raw > LOG_VAR_MIN && *raw < LOG_VAR_MAX;
            d_out.push(if passes { *g } else { 0.0 });
        }
        let offset = self.head_param_offset(cache.head_id);
        let d_features = self.heads[cache.head_id].backward_into(&cache.head, &d_out, grads, offset)?;
        self.trunk.backward_into(&cache.trunk, &d_features, grads, 0)?;
        Ok(())
    }

    fn head_param_offset(&self, head_id: usize) -> usize {
        self.trunk.param_tensor_count()
            + self.heads[..head_id]
                .iter()
                .map(|h| h.param_tensor_count())
                .sum::<usize>()
    }

    /// Parameter tensors: trunk layers first, then each head in order.
    pub fn params(&self) -> Vec<&Tensor> {
        let mut out = self.trunk.params();
        for head in &self.heads {
            out.extend(head.params());
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = self.trunk.params_mut();
        for head in &mut self.heads {
            out.extend(head.params_mut());
        }
        out
    }

    pub fn param_tensor_count(&self) -> usize {
        self.trunk.param_tensor_count()
            + self.heads.iter().map(|h| h.param_tensor_count()).sum::<usize>()
    }

    /// Canonical tensor names, aligned with [`ActorNetwork::params`].
    pub fn param_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.param_tensor_count());
        for l in 0..self.trunk.layers().len() {
            names.push(format!("trunk.l{l}.w"));
            names.push(format!("trunk.l{l}.b"));
        }
        for (h, head) in self.heads.iter().enumerate() {
            for l in 0..head.layers().len() {
                names.push(format!("head{h}.l{l}.w"));
                names.push(format!("head{h}.l{l}.b"));
            }
        }
        names
    }

    /// Tensor indices (into [`ActorNetwork::params`] order) of head `head_id`.
    pub fn head_tensor_range(&self, head_id: usize) -> std::ops::Range<usize> {
        let start = self.head_param_offset(head_id);
        start..start + self.heads[head_id].param_tensor_count()
    }

    /// Freeze mask leaving only the final layer of each head trainable.
    pub fn final_layer_mask(&self) -> crate::optim::FreezeMask {
        let mut trainable = vec![false; self.param_tensor_count()];
        for (h, head) in self.heads.iter().enumerate() {
            let range = self.head_tensor_range(h);
            let last = range.start + head.param_tensor_count() - 2;
            trainable[last] = true;
            trainable[last + 1] = true;
        }
        crate::optim::FreezeMask::new(trainable).expect("head final layer is trainable")
    }
}

/// Value network with the same trunk+heads layout; each head ends in a
/// single scalar output. The single-task critic is the one-head case:
/// one shared hidden layer plus a two-layer head, three layers in total.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticNetwork {
    trunk: Mlp,
    heads: Vec<Mlp>,
}

#[derive(Debug, Clone)]
pub struct CriticCache {
    trunk: ForwardCache,
    head: ForwardCache,
    head_id: usize,
}

impl CriticNetwork {
    /// Standard architecture: shared 64-unit hidden layer, then a
    /// 64-unit hidden layer and scalar output inside each head.
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, n_heads: usize, rng: &mut R) -> Self {
        Self::with_hidden(obs_dim, n_heads, &[64], &[64], rng)
    }

    pub fn with_hidden<R: Rng + ?Sized>(
        obs_dim: usize,
        n_heads: usize,
        trunk_hidden: &[usize],
        head_hidden: &[usize],
        rng: &mut R,
    ) -> Self {
        assert!(n_heads >= 1, "critic needs at least one head");
        assert!(!trunk_hidden.is_empty(), "critic trunk needs at least one layer");
        let mut dims = vec![obs_dim];
        dims.extend_from_slice(trunk_hidden);
        let trunk = Mlp::feature_stack(&dims, rng);
        let feat = *trunk_hidden.last().unwrap();
        let mut head_dims = vec![feat];
        head_dims.extend_from_slice(head_hidden);
        head_dims.push(1);
        let heads = (0..n_heads).map(|_| Mlp::network(&head_dims, rng)).collect();
        CriticNetwork { trunk, heads }
    }

    pub fn zeros(obs_dim: usize, n_heads: usize, trunk_hidden: &[usize], head_hidden: &[usize]) -> Self {
        let mut rng = crate::rng::seeded(0);
        let mut net = Self::with_hidden(obs_dim, n_heads, trunk_hidden, head_hidden, &mut rng);
        for t in net.params_mut() {
            t.data_mut().fill(0.0);
        }
        net
    }

    #[inline]
    pub fn n_heads(&self) -> usize {
        self.heads.len()
    }

    #[inline]
    pub fn obs_dim(&self) -> usize {
        self.trunk.in_dim()
    }

    pub fn trunk_widths(&self) -> Vec<usize> {
        self.trunk.layers().iter().map(|l| l.out_dim()).collect()
    }

    /// Head hidden widths, excluding the scalar output layer.
    pub fn head_hidden_widths(&self) -> Vec<usize> {
        let head = &self.heads[0];
        head.layers()[..head.layers().len() - 1]
            .iter()
            .map(|l| l.out_dim())
            .collect()
    }

    pub fn trunk(&self) -> &Mlp {
        &self.trunk
    }

    pub fn heads(&self) -> &[Mlp] {
        &self.heads
    }

    fn check_head(&self, head_id: usize) -> Result<()> {
        if head_id >= self.heads.len() {
            return Err(Error::HeadOutOfRange {
                head: head_id,
                n_heads: self.heads.len(),
            });
        }
        Ok(())
    }

    pub fn value(&self, obs: &[f64], head_id: usize) -> Result<f64> {
        Ok(self.forward_cached(obs, head_id)?.0)
    }

    pub fn forward_cached(&self, obs: &[f64], head_id: usize) -> Result<(f64, CriticCache)> {
        self.check_head(head_id)?;
        let (features, trunk_cache) = self.trunk.forward(obs)?;
        let (out, head_cache) = self.heads[head_id].forward(&features)?;
        Ok((
            out[0],
            CriticCache {
                trunk: trunk_cache,
                head: head_cache,
                head_id,
            },
        ))
    }

    pub fn backward_into(&self, cache: &CriticCache, d_value: f64, grads: &mut GradStack) -> Result<()> {
        let offset = self.head_param_offset(cache.head_id);
        let d_features = self.heads[cache.head_id].backward_into(&cache.head, &[d_value], grads, offset)?;
        self.trunk.backward_into(&cache.trunk, &d_features, grads, 0)?;
        Ok(())
    }

    fn head_param_offset(&self, head_id: usize) -> usize {
        self.trunk.param_tensor_count()
            + self.heads[..head_id]
                .iter()
                .map(|h| h.param_tensor_count())
                .sum::<usize>()
    }

    pub fn params(&self) -> Vec<&Tensor> {
        let mut out = self.trunk.params();
        for head in &self.heads {
            out.extend(head.params());
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = self.trunk.params_mut();
        for head in &mut self.heads {
            out.extend(head.params_mut());
        }
        out
    }

    pub fn param_tensor_count(&self) -> usize {
        self.trunk.param_tensor_count()
            + self.heads.iter().map(|h| h.param_tensor_count()).sum::<usize>()
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.param_tensor_count());
        for l in 0..self.trunk.layers().len() {
            names.push(format!("trunk.l{l}.w"));
            names.push(format!("trunk.l{l}.b"));
        }
        for (h, head) in self.heads.iter().enumerate() {
            for l in 0..head.layers().len() {
                names.push(format!("head{h}.l{l}.w"));
                names.push(format!("head{h}.l{l}.b"));
            }
        }
        names
    }

    pub fn head_tensor_range(&self, head_id: usize) -> std::ops::Range<usize> {
        let start = self.head_param_offset(head_id);
        start..start + self.heads[head_id].param_tensor_count()
    }

    /// Freeze mask leaving only each head's final (scalar output) layer trainable.
    pub fn final_layer_mask(&self) -> crate::optim::FreezeMask {
        let mut trainable = vec![false; self.param_tensor_count()];
        for (h, head) in self.heads.iter().enumerate() {
            let range = self.head_tensor_range(h);
            let last = range.start + head.param_tensor_count() - 2;
            trainable[last] = true;
            trainable[last + 1] = true;
        }
        crate::optim::FreezeMask::new(trainable).expect("head final layer is trainable")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gradcheck::rel_error;
    use crate::rng::{seeded, stream};

    #[test]
    fn zero_network_gives_standard_normal_params() {
        let net = ActorNetwork::zeros(2, 2, 1, &[64, 64]);
        let params = net.forward(&[0.7, -0.3], 0).unwrap();
        assert_eq!(params.mean, vec![0.0, 0.0]);
        assert_eq!(params.log_var, vec![0.0, 0.0]);
    }

    #[test]
    fn identical_heads_give_identical_params() {
        let mut net = ActorNetwork::new(2, 2, 2, &mut seeded(4));
        // copy head 0 tensors into head 1
        let r0 = net.head_tensor_range(0);
        let r1 = net.head_tensor_range(1);
        let head0: Vec<Tensor> = net.params()[r0].iter().map(|t| (*t).clone()).collect();
        {
            let mut params = net.params_mut();
            for (dst, src) in r1.zip(head0.iter()) {
                *params[dst] = src.clone();
            }
        }
        let obs = [0.4, -0.9];
        let a = net.forward(&obs, 0).unwrap();
        let b = net.forward(&obs, 1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn forward_matches_independent_trunk_head_oracle() {
        let net = ActorNetwork::new(2, 2, 3, &mut seeded(11));
        let obs = [1.3, -0.4];

        // independent matrix-multiply oracle
        let mut x = obs.to_vec();
        for layer in net.trunk().layers() {
            let mut y = vec![0.0; layer.out_dim()];
            for (o, yo) in y.iter_mut().enumerate() {
                let mut z = layer.bias.get(o, 0);
                for i in 0..layer.in_dim() {
                    z += layer.weights.get(o, i) * x[i];
                }
                *yo = z.tanh();
            }
            x = y;
        }
        let layer = &net.heads()[2].layers()[0];
        let mut raw = vec![0.0; layer.out_dim()];
        for (o, ro) in raw.iter_mut().enumerate() {
            let mut z = layer.bias.get(o, 0);
            for i in 0..layer.in_dim() {
                z += layer.weights.get(o, i) * x[i];
            }
            *ro = z;
        }

        let params = net.forward(&obs, 2).unwrap();
        for i in 0..2 {
            assert!((params.mean[i] - raw[i]).abs() < 1e-12);
            let clamped = raw[2 + i].clamp(LOG_VAR_MIN, LOG_VAR_MAX);
            assert!((params.log_var[i] - clamped).abs() < 1e-12);
        }
    }

    #[test]
    fn head_out_of_range_errors() {
        let net = ActorNetwork::new(2, 2, 2, &mut seeded(0));
        assert!(matches!(
            net.forward(&[0.0, 0.0], 2),
            Err(Error::HeadOutOfRange { head: 2, n_heads: 2 })
        ));
    }

    #[test]
    fn log_var_is_clamped_with_zero_gradient() {
        let mut net = ActorNetwork::zeros(2, 2, 1, &[8]);
        // push raw log-var biases far out of range
        {
            let r = net.head_tensor_range(0);
            let mut params = net.params_mut();
            let bias = &mut params[r.end - 1];
            bias.data_mut()[2] = 100.0;
            bias.data_mut()[3] = -100.0;
        }
        let p = net.forward(&[0.1, 0.1], 0).unwrap();
        assert_eq!(p.log_var[0], LOG_VAR_MAX);
        assert_eq!(p.log_var[1], LOG_VAR_MIN);

        let (_, cache) = net.forward_cached(&[0.1, 0.1], 0).unwrap();
        let mut grads = GradStack::zeros_like(&net.params());
        net.backward_into(&cache, &[0.0, 0.0], &[1.0, 1.0], &mut grads).unwrap();
        assert!(grads.is_zero());
    }

    #[test]
    fn degenerate_gaussian_sampling_collapses_to_mean() {
        let params = GaussianPolicyParams::new(vec![0.3, -0.8], vec![-50.0, -50.0]);
        let mut rng = stream(1, 0);
        let a = sample_action(&params, &mut rng);
        assert!((a[0] - 0.3).abs() < 1e-10);
        assert!((a[1] + 0.8).abs() < 1e-10);
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let params = GaussianPolicyParams::new(vec![0.0, 0.0], vec![0.0, 0.0]);
        let a = sample_action(&params, &mut stream(9, 2));
        let b = sample_action(&params, &mut stream(9, 2));
        assert_eq!(a, b);
    }

    #[test]
    fn sample_mean_satisfies_clt_bound() {
        let params = GaussianPolicyParams::new(vec![0.0, 0.0], vec![0.0, 0.0]);
        let mut rng = stream(12, 0);
        let n = 100_000;
        let mut sums = [0.0; 2];
        for _ in 0..n {
            let a = sample_action(&params, &mut rng);
            sums[0] += a[0];
            sums[1] += a[1];
        }
        let bound = 4.0 / (n as f64).sqrt();
        for s in sums {
            assert!((s / n as f64).abs() < bound, "sample mean {}", s / n as f64);
        }
    }

    #[test]
    fn log_prob_standard_normal_at_mode() {
        let params = GaussianPolicyParams::new(vec![0.0], vec![0.0]);
        let lp = log_prob(&params, &[0.0]);
        assert!((lp - (-0.9189385332046727)).abs() < 1e-12);
    }

    #[test]
    fn log_prob_factorizes_over_dimensions() {
        let p2 = GaussianPolicyParams::new(vec![0.3, -1.1], vec![0.4, -0.7]);
        let a = [0.9, 0.2];
        let lp2 = log_prob(&p2, &a);
        let lp_a = log_prob(&GaussianPolicyParams::new(vec![0.3], vec![0.4]), &[0.9]);
        let lp_b = log_prob(&GaussianPolicyParams::new(vec![-1.1], vec![-0.7]), &[0.2]);
        assert!((lp2 - (lp_a + lp_b)).abs() < 1e-12);
    }

    #[test]
    fn density_integrates_to_one() {
        // Simpson's rule over [mu - 12 sigma, mu + 12 sigma]
        let params = GaussianPolicyParams::new(vec![0.7], vec![-0.4]);
        let sigma = (0.5 * params.log_var[0]).exp();
        let (lo, hi) = (params.mean[0] - 12.0 * sigma, params.mean[0] + 12.0 * sigma);
        let n = 20_000; // even
        let h = (hi - lo) / n as f64;
        let mut integral = 0.0;
        for k in 0..=n {
            let x = lo + k as f64 * h;
            let w = if k == 0 || k == n {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            integral += w * log_prob(&params, &[x]).exp();
        }
        integral *= h / 3.0;
        assert!((integral - 1.0).abs() < 1e-6, "integral {integral}");
    }

    #[test]
    fn entropy_of_standard_normal() {
        let params = GaussianPolicyParams::new(vec![0.0], vec![0.0]);
        assert!((entropy(&params) - 1.4189385332046727).abs() < 1e-12);
    }

    #[test]
    fn doubling_sigma_adds_log_two_per_dimension() {
        let p = GaussianPolicyParams::new(vec![0.1, 0.2], vec![0.3, -0.5]);
        let wider = GaussianPolicyParams::new(
            p.mean.clone(),
            p.log_var.iter().map(|lv| lv + 4.0f64.ln()).collect(),
        );
        let delta = entropy(&wider) - entropy(&p);
        assert!((delta - 2.0 * 2.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn entropy_matches_monte_carlo_negative_log_prob() {
        let params = GaussianPolicyParams::new(vec![0.4, -0.2, 1.0], vec![0.6, -1.2, 0.1]);
        let mut rng = stream(21, 0);
        let n = 1_000_000usize;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let a = sample_action(&params, &mut rng);
            let nlp = -log_prob(&params, &a);
            sum += nlp;
            sum_sq += nlp * nlp;
        }
        let mc = sum / n as f64;
        let var = (sum_sq / n as f64 - mc * mc).max(0.0);
        let se = (var / n as f64).sqrt();
        let h = entropy(&params);
        assert!((h - mc).abs() <= 3.0 * se, "H {h} vs MC {mc} (se {se})");
    }

    #[test]
    fn kl_of_identical_params_is_zero() {
        let p = GaussianPolicyParams::new(vec![0.5, -0.5], vec![0.2, -0.2]);
        assert_eq!(kl_diag_gaussian(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn kl_unit_mean_shift_is_half() {
        let teacher = GaussianPolicyParams::new(vec![1.0], vec![0.0]);
        let student = GaussianPolicyParams::new(vec![0.0], vec![0.0]);
        assert_eq!(kl_diag_gaussian(&teacher, &student).unwrap(), 0.5);
    }

    #[test]
    fn kl_rejects_dimension_mismatch() {
        let t = GaussianPolicyParams::new(vec![0.0], vec![0.0]);
        let s = GaussianPolicyParams::new(vec![0.0, 0.0], vec![0.0, 0.0]);
        assert!(kl_diag_gaussian(&t, &s).is_err());
    }

    #[test]
    fn kl_matches_one_dimensional_closed_form() {
        // KL(S||T) = log(sT/sS) + (sS^2 + (muS-muT)^2) / (2 sT^2) - 1/2
        let mut rng = seeded(31);
        for _ in 0..50 {
            let t = GaussianPolicyParams::new(
                vec![rng.random_range(-2.0..2.0)],
                vec![rng.random_range(-2.0..2.0)],
            );
            let s = GaussianPolicyParams::new(
                vec![rng.random_range(-2.0..2.0)],
                vec![rng.random_range(-2.0..2.0)],
            );
            let var_t = t.log_var[0].exp();
            let var_s = s.log_var[0].exp();
            let closed = 0.5 * (var_t / var_s).ln()
                + (var_s + (s.mean[0] - t.mean[0]).powi(2)) / (2.0 * var_t)
                - 0.5;
            let got = kl_diag_gaussian(&t, &s).unwrap();
            assert!((got - closed).abs() < 1e-12, "{got} vs {closed}");
        }
    }

    #[test]
    fn kl_is_nonnegative_and_zero_only_at_identity() {
        let mut rng = seeded(32);
        for _ in 0..500 {
            let d = rng.random_range(1..=4usize);
            let t = GaussianPolicyParams::new(
                (0..d).map(|_| rng.random_range(-3.0..3.0)).collect(),
                (0..d).map(|_| rng.random_range(-3.0..3.0)).collect(),
            );
            let s = GaussianPolicyParams::new(
                (0..d).map(|_| rng.random_range(-3.0..3.0)).collect(),
                (0..d).map(|_| rng.random_range(-3.0..3.0)).collect(),
            );
            let kl = kl_diag_gaussian(&t, &s).unwrap();
            assert!(kl >= 0.0);
            if t != s {
                assert!(kl > 0.0);
            }
        }
    }

    #[test]
    fn kl_is_additive_over_dimensions() {
        let t = GaussianPolicyParams::new(vec![0.2, -0.6, 1.1], vec![0.5, -0.3, 0.8]);
        let s = GaussianPolicyParams::new(vec![-0.1, 0.4, 0.9], vec![-0.2, 0.6, -0.5]);
        let total = kl_diag_gaussian(&t, &s).unwrap();
        let mut per_dim = 0.0;
        for i in 0..3 {
            per_dim += kl_diag_gaussian(
                &GaussianPolicyParams::new(vec![t.mean[i]], vec![t.log_var[i]]),
                &GaussianPolicyParams::new(vec![s.mean[i]], vec![s.log_var[i]]),
            )
            .unwrap();
        }
        assert!((total - per_dim).abs() < 1e-12);
    }

    #[test]
    fn kl_matches_monte_carlo_under_student_samples() {
        // confirms the formula computes KL(S||T) = E_{a~S}[log p_S - log p_T]
        let teacher = GaussianPolicyParams::new(vec![0.6, -0.4], vec![0.3, 0.9]);
        let student = GaussianPolicyParams::new(vec![-0.2, 0.1], vec![-0.4, 0.2]);
        let analytic = kl_diag_gaussian(&teacher, &student).unwrap();
        let mut rng = stream(44, 0);
        let n = 1_000_000usize;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let a = sample_action(&student, &mut rng);
            let v = log_prob(&student, &a) - log_prob(&teacher, &a);
            sum += v;
            sum_sq += v * v;
        }
        let mc = sum / n as f64;
        let var = (sum_sq / n as f64 - mc * mc).max(0.0);
        let se = (var / n as f64).sqrt();
        assert!((analytic - mc).abs() <= 3.0 * se, "KL {analytic} vs MC {mc} (se {se})");
    }

    // central finite differences on the distribution functions themselves
    fn fd_check(analytic: &[f64], mut f: impl FnMut(usize, f64) -> f64) {
        let h = 1e-6;
        for (i, a) in analytic.iter().enumerate() {
            let numeric = (f(i, h) - f(i, -h)) / (2.0 * h);
            assert!(rel_error(*a, numeric) < 1e-4, "component {i}: {a} vs {numeric}");
        }
    }

    #[test]
    fn log_prob_gradients_match_finite_differences() {
        let params = GaussianPolicyParams::new(vec![0.3, -0.7], vec![0.2, -0.9]);
        let action = [0.8, -0.1];
        let (d_mean, d_lv) = log_prob_grad(&params, &action);
        fd_check(&d_mean, |i, h| {
            let mut p = params.clone();
            p.mean[i] += h;
            log_prob(&p, &action)
        });
        fd_check(&d_lv, |i, h| {
            let mut p = params.clone();
            p.log_var[i] += h;
            log_prob(&p, &action)
        });
    }

    #[test]
    fn entropy_gradients_match_finite_differences() {
        let params = GaussianPolicyParams::new(vec![0.4, 1.2], vec![-0.3, 0.5]);
        let (d_mean, d_lv) = entropy_grad(&params);
        assert_eq!(d_mean, vec![0.0, 0.0]);
        fd_check(&d_lv, |i, h| {
            let mut p = params.clone();
            p.log_var[i] += h;
            entropy(&p)
        });
    }

    #[test]
    fn kl_gradients_match_finite_differences() {
        let teacher = GaussianPolicyParams::new(vec![0.9, -0.5], vec![0.4, -0.6]);
        let student = GaussianPolicyParams::new(vec![0.1, 0.3], vec![-0.2, 0.7]);
        let (d_mean, d_lv) = kl_grad_student(&teacher, &student).unwrap();
        fd_check(&d_mean, |i, h| {
            let mut s = student.clone();
            s.mean[i] += h;
            kl_diag_gaussian(&teacher, &s).unwrap()
        });
        fd_check(&d_lv, |i, h| {
            let mut s = student.clone();
            s.log_var[i] += h;
            kl_diag_gaussian(&teacher, &s).unwrap()
        });
    }

    #[test]
    fn backprop_on_one_head_leaves_others_zero() {
        let net = ActorNetwork::new(2, 2, 3, &mut seeded(5));
        let (_, cache) = net.forward_cached(&[0.5, -0.5], 1).unwrap();
        let mut grads = GradStack::zeros_like(&net.params());
        net.backward_into(&cache, &[1.0, -1.0], &[0.5, 0.5], &mut grads).unwrap();
        for h in [0usize, 2] {
            for idx in net.head_tensor_range(h) {
                assert!(grads.tensors[idx].data().iter().all(|g| *g == 0.0), "head {h} touched");
            }
        }
        // trunk and the used head did receive gradient
        assert!(grads.tensors[0].data().iter().any(|g| *g != 0.0));
        assert!(net
            .head_tensor_range(1)
            .any(|idx| grads.tensors[idx].data().iter().any(|g| *g != 0.0)));
    }

    #[test]
    fn critic_layout_and_masks() {
        let critic = CriticNetwork::new(2, 2, &mut seeded(6));
        // one shared hidden layer; each head holds the remaining two layers
        assert_eq!(critic.trunk_widths(), vec![64]);
        assert_eq!(critic.head_hidden_widths(), vec![64]);
        let v = critic.value(&[0.3, 0.1], 1).unwrap();
        assert!(v.is_finite());
        assert!(critic.value(&[0.3, 0.1], 2).is_err());

        let mask = critic.final_layer_mask();
        assert_eq!(mask.len(), critic.param_tensor_count());
        assert_eq!(mask.frozen_indices().len(), critic.param_tensor_count() - 4);
    }

    #[test]
    fn critic_gradients_match_finite_differences() {
        let mut critic = CriticNetwork::new(2, 1, &mut seeded(7));
        let obs = [0.8, 0.4];
        let (v0, cache) = critic.forward_cached(&obs, 0).unwrap();
        assert!(v0.is_finite());
        let mut grads = GradStack::zeros_like(&critic.params());
        critic.backward_into(&cache, 1.0, &mut grads).unwrap();

        let h = 1e-6;
        let n_tensors = critic.param_tensor_count();
        for ti in 0..n_tensors {
            let len = critic.params()[ti].len();
            for k in (0..len).step_by(7) {
                {
                    let mut p = critic.params_mut();
                    p[ti].data_mut()[k] += h;
                }
                let plus = critic.value(&obs, 0).unwrap();
                {
                    let mut p = critic.params_mut();
                    p[ti].data_mut()[k] -= 2.0 * h;
                }
                let minus = critic.value(&obs, 0).unwrap();
                {
                    let mut p = critic.params_mut();
                    p[ti].data_mut()[k] += h;
                }
                let numeric = (plus - minus) / (2.0 * h);
                let analytic = grads.tensors[ti].data()[k];
                assert!(rel_error(analytic, numeric) < 1e-4, "tensor {ti} elem {k}");
            }
        }
    }
}
