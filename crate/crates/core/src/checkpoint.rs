//! Checkpoint persistence.
//!
//! A checkpoint is a self-describing JSON document: format version, an
//! architecture descriptor sufficient to rebuild the networks, named
//! parameter tensors, the resolved training config, and seed provenance.
//! Floats serialize as the shortest decimal string that round-trips the
//! exact f64, so save -> load -> save is byte-identical.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{ActorNetwork, CriticNetwork};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticArch {
    pub trunk_hidden: Vec<usize>,
    pub head_hidden: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub obs_dim: usize,
    pub action_dim: usize,
    pub n_heads: usize,
    pub actor_hidden: Vec<usize>,
    /// Absent for actor-only networks (distilled students).
    pub critic: Option<CriticArch>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub architecture: Architecture,
    /// Head `i` corresponds to `env_names[i]`.
    pub env_names: Vec<String>,
    pub params: Vec<NamedTensor>,
    /// Resolved config snapshot of the run that produced the weights.
    pub config: BTreeMap<String, String>,
    pub seed: u64,
    pub produced_by: String,
}

impl Checkpoint {
    pub fn from_networks(
        actor: &ActorNetwork,
        critic: Option<&CriticNetwork>,
        env_names: Vec<String>,
        config: BTreeMap<String, String>,
        seed: u64,
        produced_by: &str,
    ) -> Self {
        assert_eq!(env_names.len(), actor.n_heads(), "one env name per head");
        let mut params = Vec::new();
        for (name, tensor) in actor.param_names().iter().zip(actor.params()) {
            params.push(NamedTensor {
                name: format!("actor.{name}"),
                rows: tensor.rows(),
                cols: tensor.cols(),
                data: tensor.data().to_vec(),
            });
        }
        if let Some(critic) = critic {
            for (name, tensor) in critic.param_names().iter().zip(critic.params()) {
                params.push(NamedTensor {
                    name: format!("critic.{name}"),
                    rows: tensor.rows(),
                    cols: tensor.cols(),
                    data: tensor.data().to_vec(),
                });
            }
        }
        Checkpoint {
            format_version: CHECKPOINT_FORMAT_VERSION,
            architecture: Architecture {
                obs_dim: actor.obs_dim(),
                action_dim: actor.action_dim(),
                n_heads: actor.n_heads(),
                actor_hidden: actor.hidden_widths(),
                critic: critic.map(|c| CriticArch {
                    trunk_hidden: c.trunk_widths(),
                    head_hidden: c.head_hidden_widths(),
                }),
            },
            env_names,
            params,
            config,
            seed,
            produced_by: produced_by.to_string(),
        }
    }

    /// Rebuilds the networks described by the architecture and fills every
    /// parameter tensor by name. Fails on missing, extra, or misshapen tensors.
    pub fn build_networks(&self) -> Result<(ActorNetwork, Option<CriticNetwork>)> {
        let arch = &self.architecture;
        if self.env_names.len() != arch.n_heads {
            return Err(Error::ArchitectureMismatch(format!(
                "{} env names for {} heads",
                self.env_names.len(),
                arch.n_heads
            )));
        }
        let mut by_name: BTreeMap<&str, &NamedTensor> = BTreeMap::new();
        for t in &self.params {
            if by_name.insert(t.name.as_str(), t).is_some() {
                return Err(Error::ArchitectureMismatch(format!("duplicate tensor {}", t.name)));
            }
        }

        let mut actor = ActorNetwork::zeros(arch.obs_dim, arch.action_dim, arch.n_heads, &arch.actor_hidden);
        fill(&mut by_name, "actor", &actor.param_names(), actor.params_mut())?;

        let critic = match &arch.critic {
            Some(ca) => {
                let mut critic =
                    CriticNetwork::zeros(arch.obs_dim, arch.n_heads, &ca.trunk_hidden, &ca.head_hidden);
                fill(&mut by_name, "critic", &critic.param_names(), critic.params_mut())?;
                Some(critic)
            }
            None => None,
        };

        if let Some(extra) = by_name.keys().next() {
            return Err(Error::ArchitectureMismatch(format!("unexpected tensor {extra}")));
        }
        Ok((actor, critic))
    }

    /// Head index serving `env_name`: the matching head of a multi-head
    /// checkpoint, or head 0 for single-head checkpoints (usable on any env).
    pub fn head_for_env(&self, env_name: &str) -> Result<usize> {
        if self.architecture.n_heads == 1 {
            return Ok(0);
        }
        self.env_names
            .iter()
            .position(|n| n == env_name)
            .ok_or_else(|| {
                Error::ArchitectureMismatch(format!(
                    "checkpoint has no head for env {env_name} (heads: {})",
                    self.env_names.join(", ")
                ))
            })
    }
}

fn fill(
    by_name: &mut BTreeMap<&str, &NamedTensor>,
    prefix: &str,
    names: &[String],
    mut tensors: Vec<&mut crate::tensor::Tensor>,
) -> Result<()> {
    for (name, tensor) in names.iter().zip(tensors.iter_mut()) {
        let full = format!("{prefix}.{name}");
        let src = by_name.remove(full.as_str()).ok_or_else(|| {
            Error::ArchitectureMismatch(format!("missing tensor {full}"))
        })?;
        if (src.rows, src.cols) != tensor.shape() || src.data.len() != tensor.len() {
            return Err(Error::ArchitectureMismatch(format!(
                "tensor {full}: stored {}x{} ({} values), expected {:?}",
                src.rows,
                src.cols,
                src.data.len(),
                tensor.shape()
            )));
        }
        tensor.data_mut().copy_from_slice(&src.data);
    }
    Ok(())
}

pub fn checkpoint_to_string(ckpt: &Checkpoint) -> Result<String> {
    let mut text = serde_json::to_string_pretty(ckpt)
        .map_err(|e| Error::CheckpointMalformed(format!("serialize: {e}")))?;
    text.push('\n');
    Ok(text)
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    fs::write(path, checkpoint_to_string(ckpt)?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = fs::read_to_string(path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::CheckpointMalformed(e.to_string()))?;
    let found = value
        .get("format_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::CheckpointMalformed("missing format_version".into()))?;
    if found != CHECKPOINT_FORMAT_VERSION as u64 {
        return Err(Error::CheckpointVersion {
            found: found as u32,
            expected: CHECKPOINT_FORMAT_VERSION,
        });
    }
    let ckpt: Checkpoint =
        serde_json::from_value(value).map_err(|e| Error::CheckpointMalformed(e.to_string()))?;
    // fail fast on inconsistent architecture rather than at first use
    ckpt.build_networks()?;
    Ok(ckpt)
}
