//! Flat key/value run configuration.
//!
//! Config files are plain text, one `key = value` per line, `#` comments.
//! One namespace covers both trainer kinds: shared keys (lr, t_max, seed,
//! total_env_steps, eval_every, n_rollouts) apply to A2C and distillation
//! alike; the rest are specific to one of them. Unknown keys are errors.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::a2c::TrainConfig;
use crate::distill::DistillConfig;
use crate::error::{Error, Result};

pub fn parse_kv_str(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::InvalidConfig(format!(
                "line {}: expected `key = value`, got {raw:?}",
                i + 1
            )));
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() || value.is_empty() {
            return Err(Error::InvalidConfig(format!("line {}: empty key or value", i + 1)));
        }
        if map.insert(key.clone(), value).is_some() {
            return Err(Error::InvalidConfig(format!("duplicate key `{key}`")));
        }
    }
    Ok(map)
}

pub fn read_kv_file(path: &Path) -> Result<BTreeMap<String, String>> {
    parse_kv_str(&fs::read_to_string(path)?)
}

pub fn kv_to_string(map: &BTreeMap<String, String>) -> String {
    let mut out = String::new();
    for (k, v) in map {
        let _ = writeln!(out, "{k} = {v}");
    }
    out
}

pub fn write_kv_file(map: &BTreeMap<String, String>, path: &Path) -> Result<()> {
    fs::write(path, kv_to_string(map))?;
    Ok(())
}

/// Resolved configuration for a whole run: both trainer configs plus the
/// multi-task visit granularity.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub distill: DistillConfig,
    pub steps_per_visit: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            train: TrainConfig::default(),
            distill: DistillConfig::default(),
            steps_per_visit: 5,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| Error::InvalidConfig(format!("key `{key}`: cannot parse {value:?}: {e}")))
}

impl RunConfig {
    pub fn apply_kv(&mut self, kv: &BTreeMap<String, String>) -> Result<()> {
        for (key, value) in kv {
            match key.as_str() {
                "lr" => {
                    let v = parse(key, value)?;
                    self.train.lr = v;
                    self.distill.lr = v;
                }
                "gamma" => self.train.gamma = parse(key, value)?,
                "t_max" => {
                    let v = parse(key, value)?;
                    self.train.t_max = v;
                    self.distill.t_max = v;
                }
                "entropy_coef" => self.train.entropy_coef = parse(key, value)?,
                "value_coef" => self.train.value_coef = parse(key, value)?,
                "total_env_steps" => {
                    let v = parse(key, value)?;
                    self.train.total_env_steps = v;
                    self.distill.total_env_steps = v;
                }
                "eval_every" => {
                    let v = parse(key, value)?;
                    self.train.eval_every = v;
                    self.distill.eval_every = v;
                }
                "n_rollouts" => {
                    let v = parse(key, value)?;
                    self.train.eval_rollouts = v;
                    self.distill.eval_rollouts = v;
                }
                "seed" => self.set_seed(parse(key, value)?),
                "grad_clip" => {
                    self.train.grad_clip = if value == "none" {
                        None
                    } else {
                        Some(parse(key, value)?)
                    };
                }
                "p_student" => self.distill.p_student = parse(key, value)?,
                "steps_per_visit" => self.steps_per_visit = parse(key, value)?,
                _ => {
                    return Err(Error::InvalidConfig(format!("unknown config key `{key}`")));
                }
            }
        }
        self.train.validate()?;
        self.distill.validate()?;
        if self.steps_per_visit == 0 {
            return Err(Error::InvalidConfig("steps_per_visit must be >= 1".into()));
        }
        Ok(())
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.train.seed = seed;
        self.distill.seed = seed;
    }

    /// Full resolved key set, suitable for manifests.
    pub fn to_kv(&self) -> BTreeMap<String, String> {
        let mut map = train_config_kv(&self.train);
        map.insert("p_student".into(), self.distill.p_student.to_string());
        map.insert("steps_per_visit".into(), self.steps_per_visit.to_string());
        map
    }
}

pub fn train_config_kv(c: &TrainConfig) -> BTreeMap<String, String> {
    let mut map = BTreeMap::new();
    map.insert("lr".to_string(), c.lr.to_string());
    map.insert("gamma".to_string(), c.gamma.to_string());
    map.insert("t_max".to_string(), c.t_max.to_string());
    map.insert("entropy_coef".to_string(), c.entropy_coef.to_string());
    map.insert("value_coef".to_string(), c.value_coef.to_string());
    map.insert("total_env_steps".to_string(), c.total_env_steps.to_string());
    map.insert("eval_every".to_string(), c.eval_every.to_string());
    map.insert("n_rollouts".to_string(), c.eval_rollouts.to_string());
    map.insert("seed".to_string(), c.seed.to_string());
    map.insert(
        "grad_clip".to_string(),
        c.grad_clip.map_or_else(|| "none".to_string(), |v| v.to_string()),
    );
    map
}

pub fn distill_config_kv(c: &DistillConfig) -> BTreeMap<String, String> {
    let mut map = BTreeMap::new();
    map.insert("p_student".to_string(), c.p_student.to_string());
    map.insert("t_max".to_string(), c.t_max.to_string());
    map.insert("lr".to_string(), c.lr.to_string());
    map.insert("total_env_steps".to_string(), c.total_env_steps.to_string());
    map.insert("eval_every".to_string(), c.eval_every.to_string());
    map.insert("n_rollouts".to_string(), c.eval_rollouts.to_string());
    map.insert("seed".to_string(), c.seed.to_string());
    map
}
