//! CheetahLite: an analytically specified 1-D locomotion family.
//!
//! A point body of mass `m` is pushed by a bounded force and slowed by drag.
//! The two-dimensional action is (force command, posture command): the first
//! scales the applied force, the second modulates the effective drag
//! coefficient. Reward is forward velocity minus a quadratic control cost.
//!
//! Dynamics, per step of length `dt` (actions clamped to [-1, 1]):
//!
//! ```text
//! c_eff = drag * (1 + posture_gain * a2)
//! v'    = v + dt * (f_max * a1 / mass - c_eff * v)
//! x'    = x + dt * v'
//! r     = v' - ctrl_cost * (a1^2 + a2^2)
//! ```
//!
//! Seven variants are registered: `Base` plus six morphological variants that
//! scale one body parameter by 0.75 (`Small*`) or 1.25 (`Big*`). Transitions
//! are deterministic; episodes run exactly `horizon` steps.

use crate::error::{Error, Result};

pub const OBS_DIM: usize = 2;
pub const ACTION_DIM: usize = 2;

/// Registry order is fixed; names are case-sensitive.
pub const ALL_VARIANTS: [&str; 7] = [
    "Base",
    "SmallMass",
    "BigMass",
    "SmallDrag",
    "BigDrag",
    "SmallForce",
    "BigForce",
];

/// The six morphological variants used for multi-task experiments.
pub const SCALED_VARIANTS: [&str; 6] = [
    "SmallMass",
    "BigMass",
    "SmallDrag",
    "BigDrag",
    "SmallForce",
    "BigForce",
];

#[derive(Debug, Clone, PartialEq)]
pub struct MorphologySpec {
    pub name: String,
    /// kg, > 0
    pub mass: f64,
    /// 1/s, > 0
    pub drag: f64,
    /// N, > 0
    pub f_max: f64,
    /// dimensionless, in [0, 1)
    pub posture_gain: f64,
    /// dimensionless, >= 0
    pub ctrl_cost: f64,
    /// s, > 0
    pub dt: f64,
    /// steps, > 0
    pub horizon: usize,
}

impl MorphologySpec {
    fn base() -> Self {
        MorphologySpec {
            name: "Base".to_string(),
            mass: 1.0,
            drag: 0.5,
            f_max: 2.0,
            posture_gain: 0.5,
            ctrl_cost: 0.05,
            dt: 0.05,
            horizon: 200,
        }
    }

    /// Velocity magnitude bound under clamped actions:
    /// `f_max / (mass * drag * (1 - posture_gain))`.
    pub fn velocity_bound(&self) -> f64 {
        self.f_max / (self.mass * self.drag * (1.0 - self.posture_gain))
    }
}

pub fn make_variant(name: &str) -> Result<MorphologySpec> {
    let mut spec = MorphologySpec::base();
    match name {
        "Base" => {}
        "SmallMass" => spec.mass *= 0.75,
        "BigMass" => spec.mass *= 1.25,
        "SmallDrag" => spec.drag *= 0.75,
        "BigDrag" => spec.drag *= 1.25,
        "SmallForce" => spec.f_max *= 0.75,
        "BigForce" => spec.f_max *= 1.25,
        _ => {
            return Err(Error::UnknownVariant {
                name: name.to_string(),
                valid: ALL_VARIANTS.join(", "),
            })
        }
    }
    spec.name = name.to_string();
    Ok(spec)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvState {
    /// position, m
    pub x: f64,
    /// velocity, m/s
    pub v: f64,
    /// step counter, 0..=horizon
    pub t: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub observation: [f64; OBS_DIM],
    pub reward: f64,
    pub done: bool,
}

/// Deterministic start: x = 0, v = 0, t = 0; observation (v, t/horizon) = (0, 0).
pub fn reset(_spec: &MorphologySpec) -> (EnvState, [f64; OBS_DIM]) {
    (EnvState { x: 0.0, v: 0.0, t: 0 }, [0.0, 0.0])
}

pub fn step(state: &EnvState, action: &[f64], spec: &MorphologySpec) -> Result<(EnvState, StepResult)> {
    assert_eq!(action.len(), ACTION_DIM, "action must have dim {ACTION_DIM}");
    if state.t >= spec.horizon {
        return Err(Error::EpisodeDone {
            step: state.t,
            horizon: spec.horizon,
        });
    }
    let a1 = action[0].clamp(-1.0, 1.0);
    let a2 = action[1].clamp(-1.0, 1.0);
    let c_eff = spec.drag * (1.0 + spec.posture_gain * a2);
    let v = state.v + spec.dt * (spec.f_max * a1 / spec.mass - c_eff * state.v);
    let x = state.x + spec.dt * v;
    let t = state.t + 1;
    let reward = v - spec.ctrl_cost * (a1 * a1 + a2 * a2);
    let result = StepResult {
        observation: [v, t as f64 / spec.horizon as f64],
        reward,
        done: t == spec.horizon,
    };
    Ok((EnvState { x, v, t }, result))
}

/// An environment instance: spec plus current state and observation.
/// Callers decide when to reset; rollout collectors reset on episode end.
#[derive(Debug, Clone)]
pub struct EnvCursor {
    spec: MorphologySpec,
    state: EnvState,
    obs: [f64; OBS_DIM],
}

impl EnvCursor {
    pub fn new(spec: MorphologySpec) -> Self {
        let (state, obs) = reset(&spec);
        EnvCursor { spec, state, obs }
    }

    pub fn for_variant(name: &str) -> Result<Self> {
        Ok(Self::new(make_variant(name)?))
    }

    #[inline]
    pub fn spec(&self) -> &MorphologySpec {
        &self.spec
    }

    #[inline]
    pub fn obs(&self) -> [f64; OBS_DIM] {
        self.obs
    }

    #[inline]
    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn reset(&mut self) {
        let (state, obs) = reset(&self.spec);
        self.state = state;
        self.obs = obs;
    }

    pub fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        let (state, result) = step(&self.state, action, &self.spec)?;
        self.state = state;
        self.obs = result.observation;
        Ok(result)
    }
}

/// Episode return of a constant action, simulated to the horizon.
pub fn constant_action_return(spec: &MorphologySpec, action: [f64; 2]) -> f64 {
    let (mut state, _) = reset(spec);
    let mut total = 0.0;
    for _ in 0..spec.horizon {
        let (next, result) = step(&state, &action, spec).expect("within horizon");
        total += result.reward;
        state = next;
    }
    total
}

/// Grid search over constant actions `(a1, a2)` on `{-1, -0.9, ..., 1}^2`.
/// Returns the best action and its episode return. Reference oracle for
/// judging learned policies.
pub fn best_constant_action(spec: &MorphologySpec) -> ([f64; 2], f64) {
    let mut best = ([0.0, 0.0], f64::NEG_INFINITY);
    for i in 0..21 {
        for j in 0..21 {
            let a = [-1.0 + 0.1 * i as f64, -1.0 + 0.1 * j as f64];
            let ret = constant_action_return(spec, a);
            if ret > best.1 {
                best = (a, ret);
            }
        }
    }
    best
}
