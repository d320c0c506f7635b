//! Multi-task actor-critic learning for continuous control.
//!
//! The crate bundles everything needed to run the experiments end to end:
//!
//! - [`nn`]: small dense networks with reverse-accumulation gradients
//! - [`optim`]: RMSprop with optional per-tensor freezing
//! - [`env`](mod@env): the CheetahLite environment family (seven morphological variants)
//! - [`policy`]: diagonal-Gaussian actors, critics, and the Gaussian KL
//! - [`a2c`]: advantage actor-critic training on t_max-step segments
//! - [`distill`]: teacher-student policy distillation (single and multi-task)
//! - [`trainers`]: vanilla multi-task training and fine-tuning transfer
//! - [`eval`], [`checkpoint`], [`curve`], [`config`]: the evaluation protocol,
//!   checkpoint persistence, learning-curve files, and run configuration
//!
//! All randomness is seeded and streamed ([`rng`]), all math is `f64`, and
//! repeated runs with the same seed produce identical outputs.

pub mod a2c;
pub mod checkpoint;
pub mod config;
pub mod curve;
pub mod distill;
pub mod env;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod nn;
pub mod optim;
pub mod policy;
pub mod rng;
pub mod tensor;
pub mod trainers;

pub use error::{Error, Result};
pub use tensor::Tensor;
