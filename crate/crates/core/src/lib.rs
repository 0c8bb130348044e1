//! Pedestrian path planning in a corridor with an obstacle whose perceived
//! danger shapes the path.
//!
//! * [`env`]: corridor scenarios, observations and the success-gated reset.
//! * [`reward`]: the six comfort terms and their weighted total.
//! * [`policy`]: Gaussian MLP policy with hand-written gradients.
//! * [`ppo`]: one-step-episode PPO over parallel environment copies.
//! * [`sfm`]: social force baseline.
//! * [`eval`]: suites, metrics, the cross-entropy oracle and reports.
//! * [`cli`]: the `pedpath` command line.
//!
//! The guide under `book/` walks through each piece; its code blocks are
//! compiled and run as doctests of this crate.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod env;
pub mod error;
pub mod eval;
pub mod policy;
pub mod ppo;
pub mod reward;
pub mod sfm;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/corridor.md")]
    mod corridor {}
    #[doc = include_str!("../../../book/src/reward.md")]
    mod reward {}
    #[doc = include_str!("../../../book/src/policy.md")]
    mod policy {}
    #[doc = include_str!("../../../book/src/ppo.md")]
    mod ppo {}
    #[doc = include_str!("../../../book/src/sfm.md")]
    mod sfm {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
}
