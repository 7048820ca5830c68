//! Numerical laboratory for the stochastic differential equation satisfied by
//! the local times of super-Brownian motion.

mod dd;
pub mod drift;
pub mod error;
pub mod particles;
pub mod quad;
pub mod rng;
pub mod sde;
pub mod selfcheck;
pub mod specfun;
pub mod stabledist;
pub mod stats;

pub use error::{Error, Result};
