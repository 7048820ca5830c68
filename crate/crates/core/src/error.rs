use thiserror::Error;

/// Errors raised by evaluators, samplers and simulation drivers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{function}: argument {x} violates the domain ({requirement})")]
    Domain {
        function: &'static str,
        requirement: &'static str,
        x: f64,
    },

    #[error("{function}: argument {x} is outside the supported range; last representable value {last}")]
    OutOfRange {
        function: &'static str,
        x: f64,
        last: f64,
    },

    #[error("{what}: tolerance {requested:e} not met, achieved error estimate {achieved:e}")]
    Convergence {
        what: &'static str,
        requested: f64,
        achieved: f64,
    },

    #[error("kernel conditioning kept effective sample size {ess:.1}, need at least {required}")]
    InsufficientConditioning { ess: f64, required: usize },

    #[error("non-finite state at step {step}")]
    NumericalBlowup { step: usize },

    #[error("horizon too short: tail mass {tail_mass:e} relative to total")]
    HorizonTooShort { tail_mass: f64 },

    #[error("fit window holds {points} points, need at least {required}")]
    InsufficientResolution { points: usize, required: usize },

    #[error("particle population {population} exceeded budget {budget}")]
    Resource { population: usize, budget: usize },

    #[error("only {survivors} usable replicates, need at least {required}")]
    Underpowered { survivors: usize, required: usize },

    #[error("invalid parameter: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(function: &'static str, requirement: &'static str, x: f64) -> Error {
    Error::Domain {
        function,
        requirement,
        x,
    }
}
