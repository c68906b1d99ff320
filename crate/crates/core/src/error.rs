use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An instance or control vector violates a model constraint.
    #[error("invalid instance: {0}")]
    Validation(String),

    /// An argument lies outside the domain of the operation.
    #[error("{what} = {value} is outside the admissible domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: String,
    },

    /// The conjugate is unbounded below, so there is no finite lower cost bound.
    #[error("conjugate cost is unbounded below: top drift {theta_top} is negative")]
    Unbounded { theta_top: f64 },

    /// The ODE solution left its overflow guard.
    #[error("IVP solution blew up at x = {x} (v = {v}) for beta = {beta}")]
    BlowUp { beta: f64, x: f64, v: f64 },

    /// Integration reached `x_max` without deciding which class `beta` belongs to.
    #[error("classification of beta = {beta} inconclusive on [0, {x_max}]")]
    Inconclusive { beta: f64, x_max: f64 },

    /// The upper end of the bisection bracket did not classify as increasing.
    #[error("upper bracket beta = {beta} does not yield an increasing value function")]
    Bracket { beta: f64 },

    /// Shooting could not drive the tail coefficient below its tolerance:
    /// forward errors grow faster than double precision can resolve.
    #[error("beta* not resolvable at beta = {beta}: tail coefficient {tail_coefficient} exceeds {tolerance}")]
    IllConditioned {
        beta: f64,
        tail_coefficient: f64,
        tolerance: f64,
    },

    #[error("invalid simulation config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
