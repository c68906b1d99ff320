//! Optimal nested-threshold promotion policies for a reflected diffusion
//! whose drift is raised by costly promotion activities.
//!
//! * [`model`]: instance, activation cost `c`, conjugate pair `(psi, phi)`.
//! * [`closedform`]: piecewise-analytic value function and shooting for `beta*`.
//! * [`bellman_ode`]: RK4 integration of the Bellman IVP and bisection on its
//!   classification, an independent route to `beta*`.
//! * [`policies`]: static, randomized-static and dynamic threshold policies.
//! * [`simulate`]: Euler Monte Carlo of the controlled reflected diffusion.
//!
//! Replications and parameter sweeps run on rayon when the `parallel`
//! feature is enabled (the default); see [`exec`].

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bellman_ode;
pub mod closedform;
pub mod error;
pub mod exec;
pub mod model;
pub mod policies;
pub mod simulate;

pub use closedform::{find_beta_star, SolveResult, ValueFunction};
pub use error::{Error, Result};
pub use exec::Execution;
pub use model::{ConjugatePair, ControlVector, ProblemInstance};
pub use policies::Policy;
pub use simulate::{simulate_policy, SimConfig, SimulationReport};

/// The four-activity instance used throughout the tests and examples.
pub fn reference_instance() -> ProblemInstance {
    ProblemInstance::new(
        -1.5,
        vec![0.5, 0.7, 0.175, 2.625],
        vec![5.0, 8.0, 20.0, 50.0],
        4.0,
        3.0,
        100.0,
    )
    .expect("reference instance is valid")
}
