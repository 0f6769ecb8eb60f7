//! Simulation and adaptive control of linear diffusion processes.
//!
//! The plant is the stochastic differential equation
//!
//! ```text
//! dx_t = (A₀ x_t + B₀ u_t) dt + dW_t,
//! ```
//!
//! with unknown drift matrices (A₀, B₀) and Wiener noise of covariance C.
//! This crate provides the pieces needed to study learning-to-control on
//! such plants at desk scale:
//!
//! * [`sim`] — Euler–Maruyama trajectory simulation with common random
//!   numbers, piecewise-constant dither, and a matrix exponential.
//! * [`riccati`] — Riccati/Lyapunov solvers, optimal gains, stability
//!   margins, and the perturbation analysis connecting estimation error to
//!   control performance.
//! * [`posterior`] — conjugate Gaussian identification of the drift from
//!   continuously observed trajectories.
//! * [`policy`] — the adaptive policies under study: stabilization through
//!   randomized exploration and episodic Thompson sampling, plus the
//!   baselines they are compared against.
//! * [`metrics`] — regret and estimation-error summaries.
//! * [`scenario`], [`experiment`] — the bundled example plants and the
//!   Monte Carlo harness behind the command-line interface.
//!
//! Everything is deterministic given a seed: experiments are reproducible
//! to the byte across thread counts.

pub mod checks;
pub mod error;
pub mod experiment;
mod linalg;
pub mod metrics;
pub mod plot;
pub mod policy;
pub mod posterior;
pub mod riccati;
pub mod scenario;
pub mod sim;

pub use error::{Error, Result};

/// Deterministic random number generator used throughout the crate.
pub type SimRng = rand_chacha::ChaCha12Rng;

/// The guide under `book/` is part of the test suite: every Rust snippet
/// in its chapters compiles and runs as a doc-test, so the prose cannot
/// drift away from the API it describes.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            mod $name {}
        };
    }

    chapter!(introduction, "../../../book/src/introduction.md");
    chapter!(scenarios, "../../../book/src/scenarios.md");
    chapter!(simulation, "../../../book/src/simulation.md");
    chapter!(regulator, "../../../book/src/regulator.md");
    chapter!(perturbation, "../../../book/src/perturbation.md");
    chapter!(identification, "../../../book/src/identification.md");
    chapter!(policies, "../../../book/src/policies.md");
    chapter!(experiments, "../../../book/src/experiments.md");
    chapter!(cli, "../../../book/src/cli.md");
}
