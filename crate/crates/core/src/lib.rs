//! Solvers and a neural surrogate for one-dimensional reaction-diffusion in a
//! slab with fixed surface concentration (sulfate ingress into concrete).
//!
//! - [`analytic`]: cosine-series solution, pure diffusion, the Danckwerts
//!   transform, steady state, and pure reaction.
//! - [`fd`]: Crank–Nicolson finite-difference reference solver.
//! - [`dataset`]: parameter sampling, labelling, normalization, and CSV storage.
//! - [`mlp`]: from-scratch fully connected network trained with Adam.
//! - [`evaluation`]: error metrics, Damköhler analysis, and experiment sweeps.

pub mod analytic;
pub mod dataset;
pub mod evaluation;
pub mod fd;
pub mod mlp;

pub use analytic::{ProblemSpec, SeriesOptions, SpaceTimePoint, SECONDS_PER_YEAR};
