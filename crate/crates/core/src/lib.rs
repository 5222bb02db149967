//! Stochastic SI epidemics on configuration-model random graphs.
//!
//! The crate couples an exact event-driven simulator with the deterministic
//! limit of the aggregated counts `(X_S, X_SI, X_SS)` and with the Gaussian
//! fluctuation theory around that limit:
//!
//! * [`degree`]: degree distributions, generating functions, `D_r`, `kappa`.
//! * [`graph`]: configuration-model construction by half-edge pairing.
//! * [`gillespie`]: exact continuous-time simulation and event logs.
//! * [`lln`]: drift operators and the ODE limit.
//! * [`fclt`]: fluctuation covariances, diffusion sample paths, ellipses.
//! * [`hypermoments`]: exact neighbourhood moments used as an oracle.
//! * [`experiments`]: percolation profiles, costs, simulation-vs-theory reports.

pub mod degree;
pub mod error;
pub mod experiments;
pub mod fclt;
pub mod gillespie;
pub mod graph;
pub mod hypermoments;
pub mod io;
pub mod lln;
pub mod rng;
pub mod stats;

pub use degree::{DegreeDistribution, DistSpec};
pub use error::{NetdiffError, Result};
pub use fclt::{FcltSolution, Mat3};
pub use gillespie::{EpidemicState, SiParams, Trajectory};
pub use graph::{Graph, GraphMode};
pub use lln::LlnSolution;
