//! Warning-controlled news propagation modelled as a population-size
//! dependent continuous-time two-type branching process.
//!
//! Modules, bottom-up:
//!
//! * [`model`]: parameters, warning level, tag probabilities, generator matrix.
//! * [`fixed_point`]: limit proportions and type-1 / type-2 performance.
//! * [`ode`]: the mean-field ODE of the embedded chain and its attractor.
//! * [`sim`]: event-driven simulation, coupling and Monte-Carlo aggregation.
//! * [`network`]: SNAP edge lists and simulation on a real follower graph.
//! * [`optimizer`]: optimal warning design under a type-2 constraint.
//! * [`config`]: scenario files.

pub mod config;
pub mod error;
pub mod fixed_point;
pub mod linalg;
pub mod model;
pub mod network;
pub mod ode;
pub mod optimizer;
pub mod root;
pub mod sim;

pub use error::{Error, Result};
pub use fixed_point::{
    eigenvector_check, limit_summary, performance, solve_beta_star, FixedPointResult,
    PerformancePair,
};
pub use model::{
    g_beta, generator_matrix, tag_prob, validate_regime, warning, DegreeModel, ModelParams,
    NewsDynamics, RegimeReport, ScenarioPair, Tag, WarningPolicy,
};
