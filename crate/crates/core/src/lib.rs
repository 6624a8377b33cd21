//! Hawkes processes: simulation, exact likelihoods, estimation,
//! goodness of fit, and forward/backward time-arrow comparison.

pub mod error;
pub mod estimate;
pub mod exec;
pub mod gof;
mod intensity;
pub mod io;
pub mod likelihood;
pub mod model;
pub mod nonparametric;
pub mod optim;
pub mod pipeline;
pub mod rng;
pub mod series;
pub mod simulate;

pub use error::{HawkesError, Result};
pub use exec::Executor;
pub use likelihood::{
    compensators, loglik, loglik_gradient, loglik_modified, loglik_standard, loglik_with, CompensatorSeries,
    ExpGradient, LikelihoodOptions, LikelihoodVariant, LogLikValue,
};
pub use model::{BranchingMatrix, ExpTerm, HawkesModel, Kernel, PowerLaw, SumExp};
pub use series::EventSeries;
pub use simulate::{burn_in_trim, intensity_trace, reverse, simulate, simulate_stationary, SimulationRecord, TracePoint};
