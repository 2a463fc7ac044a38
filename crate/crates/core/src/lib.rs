//! Marked Hawkes processes for retweet cascades.
//!
//! The crate covers the power-law kernel with user-influence marks, maximum
//! likelihood fitting under a subcriticality constraint, final-size
//! prediction with a random-forest correction layer, simulation, the
//! feature-driven baselines and the experiment harness that compares them.
//! All randomness is derived from one root seed through [`seed::derive`].

pub mod config;
pub mod error;
pub mod experiment;
pub mod features;
pub mod fitting;
pub mod forest;
pub mod io;
pub mod likelihood;
pub mod model;
mod optim;
pub mod prediction;
pub mod quadrature;
pub mod seed;
pub mod simulation;
pub mod synthetic;

pub use error::{Error, Result};
pub use fitting::{fit, FitConfig, FitResult};
pub use likelihood::log_likelihood;
pub use model::{branching_factor, Cascade, Event, HawkesParams, InfluenceDistribution, UserMeta};
pub use prediction::{predict_raw, PredictionOutcome, PredictiveLayer};
pub use simulation::{continue_cascade, simulate, SimConfig};
