//! Meta-learned reservoir-computer forecasting from short time series.
//!
//! A fixed random *forecaster* reservoir is trained separately on each long
//! library signal. Every post-transient window of every long signal becomes a
//! training example for a second reservoir, the *signal mapper*, which learns
//! to map a short cue to a (cold-start state, output layer) pair. At test time
//! the mapper builds and initializes a forecaster tailored to the cue.
//!
//! Module map:
//!
//! - [`systems`]: logistic, Gauss and Lorenz-63 ground truth generators.
//! - [`reservoir`]: reservoir construction, open/closed-loop driving, ridge readouts.
//! - [`library`]: the meta-library, signal mapper and tailored forecasts.
//! - [`baselines`]: comparison methods sharing the same forecaster reservoir.
//! - [`metrics`]: valid time, autonomous one-step error, CDFs, bifurcation data.
//! - [`io`]: binary container + JSON sidecar persistence.
//!
//! Data-parallel loops go through [`par`], which uses rayon when the
//! `parallel` feature is enabled (the default) and plain iteration otherwise.

pub mod baselines;
pub mod error;
pub mod io;
pub mod library;
pub mod linalg;
pub mod metrics;
pub mod par;
pub mod reservoir;
pub mod rng;
pub mod series;
pub mod systems;

pub use error::{Error, Result};
pub use library::{MetaLibrary, SignalMapper, TailoredForecaster, TargetMode};
pub use reservoir::{Forecast, Reservoir, ReservoirSpec, ReservoirState, StateTrajectory, TrainedModel};
pub use series::Series;
