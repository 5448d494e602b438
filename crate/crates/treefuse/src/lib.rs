//! Full Bayesian inference for regression coefficients that are sparse and
//! piecewise-constant over a known graph.
//!
//! Coefficients are clustered by a contiguous graph partition drawn from a
//! random-spanning-forest prior; within the reduced cluster space a
//! multivariate horseshoe prior shrinks small cluster effects to zero while
//! letting large ones escape. Posterior inference runs a collapsed
//! reversible-jump MCMC over partitions with incremental Cholesky updates,
//! so one iteration costs O(max{nK, K³}) rather than O(n³).
//!
//! The crate is generic over the floating-point scalar (see [`Scalar`]);
//! `f64` aliases for the main entry points live at the crate root. The
//! `treefuse` binary exposes the `fit`, `summarize`, `simulate`, and
//! `bf-curve` subcommands.

pub mod error;
pub mod graph;
pub mod inference;
pub mod io;
pub mod linalg;
pub mod model;
pub mod partition;
pub mod quadrature;
pub mod sampler;
pub mod scalar;
pub mod shrinkage;
pub mod sim;

pub use error::{Error, Result};
pub use graph::{minimum_spanning_forest, sample_forest_prior, EdgeWeights, Graph};
pub use inference::{dahl_point_estimate, mspe, posterior_median_beta, rand_index, ChainOutput};
pub use model::{Dataset, DesignMatrix, Hyperparams, ModelState};
pub use partition::{
    induce_partition, merge, projection_matrix, resample_forest_compatible, split, Partition,
    Projection, SpanningForest,
};
pub use sampler::{run_chain, Chain, ChainOptions, MoveKind, MoveRecord, Schedule};
pub use scalar::Scalar;

/// Default RNG used by the CLI and tests: explicit algorithm, stable
/// streams across platforms.
pub type DefaultRng = rand_chacha::ChaCha8Rng;

/// `f64` aliases for the common entry points.
pub type Dataset64 = model::Dataset<f64>;
pub type Hyperparams64 = model::Hyperparams<f64>;
pub type ChainOutput64 = inference::ChainOutput<f64>;
pub type Chain64 = sampler::Chain<f64>;
