//! Bayesian stochastic block model workbench.
//!
//! Directed SBM with self-loops under a multinomial-Dirichlet assignment prior
//! and uniform block probabilities: generative model, priors, slice geometry,
//! linear hypothesis tests, exact and collapsed-Gibbs posterior inference,
//! and a rate-study harness.

pub mod audits;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod hypothesis;
pub mod inference;
pub mod io;
pub mod model;
pub mod priors;
pub mod rng;
pub mod special;

pub use error::{Error, Result};
pub use geometry::{AnnulusSpec, DistanceDecomposition, OverlapCounts, WeightedEllipsoid};
pub use harness::{ExperimentConfig, RateSchedule, RateStudyRow};
pub use hypothesis::{ErrorRates, TestVerdict};
pub use inference::{ExactPosterior, GibbsConfig, GibbsSampler, PosteriorSample};
pub use model::{
    AdjacencyMatrix, BlockSufficientStats, ClusterAssignment, ConnectivityMatrix,
    EdgeProbabilityMatrix, Truth, TruthSpec,
};
pub use priors::{DirichletWeights, MixingProportions};
