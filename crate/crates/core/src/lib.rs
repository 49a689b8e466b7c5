//! Simulation and exact computation for products of random matrices
//! `M = X_d ⋯ X_1` with `X_i = (p n_{i-1})^{-1/2} D_i W_i`, where `D_i` is a
//! diagonal Bernoulli(p) mask and `W_i` has i.i.d. symmetric entries.
//!
//! The crate is organised around the quantity `ln Z = ln((n_0/n_d)‖M u‖²)`:
//!
//! * [`model`] propagates a unit vector layer by layer and evaluates the
//!   closed-form variance parameter β of the log-normal approximation;
//! * [`path_moments`] computes `E[Z^k]` exactly as a sum over paths, together
//!   with independent enumeration oracles;
//! * [`monte_carlo`] draws reproducible batches of `ln Z`;
//! * [`relu`] builds random ReLU networks and samples the same statistic for
//!   their input-output Jacobians;
//! * [`stats`] holds the normal CDF and Kolmogorov–Smirnov machinery.

pub mod distribution;
pub mod error;
pub mod model;
pub mod monte_carlo;
pub mod path_moments;
pub mod relu;
pub mod rng;
pub mod stats;

pub use distribution::{validate_distribution, Atom, DistributionSpec};
pub use error::{Error, Result};
pub use model::{
    compute_beta, error_budget, predict_layer_variance, propagate_layer, sample_log_norm,
    zero_event_probability, Architecture, BetaParams, EnsembleConfig, ErrorBudget, LayerState,
    LogNorm, UnitVector, ZeroEventProbability,
};
pub use monte_carlo::{
    chi_square_product_sampler, empirical_moment, ks_to_gaussian, run_trials, run_trials_range,
    MomentEstimate, SampleBatch,
};
pub use path_moments::{
    brute_force_moment, edge_weight, enumerate_discrete_moment, exact_moment, layer_factor,
    multiplicity_count, theory_moment, verify_path_count, EdgeMultiplicity, ExactMoment,
    PathBudget, TupleClass, VertexTuple,
};
pub use relu::{
    compare_jacobian_vs_product, evgp_beta, JacobianComparison, JacobianResult, ReluNet,
    ReluNetConfig,
};
pub use stats::{normal_cdf, summary, two_sample_ks, KsReport, Summary};
