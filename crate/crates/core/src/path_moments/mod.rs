//! Exact moments `E[Z^k]` of `Z = (n_0/n_d)‖M u‖²` as sums over ordered
//! k-tuples of paths through the layers, the combinatorial pieces of that sum,
//! and independent enumeration oracles.

mod brute;
mod combinatorics;
mod exact;
mod partitions;
mod scalar;

pub use brute::{brute_force_moment, brute_force_moment_with, enumerate_discrete_moment};
pub use combinatorics::{
    edge_weight, layer_factor, multiplicity_count, verify_path_count, EdgeMultiplicity, TupleClass,
    VertexTuple,
};
pub use exact::{exact_moment, exact_moment_with, theory_moment, ExactMoment, PathBudget};
