//! Fixtures shared by the benchmarks.

use matprod_core::{Architecture, DistributionSpec, EnsembleConfig, UnitVector};

/// Constant width `n` and depth `d`, Gaussian entries.
pub fn gaussian(n: usize, depth: usize, p: f64) -> (EnsembleConfig, UnitVector) {
    let arch = Architecture::constant(n, n, depth).expect("positive sizes");
    let config = EnsembleConfig::new(arch, p, DistributionSpec::StandardGaussian).expect("valid p");
    (config, UnitVector::uniform(n).expect("positive width"))
}
