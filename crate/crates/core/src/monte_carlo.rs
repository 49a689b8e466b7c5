//! Reproducible batches of `ln Z`, and the estimators computed from them.
//!
//! Trial `t` of a run with seed `s` always uses the generator
//! `trial_rng(s, domain, t)`, so a batch depends only on the configuration,
//! the seed and the trial range. Trials run on the rayon pool and are
//! collected in trial order before sorting.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{sample_log_norm, EnsembleConfig, LogNorm, UnitVector};
use crate::rng::{trial_rng, Domain};
use crate::stats::{normal_cdf, one_sample_ks, KsReport, KS_CRITICAL_5PCT};

/// Finite log-norm samples in ascending order, plus the count of zero events.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub samples: Vec<f64>,
    pub zero_event_count: usize,
    pub trials: usize,
    pub seed: u64,
    /// Hex prefix of a SHA-256 over the sampler description.
    pub fingerprint: String,
}

impl SampleBatch {
    pub(crate) fn from_outcomes(outcomes: Vec<LogNorm>, seed: u64, fingerprint: String) -> Self {
        let trials = outcomes.len();
        let mut samples: Vec<f64> = outcomes.into_iter().filter_map(LogNorm::value).collect();
        samples.sort_by(f64::total_cmp);
        let zero_event_count = trials - samples.len();
        Self {
            samples,
            zero_event_count,
            trials,
            seed,
            fingerprint,
        }
    }

    pub fn zero_event_rate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.zero_event_count as f64 / self.trials as f64
        }
    }
}

pub fn fingerprint(description: &str) -> String {
    Sha256::digest(description.as_bytes())[..8]
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub(crate) fn product_description(config: &EnsembleConfig, u: &UnitVector) -> String {
    let coords: Vec<String> = u
        .coords()
        .iter()
        .map(|c| format!("{:016x}", c.to_bits()))
        .collect();
    format!("product;{};u={}", config.describe(), coords.join(","))
}

/// `trials` draws of `ln Z` on streams `0..trials`.
pub fn run_trials(
    config: &EnsembleConfig,
    u: &UnitVector,
    trials: usize,
    seed: u64,
) -> Result<SampleBatch> {
    run_trials_range(config, u, 0, trials, seed)
}

/// Draws on streams `first..first + trials`; batches over adjacent ranges
/// merge into the batch over their union.
pub fn run_trials_range(
    config: &EnsembleConfig,
    u: &UnitVector,
    first: u64,
    trials: usize,
    seed: u64,
) -> Result<SampleBatch> {
    let n0 = config.architecture.input_width();
    if u.dim() != n0 {
        return Err(Error::DimensionMismatch {
            expected: n0,
            found: u.dim(),
        });
    }
    let outcomes = (first..first + trials as u64)
        .into_par_iter()
        .map(|t| sample_log_norm(config, u, &mut trial_rng(seed, Domain::Product, t)))
        .collect();
    Ok(SampleBatch::from_outcomes(
        outcomes,
        seed,
        fingerprint(&product_description(config, u)),
    ))
}

/// `χ²_n` by summing squares for small `n` and through the gamma law above.
fn chi_square<R: Rng + ?Sized>(n: usize, gamma: Option<&Gamma<f64>>, rng: &mut R) -> f64 {
    match gamma {
        Some(g) => g.sample(rng),
        None => (0..n)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                z * z
            })
            .sum(),
    }
}

/// Largest degree of freedom sampled as an explicit sum of squares.
const CHI_SQUARE_DIRECT_MAX: usize = 32;

/// Samples of `Σ_i ln(χ²_{n_i}/n_i)` with independent chi-squares, the exact
/// law of `ln Z` for Gaussian entries without masks.
pub fn chi_square_product_sampler(
    widths: &[usize],
    trials: usize,
    seed: u64,
) -> Result<SampleBatch> {
    if let Some(bad) = widths.iter().position(|&n| n == 0) {
        return Err(Error::InvalidArchitecture(format!("width {bad} is zero")));
    }
    let gammas: Vec<Option<Gamma<f64>>> = widths
        .iter()
        .map(|&n| {
            (n > CHI_SQUARE_DIRECT_MAX)
                .then(|| Gamma::new(n as f64 / 2.0, 2.0).expect("positive shape"))
        })
        .collect();
    let outcomes = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, Domain::ChiSquare, t);
            let total = widths
                .iter()
                .zip(&gammas)
                .map(|(&n, g)| (chi_square(n, g.as_ref(), &mut rng) / n as f64).ln())
                .sum();
            LogNorm::Value(total)
        })
        .collect();
    let widths: Vec<String> = widths.iter().map(usize::to_string).collect();
    let description = format!("chi-square;widths={}", widths.join(","));
    Ok(SampleBatch::from_outcomes(
        outcomes,
        seed,
        fingerprint(&description),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEstimate {
    pub k: u32,
    pub estimate: f64,
    pub stderr: f64,
    pub trials: usize,
}

/// Sample mean of `Z^k = exp(k·ln Z)`, with zero events contributing 0.
pub fn empirical_moment(batch: &SampleBatch, k: u32) -> Result<MomentEstimate> {
    if batch.trials < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            available: batch.trials,
        });
    }
    let n = batch.trials as f64;
    let values = || batch.samples.iter().map(|&l| (f64::from(k) * l).exp());
    let mean = values().sum::<f64>() / n;
    let squares: f64 = values().map(|v| (v - mean) * (v - mean)).sum::<f64>()
        + batch.zero_event_count as f64 * mean * mean;
    let stderr = (squares / (n - 1.0) / n).sqrt();
    Ok(MomentEstimate {
        k,
        estimate: mean,
        stderr,
        trials: batch.trials,
    })
}

/// One-sample KS distance between the finite samples and `N(mean, variance)`.
/// Zero events are left out; the caller reports them.
pub fn ks_to_gaussian(batch: &SampleBatch, mean: f64, variance: f64) -> Result<KsReport> {
    if batch.samples.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if variance.is_nan() || variance <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "variance {variance} must be positive"
        )));
    }
    let statistic = one_sample_ks(&batch.samples, |x| normal_cdf(x, mean, variance));
    let n = batch.samples.len();
    Ok(KsReport {
        statistic,
        sizes: (n, None),
        reference: format!("normal(mean={mean}, variance={variance})"),
        critical_5pct: KS_CRITICAL_5PCT / (n as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::DistributionSpec;
    use crate::model::Architecture;
    use crate::stats::{standard_normal_cdf, two_sample_ks};

    fn config(widths: &[usize], p: f64, law: DistributionSpec) -> EnsembleConfig {
        EnsembleConfig::new(Architecture::new(widths.to_vec()).unwrap(), p, law).unwrap()
    }

    fn batch(samples: Vec<f64>, zeros: usize) -> SampleBatch {
        let trials = samples.len() + zeros;
        SampleBatch {
            samples,
            zero_event_count: zeros,
            trials,
            seed: 0,
            fingerprint: String::new(),
        }
    }

    /// Inverse of the standard normal CDF by bisection.
    fn normal_quantile(q: f64) -> f64 {
        let (mut lo, mut hi) = (-40.0, 40.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if standard_normal_cdf(mid) < q {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn empty_and_deterministic_runs() {
        let g = config(&[3, 3], 1.0, DistributionSpec::StandardGaussian);
        let u = UnitVector::uniform(3).unwrap();
        let empty = run_trials(&g, &u, 0, 1).unwrap();
        assert!(empty.samples.is_empty());
        assert_eq!(empty.zero_event_count, 0);

        let r = config(&[4, 1], 1.0, DistributionSpec::Rademacher);
        let e1 = UnitVector::basis(4, 0).unwrap();
        let b = run_trials(&r, &e1, 100, 5).unwrap();
        assert_eq!(b.samples, vec![0.0; 100]);
        assert_eq!(b.zero_event_count, 0);
    }

    #[test]
    fn rejects_wrong_dimension() {
        let g = config(&[3, 3], 1.0, DistributionSpec::StandardGaussian);
        let u = UnitVector::uniform(2).unwrap();
        assert!(matches!(
            run_trials(&g, &u, 5, 1),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn empirical_moment_examples() {
        let m = empirical_moment(&batch(vec![0.0; 5], 0), 3).unwrap();
        assert_eq!((m.estimate, m.stderr), (1.0, 0.0));
        let two_eight = vec![2f64.ln(), 8f64.ln()];
        let m = empirical_moment(&batch(two_eight.clone(), 0), 1).unwrap();
        assert!((m.estimate - 5.0).abs() < 1e-12);
        // Sample variance 18, two trials.
        assert!((m.stderr - 3.0).abs() < 1e-12);
        let m = empirical_moment(&batch(two_eight, 2), 1).unwrap();
        assert!((m.estimate - 2.5).abs() < 1e-12);
        assert!(matches!(
            empirical_moment(&batch(vec![1.0], 0), 1),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn ks_examples() {
        let single = ks_to_gaussian(&batch(vec![1.5], 0), 1.5, 2.0).unwrap();
        assert_eq!(single.statistic, 0.5);

        let n = 1000;
        let quantiles: Vec<f64> = (1..=n)
            .map(|i| normal_quantile((2 * i - 1) as f64 / (2 * n) as f64))
            .collect();
        let report = ks_to_gaussian(&batch(quantiles, 0), 0.0, 1.0).unwrap();
        assert!(report.statistic <= 0.5 / n as f64 + 1e-9);

        let far = ks_to_gaussian(&batch(vec![12.0; 10], 0), 0.0, 1.0).unwrap();
        assert!(far.statistic > 1.0 - 1e-12);
        assert!(matches!(
            ks_to_gaussian(&batch(vec![], 3), 0.0, 1.0),
            Err(Error::EmptyBatch)
        ));
    }

    #[test]
    fn ks_is_affine_invariant() {
        let g = config(&[6, 6, 6], 1.0, DistributionSpec::StandardGaussian);
        let u = UnitVector::uniform(6).unwrap();
        let b = run_trials(&g, &u, 2000, 3).unwrap();
        let (mean, var) = (-0.3, 0.7);
        let raw = ks_to_gaussian(&b, mean, var).unwrap().statistic;
        let sd = var.sqrt();
        let standardized: Vec<f64> = b.samples.iter().map(|x| (x - mean) / sd).collect();
        let std = ks_to_gaussian(&batch(standardized, 0), 0.0, 1.0)
            .unwrap()
            .statistic;
        assert!((raw - std).abs() <= 1e-12);
    }

    #[test]
    fn reproducible_and_mergeable() {
        let c = config(&[5, 7, 4], 0.6, DistributionSpec::UniformSymmetric);
        let u = UnitVector::basis(5, 2).unwrap();
        let a = run_trials(&c, &u, 300, 11).unwrap();
        assert_eq!(a, run_trials(&c, &u, 300, 11).unwrap());
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        assert_eq!(a, single.install(|| run_trials(&c, &u, 300, 11).unwrap()));
        let eight = rayon::ThreadPoolBuilder::new()
            .num_threads(8)
            .build()
            .unwrap();
        assert_eq!(a, eight.install(|| run_trials(&c, &u, 300, 11).unwrap()));

        let head = run_trials_range(&c, &u, 0, 120, 11).unwrap();
        let tail = run_trials_range(&c, &u, 120, 180, 11).unwrap();
        let mut merged: Vec<f64> = head.samples.iter().chain(&tail.samples).copied().collect();
        merged.sort_by(f64::total_cmp);
        assert_eq!(merged, a.samples);
        assert_eq!(
            head.zero_event_count + tail.zero_event_count,
            a.zero_event_count
        );
        assert_ne!(a, run_trials(&c, &u, 300, 12).unwrap());
    }

    #[test]
    fn chi_square_sampler() {
        let empty = chi_square_product_sampler(&[], 50, 0).unwrap();
        assert_eq!(empty.samples, vec![0.0; 50]);

        let trials = 100_000;
        for widths in [vec![3, 40], vec![2]] {
            let b = chi_square_product_sampler(&widths, trials, 9).unwrap();
            let m = empirical_moment(&b, 1).unwrap();
            assert!(
                (m.estimate - 1.0).abs() <= 5.0 * m.stderr,
                "{widths:?} {m:?}"
            );
        }
        // χ²_2/2 is Exponential(1): variance 1, and Var of the sample
        // variance is (μ4 - σ⁴)/N = 8/N.
        let b = chi_square_product_sampler(&[2], trials, 4).unwrap();
        let values: Vec<f64> = b.samples.iter().map(|l| l.exp()).collect();
        let mean = values.iter().sum::<f64>() / trials as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
        assert!(
            (var - 1.0).abs() <= 5.0 * (8.0 / trials as f64).sqrt(),
            "{var}"
        );
        assert_eq!(b, chi_square_product_sampler(&[2], trials, 4).unwrap());
    }

    #[test]
    fn gamma_branch_agrees_with_sum_of_squares() {
        // Same law from both branches: χ²_40 as a gamma draw vs χ²_20 + χ²_20.
        let direct = chi_square_product_sampler(&[40], 20_000, 1).unwrap();
        let trials = 20_000;
        let summed: Vec<f64> = (0..trials as u64)
            .map(|t| {
                let mut rng = trial_rng(99, Domain::ChiSquare, t);
                ((chi_square(20, None, &mut rng) + chi_square(20, None, &mut rng)) / 40.0).ln()
            })
            .collect();
        let ks = two_sample_ks(&direct.samples, &summed).unwrap();
        assert!(!ks.rejects_at_5pct(), "{ks:?}");
    }
}
