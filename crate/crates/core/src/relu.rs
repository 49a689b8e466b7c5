//! Fully connected ReLU networks at initialization and the log-norm of their
//! input-output Jacobian applied to a unit vector.
//!
//! Layer `i` computes `act^(i) = W^(i) Act^(i-1) + B^(i)` and
//! `Act^(i) = max(0, act^(i))`, with `W^(i)` drawn from the weight law scaled by
//! `√(2/n_{i-1})` and `B^(i)` from the bias law scaled by `σ_b`. The Jacobian is
//! `Π_i Diag(1{act^(i) > 0}) W^(i)`; at a fixed input its masks behave like the
//! Bernoulli(1/2) masks of the matrix product, which is what
//! [`compare_jacobian_vs_product`] tests.

use rand::Rng;
use rayon::prelude::*;

use crate::distribution::DistributionSpec;
use crate::error::{Error, Result};
use crate::model::{compute_beta, Architecture, BetaParams, EnsembleConfig, LogNorm, UnitVector};
use crate::monte_carlo::{fingerprint, run_trials, SampleBatch};
use crate::rng::{trial_rng, Domain};
use crate::stats::{two_sample_ks, KsReport};

#[derive(Debug, Clone, PartialEq)]
pub struct ReluNetConfig {
    pub architecture: Architecture,
    pub weight_law: DistributionSpec,
    pub bias_law: DistributionSpec,
    pub bias_scale: f64,
}

impl ReluNetConfig {
    /// Both laws must be atomless, so that no preactivation is exactly zero
    /// almost surely.
    pub fn new(
        architecture: Architecture,
        weight_law: DistributionSpec,
        bias_law: DistributionSpec,
        bias_scale: f64,
    ) -> Result<Self> {
        for (role, law) in [("weight", &weight_law), ("bias", &bias_law)] {
            if !law.is_atomless() {
                return Err(Error::AtomBearingLaw(format!("{role} law {law} has atoms")));
            }
        }
        if !(bias_scale > 0.0 && bias_scale.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "bias scale {bias_scale} must be positive"
            )));
        }
        Ok(Self {
            architecture,
            weight_law: weight_law.validate()?,
            bias_law: bias_law.validate()?,
            bias_scale,
        })
    }

    /// Biases from the weight family with `σ_b = 1`.
    pub fn with_default_bias(
        architecture: Architecture,
        weight_law: DistributionSpec,
    ) -> Result<Self> {
        Self::new(architecture, weight_law.clone(), weight_law, 1.0)
    }

    pub fn describe(&self) -> String {
        let widths: Vec<String> = self
            .architecture
            .widths()
            .iter()
            .map(usize::to_string)
            .collect();
        format!(
            "relu;widths={};weights={};bias={};bias_scale={:e}",
            widths.join(","),
            self.weight_law,
            self.bias_law,
            self.bias_scale
        )
    }
}

/// The all-ones input scaled to unit norm.
pub fn default_input(n0: usize) -> Vec<f64> {
    vec![(n0 as f64).sqrt().recip(); n0]
}

/// One network: scaled weights (row `b` of layer `i` holds the inputs of
/// neuron `b`) and biases.
#[derive(Debug, Clone, PartialEq)]
pub struct ReluNet {
    weights: Vec<Vec<Vec<f64>>>,
    biases: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub input: Vec<f64>,
    /// `act^(j)` for `j = 1..=d`.
    pub preactivations: Vec<Vec<f64>>,
    /// `Act^(j) = max(0, act^(j))` for `j = 1..=d`.
    pub activations: Vec<Vec<f64>>,
}

impl ForwardTrace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().map_or(&self.input, Vec::as_slice)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JacobianResult {
    /// `n_d × n_0`, by rows.
    pub matrix: Vec<Vec<f64>>,
    /// Open neurons per layer.
    pub open_counts: Vec<usize>,
}

pub fn relu(v: &[f64]) -> Vec<f64> {
    v.iter().map(|&x| x.max(0.0)).collect()
}

impl ReluNet {
    /// Draws layer by layer: the weights row by row, then the biases.
    pub fn sample<R: Rng + ?Sized>(config: &ReluNetConfig, rng: &mut R) -> Self {
        let widths = config.architecture.widths();
        let mut weights = Vec::with_capacity(widths.len() - 1);
        let mut biases = Vec::with_capacity(widths.len() - 1);
        for w in widths.windows(2) {
            let (n_in, n_out) = (w[0], w[1]);
            let scale = (2.0 / n_in as f64).sqrt();
            weights.push(
                (0..n_out)
                    .map(|_| {
                        (0..n_in)
                            .map(|_| scale * config.weight_law.sample(rng))
                            .collect()
                    })
                    .collect(),
            );
            biases.push(
                (0..n_out)
                    .map(|_| config.bias_scale * config.bias_law.sample(rng))
                    .collect(),
            );
        }
        Self { weights, biases }
    }

    /// A network with the given (already scaled) weights and biases.
    pub fn from_parts(weights: Vec<Vec<Vec<f64>>>, biases: Vec<Vec<f64>>) -> Result<Self> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(Error::InvalidArchitecture(
                "need one bias vector per weight matrix".into(),
            ));
        }
        let mut n_in = weights[0].first().map_or(0, Vec::len);
        for (w, b) in weights.iter().zip(&biases) {
            if w.is_empty() || b.len() != w.len() {
                return Err(Error::DimensionMismatch {
                    expected: w.len(),
                    found: b.len(),
                });
            }
            if let Some(row) = w.iter().find(|r| r.len() != n_in) {
                return Err(Error::DimensionMismatch {
                    expected: n_in,
                    found: row.len(),
                });
            }
            n_in = w.len();
        }
        Ok(Self { weights, biases })
    }

    pub fn input_width(&self) -> usize {
        self.weights[0][0].len()
    }

    pub fn output_width(&self) -> usize {
        self.biases.last().map_or(0, Vec::len)
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_width() {
            return Err(Error::DimensionMismatch {
                expected: self.input_width(),
                found: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<ForwardTrace> {
        self.check_input(x)?;
        let mut preactivations = Vec::with_capacity(self.weights.len());
        let mut activations: Vec<Vec<f64>> = Vec::with_capacity(self.weights.len());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            let prev = activations.last().map_or(x, Vec::as_slice);
            let act: Vec<f64> = w
                .iter()
                .zip(b)
                .map(|(row, bias)| dot(row, prev) + bias)
                .collect();
            activations.push(relu(&act));
            preactivations.push(act);
        }
        Ok(ForwardTrace {
            input: x.to_vec(),
            preactivations,
            activations,
        })
    }

    /// `ln((n_0/n_d)‖Jac(x) u‖²)`, propagating `u` one layer at a time and
    /// renormalizing after each. A preactivation of exactly zero counts as
    /// closed.
    pub fn jacobian_log_norm(&self, x: &[f64], u: &UnitVector) -> Result<LogNorm> {
        let trace = self.forward(x)?;
        if u.dim() != self.input_width() {
            return Err(Error::DimensionMismatch {
                expected: self.input_width(),
                found: u.dim(),
            });
        }
        let mut v = u.coords().to_vec();
        let mut log_norm = 0.0;
        for (w, act) in self.weights.iter().zip(&trace.preactivations) {
            let mut next: Vec<f64> = w
                .iter()
                .zip(act)
                .map(|(row, &a)| if a > 0.0 { dot(row, &v) } else { 0.0 })
                .collect();
            let norm_sq: f64 = next.iter().map(|c| c * c).sum();
            if norm_sq == 0.0 {
                return Ok(LogNorm::Zero);
            }
            let inv = norm_sq.sqrt().recip();
            next.iter_mut().for_each(|c| *c *= inv);
            log_norm += norm_sq.ln();
            v = next;
        }
        let ratio = self.input_width() as f64 / self.output_width() as f64;
        Ok(LogNorm::Value(log_norm + ratio.ln()))
    }

    /// The full Jacobian matrix at `x`; meant for small networks.
    pub fn dense_jacobian(&self, x: &[f64]) -> Result<JacobianResult> {
        let trace = self.forward(x)?;
        let n0 = self.input_width();
        let mut matrix: Vec<Vec<f64>> = (0..n0)
            .map(|a| (0..n0).map(|b| f64::from(u8::from(a == b))).collect())
            .collect();
        let mut open_counts = Vec::with_capacity(self.weights.len());
        for (w, act) in self.weights.iter().zip(&trace.preactivations) {
            open_counts.push(act.iter().filter(|&&a| a > 0.0).count());
            matrix = w
                .iter()
                .zip(act)
                .map(|(row, &a)| {
                    (0..n0)
                        .map(|c| {
                            if a > 0.0 {
                                row.iter().zip(&matrix).map(|(wr, m)| wr * m[c]).sum()
                            } else {
                                0.0
                            }
                        })
                        .collect()
                })
                .collect();
        }
        Ok(JacobianResult {
            matrix,
            open_counts,
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// β of the matrix product the Jacobian is compared with: `p = 1/2`.
pub fn evgp_beta(config: &ReluNetConfig, u: &UnitVector) -> Result<BetaParams> {
    compute_beta(&product_config(config, 0.5)?, u)
}

fn product_config(config: &ReluNetConfig, p: f64) -> Result<EnsembleConfig> {
    EnsembleConfig::new(config.architecture.clone(), p, config.weight_law.clone())
}

#[derive(Debug, Clone, PartialEq)]
pub struct JacobianComparison {
    pub jacobian: SampleBatch,
    pub product: SampleBatch,
    pub ks: KsReport,
}

/// Jacobian log-norms of `trials` independent networks at the input `x`.
pub fn jacobian_batch(
    config: &ReluNetConfig,
    x: &[f64],
    u: &UnitVector,
    trials: usize,
    seed: u64,
) -> Result<SampleBatch> {
    let n0 = config.architecture.input_width();
    for found in [x.len(), u.dim()] {
        if found != n0 {
            return Err(Error::DimensionMismatch {
                expected: n0,
                found,
            });
        }
    }
    let outcomes = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let net = ReluNet::sample(config, &mut trial_rng(seed, Domain::ReluNet, t));
            net.jacobian_log_norm(x, u)
                .expect("dimensions checked above")
        })
        .collect();
    let x_bits: Vec<String> = x.iter().map(|c| format!("{:016x}", c.to_bits())).collect();
    let u_bits: Vec<String> = u
        .coords()
        .iter()
        .map(|c| format!("{:016x}", c.to_bits()))
        .collect();
    let description = format!(
        "{};x={};u={}",
        config.describe(),
        x_bits.join(","),
        u_bits.join(",")
    );
    Ok(SampleBatch::from_outcomes(
        outcomes,
        seed,
        fingerprint(&description),
    ))
}

/// Jacobian batch against a product batch with `p = 1/2`, both with `trials`
/// draws from `seed`, and their two-sample KS distance over finite samples.
pub fn compare_jacobian_vs_product(
    config: &ReluNetConfig,
    x: &[f64],
    u: &UnitVector,
    trials: usize,
    seed: u64,
) -> Result<JacobianComparison> {
    compare_jacobian_vs_product_at(config, x, u, trials, seed, 0.5)
}

/// As [`compare_jacobian_vs_product`] with mask probability `product_p` on the
/// product side; values other than 1/2 serve as a negative control.
pub fn compare_jacobian_vs_product_at(
    config: &ReluNetConfig,
    x: &[f64],
    u: &UnitVector,
    trials: usize,
    seed: u64,
    product_p: f64,
) -> Result<JacobianComparison> {
    const MIN_TRIALS: usize = 100;
    if trials < MIN_TRIALS {
        return Err(Error::InsufficientSamples {
            needed: MIN_TRIALS,
            available: trials,
        });
    }
    let jacobian = jacobian_batch(config, x, u, trials, seed)?;
    let product = run_trials(&product_config(config, product_p)?, u, trials, seed)?;
    let ks = two_sample_ks(&jacobian.samples, &product.samples)?;
    Ok(JacobianComparison {
        jacobian,
        product,
        ks,
    })
}
