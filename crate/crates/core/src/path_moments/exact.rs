//! `E[Z^k]` as a sum over ordered k-tuples of paths, contracted layer by layer
//! over coincidence patterns.
//!
//! The factor `C(V(i-1), V(i))` only sees the set partitions of the coordinates
//! `{0..k}` induced by equal entries of the two tuples, and is unchanged when
//! the coordinates of both are permuted together. So the sum over `V(i)` is a
//! sum over partitions `π`, each standing for `(n_i)_{|π|}` tuples, and the
//! partial sums carried between layers depend only on the block-size shape of
//! the current partition.
//!
//! The input layer is weighted by `u²_{V(0)} = Π_j u²_{V(0)_j}`. Its sum over
//! the tuples with a given pattern is recovered from the power sums
//! `P_s = Σ_a u_a^{2s}` by Möbius inversion on the partition lattice.
//!
//! Cost model, counted in elementary multiply-adds:
//! `Bell(k)·shapes(k)·(d + 1)` for the factor table and the contraction, plus
//! `Σ_shapes Bell(#blocks)` for the inversion and `k·n_0` for the power sums.

use num_rational::BigRational;

use super::combinatorics::pair_factor;
use super::partitions::{block_count, set_partitions, ShapeClasses};
use super::scalar::{Inputs, Scalar};
use crate::error::{Error, Result};
use crate::model::{BetaParams, EnsembleConfig, UnitVector};

/// Limits checked before any evaluation starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathBudget {
    pub max_evaluations: u128,
    pub max_k: u32,
}

impl Default for PathBudget {
    fn default() -> Self {
        Self {
            max_evaluations: 100_000_000,
            max_k: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactMoment {
    pub k: u32,
    pub value: f64,
    /// The same value as an exact fraction, when every input is rational.
    pub rational: Option<BigRational>,
    /// Evaluations charged against the budget.
    pub cost: u128,
    /// `binom(k, 2) < min_i n_i` over the layer widths, the regime where the
    /// log-normal prediction is meant to hold. The value itself is exact
    /// regardless.
    pub within_validity: bool,
}

/// The log-normal prediction `exp(binom(k, 2)·β)`.
pub fn theory_moment(beta: &BetaParams, k: u32) -> f64 {
    let pairs = f64::from(k) * (f64::from(k) - 1.0) / 2.0;
    (pairs * beta.beta).exp()
}

pub fn exact_moment(config: &EnsembleConfig, u: &UnitVector, k: u32) -> Result<ExactMoment> {
    exact_moment_with(config, u, k, &PathBudget::default())
}

pub fn exact_moment_with(
    config: &EnsembleConfig,
    u: &UnitVector,
    k: u32,
    budget: &PathBudget,
) -> Result<ExactMoment> {
    check_request(config, u, k, budget)?;
    let widths = config.architecture.widths();
    let ku = k as usize;
    let cost = contraction_cost(ku, widths);
    if cost > budget.max_evaluations {
        return Err(Error::BudgetExceeded {
            estimate: cost,
            budget: budget.max_evaluations,
        });
    }
    let within_validity = within_validity(config, k);
    if !within_validity {
        log::warn!("k = {k} violates binom(k, 2) < min width; the moment is exact but outside the log-normal regime");
    }

    let classes = ShapeClasses::new(ku);
    let (value, rational) = match rational_inputs(config, u, 2 * k) {
        Some(inputs) => {
            let exact = contract(&classes, widths, &inputs);
            (Scalar::to_f64(&exact), Some(exact))
        }
        None => (
            contract(&classes, widths, &float_inputs(config, u, 2 * k)),
            None,
        ),
    };
    Ok(ExactMoment {
        k,
        value,
        rational,
        cost,
        within_validity,
    })
}

pub(crate) fn check_request(
    config: &EnsembleConfig,
    u: &UnitVector,
    k: u32,
    budget: &PathBudget,
) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidParameter(
            "moment order k must be at least 1".into(),
        ));
    }
    if k > budget.max_k {
        return Err(Error::InvalidParameter(format!(
            "moment order {k} exceeds the cap {}",
            budget.max_k
        )));
    }
    let n0 = config.architecture.input_width();
    if u.dim() != n0 {
        return Err(Error::DimensionMismatch {
            expected: n0,
            found: u.dim(),
        });
    }
    Ok(())
}

pub(crate) fn within_validity(config: &EnsembleConfig, k: u32) -> bool {
    let pairs = (k as usize) * (k as usize - 1) / 2;
    config
        .architecture
        .layer_widths()
        .iter()
        .all(|&n| pairs < n)
}

fn bell(k: usize) -> u128 {
    let mut row = vec![1u128];
    for _ in 0..k {
        let mut next = vec![*row.last().unwrap()];
        for &v in &row {
            next.push(next.last().unwrap() + v);
        }
        row = next;
    }
    row[0]
}

fn integer_partition_count(k: usize) -> u128 {
    let mut ways = vec![0u128; k + 1];
    ways[0] = 1;
    for part in 1..=k {
        for total in part..=k {
            ways[total] += ways[total - part];
        }
    }
    ways[k]
}

fn contraction_cost(k: usize, widths: &[usize]) -> u128 {
    let d = widths.len() as u128 - 1;
    let shapes = integer_partition_count(k);
    let inversion: u128 = (1..=k).map(bell).sum::<u128>() * shapes;
    bell(k) * shapes * (d + 1) + inversion + (k * widths[0]) as u128
}

/// Moments, `p` and `u²` as exact fractions, if the law has rational moments.
pub(crate) fn rational_inputs(
    config: &EnsembleConfig,
    u: &UnitVector,
    max_moment: u32,
) -> Option<Inputs<BigRational>> {
    let mu = (0..=max_moment)
        .map(|j| config.entry_law.exact_moment(j))
        .collect::<Option<Vec<_>>>()?;
    let p = BigRational::from_float(config.p)?;
    let u_sq = match u.exact_squares() {
        Some(sq) => sq.to_vec(),
        None => u
            .coords()
            .iter()
            .map(|&c| BigRational::from_float(c).map(|r| &r * &r))
            .collect::<Option<Vec<_>>>()?,
    };
    Some(Inputs { mu, p, u_sq })
}

pub(crate) fn float_inputs(
    config: &EnsembleConfig,
    u: &UnitVector,
    max_moment: u32,
) -> Inputs<f64> {
    Inputs {
        mu: (0..=max_moment)
            .map(|j| config.entry_law.moment(j))
            .collect(),
        p: config.p,
        u_sq: u.coords().iter().map(|c| c * c).collect(),
    }
}

fn falling<T: Scalar>(n: usize, j: usize) -> T {
    if j > n {
        return T::zero();
    }
    (0..j).fold(T::one(), |acc, t| acc * T::from_u128((n - t) as u128))
}

/// `Σ_{x : pattern(x) = π} Π_j u²_{x_j}` for one partition of each shape.
fn input_pattern_sums<T: Scalar>(classes: &ShapeClasses, u_sq: &[T]) -> Vec<T> {
    let k = classes.partitions.first().map_or(0, Vec::len);
    let power_sums: Vec<T> = (0..=k)
        .map(|s| T::sum_all(u_sq.iter().map(|w| w.powi(s as i32))))
        .collect();
    let mut coarsenings = Vec::with_capacity(k + 1);
    for r in 0..=k {
        coarsenings.push(set_partitions(r));
    }
    classes
        .shapes
        .iter()
        .map(|sizes| {
            // Sum over partitions σ of the blocks: μ(π, σ) Π_{C ∈ σ} P_{|C|}.
            T::sum_all(coarsenings[sizes.len()].iter().map(|sigma| {
                let groups = block_count(sigma);
                let mut merged_size = vec![0usize; groups];
                let mut merged_count = vec![0usize; groups];
                for (block, &g) in sigma.iter().enumerate() {
                    merged_size[g as usize] += sizes[block];
                    merged_count[g as usize] += 1;
                }
                let mut term = T::one();
                let mut negative = false;
                for (&size, &count) in merged_size.iter().zip(&merged_count) {
                    let fact: u128 = (1..count as u128).product();
                    term = term * T::from_u128(fact) * power_sums[size].clone();
                    negative ^= count % 2 == 0;
                }
                if negative {
                    T::zero() - term
                } else {
                    term
                }
            }))
        })
        .collect()
}

fn contract<T: Scalar>(classes: &ShapeClasses, widths: &[usize], inputs: &Inputs<T>) -> T {
    let k = classes.partitions[0].len();
    let shapes = classes.shapes.len();
    let table: Vec<Vec<T>> = classes
        .partitions
        .iter()
        .map(|pi| {
            classes
                .representative
                .iter()
                .map(|&rep| pair_factor(pi, &classes.partitions[rep], &inputs.mu, &inputs.p))
                .collect()
        })
        .collect();
    let blocks: Vec<usize> = classes
        .partitions
        .iter()
        .map(|pi| block_count(pi))
        .collect();

    let mut carried = input_pattern_sums(classes, &inputs.u_sq);
    for (i, &n_out) in widths.iter().enumerate().skip(1) {
        let n_in = widths[i - 1];
        // The input layer's pattern sums already count tuples.
        let weights: Vec<T> = (0..classes.partitions.len())
            .map(|pi| {
                let f = carried[classes.shape_of[pi]].clone();
                if i == 1 {
                    f
                } else {
                    f * falling::<T>(n_in, blocks[pi])
                }
            })
            .collect();
        let scale = T::from_u128(n_out as u128).powi(-(k as i32));
        carried = (0..shapes)
            .map(|tau| {
                T::sum_all(
                    weights
                        .iter()
                        .zip(&table)
                        .map(|(w, row)| w.clone() * row[tau].clone()),
                ) * scale.clone()
            })
            .collect();
    }
    let n_d = *widths.last().unwrap();
    T::sum_all((0..shapes).map(|tau| {
        let rep = classes.representative[tau];
        carried[tau].clone()
            * T::from_u128(classes.multiplicity[tau])
            * falling::<T>(n_d, blocks[rep])
    }))
}
