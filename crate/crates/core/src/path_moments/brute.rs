//! Oracles that never group paths by pattern.
//!
//! [`brute_force_moment`] expands `‖M u‖^{2k}` into ordered 2k-tuples of paths
//! and carries the expectation across layers with a transfer matrix on
//! `[n_i]^{2k}`. [`enumerate_discrete_moment`] averages `Z^k` over every
//! weight and mask assignment of a finitely supported law.

use num_rational::BigRational;

use super::exact::{
    check_request, float_inputs, rational_inputs, within_validity, ExactMoment, PathBudget,
};
use super::scalar::Scalar;
use crate::distribution::Atom;
use crate::error::{Error, Result};
use crate::model::{EnsembleConfig, UnitVector};

pub fn brute_force_moment(config: &EnsembleConfig, u: &UnitVector, k: u32) -> Result<ExactMoment> {
    brute_force_moment_with(config, u, k, &PathBudget::default())
}

/// Cost: `Σ_i n_{i-1}^{2k} n_i^{2k}` transfer-matrix entries.
pub fn brute_force_moment_with(
    config: &EnsembleConfig,
    u: &UnitVector,
    k: u32,
    budget: &PathBudget,
) -> Result<ExactMoment> {
    check_request(config, u, k, budget)?;
    let widths = config.architecture.widths();
    let len = 2 * k;
    let cost = widths
        .windows(2)
        .map(|w| (w[0] as f64).powi(len as i32) * (w[1] as f64).powi(len as i32))
        .sum::<f64>();
    if cost > budget.max_evaluations as f64 {
        return Err(Error::BudgetExceeded {
            estimate: cost.min(u128::MAX as f64) as u128,
            budget: budget.max_evaluations,
        });
    }
    let (value, rational) = match rational_inputs(config, u, len) {
        Some(inputs) => {
            // Only start tuples visiting every coordinate an even number of
            // times survive the expectation: flipping the sign of column `a`
            // of W_1 leaves the law unchanged and multiplies the other terms
            // by -1. Their weight is then a product of the exact squares.
            let init = tuples(widths[0], len as usize)
                .map(|x| {
                    let mut counts = vec![0usize; widths[0]];
                    x.iter().for_each(|&a| counts[a] += 1);
                    if counts.iter().any(|c| c % 2 == 1) {
                        return BigRational::from_integer(0.into());
                    }
                    counts
                        .iter()
                        .zip(&inputs.u_sq)
                        .fold(BigRational::from_integer(1.into()), |acc, (&c, w)| {
                            acc * w.powi(c as i32 / 2)
                        })
                })
                .collect();
            let exact = transfer(widths, k, &inputs.mu, &inputs.p, init);
            (Scalar::to_f64(&exact), Some(exact))
        }
        None => {
            let inputs = float_inputs(config, u, len);
            let init = tuples(widths[0], len as usize)
                .map(|x| x.iter().map(|&a| u.coords()[a]).product())
                .collect();
            (transfer(widths, k, &inputs.mu, &inputs.p, init), None)
        }
    };
    Ok(ExactMoment {
        k,
        value,
        rational,
        cost: cost as u128,
        within_validity: within_validity(config, k),
    })
}

fn tuples(n: usize, len: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..n.pow(len as u32)).map(move |mut code| {
        (0..len)
            .map(|_| {
                let a = code % n;
                code /= n;
                a
            })
            .collect()
    })
}

/// `Σ_y g_d(y)` over `y ∈ [n_d]^{2k}` with `y_{2j} = y_{2j+1}`, where
/// `g_i(y) = Σ_x g_{i-1}(x)·E[Π_l X_i(y_l, x_l)]`.
fn transfer<T: Scalar>(widths: &[usize], k: u32, mu: &[T], p: &T, init: Vec<T>) -> T {
    let len = 2 * k as usize;
    let mut carried = init;
    for w in widths.windows(2) {
        let (n_in, n_out) = (w[0], w[1]);
        let inputs: Vec<Vec<usize>> = tuples(n_in, len).collect();
        let outputs: Vec<Vec<usize>> = tuples(n_out, len).collect();
        // (p n)^{-1/2} per factor, and p for every open row that is used.
        let scale = (p.clone() * T::from_u128(n_out as u128)).powi(-(k as i32));
        let mask: Vec<T> = outputs
            .iter()
            .map(|y| {
                let mut seen = y.clone();
                seen.sort_unstable();
                seen.dedup();
                p.powi(seen.len() as i32) * scale.clone()
            })
            .collect();
        carried = outputs
            .iter()
            .zip(&mask)
            .map(|(y, mask)| {
                let terms = inputs
                    .iter()
                    .zip(&carried)
                    .filter(|(_, g)| !g.is_zero())
                    .map(|(x, g)| {
                        let mut edges: Vec<(usize, usize)> =
                            x.iter().copied().zip(y.iter().copied()).collect();
                        edges.sort_unstable();
                        let mut weight = T::one();
                        let mut run = 1;
                        for j in 1..=edges.len() {
                            if j < edges.len() && edges[j] == edges[j - 1] {
                                run += 1;
                            } else {
                                weight = weight * mu[run].clone();
                                run = 1;
                            }
                        }
                        weight * g.clone()
                    });
                T::sum_all(terms) * mask.clone()
            })
            .collect();
    }
    let n_d = *widths.last().unwrap();
    T::sum_all(
        tuples(n_d, len)
            .zip(carried)
            .filter(|(y, _)| y.chunks(2).all(|pair| pair[0] == pair[1]))
            .map(|(_, g)| g),
    )
}

/// Total configurations one enumeration visits: atoms per weight entry and
/// two mask states per row when `p < 1`.
const ENUMERATION_LIMIT: f64 = (1u64 << 24) as f64;

/// `E[Z^k]` by summing over all weight and mask assignments of a finitely
/// supported law; no path expansion at all.
pub fn enumerate_discrete_moment(config: &EnsembleConfig, u: &UnitVector, k: u32) -> Result<f64> {
    let Some(atoms) = config.entry_law.atoms() else {
        return Err(Error::InvalidParameter(format!(
            "{} has no finite support to enumerate",
            config.entry_law
        )));
    };
    check_request(
        config,
        u,
        k,
        &PathBudget {
            max_k: u32::MAX,
            ..PathBudget::default()
        },
    )?;
    let widths = config.architecture.widths();
    let masks = if config.p < 1.0 { 2.0 } else { 1.0 };
    let states: f64 = widths
        .windows(2)
        .map(|w| (atoms.len() as f64).powi((w[0] * w[1]) as i32) * masks.powi(w[1] as i32))
        .product();
    if states > ENUMERATION_LIMIT {
        return Err(Error::BudgetExceeded {
            estimate: states.min(u128::MAX as f64) as u128,
            budget: ENUMERATION_LIMIT as u128,
        });
    }
    let normalization: f64 = widths[1..].iter().map(|&n| config.p * n as f64).product();
    let mut terms = Vec::new();
    descend(
        widths,
        &atoms,
        config.p,
        u.coords().to_vec(),
        1.0,
        &mut |prob, v| {
            let z = v.iter().map(|c| c * c).sum::<f64>() / normalization;
            terms.push(prob * z.powi(k as i32));
        },
    );
    Ok(f64::sum_all(terms))
}

/// Calls `leaf` with the probability and unscaled output of every joint
/// assignment of the remaining layers.
fn descend(
    widths: &[usize],
    atoms: &[Atom],
    p: f64,
    v: Vec<f64>,
    prob: f64,
    leaf: &mut dyn FnMut(f64, &[f64]),
) {
    if widths.len() < 2 {
        leaf(prob, &v);
        return;
    }
    // Each row independently: closed, or open with one atom per entry.
    let mut options: Vec<(f64, f64)> = Vec::new();
    if p < 1.0 {
        options.push((1.0 - p, 0.0));
    }
    let n_in = v.len();
    for code in 0..atoms.len().pow(n_in as u32) {
        let mut c = code;
        let mut q = p;
        let mut dot = 0.0;
        for &x in &v {
            let atom = &atoms[c % atoms.len()];
            c /= atoms.len();
            q *= atom.probability;
            dot += atom.value * x;
        }
        options.push((q, dot));
    }
    let n_out = widths[1];
    let mut choice = vec![0usize; n_out];
    loop {
        let row_prob: f64 = choice.iter().map(|&c| options[c].0).product();
        let next: Vec<f64> = choice.iter().map(|&c| options[c].1).collect();
        descend(&widths[1..], atoms, p, next, prob * row_prob, leaf);
        let mut j = 0;
        while j < n_out {
            choice[j] += 1;
            if choice[j] < options.len() {
                break;
            }
            choice[j] = 0;
            j += 1;
        }
        if j == n_out {
            return;
        }
    }
}
