//! The subcommands. Each builds one table and, where it has one, the outcome of
//! its `--assert` check.

use matprod_core::monte_carlo::fingerprint;
use matprod_core::path_moments::{brute_force_moment_with, exact_moment_with};
use matprod_core::relu::compare_jacobian_vs_product_at;
use matprod_core::{
    chi_square_product_sampler, compute_beta, empirical_moment, error_budget, evgp_beta,
    ks_to_gaussian, run_trials, summary, theory_moment, two_sample_ks, zero_event_probability,
    DistributionSpec, Error, PathBudget, ReluNetConfig, SampleBatch,
};

use crate::config::{CommandKind, ExperimentConfig, UsageError};
use crate::output::{Cell, Table};

#[derive(Debug)]
pub enum RunError {
    Usage(UsageError),
    Core(Error),
}

impl From<UsageError> for RunError {
    fn from(e: UsageError) -> Self {
        Self::Usage(e)
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        Self::Core(e)
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub table: Table,
    /// `None` when the command has nothing to check.
    pub passed: Option<bool>,
    pub fingerprint: String,
}

/// Brute-force moments are attempted only below this many transfer entries.
const BRUTE_FORCE_BUDGET: u128 = 10_000_000;

/// Relative agreement demanded between the exact and brute-force moments.
const ORACLE_TOLERANCE: f64 = 1e-10;

pub fn run(config: &ExperimentConfig) -> Result<Outcome, RunError> {
    let (table, passed) = match config.command {
        CommandKind::Beta => beta(config)?,
        CommandKind::Simulate => simulate(config)?,
        CommandKind::Moments => moments(config)?,
        CommandKind::KsTest => ks_test(config)?,
        CommandKind::Chi2Check => chi2_check(config)?,
        CommandKind::JacobianCompare => jacobian_compare(config)?,
    };
    Ok(Outcome {
        table,
        passed,
        fingerprint: fingerprint(&config.describe()),
    })
}

fn beta(config: &ExperimentConfig) -> Result<(Table, Option<bool>), RunError> {
    let ensemble = config.ensemble()?;
    let u = config.unit_vector()?;
    let b = compute_beta(&ensemble, &u)?;
    let budget = error_budget(&ensemble, &u)?;
    let zero = zero_event_probability(&ensemble);
    let mut table = Table::new(vec![
        "beta",
        "term_width",
        "term_fourth",
        "sum_inv_sq",
        "beta_inv_term",
        "fifth_root_term",
        "sqrt_term",
        "mask_term",
        "zero_event_probability",
    ]);
    table.push(vec![
        b.beta.into(),
        b.term_width.into(),
        b.term_fourth.into(),
        budget.sum_inv_sq.into(),
        budget.beta_inv_term.into(),
        budget.fifth_root_term.into(),
        budget.sqrt_term.into(),
        budget.mask_term.into(),
        zero.probability.into(),
    ]);
    Ok((table, None))
}

fn batch_stats(batch: &SampleBatch) -> (Cell, Cell) {
    match summary(&batch.samples) {
        Ok(s) => (s.mean.into(), s.variance.into()),
        Err(_) => (Cell::Empty, Cell::Empty),
    }
}

fn simulate(config: &ExperimentConfig) -> Result<(Table, Option<bool>), RunError> {
    let ensemble = config.ensemble()?;
    let u = config.unit_vector()?;
    let b = compute_beta(&ensemble, &u)?.beta;
    let batch = run_trials(&ensemble, &u, config.trials, config.seed)?;
    let mut columns = vec![
        "trials",
        "finite",
        "zero_events",
        "zero_event_rate",
        "mean",
        "variance",
        "skewness",
    ];
    columns.extend(["q01", "q05", "q25", "q50", "q75", "q95", "q99"]);
    columns.extend(["beta", "predicted_mean", "predicted_variance", "reason"]);
    let mut row: Vec<Cell> = vec![
        batch.trials.into(),
        batch.samples.len().into(),
        batch.zero_event_count.into(),
        batch.zero_event_rate().into(),
    ];
    match summary(&batch.samples) {
        Ok(s) => {
            row.extend([s.mean.into(), s.variance.into(), s.skewness.into()]);
            row.extend(s.quantiles.iter().map(|&(_, q)| Cell::Float(q)));
            row.extend([b.into(), (-b / 2.0).into(), b.into(), Cell::Empty]);
        }
        Err(e) => {
            row.extend(std::iter::repeat_n(Cell::Empty, 10));
            row.extend([b.into(), (-b / 2.0).into(), b.into(), e.to_string().into()]);
        }
    }
    let mut table = Table::new(columns);
    table.push(row);
    Ok((table, None))
}

fn moments(config: &ExperimentConfig) -> Result<(Table, Option<bool>), RunError> {
    let ensemble = config.ensemble()?;
    let u = config.unit_vector()?;
    let beta_params = compute_beta(&ensemble, &u)?;
    let b = beta_params.beta;
    let batch = run_trials(&ensemble, &u, config.trials, config.seed)?;
    let mut table = Table::new(vec![
        "k",
        "exact",
        "brute_force",
        "monte_carlo",
        "mc_stderr",
        "theory",
        "beta",
        "zero_event_rate",
        "reason",
    ]);
    let mut passed = true;
    for &k in &config.k {
        let mut reasons = Vec::new();
        let exact = match exact_moment_with(&ensemble, &u, k, &PathBudget::default()) {
            Ok(m) => {
                if !m.within_validity {
                    reasons.push(format!("k={k} violates binom(k,2) < min width"));
                }
                Some(m.value)
            }
            Err(e) => {
                reasons.push(format!("exact: {e}"));
                None
            }
        };
        let brute_budget = PathBudget {
            max_evaluations: BRUTE_FORCE_BUDGET,
            ..PathBudget::default()
        };
        let brute = match brute_force_moment_with(&ensemble, &u, k, &brute_budget) {
            Ok(m) => Some(m.value),
            Err(e) => {
                reasons.push(format!("brute_force: {e}"));
                None
            }
        };
        let mc = match empirical_moment(&batch, k) {
            Ok(m) => Some(m),
            Err(e) => {
                reasons.push(format!("monte_carlo: {e}"));
                None
            }
        };
        let theory = theory_moment(&beta_params, k);
        if let (Some(a), Some(c)) = (exact, brute) {
            passed &= (a - c).abs() <= ORACLE_TOLERANCE * a.abs().max(c.abs());
        }
        if let (Some(tol), Some(m)) = (config.tol, mc) {
            passed &= (m.estimate / theory - 1.0).abs() <= tol;
        }
        table.push(vec![
            k.into(),
            Cell::opt(exact),
            Cell::opt(brute),
            Cell::opt(mc.map(|m| m.estimate)),
            Cell::opt(mc.map(|m| m.stderr)),
            theory.into(),
            b.into(),
            batch.zero_event_rate().into(),
            reasons.join("; ").into(),
        ]);
    }
    Ok((table, Some(passed)))
}

fn ks_test(config: &ExperimentConfig) -> Result<(Table, Option<bool>), RunError> {
    let ensemble = config.ensemble()?;
    let u = config.unit_vector()?;
    let b = compute_beta(&ensemble, &u)?.beta;
    let batch = run_trials(&ensemble, &u, config.trials, config.seed)?;
    let ks = ks_to_gaussian(&batch, -b / 2.0, b)?;
    let (mean, variance) = batch_stats(&batch);
    let tol = config.tol.unwrap_or(ks.critical_5pct);
    let mut table = Table::new(vec![
        "trials",
        "finite",
        "zero_events",
        "beta",
        "reference_mean",
        "reference_variance",
        "ks_statistic",
        "critical_5pct",
        "mean",
        "variance",
    ]);
    table.push(vec![
        batch.trials.into(),
        batch.samples.len().into(),
        batch.zero_event_count.into(),
        b.into(),
        (-b / 2.0).into(),
        b.into(),
        ks.statistic.into(),
        ks.critical_5pct.into(),
        mean,
        variance,
    ]);
    Ok((table, Some(ks.statistic <= tol)))
}

fn chi2_check(config: &ExperimentConfig) -> Result<(Table, Option<bool>), RunError> {
    if config.p != 1.0 {
        return Err(UsageError {
            flag: "p".into(),
            message: "chi2-check needs p = 1".into(),
        }
        .into());
    }
    if config.dist != DistributionSpec::StandardGaussian {
        return Err(UsageError {
            flag: "dist".into(),
            message: "chi2-check needs gaussian entries".into(),
        }
        .into());
    }
    let ensemble = config.ensemble()?;
    let u = config.unit_vector()?;
    let product = run_trials(&ensemble, &u, config.trials, config.seed)?;
    let chi = chi_square_product_sampler(
        ensemble.architecture.layer_widths(),
        config.trials,
        config.seed,
    )?;
    let ks = two_sample_ks(&product.samples, &chi.samples)?;
    let tol = config.tol.unwrap_or(ks.critical_5pct);
    let (product_mean, product_variance) = batch_stats(&product);
    let (chi_mean, chi_variance) = batch_stats(&chi);
    let mut table = Table::new(vec![
        "trials",
        "product_finite",
        "chi_square_finite",
        "ks_statistic",
        "critical_5pct",
        "product_mean",
        "product_variance",
        "chi_square_mean",
        "chi_square_variance",
    ]);
    table.push(vec![
        config.trials.into(),
        product.samples.len().into(),
        chi.samples.len().into(),
        ks.statistic.into(),
        ks.critical_5pct.into(),
        product_mean,
        product_variance,
        chi_mean,
        chi_variance,
    ]);
    Ok((table, Some(ks.statistic <= tol)))
}

fn jacobian_compare(config: &ExperimentConfig) -> Result<(Table, Option<bool>), RunError> {
    let arch = config.ensemble()?.architecture;
    let bias = config
        .bias_dist
        .clone()
        .unwrap_or_else(|| config.dist.clone());
    let net =
        ReluNetConfig::new(arch, config.dist.clone(), bias, config.bias_scale).map_err(|e| {
            UsageError {
                flag: "dist".into(),
                message: e.to_string(),
            }
        })?;
    let u = config.unit_vector()?;
    let x = config.input()?;
    let beta = evgp_beta(&net, &u)?.beta;
    let cmp =
        compare_jacobian_vs_product_at(&net, &x, &u, config.trials, config.seed, config.product_p)?;
    let tol = config.tol.unwrap_or(cmp.ks.critical_5pct);
    let (jac_mean, jac_variance) = batch_stats(&cmp.jacobian);
    let (prod_mean, prod_variance) = batch_stats(&cmp.product);
    let mut table = Table::new(vec![
        "trials",
        "product_p",
        "beta",
        "jacobian_finite",
        "jacobian_zero_events",
        "product_finite",
        "product_zero_events",
        "ks_statistic",
        "critical_5pct",
        "jacobian_mean",
        "jacobian_variance",
        "product_mean",
        "product_variance",
    ]);
    table.push(vec![
        config.trials.into(),
        config.product_p.into(),
        beta.into(),
        cmp.jacobian.samples.len().into(),
        cmp.jacobian.zero_event_count.into(),
        cmp.product.samples.len().into(),
        cmp.product.zero_event_count.into(),
        cmp.ks.statistic.into(),
        cmp.ks.critical_5pct.into(),
        jac_mean,
        jac_variance,
        prod_mean,
        prod_variance,
    ]);
    Ok((table, Some(cmp.ks.statistic <= tol)))
}
