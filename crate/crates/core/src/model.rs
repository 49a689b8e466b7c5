//! The matrix ensemble, layer-by-layer propagation, and the closed-form
//! parameters of the log-normal approximation.
//!
//! A sample of `ln Z = ln((n_0/n_d)‖M u‖²)` is never computed from the product
//! matrix. Instead the vector is pushed through one layer at a time,
//! `u_i = (p n_i)^{-1/2} D_i W_i u_{i-1}`, keeping a unit direction and the
//! running sum of `ln‖u_i‖² - ln‖u_{i-1}‖²`. This keeps every intermediate
//! quantity of order one no matter how deep the product is.

use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;

use crate::distribution::DistributionSpec;
use crate::error::{Error, Result};

const UNIT_TOL: f64 = 1e-12;

/// Layer widths `n_0, …, n_d`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    widths: Vec<usize>,
}

impl Architecture {
    pub fn new(widths: Vec<usize>) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::InvalidArchitecture(format!(
                "need at least an input and one layer, got {} widths",
                widths.len()
            )));
        }
        if let Some(pos) = widths.iter().position(|&n| n == 0) {
            return Err(Error::InvalidArchitecture(format!("width n_{pos} is zero")));
        }
        Ok(Self { widths })
    }

    /// Input width `n_0` followed by `depth` layers of width `width`.
    pub fn constant(input: usize, width: usize, depth: usize) -> Result<Self> {
        let mut widths = vec![input];
        widths.extend(std::iter::repeat_n(width, depth));
        Self::new(widths)
    }

    pub fn depth(&self) -> usize {
        self.widths.len() - 1
    }

    /// All widths `n_0..=n_d`.
    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    /// Widths `n_1..=n_d`.
    pub fn layer_widths(&self) -> &[usize] {
        &self.widths[1..]
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        self.widths[self.widths.len() - 1]
    }
}

/// Architecture, mask probability and entry law of the ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub architecture: Architecture,
    pub p: f64,
    pub entry_law: DistributionSpec,
}

impl EnsembleConfig {
    pub fn new(architecture: Architecture, p: f64, entry_law: DistributionSpec) -> Result<Self> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::InvalidParameter(format!("p = {p} is not in (0, 1]")));
        }
        let entry_law = entry_law.validate()?;
        Ok(Self {
            architecture,
            p,
            entry_law,
        })
    }

    /// Whether the entry law has no atoms. Zero-event probabilities are exact
    /// only in that case.
    pub fn atomless(&self) -> bool {
        self.entry_law.is_atomless()
    }

    /// A canonical, human-readable description used for fingerprints.
    pub fn describe(&self) -> String {
        let widths: Vec<String> = self
            .architecture
            .widths
            .iter()
            .map(|n| n.to_string())
            .collect();
        format!(
            "widths={};p={:e};law={}",
            widths.join(","),
            self.p,
            self.entry_law
        )
    }
}

/// The starting vector `u` with `‖u‖_2 = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitVector {
    coords: Vec<f64>,
    l2: f64,
    l4_4: f64,
    exact_squares: Option<Vec<BigRational>>,
}

impl UnitVector {
    /// Accepts `coords` if its Euclidean norm is one to within `1e-12`.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        let l2 = l2_norm(&coords);
        if coords.is_empty() || (l2 - 1.0).abs() > UNIT_TOL {
            return Err(Error::InvalidParameter(format!(
                "vector of dimension {} has norm {l2}, expected 1",
                coords.len()
            )));
        }
        Ok(Self::from_unit(coords, None))
    }

    /// Scales `coords` to unit length.
    pub fn normalized(mut coords: Vec<f64>) -> Result<Self> {
        let l2 = l2_norm(&coords);
        if !(l2 > 0.0 && l2.is_finite()) {
            return Err(Error::InvalidParameter(
                "cannot normalize a zero vector".into(),
            ));
        }
        coords.iter_mut().for_each(|c| *c /= l2);
        Ok(Self::from_unit(coords, None))
    }

    /// The standard basis vector `e_j` (zero-based `j`) in dimension `n`.
    pub fn basis(n: usize, j: usize) -> Result<Self> {
        if j >= n {
            return Err(Error::InvalidParameter(format!(
                "e_{j} does not exist in dimension {n}"
            )));
        }
        let mut coords = vec![0.0; n];
        coords[j] = 1.0;
        let squares = (0..n)
            .map(|i| {
                if i == j {
                    BigRational::one()
                } else {
                    BigRational::zero()
                }
            })
            .collect();
        Ok(Self::from_unit(coords, Some(squares)))
    }

    /// `(1, …, 1)/√n`.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        let c = (n as f64).sqrt().recip();
        let square = BigRational::new(1.into(), (n as i64).into());
        Ok(Self::from_unit(vec![c; n], Some(vec![square; n])))
    }

    fn from_unit(coords: Vec<f64>, exact_squares: Option<Vec<BigRational>>) -> Self {
        let l2 = l2_norm(&coords);
        let l4_4 = coords.iter().map(|c| c.powi(4)).sum();
        Self {
            coords,
            l2,
            l4_4,
            exact_squares,
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2
    }

    /// `‖u‖_4^4`.
    pub fn l4_norm_pow4(&self) -> f64 {
        self.l4_4
    }

    /// Exact values of `u_a²` when known (basis and uniform vectors).
    pub fn exact_squares(&self) -> Option<&[BigRational]> {
        self.exact_squares.as_deref()
    }
}

fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// `β = term_width + term_fourth`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaParams {
    pub beta: f64,
    /// `(3/p - 1) Σ_{i≥1} 1/n_i`.
    pub term_width: f64,
    /// `(μ_4 - 3)/(p n_1) ‖u‖_4^4`.
    pub term_fourth: f64,
}

pub fn compute_beta(config: &EnsembleConfig, u: &UnitVector) -> Result<BetaParams> {
    let arch = &config.architecture;
    if u.dim() != arch.input_width() {
        return Err(Error::DimensionMismatch {
            expected: arch.input_width(),
            found: u.dim(),
        });
    }
    let p = config.p;
    let inv_sum: f64 = arch.layer_widths().iter().map(|&n| 1.0 / n as f64).sum();
    let term_width = (3.0 / p - 1.0) * inv_sum;
    let n1 = arch.layer_widths()[0] as f64;
    let term_fourth = (config.entry_law.fourth_moment() - 3.0) / (p * n1) * u.l4_norm_pow4();
    Ok(BetaParams {
        beta: term_width + term_fourth,
        term_width,
        term_fourth,
    })
}

/// Outcome of one draw of `ln Z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LogNorm {
    Value(f64),
    /// Some layer annihilated the vector; `ln Z` is undefined.
    Zero,
}

impl LogNorm {
    pub fn value(self) -> Option<f64> {
        match self {
            Self::Value(v) => Some(v),
            Self::Zero => None,
        }
    }
}

/// Normalized direction after `layer` layers plus the accumulated log-norm.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerState {
    pub direction: Vec<f64>,
    /// `ln‖u_i‖²`, zero at the input.
    pub log_norm: f64,
    pub layer: usize,
    pub zero: bool,
}

impl LayerState {
    pub fn initial(u: &UnitVector) -> Self {
        Self {
            direction: u.coords().to_vec(),
            log_norm: 0.0,
            layer: 0,
            zero: false,
        }
    }
}

/// Pushes `state` through the next layer.
///
/// Draw order is fixed: the `n_i` mask bits first (skipped when `p = 1`),
/// then, row by row, the entries of every open row. Entries of closed rows are
/// never drawn, since they cannot affect the result.
///
/// # Panics
///
/// If `state` already hit a zero event or has passed the last layer.
pub fn propagate_layer<R: Rng + ?Sized>(
    state: LayerState,
    config: &EnsembleConfig,
    rng: &mut R,
) -> LayerState {
    assert!(!state.zero, "cannot propagate a state after a zero event");
    let widths = config.architecture.widths();
    let layer = state.layer + 1;
    assert!(
        layer < widths.len(),
        "layer {layer} exceeds depth {}",
        widths.len() - 1
    );
    assert_eq!(state.direction.len(), widths[layer - 1]);

    let n_out = widths[layer];
    let p = config.p;
    let mask: Vec<bool> = if p < 1.0 {
        (0..n_out).map(|_| rng.random::<f64>() < p).collect()
    } else {
        vec![true; n_out]
    };

    // The scale (p n_i)^{-1/2} is applied to the squared norm once, so that
    // e.g. a Rademacher layer fed a basis vector gives exactly ln 1 = 0.
    let mut next = vec![0.0; n_out];
    let mut raw_sq = 0.0;
    for (slot, open) in next.iter_mut().zip(&mask) {
        if *open {
            let v = config.entry_law.sample_dot(&state.direction, rng);
            *slot = v;
            raw_sq += v * v;
        }
    }

    if raw_sq == 0.0 {
        return LayerState {
            direction: next,
            log_norm: state.log_norm,
            layer,
            zero: true,
        };
    }
    let inv = raw_sq.sqrt().recip();
    next.iter_mut().for_each(|v| *v *= inv);
    let norm_sq = raw_sq / (p * n_out as f64);
    LayerState {
        direction: next,
        log_norm: state.log_norm + norm_sq.ln(),
        layer,
        zero: false,
    }
}

/// One draw of `ln((n_0/n_d)‖M u‖²)`.
pub fn sample_log_norm<R: Rng + ?Sized>(
    config: &EnsembleConfig,
    u: &UnitVector,
    rng: &mut R,
) -> LogNorm {
    debug_assert_eq!(u.dim(), config.architecture.input_width());
    let mut state = LayerState::initial(u);
    for _ in 0..config.architecture.depth() {
        state = propagate_layer(state, config, rng);
        if state.zero {
            return LogNorm::Zero;
        }
    }
    LogNorm::Value(state.log_norm)
}

/// Predicted `Var(‖(p n)^{-1/2} D W û‖²)` for a fixed direction `û`.
pub fn predict_layer_variance(u_current: &[f64], n_next: usize, p: f64, mu4: f64) -> f64 {
    let l2_sq: f64 = u_current.iter().map(|c| c * c).sum();
    let l4_4: f64 = u_current.iter().map(|c| c.powi(4)).sum();
    let n = n_next as f64;
    (3.0 / p - 1.0) / n + (mu4 - 3.0) / (p * n) * l4_4 / (l2_sq * l2_sq)
}

/// Probability that some mask is entirely zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroEventProbability {
    pub probability: f64,
    /// False for atom-bearing laws, where `probability` is only a lower bound.
    pub exact: bool,
}

/// `1 - Π_j (1 - (1-p)^{n_j})`.
pub fn zero_event_probability(config: &EnsembleConfig) -> ZeroEventProbability {
    let q = 1.0 - config.p;
    let survive: f64 = config
        .architecture
        .layer_widths()
        .iter()
        .map(|&n| 1.0 - q.powi(n as i32))
        .product();
    ZeroEventProbability {
        probability: 1.0 - survive,
        exact: config.atomless(),
    }
}

/// Raw magnitudes of the terms bounding the Kolmogorov–Smirnov distance to
/// `N(-β/2, β)`. The unknown absolute constants are not applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBudget {
    pub beta: f64,
    /// `Σ n_i^{-2}`.
    pub sum_inv_sq: f64,
    /// `β^{-1} Σ n_i^{-2}`.
    pub beta_inv_term: f64,
    /// `(β^{-2} Σ n_i^{-2})^{1/5}`.
    pub fifth_root_term: f64,
    /// `(β^{-1/2} Σ n_i^{-2})^{1/2}`.
    pub sqrt_term: f64,
    /// `Σ (1-p)^{n_i}`.
    pub mask_term: f64,
}

/// The β-dependent terms are `+∞` when `β ≤ 0`.
pub fn error_budget(config: &EnsembleConfig, u: &UnitVector) -> Result<ErrorBudget> {
    let beta = compute_beta(config, u)?.beta;
    let layers = config.architecture.layer_widths();
    let sum_inv_sq: f64 = layers.iter().map(|&n| (n as f64).powi(-2)).sum();
    let q = 1.0 - config.p;
    let mask_term = layers.iter().map(|&n| q.powi(n as i32)).sum();
    let (beta_inv_term, fifth_root_term, sqrt_term) = if beta > 0.0 {
        (
            sum_inv_sq / beta,
            (sum_inv_sq / (beta * beta)).powf(0.2),
            (sum_inv_sq / beta.sqrt()).sqrt(),
        )
    } else {
        (f64::INFINITY, f64::INFINITY, f64::INFINITY)
    };
    Ok(ErrorBudget {
        beta,
        sum_inv_sq,
        beta_inv_term,
        fifth_root_term,
        sqrt_term,
        mask_term,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{trial_rng, Domain};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn config(widths: &[usize], p: f64, law: DistributionSpec) -> EnsembleConfig {
        EnsembleConfig::new(Architecture::new(widths.to_vec()).unwrap(), p, law).unwrap()
    }

    #[test]
    fn beta_gaussian_full_mask_is_twice_inverse_width_sum() {
        let cfg = config(&[5, 3, 7, 11], 1.0, DistributionSpec::StandardGaussian);
        let u = UnitVector::normalized(vec![1.0, -2.0, 0.5, 3.0, 1.0]).unwrap();
        let b = compute_beta(&cfg, &u).unwrap();
        let expected = 2.0 * (1.0 / 3.0 + 1.0 / 7.0 + 1.0 / 11.0);
        assert!((b.beta - expected).abs() < 1e-15);
        assert_eq!(b.term_fourth, 0.0);
    }

    #[test]
    fn beta_rademacher_cancels() {
        let cfg = config(&[2, 2], 1.0, DistributionSpec::Rademacher);
        let b = compute_beta(&cfg, &UnitVector::basis(2, 0).unwrap()).unwrap();
        assert_eq!(b.beta, 0.0);
        assert_eq!(b.term_width, 1.0);
        assert_eq!(b.term_fourth, -1.0);
    }

    #[test]
    fn beta_half_mask_constant_width() {
        let arch = Architecture::constant(64, 64, 16).unwrap();
        let cfg = EnsembleConfig::new(arch, 0.5, DistributionSpec::StandardGaussian).unwrap();
        let b = compute_beta(&cfg, &UnitVector::uniform(64).unwrap()).unwrap();
        assert!((b.beta - 1.25).abs() < 1e-15);
    }

    #[test]
    fn beta_rejects_wrong_dimension() {
        let cfg = config(&[3, 2], 1.0, DistributionSpec::StandardGaussian);
        let err = compute_beta(&cfg, &UnitVector::uniform(2).unwrap()).unwrap_err();
        assert_eq!(
            err,
            Error::DimensionMismatch {
                expected: 3,
                found: 2
            }
        );
    }

    #[test]
    fn invalid_configs() {
        assert!(Architecture::new(vec![3]).is_err());
        assert!(Architecture::new(vec![3, 0, 2]).is_err());
        let arch = Architecture::new(vec![2, 2]).unwrap();
        assert!(EnsembleConfig::new(arch.clone(), 0.0, DistributionSpec::Rademacher).is_err());
        assert!(EnsembleConfig::new(arch, 1.5, DistributionSpec::Rademacher).is_err());
        assert!(UnitVector::new(vec![1.0, 1.0]).is_err());
        assert!(UnitVector::normalized(vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn rademacher_single_output_is_deterministic() {
        let cfg = config(&[4, 1], 1.0, DistributionSpec::Rademacher);
        let u = UnitVector::basis(4, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            assert_eq!(sample_log_norm(&cfg, &u, &mut rng), LogNorm::Value(0.0));
        }
        let state = propagate_layer(LayerState::initial(&u), &cfg, &mut rng);
        assert_eq!(state.log_norm, 0.0);
        assert_eq!(state.layer, 1);

        let wide = config(&[2, 2, 2], 1.0, DistributionSpec::Rademacher);
        let e1 = UnitVector::basis(2, 0).unwrap();
        let first = propagate_layer(LayerState::initial(&e1), &wide, &mut rng);
        assert_eq!(first.log_norm, 0.0);
    }

    #[test]
    fn closed_masks_give_zero_event() {
        // With p tiny every mask bit is zero for this seed.
        let cfg = config(&[3, 2, 2], 1e-12, DistributionSpec::StandardGaussian);
        let u = UnitVector::uniform(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(sample_log_norm(&cfg, &u, &mut rng), LogNorm::Zero);
        let state = propagate_layer(LayerState::initial(&u), &cfg, &mut rng);
        assert!(state.zero);
    }

    #[test]
    fn predicted_variance_examples() {
        let u = [0.6, 0.8];
        assert!((predict_layer_variance(&u, 10, 1.0, 3.0) - 0.2).abs() < 1e-15);
        assert!((predict_layer_variance(&[1.0, 0.0], 10, 1.0, 1.0)).abs() < 1e-15);
        assert!((predict_layer_variance(&u, 10, 0.5, 3.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_event_probability_examples() {
        let p1 = config(&[2, 3, 3], 1.0, DistributionSpec::StandardGaussian);
        assert_eq!(zero_event_probability(&p1).probability, 0.0);
        let single = config(&[2, 3], 0.5, DistributionSpec::StandardGaussian);
        assert!((zero_event_probability(&single).probability - 0.125).abs() < 1e-15);
        let four = config(&[2, 3, 3, 3, 3], 0.5, DistributionSpec::StandardGaussian);
        let z = zero_event_probability(&four);
        assert!((z.probability - 0.413_818_359_375).abs() < 1e-15);
        assert!(z.exact);
        let atoms = config(&[2, 3], 0.5, DistributionSpec::Rademacher);
        assert!(!zero_event_probability(&atoms).exact);
    }

    #[test]
    fn error_budget_terms() {
        let arch = Architecture::constant(64, 64, 16).unwrap();
        let cfg = EnsembleConfig::new(arch, 1.0, DistributionSpec::StandardGaussian).unwrap();
        let b = error_budget(&cfg, &UnitVector::basis(64, 0).unwrap()).unwrap();
        assert_eq!(b.sum_inv_sq, 0.00390625);
        assert_eq!(b.beta, 0.5);
        assert_eq!(b.beta_inv_term, 0.0078125);
        assert!((b.fifth_root_term - 0.015625f64.powf(0.2)).abs() < 1e-15);
        assert_eq!(b.mask_term, 0.0);

        let degenerate = config(&[2, 2], 1.0, DistributionSpec::Rademacher);
        let b = error_budget(&degenerate, &UnitVector::basis(2, 0).unwrap()).unwrap();
        assert!(b.beta_inv_term.is_infinite());
        assert!(b.fifth_root_term.is_infinite());
        assert!(b.sqrt_term.is_infinite());
    }

    /// Replays the draw order of `propagate_layer` to build each `X_i`.
    fn draw_product(config: &EnsembleConfig, rng: &mut impl Rng) -> Vec<Vec<Vec<f64>>> {
        let widths = config.architecture.widths();
        let p = config.p;
        (1..widths.len())
            .map(|i| {
                let (n_in, n_out) = (widths[i - 1], widths[i]);
                let mask: Vec<bool> = if p < 1.0 {
                    (0..n_out).map(|_| rng.random::<f64>() < p).collect()
                } else {
                    vec![true; n_out]
                };
                let scale = (p * n_in as f64).sqrt().recip();
                mask.iter()
                    .map(|&open| {
                        if open {
                            (0..n_in)
                                .map(|_| scale * config.entry_law.sample(rng))
                                .collect()
                        } else {
                            vec![0.0; n_in]
                        }
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn accumulator_matches_unnormalized_product() {
        let laws = [
            DistributionSpec::StandardGaussian,
            DistributionSpec::UniformSymmetric,
            DistributionSpec::Rademacher,
        ];
        let mut checked = 0;
        for trial in 0..300u64 {
            let mut meta = ChaCha8Rng::seed_from_u64(trial);
            let d = meta.random_range(1..=4);
            let widths: Vec<usize> = (0..=d).map(|_| meta.random_range(1..=8)).collect();
            let p = if meta.random::<bool>() { 1.0 } else { 0.5 };
            let law = laws[trial as usize % laws.len()].clone();
            let cfg = config(&widths, p, law);
            let coords: Vec<f64> = (0..widths[0])
                .map(|_| meta.random_range(-1.0..1.0))
                .collect();
            let Ok(u) = UnitVector::normalized(coords) else {
                continue;
            };

            let rng = trial_rng(trial, Domain::Product, 0);
            let sampled = sample_log_norm(&cfg, &u, &mut rng.clone());
            let mats = draw_product(&cfg, &mut rng.clone());
            let mut v = u.coords().to_vec();
            for m in &mats {
                v = m
                    .iter()
                    .map(|row| row.iter().zip(&v).map(|(a, b)| a * b).sum())
                    .collect();
            }
            let norm_sq: f64 = v.iter().map(|x| x * x).sum();
            match sampled {
                LogNorm::Value(l) => {
                    let direct = (widths[0] as f64 / widths[d] as f64 * norm_sq).ln();
                    assert!((l - direct).abs() < 1e-8, "{l} vs {direct} for {widths:?}");
                    checked += 1;
                }
                LogNorm::Zero => assert!(norm_sq < 1e-20),
            }
        }
        assert!(checked > 200);
    }

    #[test]
    fn per_layer_variance_matches_prediction() {
        let cases = [
            (DistributionSpec::StandardGaussian, 1.0, 10),
            (DistributionSpec::StandardGaussian, 0.5, 10),
            (DistributionSpec::UniformSymmetric, 0.5, 6),
            (DistributionSpec::Rademacher, 1.0, 4),
        ];
        let u = UnitVector::normalized(vec![3.0, -1.0, 0.5, 2.0]).unwrap();
        for (law, p, n) in cases {
            let mu4 = law.fourth_moment();
            let cfg = config(&[4, n], p, law);
            let trials = 100_000;
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            let mut sum_4 = 0.0;
            for t in 0..trials {
                let mut rng = trial_rng(99, Domain::Product, t);
                let state = propagate_layer(LayerState::initial(&u), &cfg, &mut rng);
                let x = if state.zero {
                    -1.0
                } else {
                    state.log_norm.exp() - 1.0
                };
                sum += x;
                sum_sq += x * x;
                sum_4 += x.powi(4);
            }
            let nt = trials as f64;
            let mean = sum / nt;
            let second = sum_sq / nt;
            let se = ((sum_4 / nt - second * second) / nt).sqrt();
            let predicted = predict_layer_variance(u.coords(), n, p, mu4);
            assert!(
                mean.abs() < 5.0 * (second / nt).sqrt(),
                "mean increment {mean}"
            );
            assert!(
                (second - predicted).abs() < 5.0 * se,
                "variance {second} vs predicted {predicted} (se {se})"
            );
        }
    }
}
