//! Entry laws for the weight matrices.
//!
//! Every admissible law is symmetric about zero with unit variance, so odd
//! moments vanish and `μ_2 = 1`. Only the continuous laws are atomless; the
//! atom-bearing ones are still useful for exact moment work.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

const PROBABILITY_TOL: f64 = 1e-12;

/// One atom `value` carrying mass `probability`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub value: f64,
    pub probability: f64,
}

/// A symmetric, mean-zero, variance-one law for matrix entries.
#[derive(Debug, Clone, PartialEq)]
pub enum DistributionSpec {
    StandardGaussian,
    /// ±1 with probability 1/2 each.
    Rademacher,
    /// Uniform on `[-√3, √3]`.
    UniformSymmetric,
    DiscreteSymmetric(Vec<Atom>),
}

impl DistributionSpec {
    /// `E[X^k]`.
    pub fn moment(&self, k: u32) -> f64 {
        if k == 0 {
            return 1.0;
        }
        if k % 2 == 1 {
            return 0.0;
        }
        match self {
            Self::StandardGaussian => double_factorial(k - 1) as f64,
            Self::Rademacher => 1.0,
            Self::UniformSymmetric => 3f64.powi(k as i32 / 2) / f64::from(k + 1),
            Self::DiscreteSymmetric(atoms) => atoms
                .iter()
                .map(|a| a.probability * a.value.powi(k as i32))
                .sum(),
        }
    }

    /// `E[X^k]` as an exact rational, when the law admits one.
    ///
    /// Discrete laws are converted from their `f64` data exactly; the result
    /// is `None` if the converted second moment is not exactly one.
    pub fn exact_moment(&self, k: u32) -> Option<BigRational> {
        if k == 0 {
            return Some(BigRational::one());
        }
        if k % 2 == 1 {
            return Some(BigRational::zero());
        }
        match self {
            Self::StandardGaussian => {
                let mut acc = BigInt::one();
                let mut j = k as i64 - 1;
                while j > 1 {
                    acc *= j;
                    j -= 2;
                }
                Some(BigRational::from_integer(acc))
            }
            Self::Rademacher => Some(BigRational::one()),
            Self::UniformSymmetric => Some(BigRational::new(
                num_traits::pow(BigInt::from(3), (k / 2) as usize),
                BigInt::from(k + 1),
            )),
            Self::DiscreteSymmetric(atoms) => {
                let raw = |power: u32| -> Option<BigRational> {
                    let mut acc = BigRational::zero();
                    for a in atoms {
                        let v = BigRational::from_float(a.value)?;
                        let q = BigRational::from_float(a.probability)?;
                        acc += q * num_traits::pow(v, power as usize);
                    }
                    Some(acc)
                };
                if raw(2)? != BigRational::one() || raw(0)? != BigRational::one() {
                    return None;
                }
                raw(k)
            }
        }
    }

    pub fn fourth_moment(&self) -> f64 {
        self.moment(4)
    }

    /// True when the law has no atoms.
    pub fn is_atomless(&self) -> bool {
        matches!(self, Self::StandardGaussian | Self::UniformSymmetric)
    }

    /// Checks normalization and symmetry; returns the law unchanged when valid.
    pub fn validate(self) -> Result<Self> {
        if let Self::DiscreteSymmetric(atoms) = &self {
            validate_atoms(atoms)?;
        }
        Ok(self)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::StandardGaussian => rng.sample(StandardNormal),
            Self::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            Self::UniformSymmetric => {
                let half_width = 3f64.sqrt();
                rng.random_range(-half_width..half_width)
            }
            Self::DiscreteSymmetric(atoms) => sample_atoms(atoms, rng),
        }
    }

    /// `Σ_j w_j c_j` with fresh draws `w_j` from this law, consuming the rng in
    /// coefficient order.
    pub fn sample_dot<R: Rng + ?Sized>(&self, coefficients: &[f64], rng: &mut R) -> f64 {
        match self {
            Self::StandardGaussian => coefficients
                .iter()
                .map(|c| rng.sample::<f64, _>(StandardNormal) * c)
                .sum(),
            Self::Rademacher => coefficients
                .iter()
                .map(|&c| if rng.random::<bool>() { c } else { -c })
                .sum(),
            _ => coefficients.iter().map(|c| self.sample(rng) * c).sum(),
        }
    }

    /// The atoms of a law with finite support.
    pub fn atoms(&self) -> Option<Vec<Atom>> {
        match self {
            Self::Rademacher => Some(vec![
                Atom {
                    value: 1.0,
                    probability: 0.5,
                },
                Atom {
                    value: -1.0,
                    probability: 0.5,
                },
            ]),
            Self::DiscreteSymmetric(atoms) => Some(atoms.clone()),
            _ => None,
        }
    }
}

/// Validates an entry law; see [`DistributionSpec::validate`].
pub fn validate_distribution(spec: DistributionSpec) -> Result<DistributionSpec> {
    spec.validate()
}

fn validate_atoms(atoms: &[Atom]) -> Result<()> {
    if atoms.is_empty() {
        return Err(Error::Normalization("discrete law has no atoms".into()));
    }
    for a in atoms {
        if !a.value.is_finite() || !a.probability.is_finite() || a.probability <= 0.0 {
            return Err(Error::Normalization(format!(
                "atom {}@{} is not a finite value with positive mass",
                a.value, a.probability
            )));
        }
    }
    let total: f64 = atoms.iter().map(|a| a.probability).sum();
    if (total - 1.0).abs() > PROBABILITY_TOL {
        return Err(Error::Normalization(format!("masses sum to {total}")));
    }

    // Aggregate by value so repeated atoms are handled.
    let mut mass: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
    for a in atoms {
        let key = (a.value.abs() + 0.0).to_bits();
        let slot = mass.entry(key).or_insert((0.0, 0.0));
        if a.value > 0.0 {
            slot.0 += a.probability;
        } else if a.value < 0.0 {
            slot.1 += a.probability;
        }
    }
    for (key, (pos, neg)) in &mass {
        if (pos - neg).abs() > PROBABILITY_TOL {
            return Err(Error::Asymmetry(format!(
                "mass {pos} at +{v} but {neg} at -{v}",
                v = f64::from_bits(*key)
            )));
        }
    }

    let first: f64 = atoms.iter().map(|a| a.probability * a.value).sum();
    let second: f64 = atoms
        .iter()
        .map(|a| a.probability * a.value * a.value)
        .sum();
    if first.abs() > PROBABILITY_TOL {
        return Err(Error::Normalization(format!("mean is {first}")));
    }
    if (second - 1.0).abs() > PROBABILITY_TOL {
        return Err(Error::Normalization(format!("variance is {second}")));
    }
    Ok(())
}

fn sample_atoms<R: Rng + ?Sized>(atoms: &[Atom], rng: &mut R) -> f64 {
    let mut target = rng.random::<f64>();
    for a in atoms {
        if target < a.probability {
            return a.value;
        }
        target -= a.probability;
    }
    atoms[atoms.len() - 1].value
}

fn double_factorial(n: u32) -> u64 {
    (1..=n).rev().step_by(2).map(u64::from).product()
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::StandardGaussian => f.write_str("gaussian"),
            Self::Rademacher => f.write_str("rademacher"),
            Self::UniformSymmetric => f.write_str("uniform"),
            Self::DiscreteSymmetric(atoms) => {
                f.write_str("discrete:")?;
                for (i, a) in atoms.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{}@{}", a.value, a.probability)?;
                }
                Ok(())
            }
        }
    }
}

/// Parses `gaussian`, `rademacher`, `uniform`, or
/// `discrete:<value>@<mass>,<value>@<mass>,...`. The result is validated.
impl FromStr for DistributionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let spec = match s.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Self::StandardGaussian,
            "rademacher" => Self::Rademacher,
            "uniform" => Self::UniformSymmetric,
            lower if lower.starts_with("discrete:") => {
                let body = &s["discrete:".len()..];
                let mut atoms = Vec::new();
                for part in body.split(',').filter(|p| !p.trim().is_empty()) {
                    let (value, mass) = part.split_once('@').ok_or_else(|| {
                        Error::InvalidParameter(format!("atom `{part}` is not value@mass"))
                    })?;
                    let parse = |t: &str| {
                        t.trim()
                            .parse::<f64>()
                            .map_err(|_| Error::InvalidParameter(format!("`{t}` is not a number")))
                    };
                    atoms.push(Atom {
                        value: parse(value)?,
                        probability: parse(mass)?,
                    });
                }
                Self::DiscreteSymmetric(atoms)
            }
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown entry law `{other}`"
                )))
            }
        };
        spec.validate()
    }
}
