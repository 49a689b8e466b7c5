//! Edge multiplicities, vertex tuples and the per-layer path factor.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::One;

use super::partitions::{block_count, rgs_of};
use super::scalar::Scalar;
use crate::distribution::DistributionSpec;
use crate::error::{Error, Result};

/// `m(a, b)`: how often the edge from input vertex `a` to output vertex `b`
/// is used by a tuple of paths through one layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeMultiplicity {
    entries: Vec<Vec<u32>>,
    row_sums: Vec<u32>,
    col_sums: Vec<u32>,
}

impl EdgeMultiplicity {
    /// From a dense `n × n′` matrix given by rows.
    pub fn new(entries: Vec<Vec<u32>>) -> Result<Self> {
        let cols = entries.first().map_or(0, Vec::len);
        if entries.is_empty() || cols == 0 {
            return Err(Error::InvalidParameter(
                "multiplicity matrix is empty".into(),
            ));
        }
        if let Some(bad) = entries.iter().find(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch {
                expected: cols,
                found: bad.len(),
            });
        }
        let row_sums = entries.iter().map(|r| r.iter().sum()).collect();
        let col_sums = (0..cols)
            .map(|b| entries.iter().map(|r| r[b]).sum())
            .collect();
        Ok(Self {
            entries,
            row_sums,
            col_sums,
        })
    }

    /// `m_{x,y}(a, b) = #{j : x_j = a, y_j = b}` for tuples over `[n] × [n′]`.
    pub fn from_tuples(x: &[usize], y: &[usize], n: usize, n_prime: usize) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                found: y.len(),
            });
        }
        let mut entries = vec![vec![0u32; n_prime]; n];
        for (&a, &b) in x.iter().zip(y) {
            if a >= n || b >= n_prime {
                return Err(Error::InvalidParameter(format!(
                    "edge ({a}, {b}) outside a {n} × {n_prime} layer"
                )));
            }
            entries[a][b] += 1;
        }
        Self::new(entries)
    }

    pub fn rows(&self) -> usize {
        self.entries.len()
    }

    pub fn cols(&self) -> usize {
        self.col_sums.len()
    }

    pub fn get(&self, a: usize, b: usize) -> u32 {
        self.entries[a][b]
    }

    pub fn entries(&self) -> &[Vec<u32>] {
        &self.entries
    }

    /// `m(a, ∗)`.
    pub fn row_sums(&self) -> &[u32] {
        &self.row_sums
    }

    /// `m(∗, b)`.
    pub fn col_sums(&self) -> &[u32] {
        &self.col_sums
    }

    /// Total number of edge traversals, the tuple length `ℓ`.
    pub fn total(&self) -> u32 {
        self.row_sums.iter().sum()
    }

    /// `2m`.
    pub fn doubled(&self) -> Self {
        let entries = self
            .entries
            .iter()
            .map(|r| r.iter().map(|v| 2 * v).collect())
            .collect();
        Self::new(entries).expect("doubling preserves shape")
    }
}

/// Coincidence pattern of a vertex tuple.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TupleClass {
    /// All entries distinct.
    Unique,
    /// Exactly one coincident pair, at positions `a < b`.
    OnePair(usize, usize),
    Other,
}

/// A tuple `V ∈ [n]^k` of vertices in one layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VertexTuple {
    entries: Vec<usize>,
    width: usize,
    unique: usize,
    class: TupleClass,
}

impl VertexTuple {
    pub fn new(entries: Vec<usize>, width: usize) -> Result<Self> {
        if let Some(&bad) = entries.iter().find(|&&v| v >= width) {
            return Err(Error::InvalidParameter(format!(
                "vertex {bad} outside [0, {width})"
            )));
        }
        let rgs = rgs_of(&entries);
        let unique = block_count(&rgs);
        let k = entries.len();
        let class = if unique == k {
            TupleClass::Unique
        } else if unique + 1 == k {
            let mut pair = (0, 0);
            for b in 1..k {
                if let Some(a) = (0..b).find(|&a| entries[a] == entries[b]) {
                    pair = (a, b);
                }
            }
            TupleClass::OnePair(pair.0, pair.1)
        } else {
            TupleClass::Other
        };
        Ok(Self {
            entries,
            width,
            unique,
            class,
        })
    }

    pub fn entries(&self) -> &[usize] {
        &self.entries
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `#V`, the number of distinct entries.
    pub fn unique_count(&self) -> usize {
        self.unique
    }

    pub fn class(&self) -> TupleClass {
        self.class
    }
}

pub(crate) fn factorial(n: u32) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, j| acc * j)
}

/// `c_ℓ(m) = Π_b multinomial(m(∗,b); m(1,b), …, m(n,b))`: the number of
/// `x ∈ [n]^ℓ` with `m_{x,y} = m` for any fixed `y` with the right column counts.
pub fn multiplicity_count(m: &EdgeMultiplicity) -> BigUint {
    let mut acc = BigUint::one();
    for b in 0..m.cols() {
        acc *= factorial(m.col_sums()[b]);
        for a in 0..m.rows() {
            acc /= factorial(m.get(a, b));
        }
    }
    acc
}

/// `wt(m) = Π_{a,b} μ_{m(a,b)}`; zero as soon as one multiplicity is odd.
pub fn edge_weight(m: &EdgeMultiplicity, law: &DistributionSpec) -> f64 {
    let mut acc = 1.0;
    for row in m.entries() {
        for &v in row {
            if v % 2 == 1 {
                return 0.0;
            }
            acc *= law.moment(v);
        }
    }
    acc
}

/// `C(x, y) = wt(2m)·c_{2k}(2m)/c_k(m)·p^{#y − k}` with `m = m_{x,y}`.
pub fn layer_factor(
    prev: &VertexTuple,
    next: &VertexTuple,
    law: &DistributionSpec,
    p: f64,
) -> Result<f64> {
    if prev.len() != next.len() {
        return Err(Error::DimensionMismatch {
            expected: prev.len(),
            found: next.len(),
        });
    }
    let mu: Vec<f64> = (0..=2 * prev.len() as u32).map(|j| law.moment(j)).collect();
    Ok(pair_factor(
        &rgs_of(prev.entries()),
        &rgs_of(next.entries()),
        &mu,
        &p,
    ))
}

/// The layer factor in terms of the coincidence patterns alone. Only the
/// joint pattern of `(x, y)` enters `m_{x,y}` up to relabelling of vertices,
/// and `C` is invariant under such relabelling.
///
/// Within one output block `B`, with `m_A = |A ∩ B|` for input blocks `A`,
/// the factor is `Π_A μ_{2m_A} · (2|B|)!/Π_A (2m_A)! · Π_A m_A!/|B|!`.
pub(crate) fn pair_factor<T: Scalar>(x: &[u8], y: &[u8], mu: &[T], p: &T) -> T {
    let k = x.len();
    let bx = block_count(x);
    let by = block_count(y);
    let mut counts = vec![0u32; bx * by];
    for (&a, &b) in x.iter().zip(y) {
        counts[a as usize * by + b as usize] += 1;
    }
    let mut numerator = BigUint::one();
    let mut denominator = BigUint::one();
    let mut weight = T::one();
    for b in 0..by {
        let size: u32 = (0..bx).map(|a| counts[a * by + b]).sum();
        numerator *= factorial(2 * size);
        denominator *= factorial(size);
        for a in 0..bx {
            let m = counts[a * by + b];
            if m > 0 {
                numerator *= factorial(m);
                denominator *= factorial(2 * m);
                weight = weight * mu[2 * m as usize].clone();
            }
        }
    }
    let ratio = BigRational::new(BigInt::from(numerator), BigInt::from(denominator));
    let fits = |v: &BigInt| u128::try_from(v).expect("factorial ratio fits for k ≤ 8");
    weight * T::from_u128(fits(ratio.numer())) / T::from_u128(fits(ratio.denom()))
        * p.powi(by as i32 - k as i32)
}

/// Counts the ordered tuples of `ℓ` paths ending at `v_end` whose layer-`i`
/// edge multiplicities are `edge_sequence[i]`, by backward enumeration, and
/// compares with `Π_i c_ℓ(m_{E(i)})`. Returns `(enumerated, formula)`.
pub fn verify_path_count(
    edge_sequence: &[EdgeMultiplicity],
    v_end: &[usize],
) -> Result<(BigUint, BigUint)> {
    let Some(last) = edge_sequence.last() else {
        return Err(Error::InvalidArchitecture("empty edge sequence".into()));
    };
    let ell = v_end.len();
    for (i, e) in edge_sequence.iter().enumerate() {
        if e.total() as usize != ell {
            return Err(Error::InvalidParameter(format!(
                "layer {i} carries {} traversals, expected {ell}",
                e.total()
            )));
        }
    }
    for w in edge_sequence.windows(2) {
        if w[0].cols() != w[1].rows() {
            return Err(Error::DimensionMismatch {
                expected: w[0].cols(),
                found: w[1].rows(),
            });
        }
    }
    if let Some(&bad) = v_end.iter().find(|&&v| v >= last.cols()) {
        return Err(Error::InvalidParameter(format!(
            "end vertex {bad} outside the last layer"
        )));
    }
    let cost: f64 = edge_sequence
        .iter()
        .map(|e| (e.rows() as f64).powi(ell as i32))
        .product();
    const LIMIT: f64 = 1e7;
    if cost > LIMIT {
        return Err(Error::BudgetExceeded {
            estimate: cost as u128,
            budget: LIMIT as u128,
        });
    }

    fn count_back(edges: &[EdgeMultiplicity], v: &[usize]) -> u128 {
        let Some((e, rest)) = edges.split_last() else {
            return 1;
        };
        let mut remaining = e.entries().to_vec();
        let mut x = vec![0usize; v.len()];
        fn assign(
            j: usize,
            v: &[usize],
            x: &mut [usize],
            remaining: &mut [Vec<u32>],
            rest: &[EdgeMultiplicity],
        ) -> u128 {
            if j == v.len() {
                return count_back(rest, x);
            }
            let b = v[j];
            let mut total = 0;
            for a in 0..remaining.len() {
                if remaining[a][b] > 0 {
                    remaining[a][b] -= 1;
                    x[j] = a;
                    total += assign(j + 1, v, x, remaining, rest);
                    remaining[a][b] += 1;
                }
            }
            total
        }
        assign(0, v, &mut x, &mut remaining, rest)
    }

    let enumerated = BigUint::from(count_back(edge_sequence, v_end));
    let formula = edge_sequence.iter().map(multiplicity_count).product();
    Ok((enumerated, formula))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::ToPrimitive;
    use proptest::prelude::*;

    fn tuple(v: &[usize], n: usize) -> VertexTuple {
        VertexTuple::new(v.to_vec(), n).unwrap()
    }

    #[test]
    fn multiplicity_count_examples() {
        let ones = EdgeMultiplicity::new(vec![vec![1, 0], vec![0, 1]]).unwrap();
        assert_eq!(multiplicity_count(&ones), BigUint::from(1u8));
        let pair = EdgeMultiplicity::new(vec![vec![1], vec![1]]).unwrap();
        assert_eq!(multiplicity_count(&pair), BigUint::from(2u8));
        let double = EdgeMultiplicity::new(vec![vec![2, 0], vec![0, 0]]).unwrap();
        assert_eq!(multiplicity_count(&double), BigUint::from(1u8));
        // Direct count of x ∈ [2]^2 with m_{x,(0,0)} = double.
        let direct = (0..4)
            .filter(|c| {
                let x = [c / 2, c % 2];
                EdgeMultiplicity::from_tuples(&x, &[0, 0], 2, 2).unwrap() == double
            })
            .count();
        assert_eq!(direct, 1);
    }

    #[test]
    fn edge_weight_examples() {
        let g = DistributionSpec::StandardGaussian;
        let twos = EdgeMultiplicity::new(vec![vec![2, 0], vec![0, 2]]).unwrap();
        assert_eq!(edge_weight(&twos, &g), 1.0);
        let odd = EdgeMultiplicity::new(vec![vec![2, 1], vec![0, 2]]).unwrap();
        assert_eq!(edge_weight(&odd, &g), 0.0);
        let four = EdgeMultiplicity::new(vec![vec![4, 0], vec![2, 0]]).unwrap();
        assert_eq!(edge_weight(&four, &g), 3.0);
    }

    #[test]
    fn layer_factor_classes() {
        let g = DistributionSpec::StandardGaussian;
        let r = DistributionSpec::Rademacher;
        let p = 0.5;
        let unique = tuple(&[2, 0, 1], 3);
        assert_eq!(unique.class(), TupleClass::Unique);
        assert_eq!(
            layer_factor(&tuple(&[0, 0, 1], 3), &unique, &g, p).unwrap(),
            1.0
        );
        let pair = tuple(&[1, 2, 1], 3);
        assert_eq!(pair.class(), TupleClass::OnePair(0, 2));
        assert_eq!(pair.unique_count(), 2);
        let split = tuple(&[0, 1, 1], 3);
        assert_eq!(layer_factor(&split, &pair, &g, p).unwrap(), 3.0 / p);
        let joined = tuple(&[1, 0, 1], 3);
        assert_eq!(layer_factor(&joined, &pair, &g, p).unwrap(), 3.0 / p);
        assert_eq!(layer_factor(&joined, &pair, &r, p).unwrap(), 1.0 / p);
        assert_eq!(tuple(&[1, 1, 1], 3).class(), TupleClass::Other);
    }

    /// `C` straight from its definition with explicit multiplicity matrices.
    fn layer_factor_by_definition(x: &[usize], y: &[usize], law: &DistributionSpec, p: f64) -> f64 {
        let n = x.len();
        let m = EdgeMultiplicity::from_tuples(x, y, n, n).unwrap();
        let m2 = m.doubled();
        let ratio =
            multiplicity_count(&m2).to_f64().unwrap() / multiplicity_count(&m).to_f64().unwrap();
        let unique = tuple(y, n).unique_count() as i32;
        edge_weight(&m2, law) * ratio * p.powi(unique - n as i32)
    }

    #[test]
    fn pattern_factor_matches_definition() {
        let law = DistributionSpec::UniformSymmetric;
        for code in 0..(4usize.pow(8)) {
            let x: Vec<usize> = (0..4).map(|j| (code >> (2 * j)) & 3).collect();
            let y: Vec<usize> = (0..4).map(|j| (code >> (8 + 2 * j)) & 3).collect();
            let direct = layer_factor_by_definition(&x, &y, &law, 0.3);
            let fast = layer_factor(&tuple(&x, 4), &tuple(&y, 4), &law, 0.3).unwrap();
            assert!(
                (direct - fast).abs() <= 1e-12 * direct.abs().max(1.0),
                "{x:?} {y:?}"
            );
        }
    }

    #[test]
    fn path_count_examples() {
        let ones = EdgeMultiplicity::new(vec![vec![1, 0], vec![0, 1]]).unwrap();
        let (e, f) = verify_path_count(&[ones], &[0, 1]).unwrap();
        assert_eq!((e.clone(), f), (BigUint::from(1u8), BigUint::from(1u8)));

        let pair = EdgeMultiplicity::new(vec![vec![1], vec![1]]).unwrap();
        let (e, f) = verify_path_count(std::slice::from_ref(&pair), &[0, 0]).unwrap();
        assert_eq!((e, f), (BigUint::from(2u8), BigUint::from(2u8)));

        // Two layers: the first has c = 2, the second c = 1.
        let first = EdgeMultiplicity::new(vec![vec![1, 0], vec![1, 0]]).unwrap();
        let second = EdgeMultiplicity::new(vec![vec![2], vec![0]]).unwrap();
        assert_eq!(multiplicity_count(&second), BigUint::from(1u8));
        let (e, f) = verify_path_count(&[first, second], &[0, 0]).unwrap();
        assert_eq!((e, f), (BigUint::from(2u8), BigUint::from(2u8)));
    }

    fn small_matrix() -> impl Strategy<Value = Vec<Vec<u32>>> {
        (1usize..=3, 1usize..=3).prop_flat_map(|(r, c)| {
            proptest::collection::vec(proptest::collection::vec(0u32..=2, c), r)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn multinomial_formula_matches_enumeration(entries in small_matrix()) {
            let m = EdgeMultiplicity::new(entries).unwrap();
            prop_assume!(m.total() > 0);
            // Any y with the right column counts.
            let y: Vec<usize> = (0..m.cols())
                .flat_map(|b| std::iter::repeat_n(b, m.col_sums()[b] as usize))
                .collect();
            let ell = y.len() as u32;
            let rows = m.rows();
            let mut count = 0u64;
            for code in 0..(rows as u64).pow(ell) {
                let mut c = code;
                let x: Vec<usize> = (0..ell).map(|_| { let a = c % rows as u64; c /= rows as u64; a as usize }).collect();
                if EdgeMultiplicity::from_tuples(&x, &y, rows, m.cols()).unwrap() == m {
                    count += 1;
                }
            }
            prop_assert_eq!(BigUint::from(count), multiplicity_count(&m));
        }

        #[test]
        fn layer_factor_is_permutation_invariant(
            x in proptest::collection::vec(0usize..3, 4),
            y in proptest::collection::vec(0usize..3, 4),
            perm in Just((0..4usize).collect::<Vec<_>>()).prop_shuffle(),
        ) {
            let law = DistributionSpec::StandardGaussian;
            let base = layer_factor(&tuple(&x, 3), &tuple(&y, 3), &law, 0.7).unwrap();
            let px: Vec<usize> = perm.iter().map(|&j| x[j]).collect();
            let py: Vec<usize> = perm.iter().map(|&j| y[j]).collect();
            let permuted = layer_factor(&tuple(&px, 3), &tuple(&py, 3), &law, 0.7).unwrap();
            prop_assert!((base - permuted).abs() <= 1e-12 * base.abs().max(1.0));
        }

        #[test]
        fn odd_multiplicity_has_zero_weight(mut entries in small_matrix(), a in 0usize..3, b in 0usize..3) {
            let (a, b) = (a % entries.len(), b % entries[0].len());
            entries[a][b] = 2 * entries[a][b] + 1;
            let m = EdgeMultiplicity::new(entries).unwrap();
            prop_assert_eq!(edge_weight(&m, &DistributionSpec::UniformSymmetric), 0.0);
        }
    }
}
