//! Normal CDF, Kolmogorov–Smirnov statistics, and sample summaries.

// Published coefficients are kept digit for digit.
#![allow(clippy::excessive_precision)]

use std::cmp::Ordering;

use crate::error::{Error, Result};

/// Asymptotic 5% two-sided critical coefficient of the KS distribution.
pub const KS_CRITICAL_5PCT: f64 = 1.358;

/// `Φ((t - mean)/√variance)`.
///
/// Built on [`erfc`], so the absolute error is below `1e-15` everywhere.
pub fn normal_cdf(t: f64, mean: f64, variance: f64) -> f64 {
    debug_assert!(variance > 0.0);
    let z = (t - mean) / variance.sqrt();
    standard_normal_cdf(z)
}

pub fn standard_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * std::f64::consts::FRAC_1_SQRT_2)
}

// W. J. Cody, "Rational Chebyshev approximations for the error function",
// Math. Comp. 23 (1969), 631-637; coefficients as in the CALERF routine.
const ERF_A: [f64; 5] = [
    3.161_123_743_870_565_6e0,
    1.138_641_541_510_501_6e2,
    3.774_852_376_853_020_2e2,
    3.209_377_589_138_469_5e3,
    1.857_777_061_846_031_5e-1,
];
const ERF_B: [f64; 4] = [
    2.360_129_095_234_412_1e1,
    2.440_246_379_344_441_7e2,
    1.282_616_526_077_372_3e3,
    2.844_236_833_439_170_6e3,
];
const ERFC_C: [f64; 9] = [
    5.641_884_969_886_700_9e-1,
    8.883_149_794_388_375_9e0,
    6.611_919_063_714_163e1,
    2.986_351_381_974_001_3e2,
    8.819_522_212_417_690_9e2,
    1.712_047_612_634_070_6e3,
    2.051_078_377_826_071_5e3,
    1.230_339_354_797_997_2e3,
    2.153_115_354_744_038_5e-8,
];
const ERFC_D: [f64; 8] = [
    1.574_492_611_070_983_5e1,
    1.176_939_508_913_125e2,
    5.371_811_018_620_098_6e2,
    1.621_389_574_566_690_2e3,
    3.290_799_235_733_459_6e3,
    4.362_619_090_143_247_2e3,
    3.439_367_674_143_721_6e3,
    1.230_339_354_803_749_4e3,
];
const ERFC_P: [f64; 6] = [
    3.053_266_349_612_323_4e-1,
    3.603_448_999_498_044_4e-1,
    1.257_817_261_112_292_5e-1,
    1.608_378_514_874_227_7e-2,
    6.587_491_615_298_378e-4,
    1.631_538_713_730_209_8e-2,
];
const ERFC_Q: [f64; 5] = [
    2.568_520_192_289_822_4e0,
    1.872_952_849_923_467_3e0,
    5.279_051_029_514_284_1e-1,
    6.051_834_131_244_132e-2,
    2.335_204_976_268_691_9e-3,
];
const FRAC_1_SQRT_PI: f64 = 5.641_895_835_477_562_9e-1;

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let y = x.abs();
    if y <= 0.468_75 {
        return 1.0 - erf_small(x);
    }
    let tail = if y <= 4.0 {
        let mut num = ERFC_C[8] * y;
        let mut den = y;
        for i in 0..7 {
            num = (num + ERFC_C[i]) * y;
            den = (den + ERFC_D[i]) * y;
        }
        (num + ERFC_C[7]) / (den + ERFC_D[7]) * exp_neg_square(y)
    } else if y < 26.6 {
        let z = 1.0 / (y * y);
        let mut num = ERFC_P[5] * z;
        let mut den = z;
        for i in 0..4 {
            num = (num + ERFC_P[i]) * z;
            den = (den + ERFC_Q[i]) * z;
        }
        let r = z * (num + ERFC_P[4]) / (den + ERFC_Q[4]);
        (FRAC_1_SQRT_PI - r) / y * exp_neg_square(y)
    } else {
        0.0
    };
    if x < 0.0 {
        2.0 - tail
    } else {
        tail
    }
}

fn erf_small(x: f64) -> f64 {
    let y = x.abs();
    let z = if y > 1.11e-16 { y * y } else { 0.0 };
    let mut num = ERF_A[4] * z;
    let mut den = z;
    for i in 0..3 {
        num = (num + ERF_A[i]) * z;
        den = (den + ERF_B[i]) * z;
    }
    x * (num + ERF_A[3]) / (den + ERF_B[3])
}

/// `exp(-y²)` with the square split to limit cancellation.
fn exp_neg_square(y: f64) -> f64 {
    let head = (y * 16.0).trunc() / 16.0;
    let del = (y - head) * (y + head);
    (-head * head).exp() * (-del).exp()
}

/// Outcome of a Kolmogorov–Smirnov comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct KsReport {
    pub statistic: f64,
    pub sizes: (usize, Option<usize>),
    pub reference: String,
    /// Asymptotic 5% critical value for the applicable test.
    pub critical_5pct: f64,
}

impl KsReport {
    pub fn rejects_at_5pct(&self) -> bool {
        self.statistic > self.critical_5pct
    }
}

/// One-sample KS statistic of ascending `sorted` against `cdf`, evaluating
/// both one-sided empirical limits at every jump.
pub fn one_sample_ks(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            let below = i as f64 / n;
            let above = (i + 1) as f64 / n;
            (f - below).max(above - f)
        })
        .fold(0.0, f64::max)
}

/// Two-sample KS statistic `sup |F_a - F_b|`.
pub fn two_sample_ks(a: &[f64], b: &[f64]) -> Result<KsReport> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let a = sorted_copy(a);
    let b = sorted_copy(b);
    let (m, n) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut sup: f64 = 0.0;
    while i < m && j < n {
        let x = a[i].min(b[j]);
        while i < m && a[i] <= x {
            i += 1;
        }
        while j < n && b[j] <= x {
            j += 1;
        }
        sup = sup.max((i as f64 / m as f64 - j as f64 / n as f64).abs());
    }
    let (mf, nf) = (m as f64, n as f64);
    Ok(KsReport {
        statistic: sup,
        sizes: (m, Some(n)),
        reference: "two-sample".into(),
        critical_5pct: KS_CRITICAL_5PCT * ((mf + nf) / (mf * nf)).sqrt(),
    })
}

fn sorted_copy(v: &[f64]) -> Vec<f64> {
    let mut out = v.to_vec();
    if !out.windows(2).all(|w| w[0] <= w[1]) {
        out.sort_by(f64::total_cmp);
    }
    out
}

/// Descriptive statistics of a sample of log-norms.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    /// Adjusted Fisher–Pearson skewness; zero for degenerate samples.
    pub skewness: f64,
    /// `(level, value)` pairs, linearly interpolated.
    pub quantiles: Vec<(f64, f64)>,
}

pub const SUMMARY_LEVELS: [f64; 7] = [0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99];

pub fn summary(samples: &[f64]) -> Result<Summary> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            available: n,
        });
    }
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let (mut m2, mut m3) = (0.0, 0.0);
    for &x in samples {
        let d = x - mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    let variance = m2 / (nf - 1.0);
    let skewness = if n > 2 && m2 > 0.0 {
        let g1 = (m3 / nf) / (m2 / nf).powf(1.5);
        g1 * (nf * (nf - 1.0)).sqrt() / (nf - 2.0)
    } else {
        0.0
    };
    let sorted = sorted_copy(samples);
    let quantiles = SUMMARY_LEVELS
        .iter()
        .map(|&q| (q, quantile(&sorted, q)))
        .collect();
    Ok(Summary {
        count: n,
        mean,
        variance,
        skewness,
        quantiles,
    })
}

/// Linear-interpolation quantile of ascending `sorted` at `level ∈ [0, 1]`.
pub fn quantile(sorted: &[f64], level: f64) -> f64 {
    let pos = level.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    match sorted[lo].partial_cmp(&sorted[hi]) {
        Some(Ordering::Equal) => sorted[lo],
        _ => sorted[lo] + frac * (sorted[hi] - sorted[lo]),
    }
}
