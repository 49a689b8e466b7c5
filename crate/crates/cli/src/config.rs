//! Command-line and config-file settings.
//!
//! A config file holds `key = value` lines whose keys are the long flag names
//! (`widths`, `p`, `dist`, …); blank lines and lines starting with `#` are
//! ignored. Flags given on the command line override the file.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use matprod_core::{Architecture, DistributionSpec, EnsembleConfig, UnitVector};

pub const DEFAULT_TRIALS: usize = 100_000;

#[derive(Debug, Parser)]
#[command(
    name = "matprod",
    version,
    about = "Products of random matrices: moments, sampling, KS checks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum CommandKind {
    Beta,
    Simulate,
    Moments,
    KsTest,
    Chi2Check,
    JacobianCompare,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// β, its two terms, and the error budget of the log-normal approximation.
    Beta(Options),
    /// Sample ln Z and summarize the batch.
    Simulate(Options),
    /// Exact, brute-force, Monte Carlo and predicted moments E[Z^k].
    Moments(Options),
    /// KS distance between sampled ln Z and Normal(-β/2, β).
    KsTest(Options),
    /// Two-sample KS between the product sampler and the chi-square law (p = 1, Gaussian).
    Chi2Check(Options),
    /// Two-sample KS between ReLU Jacobian log-norms and the masked product.
    JacobianCompare(Options),
}

impl Command {
    pub fn split(self) -> (CommandKind, Options) {
        match self {
            Self::Beta(o) => (CommandKind::Beta, o),
            Self::Simulate(o) => (CommandKind::Simulate, o),
            Self::Moments(o) => (CommandKind::Moments, o),
            Self::KsTest(o) => (CommandKind::KsTest, o),
            Self::Chi2Check(o) => (CommandKind::Chi2Check, o),
            Self::JacobianCompare(o) => (CommandKind::JacobianCompare, o),
        }
    }
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Beta => "beta",
            Self::Simulate => "simulate",
            Self::Moments => "moments",
            Self::KsTest => "ks-test",
            Self::Chi2Check => "chi2-check",
            Self::JacobianCompare => "jacobian-compare",
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Options {
    /// Widths n_0,…,n_d; `NxD` stands for D copies of N (n_0 = N when first).
    #[arg(long)]
    pub widths: Option<String>,
    /// Mask probability in (0, 1] [default: 1].
    #[arg(long)]
    pub p: Option<f64>,
    /// Entry law: gaussian, rademacher, uniform, or discrete:v@q,… [default: gaussian].
    #[arg(long)]
    pub dist: Option<String>,
    /// Unit vector: uniform, e1 … eN, or a file of coordinates [default: uniform].
    #[arg(long)]
    pub u: Option<String>,
    /// Monte Carlo trials [default: 100000].
    #[arg(long)]
    pub trials: Option<usize>,
    /// Seed of the per-trial streams [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Moment orders, comma separated [default: 1,2].
    #[arg(long)]
    pub k: Option<String>,
    /// Output file [default: standard output].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// csv or json (JSON lines) [default: csv].
    #[arg(long)]
    pub format: Option<String>,
    /// key=value config file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Exit with status 1 when the command's check fails.
    #[arg(long)]
    pub assert: bool,
    /// Tolerance used by --assert; see the command's documentation.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Network input for jacobian-compare: ones, e1 … eN, or a file [default: ones].
    #[arg(long)]
    pub x: Option<String>,
    /// Bias law for jacobian-compare [default: the entry law].
    #[arg(long = "bias-dist")]
    pub bias_dist: Option<String>,
    /// Bias scale σ_b for jacobian-compare [default: 1].
    #[arg(long = "bias-scale")]
    pub bias_scale: Option<f64>,
    /// Mask probability on the product side of jacobian-compare [default: 0.5].
    #[arg(long = "product-p")]
    pub product_p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsageError {
    pub flag: String,
    pub message: String,
}

impl UsageError {
    fn new(flag: &str, message: impl Into<String>) -> Self {
        Self {
            flag: flag.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "--{}: {}", self.flag, self.message)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug, Clone, PartialEq)]
pub enum VectorSpec {
    Uniform,
    /// Zero-based index.
    Basis(usize),
    Coordinates(Vec<f64>),
}

impl VectorSpec {
    fn describe(&self) -> String {
        match self {
            Self::Uniform => "uniform".into(),
            Self::Basis(j) => format!("e{}", j + 1),
            Self::Coordinates(c) => {
                let bits: Vec<String> = c.iter().map(|v| format!("{:016x}", v.to_bits())).collect();
                format!("coords:{}", bits.join(","))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub command: CommandKind,
    pub widths: Vec<usize>,
    pub p: f64,
    pub dist: DistributionSpec,
    pub u: VectorSpec,
    pub trials: usize,
    pub seed: u64,
    pub k: Vec<u32>,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub assert: bool,
    pub tol: Option<f64>,
    pub x: Option<VectorSpec>,
    pub bias_dist: Option<DistributionSpec>,
    pub bias_scale: f64,
    pub product_p: f64,
}

impl ExperimentConfig {
    pub fn ensemble(&self) -> Result<EnsembleConfig, UsageError> {
        let arch = Architecture::new(self.widths.clone())
            .map_err(|e| UsageError::new("widths", e.to_string()))?;
        EnsembleConfig::new(arch, self.p, self.dist.clone())
            .map_err(|e| UsageError::new("dist", e.to_string()))
    }

    pub fn unit_vector(&self) -> Result<UnitVector, UsageError> {
        build_vector(&self.u, self.widths[0], "u", true)
    }

    /// The network input; defaults to the normalized all-ones vector.
    pub fn input(&self) -> Result<Vec<f64>, UsageError> {
        match &self.x {
            None => Ok(matprod_core::relu::default_input(self.widths[0])),
            Some(spec) => Ok(build_vector(spec, self.widths[0], "x", false)?
                .coords()
                .to_vec()),
        }
    }

    /// Everything that determines the output, in a fixed order.
    pub fn describe(&self) -> String {
        let widths: Vec<String> = self.widths.iter().map(usize::to_string).collect();
        let k: Vec<String> = self.k.iter().map(u32::to_string).collect();
        format!(
            "command={};widths={};p={:e};dist={};u={};trials={};seed={};k={};tol={:?};x={};bias_dist={};bias_scale={:e};product_p={:e}",
            self.command.name(),
            widths.join(","),
            self.p,
            self.dist,
            self.u.describe(),
            self.trials,
            self.seed,
            k.join(","),
            self.tol,
            self.x.as_ref().map_or("ones".into(), VectorSpec::describe),
            self.bias_dist.as_ref().map_or("same".into(), ToString::to_string),
            self.bias_scale,
            self.product_p,
        )
    }
}

fn build_vector(
    spec: &VectorSpec,
    n: usize,
    flag: &str,
    unit: bool,
) -> Result<UnitVector, UsageError> {
    let v = match spec {
        VectorSpec::Uniform => UnitVector::uniform(n),
        VectorSpec::Basis(j) => UnitVector::basis(n, *j),
        VectorSpec::Coordinates(c) if c.len() != n => {
            return Err(UsageError::new(
                flag,
                format!("{} coordinates for input width {n}", c.len()),
            ))
        }
        VectorSpec::Coordinates(c) if unit => UnitVector::new(c.clone()),
        VectorSpec::Coordinates(c) => UnitVector::normalized(c.clone()),
    };
    v.map_err(|e| UsageError::new(flag, e.to_string()))
}

/// Parses `2,3,4`, `64x16` (64 followed by 16 copies of 64) or `8,16x3`.
pub fn parse_widths(text: &str) -> Result<Vec<usize>, UsageError> {
    let bad = |msg: String| UsageError::new("widths", msg);
    let mut out = Vec::new();
    for (i, token) in text.split(',').map(str::trim).enumerate() {
        if let Some((n, d)) = token.split_once(['x', 'X']) {
            let n: usize = n
                .trim()
                .parse()
                .map_err(|_| bad(format!("bad width in `{token}`")))?;
            let d: usize = d
                .trim()
                .parse()
                .map_err(|_| bad(format!("bad count in `{token}`")))?;
            if i == 0 {
                out.push(n);
            }
            out.extend(std::iter::repeat_n(n, d));
        } else {
            out.push(
                token
                    .parse()
                    .map_err(|_| bad(format!("bad width `{token}`")))?,
            );
        }
    }
    if out.len() < 2 {
        return Err(bad("need an input width and at least one layer".into()));
    }
    if out.contains(&0) {
        return Err(bad("widths must be positive".into()));
    }
    Ok(out)
}

fn parse_vector(text: &str, flag: &str, named_default: &str) -> Result<VectorSpec, UsageError> {
    let t = text.trim();
    if t == named_default {
        return Ok(VectorSpec::Uniform);
    }
    if let Some(j) = t.strip_prefix('e').and_then(|j| j.parse::<usize>().ok()) {
        if j == 0 {
            return Err(UsageError::new(flag, "basis vectors are numbered from e1"));
        }
        return Ok(VectorSpec::Basis(j - 1));
    }
    read_coordinates(Path::new(t))
        .map(VectorSpec::Coordinates)
        .map_err(|m| UsageError::new(flag, m))
}

/// Whitespace- or comma-separated numbers.
fn read_coordinates(path: &Path) -> Result<Vec<f64>, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| format!("bad coordinate `{s}` in {}", path.display()))
        })
        .collect()
}

fn parse_k(text: &str) -> Result<Vec<u32>, UsageError> {
    let k: Vec<u32> = text
        .split(',')
        .map(|s| s.trim().parse::<u32>())
        .collect::<Result<_, _>>()
        .map_err(|_| UsageError::new("k", format!("bad list `{text}`")))?;
    if k.is_empty() || k.contains(&0) {
        return Err(UsageError::new("k", "orders must be positive"));
    }
    Ok(k)
}

fn parse_dist(text: &str, flag: &str) -> Result<DistributionSpec, UsageError> {
    text.parse::<DistributionSpec>()
        .map_err(|e| UsageError::new(flag, e.to_string()))
}

fn parse_probability(value: f64, flag: &str) -> Result<f64, UsageError> {
    if value > 0.0 && value <= 1.0 {
        Ok(value)
    } else {
        Err(UsageError::new(flag, format!("{value} is not in (0, 1]")))
    }
}

const FILE_KEYS: [&str; 14] = [
    "widths",
    "p",
    "dist",
    "u",
    "trials",
    "seed",
    "k",
    "out",
    "format",
    "tol",
    "x",
    "bias-dist",
    "bias-scale",
    "product-p",
];

/// Reads a `key = value` config file.
pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>, UsageError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| UsageError::new("config", format!("cannot read {}: {e}", path.display())))?;
    let mut map = BTreeMap::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(UsageError::new(
                "config",
                format!("line {}: expected key = value", line_no + 1),
            ));
        };
        let key = key.trim().to_string();
        if !FILE_KEYS.contains(&key.as_str()) {
            return Err(UsageError::new(
                "config",
                format!("line {}: unknown key `{key}`", line_no + 1),
            ));
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

fn file_value<T: std::str::FromStr>(
    file: &BTreeMap<String, String>,
    key: &str,
) -> Result<Option<T>, UsageError> {
    file.get(key)
        .map(|v| {
            v.parse::<T>()
                .map_err(|_| UsageError::new(key, format!("bad value `{v}` in config file")))
        })
        .transpose()
}

/// Merges flags over the optional config file and applies defaults.
pub fn parse_config(command: CommandKind, opts: Options) -> Result<ExperimentConfig, UsageError> {
    let file = match &opts.config {
        Some(path) => read_config_file(path)?,
        None => BTreeMap::new(),
    };
    let text = |flag: Option<String>, key: &str| flag.or_else(|| file.get(key).cloned());

    let widths =
        text(opts.widths, "widths").ok_or_else(|| UsageError::new("widths", "is required"))?;
    let widths = parse_widths(&widths)?;
    let p = parse_probability(opts.p.or(file_value(&file, "p")?).unwrap_or(1.0), "p")?;
    let dist = parse_dist(
        &text(opts.dist, "dist").unwrap_or_else(|| "gaussian".into()),
        "dist",
    )?;
    let u = parse_vector(
        &text(opts.u, "u").unwrap_or_else(|| "uniform".into()),
        "u",
        "uniform",
    )?;
    let trials = opts
        .trials
        .or(file_value(&file, "trials")?)
        .unwrap_or(DEFAULT_TRIALS);
    let seed = opts.seed.or(file_value(&file, "seed")?).unwrap_or(0);
    let k = parse_k(&text(opts.k, "k").unwrap_or_else(|| "1,2".into()))?;
    let out = opts.out.or_else(|| file.get("out").map(PathBuf::from));
    let format = match text(opts.format, "format").as_deref() {
        None | Some("csv") => Format::Csv,
        Some("json") => Format::Json,
        Some(other) => {
            return Err(UsageError::new(
                "format",
                format!("`{other}` is not csv or json"),
            ))
        }
    };
    let tol = opts.tol.or(file_value(&file, "tol")?);
    if let Some(t) = tol {
        if t.is_nan() || t < 0.0 {
            return Err(UsageError::new("tol", "must be nonnegative"));
        }
    }
    let x = text(opts.x, "x")
        .map(|s| parse_vector(&s, "x", "ones"))
        .transpose()?;
    let bias_dist = text(opts.bias_dist, "bias-dist")
        .map(|s| parse_dist(&s, "bias-dist"))
        .transpose()?;
    let bias_scale = opts
        .bias_scale
        .or(file_value(&file, "bias-scale")?)
        .unwrap_or(1.0);
    if !(bias_scale > 0.0 && bias_scale.is_finite()) {
        return Err(UsageError::new("bias-scale", "must be positive"));
    }
    let product_p = parse_probability(
        opts.product_p
            .or(file_value(&file, "product-p")?)
            .unwrap_or(0.5),
        "product-p",
    )?;

    let config = ExperimentConfig {
        command,
        widths,
        p,
        dist,
        u,
        trials,
        seed,
        k,
        out,
        format,
        assert: opts.assert,
        tol,
        x,
        bias_dist,
        bias_scale,
        product_p,
    };
    config.ensemble()?;
    config.unit_vector()?;
    config.input()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<ExperimentConfig, UsageError> {
        let cli =
            Cli::try_parse_from(std::iter::once("matprod").chain(args.iter().copied())).unwrap();
        let (kind, opts) = cli.command.split();
        parse_config(kind, opts)
    }

    #[test]
    fn moments_example() {
        let c = parse(&[
            "moments",
            "--widths",
            "2,2",
            "--p",
            "1",
            "--dist",
            "rademacher",
            "--u",
            "e1",
            "--k",
            "1,2",
        ])
        .unwrap();
        assert_eq!(c.k, vec![1, 2]);
        assert_eq!(c.widths, vec![2, 2]);
        assert_eq!(c.u, VectorSpec::Basis(0));
        assert_eq!(c.dist, DistributionSpec::Rademacher);
        assert_eq!(
            (c.trials, c.seed, c.format.clone()),
            (DEFAULT_TRIALS, 0, Format::Csv)
        );
    }

    #[test]
    fn usage_errors_name_the_flag() {
        assert_eq!(
            parse(&["beta", "--widths", "2,2", "--p", "1.5"])
                .unwrap_err()
                .flag,
            "p"
        );
        assert_eq!(parse(&["beta"]).unwrap_err().flag, "widths");
        assert_eq!(
            parse(&["beta", "--widths", "2,2", "--u", "e3"])
                .unwrap_err()
                .flag,
            "u"
        );
        assert_eq!(
            parse(&["beta", "--widths", "2,2", "--dist", "cauchy"])
                .unwrap_err()
                .flag,
            "dist"
        );
        assert_eq!(
            parse(&["beta", "--widths", "2,2", "--format", "xml"])
                .unwrap_err()
                .flag,
            "format"
        );
    }

    #[test]
    fn width_shorthand() {
        assert_eq!(parse_widths("64x16").unwrap(), vec![64; 17]);
        assert_eq!(parse_widths("8,16x3").unwrap(), vec![8, 16, 16, 16]);
        assert_eq!(parse_widths("3, 4 ,5").unwrap(), vec![3, 4, 5]);
        assert!(parse_widths("4").is_err());
        assert!(parse_widths("4,0").is_err());
        assert!(parse_widths("4,a").is_err());
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "# example\nwidths = 3,3\np = 0.5\nseed = 9\n").unwrap();
        let c = parse(&[
            "simulate",
            "--config",
            path.to_str().unwrap(),
            "--seed",
            "4",
        ])
        .unwrap();
        assert_eq!((c.widths.clone(), c.p, c.seed), (vec![3, 3], 0.5, 4));
        std::fs::write(&path, "colour = red\n").unwrap();
        assert_eq!(
            parse(&["simulate", "--config", path.to_str().unwrap()])
                .unwrap_err()
                .flag,
            "config"
        );
    }
}
