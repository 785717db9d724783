//! Run configuration: `key = value` files merged with command-line flags.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyons::forms::ExtensionParameter;
use anyons::potentials::{Potential, PotentialSpec};
use anyons::Order;
use clap::{Args, ValueEnum};
use serde::{Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

const KNOWN_KEYS: &[&str] = &[
    "alpha",
    "beta",
    "potential",
    "basis_size",
    "basis_scale",
    "lambda",
    "rmax",
    "tolerance",
    "output_format",
    "seed",
    "sectors",
    "alpha_grid",
    "beta_grid",
    "state",
    "suite",
];

/// Parsed `key = value` file. Keys accept `-` or `_`; `#` starts a comment.
#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let mut values = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("config line {}: expected key = value", n + 1))
            })?;
            let mut key = k.trim().replace('-', "_");
            if key == "format" {
                key = "output_format".into();
            }
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::Config(format!(
                    "config line {}: unknown key '{}'",
                    n + 1,
                    k.trim()
                )));
            }
            if values.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(CliError::Config(format!(
                    "config line {}: duplicate key '{key}'",
                    n + 1
                )));
            }
        }
        Ok(Self { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// The flag if given, else the file value parsed as `T`.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> CliResult<Option<T>>
    where
        T::Err: fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.get(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|e| {
                CliError::Config(format!("config key {key}: cannot parse '{v}': {e}"))
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
}

impl FromStr for OutputFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        <Self as ValueEnum>::from_str(s, true)
    }
}

/// `auto` or a positive number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Auto {
    Auto,
    Value(f64),
}

impl Auto {
    pub fn value(self) -> Option<f64> {
        match self {
            Self::Auto => None,
            Self::Value(v) => Some(v),
        }
    }
}

impl FromStr for Auto {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s.trim().eq_ignore_ascii_case("auto") {
            return Ok(Self::Auto);
        }
        let v: f64 = s
            .trim()
            .parse()
            .map_err(|_| format!("expected 'auto' or a number, got '{s}'"))?;
        Ok(Self::Value(v))
    }
}

impl Serialize for Auto {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Self::Auto => s.serialize_str("auto"),
            Self::Value(v) => s.serialize_f64(*v),
        }
    }
}

/// Comma-separated sector indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sectors(pub Vec<i32>);

impl FromStr for Sectors {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let v = s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<i32>()
                    .map_err(|_| format!("bad sector '{t}'"))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if v.is_empty() {
            return Err("no sectors given".into());
        }
        Ok(Self(v))
    }
}

/// Flags shared by the computing subcommands.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// `key = value` file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    /// A real number or `friedrichs`.
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<ExtensionParameter>,
    /// `zero`, `const:value=..`, `well:depth=..,radius=..`, `gauss:amp=..,width=..`,
    /// `power:coeff=..,exponent=..,start=..` or `table:<path>`.
    #[arg(long)]
    pub potential: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub basis_size: Option<usize>,
    /// `auto` or a length.
    #[arg(long, allow_hyphen_values = true)]
    pub basis_scale: Option<Auto>,
    /// `auto` or the defect-function scale.
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<Auto>,
    /// Radial cutoff for state files.
    #[arg(long, allow_hyphen_values = true)]
    pub rmax: Option<f64>,
    /// Relative tolerance of the basis-doubling convergence check.
    #[arg(long, allow_hyphen_values = true)]
    pub tolerance: Option<f64>,
    #[arg(long = "format", value_enum)]
    pub output_format: Option<OutputFormat>,
    #[arg(long, allow_hyphen_values = true)]
    pub seed: Option<u64>,
    /// Comma-separated angular sectors `k` (momentum `2k`).
    #[arg(long, allow_hyphen_values = true)]
    pub sectors: Option<Sectors>,
}

/// A validated configuration. Serialized in field order for hashing.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub alpha: f64,
    pub beta: ExtensionParameter,
    pub potential: String,
    pub basis_size: usize,
    pub basis_scale: Auto,
    pub lambda: Auto,
    pub rmax: f64,
    pub tolerance: f64,
    pub output_format: OutputFormat,
    pub seed: u64,
    pub sectors: Vec<i32>,
}

pub const DEFAULT_BASIS_SIZE: usize = 32;
pub const MAX_BASIS_SIZE: usize = 400;

impl RunConfig {
    pub fn resolve(args: &CommonArgs) -> CliResult<(Self, ConfigFile)> {
        let file = match &args.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        let alpha = file.pick(args.alpha, "alpha")?.ok_or_else(|| {
            CliError::Config("alpha is required (--alpha or config key alpha)".into())
        })?;
        let beta = file
            .pick(args.beta, "beta")?
            .unwrap_or(ExtensionParameter::Friedrichs);
        let cfg = Self {
            alpha,
            beta,
            potential: file
                .pick(args.potential.clone(), "potential")?
                .unwrap_or_else(|| "zero".into()),
            basis_size: file
                .pick(args.basis_size, "basis_size")?
                .unwrap_or(DEFAULT_BASIS_SIZE),
            basis_scale: file
                .pick(args.basis_scale, "basis_scale")?
                .unwrap_or(Auto::Auto),
            lambda: file.pick(args.lambda, "lambda")?.unwrap_or(Auto::Auto),
            rmax: file.pick(args.rmax, "rmax")?.unwrap_or(40.0),
            tolerance: file.pick(args.tolerance, "tolerance")?.unwrap_or(1e-6),
            output_format: file
                .pick(args.output_format, "output_format")?
                .unwrap_or(OutputFormat::Json),
            seed: file.pick(args.seed, "seed")?.unwrap_or(0),
            sectors: file
                .pick(args.sectors.clone(), "sectors")?
                .map(|s| s.0)
                .unwrap_or_else(|| vec![0]),
        };
        cfg.validate()?;
        Ok((cfg, file))
    }

    pub fn validate(&self) -> CliResult<()> {
        self.order()?;
        if let ExtensionParameter::Finite(b) = self.beta {
            if !b.is_finite() {
                return Err(CliError::Config(format!(
                    "beta must be finite or 'friedrichs', got {b}"
                )));
            }
        }
        self.potential()?;
        if !(2..=MAX_BASIS_SIZE).contains(&self.basis_size) {
            return Err(CliError::Config(format!(
                "basis_size must lie in [2, {MAX_BASIS_SIZE}], got {}",
                self.basis_size
            )));
        }
        for (name, v) in [("basis_scale", self.basis_scale), ("lambda", self.lambda)] {
            if let Auto::Value(x) = v {
                if !(x > 0.0 && x.is_finite()) {
                    return Err(CliError::Config(format!(
                        "{name} must be 'auto' or > 0, got {x}"
                    )));
                }
            }
        }
        if !(self.rmax > 0.0 && self.rmax.is_finite()) {
            return Err(CliError::Config(format!(
                "rmax must be > 0, got {}",
                self.rmax
            )));
        }
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(CliError::Config(format!(
                "tolerance must lie in (0, 1), got {}",
                self.tolerance
            )));
        }
        Ok(())
    }

    pub fn order(&self) -> CliResult<Order> {
        Order::new(self.alpha).map_err(|e| CliError::Config(format!("alpha: {e}")))
    }

    pub fn potential(&self) -> CliResult<Potential> {
        let spec = PotentialSpec::parse(&self.potential)
            .map_err(|e| CliError::Config(format!("potential '{}': {e}", self.potential)))?;
        Potential::new(spec)
            .map_err(|e| CliError::Config(format!("potential '{}': {e}", self.potential)))
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        hash_json(self)
    }
}

pub fn hash_json<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("configuration serializes");
    Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// `lo:hi:n` (inclusive, evenly spaced) or a comma-separated list.
pub fn parse_grid(text: &str) -> CliResult<Vec<f64>> {
    let bad = |m: String| CliError::Config(format!("grid '{text}': {m}"));
    let parts: Vec<&str> = text.split(':').collect();
    let values = if parts.len() == 3 {
        let lo: f64 = parts[0]
            .trim()
            .parse()
            .map_err(|_| bad("bad lower end".into()))?;
        let hi: f64 = parts[1]
            .trim()
            .parse()
            .map_err(|_| bad("bad upper end".into()))?;
        let n: usize = parts[2]
            .trim()
            .parse()
            .map_err(|_| bad("bad count".into()))?;
        match n {
            0 => return Err(bad("count must be >= 1".into())),
            1 => vec![lo],
            _ => (0..n)
                .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    } else if parts.len() == 1 {
        text.split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| bad(format!("bad value '{t}'")))
            })
            .collect::<CliResult<Vec<_>>>()?
    } else {
        return Err(bad("expected lo:hi:n or a comma-separated list".into()));
    };
    if values.iter().any(|v| !v.is_finite()) {
        return Err(bad("values must be finite".into()));
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_parsing() {
        let f = ConfigFile::parse("alpha = 0.5\n# comment\nbasis-size=16 # trailing\n").unwrap();
        assert_eq!(f.get("alpha"), Some("0.5"));
        assert_eq!(f.get("basis_size"), Some("16"));
        assert!(ConfigFile::parse("colour = red").is_err());
        assert!(ConfigFile::parse("alpha").is_err());
        assert!(ConfigFile::parse("alpha=1\nalpha=2").is_err());
    }

    #[test]
    fn flags_override_file() {
        let f = ConfigFile::parse("alpha = 0.5").unwrap();
        assert_eq!(f.pick(Some(0.3), "alpha").unwrap(), Some(0.3));
        assert_eq!(f.pick::<f64>(None, "alpha").unwrap(), Some(0.5));
        assert_eq!(f.pick::<f64>(None, "lambda").unwrap(), None);
    }

    #[test]
    fn grids() {
        assert_eq!(parse_grid("0.25:0.75:3").unwrap(), vec![0.25, 0.5, 0.75]);
        assert_eq!(parse_grid("-5,-1,1").unwrap(), vec![-5.0, -1.0, 1.0]);
        assert_eq!(parse_grid("2:9:1").unwrap(), vec![2.0]);
        assert!(parse_grid("1:2").is_err());
        assert!(parse_grid("1:2:0").is_err());
    }

    #[test]
    fn hash_is_stable() {
        let args = CommonArgs {
            alpha: Some(0.5),
            ..Default::default()
        };
        let (a, _) = RunConfig::resolve(&args).unwrap();
        let (b, _) = RunConfig::resolve(&args).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        let (c, _) = RunConfig::resolve(&CommonArgs {
            alpha: Some(0.4),
            ..Default::default()
        })
        .unwrap();
        assert_ne!(a.hash(), c.hash());
    }
}
