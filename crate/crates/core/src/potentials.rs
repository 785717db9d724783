//! Radial interaction potentials.
//!
//! A potential is admissible when its negative part is bounded and its
//! positive part is bounded near the origin and locally square integrable.
//! [`Potential::new`] checks these clauses once and caches
//! `V0 = sup V_-`; the validated value is immutable afterwards.
//!
//! Mini-language accepted by [`PotentialSpec::parse`]:
//!
//! ```text
//! zero
//! const:value=<f>
//! well:depth=<f>,radius=<f>
//! gauss:amp=<f>,width=<f>
//! power:coeff=<f>,exponent=<f>[,start=<f>]
//! table:<path>            # two columns `r,V`, one header line
//! ```

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

pub const DEFAULT_EPSILON: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialKind {
    Zero,
    Constant {
        value: f64,
    },
    /// `-depth` on `[0, radius)`, zero outside.
    FiniteWell {
        depth: f64,
        radius: f64,
    },
    /// `amplitude exp(-(r/width)^2)`.
    Gaussian {
        amplitude: f64,
        width: f64,
    },
    /// `coeff r^exponent` on `[support_start, inf)`, zero before.
    PowerBarrier {
        coeff: f64,
        exponent: f64,
        support_start: f64,
    },
    /// Piecewise-linear through `(r, V)` nodes.
    Tabulated {
        nodes: Vec<(f64, f64)>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    /// Neighbourhood of the origin on which `V_+` must be bounded.
    pub epsilon: f64,
}

impl PotentialSpec {
    pub fn new(kind: PotentialKind) -> Self {
        Self {
            kind,
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn zero() -> Self {
        Self::new(PotentialKind::Zero)
    }

    pub fn finite_well(depth: f64, radius: f64) -> Self {
        Self::new(PotentialKind::FiniteWell { depth, radius })
    }

    pub fn gaussian(amplitude: f64, width: f64) -> Self {
        Self::new(PotentialKind::Gaussian { amplitude, width })
    }

    pub fn power_barrier(coeff: f64, exponent: f64, support_start: f64) -> Self {
        Self::new(PotentialKind::PowerBarrier {
            coeff,
            exponent,
            support_start,
        })
    }

    pub fn tabulated(nodes: Vec<(f64, f64)>) -> Self {
        Self::new(PotentialKind::Tabulated { nodes })
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    /// Parses the mini-language. Relative table paths are taken as given.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let (head, rest) = match text.split_once(':') {
            Some((h, r)) => (h.trim(), r.trim()),
            None => (text, ""),
        };
        let kind = match head {
            "zero" if rest.is_empty() => PotentialKind::Zero,
            "const" => {
                let mut p = Params::parse(rest)?;
                let k = PotentialKind::Constant {
                    value: p.take("value")?,
                };
                p.finish()?;
                k
            }
            "well" => {
                let mut p = Params::parse(rest)?;
                let k = PotentialKind::FiniteWell {
                    depth: p.take("depth")?,
                    radius: p.take("radius")?,
                };
                p.finish()?;
                k
            }
            "gauss" => {
                let mut p = Params::parse(rest)?;
                let k = PotentialKind::Gaussian {
                    amplitude: p.take("amp")?,
                    width: p.take("width")?,
                };
                p.finish()?;
                k
            }
            "power" => {
                let mut p = Params::parse(rest)?;
                let k = PotentialKind::PowerBarrier {
                    coeff: p.take("coeff")?,
                    exponent: p.take("exponent")?,
                    support_start: p.take_or("start", 0.0)?,
                };
                p.finish()?;
                k
            }
            "table" if !rest.is_empty() => PotentialKind::Tabulated {
                nodes: read_table(Path::new(rest))?,
            },
            _ => return Err(Error::Parse(format!("unknown potential `{text}`"))),
        };
        Ok(Self::new(kind))
    }
}

struct Params(Vec<(String, String)>);

impl Params {
    fn parse(text: &str) -> Result<Self> {
        let mut out = Vec::new();
        for item in text.split(',').filter(|s| !s.trim().is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value, got `{item}`")))?;
            out.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(Self(out))
    }

    fn take_opt(&mut self, key: &str) -> Result<Option<f64>> {
        match self.0.iter().position(|(k, _)| k == key) {
            None => Ok(None),
            Some(i) => {
                let (_, v) = self.0.remove(i);
                v.parse()
                    .map(Some)
                    .map_err(|_| Error::Parse(format!("`{key}` is not a number: `{v}`")))
            }
        }
    }

    fn take(&mut self, key: &str) -> Result<f64> {
        self.take_opt(key)?
            .ok_or_else(|| Error::Parse(format!("missing `{key}`")))
    }

    fn take_or(&mut self, key: &str, default: f64) -> Result<f64> {
        Ok(self.take_opt(key)?.unwrap_or(default))
    }

    fn finish(self) -> Result<()> {
        match self.0.first() {
            Some((k, _)) => Err(Error::Parse(format!("unexpected parameter `{k}`"))),
            None => Ok(()),
        }
    }
}

/// Reads a two-column `r,V` file with one header line.
pub fn read_table(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("cannot read {}: {e}", path.display())))?;
    parse_table(&text)
}

pub fn parse_table(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut nodes = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut cols = line.split(',').map(str::trim);
        let mut num = |name: &str| -> Result<f64> {
            cols.next()
                .and_then(|c| c.parse().ok())
                .ok_or_else(|| Error::Parse(format!("line {}: bad {name} column", i + 1)))
        };
        let r = num("r")?;
        let v = num("V")?;
        if cols.next().is_some() {
            return Err(Error::Parse(format!(
                "line {}: expected two columns",
                i + 1
            )));
        }
        nodes.push((r, v));
    }
    Ok(nodes)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub v0: f64,
    pub epsilon: f64,
    /// `sup_{[0, epsilon)} V_+`.
    pub positive_bound_near_origin: f64,
}

/// A potential that satisfies the admissibility clauses.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Potential {
    spec: PotentialSpec,
    report: ValidationReport,
}

fn violation(clause: &str, detail: String) -> Error {
    Error::AssumptionViolation {
        clause: clause.into(),
        detail,
    }
}

fn require(cond: bool, what: String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Domain(what))
    }
}

impl Potential {
    pub fn new(spec: PotentialSpec) -> Result<Self> {
        let report = validate(&spec)?;
        Ok(Self { spec, report })
    }

    pub fn zero() -> Self {
        Self::new(PotentialSpec::zero()).expect("zero potential is admissible")
    }

    pub fn spec(&self) -> &PotentialSpec {
        &self.spec
    }

    pub fn report(&self) -> &ValidationReport {
        &self.report
    }

    /// `sup V_-`.
    pub fn v0(&self) -> f64 {
        self.report.v0
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.spec.kind, PotentialKind::Zero)
    }

    /// Radii where `V` or its derivative jumps; quadrature panels split here.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.spec.kind {
            PotentialKind::FiniteWell { radius, .. } => vec![*radius],
            PotentialKind::PowerBarrier { support_start, .. } if *support_start > 0.0 => {
                vec![*support_start]
            }
            PotentialKind::Tabulated { nodes } => {
                nodes.iter().map(|n| n.0).filter(|&r| r > 0.0).collect()
            }
            _ => Vec::new(),
        }
    }

    /// `V(r)` for `r > 0`.
    pub fn eval(&self, r: f64) -> Result<f64> {
        if r.is_nan() || r <= 0.0 {
            return Err(Error::Domain(format!("potential needs r > 0, got {r}")));
        }
        Ok(match &self.spec.kind {
            PotentialKind::Zero => 0.0,
            PotentialKind::Constant { value } => *value,
            PotentialKind::FiniteWell { depth, radius } => {
                if r < *radius {
                    -depth
                } else {
                    0.0
                }
            }
            PotentialKind::Gaussian { amplitude, width } => {
                amplitude * (-(r / width).powi(2)).exp()
            }
            PotentialKind::PowerBarrier {
                coeff,
                exponent,
                support_start,
            } => {
                if r < *support_start {
                    0.0
                } else {
                    coeff * r.powf(*exponent)
                }
            }
            PotentialKind::Tabulated { nodes } => interpolate(nodes, r)?,
        })
    }
}

fn interpolate(nodes: &[(f64, f64)], r: f64) -> Result<f64> {
    let (first, last) = (nodes[0], nodes[nodes.len() - 1]);
    if r <= first.0 {
        // the table starts at or after the origin; hold the first value
        return Ok(first.1);
    }
    if r >= last.0 {
        if last.1 == 0.0 {
            return Ok(0.0);
        }
        return Err(Error::Extrapolation {
            r,
            detail: format!(
                "beyond the last node {} where V = {} is not zero",
                last.0, last.1
            ),
        });
    }
    let i = nodes.partition_point(|n| n.0 <= r);
    let (r0, v0) = nodes[i - 1];
    let (r1, v1) = nodes[i];
    Ok(v0 + (v1 - v0) * (r - r0) / (r1 - r0))
}

/// Checks the admissibility clauses and computes `V0`.
pub fn validate(spec: &PotentialSpec) -> Result<ValidationReport> {
    let eps = spec.epsilon;
    require(
        eps > 0.0 && eps.is_finite(),
        format!("epsilon must be > 0, got {eps}"),
    )?;
    let finite =
        |x: f64, name: &str| require(x.is_finite(), format!("{name} must be finite, got {x}"));
    let (v0, pos) = match &spec.kind {
        PotentialKind::Zero => (0.0, 0.0),
        PotentialKind::Constant { value } => {
            finite(*value, "value")?;
            (value.min(0.0).abs(), value.max(0.0))
        }
        PotentialKind::FiniteWell { depth, radius } => {
            finite(*depth, "depth")?;
            require(
                *radius > 0.0 && radius.is_finite(),
                format!("radius must be > 0, got {radius}"),
            )?;
            (depth.max(0.0), (-depth).max(0.0))
        }
        PotentialKind::Gaussian { amplitude, width } => {
            finite(*amplitude, "amplitude")?;
            require(
                *width > 0.0 && width.is_finite(),
                format!("width must be > 0, got {width}"),
            )?;
            (amplitude.min(0.0).abs(), amplitude.max(0.0))
        }
        PotentialKind::PowerBarrier {
            coeff,
            exponent,
            support_start,
        } => {
            require(
                *coeff > 0.0 && coeff.is_finite(),
                format!("coeff must be > 0, got {coeff}"),
            )?;
            require(
                *exponent > -1.0 && *exponent < 0.0,
                format!("exponent must lie in (-1, 0), got {exponent}"),
            )?;
            require(
                *support_start >= 0.0 && support_start.is_finite(),
                format!("support start must be >= 0, got {support_start}"),
            )?;
            if *support_start == 0.0 {
                return Err(violation(
                    "V+ bounded on [0, epsilon)",
                    format!("r^{exponent} is unbounded at the origin"),
                ));
            }
            // r^{exponent} is decreasing, so its largest value is at the support start
            (
                0.0,
                if *support_start < eps {
                    coeff * support_start.powf(*exponent)
                } else {
                    0.0
                },
            )
        }
        PotentialKind::Tabulated { nodes } => {
            require(nodes.len() >= 2, "a table needs at least two nodes".into())?;
            for &(r, v) in nodes {
                finite(r, "node radius")?;
                finite(v, "node value")?;
            }
            require(
                nodes[0].0 >= 0.0,
                format!("node radii must be >= 0, got {}", nodes[0].0),
            )?;
            if let Some(w) = nodes.windows(2).find(|w| w[1].0 <= w[0].0) {
                return Err(Error::Domain(format!(
                    "node radii must be strictly increasing ({} then {})",
                    w[0].0, w[1].0
                )));
            }
            let v0 = nodes.iter().map(|n| (-n.1).max(0.0)).fold(0.0, f64::max);
            // linear pieces attain their extremes at nodes; the first value
            // covers [0, first node)
            let mut pos = nodes[0].1.max(0.0);
            for w in nodes.windows(2) {
                if w[0].0 < eps {
                    pos = pos.max(w[0].1).max(w[1].1);
                }
            }
            (v0, pos)
        }
    };
    Ok(ValidationReport {
        v0,
        epsilon: eps,
        positive_bound_near_origin: pos,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finite_well() {
        let v = Potential::new(PotentialSpec::finite_well(5.0, 1.0)).unwrap();
        assert_eq!(v.v0(), 5.0);
        assert_eq!(v.eval(0.5).unwrap(), -5.0);
        assert_eq!(v.eval(2.0).unwrap(), 0.0);
        assert_eq!(v.breakpoints(), vec![1.0]);
    }

    #[test]
    fn zero_and_constant() {
        let v = Potential::zero();
        assert_eq!(v.v0(), 0.0);
        assert!(v.is_zero());
        let c =
            Potential::new(PotentialSpec::new(PotentialKind::Constant { value: -2.0 })).unwrap();
        assert_eq!(c.v0(), 2.0);
        assert_eq!(c.eval(123.0).unwrap(), -2.0);
    }

    #[test]
    fn gaussian() {
        let g = Potential::new(PotentialSpec::gaussian(-3.0, 2.0)).unwrap();
        assert_eq!(g.v0(), 3.0);
        assert!((g.eval(2.0).unwrap() + 3.0 / std::f64::consts::E).abs() < 1e-15);
        let g = Potential::new(PotentialSpec::gaussian(3.0, 2.0)).unwrap();
        assert_eq!(g.v0(), 0.0);
    }

    #[test]
    fn power_barrier_at_origin_is_rejected() {
        let err = Potential::new(PotentialSpec::power_barrier(1.0, -0.8, 0.0)).unwrap_err();
        match err {
            Error::AssumptionViolation { clause, .. } => assert!(clause.contains("[0, epsilon)")),
            e => panic!("{e:?}"),
        }
        let v = Potential::new(PotentialSpec::power_barrier(1.0, -0.8, 0.05)).unwrap();
        assert_eq!(v.v0(), 0.0);
        assert_eq!(v.eval(0.01).unwrap(), 0.0);
        assert!((v.eval(1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(Potential::new(PotentialSpec::power_barrier(1.0, -1.2, 0.5)).is_err());
        assert!(Potential::new(PotentialSpec::power_barrier(-1.0, -0.5, 0.5)).is_err());
    }

    #[test]
    fn tabulated() {
        let v = Potential::new(PotentialSpec::tabulated(vec![
            (0.0, -1.0),
            (1.0, -3.0),
            (2.0, 0.0),
        ]))
        .unwrap();
        assert_eq!(v.v0(), 3.0);
        assert!((v.eval(0.5).unwrap() + 2.0).abs() < 1e-15);
        assert!((v.eval(1.5).unwrap() + 1.5).abs() < 1e-15);
        assert_eq!(v.eval(10.0).unwrap(), 0.0);

        let open = Potential::new(PotentialSpec::tabulated(vec![(0.5, 2.0), (1.0, 1.0)])).unwrap();
        assert_eq!(open.eval(0.1).unwrap(), 2.0);
        assert!(matches!(open.eval(1.5), Err(Error::Extrapolation { .. })));

        assert!(Potential::new(PotentialSpec::tabulated(vec![(1.0, 0.0), (1.0, 0.0)])).is_err());
        assert!(Potential::new(PotentialSpec::tabulated(vec![(-1.0, 0.0), (1.0, 0.0)])).is_err());
        assert!(Potential::new(PotentialSpec::tabulated(vec![(1.0, 0.0)])).is_err());
    }

    #[test]
    fn parse_mini_language() {
        assert_eq!(PotentialSpec::parse("zero").unwrap(), PotentialSpec::zero());
        assert_eq!(
            PotentialSpec::parse("well:depth=1,radius=2.5").unwrap(),
            PotentialSpec::finite_well(1.0, 2.5)
        );
        assert_eq!(
            PotentialSpec::parse("gauss: amp=-2, width=0.5").unwrap(),
            PotentialSpec::gaussian(-2.0, 0.5)
        );
        assert_eq!(
            PotentialSpec::parse("power:coeff=1,exponent=-0.5,start=0.2").unwrap(),
            PotentialSpec::power_barrier(1.0, -0.5, 0.2)
        );
        for bad in [
            "well:depth=1",
            "well:depth=x,radius=1",
            "gauss:amp=1,width=1,z=2",
            "wel",
            "table:",
        ] {
            assert!(
                matches!(PotentialSpec::parse(bad), Err(Error::Parse(_))),
                "{bad}"
            );
        }
    }

    #[test]
    fn table_text() {
        let nodes = parse_table("r,V\n0,-1\n1, -3\n\n2,0\n").unwrap();
        assert_eq!(nodes, vec![(0.0, -1.0), (1.0, -3.0), (2.0, 0.0)]);
        assert!(parse_table("r,V\n0,1,2\n").is_err());
        assert!(parse_table("r,V\n0\n").is_err());
    }

    #[test]
    fn eval_domain() {
        assert!(Potential::zero().eval(0.0).is_err());
        assert!(Potential::new(PotentialSpec::zero().with_epsilon(0.0)).is_err());
    }
}
