//! Flat `key=value` run configuration.
//!
//! One pair per line, `#` starts a comment, blank lines are ignored. A
//! repeated key keeps its last value and produces a warning. Command-line
//! flags go through the same setter as file lines, after the file.

use std::fmt;
use std::path::PathBuf;

use mixed_cournot::dynamics::{InitialPolicy, SweepSpec};
use mixed_cournot::{DelayConfig, MarketParams};

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumWhich {
    Full,
    Reduced,
    Boundary,
    NoPublicFirm,
}

impl SpectrumWhich {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "full" | "positive" => SpectrumWhich::Full,
            "reduced" => SpectrumWhich::Reduced,
            "boundary" => SpectrumWhich::Boundary,
            "no-public-firm" => SpectrumWhich::NoPublicFirm,
            _ => return None,
        })
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SpectrumWhich::Full => "full",
            SpectrumWhich::Reduced => "reduced",
            SpectrumWhich::Boundary => "boundary",
            SpectrumWhich::NoPublicFirm => "no-public-firm",
        }
    }
}

/// Every accepted key with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("n", "number of private firms"),
    ("delta", "product differentiation, in (0, 1)"),
    ("alpha", "adjustment speed of the public firm"),
    ("b", "demand slope"),
    ("a0", "public intercept gap a - c0"),
    ("a1", "private intercept gap a - c"),
    ("a", "demand intercept"),
    ("c0", "public marginal cost"),
    ("c", "private marginal cost"),
    ("tau0", "delay with which private firms see the public output"),
    ("tau1", "delay with which the public firm sees private outputs"),
    ("tau2", "delay with which private firms see each other"),
    ("alpha_min", "lower end of the alpha range"),
    ("alpha_max", "upper end of the alpha range"),
    ("alpha_points", "alpha grid size"),
    ("delta_min", "lower end of the delta grid"),
    ("delta_max", "upper end of the delta grid"),
    ("delta_points", "delta grid size"),
    ("transient", "discarded iterations before sampling"),
    ("samples", "recorded iterations"),
    ("steps", "iterations for simulate"),
    ("lle_transient", "discarded iterations of the Lyapunov estimate"),
    ("lle_iterations", "total iterations of the Lyapunov estimate"),
    ("renormalization", "tangent renormalization interval"),
    (
        "perturbation",
        "offset added to the public output of the starting history",
    ),
    ("policy", "initial history per alpha: fresh or continued"),
    ("blowup", "divergence bound on |q|"),
    ("period_tol", "recurrence tolerance for attractor typing"),
    ("theta_points", "angle grid size for the Neimark-Sacker scan"),
    ("which", "spectrum: full, reduced, boundary or no-public-firm"),
    ("workers", "worker threads for sweeps (0: all cores)"),
    ("out", "output file (default: stdout)"),
];

/// Keys left out of output headers: they do not affect results.
const UNECHOED: &[&str] = &["workers", "out"];

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub n: Option<usize>,
    pub delta: Option<f64>,
    pub alpha: Option<f64>,
    pub b: Option<f64>,
    pub a0: Option<f64>,
    pub a1: Option<f64>,
    pub a: Option<f64>,
    pub c0: Option<f64>,
    pub c: Option<f64>,
    pub tau0: usize,
    pub tau1: usize,
    pub tau2: usize,
    pub alpha_min: Option<f64>,
    pub alpha_max: Option<f64>,
    pub alpha_points: usize,
    pub delta_min: f64,
    pub delta_max: f64,
    pub delta_points: usize,
    pub transient: usize,
    pub samples: usize,
    pub steps: usize,
    pub lle_transient: usize,
    pub lle_iterations: usize,
    pub renormalization: usize,
    pub perturbation: f64,
    pub policy: InitialPolicy,
    pub blowup: f64,
    pub period_tol: f64,
    pub theta_points: usize,
    pub which: SpectrumWhich,
    pub workers: usize,
    pub out: Option<PathBuf>,
    /// Line count of the source file, for missing-key messages.
    lines: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n: None,
            delta: None,
            alpha: None,
            b: None,
            a0: None,
            a1: None,
            a: None,
            c0: None,
            c: None,
            tau0: 0,
            tau1: 0,
            tau2: 0,
            alpha_min: None,
            alpha_max: None,
            alpha_points: 200,
            delta_min: 0.01,
            delta_max: 0.99,
            delta_points: 99,
            transient: 2000,
            samples: 200,
            steps: 1000,
            lle_transient: 1000,
            lle_iterations: 20000,
            renormalization: 1,
            perturbation: 1e-2,
            policy: InitialPolicy::FreshPerturbed,
            blowup: 1e6,
            period_tol: 1e-6,
            theta_points: 4096,
            which: SpectrumWhich::Full,
            workers: 0,
            out: None,
            lines: 0,
        }
    }
}

/// Two configurations are equal when their effective entries are.
impl PartialEq for RunConfig {
    fn eq(&self, other: &Self) -> bool {
        self.entries() == other.entries()
    }
}

/// Where a bad value came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    Line(usize),
    Flag,
    Derived,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    Syntax {
        line: usize,
        text: String,
    },
    UnknownKey {
        origin: Origin,
        key: String,
    },
    Malformed {
        origin: Origin,
        key: String,
        value: String,
        reason: String,
    },
    MissingKey {
        key: String,
        lines: usize,
    },
    Inconsistent(String),
    Io(String),
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Line(l) => write!(f, "line {l}"),
            Origin::Flag => f.write_str("command line"),
            Origin::Derived => f.write_str("configuration"),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Syntax { line, text } => write!(f, "line {line}: expected key=value, got `{text}`"),
            ConfigError::UnknownKey { origin, key } => write!(f, "{origin}: unknown key `{key}`"),
            ConfigError::Malformed {
                origin,
                key,
                value,
                reason,
            } => write!(f, "{origin}: bad value `{value}` for `{key}`: {reason}"),
            ConfigError::MissingKey { key, lines } => {
                write!(f, "line {}: missing required key `{key}`", lines + 1)
            }
            ConfigError::Inconsistent(m) => write!(f, "inconsistent configuration: {m}"),
            ConfigError::Io(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for ConfigError {}

fn parse_f64(value: &str) -> Result<f64, String> {
    let x: f64 = value.parse().map_err(|_| "not a number".to_string())?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err("must be finite".into())
    }
}

fn parse_usize(value: &str) -> Result<usize, String> {
    value.parse().map_err(|_| "not a nonnegative integer".to_string())
}

fn positive(x: f64) -> Result<f64, String> {
    if x > 0.0 {
        Ok(x)
    } else {
        Err("must be positive".into())
    }
}

fn at_least(k: usize, min: usize) -> Result<usize, String> {
    if k >= min {
        Ok(k)
    } else {
        Err(format!("must be at least {min}"))
    }
}

fn open_unit(x: f64) -> Result<f64, String> {
    if x > 0.0 && x < 1.0 {
        Ok(x)
    } else {
        Err("must lie in (0, 1)".into())
    }
}

impl RunConfig {
    /// Sets one key from its text form, checking the value's own range.
    pub fn set(&mut self, key: &str, value: &str, origin: Origin) -> Result<(), ConfigError> {
        let value = value.trim();
        let bad = |reason: String| ConfigError::Malformed {
            origin: origin.clone(),
            key: key.to_string(),
            value: value.to_string(),
            reason,
        };
        let f = || parse_f64(value).map_err(bad);
        let u = || parse_usize(value).map_err(bad);
        match key {
            "n" => self.n = Some(at_least(u()?, 1).map_err(bad)?),
            "delta" => self.delta = Some(open_unit(f()?).map_err(bad)?),
            "alpha" => {
                let x = f()?;
                if x < 0.0 {
                    return Err(bad("must be nonnegative".into()));
                }
                self.alpha = Some(x)
            }
            "b" => self.b = Some(positive(f()?).map_err(bad)?),
            "a0" => self.a0 = Some(positive(f()?).map_err(bad)?),
            "a1" => self.a1 = Some(positive(f()?).map_err(bad)?),
            "a" => self.a = Some(f()?),
            "c0" => self.c0 = Some(f()?),
            "c" => self.c = Some(f()?),
            "tau0" => self.tau0 = u()?,
            "tau1" => self.tau1 = u()?,
            "tau2" => self.tau2 = u()?,
            "alpha_min" => self.alpha_min = Some(f()?),
            "alpha_max" => self.alpha_max = Some(f()?),
            "alpha_points" => self.alpha_points = at_least(u()?, 2).map_err(bad)?,
            "delta_min" => self.delta_min = open_unit(f()?).map_err(bad)?,
            "delta_max" => self.delta_max = open_unit(f()?).map_err(bad)?,
            "delta_points" => self.delta_points = at_least(u()?, 1).map_err(bad)?,
            "transient" => self.transient = at_least(u()?, 1).map_err(bad)?,
            "samples" => self.samples = at_least(u()?, 1).map_err(bad)?,
            "steps" => self.steps = at_least(u()?, 1).map_err(bad)?,
            "lle_transient" => self.lle_transient = u()?,
            "lle_iterations" => self.lle_iterations = at_least(u()?, 1).map_err(bad)?,
            "renormalization" => self.renormalization = at_least(u()?, 1).map_err(bad)?,
            "perturbation" => self.perturbation = f()?,
            "policy" => {
                self.policy = match value {
                    "fresh" => InitialPolicy::FreshPerturbed,
                    "continued" => InitialPolicy::Continued,
                    _ => return Err(bad("expected `fresh` or `continued`".into())),
                }
            }
            "blowup" => self.blowup = positive(f()?).map_err(bad)?,
            "period_tol" => self.period_tol = positive(f()?).map_err(bad)?,
            "theta_points" => self.theta_points = at_least(u()?, 2).map_err(bad)?,
            "which" => {
                self.which = SpectrumWhich::parse(value)
                    .ok_or_else(|| bad("expected full, reduced, boundary or no-public-firm".into()))?
            }
            "workers" => self.workers = u()?,
            "out" => self.out = Some(PathBuf::from(value)),
            _ => {
                return Err(ConfigError::UnknownKey {
                    origin,
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    /// All set keys with their effective values, in [`KEYS`] order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let mut put = |k: &'static str, v: Option<String>| {
            if let Some(v) = v {
                out.push((k, v));
            }
        };
        let s = |x: f64| Some(x.to_string());
        put("n", self.n.map(|x| x.to_string()));
        put("delta", self.delta.and_then(s));
        put("alpha", self.alpha.and_then(s));
        put("b", self.b.and_then(s));
        put("a0", self.a0.and_then(s));
        put("a1", self.a1.and_then(s));
        put("a", self.a.and_then(s));
        put("c0", self.c0.and_then(s));
        put("c", self.c.and_then(s));
        put("tau0", Some(self.tau0.to_string()));
        put("tau1", Some(self.tau1.to_string()));
        put("tau2", Some(self.tau2.to_string()));
        put("alpha_min", self.alpha_min.and_then(s));
        put("alpha_max", self.alpha_max.and_then(s));
        put("alpha_points", Some(self.alpha_points.to_string()));
        put("delta_min", s(self.delta_min));
        put("delta_max", s(self.delta_max));
        put("delta_points", Some(self.delta_points.to_string()));
        put("transient", Some(self.transient.to_string()));
        put("samples", Some(self.samples.to_string()));
        put("steps", Some(self.steps.to_string()));
        put("lle_transient", Some(self.lle_transient.to_string()));
        put("lle_iterations", Some(self.lle_iterations.to_string()));
        put("renormalization", Some(self.renormalization.to_string()));
        put("perturbation", s(self.perturbation));
        put(
            "policy",
            Some(
                match self.policy {
                    InitialPolicy::FreshPerturbed => "fresh",
                    InitialPolicy::Continued => "continued",
                }
                .to_string(),
            ),
        );
        put("blowup", s(self.blowup));
        put("period_tol", s(self.period_tol));
        put("theta_points", Some(self.theta_points.to_string()));
        put("which", Some(self.which.as_str().to_string()));
        put("workers", Some(self.workers.to_string()));
        put("out", self.out.as_ref().map(|p| p.display().to_string()));
        out
    }

    /// Entries that go into output headers.
    pub fn echoed(&self) -> Vec<(&'static str, String)> {
        self.entries()
            .into_iter()
            .filter(|(k, _)| !UNECHOED.contains(k))
            .collect()
    }

    /// The configuration in file form; [`parse_config`] reads it back unchanged.
    pub fn emit(&self) -> String {
        self.entries().iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn delays(&self) -> DelayConfig {
        DelayConfig::new(self.tau0, self.tau1, self.tau2)
    }

    fn require<T: Copy>(&self, key: &str, v: Option<T>) -> Result<T, ConfigError> {
        v.ok_or_else(|| ConfigError::MissingKey {
            key: key.to_string(),
            lines: self.lines,
        })
    }

    /// Market parameters from either `(a0, a1)` or `(a, c0, c)`; if both
    /// are given they must agree to `1e-12`. Without `alpha` the speed is 1.
    pub fn market(&self) -> Result<MarketParams, Failure> {
        let n = self.require("n", self.n)?;
        let delta = self.require("delta", self.delta)?;
        let b = self.require("b", self.b)?;
        let alpha = self.alpha.unwrap_or(1.0);
        if [self.a, self.c0, self.c].iter().any(Option::is_some) {
            let a = self.require("a", self.a)?;
            let c0 = self.require("c0", self.c0)?;
            let c = self.require("c", self.c)?;
            let p = MarketParams::from_primitives(a, c0, c, b, delta, alpha, n)?;
            for (key, given, derived) in [("a0", self.a0, p.a0()), ("a1", self.a1, p.a1())] {
                if let Some(g) = given {
                    if (g - derived).abs() > 1e-12 {
                        return Err(
                            ConfigError::Inconsistent(format!("{key}={g} but a - cost gives {derived}")).into(),
                        );
                    }
                }
            }
            Ok(p)
        } else {
            let a0 = self.require("a0", self.a0)?;
            let a1 = self.require("a1", self.a1)?;
            Ok(MarketParams::from_intercepts(a0, a1, b, delta, alpha, n)?)
        }
    }

    pub fn alpha(&self) -> Result<f64, ConfigError> {
        self.require("alpha", self.alpha)
    }

    pub fn alpha_range(&self) -> Result<(f64, f64), ConfigError> {
        let lo = self.require("alpha_min", self.alpha_min)?;
        let hi = self.require("alpha_max", self.alpha_max)?;
        if !(lo >= 0.0 && hi > lo) {
            return Err(ConfigError::Malformed {
                origin: Origin::Derived,
                key: "alpha_max".into(),
                value: hi.to_string(),
                reason: format!("need 0 <= alpha_min < alpha_max, got [{lo}, {hi}]"),
            });
        }
        Ok((lo, hi))
    }

    pub fn sweep(&self) -> Result<SweepSpec, ConfigError> {
        let (lo, hi) = self.alpha_range()?;
        Ok(SweepSpec {
            transient: self.transient,
            samples: self.samples,
            policy: self.policy,
            perturbation: self.perturbation,
            lle_transient: self.lle_transient,
            lle_iterations: self.lle_iterations,
            blowup: self.blowup,
            period_tol: self.period_tol,
            ..SweepSpec::new(lo, hi, self.alpha_points)
        })
    }

    pub fn delta_grid(&self) -> Vec<f64> {
        if self.delta_points == 1 {
            return vec![self.delta_min];
        }
        let k = (self.delta_points - 1) as f64;
        (0..self.delta_points)
            .map(|i| {
                if i + 1 == self.delta_points {
                    self.delta_max
                } else {
                    self.delta_min + (self.delta_max - self.delta_min) * i as f64 / k
                }
            })
            .collect()
    }
}

/// Parsed file plus the warnings it produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed {
    pub config: RunConfig,
    pub warnings: Vec<String>,
}

pub fn parse_config(text: &str) -> Result<Parsed, ConfigError> {
    let mut config = RunConfig::default();
    let mut warnings = Vec::new();
    let mut seen: Vec<(String, usize)> = Vec::new();
    let mut lines = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        lines = line;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ConfigError::Syntax {
                line,
                text: raw.to_string(),
            });
        };
        let key = key.trim();
        config.set(key, value, Origin::Line(line))?;
        if let Some((_, first)) = seen.iter().find(|(k, _)| k == key) {
            warnings.push(format!(
                "line {line}: `{key}` already set on line {first}; the later value wins"
            ));
        } else {
            seen.push((key.to_string(), line));
        }
    }
    config.lines = lines;
    Ok(Parsed { config, warnings })
}

pub fn read_config(path: &std::path::Path) -> Result<Parsed, ConfigError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SECTION4: &str = "n=4\ndelta=0.4\nalpha=1.0\na0=2\na1=2.5\nb=1\n";

    #[test]
    fn parses_the_reference_set() {
        let c = parse_config(SECTION4).unwrap().config;
        let p = c.market().unwrap();
        assert_eq!(
            (p.n(), p.delta(), p.alpha(), p.a0(), p.a1(), p.b()),
            (4, 0.4, 1.0, 2.0, 2.5, 1.0)
        );
    }

    #[test]
    fn comments_and_blank_lines() {
        let c = parse_config("# header\n\nn = 3 # trailing\n").unwrap().config;
        assert_eq!(c.n, Some(3));
    }

    #[test]
    fn duplicate_key_last_wins() {
        let parsed = parse_config("n=4\nn=5\n").unwrap();
        assert_eq!(parsed.config.n, Some(5));
        assert_eq!(parsed.warnings.len(), 1);
        assert!(parsed.warnings[0].contains("line 2"));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse_config("n=4\nfoo=1\n").unwrap_err();
        assert_eq!(
            e,
            ConfigError::UnknownKey {
                origin: Origin::Line(2),
                key: "foo".into()
            }
        );
        let e = parse_config("n=4\n\ndelta=abc\n").unwrap_err();
        assert!(e.to_string().starts_with("line 3:"), "{e}");
        let e = parse_config("delta=1.2\n").unwrap_err();
        assert!(matches!(
            e,
            ConfigError::Malformed {
                origin: Origin::Line(1),
                ..
            }
        ));
        let e = parse_config("n 4\n").unwrap_err();
        assert!(matches!(e, ConfigError::Syntax { line: 1, .. }));
    }

    #[test]
    fn missing_key() {
        let c = parse_config("n=4\ndelta=0.4\nb=1\na0=2\n").unwrap().config;
        let e = c.market().unwrap_err();
        assert_eq!(e.to_string(), "invalid input: line 5: missing required key `a1`");
    }

    #[test]
    fn primitives_and_consistency() {
        let c = parse_config("n=4\ndelta=0.4\nb=1\na=5\nc0=3\nc=2.5\n").unwrap().config;
        let p = c.market().unwrap();
        assert_eq!((p.a0(), p.a1()), (2.0, 2.5));
        let c = parse_config("n=4\ndelta=0.4\nb=1\na=5\nc0=3\nc=2.5\na0=2\na1=2.5\n")
            .unwrap()
            .config;
        assert!(c.market().is_ok());
        let c = parse_config("n=4\ndelta=0.4\nb=1\na=5\nc0=3\nc=2.5\na0=2.1\n")
            .unwrap()
            .config;
        assert!(c.market().unwrap_err().to_string().contains("inconsistent"));
        let c = parse_config("n=4\ndelta=0.4\nb=1\na=5\nc0=3\n").unwrap().config;
        assert!(c.market().unwrap_err().to_string().contains("`c`"));
    }

    #[test]
    fn emit_round_trip() {
        let mut c = parse_config(SECTION4).unwrap().config;
        c.set("tau0", "3", Origin::Flag).unwrap();
        c.set("alpha_min", "0.1", Origin::Flag).unwrap();
        c.set("perturbation", "0.30000000000000004", Origin::Flag).unwrap();
        c.set("policy", "continued", Origin::Flag).unwrap();
        c.set("out", "x.csv", Origin::Flag).unwrap();
        let back = parse_config(&c.emit()).unwrap().config;
        assert_eq!(back, c);
        assert_eq!(parse_config(&back.emit()).unwrap().config.emit(), c.emit());
    }

    #[test]
    fn delta_grid_endpoints() {
        let c = RunConfig {
            delta_min: 0.1,
            delta_max: 0.9,
            delta_points: 5,
            ..RunConfig::default()
        };
        assert_eq!(
            c.delta_grid(),
            vec![0.1, 0.30000000000000004, 0.5, 0.7000000000000001, 0.9]
        );
    }
}
