//! Command-line laboratory for the delayed mixed-oligopoly Cournot map.
//!
//! Every subcommand reads one [`RunConfig`] (file, then flags) and writes a
//! CSV table or a JSON document whose header echoes the effective
//! configuration. Exit codes: 0 success, 2 invalid input, 3 numerical
//! failure.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::fmt;
use std::io::Write;

use clap::{Arg, ArgAction, Command};

pub use commands::execute;
pub use config::{parse_config, ConfigError, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// A failed run, split by exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    Invalid(String),
    Numerical(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Invalid(_) => EXIT_INVALID,
            Failure::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Invalid(m) => write!(f, "invalid input: {m}"),
            Failure::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Invalid(e.to_string())
    }
}

impl From<mixed_cournot::Error> for Failure {
    fn from(e: mixed_cournot::Error) -> Self {
        use mixed_cournot::Error as E;
        match e {
            E::InvalidParameter { .. }
            | E::DimensionMismatch { .. }
            | E::AssumptionViolated { .. }
            | E::MissingPrimitives
            | E::InvalidSpec(_) => Failure::Invalid(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

pub const SUBCOMMANDS: &[(&str, &str)] = &[
    (
        "equilibria",
        "boundary and positive equilibria with assumption margins (JSON)",
    ),
    ("simulate", "orbit from the perturbed positive equilibrium (CSV)"),
    ("spectrum", "characteristic roots and classification (JSON)"),
    (
        "stability-region",
        "delay-free stability boundary alpha_max over a delta grid (CSV)",
    ),
    ("flip-boundary", "closed-form flip value for the delay parities (JSON)"),
    ("ns-curve", "Neimark-Sacker candidates over the angle scan (CSV)"),
    (
        "critical-alpha",
        "first loss of stability in [alpha_min, alpha_max] (JSON)",
    ),
    (
        "bifurcation-diagram",
        "sampled q0 and Lyapunov exponent over an alpha grid (CSV)",
    ),
    ("lyapunov", "largest Lyapunov exponent at one alpha (JSON)"),
    ("phase-portrait", "post-transient (q0, q1) orbit at one alpha (CSV)"),
];

pub fn cli() -> Command {
    let mut cmd = Command::new("cournot-lab")
        .about("Delayed mixed-oligopoly Cournot map: equilibria, spectra, bifurcations, Lyapunov exponents")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .help("key=value configuration file; flags override it")
                .global(true),
        );
    for (key, help) in config::KEYS {
        cmd = cmd.arg(
            Arg::new(*key)
                .long(key.replace('_', "-"))
                .value_name("VALUE")
                .help(*help)
                .action(ArgAction::Set)
                .allow_negative_numbers(true)
                .global(true),
        );
    }
    for (name, about) in SUBCOMMANDS {
        cmd = cmd.subcommand(Command::new(*name).about(*about));
    }
    cmd
}

/// Runs the program on `args` (including the program name) and returns the
/// exit code. Output goes to `out` unless the configuration names a file.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match cli().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = write!(err, "{}", e.render());
            return code;
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let mut config = RunConfig::default();
    if let Some(path) = sub.get_one::<String>("config") {
        match config::read_config(std::path::Path::new(path)) {
            Ok(parsed) => {
                for w in &parsed.warnings {
                    let _ = writeln!(err, "warning: {w}");
                }
                config = parsed.config;
            }
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                return EXIT_INVALID;
            }
        }
    }
    for (key, _) in config::KEYS {
        if let Some(v) = sub.get_one::<String>(key) {
            if let Err(e) = config.set(key, v, config::Origin::Flag) {
                let _ = writeln!(err, "error: {e}");
                return EXIT_INVALID;
            }
        }
    }
    let text = match execute(name, &config) {
        Ok(t) => t,
        Err(f) => {
            let _ = writeln!(err, "error: {f}");
            return f.exit_code();
        }
    };
    let written = match &config.out {
        Some(path) => {
            std::fs::write(path, text.as_bytes()).map_err(|e| format!("cannot write {}: {e}", path.display()))
        }
        None => out.write_all(text.as_bytes()).map_err(|e| e.to_string()),
    };
    match written {
        Ok(()) => EXIT_OK,
        Err(m) => {
            let _ = writeln!(err, "error: {m}");
            EXIT_INVALID
        }
    }
}

pub fn run() -> i32 {
    run_with(
        std::env::args_os(),
        &mut std::io::stdout().lock(),
        &mut std::io::stderr().lock(),
    )
}
