//! The `slopes` command line: argument parsing, input loading and the
//! mapping from results to files and exit codes.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use slopes_core::rational::parse_q;
use slopes_core::{Budget, SlopeError};

pub mod commands;
pub mod svg;

pub const EXIT_OK: i32 = 0;
/// A law check found violations, or a curated fixture broke Hasse–Arf.
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_DOMAIN: i32 = 2;
pub const EXIT_INCOMPLETE: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "slopes", version, about = "Slope filtrations, HN flags and Newton polygons in exact arithmetic")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    #[arg(long, global = true, value_enum)]
    pub backend: Option<Backend>,
    /// Input JSON file, or `fixture:NAME` for a shipped fixture.
    #[arg(long = "in", global = true)]
    pub input: Option<String>,
    /// Result JSON destination (default: stdout).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Polygon SVG destination; the exact sidecar goes to `<svg>.json`.
    #[arg(long, global = true)]
    pub svg: Option<PathBuf>,
    /// Norm bound for lattice vector enumeration, a positive rational.
    #[arg(long, global = true)]
    pub bound: Option<String>,
    /// Working x-adic precision.
    #[arg(long, global = true)]
    pub prec: Option<i64>,
    /// Closure depth for subspace candidates.
    #[arg(long, global = true)]
    pub depth: Option<usize>,
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    #[arg(long, global = true, env = "SLOPES_SEED")]
    pub seed: Option<u64>,
    /// Exit with status 3 when a result rests on a heuristic search.
    #[arg(long, global = true)]
    pub require_complete: bool,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Harder–Narasimhan flag and polygon.
    Hn {
        /// Table backend: the object to filter (default: every object).
        #[arg(long)]
        object: Option<String>,
    },
    /// Newton polygon of a twisted polynomial, φ-matrix, operator or object.
    Np {
        #[arg(long)]
        object: Option<String>,
    },
    /// Slope factorization of a monic twisted polynomial.
    Factor,
    /// Seeded property check of one law.
    Check {
        #[arg(long, value_enum)]
        law: Law,
    },
    /// Herbrand breaks, Galois polygons and Swan conductors.
    Swan,
    /// Polygon calculus on `{"p": polygon, "q": polygon}`.
    Combine {
        #[arg(long)]
        mode: String,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Backend {
    Lattice,
    Filtered,
    Table,
    Phi,
    Diff,
    Ramification,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::Lattice => "lattice",
            Backend::Filtered => "filtered",
            Backend::Table => "table",
            Backend::Phi => "phi",
            Backend::Diff => "diff",
            Backend::Ramification => "ramification",
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Law {
    Axioms,
    Exactness,
    Dominance,
    TensorMult,
    TensorBounded,
    CoprimeStable,
    BostExperiment,
    Duality,
}

impl Law {
    pub fn name(self) -> &'static str {
        match self {
            Law::Axioms => "axioms",
            Law::Exactness => "exactness",
            Law::Dominance => "dominance",
            Law::TensorMult => "tensor-mult",
            Law::TensorBounded => "tensor-bounded",
            Law::CoprimeStable => "coprime-stable",
            Law::BostExperiment => "bost-experiment",
            Law::Duality => "duality",
        }
    }
}

/// Validated settings of one invocation.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub command: Command,
    pub backend: Option<Backend>,
    pub input: Option<String>,
    pub out: Option<PathBuf>,
    pub svg: Option<PathBuf>,
    pub budget: Budget,
    pub prec: i64,
    pub samples: usize,
    pub seed: u64,
    pub require_complete: bool,
}

#[derive(Debug)]
pub enum CliError {
    Domain(SlopeError),
    Usage(String),
    Io(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Domain(e) => write!(f, "{e}"),
            CliError::Usage(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl From<SlopeError> for CliError {
    fn from(e: SlopeError) -> Self {
        CliError::Domain(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Domain(SlopeError::BudgetExhausted(_)) => EXIT_INCOMPLETE,
            _ => EXIT_DOMAIN,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl RunConfig {
    pub fn from_cli(cli: Cli) -> CliResult<Self> {
        let c = cli.common;
        let mut budget = Budget::default();
        if let Some(b) = &c.bound {
            let q = parse_q(b).map_err(|e| CliError::Usage(format!("--bound: {e}")))?;
            if q <= slopes_core::Q::from_integer(0.into()) {
                return Err(CliError::Usage("--bound must be positive".into()));
            }
            budget.bound = Some(q);
        }
        if let Some(d) = c.depth {
            if d == 0 {
                return Err(CliError::Usage("--depth must be positive".into()));
            }
            budget.depth = d;
        }
        let prec = c.prec.unwrap_or(slopes_core::phi::DEFAULT_PRECISION);
        if prec <= 0 {
            return Err(CliError::Usage("--prec must be positive".into()));
        }
        let samples = c.samples.unwrap_or(50);
        if samples == 0 {
            return Err(CliError::Usage("--samples must be positive".into()));
        }
        Ok(RunConfig {
            command: cli.command,
            backend: c.backend,
            input: c.input,
            out: c.out,
            svg: c.svg,
            budget,
            prec,
            samples,
            seed: c.seed.unwrap_or(0),
            require_complete: c.require_complete,
        })
    }

    /// The raw input text, from a path or a shipped fixture.
    pub fn input_text(&self) -> CliResult<String> {
        let src = self
            .input
            .as_deref()
            .ok_or_else(|| CliError::Usage("this command needs --in".into()))?;
        if let Some(name) = src.strip_prefix("fixture:") {
            return fixture_text(name)
                .map(str::to_string)
                .ok_or_else(|| CliError::Usage(format!("unknown fixture {name:?}")));
        }
        fs::read_to_string(src).map_err(|e| CliError::Io(format!("cannot read {src}: {e}")))
    }

    pub fn input_json(&self) -> CliResult<(Value, String)> {
        let text = self.input_text()?;
        let v: Value = serde_json::from_str(&text).map_err(|e| {
            CliError::Domain(SlopeError::schema(
                format!("line {} column {}", e.line(), e.column()),
                e.to_string(),
            ))
        })?;
        Ok((v, sha256_hex(text.as_bytes())))
    }
}

fn fixture_text(name: &str) -> Option<&'static str> {
    match name {
        "ramification" => Some(slopes_core::ramification::FIXTURES),
        other => slopes_core::table::fixture(other),
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// What a command produced, before it is written out.
pub struct Outcome {
    /// The backend the command resolved to, if any.
    pub backend: Option<&'static str>,
    pub result: Value,
    pub polygons: Vec<(String, slopes_core::NewtonPolygon)>,
    /// False when some part of the result rests on a heuristic search.
    pub complete: bool,
    /// False when a checked law or a curated fixture failed.
    pub passed: bool,
    pub input_sha256: Option<String>,
}

fn render(json: &Value) -> String {
    let mut s = serde_json::to_string_pretty(json).expect("JSON values serialize");
    s.push('\n');
    s
}

fn write_file(path: &PathBuf, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

/// Runs one invocation, writes its artifacts and returns the exit status.
pub fn run(config: &RunConfig) -> CliResult<i32> {
    let (name, outcome) = commands::dispatch(config)?;
    let envelope = json!({
        "command": name,
        "backend": outcome.backend,
        "seed": config.seed,
        "input_sha256": outcome.input_sha256,
        "complete": outcome.complete,
        "result": outcome.result,
    });
    let text = render(&envelope);
    match &config.out {
        Some(path) => write_file(path, &text)?,
        None => print!("{text}"),
    }
    if let Some(path) = &config.svg {
        if outcome.polygons.is_empty() {
            return Err(CliError::Usage(format!("{name} produced no polygon to draw")));
        }
        let drawing = svg::render(&outcome.polygons)?;
        write_file(path, &drawing.svg)?;
        let mut sidecar = path.clone().into_os_string();
        sidecar.push(".json");
        write_file(&PathBuf::from(sidecar), &render(&drawing.sidecar))?;
    }
    Ok(if !outcome.passed {
        EXIT_VIOLATION
    } else if config.require_complete && !outcome.complete {
        EXIT_INCOMPLETE
    } else {
        EXIT_OK
    })
}

/// Parses `args` (program name first), runs and reports errors on stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_DOMAIN } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match RunConfig::from_cli(cli).and_then(|c| run(&c)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
