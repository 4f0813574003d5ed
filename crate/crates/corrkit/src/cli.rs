//! Command-line front end: suite configuration, JSON reports and the `corrkit` verbs.

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::bihilb::Cover;
use crate::error::{Error, Result};
use crate::graphalg::{parse_graph, Subgraph};
use crate::suites::{self, Check};

/// Tolerance used when neither `--tol` nor the environment supplies one.
pub const DEFAULT_TOL: f64 = 1e-9;
/// Environment variable overriding [`DEFAULT_TOL`].
pub const TOL_ENV: &str = "CORRKIT_TOL";

/// `CORRKIT_TOL` if set, else [`DEFAULT_TOL`].
pub fn default_tol() -> Result<f64> {
    match std::env::var(TOL_ENV) {
        Ok(s) => parse_tol(&s).map_err(|m| Error::Usage(format!("{TOL_ENV}: {m}"))),
        Err(_) => Ok(DEFAULT_TOL),
    }
}

fn parse_tol(s: &str) -> std::result::Result<f64, String> {
    let t: f64 = s.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
    if t.is_finite() && t > 0.0 {
        Ok(t)
    } else {
        Err(format!("tolerance must be positive, got {s}"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Ksgns,
    Quesadilla,
    Fock,
    Subproduct,
    Bihilb,
    GraphKappa,
    Covering,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Ksgns,
        Suite::Quesadilla,
        Suite::Fock,
        Suite::Subproduct,
        Suite::Bihilb,
        Suite::GraphKappa,
        Suite::Covering,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Ksgns => "ksgns",
            Suite::Quesadilla => "quesadilla",
            Suite::Fock => "fock",
            Suite::Subproduct => "subproduct",
            Suite::Bihilb => "bihilb",
            Suite::GraphKappa => "graph-kappa",
            Suite::Covering => "covering",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Suite::ALL.iter().map(|x| x.name()).collect();
            Error::Usage(format!("unknown suite `{s}` (expected one of {})", names.join(", ")))
        })
    }
}

/// A suite run. Size bounds apply to the random instances of the suites that use them.
#[derive(Clone, Debug, PartialEq)]
pub struct SuiteConfig {
    pub suite: Suite,
    pub seed: u64,
    pub tol: f64,
    pub depth: usize,
    /// Number of random instances.
    pub count: usize,
    /// Bound on `dim X` for random correspondences.
    pub max_dim: usize,
    /// Bound on `dim F` for random bi-Hilbertian bimodules.
    pub max_bimodule_dim: usize,
}

impl SuiteConfig {
    /// Defaults for `suite`.
    pub fn new(suite: Suite, seed: u64, tol: f64) -> Self {
        let (depth, count) = match suite {
            Suite::Ksgns => (1, 200),
            Suite::Quesadilla => (1, 100),
            Suite::Fock => (4, 20),
            Suite::Subproduct => (5, 1),
            Suite::Bihilb => (3, 5),
            Suite::GraphKappa => (4, 1),
            Suite::Covering => (1, 1),
        };
        Self { suite, seed, tol, depth, count, max_dim: if suite == Suite::Bihilb { 4 } else { 6 }, max_bimodule_dim: 6 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::Usage(format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.depth == 0 {
            return Err(Error::Usage("depth must be at least 1".into()));
        }
        if self.max_dim == 0 || self.max_bimodule_dim == 0 {
            return Err(Error::Usage("size bounds must be positive".into()));
        }
        Ok(())
    }
}

/// Result of a suite run.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Report {
    pub suite: String,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl Report {
    pub fn new(suite: impl Into<String>, seed: u64, checks: Vec<Check>) -> Self {
        let checks: Vec<Check> = checks.into_iter().map(|c| Check::flag(c.name, &c.paper_ref, c.residual, c.pass)).collect();
        let pass = checks.iter().all(|c| c.pass);
        Self { suite: suite.into(), seed, checks, pass }
    }
}

/// Serializes a report; fields appear in declaration order.
pub fn emit_report(report: &Report) -> String {
    serde_json::to_string_pretty(report).expect("reports contain only finite numbers and strings")
}

pub fn run_suite(config: &SuiteConfig) -> Result<Report> {
    config.validate()?;
    let SuiteConfig { suite, seed, tol, depth, count, max_dim, max_bimodule_dim } = *config;
    let checks = match suite {
        Suite::Ksgns => {
            let mut cs = suites::ksgns_dilation_checks(seed, count, tol);
            cs.extend(suites::retract_checks(seed.wrapping_add(1), count.div_ceil(2), tol));
            cs
        }
        Suite::Quesadilla => suites::semicategory_checks(seed, count, count.div_ceil(2), tol),
        Suite::Fock => {
            let mut cs = suites::fock_expectation_checks(seed, count, depth, max_dim, tol);
            cs.extend(suites::covariance_example_checks(seed, depth, tol));
            cs
        }
        Suite::Subproduct => suites::subproduct_checks(seed, 2, depth, tol),
        Suite::Bihilb => {
            let mut cs = suites::index_checks(seed, count, tol);
            cs.extend(suites::ambient_checks(seed, count, depth, max_dim, max_bimodule_dim, tol));
            cs
        }
        Suite::GraphKappa => suites::graph_kappa_checks(seed, depth),
        Suite::Covering => suites::covering_checks(seed, &suites::double_cover(), tol),
    };
    Ok(Report::new(suite.name(), seed, checks))
}

pub fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.display().to_string(), message: e.to_string() })
}

/// `κ` report for graph and subgraph files.
pub fn graph_kappa_report(graph: &Path, subgraph: &Path, depth: usize) -> Result<Report> {
    if depth == 0 {
        return Err(Error::Usage("depth must be at least 1".into()));
    }
    let g = parse_graph(&read_file(graph)?)?;
    let f = Subgraph::parse(&g, &read_file(subgraph)?)?;
    f.check_regular_complement()?;
    Ok(Report::new(Suite::GraphKappa.name(), 0, suites::kappa_checks(&f, depth)))
}

/// Covering report for a cover file `{"M", "gamma", "Mtilde", "pi"}`.
pub fn covering_report(cover: &Path, seed: u64, tol: f64) -> Result<Report> {
    let text = read_file(cover)?;
    let c: Cover = serde_json::from_str(&text)
        .map_err(|e| Error::Parse { line: e.line(), message: e.to_string() })?;
    c.validate()?;
    Ok(Report::new(Suite::Covering.name(), seed, suites::covering_checks(seed, &c, tol)))
}

#[derive(Debug, Parser)]
#[command(name = "corrkit", version, about = "Verification suites for C*-correspondences in finite dimensions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// Seed for the instance generator (ChaCha8).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Residual tolerance (default: $CORRKIT_TOL or 1e-9).
    #[arg(long, value_parser = parse_tol)]
    pub tol: Option<f64>,
    /// Also write the JSON report to this path.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct Sizes {
    /// Fock truncation depth N.
    #[arg(long)]
    pub depth: Option<usize>,
    /// Number of random instances.
    #[arg(long)]
    pub count: Option<usize>,
    /// Bound on the dimension of random correspondences.
    #[arg(long)]
    pub max_dim: Option<usize>,
    /// Bound on the dimension of random bi-Hilbertian bimodules.
    #[arg(long)]
    pub max_bimodule_dim: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a named property suite.
    Verify {
        /// ksgns | quesadilla | fock | subproduct | bihilb | graph-kappa | covering
        #[arg(long)]
        suite: String,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sizes: Sizes,
    },
    /// Graph algebra computations.
    Graph {
        #[command(subcommand)]
        command: GraphCommand,
    },
    /// Bi-Hilbertian bimodules.
    Bihilb {
        #[command(subcommand)]
        command: BihilbCommand,
    },
    /// Truncated Fock modules.
    Fock {
        #[command(subcommand)]
        command: FockCommand,
    },
    /// The KSGNS suite.
    Ksgns {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sizes: Sizes,
    },
}

#[derive(Debug, Subcommand)]
pub enum GraphCommand {
    /// Check the map kappa for a graph and a subgraph with regular complement.
    Kappa {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        subgraph: PathBuf,
        #[arg(long, default_value_t = 3)]
        depth: usize,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Subcommand)]
pub enum BihilbCommand {
    /// Index, dimension and inner-product formula of a covering example.
    Covering {
        #[arg(long)]
        cover: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// The bihilb suite.
    Index {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sizes: Sizes,
    },
}

#[derive(Debug, Subcommand)]
pub enum FockCommand {
    /// Fock expectation suite on random splits.
    Expectation {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sizes: Sizes,
    },
    /// Symmetric subproduct system suite.
    Subproduct {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sizes: Sizes,
    },
}

fn config(suite: Suite, common: &Common, sizes: &Sizes) -> Result<SuiteConfig> {
    let tol = match common.tol {
        Some(t) => t,
        None => default_tol()?,
    };
    let mut c = SuiteConfig::new(suite, common.seed, tol);
    c.depth = sizes.depth.unwrap_or(c.depth);
    c.count = sizes.count.unwrap_or(c.count);
    c.max_dim = sizes.max_dim.unwrap_or(c.max_dim);
    c.max_bimodule_dim = sizes.max_bimodule_dim.unwrap_or(c.max_bimodule_dim);
    Ok(c)
}

fn tol_of(common: &Common) -> Result<f64> {
    common.tol.map_or_else(default_tol, Ok)
}

/// Runs a parsed command, returning the report and the optional output path.
pub fn execute(cli: &Cli) -> Result<(Report, Option<PathBuf>)> {
    let (report, common) = match &cli.command {
        Command::Verify { suite, common, sizes } => (run_suite(&config(suite.parse()?, common, sizes)?)?, common),
        Command::Ksgns { common, sizes } => (run_suite(&config(Suite::Ksgns, common, sizes)?)?, common),
        Command::Fock { command: FockCommand::Expectation { common, sizes } } => {
            (run_suite(&config(Suite::Fock, common, sizes)?)?, common)
        }
        Command::Fock { command: FockCommand::Subproduct { common, sizes } } => {
            (run_suite(&config(Suite::Subproduct, common, sizes)?)?, common)
        }
        Command::Bihilb { command: BihilbCommand::Index { common, sizes } } => {
            (run_suite(&config(Suite::Bihilb, common, sizes)?)?, common)
        }
        Command::Bihilb { command: BihilbCommand::Covering { cover, common } } => {
            (covering_report(cover, common.seed, tol_of(common)?)?, common)
        }
        Command::Graph { command: GraphCommand::Kappa { graph, subgraph, depth, common } } => {
            let mut r = graph_kappa_report(graph, subgraph, *depth)?;
            r.seed = common.seed;
            (r, common)
        }
    };
    Ok((report, common.json.clone()))
}

/// Entry point of the `corrkit` binary: exit status 0 iff every check passes, 1 if
/// some check fails, 2 on usage, parse or io errors.
pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let outcome = execute(&cli).and_then(|(report, path)| {
        let text = emit_report(&report);
        if let Some(p) = path {
            std::fs::write(&p, format!("{text}\n"))
                .map_err(|e| Error::Io { path: p.display().to_string(), message: e.to_string() })?;
        }
        println!("{text}");
        Ok(report.pass)
    });
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("corrkit: {e}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_report_passes() {
        let r = Report::new("ksgns", 42, vec![]);
        let v: serde_json::Value = serde_json::from_str(&emit_report(&r)).unwrap();
        assert_eq!(v["pass"], serde_json::Value::Bool(true));
        assert_eq!(v["checks"], serde_json::json!([]));
    }

    #[test]
    fn one_failure_fails_the_report() {
        let r = Report::new(
            "fock",
            1,
            vec![Check::within("a", "x", 0.0, 1e-9), Check::within("b", "y", 1.0, 1e-9)],
        );
        assert!(!r.pass);
    }

    #[test]
    fn residuals_are_finite_and_fields_ordered() {
        let r = Report::new("fock", 1, vec![Check::within("nan", "x", f64::NAN, 1e-9)]);
        assert!(!r.pass && r.checks[0].residual.is_finite());
        let text = emit_report(&r);
        let pos: Vec<usize> = ["\"suite\"", "\"seed\"", "\"checks\"", "\"name\"", "\"paper_ref\"", "\"residual\"", "\"pass\""]
            .iter()
            .map(|k| text.find(k).unwrap())
            .collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]), "{text}");
    }

    #[test]
    fn unknown_suite_is_a_usage_error() {
        assert!(matches!("nope".parse::<Suite>(), Err(Error::Usage(_))));
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut c = SuiteConfig::new(Suite::Fock, 0, 1e-9);
        c.depth = 0;
        assert!(matches!(run_suite(&c), Err(Error::Usage(_))));
        let c = SuiteConfig::new(Suite::Fock, 0, -1.0);
        assert!(matches!(run_suite(&c), Err(Error::Usage(_))));
        assert!(parse_tol("0").is_err() && parse_tol("x").is_err());
    }

    #[test]
    fn identical_configs_give_identical_reports() {
        let c = SuiteConfig { count: 5, ..SuiteConfig::new(Suite::Quesadilla, 7, 1e-9) };
        assert_eq!(emit_report(&run_suite(&c).unwrap()), emit_report(&run_suite(&c).unwrap()));
    }

    #[test]
    fn missing_files_report_their_path() {
        let err = graph_kappa_report(Path::new("/nonexistent/g.graph"), Path::new("x"), 2).unwrap_err();
        assert!(matches!(err, Error::Io { ref path, .. } if path == "/nonexistent/g.graph"));
    }
}
