//! Command-line front end.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{monte_carlo, PolicyId, ALL_POLICIES};
use crate::io::{
    read_aggregate_csv, write_aggregate_csv, write_diagnostics, write_json, write_plotdata_csv,
    write_trace_csv, TraceMeta,
};
use crate::rng::RNG_ALGORITHM;
use crate::scenario::{canned, Scenario, CANNED};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const PLOTDATA_FILE: &str = "plotdata.csv";
pub const FAILURE_FILE: &str = "failure.txt";

#[derive(Debug, Parser)]
#[command(
    name = "pmnl",
    version,
    about = "Simulate assortment-pricing policies under Poisson arrivals and MNL choice"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run policies on a scenario and write traces, aggregates and a manifest.
    Run(RunArgs),
    /// Check a scenario against the modeling assumptions.
    Validate {
        /// Shipped scenario name or path to a scenario file.
        scenario: String,
    },
    /// List the shipped scenarios and the available policies.
    List,
    /// Reshape a run directory's aggregates into one long-format CSV.
    Plotdata {
        /// Output directory of a previous `run`.
        dir: PathBuf,
        /// Destination file (default: DIR/plotdata.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Run spec or manifest (TOML); command-line flags take precedence.
    #[arg(long, env = "PMNL_SPEC")]
    pub spec: Option<PathBuf>,
    /// Shipped scenario name or path to a scenario file.
    #[arg(long, env = "PMNL_SCENARIO")]
    pub scenario: Option<String>,
    /// Comma-separated policy ids.
    #[arg(long, env = "PMNL_POLICIES", value_delimiter = ',')]
    pub policies: Option<Vec<String>>,
    #[arg(long, env = "PMNL_REPS")]
    pub reps: Option<u64>,
    #[arg(long, env = "PMNL_SEED")]
    pub seed: Option<u64>,
    #[arg(long, env = "PMNL_HORIZON")]
    pub horizon: Option<u64>,
    /// Output directory.
    #[arg(long, env = "PMNL_OUT")]
    pub out: PathBuf,
    /// Price levels per product in every action search.
    #[arg(long, env = "PMNL_GRID")]
    pub grid: Option<usize>,
    /// Multiplier on the square-root branch of the confidence bonuses.
    #[arg(long, env = "PMNL_BONUS_SCALE")]
    pub bonus_scale: Option<f64>,
    /// Rescale features into the unit ball.
    #[arg(long, env = "PMNL_NORMALIZE_FEATURES")]
    pub normalize_features: bool,
}

/// Scenario given by name, by path, or inline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioSource {
    Reference(String),
    Inline(Box<Scenario>),
}

/// Run description; a written manifest is a fully resolved `RunSpec`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    /// Informational fields filled in manifests.
    pub tool_version: Option<String>,
    pub rng: Option<String>,
    pub seed: Option<u64>,
    pub reps: Option<u64>,
    pub policies: Option<Vec<PolicyId>>,
    pub scenario: Option<ScenarioSource>,
}

pub fn resolve_scenario(reference: &str) -> Result<Scenario> {
    if let Some(s) = canned(reference) {
        return Ok(s);
    }
    let path = Path::new(reference);
    if path.exists() {
        return Scenario::load(path);
    }
    Err(Error::Config(format!(
        "'{reference}' is neither a shipped scenario ({}) nor an existing file",
        CANNED.join(", ")
    )))
}

fn load_spec(path: &Path) -> Result<RunSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Flags over the spec file over scenario defaults.
pub fn resolve_run(args: &RunArgs) -> Result<RunSpec> {
    let spec = match &args.spec {
        Some(p) => load_spec(p)?,
        None => RunSpec {
            tool_version: None,
            rng: None,
            seed: None,
            reps: None,
            policies: None,
            scenario: None,
        },
    };
    let mut scenario = match (&args.scenario, spec.scenario) {
        (Some(r), _) => resolve_scenario(r)?,
        (None, Some(ScenarioSource::Reference(r))) => resolve_scenario(&r)?,
        (None, Some(ScenarioSource::Inline(s))) => *s,
        (None, None) => return Err(Error::Config("no scenario given (use --scenario)".into())),
    };
    let policies = match &args.policies {
        Some(names) => names
            .iter()
            .map(|n| n.parse())
            .collect::<Result<Vec<PolicyId>>>()?,
        None => spec.policies.unwrap_or_else(|| vec![PolicyId::Pmnl]),
    };
    if policies.is_empty() {
        return Err(Error::Config("no policies given".into()));
    }
    if let Some(r) = args.reps.or(spec.reps) {
        scenario.reps = r;
    }
    if let Some(h) = args.horizon {
        scenario.horizon = h;
    }
    if let Some(g) = args.grid {
        scenario.search.grid_points = g;
    }
    if let Some(b) = args.bonus_scale {
        scenario.bonus_scale = b;
    }
    if args.normalize_features {
        scenario.normalize_features = true;
    }
    Ok(RunSpec {
        tool_version: Some(env!("CARGO_PKG_VERSION").to_string()),
        rng: Some(RNG_ALGORITHM.to_string()),
        seed: Some(args.seed.or(spec.seed).unwrap_or(0)),
        reps: Some(scenario.reps),
        policies: Some(policies),
        scenario: Some(ScenarioSource::Inline(Box::new(scenario))),
    })
}

fn inline(spec: &RunSpec) -> &Scenario {
    match spec.scenario.as_ref() {
        Some(ScenarioSource::Inline(s)) => s,
        _ => unreachable!("resolved specs carry the scenario inline"),
    }
}

pub fn cmd_run(args: &RunArgs) -> Result<()> {
    let spec = resolve_run(args)?;
    let scenario = inline(&spec);
    for w in scenario.validate()? {
        eprintln!("warning: {w}");
    }
    let policies = spec.policies.clone().unwrap_or_default();
    let (seed, reps) = (spec.seed.unwrap_or(0), scenario.reps);
    let out = &args.out;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let manifest = toml::to_string(&spec)
        .map_err(|e| Error::Config(format!("cannot serialize manifest: {e}")))?;
    let manifest_path = out.join(MANIFEST_FILE);
    std::fs::write(&manifest_path, manifest).map_err(|e| Error::io(&manifest_path, e))?;

    let runs = match monte_carlo(&policies, scenario, reps, seed) {
        Ok(r) => r,
        Err(e) => {
            let path = out.join(FAILURE_FILE);
            let _ = std::fs::write(&path, format!("{e}\n"));
            eprintln!("diagnostics written to {}", path.display());
            return Err(e);
        }
    };
    for run in &runs {
        let dir = out.join(run.policy.id());
        for trace in &run.traces {
            let stem = format!("rep_{:04}", trace.replication);
            write_trace_csv(&dir.join(format!("{stem}.csv")), trace)?;
            write_json(
                &dir.join(format!("{stem}.meta.json")),
                &TraceMeta::of(trace),
            )?;
            write_diagnostics(&dir.join(format!("{stem}.diagnostics.jsonl")), trace)?;
        }
        write_aggregate_csv(&dir.join(AGGREGATE_FILE), &run.bands)?;
        let last = run.bands.mean.last().copied().unwrap_or(0.0);
        println!(
            "{:<16} mean cumulative regret at T = {}: {last:.3}",
            run.policy.id(),
            run.bands.mean.len()
        );
    }
    println!("wrote {}", out.display());
    Ok(())
}

pub fn cmd_validate(reference: &str) -> Result<()> {
    let s = resolve_scenario(reference)?;
    let warnings = s.validate()?;
    for w in &warnings {
        println!("warning: {w}");
    }
    println!("{}: ok", s.name);
    Ok(())
}

pub fn cmd_list() {
    println!("scenarios:");
    for name in CANNED {
        let desc = canned(name).map(|s| s.description).unwrap_or_default();
        println!("  {name:<20} {desc}");
    }
    println!("policies:");
    for p in ALL_POLICIES {
        println!("  {:<20} {}", p.id(), p.summary());
    }
}

/// Writes the long-format plot data; returns the row count.
pub fn cmd_plotdata(dir: &Path, out: Option<&Path>) -> Result<usize> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut names = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        if entry.path().join(AGGREGATE_FILE).is_file() {
            names.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    if names.is_empty() {
        return Err(Error::io(
            dir.join("*").join(AGGREGATE_FILE),
            std::io::Error::new(std::io::ErrorKind::NotFound, "no aggregate files"),
        ));
    }
    names.sort();
    let series = names
        .into_iter()
        .map(|n| {
            let bands = read_aggregate_csv(&dir.join(&n).join(AGGREGATE_FILE))?;
            Ok((n, bands))
        })
        .collect::<Result<Vec<_>>>()?;
    let target = out.map_or_else(|| dir.join(PLOTDATA_FILE), Path::to_path_buf);
    let rows = write_plotdata_csv(&target, &series)?;
    println!("wrote {rows} rows to {}", target.display());
    Ok(rows)
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_config() {
        EXIT_CONFIG
    } else {
        EXIT_RUNTIME
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Validate { scenario } => cmd_validate(scenario),
        Command::List => {
            cmd_list();
            Ok(())
        }
        Command::Plotdata { dir, out } => cmd_plotdata(dir, out.as_deref()).map(|_| ()),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
