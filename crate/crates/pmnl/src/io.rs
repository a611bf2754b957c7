//! File formats: trace and aggregate CSVs, JSON-lines logs and manifests.
//!
//! CSVs are UTF-8 with LF line endings and a header row. Floats are
//! written in Rust's shortest round-trip form, so a rerun with the same
//! manifest reproduces every byte.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use pmnl_core::estimation::{FisherRecord, FisherState, History, PeriodObservation};
use pmnl_core::policy::PeriodDiagnostics;
use pmnl_core::Action;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{Bands, RegretTrace};
use crate::rng::RNG_ALGORITHM;

pub const TRACE_HEADER: [&str; 5] = [
    "period",
    "oracle_rev",
    "policy_exp_rev",
    "realized_rev",
    "cum_regret",
];
pub const AGGREGATE_HEADER: [&str; 4] = ["period", "mean", "p10", "p90"];
pub const PLOTDATA_HEADER: [&str; 4] = ["policy", "period", "statistic", "value"];

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(BufWriter::new(
        File::create(path).map_err(|e| Error::io(path, e))?,
    ))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(create(path)?))
}

fn flush<W: Write>(mut w: W, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_trace_csv(path: &Path, trace: &RegretTrace) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(TRACE_HEADER)?;
    for t in 0..trace.len() {
        w.write_record([
            (t + 1).to_string(),
            trace.oracle_rev[t].to_string(),
            trace.policy_exp_rev[t].to_string(),
            trace.realized_rev[t].to_string(),
            trace.cum_regret[t].to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Sidecar record identifying a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub scenario: String,
    pub policy: String,
    pub seed: u64,
    pub replication: u64,
    pub periods: usize,
    pub rng: String,
}

impl TraceMeta {
    pub fn of(trace: &RegretTrace) -> Self {
        Self {
            scenario: trace.scenario.clone(),
            policy: trace.policy.clone(),
            seed: trace.seed,
            replication: trace.replication,
            periods: trace.len(),
            rng: RNG_ALGORITHM.to_string(),
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    flush(w, path)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn write_aggregate_csv(path: &Path, bands: &Bands) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(AGGREGATE_HEADER)?;
    for t in 0..bands.mean.len() {
        w.write_record([
            (t + 1).to_string(),
            bands.mean[t].to_string(),
            bands.p10[t].to_string(),
            bands.p90[t].to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_aggregate_csv(path: &Path) -> Result<Bands> {
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    })?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != AGGREGATE_HEADER {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            message: format!("expected header {AGGREGATE_HEADER:?}, got {header:?}"),
        });
    }
    let mut bands = Bands {
        mean: Vec::new(),
        p10: Vec::new(),
        p90: Vec::new(),
    };
    for rec in r.records() {
        let rec = rec?;
        let num = |i: usize| {
            rec[i].parse::<f64>().map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                message: format!("column {}: {e}", AGGREGATE_HEADER[i]),
            })
        };
        bands.mean.push(num(1)?);
        bands.p10.push(num(2)?);
        bands.p90.push(num(3)?);
    }
    Ok(bands)
}

/// Long-format rows `(policy, period, statistic, value)`.
pub fn write_plotdata_csv(path: &Path, series: &[(String, Bands)]) -> Result<usize> {
    let mut w = csv_writer(path)?;
    w.write_record(PLOTDATA_HEADER)?;
    let mut rows = 0;
    for (policy, b) in series {
        for t in 0..b.mean.len() {
            for (name, col) in [("mean", &b.mean), ("p10", &b.p10), ("p90", &b.p90)] {
                w.write_record([
                    policy.as_str(),
                    &(t + 1).to_string(),
                    name,
                    &col[t].to_string(),
                ])?;
                rows += 1;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(rows)
}

pub fn write_jsonl<'a, T: Serialize + 'a>(
    path: &Path,
    items: impl IntoIterator<Item = &'a T>,
) -> Result<()> {
    let mut w = create(path)?;
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    flush(w, path)
}

fn jsonl_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

fn parse_line<T: DeserializeOwned>(path: &Path, n: usize, line: &str) -> Result<T> {
    serde_json::from_str(line).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: format!("line {n}: {e}"),
    })
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    jsonl_lines(path)?
        .iter()
        .map(|(n, line)| parse_line(path, *n, line))
        .collect()
}

/// One observation per line.
pub fn write_history(path: &Path, history: &History) -> Result<()> {
    write_jsonl(path, history.observations())
}

pub fn read_history(path: &Path) -> Result<History> {
    let mut h = History::new();
    for obs in read_jsonl::<PeriodObservation>(path)? {
        h.push(obs)?;
    }
    Ok(h)
}

/// First line of a Fisher log: dimensions and the estimates the sums are
/// evaluated at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherHeader {
    pub dim_x: usize,
    pub dim_z: usize,
    pub base_rate: f64,
    pub x_bar: f64,
    pub theta: Vec<f64>,
    pub v: Vec<f64>,
}

/// Header line then one per-period record per line. Reading replays the
/// records at the header estimates.
pub fn write_fisher(path: &Path, header: &FisherHeader, state: &FisherState) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer(&mut w, header)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    for rec in state.records() {
        serde_json::to_writer(&mut w, rec)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    flush(w, path)
}

pub fn read_fisher(path: &Path) -> Result<(FisherHeader, FisherState)> {
    let lines = jsonl_lines(path)?;
    let (n, first) = lines.first().ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        message: "empty Fisher log".into(),
    })?;
    let header: FisherHeader = parse_line(path, *n, first)?;
    let mut state = FisherState::new(header.dim_x, header.dim_z, header.base_rate, header.x_bar)?;
    for (n, line) in &lines[1..] {
        let rec: FisherRecord = parse_line(path, *n, line)?;
        state.accumulate_record(rec, &header.theta, &header.v)?;
    }
    Ok((header, state))
}

/// One line of the policy diagnostics log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsLine<'a> {
    pub action: &'a Action,
    #[serde(flatten)]
    pub state: &'a PeriodDiagnostics,
}

pub fn write_diagnostics(path: &Path, trace: &RegretTrace) -> Result<()> {
    let lines: Vec<_> = trace
        .actions
        .iter()
        .zip(&trace.diagnostics)
        .map(|(action, state)| DiagnosticsLine { action, state })
        .collect();
    write_jsonl(path, &lines)
}
