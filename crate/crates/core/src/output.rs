//! CSV time series, JSON metadata sidecar and state dumps.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coupling::{ConvergenceReport, FsgState, InitReport, SimulationOutput, TimeSeriesRecord};
use crate::error::{Error, Result};
use crate::scenario::ScenarioConfig;

pub const FIXED_COLUMNS: [&str; 9] = [
    "t_day",
    "segment",
    "a_cm",
    "h_cm",
    "lambda_theta",
    "J",
    "p_dyn_cm2",
    "wss_dyn_cm2",
    "sigma_inv_kPa",
];

pub fn csv_header(names: &[String]) -> Vec<String> {
    let mut cols: Vec<String> = FIXED_COLUMNS.iter().map(|c| c.to_string()).collect();
    cols.extend(names.iter().map(|n| format!("rho_R_{n}")));
    cols.extend(names.iter().map(|n| format!("upsilon_{n}")));
    cols.push("iters".into());
    cols
}

/// Records with `t` on the cadence grid (every `cadence`-th output time).
pub fn thin_records(records: &[TimeSeriesRecord], cadence: usize) -> Vec<&TimeSeriesRecord> {
    let cadence = cadence.max(1);
    let mut times: Vec<f64> = records.iter().map(|r| r.t_day).collect();
    times.dedup();
    let keep: Vec<f64> = times.iter().enumerate().filter(|(i, _)| i % cadence == 0).map(|(_, t)| *t).collect();
    records.iter().filter(|r| keep.contains(&r.t_day)).collect()
}

/// Formats the time series. Rows are ordered by time, then segment.
pub fn timeseries_csv(records: &[&TimeSeriesRecord], names: &[String]) -> Result<String> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("no records to write".into()));
    }
    let mut rows: Vec<&TimeSeriesRecord> = records.to_vec();
    rows.sort_by(|a, b| a.t_day.total_cmp(&b.t_day).then(a.segment.cmp(&b.segment)));
    let mut out = csv_header(names).join(",");
    out.push('\n');
    for r in rows {
        if r.rho_r.len() != names.len() || r.upsilon.len() != names.len() {
            return Err(Error::InvalidArgument(format!(
                "record at t = {} has {} constituents, header has {}",
                r.t_day,
                r.rho_r.len(),
                names.len()
            )));
        }
        write!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.t_day, r.segment, r.a_cm, r.h_cm, r.lambda_theta, r.j, r.p_dyn_cm2, r.wss_dyn_cm2, r.sigma_inv_kpa
        )
        .unwrap();
        for v in r.rho_r.iter().chain(&r.upsilon) {
            write!(out, ",{v}").unwrap();
        }
        writeln!(out, ",{}", r.iters).unwrap();
    }
    Ok(out)
}

pub fn write_timeseries(records: &[&TimeSeriesRecord], names: &[String], path: &Path) -> Result<()> {
    let text = timeseries_csv(records, names)?;
    fs::write(path, text)?;
    Ok(())
}

/// Sidecar describing how a time series was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub config: ScenarioConfig,
    pub version: String,
    pub wall_clock_s: f64,
    pub completed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibrated_fiber_prestretch: Option<f64>,
    pub fluid_evaluations: usize,
    pub init: InitReport,
    pub steps: Vec<ConvergenceReport>,
}

impl RunMetadata {
    pub fn new(config: &ScenarioConfig, out: &SimulationOutput, wall_clock_s: f64, prestretch: Option<f64>) -> Self {
        Self {
            config: config.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_clock_s,
            completed: out.completed(),
            failure: out.failure.clone(),
            calibrated_fiber_prestretch: prestretch,
            fluid_evaluations: out.fluid_evaluations,
            init: out.init.clone(),
            steps: out.reports.clone(),
        }
    }
}

/// Files written for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunFiles {
    pub timeseries: PathBuf,
    pub metadata: PathBuf,
    pub state: PathBuf,
}

impl RunFiles {
    pub fn in_dir(dir: &Path, stem: &str) -> Self {
        Self {
            timeseries: dir.join(format!("{stem}.csv")),
            metadata: dir.join(format!("{stem}.meta.json")),
            state: dir.join(format!("{stem}.state.json")),
        }
    }
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text)?;
    Ok(())
}

/// Final state with its full cohort history, usable as a restart point.
pub fn write_state(state: &FsgState, path: &Path) -> Result<()> {
    let text = serde_json::to_string(state)?;
    fs::write(path, text)?;
    Ok(())
}

pub fn read_state(path: &Path) -> Result<FsgState> {
    let text = fs::read_to_string(path)?;
    let state: FsgState = serde_json::from_str(&text)
        .map_err(|e| Error::config(path.display().to_string(), format!("not a state dump: {e}")))?;
    Ok(state)
}
