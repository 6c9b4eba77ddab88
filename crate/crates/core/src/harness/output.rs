use std::fs;
use std::path::{Path, PathBuf};

use crate::bandit_core::{ExperimentTrace, RoundOutcome};
use crate::{Error, Result};

pub const TRACE_HEADER: [&str; 8] = [
    "slot",
    "explored",
    "policy_id",
    "arm_server",
    "arm_link",
    "raw_cost_ms",
    "norm_cost",
    "regret_cum",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse(format!("{}: {other:?}", path.display())),
    }
}

/// Write one agent's rounds; the regret column is empty until both the
/// normalized cost and the oracle are known.
pub fn write_trace(path: &Path, trace: &ExperimentTrace, agent: usize) -> Result<()> {
    let rows: &[RoundOutcome] = trace.agents.get(agent).map(Vec::as_slice).unwrap_or(&[]);
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(TRACE_HEADER).map_err(|e| csv_err(path, e))?;
    let mut cum = Some(0.0);
    for o in rows {
        cum = match (cum, o.norm_cost, o.oracle_cost) {
            (Some(c), Some(n), Some(b)) => Some(c + n - b),
            _ => None,
        };
        let arm = trace.arms[o.arm];
        w.write_record([
            o.slot.to_string(),
            (o.explored as u8).to_string(),
            opt(o.policy_id),
            arm.server.0.to_string(),
            arm.link.0.to_string(),
            o.raw_cost.to_string(),
            opt(o.norm_cost),
            opt(cum),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `slot,delay_ms`: summed end-to-end delay of all modules per slot.
pub fn write_delays(path: &Path, trace: &ExperimentTrace) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["slot", "delay_ms"]).map_err(|e| csv_err(path, e))?;
    for (slot, d) in trace.slot_delay_ms.iter().enumerate() {
        w.write_record([slot.to_string(), d.to_string()]).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Write `delay.csv` and one `trace_agent{k}.csv` per agent into `dir`.
/// Returns the paths written.
pub fn emit_csv(dir: &Path, trace: &ExperimentTrace) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let delay = dir.join("delay.csv");
    write_delays(&delay, trace)?;
    written.push(delay);
    for k in 0..trace.agents.len().max(1) {
        let path = dir.join(format!("trace_agent{k}.csv"));
        write_trace(&path, trace, k)?;
        written.push(path);
    }
    Ok(written)
}

/// Read back the `delay_ms` column of a `delay.csv`.
pub fn read_delays(path: &Path) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let d = rec
            .get(1)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Parse(format!("{}: bad delay row {rec:?}", path.display())))?;
        out.push(d);
    }
    Ok(out)
}

/// Final `regret_cum` of a trace file, if every row had one.
pub fn read_final_regret(path: &Path) -> Result<Option<f64>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut last = None;
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        last = rec.get(7).map(|v| v.parse::<f64>().ok());
    }
    Ok(last.flatten())
}
