//! CSV and JSON file formats read and written by the command-line tool.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detectors::{RunOutcome, TracePoint};
use crate::error::{Error, Result};
use crate::error_model::{LatentMode, Point2};
use crate::evaluation::FrontierPoint;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct ErrorRow {
    t: i64,
    e: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mode: Option<LatentMode>,
}

/// An error log: values in time order with optional latent modes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ErrorLog {
    pub t: Vec<i64>,
    pub e: Vec<f64>,
    pub modes: Option<Vec<LatentMode>>,
}

/// Reads a `t,e[,mode]` CSV; `t` must increase strictly and `e` be finite.
pub fn read_errors(path: &Path) -> Result<ErrorLog> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    if headers.get(0) != Some("t") || headers.get(1) != Some("e") {
        return Err(Error::Degenerate(format!("{}: header must start with `t,e`", path.display())));
    }
    let with_modes = headers.iter().any(|h| h == "mode");
    let mut log = ErrorLog { modes: with_modes.then(Vec::new), ..Default::default() };
    for (i, row) in rdr.deserialize::<ErrorRow>().enumerate() {
        let row = row?;
        if !row.e.is_finite() {
            return Err(Error::NonFinite(format!("row {} of {}", i + 1, path.display())));
        }
        if let Some(&prev) = log.t.last() {
            if row.t <= prev {
                return Err(Error::Degenerate(format!("t is not increasing at row {}", i + 1)));
            }
        }
        log.t.push(row.t);
        log.e.push(row.e);
        if let Some(modes) = log.modes.as_mut() {
            modes.push(row.mode.ok_or_else(|| Error::Degenerate(format!("missing mode at row {}", i + 1)))?);
        }
    }
    if log.e.is_empty() {
        return Err(Error::Degenerate(format!("{} has no rows", path.display())));
    }
    Ok(log)
}

/// Writes `t,e` or `t,e,mode` rows with `t` counting from 1.
pub fn write_errors(path: &Path, errors: &[f64], modes: Option<&[LatentMode]>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for (i, &e) in errors.iter().enumerate() {
        w.serialize(ErrorRow { t: i as i64 + 1, e, mode: modes.map(|m| m[i]) })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct TrajectoryRow {
    t: i64,
    px: f64,
    py: f64,
    tx: f64,
    ty: f64,
}

/// Predicted and true positions, index-aligned.
pub type Trajectory = (Vec<Point2<f64>>, Vec<Point2<f64>>);

/// Reads predicted and true positions from a `t,px,py,tx,ty` CSV.
pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    let mut rdr = csv::Reader::from_path(path)?;
    let (mut pred, mut truth) = (Vec::new(), Vec::new());
    let mut last = None;
    for row in rdr.deserialize::<TrajectoryRow>() {
        let r = row?;
        if last.is_some_and(|p| r.t <= p) {
            return Err(Error::Degenerate("trajectory t is not increasing".into()));
        }
        last = Some(r.t);
        pred.push([r.px, r.py]);
        truth.push([r.tx, r.ty]);
    }
    Ok((pred, truth))
}

#[derive(Serialize)]
struct ModeRow {
    t: i64,
    e: f64,
    mode: LatentMode,
    posterior_h: f64,
}

/// Mode-assignment CSV `t,e,mode,posterior_h`.
pub fn write_modes(path: &Path, log: &ErrorLog, modes: &[LatentMode], posterior_h: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for i in 0..log.e.len() {
        w.serialize(ModeRow { t: log.t[i], e: log.e[i], mode: modes[i], posterior_h: posterior_h[i] })?;
    }
    w.flush()?;
    Ok(())
}

/// Statistic trace CSV `step,block,W`.
pub fn write_trace(path: &Path, trace: &[TracePoint<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for p in trace {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

/// Alarm record: where the detector stopped, or how long it ran without alarm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlarmRecord {
    Alarm {
        stopping_time: u64,
        block: Option<u64>,
        #[serde(rename = "W")]
        w: f64,
    },
    Censored { censored: u64 },
}

impl AlarmRecord {
    pub fn from_outcome(outcome: &RunOutcome<f64>) -> Self {
        match &outcome.alarm {
            Some(a) => Self::Alarm { stopping_time: a.stopping_time, block: a.block_index, w: a.statistic },
            None => Self::Censored { censored: outcome.steps },
        }
    }
}

#[derive(Serialize)]
struct FrontierRow {
    b: f64,
    mtfa: f64,
    wadd: f64,
}

/// Frontier CSV `b,mtfa,wadd`.
pub fn write_frontier(path: &Path, points: &[FrontierPoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for p in points {
        w.serialize(FrontierRow { b: p.b, mtfa: p.mtfa, wadd: p.wadd })?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut f = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}
