//! Trace CSV: `iter,x0..,f,eps,a_min_norm,h0..,step,samples,status`.
//!
//! Floats are written with 17 significant digits, so parsing a trace gives
//! back the same [`Trajectory`] bit for bit. Missing values (no direction,
//! no min-norm solve) are empty cells.

use std::fs;
use std::path::Path;

use crate::descent::{StepStatus, TerminationStatus, TraceRecord, Trajectory, WallTimes};
use crate::error::{Error, Result};
use crate::vector::fmt_f64;

pub fn header(dim: usize) -> String {
    let mut cols = vec!["iter".to_string()];
    cols.extend((0..dim).map(|i| format!("x{i}")));
    cols.extend(["f", "eps", "a_min_norm"].map(String::from));
    cols.extend((0..dim).map(|i| format!("h{i}")));
    cols.extend(["step", "samples", "status"].map(String::from));
    cols.join(",")
}

pub fn to_csv(traj: &Trajectory) -> String {
    let dim = traj.dim();
    let mut out = header(dim);
    out.push('\n');
    for r in &traj.records {
        let mut cells = vec![r.iter.to_string()];
        cells.extend(r.x.iter().map(|v| fmt_f64(*v)));
        cells.push(fmt_f64(r.f));
        cells.push(fmt_f64(r.eps));
        cells.push(r.a_min_norm.map(fmt_f64).unwrap_or_default());
        match &r.direction {
            Some(h) => cells.extend(h.iter().map(|v| fmt_f64(*v))),
            None => cells.extend(std::iter::repeat_n(String::new(), dim)),
        }
        cells.push(fmt_f64(r.step));
        cells.push(r.samples.to_string());
        cells.push(r.status.as_str().to_string());
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn write_csv(traj: &Trajectory, path: &Path) -> Result<()> {
    fs::write(path, to_csv(traj))?;
    Ok(())
}

/// Parse a trace. The termination status is read off the last record:
/// `stationary` or `iter_limit`, anything else means the run failed.
pub fn from_csv(text: &str) -> Result<Trajectory> {
    let mut lines = text.lines();
    let head = lines.next().ok_or_else(|| Error::Parse("empty trace".into()))?;
    let ncols = head.split(',').count();
    if ncols < 7 || (ncols - 7) % 2 != 0 {
        return Err(Error::Parse(format!("bad trace header `{head}`")));
    }
    let dim = (ncols - 7) / 2;
    if head != header(dim) {
        return Err(Error::Parse(format!("bad trace header `{head}`")));
    }

    let mut records = Vec::new();
    for (n, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != ncols {
            return Err(Error::Parse(format!(
                "line {}: expected {ncols} cells, got {}",
                n + 2,
                cells.len()
            )));
        }
        let ctx = |e: Error| Error::Parse(format!("line {}: {e}", n + 2));
        let float = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad number `{s}`")))
        };
        let uint = |s: &str| -> Result<usize> {
            s.parse::<usize>()
                .map_err(|_| Error::Parse(format!("bad integer `{s}`")))
        };
        let parse = || -> Result<TraceRecord> {
            let x = cells[1..1 + dim].iter().map(|s| float(s)).collect::<Result<Vec<_>>>()?;
            let base = 1 + dim;
            let a_min_norm = match cells[base + 2] {
                "" => None,
                s => Some(float(s)?),
            };
            let hcells = &cells[base + 3..base + 3 + dim];
            let direction = if hcells.iter().all(|s| s.is_empty()) {
                None
            } else {
                Some(hcells.iter().map(|s| float(s)).collect::<Result<Vec<_>>>()?)
            };
            let rest = base + 3 + dim;
            Ok(TraceRecord {
                iter: uint(cells[0])?,
                x,
                f: float(cells[base])?,
                eps: float(cells[base + 1])?,
                a_min_norm,
                direction,
                step: float(cells[rest])?,
                samples: uint(cells[rest + 1])?,
                status: StepStatus::parse(cells[rest + 2])?,
            })
        };
        records.push(parse().map_err(ctx)?);
    }
    let status = match records.last().map(|r| r.status) {
        Some(StepStatus::Stationary) => TerminationStatus::ApproximatelyStationary,
        Some(StepStatus::IterLimit) => TerminationStatus::IterationLimit,
        _ => TerminationStatus::Failed,
    };
    Ok(Trajectory { records, status, wall_times: WallTimes::default() })
}

pub fn read_csv(path: &Path) -> Result<Trajectory> {
    from_csv(&fs::read_to_string(path)?)
}
