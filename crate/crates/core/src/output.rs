//! CSV and text artifacts.

use std::io::Write;

use serde::Serialize;

use crate::engine::{EnsembleSummary, Trajectory};
use crate::error::Result;

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

/// `run_id,n,x`, keeping every `thin`-th point and the last one of each path.
pub fn write_trajectories<W: Write>(w: W, trajectories: &[Trajectory], thin: usize) -> Result<()> {
    let thin = thin.max(1);
    let mut out = writer(w);
    out.write_record(["run_id", "n", "x"])?;
    for t in trajectories {
        let last = t.values.len().saturating_sub(1);
        for (n, x) in t.values.iter().enumerate() {
            if n % thin == 0 || n == last {
                out.serialize((t.run_id, n, x))?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// One header row and one row per summary.
pub fn write_summaries<W: Write>(w: W, summaries: &[EnsembleSummary]) -> Result<()> {
    write_rows(w, summaries)
}

pub fn write_rows<W: Write, T: Serialize>(w: W, rows: &[T]) -> Result<()> {
    let mut out = writer(w);
    for row in rows {
        out.serialize(row)?;
    }
    out.flush()?;
    Ok(())
}

/// `key: value` lines.
pub fn write_report<W: Write>(mut w: W, lines: &[(String, String)]) -> Result<()> {
    for (k, v) in lines {
        writeln!(w, "{k}: {v}")?;
    }
    Ok(())
}

/// Summary CSV as bytes.
pub fn summary_bytes(summary: &EnsembleSummary) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_summaries(&mut buf, std::slice::from_ref(summary))?;
    Ok(buf)
}
