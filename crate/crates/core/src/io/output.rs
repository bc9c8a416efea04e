//! Frame stream (NDJSON), run summary (CSV) and JSON documents.
//!
//! Floats are written in shortest round-trip form, so identical runs give
//! byte-identical files and parsed values equal the in-memory ones exactly.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{FbError, Result};
use crate::evolution::{Frame, FrameStats};
use crate::geometry::{lipschitz_seminorm, GraphInterface, PeriodicGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatsRecord {
    pub min_f: f64,
    pub max_f: f64,
    pub lipschitz: f64,
    pub max_rhs: f64,
    pub dt: f64,
}

impl From<FrameStats> for StatsRecord {
    fn from(s: FrameStats) -> Self {
        Self {
            min_f: s.min_f,
            max_f: s.max_f,
            lipschitz: s.lipschitz,
            max_rhs: s.max_rhs,
            dt: s.dt,
        }
    }
}

/// One NDJSON line. `dx` and `rhs` make `stats` recomputable from the record alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub t: f64,
    pub dt: f64,
    pub dx: f64,
    pub f: Vec<f64>,
    pub i_plus: Vec<f64>,
    pub i_minus: Option<Vec<f64>>,
    pub rhs: Vec<f64>,
    pub stats: StatsRecord,
}

impl FrameRecord {
    pub fn from_frame(fr: &Frame) -> Self {
        Self {
            t: fr.t,
            dt: fr.dt,
            dx: fr.f.grid().dx(),
            f: fr.f.values().to_vec(),
            i_plus: fr.fluxes.i_plus.clone(),
            i_minus: fr.fluxes.i_minus.clone(),
            rhs: fr.rhs.clone(),
            stats: fr.stats.into(),
        }
    }

    /// Stats recomputed from the raw arrays.
    pub fn recompute_stats(&self) -> StatsRecord {
        StatsRecord {
            min_f: self.f.iter().copied().fold(f64::INFINITY, f64::min),
            max_f: self.f.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            lipschitz: lipschitz_seminorm(&self.f, self.dx),
            max_rhs: self.rhs.iter().fold(0.0, |m, v| m.max(v.abs())),
            dt: self.dt,
        }
    }

    /// Embedded stats agree exactly with the arrays.
    pub fn check(&self) -> Result<()> {
        let n = self.f.len();
        let lengths_ok = self.i_plus.len() == n
            && self.rhs.len() == n
            && self.i_minus.as_ref().is_none_or(|v| v.len() == n);
        if !lengths_ok {
            return Err(FbError::InvalidInput(format!("frame at t = {}: array lengths differ", self.t)));
        }
        let again = self.recompute_stats();
        if again != self.stats {
            return Err(FbError::InvalidInput(format!(
                "frame at t = {}: stats {:?} disagree with arrays {:?}",
                self.t, self.stats, again
            )));
        }
        Ok(())
    }
}

/// Writes frames as NDJSON, checking each record before it goes out.
pub fn write_frames(path: &Path, frames: &[Frame]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for fr in frames {
        let rec = FrameRecord::from_frame(fr);
        rec.check()?;
        serde_json::to_writer(&mut w, &rec).map_err(|e| FbError::Io(e.to_string()))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Parses an NDJSON frame stream; errors name the offending line.
pub fn read_frames(path: &Path) -> Result<Vec<FrameRecord>> {
    let r = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for (k, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: FrameRecord =
            serde_json::from_str(&line).map_err(|e| FbError::Io(format!("{}:{}: {e}", path.display(), k + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

pub const SUMMARY_HEADER: &str = "t,min_f,max_f,lipschitz,max_rhs";

/// CSV with one row per frame.
pub fn write_summary(path: &Path, frames: &[Frame]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "{SUMMARY_HEADER}")?;
    for fr in frames {
        let s = &fr.stats;
        writeln!(w, "{},{},{},{},{}", fr.t, s.min_f, s.max_f, s.lipschitz, s.max_rhs)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| FbError::Io(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Rebuilds the interface of a record on `grid`.
pub fn record_interface(rec: &FrameRecord, grid: PeriodicGrid, delta: f64, two_phase: bool) -> Result<GraphInterface> {
    if two_phase {
        GraphInterface::two_phase(grid, rec.f.clone(), delta)
    } else {
        GraphInterface::one_phase(grid, rec.f.clone(), delta)
    }
}
