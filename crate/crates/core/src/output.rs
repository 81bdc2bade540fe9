//! Serialization of trajectories, manifests and study tables.
//!
//! Floats in CSV and TSV files carry 17 significant digits so every value
//! round-trips bit-exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{BoundCertificate, BoundCheck, MomentRecord, TailMass};
use crate::error::Result;
use crate::grid::{Grid, GridSummary};
use crate::integrator::{StepStats, Trajectory};
use crate::kernels::AssumptionReport;
use crate::operators::WorkspaceStats;

pub const CSV_HEADER: &str = "t,x,g";

fn lossless(v: f64) -> String {
    format!("{v:.16e}")
}

/// One row per checkpoint and cell: `t, x_i, g_i`.
pub fn write_trajectory_csv<W: Write>(out: W, traj: &Trajectory, grid: &Grid) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER.split(','))?;
    for c in &traj.checkpoints {
        let t = lossless(c.state.t);
        for (cell, g) in grid.cells().iter().zip(&c.state.g) {
            w.write_record([t.as_str(), &lossless(cell.volume), &lossless(*g)])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct CsvRow {
    pub t: f64,
    pub x: f64,
    pub g: f64,
}

pub fn read_trajectory_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for row in r.deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointSummary {
    pub t: f64,
    pub moments: MomentRecord,
    pub s_norm: f64,
    pub mass_drift: f64,
}

/// JSON companion of the trajectory CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub sigma: f64,
    pub checkpoints: Vec<CheckpointSummary>,
    pub stats: StepStats,
    pub max_mass_drift: f64,
}

impl TrajectorySummary {
    /// `moments` replaces the per-checkpoint records when extra exponents
    /// were requested.
    pub fn new(traj: &Trajectory, moments: Option<&[MomentRecord]>) -> Self {
        let checkpoints = traj
            .checkpoints
            .iter()
            .enumerate()
            .map(|(i, c)| CheckpointSummary {
                t: c.state.t,
                moments: moments.map_or_else(|| c.moments.clone(), |m| m[i].clone()),
                s_norm: c.s_norm,
                mass_drift: c.mass_drift,
            })
            .collect();
        Self {
            sigma: traj.sigma,
            checkpoints,
            stats: traj.stats,
            max_mass_drift: traj.max_mass_drift(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Software {
    pub name: String,
    pub version: String,
}

impl Default for Software {
    fn default() -> Self {
        Self {
            name: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub software: Software,
    pub command: String,
    /// Canonical TOML of the resolved configuration.
    pub config: String,
    pub config_hash: String,
    pub threads: usize,
    pub wall_time_seconds: f64,
    pub grid: Option<GridSummary>,
    pub workspace: Option<WorkspaceStats>,
    pub step_stats: Option<StepStats>,
    pub max_mass_drift: Option<f64>,
    /// `None` when the fragmentation law provides no `η`.
    pub certificate: Option<BoundCertificate>,
    pub bound_check: Option<BoundCheck>,
    pub tail: Option<Vec<TailMass>>,
    pub assumptions: Option<AssumptionReport>,
    pub outputs: Vec<String>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Tab-separated `header` followed by one line per row.
pub fn write_tsv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", header.join("\t"))?;
    for row in rows {
        let line: Vec<String> = row.iter().map(|&v| lossless(v)).collect();
        writeln!(w, "{}", line.join("\t"))?;
    }
    w.flush()?;
    Ok(())
}
