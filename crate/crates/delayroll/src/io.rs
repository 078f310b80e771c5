//! On-disk formats: trajectory CSV files with JSON sidecar manifests, and
//! snapshot matrices (rows = grid points, columns = snapshots).
//!
//! Floats are written with Rust's shortest-roundtrip formatting, so a
//! write/read cycle reproduces every value bit-exactly.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::data::{State, Trajectory};
use crate::error::{Error, Result};

/// Sidecar metadata stored next to each trajectory CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryManifest {
    pub label: Option<String>,
    pub dt: f64,
    pub t0: f64,
}

fn manifest_path(csv_path: &Path) -> std::path::PathBuf {
    csv_path.with_extension("json")
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Writes `t,w0,...,w{d-1}` rows plus a JSON sidecar manifest.
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut out = BufWriter::new(fs::File::create(path)?);
    write!(out, "t")?;
    for i in 0..traj.dim() {
        write!(out, ",w{i}")?;
    }
    writeln!(out)?;
    for (k, s) in traj.states().iter().enumerate() {
        write!(out, "{}", traj.time(k))?;
        for v in s.iter() {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    let manifest = TrajectoryManifest {
        label: traj.label().map(String::from),
        dt: traj.dt(),
        t0: traj.t0(),
    };
    write_json(&manifest_path(path), &manifest)
}

/// Reads a trajectory CSV; the sidecar manifest, when present, supplies the
/// exact `dt`/`t0`/label, otherwise they are inferred from the `t` column.
pub fn read_trajectory_csv(path: &Path) -> Result<Trajectory> {
    let file = fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines();

    let header = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "file is empty, expected a header row"))??;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.is_empty() || cols[0] != "t" {
        return Err(parse_err(
            path,
            1,
            format!("first column must be `t`, found `{}`", cols.first().unwrap_or(&"")),
        ));
    }
    let d = cols.len() - 1;
    if d == 0 {
        return Err(parse_err(path, 1, "expected at least one state column `w0`"));
    }
    for (i, col) in cols.iter().enumerate().skip(1) {
        let expected = format!("w{}", i - 1);
        if *col != expected {
            return Err(parse_err(
                path,
                1,
                format!("expected column `{expected}`, found `{col}`"),
            ));
        }
    }

    let mut times = Vec::new();
    let mut states: Vec<State> = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != d + 1 {
            return Err(parse_err(
                path,
                line_no,
                format!("expected {} cells, found {}", d + 1, cells.len()),
            ));
        }
        let mut row = Vec::with_capacity(d + 1);
        for (c, cell) in cells.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                parse_err(
                    path,
                    line_no,
                    format!("non-numeric cell `{cell}` in column `{}`", cols[c]),
                )
            })?;
            row.push(v);
        }
        times.push(row[0]);
        states.push(DVector::from_vec(row[1..].to_vec()));
    }
    if states.is_empty() {
        return Err(parse_err(path, 2, "no data rows"));
    }

    let manifest = {
        let mp = manifest_path(path);
        if mp.exists() {
            Some(read_json::<TrajectoryManifest>(&mp)?)
        } else {
            None
        }
    };

    let (dt, t0, label) = match manifest {
        Some(m) => (m.dt, m.t0, m.label),
        None => {
            if times.len() < 2 {
                return Err(parse_err(
                    path,
                    2,
                    "single-row trajectory needs a sidecar manifest to define dt",
                ));
            }
            (times[1] - times[0], times[0], None)
        }
    };
    if !dt.is_finite() || dt <= 0.0 {
        return Err(parse_err(path, 2, format!("inferred dt must be positive, got {dt}")));
    }
    // The t column must describe uniform sampling consistent with (t0, dt).
    for (k, &t) in times.iter().enumerate() {
        let expect = t0 + k as f64 * dt;
        if (t - expect).abs() > 1e-9 * expect.abs().max(1.0) {
            return Err(parse_err(
                path,
                k + 2,
                format!("non-uniform time column: found {t}, expected {expect}"),
            ));
        }
    }
    Trajectory::new(states, dt, t0, label)
}

/// Snapshot-matrix metadata (grid and time cadence).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SnapshotManifest {
    pub nx: usize,
    pub dx: f64,
    pub t0: f64,
    pub dt: f64,
    pub n_snapshots: usize,
    pub solver: String,
    pub initial_condition: String,
}

/// Writes a snapshot matrix as headerless CSV, rows = grid points.
pub fn write_snapshot_csv(path: &Path, snapshots: &DMatrix<f64>) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut out = BufWriter::new(fs::File::create(path)?);
    for i in 0..snapshots.nrows() {
        for j in 0..snapshots.ncols() {
            if j > 0 {
                write!(out, ",")?;
            }
            write!(out, "{}", snapshots[(i, j)])?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_snapshot_csv(path: &Path) -> Result<DMatrix<f64>> {
    let file = fs::File::open(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for cell in line.split(',') {
            let v: f64 = cell.trim().parse().map_err(|_| {
                parse_err(path, idx + 1, format!("non-numeric cell `{}`", cell.trim()))
            })?;
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(parse_err(path, idx + 1, "ragged row in snapshot matrix"));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(path, 1, "empty snapshot matrix"));
    }
    let (nr, nc) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_fn(nr, nc, |i, j| rows[i][j]))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}
