//! Ingestion of externally produced trajectory CSV directories.

use std::path::Path;

use crate::data::Trajectory;
use crate::error::{Error, Result};
use crate::io::read_trajectory_csv;

/// Reads every `*.csv` file in the directory (sorted by file name) as a
/// trajectory; sidecar `*.json` manifests supply labels and exact timestep
/// metadata when present.
pub fn ingest_csv(dir: &Path) -> Result<Vec<Trajectory>> {
    if !dir.is_dir() {
        return Err(Error::invalid(format!("`{}` is not a directory", dir.display())));
    }
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .collect::<std::result::Result<Vec<_>, _>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| p.extension().map(|e| e == "csv").unwrap_or(false))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::invalid(format!(
            "no trajectory CSV files found in `{}`",
            dir.display()
        )));
    }
    paths.iter().map(|p| read_trajectory_csv(p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::write_trajectory_csv;

    #[test]
    fn write_then_ingest_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let mut written = Vec::new();
        for i in 0..16 {
            let values: Vec<f64> = (0..20).map(|k| (i as f64) + (k as f64) * 0.125).collect();
            let traj = Trajectory::from_scalar_series(&values, 0.05, 0.0)
                .unwrap()
                .with_label(format!("alpha={i}"));
            write_trajectory_csv(&dir.path().join(format!("traj{i:02}.csv")), &traj).unwrap();
            written.push(traj);
        }
        let back = ingest_csv(dir.path()).unwrap();
        assert_eq!(back.len(), 16);
        for (a, b) in back.iter().zip(&written) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn empty_directory_is_invalid() {
        let dir = tempfile::tempdir().unwrap();
        assert!(ingest_csv(dir.path()).is_err());
    }
}
