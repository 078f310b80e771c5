//! Quantitative evaluation: RMSE, lobe-switching and peak statistics for
//! chaotic scalar series, and extremum diagnostics.

use serde::{Deserialize, Serialize};

use crate::data::Trajectory;
use crate::error::{Error, Result};

/// Default magnitude a sample must exceed before it counts toward a lobe.
pub const DEFAULT_LOBE_THRESHOLD: f64 = 0.1;

fn check_lengths(pred: &Trajectory, truth: &Trajectory) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::invalid(format!(
            "trajectory lengths differ: {} vs {}",
            pred.len(),
            truth.len()
        )));
    }
    if pred.dim() != truth.dim() {
        return Err(Error::invalid(format!(
            "trajectory dimensions differ: {} vs {}",
            pred.dim(),
            truth.dim()
        )));
    }
    Ok(())
}

/// Square root of the mean (over timesteps) squared Euclidean error.
pub fn rmse(pred: &Trajectory, truth: &Trajectory) -> Result<f64> {
    check_lengths(pred, truth)?;
    let total: f64 = pred
        .states()
        .iter()
        .zip(truth.states())
        .map(|(p, t)| (p - t).norm_squared())
        .sum();
    Ok((total / pred.len() as f64).sqrt())
}

/// Largest absolute componentwise error.
pub fn max_abs_error(pred: &Trajectory, truth: &Trajectory) -> Result<f64> {
    check_lengths(pred, truth)?;
    Ok(pred
        .states()
        .iter()
        .zip(truth.states())
        .map(|(p, t)| (p - t).amax())
        .fold(0.0, f64::max))
}

fn scalar_series(traj: &Trajectory, what: &str) -> Result<Vec<f64>> {
    if traj.dim() != 1 {
        return Err(Error::invalid(format!(
            "{what} expects a 1-D trajectory, got dimension {}",
            traj.dim()
        )));
    }
    traj.component(0)
}

/// Counts sign changes between attractor lobes. The current lobe initializes
/// at the first sample with `|x| > threshold`; a switch is counted whenever a
/// sample beyond the threshold carries the opposite sign, whereupon the lobe
/// updates. Samples inside the band neither count nor reset. Returns the
/// count and its rate per unit time.
pub fn lobe_switches(x: &Trajectory, threshold: f64) -> Result<(usize, f64)> {
    if threshold <= 0.0 {
        return Err(Error::invalid("lobe threshold must be positive"));
    }
    let series = scalar_series(x, "lobe_switches")?;
    let mut lobe: Option<bool> = None;
    let mut count = 0usize;
    for &v in &series {
        if v.abs() <= threshold {
            continue;
        }
        let positive = v > 0.0;
        match lobe {
            None => lobe = Some(positive),
            Some(current) if current != positive => {
                count += 1;
                lobe = Some(positive);
            }
            _ => {}
        }
    }
    let duration = x.duration();
    let frequency = if duration > 0.0 { count as f64 / duration } else { 0.0 };
    Ok((count, frequency))
}

/// Counts strict interior local maxima (plateaus are not peaks) and the mean
/// time between successive peaks (0 when fewer than two peaks).
pub fn peak_stats(x: &Trajectory) -> Result<(usize, f64)> {
    let series = scalar_series(x, "peak_stats")?;
    if series.len() < 3 {
        return Err(Error::invalid("peak_stats needs at least 3 samples"));
    }
    let mut peak_times = Vec::new();
    for k in 1..series.len() - 1 {
        if series[k] > series[k - 1] && series[k] > series[k + 1] {
            peak_times.push(x.time(k));
        }
    }
    let mean_interval = if peak_times.len() >= 2 {
        let total: f64 = peak_times.windows(2).map(|w| w[1] - w[0]).sum();
        total / (peak_times.len() - 1) as f64
    } else {
        0.0
    };
    Ok((peak_times.len(), mean_interval))
}

/// Gap between predicted and true minima: `(min(pred) - min(truth),
/// t_argmin(pred) - t_argmin(truth))`, ties broken by the earliest index.
pub fn extremum_error(pred: &Trajectory, truth: &Trajectory) -> Result<(f64, f64)> {
    check_lengths(pred, truth)?;
    let p = scalar_series(pred, "extremum_error")?;
    let t = scalar_series(truth, "extremum_error")?;
    let argmin = |s: &[f64]| -> usize {
        let mut best = 0;
        for (i, &v) in s.iter().enumerate() {
            if v < s[best] {
                best = i;
            }
        }
        best
    };
    let (ip, it) = (argmin(&p), argmin(&t));
    Ok((p[ip] - t[it], pred.time(ip) - truth.time(it)))
}

/// RMS deviation about the mean; a robust proxy for oscillation amplitude.
pub fn oscillation_amplitude(series: &[f64]) -> f64 {
    if series.is_empty() {
        return 0.0;
    }
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    (series.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / series.len() as f64).sqrt()
}

/// Metrics for one (prediction, truth) pair. Lobe and peak statistics are
/// computed on component 0.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryMetrics {
    pub label: Option<String>,
    pub rmse: f64,
    pub max_abs_error: f64,
    pub lobe_switches: usize,
    pub switch_frequency: f64,
    pub peak_count: usize,
    pub mean_peak_interval: f64,
}

/// Mean and (population) standard deviation over trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub std: f64,
}

impl Aggregate {
    fn over(values: impl Iterator<Item = f64> + Clone) -> Aggregate {
        let n = values.clone().count();
        if n == 0 {
            return Aggregate { mean: 0.0, std: 0.0 };
        }
        let mean = values.clone().sum::<f64>() / n as f64;
        let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        Aggregate { mean, std: var.sqrt() }
    }
}

/// Per-trajectory metrics plus their aggregates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_trajectory: Vec<TrajectoryMetrics>,
    pub rmse: Aggregate,
    pub max_abs_error: Aggregate,
    pub lobe_switches: Aggregate,
    pub switch_frequency: Aggregate,
    pub peak_count: Aggregate,
    pub mean_peak_interval: Aggregate,
    /// Trajectories with fewer than two peaks, excluded from the
    /// mean_peak_interval aggregate.
    pub peak_interval_excluded: usize,
}

impl MetricsReport {
    pub fn from_rows(per_trajectory: Vec<TrajectoryMetrics>) -> MetricsReport {
        let rows = &per_trajectory;
        let with_intervals: Vec<f64> = rows
            .iter()
            .filter(|r| r.peak_count >= 2)
            .map(|r| r.mean_peak_interval)
            .collect();
        MetricsReport {
            rmse: Aggregate::over(rows.iter().map(|r| r.rmse)),
            max_abs_error: Aggregate::over(rows.iter().map(|r| r.max_abs_error)),
            lobe_switches: Aggregate::over(rows.iter().map(|r| r.lobe_switches as f64)),
            switch_frequency: Aggregate::over(rows.iter().map(|r| r.switch_frequency)),
            peak_count: Aggregate::over(rows.iter().map(|r| r.peak_count as f64)),
            mean_peak_interval: Aggregate::over(with_intervals.iter().copied()),
            peak_interval_excluded: rows.len() - with_intervals.len(),
            per_trajectory,
        }
    }
}

/// Computes the full per-trajectory metric row for a prediction/truth pair.
/// Chaos statistics (lobes, peaks) are evaluated on the prediction itself.
pub fn evaluate_pair(
    pred: &Trajectory,
    truth: &Trajectory,
    lobe_threshold: f64,
) -> Result<TrajectoryMetrics> {
    let scalar_view = |t: &Trajectory| -> Result<Trajectory> {
        if t.dim() == 1 {
            Ok(t.clone())
        } else {
            crate::generators::project_component(t, 0)
        }
    };
    let pred_scalar = scalar_view(pred)?;
    let (switches, frequency) = lobe_switches(&pred_scalar, lobe_threshold)?;
    let (peaks, interval) = if pred_scalar.len() >= 3 {
        peak_stats(&pred_scalar)?
    } else {
        (0, 0.0)
    };
    Ok(TrajectoryMetrics {
        label: truth.label().map(String::from),
        rmse: rmse(pred, truth)?,
        max_abs_error: max_abs_error(pred, truth)?,
        lobe_switches: switches,
        switch_frequency: frequency,
        peak_count: peaks,
        mean_peak_interval: interval,
    })
}
