//! Grid sweep over delay length and hidden width, averaged across repeated
//! training rounds.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::runner::{generate_data, thread_pool, GeneratedData};
use crate::data::{sample_bursts, Normalizer, Trajectory};
use crate::error::{Error, Result};
use crate::metrics::rmse;
use crate::tdtf::{rollout_tdtf, train};

/// Grid specification; each cell is trained once per seed.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub delays: Vec<usize>,
    pub hidden: Vec<usize>,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub n: usize,
    pub h: usize,
    pub mean_rmse: f64,
    pub std_rmse: f64,
    pub status: String,
}

fn cell_rmse(
    cfg: &ExperimentConfig,
    data: &GeneratedData,
    train_set: &[Trajectory],
    test_set: &[Trajectory],
    normalizer: &Normalizer,
    n: usize,
    h: usize,
    seed: u64,
) -> Result<f64> {
    let _ = data;
    let section = cfg.models.tdtf.as_ref().ok_or_else(|| {
        Error::config("models.tdtf", "sweep requires a tdtf model section")
    })?;
    let normalized_train: Vec<Trajectory> = train_set
        .iter()
        .map(|t| normalizer.normalize_trajectory(t))
        .collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.preprocessing.seed);
    let bursts = sample_bursts(&normalized_train, n, cfg.preprocessing.j as usize, &mut rng)?;

    let mut model_cfg = section.model_config(n, bursts.d())?;
    model_cfg.h = h;
    model_cfg.seed = seed;
    let mut train_cfg = section.train_config();
    train_cfg.seed = seed;
    let (params, _) = train(&model_cfg, &train_cfg, &bursts)?;

    let mut total = 0.0;
    let mut count = 0usize;
    for test in test_set {
        if test.len() < n + 1 {
            continue;
        }
        let steps = test.len() - n;
        let pred = rollout_tdtf(&model_cfg, &params, normalizer, &test.head(n)?, steps)?;
        total += rmse(&pred, test)?;
        count += 1;
    }
    if count == 0 {
        return Err(Error::invalid("no test trajectory is long enough for the sweep cell"));
    }
    Ok(total / count as f64)
}

/// Runs the grid; cells execute concurrently and failures are recorded per
/// cell without aborting the sweep.
pub fn sweep(cfg: &ExperimentConfig, spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    if spec.delays.is_empty() || spec.hidden.is_empty() || spec.seeds.is_empty() {
        return Err(Error::invalid("sweep grid and seed list must be non-empty"));
    }
    cfg.validate()?;
    if cfg.models.tdtf.is_none() {
        return Err(Error::config("models.tdtf", "sweep requires a tdtf model section"));
    }

    // Shared across cells: the dataset, split, and normalizer do not depend
    // on (n, h).
    let data = generate_data(cfg)?;
    let pre = &cfg.preprocessing;
    let mut trajs = Vec::with_capacity(data.trajectories.len());
    for t in &data.trajectories {
        let projected = match pre.component {
            Some(c) => crate::generators::project_component(t, c as usize)?,
            None => t.clone(),
        };
        trajs.push(projected.subsample(pre.tau as usize)?);
    }
    let (train_set, test_set) = super::runner::split_trajectories(
        &trajs,
        cfg.evaluation.test_fraction,
        cfg.evaluation.split_seed,
    );
    let normalizer = Normalizer::fit(&train_set)?;

    let cells: Vec<(usize, usize)> = spec
        .delays
        .iter()
        .flat_map(|&n| spec.hidden.iter().map(move |&h| (n, h)))
        .collect();

    let pool = thread_pool()?;
    let rows = pool.install(|| {
        cells
            .par_iter()
            .map(|&(n, h)| {
                let mut values = Vec::with_capacity(spec.seeds.len());
                for &seed in &spec.seeds {
                    match cell_rmse(cfg, &data, &train_set, &test_set, &normalizer, n, h, seed) {
                        Ok(v) => values.push(v),
                        Err(e) => {
                            return SweepRow {
                                n,
                                h,
                                mean_rmse: f64::NAN,
                                std_rmse: f64::NAN,
                                status: format!("error: {e}"),
                            }
                        }
                    }
                }
                let mean = values.iter().sum::<f64>() / values.len() as f64;
                let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                    / values.len() as f64;
                SweepRow {
                    n,
                    h,
                    mean_rmse: mean,
                    std_rmse: var.sqrt(),
                    status: "ok".into(),
                }
            })
            .collect::<Vec<_>>()
    });
    Ok(rows)
}

/// Writes sweep results as CSV.
pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut csv = String::from("n,h,mean_rmse,std_rmse,status\n");
    for row in rows {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            row.n, row.h, row.mean_rmse, row.std_rmse, row.status
        ));
    }
    fs::write(path, csv)?;
    Ok(())
}
