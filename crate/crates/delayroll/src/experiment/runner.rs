//! The experiment pipeline: generate, preprocess, fit/train, roll out,
//! evaluate, and write artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, ExperimentKind};
use super::ingest::ingest_csv;
use crate::data::{sample_bursts, BurstDataset, Normalizer, Trajectory};
use crate::error::{Error, Result};
use crate::generators::{
    compute_pod, gen_lorenz, gen_sinusoid, project_component, solve_reaction_diffusion, PodBasis,
    SnapshotSeries,
};
use crate::io;
use crate::metrics::{evaluate_pair, oscillation_amplitude, MetricsReport, TrajectoryMetrics};
use crate::tddmd::{fit_tddmd, TddmdModel};
use crate::tdtf::{rollout_tdtf, train, TdtfConfig, TdtfParams, TrainConfig};

/// CLI-level options applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub quiet: bool,
}

/// Builds the worker pool, honoring the `DELAYROLL_THREADS` cap.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var("DELAYROLL_THREADS") {
        let n: usize = raw
            .parse()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| Error::invalid(format!("DELAYROLL_THREADS must be a positive integer, got `{raw}`")))?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::Numerical(format!("failed to build thread pool: {e}")))
}

/// Extra context carried by reaction-diffusion runs for field reconstruction.
pub struct RdContext {
    pub basis: PodBasis,
    pub series: SnapshotSeries,
    /// Temporal mean removed before the POD, when configured.
    pub mean: Option<nalgebra::DVector<f64>>,
}

pub struct GeneratedData {
    pub trajectories: Vec<Trajectory>,
    pub rd: Option<RdContext>,
}

/// Runs the configured generator (or ingests external CSVs).
pub fn generate_data(cfg: &ExperimentConfig) -> Result<GeneratedData> {
    match cfg.experiment {
        ExperimentKind::Sinusoid => {
            let g = cfg.generator.sinusoid.as_ref().expect("validated");
            Ok(GeneratedData {
                trajectories: vec![gen_sinusoid(g.k as usize, g.dt)?],
                rd: None,
            })
        }
        ExperimentKind::Lorenz => {
            let g = cfg.generator.lorenz.as_ref().expect("validated");
            Ok(GeneratedData {
                trajectories: gen_lorenz(&g.to_config())?,
                rd: None,
            })
        }
        ExperimentKind::ReactionDiffusion => {
            let g = cfg.generator.reaction_diffusion.as_ref().expect("validated");
            let series = solve_reaction_diffusion(&g.to_config())?;
            let (snaps, mean) = if g.subtract_mean {
                let m = series.snapshots.ncols() as f64;
                let mean = series.snapshots.column_sum() / m;
                let mut centered = series.snapshots.clone();
                for mut col in centered.column_iter_mut() {
                    col -= &mean;
                }
                (centered, Some(mean))
            } else {
                (series.snapshots.clone(), None)
            };
            let t0 = series.times.first().copied().unwrap_or(0.0);
            let (basis, coeffs) = compute_pod(&snaps, g.pod_modes as usize, series.snapshot_dt, t0)?;
            Ok(GeneratedData {
                trajectories: vec![coeffs],
                rd: Some(RdContext { basis, series, mean }),
            })
        }
        ExperimentKind::ExternalCsv => {
            let g = cfg.generator.external_csv.as_ref().expect("validated");
            Ok(GeneratedData {
                trajectories: ingest_csv(&g.data_dir)?,
                rd: None,
            })
        }
    }
}

pub struct PreparedData {
    /// Preprocessed trajectories in native units.
    pub train: Vec<Trajectory>,
    pub test: Vec<Trajectory>,
    pub normalizer: Normalizer,
    /// Bursts drawn from the normalized training split.
    pub bursts: BurstDataset,
}

/// Projection, subsampling, train/test split, normalization, burst sampling.
pub fn preprocess(cfg: &ExperimentConfig, data: &GeneratedData) -> Result<PreparedData> {
    let pre = &cfg.preprocessing;
    let mut trajs = Vec::with_capacity(data.trajectories.len());
    for t in &data.trajectories {
        let projected = match pre.component {
            Some(c) => project_component(t, c as usize)?,
            None => t.clone(),
        };
        trajs.push(projected.subsample(pre.tau as usize)?);
    }

    let (train_set, test_set) =
        split_trajectories(&trajs, cfg.evaluation.test_fraction, cfg.evaluation.split_seed);
    let normalizer = Normalizer::fit(&train_set)?;
    let normalized_train: Vec<Trajectory> = train_set
        .iter()
        .map(|t| normalizer.normalize_trajectory(t))
        .collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(pre.seed);
    let bursts = sample_bursts(&normalized_train, pre.n as usize, pre.j as usize, &mut rng)?;
    Ok(PreparedData {
        train: train_set,
        test: test_set,
        normalizer,
        bursts,
    })
}

/// Seeded-shuffle split. A zero fraction evaluates on the full set.
pub(crate) fn split_trajectories(
    trajs: &[Trajectory],
    test_fraction: f64,
    seed: u64,
) -> (Vec<Trajectory>, Vec<Trajectory>) {
    if test_fraction <= 0.0 || trajs.len() < 2 {
        return (trajs.to_vec(), trajs.to_vec());
    }
    let mut indices: Vec<usize> = (0..trajs.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let n_test = ((trajs.len() as f64 * test_fraction).round() as usize)
        .clamp(1, trajs.len() - 1);
    let mut test_idx = indices[..n_test].to_vec();
    let mut train_idx = indices[n_test..].to_vec();
    test_idx.sort_unstable();
    train_idx.sort_unstable();
    (
        train_idx.iter().map(|&i| trajs[i].clone()).collect(),
        test_idx.iter().map(|&i| trajs[i].clone()).collect(),
    )
}

pub struct FittedTdtf {
    pub config: TdtfConfig,
    pub params: TdtfParams,
    pub train_config: TrainConfig,
    pub loss_history: Vec<f64>,
}

#[derive(Default)]
pub struct FittedModels {
    pub tddmd: Option<(TddmdModel, f64)>,
    pub tdtf: Option<FittedTdtf>,
}

/// Fits every configured model on the burst dataset.
pub fn fit_models(cfg: &ExperimentConfig, prepared: &PreparedData) -> Result<FittedModels> {
    let mut out = FittedModels::default();
    if let Some(section) = &cfg.models.tddmd {
        let model = fit_tddmd(&prepared.bursts, section.rel_tol)?;
        out.tddmd = Some((model, section.rel_tol));
    }
    if let Some(section) = &cfg.models.tdtf {
        let model_cfg = section.model_config(prepared.bursts.n(), prepared.bursts.d())?;
        let train_cfg = section.train_config();
        let (params, loss_history) = train(&model_cfg, &train_cfg, &prepared.bursts)?;
        out.tdtf = Some(FittedTdtf {
            config: model_cfg,
            params,
            train_config: train_cfg,
            loss_history,
        });
    }
    Ok(out)
}

pub struct EvaluationOutput {
    /// Keyed by model name ("tddmd", "tdtf").
    pub reports: BTreeMap<String, MetricsReport>,
    /// Auxiliary scalars per model (reaction-diffusion amplitude ratios,
    /// field reconstruction errors).
    pub extras: BTreeMap<String, BTreeMap<String, f64>>,
    /// Predicted trajectories per model, one per test trajectory.
    pub predictions: BTreeMap<String, Vec<Trajectory>>,
    /// Truth slices aligned with the predictions.
    pub truths: Vec<Trajectory>,
}

fn rollout_one(
    model: &str,
    models: &FittedModels,
    normalizer: &Normalizer,
    window: &Trajectory,
    steps: usize,
) -> Result<Trajectory> {
    match model {
        "tddmd" => {
            let (m, _) = models.tddmd.as_ref().expect("requested model exists");
            let normalized = normalizer.normalize_trajectory(window)?;
            let pred = m.rollout(&normalized, steps)?;
            normalizer.denormalize_trajectory(&pred)
        }
        "tdtf" => {
            let f = models.tdtf.as_ref().expect("requested model exists");
            rollout_tdtf(&f.config, &f.params, normalizer, window, steps)
        }
        other => Err(Error::invalid(format!("unknown model `{other}`"))),
    }
}

/// Rolls every configured model out of each test trajectory's leading window
/// and collects metrics. Test trajectories are processed in parallel with
/// ordered collection.
pub fn evaluate(
    cfg: &ExperimentConfig,
    prepared: &PreparedData,
    models: &FittedModels,
    rd: Option<&RdContext>,
) -> Result<EvaluationOutput> {
    let n = prepared.bursts.n();
    let model_names: Vec<&str> = ["tddmd", "tdtf"]
        .into_iter()
        .filter(|name| match *name {
            "tddmd" => models.tddmd.is_some(),
            _ => models.tdtf.is_some(),
        })
        .collect();

    let per_traj: Vec<Result<(Trajectory, Vec<(String, Trajectory, TrajectoryMetrics)>)>> = prepared
        .test
        .par_iter()
        .map(|test| {
            if test.len() < n + 1 {
                return Err(Error::invalid(format!(
                    "test trajectory `{}` is shorter than n + 1 = {}",
                    test.label().unwrap_or("?"),
                    n + 1
                )));
            }
            let available = test.len() - n;
            let steps = match cfg.evaluation.rollout_steps {
                Some(s) => {
                    let s = s as usize;
                    if s > available {
                        return Err(Error::config(
                            "evaluation.rollout_steps",
                            format!("requested {s} steps but only {available} are available"),
                        ));
                    }
                    s
                }
                None => available,
            };
            let truth = test.head(n + steps)?;
            let window = test.head(n)?;
            let mut rows = Vec::new();
            for name in &model_names {
                let pred = rollout_one(name, models, &prepared.normalizer, &window, steps)?;
                let metrics = evaluate_pair(&pred, &truth, cfg.evaluation.lobe_threshold)?;
                rows.push((name.to_string(), pred, metrics));
            }
            Ok((truth, rows))
        })
        .collect();

    let mut reports: BTreeMap<String, Vec<TrajectoryMetrics>> = BTreeMap::new();
    let mut predictions: BTreeMap<String, Vec<Trajectory>> = BTreeMap::new();
    let mut truths = Vec::new();
    for item in per_traj {
        let (truth, rows) = item?;
        truths.push(truth);
        for (name, pred, metrics) in rows {
            reports.entry(name.clone()).or_default().push(metrics);
            predictions.entry(name).or_default().push(pred);
        }
    }

    let reports: BTreeMap<String, MetricsReport> = reports
        .into_iter()
        .map(|(name, rows)| (name, MetricsReport::from_rows(rows)))
        .collect();

    let mut extras: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    if let Some(rd) = rd {
        for name in &model_names {
            let map = rd_extras(cfg, rd, &predictions[*name], &truths)?;
            extras.insert(name.to_string(), map);
        }
    }

    Ok(EvaluationOutput {
        reports,
        extras,
        predictions,
        truths,
    })
}

/// Reaction-diffusion diagnostics: per-mode amplitude ratio over the final
/// third of the horizon, plus full-field reconstruction RMSE.
fn rd_extras(
    cfg: &ExperimentConfig,
    rd: &RdContext,
    preds: &[Trajectory],
    truths: &[Trajectory],
) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    let (pred, truth) = match (preds.first(), truths.first()) {
        (Some(p), Some(t)) => (p, t),
        _ => return Ok(out),
    };
    let tail = pred.len() - pred.len() / 3;
    for mode in 0..pred.dim() {
        let p: Vec<f64> = pred.component(mode)?[tail..].to_vec();
        let t: Vec<f64> = truth.component(mode)?[tail..].to_vec();
        let ratio = oscillation_amplitude(&p) / oscillation_amplitude(&t).max(1e-300);
        out.insert(format!("amplitude_ratio_mode{mode}"), ratio);
    }

    // Field reconstruction error against the reference solution, sampled at
    // the coefficient cadence.
    let tau = cfg.preprocessing.tau as usize;
    let mut err2 = 0.0;
    let mut count = 0usize;
    for (k, state) in pred.states().iter().enumerate() {
        let col = k * tau;
        if col >= rd.series.snapshots.ncols() {
            break;
        }
        let mut rec = rd.basis.reconstruct(state);
        if let Some(mean) = &rd.mean {
            rec += mean;
        }
        let truth_col = rd.series.snapshots.column(col);
        err2 += (rec - truth_col).norm_squared();
        count += rd.series.snapshots.nrows();
    }
    if count > 0 {
        out.insert("field_rmse".into(), (err2 / count as f64).sqrt());
    }
    Ok(out)
}

#[derive(Serialize)]
struct MetricsArtifact<'a> {
    models: &'a BTreeMap<String, MetricsReport>,
    extras: &'a BTreeMap<String, BTreeMap<String, f64>>,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    version: &'static str,
    config: &'a ExperimentConfig,
    train_trajectories: usize,
    test_labels: Vec<String>,
    normalizer: &'a Normalizer,
    notes: Vec<String>,
}

pub struct RunSummary {
    pub output_dir: PathBuf,
    pub reports: BTreeMap<String, MetricsReport>,
    pub extras: BTreeMap<String, BTreeMap<String, f64>>,
}

fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn traj_name(traj: &Trajectory, index: usize) -> String {
    match traj.label() {
        Some(l) => sanitize(l),
        None => format!("trajectory-{index:03}"),
    }
}

pub fn write_models(out_dir: &Path, models: &FittedModels, normalizer: &Normalizer) -> Result<()> {
    let dir = out_dir.join("models");
    if let Some((model, rel_tol)) = &models.tddmd {
        crate::tddmd::save_tddmd(&dir.join("tddmd.json"), model, normalizer, *rel_tol)?;
    }
    if let Some(f) = &models.tdtf {
        let final_loss = f.loss_history.last().copied().unwrap_or(f64::NAN);
        crate::tdtf::save_tdtf(
            &dir.join("tdtf.json"),
            &f.config,
            &f.params,
            normalizer,
            &f.train_config,
            final_loss,
        )?;
        let mut csv = String::from("epoch,mean_loss\n");
        for (epoch, loss) in f.loss_history.iter().enumerate() {
            csv.push_str(&format!("{epoch},{loss}\n"));
        }
        fs::create_dir_all(&dir)?;
        fs::write(dir.join("tdtf_loss.csv"), csv)?;
    }
    Ok(())
}

fn write_predictions(out_dir: &Path, evaluation: &EvaluationOutput) -> Result<()> {
    let dir = out_dir.join("predictions");
    for (model, preds) in &evaluation.predictions {
        for (i, pred) in preds.iter().enumerate() {
            let name = format!("{}.{model}.csv", traj_name(pred, i));
            io::write_trajectory_csv(&dir.join(name), pred)?;
        }
    }
    Ok(())
}

/// Tidy per-trajectory CSV with truth and model columns for plotting.
fn write_plots(out_dir: &Path, evaluation: &EvaluationOutput) -> Result<()> {
    let dir = out_dir.join("plots");
    fs::create_dir_all(&dir)?;
    let models: Vec<&String> = evaluation.predictions.keys().collect();
    for (i, truth) in evaluation.truths.iter().enumerate() {
        let d = truth.dim();
        let suffix = |base: &str, c: usize| {
            if d == 1 {
                base.to_string()
            } else {
                format!("{base}{c}")
            }
        };
        let mut file = fs::File::create(dir.join(format!("{}.csv", traj_name(truth, i))))?;
        write!(file, "t")?;
        for c in 0..d {
            write!(file, ",{}", suffix("truth", c))?;
        }
        for m in &models {
            for c in 0..d {
                write!(file, ",{}", suffix(m, c))?;
            }
        }
        writeln!(file)?;
        for k in 0..truth.len() {
            write!(file, "{}", truth.time(k))?;
            for c in 0..d {
                write!(file, ",{}", truth.state(k)[c])?;
            }
            for m in &models {
                let pred = &evaluation.predictions[*m][i];
                for c in 0..d {
                    write!(file, ",{}", pred.state(k)[c])?;
                }
            }
            writeln!(file)?;
        }
    }
    Ok(())
}

fn write_metrics(out_dir: &Path, evaluation: &EvaluationOutput) -> Result<()> {
    io::write_json(
        &out_dir.join("metrics.json"),
        &MetricsArtifact {
            models: &evaluation.reports,
            extras: &evaluation.extras,
        },
    )?;
    let mut csv = String::from(
        "model,label,rmse,max_abs_error,lobe_switches,switch_frequency,peak_count,mean_peak_interval\n",
    );
    for (model, report) in &evaluation.reports {
        for row in &report.per_trajectory {
            csv.push_str(&format!(
                "{model},{},{},{},{},{},{},{}\n",
                row.label.as_deref().unwrap_or(""),
                row.rmse,
                row.max_abs_error,
                row.lobe_switches,
                row.switch_frequency,
                row.peak_count,
                row.mean_peak_interval
            ));
        }
    }
    fs::write(out_dir.join("metrics.csv"), csv)?;
    Ok(())
}

/// Writes the metrics and plot artifacts for a finished evaluation.
pub fn write_eval_artifacts(out_dir: &Path, evaluation: &EvaluationOutput) -> Result<()> {
    write_plots(out_dir, evaluation)?;
    write_metrics(out_dir, evaluation)
}

fn manifest_notes(cfg: &ExperimentConfig) -> Vec<String> {
    let mut notes = Vec::new();
    if cfg.experiment == ExperimentKind::ReactionDiffusion {
        notes.push(
            "reaction-diffusion fields come from a second-order central finite-difference \
             discretization with explicit Euler stepping"
                .to_string(),
        );
        notes.push(
            "initial condition: u = -2 + 4 sin(pi x) cos(2 pi x), v = -4 + 2 sin(pi x)".to_string(),
        );
    }
    notes
}

/// Materializes the generated dataset under `<out>/data/`.
pub fn write_data(out_dir: &Path, cfg: &ExperimentConfig, data: &GeneratedData) -> Result<()> {
    let dir = out_dir.join("data");
    for (i, traj) in data.trajectories.iter().enumerate() {
        io::write_trajectory_csv(&dir.join(format!("{}.csv", traj_name(traj, i))), traj)?;
    }
    if let Some(rd) = &data.rd {
        io::write_snapshot_csv(&dir.join("snapshots.csv"), &rd.series.snapshots)?;
        let g = cfg.generator.reaction_diffusion.as_ref().expect("validated");
        io::write_json(
            &dir.join("snapshots.json"),
            &io::SnapshotManifest {
                nx: rd.series.snapshots.nrows(),
                dx: rd.series.dx,
                t0: rd.series.times.first().copied().unwrap_or(0.0),
                dt: rd.series.snapshot_dt,
                n_snapshots: rd.series.snapshots.ncols(),
                solver: "central-fd/explicit-euler".into(),
                initial_condition: format!("{:?}", g.to_config().initial),
            },
        )?;
        io::write_json(&dir.join("pod_basis.json"), &rd.basis)?;
    }
    Ok(())
}

/// End-to-end pipeline: generate, preprocess, fit, train, roll out, evaluate,
/// and write every artifact. Idempotent for a fixed config.
pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunSummary> {
    let mut cfg = cfg.clone();
    if let Some(seed) = opts.seed {
        cfg.override_seed(seed);
    }
    if let Some(out) = &opts.out {
        cfg.output_dir = out.clone();
    }
    cfg.validate()?;

    let pool = thread_pool()?;
    pool.install(|| {
        let out_dir = cfg.output_dir.clone();
        fs::create_dir_all(&out_dir)?;

        let data = generate_data(&cfg)?;
        let prepared = preprocess(&cfg, &data)?;
        let models = fit_models(&cfg, &prepared)?;
        let evaluation = evaluate(&cfg, &prepared, &models, data.rd.as_ref())?;

        io::write_json(
            &out_dir.join("manifest.json"),
            &RunManifest {
                version: env!("CARGO_PKG_VERSION"),
                config: &cfg,
                train_trajectories: prepared.train.len(),
                test_labels: prepared
                    .test
                    .iter()
                    .enumerate()
                    .map(|(i, t)| traj_name(t, i))
                    .collect(),
                normalizer: &prepared.normalizer,
                notes: manifest_notes(&cfg),
            },
        )?;
        write_models(&out_dir, &models, &prepared.normalizer)?;
        write_predictions(&out_dir, &evaluation)?;
        write_plots(&out_dir, &evaluation)?;
        write_metrics(&out_dir, &evaluation)?;

        if !opts.quiet {
            for (model, report) in &evaluation.reports {
                println!(
                    "{model}: rmse {:.6e} (mean over {} test trajectories), \
                     switches {:.2}, peaks {:.2}",
                    report.rmse.mean,
                    report.per_trajectory.len(),
                    report.lobe_switches.mean,
                    report.peak_count.mean
                );
            }
            for (model, extras) in &evaluation.extras {
                for (key, value) in extras {
                    println!("{model}: {key} = {value:.6}");
                }
            }
        }

        Ok(RunSummary {
            output_dir: out_dir,
            reports: evaluation.reports,
            extras: evaluation.extras,
        })
    })
}

/// Pipeline prefix shared by the staged subcommands: everything up to (not
/// including) model fitting.
pub fn prepare(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<(ExperimentConfig, GeneratedData, PreparedData)> {
    let mut cfg = cfg.clone();
    if let Some(seed) = opts.seed {
        cfg.override_seed(seed);
    }
    if let Some(out) = &opts.out {
        cfg.output_dir = out.clone();
    }
    cfg.validate()?;
    let data = generate_data(&cfg)?;
    let prepared = preprocess(&cfg, &data)?;
    Ok((cfg, data, prepared))
}

/// Loads previously saved models from `<out>/models/` when present,
/// otherwise fits them from the prepared data.
pub fn load_or_fit_models(cfg: &ExperimentConfig, prepared: &PreparedData) -> Result<FittedModels> {
    let dir = cfg.output_dir.join("models");
    let mut out = FittedModels::default();
    if let Some(section) = &cfg.models.tddmd {
        let path = dir.join("tddmd.json");
        if path.exists() {
            let (model, _, rel_tol) = crate::tddmd::load_tddmd(&path)?;
            out.tddmd = Some((model, rel_tol));
        } else {
            out.tddmd = Some((fit_tddmd(&prepared.bursts, section.rel_tol)?, section.rel_tol));
        }
    }
    if let Some(section) = &cfg.models.tdtf {
        let path = dir.join("tdtf.json");
        if path.exists() {
            let (config, params, _, train_config, final_loss) = crate::tdtf::load_tdtf(&path)?;
            out.tdtf = Some(FittedTdtf {
                config,
                params,
                train_config,
                loss_history: vec![final_loss],
            });
        } else {
            let model_cfg = section.model_config(prepared.bursts.n(), prepared.bursts.d())?;
            let train_cfg = section.train_config();
            let (params, loss_history) = train(&model_cfg, &train_cfg, &prepared.bursts)?;
            out.tdtf = Some(FittedTdtf {
                config: model_cfg,
                params,
                train_config: train_cfg,
                loss_history,
            });
        }
    }
    Ok(out)
}

/// Reconstructs the full field matrix from a coefficient trajectory.
pub fn reconstruct_field(rd: &RdContext, coeffs: &Trajectory) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(rd.basis.modes().nrows(), coeffs.len());
    for (k, state) in coeffs.states().iter().enumerate() {
        let mut rec = rd.basis.reconstruct(state);
        if let Some(mean) = &rd.mean {
            rec += mean;
        }
        out.set_column(k, &rec);
    }
    out
}
