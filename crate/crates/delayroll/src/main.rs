//! Experiment runner CLI. All heavy lifting lives in the library; this binary
//! parses arguments, dispatches pipeline stages, and maps errors onto exit
//! codes (2 config, 3 numerical, 4 I/O).

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use delayroll::error::{Error, Result};
use delayroll::experiment::{
    self, load_config, prepare, run, sweep, write_sweep_csv, ExperimentConfig, FittedModels,
    RunOptions, SweepSpec,
};
use delayroll::tddmd::fit_tddmd;
use delayroll::tdtf::train;

#[derive(Parser)]
#[command(name = "delayroll", version, about = "Delay-embedded forecasting experiments")]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override every stage seed (generator +0, bursts +1, init +2,
    /// shuffle +3, split +4).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the configured output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the configured dataset under `<output_dir>/data/`.
    Generate,
    /// Fit the linear delay model and write `models/tddmd.json`.
    Fit,
    /// Train the transformer and write `models/tdtf.json` plus its loss history.
    Train,
    /// Roll every configured model out of each test window and write predictions.
    Rollout,
    /// Roll out, compute metrics, and write metrics/plot CSVs.
    Evaluate,
    /// Full pipeline: generate, preprocess, fit, train, roll out, evaluate.
    Run,
    /// Train the transformer over an (n, h) grid and report mean RMSE per cell.
    Sweep {
        /// Delay lengths, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        delays: Vec<usize>,
        /// Hidden widths, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        hidden: Vec<usize>,
        /// Explicit training seeds (one round per seed).
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        /// Number of training rounds (seeds base, base+1, ...); ignored when
        /// --seeds is given.
        #[arg(long)]
        repeats: Option<usize>,
    },
    /// Parse a directory of trajectory CSVs and report a summary.
    Ingest {
        #[arg(long)]
        dir: PathBuf,
    },
}

fn require_config(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::config("--config", "a configuration file is required"))?;
    load_config(path)
}

fn options(cli: &Cli) -> RunOptions {
    RunOptions {
        seed: cli.seed,
        out: cli.out.clone(),
        quiet: cli.quiet,
    }
}

fn execute(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Generate => {
            let cfg = require_config(&cli)?;
            let (cfg, data, _prepared) = prepare(&cfg, &options(&cli))?;
            experiment::write_data(&cfg.output_dir, &cfg, &data)?;
            if !cli.quiet {
                println!(
                    "wrote {} trajectories to {}",
                    data.trajectories.len(),
                    cfg.output_dir.join("data").display()
                );
            }
            Ok(())
        }
        Command::Fit => {
            let cfg = require_config(&cli)?;
            let (cfg, _data, prepared) = prepare(&cfg, &options(&cli))?;
            let section = cfg
                .models
                .tddmd
                .as_ref()
                .ok_or_else(|| Error::config("models.tddmd", "fit requires a tddmd section"))?;
            let model = fit_tddmd(&prepared.bursts, section.rel_tol)?;
            let models = FittedModels {
                tddmd: Some((model, section.rel_tol)),
                tdtf: None,
            };
            experiment::write_models(&cfg.output_dir, &models, &prepared.normalizer)?;
            if !cli.quiet {
                println!("wrote {}", cfg.output_dir.join("models/tddmd.json").display());
            }
            Ok(())
        }
        Command::Train => {
            let cfg = require_config(&cli)?;
            let (cfg, _data, prepared) = prepare(&cfg, &options(&cli))?;
            let section = cfg
                .models
                .tdtf
                .as_ref()
                .ok_or_else(|| Error::config("models.tdtf", "train requires a tdtf section"))?;
            let model_cfg = section.model_config(prepared.bursts.n(), prepared.bursts.d())?;
            let train_cfg = section.train_config();
            let (params, loss_history) = train(&model_cfg, &train_cfg, &prepared.bursts)?;
            if !cli.quiet {
                println!(
                    "trained {} epochs, final loss {:.6e}",
                    loss_history.len(),
                    loss_history.last().copied().unwrap_or(f64::NAN)
                );
            }
            let models = FittedModels {
                tddmd: None,
                tdtf: Some(experiment::FittedTdtf {
                    config: model_cfg,
                    params,
                    train_config: train_cfg,
                    loss_history,
                }),
            };
            experiment::write_models(&cfg.output_dir, &models, &prepared.normalizer)?;
            Ok(())
        }
        Command::Rollout | Command::Evaluate => {
            let cfg = require_config(&cli)?;
            let (cfg, data, prepared) = prepare(&cfg, &options(&cli))?;
            let models = experiment::load_or_fit_models(&cfg, &prepared)?;
            let pool = experiment::thread_pool()?;
            let evaluation =
                pool.install(|| experiment::evaluate(&cfg, &prepared, &models, data.rd.as_ref()))?;
            experiment::write_models(&cfg.output_dir, &models, &prepared.normalizer)?;
            for (model, preds) in &evaluation.predictions {
                for (i, pred) in preds.iter().enumerate() {
                    let name = pred
                        .label()
                        .map(str::to_string)
                        .unwrap_or_else(|| format!("trajectory-{i:03}"));
                    let safe: String = name
                        .chars()
                        .map(|c| if c.is_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
                        .collect();
                    delayroll::io::write_trajectory_csv(
                        &cfg.output_dir.join("predictions").join(format!("{safe}.{model}.csv")),
                        pred,
                    )?;
                }
            }
            if matches!(cli.command, Command::Evaluate) {
                experiment::write_eval_artifacts(&cfg.output_dir, &evaluation)?;
            }
            if !cli.quiet {
                for (model, report) in &evaluation.reports {
                    println!("{model}: mean rmse {:.6e}", report.rmse.mean);
                }
            }
            Ok(())
        }
        Command::Run => {
            let cfg = require_config(&cli)?;
            let summary = run(&cfg, &options(&cli))?;
            if !cli.quiet {
                println!("artifacts written to {}", summary.output_dir.display());
            }
            Ok(())
        }
        Command::Sweep {
            delays,
            hidden,
            seeds,
            repeats,
        } => {
            let cfg = require_config(&cli)?;
            let mut cfg = cfg;
            if let Some(seed) = cli.seed {
                cfg.override_seed(seed);
            }
            if let Some(out) = &cli.out {
                cfg.output_dir = out.clone();
            }
            let seeds = if !seeds.is_empty() {
                seeds.clone()
            } else {
                let base = cli.seed.unwrap_or(0);
                let r = repeats.unwrap_or(1).max(1);
                (0..r as u64).map(|i| base + i).collect()
            };
            let spec = SweepSpec {
                delays: delays.clone(),
                hidden: hidden.clone(),
                seeds,
            };
            let rows = sweep(&cfg, &spec)?;
            let path = cfg.output_dir.join("sweep.csv");
            write_sweep_csv(&path, &rows)?;
            if !cli.quiet {
                for row in &rows {
                    println!(
                        "n={} h={} mean_rmse={} std_rmse={} ({})",
                        row.n, row.h, row.mean_rmse, row.std_rmse, row.status
                    );
                }
                println!("sweep table written to {}", path.display());
            }
            Ok(())
        }
        Command::Ingest { dir } => {
            let trajs = experiment::ingest_csv(dir)?;
            if !cli.quiet {
                println!("ingested {} trajectories from {}", trajs.len(), dir.display());
                for t in &trajs {
                    println!(
                        "  {}: {} states, d = {}, dt = {}",
                        t.label().unwrap_or("<unlabeled>"),
                        t.len(),
                        t.dim(),
                        t.dt()
                    );
                }
            }
            Ok(())
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = execute(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
