//! Run configuration: a single TOML file per experiment, validated with
//! dotted field paths so errors are actionable.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::{LorenzConfig, ReactionDiffusionConfig};
use crate::tdtf::{Activation, TdtfConfig, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Sinusoid,
    Lorenz,
    ReactionDiffusion,
    ExternalCsv,
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ExperimentKind::Sinusoid => "sinusoid",
            ExperimentKind::Lorenz => "lorenz",
            ExperimentKind::ReactionDiffusion => "reaction_diffusion",
            ExperimentKind::ExternalCsv => "external_csv",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SinusoidSection {
    pub k: i64,
    pub dt: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LorenzSection {
    pub sigma: f64,
    pub rho: f64,
    pub beta: f64,
    pub dt: f64,
    pub t_final: f64,
    pub discard_fraction: f64,
    pub seed: u64,
    pub n_traj: i64,
    pub init_box: f64,
}

impl Default for LorenzSection {
    fn default() -> Self {
        let c = LorenzConfig::default();
        Self {
            sigma: c.sigma,
            rho: c.rho,
            beta: c.beta,
            dt: c.dt,
            t_final: c.t_final,
            discard_fraction: c.discard_fraction,
            seed: c.seed,
            n_traj: c.n_traj as i64,
            init_box: c.init_box,
        }
    }
}

impl LorenzSection {
    pub fn to_config(&self) -> LorenzConfig {
        LorenzConfig {
            sigma: self.sigma,
            rho: self.rho,
            beta: self.beta,
            dt: self.dt,
            t_final: self.t_final,
            discard_fraction: self.discard_fraction,
            seed: self.seed,
            n_traj: self.n_traj.max(0) as usize,
            init_box: self.init_box,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReactionDiffusionSection {
    pub diffusion: f64,
    pub epsilon: f64,
    pub alpha: f64,
    pub nx: i64,
    pub dt: f64,
    pub t_final: f64,
    pub t_discard: f64,
    pub bc_u: f64,
    pub bc_v: f64,
    pub snapshot_stride: i64,
    pub pod_modes: i64,
    /// Subtract the temporal mean before the POD (off by default).
    pub subtract_mean: bool,
}

impl Default for ReactionDiffusionSection {
    fn default() -> Self {
        let c = ReactionDiffusionConfig::default();
        Self {
            diffusion: c.diffusion,
            epsilon: c.epsilon,
            alpha: c.alpha,
            nx: c.nx as i64,
            dt: c.dt,
            t_final: c.t_final,
            t_discard: c.t_discard,
            bc_u: c.bc_u,
            bc_v: c.bc_v,
            snapshot_stride: c.snapshot_stride as i64,
            pod_modes: 3,
            subtract_mean: false,
        }
    }
}

impl ReactionDiffusionSection {
    pub fn to_config(&self) -> ReactionDiffusionConfig {
        ReactionDiffusionConfig {
            diffusion: self.diffusion,
            epsilon: self.epsilon,
            alpha: self.alpha,
            nx: self.nx.max(0) as usize,
            dt: self.dt,
            t_final: self.t_final,
            t_discard: self.t_discard,
            bc_u: self.bc_u,
            bc_v: self.bc_v,
            snapshot_stride: self.snapshot_stride.max(1) as usize,
            ..ReactionDiffusionConfig::default()
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalCsvSection {
    pub data_dir: PathBuf,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeneratorSection {
    pub sinusoid: Option<SinusoidSection>,
    pub lorenz: Option<LorenzSection>,
    pub reaction_diffusion: Option<ReactionDiffusionSection>,
    pub external_csv: Option<ExternalCsvSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessingSection {
    /// Subsampling stride.
    pub tau: i64,
    /// Delay length shared by every model in the run.
    pub n: i64,
    /// Number of bursts drawn from the training split.
    pub j: i64,
    /// Seed for burst sampling.
    pub seed: u64,
    /// Optional component projection applied before subsampling.
    pub component: Option<i64>,
}

impl Default for PreprocessingSection {
    fn default() -> Self {
        Self {
            tau: 1,
            n: 1,
            j: 100,
            seed: 0,
            component: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TddmdSection {
    pub rel_tol: f64,
}

impl Default for TddmdSection {
    fn default() -> Self {
        Self {
            rel_tol: crate::tddmd::DEFAULT_REL_TOL,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TdtfSection {
    pub hidden: i64,
    pub pos_enc: bool,
    pub activation: String,
    /// Parameter initialization seed.
    pub seed: u64,
    /// Mini-batch shuffle seed.
    pub train_seed: u64,
    pub lr: f64,
    pub batch_size: i64,
    pub epochs: i64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
}

impl Default for TdtfSection {
    fn default() -> Self {
        let tc = TrainConfig::default();
        Self {
            hidden: 100,
            pos_enc: true,
            activation: "tanh".into(),
            seed: 7,
            train_seed: 8,
            lr: tc.lr,
            batch_size: tc.batch_size as i64,
            epochs: tc.epochs as i64,
            weight_decay: tc.weight_decay,
            beta1: tc.beta1,
            beta2: tc.beta2,
            eps_adam: tc.eps_adam,
        }
    }
}

impl TdtfSection {
    pub fn model_config(&self, n: usize, d: usize) -> Result<TdtfConfig> {
        Ok(TdtfConfig {
            n,
            d,
            h: self.hidden.max(0) as usize,
            pos_enc: self.pos_enc,
            activation: self.activation.parse::<Activation>()?,
            seed: self.seed,
        })
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            batch_size: self.batch_size.max(0) as usize,
            epochs: self.epochs.max(0) as usize,
            weight_decay: self.weight_decay,
            beta1: self.beta1,
            beta2: self.beta2,
            eps_adam: self.eps_adam,
            seed: self.train_seed,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelsSection {
    pub tddmd: Option<TddmdSection>,
    pub tdtf: Option<TdtfSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationSection {
    /// Fraction of trajectories held out for testing; 0 evaluates on the
    /// full set (single-trajectory experiments reconstruct themselves).
    pub test_fraction: f64,
    pub split_seed: u64,
    /// Rollout length in steps; omitted means "to the end of each test
    /// trajectory".
    pub rollout_steps: Option<i64>,
    pub lobe_threshold: f64,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        Self {
            test_fraction: 0.0,
            split_seed: 1234,
            rollout_steps: None,
            lobe_threshold: crate::metrics::DEFAULT_LOBE_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub generator: GeneratorSection,
    #[serde(default)]
    pub preprocessing: PreprocessingSection,
    #[serde(default)]
    pub models: ModelsSection,
    #[serde(default)]
    pub evaluation: EvaluationSection,
}

impl ExperimentConfig {
    /// Semantic validation with dotted field paths.
    pub fn validate(&self) -> Result<()> {
        match self.experiment {
            ExperimentKind::Sinusoid => {
                let g = self.generator.sinusoid.as_ref().ok_or_else(|| {
                    Error::config("generator.sinusoid", "section required for the sinusoid experiment")
                })?;
                if g.k < 1 {
                    return Err(Error::config("generator.sinusoid.k", "must be >= 1"));
                }
                if !(g.dt > 0.0) {
                    return Err(Error::config("generator.sinusoid.dt", "must be positive"));
                }
            }
            ExperimentKind::Lorenz => {
                let g = self.generator.lorenz.as_ref().ok_or_else(|| {
                    Error::config("generator.lorenz", "section required for the lorenz experiment")
                })?;
                if g.n_traj < 1 {
                    return Err(Error::config("generator.lorenz.n_traj", "must be >= 1"));
                }
                g.to_config()
                    .validate()
                    .map_err(|e| Error::config("generator.lorenz", e.to_string()))?;
            }
            ExperimentKind::ReactionDiffusion => {
                let g = self.generator.reaction_diffusion.as_ref().ok_or_else(|| {
                    Error::config(
                        "generator.reaction_diffusion",
                        "section required for the reaction_diffusion experiment",
                    )
                })?;
                if g.nx < 3 {
                    return Err(Error::config("generator.reaction_diffusion.nx", "must be >= 3"));
                }
                if g.snapshot_stride < 1 {
                    return Err(Error::config(
                        "generator.reaction_diffusion.snapshot_stride",
                        "must be >= 1",
                    ));
                }
                if g.pod_modes < 1 {
                    return Err(Error::config("generator.reaction_diffusion.pod_modes", "must be >= 1"));
                }
                g.to_config()
                    .validate()
                    .map_err(|e| Error::config("generator.reaction_diffusion", e.to_string()))?;
            }
            ExperimentKind::ExternalCsv => {
                let g = self.generator.external_csv.as_ref().ok_or_else(|| {
                    Error::config(
                        "generator.external_csv",
                        "section required for the external_csv experiment",
                    )
                })?;
                if g.data_dir.as_os_str().is_empty() {
                    return Err(Error::config("generator.external_csv.data_dir", "must not be empty"));
                }
            }
        }

        if self.preprocessing.tau < 1 {
            return Err(Error::config("preprocessing.tau", "must be >= 1"));
        }
        if self.preprocessing.n < 1 {
            return Err(Error::config("preprocessing.n", "must be >= 1"));
        }
        if self.preprocessing.j < 1 {
            return Err(Error::config("preprocessing.j", "must be >= 1"));
        }
        if let Some(c) = self.preprocessing.component {
            if c < 0 {
                return Err(Error::config("preprocessing.component", "must be >= 0"));
            }
        }

        if self.models.tddmd.is_none() && self.models.tdtf.is_none() {
            return Err(Error::config("models", "at least one of models.tddmd / models.tdtf is required"));
        }
        if let Some(m) = &self.models.tddmd {
            if !(m.rel_tol >= 0.0) {
                return Err(Error::config("models.tddmd.rel_tol", "must be >= 0"));
            }
        }
        if let Some(m) = &self.models.tdtf {
            if m.hidden < 1 {
                return Err(Error::config("models.tdtf.hidden", "must be >= 1"));
            }
            if !(m.lr > 0.0) {
                return Err(Error::config("models.tdtf.lr", "must be positive"));
            }
            if m.batch_size < 1 {
                return Err(Error::config("models.tdtf.batch_size", "must be >= 1"));
            }
            if m.epochs < 1 {
                return Err(Error::config("models.tdtf.epochs", "must be >= 1"));
            }
            if m.weight_decay < 0.0 {
                return Err(Error::config("models.tdtf.weight_decay", "must be >= 0"));
            }
            for (name, b) in [("beta1", m.beta1), ("beta2", m.beta2)] {
                if !(0.0 < b && b < 1.0) {
                    return Err(Error::config(format!("models.tdtf.{name}"), "must lie in (0, 1)"));
                }
            }
            if !(m.eps_adam > 0.0) {
                return Err(Error::config("models.tdtf.eps_adam", "must be positive"));
            }
            m.activation
                .parse::<Activation>()
                .map_err(|e| Error::config("models.tdtf.activation", e.to_string()))?;
        }

        if !(0.0..1.0).contains(&self.evaluation.test_fraction) {
            return Err(Error::config("evaluation.test_fraction", "must lie in [0, 1)"));
        }
        if let Some(steps) = self.evaluation.rollout_steps {
            if steps < 0 {
                return Err(Error::config("evaluation.rollout_steps", "must be >= 0"));
            }
        }
        if !(self.evaluation.lobe_threshold > 0.0) {
            return Err(Error::config("evaluation.lobe_threshold", "must be positive"));
        }
        Ok(())
    }

    /// Applies the CLI seed override: every stage seed is derived from the
    /// given base with fixed offsets (generator +0, bursts +1, init +2,
    /// shuffle +3, split +4).
    pub fn override_seed(&mut self, seed: u64) {
        if let Some(g) = &mut self.generator.lorenz {
            g.seed = seed;
        }
        self.preprocessing.seed = seed.wrapping_add(1);
        if let Some(m) = &mut self.models.tdtf {
            m.seed = seed.wrapping_add(2);
            m.train_seed = seed.wrapping_add(3);
        }
        self.evaluation.split_seed = seed.wrapping_add(4);
    }
}

/// Reads and validates a TOML experiment configuration.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    let cfg: ExperimentConfig = toml::from_str(&text).map_err(|e| Error::Config {
        field: path.display().to_string(),
        message: e.to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_sinusoid_toml() -> String {
        r#"
experiment = "sinusoid"
output_dir = "out"

[generator.sinusoid]
k = 200
dt = 0.125

[preprocessing]
tau = 1
n = 2
j = 10

[models.tddmd]
rel_tol = 1e-10
"#
        .to_string()
    }

    #[test]
    fn parses_minimal_config() {
        let cfg: ExperimentConfig = toml::from_str(&minimal_sinusoid_toml()).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.experiment, ExperimentKind::Sinusoid);
        assert!(cfg.models.tddmd.is_some());
        assert!(cfg.models.tdtf.is_none());
    }

    #[test]
    fn negative_tau_names_the_field() {
        let text = minimal_sinusoid_toml().replace("tau = 1", "tau = -3");
        let cfg: ExperimentConfig = toml::from_str(&text).unwrap();
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("preprocessing.tau"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn missing_models_section_is_rejected() {
        let text = minimal_sinusoid_toml().replace("[models.tddmd]\nrel_tol = 1e-10", "");
        let cfg: ExperimentConfig = toml::from_str(&text).unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = minimal_sinusoid_toml() + "\n[nonsense]\nx = 1\n";
        assert!(toml::from_str::<ExperimentConfig>(&text).is_err());
    }

    #[test]
    fn seed_override_fans_out() {
        let mut cfg: ExperimentConfig = toml::from_str(&minimal_sinusoid_toml()).unwrap();
        cfg.models.tdtf = Some(TdtfSection::default());
        cfg.override_seed(100);
        assert_eq!(cfg.preprocessing.seed, 101);
        assert_eq!(cfg.models.tdtf.as_ref().unwrap().seed, 102);
        assert_eq!(cfg.models.tdtf.as_ref().unwrap().train_seed, 103);
        assert_eq!(cfg.evaluation.split_seed, 104);
    }
}
