use std::path::{Path, PathBuf};

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::CliError;
use crate::adversary::DdpgHyper;
use crate::analysis::report::ClusterConfig;
use crate::ego::{DqnHyper, GapThresholds};
use crate::scenario::{EnvConfig, RewardConfig, ScenarioConfig};

/// Published schema of [`RunConfig`]; every config is checked against it
/// before deserialisation.
pub const RUN_CONFIG_SCHEMA: &str = include_str!("../../schemas/run_config.schema.json");

/// Environment variable naming the root under which default output
/// directories are created.
pub const OUTPUT_ROOT_ENV: &str = "ADVSCEN_OUTPUT_ROOT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EgoConfig {
    GapAcceptance {
        #[serde(default)]
        thresholds: GapThresholds,
    },
    Dqn {
        /// Q-network file; defaults to `<output_dir>/ego/q_network.json`.
        #[serde(default)]
        weights: Option<PathBuf>,
    },
}

impl EgoConfig {
    pub fn name(&self) -> &'static str {
        match self {
            EgoConfig::GapAcceptance { .. } => "gap_acceptance",
            EgoConfig::Dqn { .. } => "dqn",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Episodes per policy in `evaluate`.
    pub evaluation_episodes: usize,
    pub cluster: ClusterConfig,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self { evaluation_episodes: 200, cluster: ClusterConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct BetaSweepConfig {
    pub betas: Vec<f64>,
    /// Members per β; defaults to `hyper.ensemble_size`.
    pub ensemble_size: Option<usize>,
    /// Evaluation episodes per member.
    pub evaluation_episodes: usize,
}

impl Default for BetaSweepConfig {
    fn default() -> Self {
        Self { betas: vec![0.1, 1.0, 2.0], ensemble_size: None, evaluation_episodes: 200 }
    }
}

/// Check a β list and return it sorted ascending.
pub fn checked_betas(betas: &[f64]) -> Result<Vec<f64>, CliError> {
    if betas.len() < 2 {
        return Err(CliError::Config(format!("beta sweep needs at least two values, got {betas:?}")));
    }
    if let Some(b) = betas.iter().find(|b| !(**b > 0.0 && b.is_finite())) {
        return Err(CliError::Config(format!("beta values must be positive, got {b}")));
    }
    let mut sorted = betas.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    if sorted.len() < 2 {
        return Err(CliError::Config("beta sweep needs at least two distinct values".into()));
    }
    Ok(sorted)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub base_seed: u64,
    pub ego: EgoConfig,
    #[serde(default)]
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub reward: RewardConfig,
    /// Adversary training.
    #[serde(default)]
    pub hyper: DdpgHyper,
    /// Ego training when `ego.kind = dqn`.
    #[serde(default)]
    pub dqn: DqnHyper,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub beta_sweep: BetaSweepConfig,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn env(&self) -> EnvConfig {
        EnvConfig { scenario: self.scenario.clone(), reward: self.reward }
    }

    pub fn validate(&self) -> Result<(), String> {
        self.env().validate().map_err(|e| e.to_string())?;
        self.hyper.validate().map_err(|e| format!("/hyper: {e}"))?;
        self.dqn.validate().map_err(|e| format!("/dqn: {e}"))?;
        let c = &self.analysis.cluster;
        if self.analysis.evaluation_episodes == 0 || c.rollout_episodes == 0 || c.eval_episodes == 0 {
            return Err("/analysis: episode counts must be positive".into());
        }
        if c.bins < 2 || !(c.smoothing > 0.0) || c.lambda_k == 0 {
            return Err("/analysis/cluster: need bins >= 2, smoothing > 0 and lambda_k >= 1".into());
        }
        if c.lambda.is_some_and(|l| !(l >= 0.0)) {
            return Err("/analysis/cluster/lambda: must be non-negative".into());
        }
        if self.beta_sweep.evaluation_episodes == 0 || self.beta_sweep.ensemble_size == Some(0) {
            return Err("/beta_sweep: episode and member counts must be positive".into());
        }
        Ok(())
    }
}

/// JSON pointer of a serde path, with the missing field appended when the
/// error names one.
fn pointer(path: &serde_path_to_error::Path, message: &str) -> String {
    let mut p = String::new();
    for seg in path.iter() {
        match seg {
            serde_path_to_error::Segment::Seq { index } => p.push_str(&format!("/{index}")),
            serde_path_to_error::Segment::Map { key } | serde_path_to_error::Segment::Enum { variant: key } => {
                p.push('/');
                p.push_str(&key.replace('~', "~0").replace('/', "~1"));
            }
            serde_path_to_error::Segment::Unknown => {}
        }
    }
    if let Some(rest) = message.strip_prefix("missing field `") {
        if let Some(field) = rest.split('`').next() {
            p.push('/');
            p.push_str(field);
        }
    }
    p
}

fn schema_errors(value: &serde_json::Value) -> Result<(), CliError> {
    let schema: serde_json::Value = serde_json::from_str(RUN_CONFIG_SCHEMA).expect("embedded schema is JSON");
    let validator = jsonschema::validator_for(&schema).expect("embedded schema compiles");
    let errors: Vec<String> = validator
        .iter_errors(value)
        .map(|e| {
            let at = e.instance_path().to_string();
            format!("{}: {e}", if at.is_empty() { "/".to_owned() } else { at })
        })
        .collect();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(CliError::Config(format!("config fails schema: {}", errors.join("; "))))
    }
}

/// Parse and validate config bytes.
pub fn parse_config(bytes: &[u8]) -> Result<RunConfig, CliError> {
    let value: serde_json::Value =
        serde_json::from_slice(bytes).map_err(|e| CliError::Config(format!("config is not JSON: {e}")))?;
    schema_errors(&value)?;
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let msg = e.inner().to_string();
        let at = pointer(e.path(), &msg);
        CliError::Config(format!("{}: {msg}", if at.is_empty() { "/" } else { &at }))
    })?;
    cfg.validate().map_err(CliError::Config)?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<(RunConfig, Vec<u8>), CliError> {
    let bytes =
        std::fs::read(path).map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    Ok((parse_config(&bytes)?, bytes))
}
