//! State-distribution analysis of trained adversaries: Monte-Carlo rollouts,
//! PCA, histogram densities, divergences, DP-Means and outcome statistics.

pub mod cluster;
pub mod density;
pub mod pca;
pub mod report;
pub mod svg;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use cluster::{dp_means, heuristic_lambda, mean_density, ClusterResult};
pub use density::{js_divergence, kl_divergence, GridSpec, StateDensity};
pub use pca::{fit_pca, PcaProjection};

use crate::scenario::{run_episode, AdversaryController, EgoController, EnvConfig, Observation, Outcome, ScenarioError};
use crate::seed::{self, Stream};

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("densities are defined on different grids")]
    GridMismatch,
    #[error("sample covariance has rank below two")]
    DegenerateCovariance,
    #[error("{0}")]
    EmptyInput(&'static str),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

/// Observations visited under one ego/adversary pairing.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSampleSet {
    pub policy_id: String,
    pub samples: Vec<Observation>,
    pub episodes: usize,
    pub seed: u64,
}

/// Initial-condition seed of evaluation episode `episode`; shared across
/// policies so that every policy faces the same starts.
pub fn evaluation_seed(seed: u64, episode: usize) -> u64 {
    seed::derive(seed, Stream::Evaluation, episode as u64)
}

/// Pool every pre-step observation over `episodes` rollouts.
pub fn rollout_states<A, E>(
    policy_id: &str,
    env: &EnvConfig,
    adversary: &A,
    ego: &E,
    episodes: usize,
    seed: u64,
) -> Result<StateSampleSet, AnalysisError>
where
    A: AdversaryController + Clone,
    E: EgoController + Clone,
{
    if episodes == 0 {
        return Err(AnalysisError::EmptyInput("rollout needs at least one episode"));
    }
    let mut samples = Vec::new();
    for e in 0..episodes {
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, Stream::Rollout, e as u64));
        run_episode(&env.scenario, &env.reward, &mut ego.clone(), &mut adversary.clone(), &mut rng, 1.0, |tr| {
            samples.push(tr.s.observation())
        })?;
    }
    Ok(StateSampleSet { policy_id: policy_id.to_owned(), samples, episodes, seed })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
pub struct EvalReport {
    pub policy_id: String,
    pub episodes: usize,
    pub success_rate: f64,
    pub crash_rate: f64,
    pub timeout_rate: f64,
    pub mean_ego_return: f64,
    pub mean_adv_return: f64,
    pub seed: u64,
}

impl EvalReport {
    /// Standard error of the crash rate.
    pub fn crash_stderr(&self) -> f64 {
        (self.crash_rate * (1.0 - self.crash_rate) / self.episodes as f64).sqrt()
    }
}

/// One evaluation episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub episode: usize,
    pub seed: u64,
    pub outcome: Outcome,
    pub steps: u32,
    pub ego_return: f64,
    pub adv_return: f64,
}

/// Run `episodes` fresh starts drawn from [`evaluation_seed`].
pub fn evaluate_episodes<A, E>(
    env: &EnvConfig,
    adversary: &A,
    ego: &E,
    episodes: usize,
    seed: u64,
) -> Result<Vec<EpisodeResult>, AnalysisError>
where
    A: AdversaryController + Clone,
    E: EgoController + Clone,
{
    if episodes == 0 {
        return Err(AnalysisError::EmptyInput("evaluation needs at least one episode"));
    }
    (0..episodes)
        .map(|e| {
            let s = evaluation_seed(seed, e);
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let sum = run_episode(&env.scenario, &env.reward, &mut ego.clone(), &mut adversary.clone(), &mut rng, 1.0, |_| {})?;
            Ok(EpisodeResult {
                episode: e,
                seed: s,
                outcome: sum.outcome,
                steps: sum.steps,
                ego_return: sum.ego_return,
                adv_return: sum.adv_return,
            })
        })
        .collect()
}

impl EvalReport {
    pub fn from_episodes(policy_id: &str, results: &[EpisodeResult], seed: u64) -> Self {
        let n = results.len() as f64;
        let rate = |o: &[Outcome]| results.iter().filter(|r| o.contains(&r.outcome)).count() as f64 / n;
        Self {
            policy_id: policy_id.to_owned(),
            episodes: results.len(),
            success_rate: rate(&[Outcome::Success]),
            crash_rate: rate(&[Outcome::Crash]),
            timeout_rate: rate(&[Outcome::Timeout, Outcome::Running]),
            mean_ego_return: results.iter().map(|r| r.ego_return).sum::<f64>() / n,
            mean_adv_return: results.iter().map(|r| r.adv_return).sum::<f64>() / n,
            seed,
        }
    }
}

/// Outcome statistics over `episodes` fresh starts.
pub fn evaluate_policy<A, E>(
    policy_id: &str,
    env: &EnvConfig,
    adversary: &A,
    ego: &E,
    episodes: usize,
    seed: u64,
) -> Result<EvalReport, AnalysisError>
where
    A: AdversaryController + Clone,
    E: EgoController + Clone,
{
    let results = evaluate_episodes(env, adversary, ego, episodes, seed)?;
    Ok(EvalReport::from_episodes(policy_id, &results, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::Traffic;
    use crate::ego::GapAcceptance;
    use crate::scenario::{AdversaryAction, RangeDist, ScenarioConfig, ScenarioState};

    #[test]
    fn single_rollout_respects_step_bound() {
        let env = EnvConfig::default();
        let s = rollout_states("idm", &env, &Traffic::Naturalistic, &GapAcceptance::default(), 1, 0).unwrap();
        assert!(!s.samples.is_empty());
        assert!(s.samples.len() <= env.scenario.max_steps() as usize + 1);
        let again = rollout_states("idm", &env, &Traffic::Naturalistic, &GapAcceptance::default(), 1, 0).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn ego_speed_matches_larger_control_run() {
        let env = EnvConfig::default();
        let ego = GapAcceptance::default();
        // States within an episode are correlated, so compare episode-level means.
        let episode_means = |base: u64, n: u64| -> Vec<f64> {
            (0..n)
                .map(|i| {
                    let set = rollout_states("idm", &env, &Traffic::Naturalistic, &ego, 1, base + i).unwrap();
                    set.samples.iter().map(|o| o[6]).sum::<f64>() / set.samples.len() as f64
                })
                .collect()
        };
        let stats = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
            (m, var / v.len() as f64)
        };
        let (m1, se1) = stats(&episode_means(1_000, 50));
        let (m2, se2) = stats(&episode_means(5_000, 100));
        let se = (se1 + se2).sqrt();
        assert!((m1 - m2).abs() < 3.0 * se, "{m1} vs {m2} (se {se})");
    }

    /// Every surrounding vehicle brakes hard.
    #[derive(Clone)]
    struct FullBrake;

    impl AdversaryController for FullBrake {
        fn act(&mut self, _s: &ScenarioState, _c: &ScenarioConfig) -> AdversaryAction {
            [-1.0; 3]
        }
    }

    #[test]
    fn rates_partition_outcomes() {
        let env = EnvConfig::default();
        let r = evaluate_policy("idm", &env, &Traffic::Naturalistic, &GapAcceptance::default(), 40, 3).unwrap();
        assert!((r.success_rate + r.crash_rate + r.timeout_rate - 1.0).abs() < 1e-9);
        let again = evaluate_policy("idm", &env, &Traffic::Naturalistic, &GapAcceptance::default(), 40, 3).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn stopped_traffic_behind_gives_certain_success() {
        let mut env = EnvConfig::default();
        env.scenario.range_dist = RangeDist::Fixed { value: 100.0 };
        env.scenario.mu_x = -150.0;
        env.scenario.sigma_x = 0.0;
        let r = evaluate_policy("brake", &env, &FullBrake, &GapAcceptance::default(), 20, 3).unwrap();
        assert_eq!(r.success_rate, 1.0);
    }
}
