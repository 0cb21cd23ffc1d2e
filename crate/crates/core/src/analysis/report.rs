//! End-to-end clustering of an ensemble: rollouts, a shared PCA plane and
//! grid, per-policy densities, λ, DP-Means and per-cluster evaluation.

use rayon::prelude::*;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::{
    dp_means, evaluate_policy, fit_pca, heuristic_lambda, rollout_states, AnalysisError, ClusterResult, EvalReport,
    GridSpec, PcaProjection, StateDensity,
};
use crate::adversary::Traffic;
use crate::scenario::{EgoController, EnvConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterConfig {
    /// Monte-Carlo episodes per policy for its state density.
    pub rollout_episodes: usize,
    pub bins: usize,
    pub smoothing: f64,
    /// Rounds of the farthest-first λ heuristic.
    pub lambda_k: usize,
    /// Explicit λ, bypassing the heuristic.
    #[serde(default)]
    pub lambda: Option<f64>,
    /// Episodes per cluster representative evaluation.
    pub eval_episodes: usize,
    /// Projected points per policy kept for the scatter plot.
    pub scatter_points: usize,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            rollout_episodes: 50,
            bins: super::density::DEFAULT_BINS,
            smoothing: super::density::DEFAULT_SMOOTHING,
            lambda_k: 3,
            lambda: None,
            eval_episodes: 100,
            scatter_points: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct MemberEntry {
    pub policy_id: String,
    pub cluster: usize,
    pub jsd_to_cluster_mean: f64,
    pub jsd_to_naturalistic: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ClusterSummary {
    pub cluster: usize,
    pub size: usize,
    pub members: Vec<String>,
    /// Member closest to the cluster mean density.
    pub representative: String,
    pub eval: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ClusterReport {
    pub lambda: f64,
    pub k: usize,
    pub iterations: usize,
    pub objective: Vec<f64>,
    pub stopped_on_increase: bool,
    /// Natural-log units.
    pub divergence_unit: String,
    pub projection: PcaProjection,
    pub grid: GridSpec,
    pub members: Vec<MemberEntry>,
    pub clusters: Vec<ClusterSummary>,
}

/// Everything the pipeline computes, including the bulky arrays kept out
/// of [`ClusterReport`].
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterOutput {
    pub report: ClusterReport,
    pub member_densities: Vec<StateDensity>,
    pub naturalistic_density: StateDensity,
    pub cluster_means: Vec<StateDensity>,
    /// Per policy, a deterministic subsample of projected points.
    pub scatter: Vec<Vec<[f64; 2]>>,
}

fn subsample(points: &[[f64; 2]], keep: usize) -> Vec<[f64; 2]> {
    if points.len() <= keep || keep == 0 {
        return points.to_vec();
    }
    let stride = points.len() as f64 / keep as f64;
    (0..keep).map(|i| points[(i as f64 * stride) as usize]).collect()
}

/// Run the clustering pipeline over `members`. Rollouts and evaluations run
/// on the ambient rayon pool; results are merged in member order.
pub fn cluster_report<E>(
    members: &[(String, Traffic)],
    env: &EnvConfig,
    ego: &E,
    cfg: &ClusterConfig,
    seed: u64,
) -> Result<ClusterOutput, AnalysisError>
where
    E: EgoController + Clone + Sync,
{
    if members.is_empty() {
        return Err(AnalysisError::EmptyInput("no ensemble members to cluster"));
    }
    let sets = members
        .par_iter()
        .map(|(id, traffic)| rollout_states(id, env, traffic, ego, cfg.rollout_episodes, seed))
        .collect::<Result<Vec<_>, _>>()?;
    let baseline = rollout_states("naturalistic", env, &Traffic::Naturalistic, ego, cfg.rollout_episodes, seed)?;

    let pooled: Vec<_> = sets.iter().chain(std::iter::once(&baseline)).flat_map(|s| s.samples.iter().copied()).collect();
    let projection = fit_pca(&pooled)?;
    let projected: Vec<Vec<[f64; 2]>> = sets
        .iter()
        .chain(std::iter::once(&baseline))
        .map(|s| s.samples.iter().map(|x| projection.project(x)).collect())
        .collect();
    let all_points: Vec<[f64; 2]> = projected.iter().flatten().copied().collect();
    let grid = GridSpec::from_points(&all_points, cfg.bins)?;
    let mut densities = projected
        .iter()
        .map(|pts| StateDensity::from_points(pts, grid, cfg.smoothing))
        .collect::<Result<Vec<_>, _>>()?;
    let naturalistic_density = densities.pop().expect("baseline density");

    let raw: Vec<Vec<f64>> = densities.iter().map(|d| d.p.clone()).collect();
    let lambda = match cfg.lambda {
        Some(l) => l,
        None => heuristic_lambda(&raw, cfg.lambda_k.clamp(1, raw.len()))?,
    };
    let clustering: ClusterResult = dp_means(&raw, lambda)?;

    let cluster_means: Vec<StateDensity> = clustering
        .means
        .iter()
        .map(|p| StateDensity { grid, smoothing: cfg.smoothing, p: p.clone() })
        .collect();
    let mut entries = Vec::with_capacity(members.len());
    for (i, d) in densities.iter().enumerate() {
        let c = clustering.assignments[i];
        entries.push(MemberEntry {
            policy_id: members[i].0.clone(),
            cluster: c,
            jsd_to_cluster_mean: d.js(&cluster_means[c])?,
            jsd_to_naturalistic: d.js(&naturalistic_density)?,
            samples: sets[i].samples.len(),
        });
    }

    let representatives: Vec<usize> = (0..clustering.k)
        .map(|c| {
            entries
                .iter()
                .enumerate()
                .filter(|(_, e)| e.cluster == c)
                .fold(None, |best: Option<(usize, f64)>, (i, e)| match best {
                    Some((_, d)) if d <= e.jsd_to_cluster_mean => best,
                    _ => Some((i, e.jsd_to_cluster_mean)),
                })
                .expect("clusters are non-empty")
                .0
        })
        .collect();
    let evals = representatives
        .par_iter()
        .map(|&i| evaluate_policy(&members[i].0, env, &members[i].1, ego, cfg.eval_episodes, seed))
        .collect::<Result<Vec<_>, _>>()?;
    let clusters = (0..clustering.k)
        .zip(evals)
        .map(|(c, eval)| {
            let ids: Vec<String> = entries.iter().filter(|e| e.cluster == c).map(|e| e.policy_id.clone()).collect();
            ClusterSummary {
                cluster: c,
                size: ids.len(),
                members: ids,
                representative: members[representatives[c]].0.clone(),
                eval,
            }
        })
        .collect();

    let scatter = projected[..members.len()].iter().map(|p| subsample(p, cfg.scatter_points)).collect();
    Ok(ClusterOutput {
        report: ClusterReport {
            lambda,
            k: clustering.k,
            iterations: clustering.iterations,
            objective: clustering.objective,
            stopped_on_increase: clustering.stopped_on_increase,
            divergence_unit: "nats".to_owned(),
            projection,
            grid,
            members: entries,
            clusters,
        },
        member_densities: densities,
        naturalistic_density,
        cluster_means,
        scatter,
    })
}
