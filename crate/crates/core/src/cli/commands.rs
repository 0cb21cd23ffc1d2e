use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::config::{checked_betas, EgoConfig};
use super::manifest::{artifact_entries, now_ms, read_manifest, write_manifest, RunManifest, BUILD_ID};
use super::{CliError, Context};
use crate::adversary::{member_seed, store, ActorAdversary, DdpgHyper, StopReason, Traffic};
use crate::analysis::report::cluster_report;
use crate::analysis::{evaluate_episodes, svg, EpisodeResult, EvalReport, StateDensity};
use crate::artifact::{csv_bytes, json_bytes, sha256_hex, write_atomic};
use crate::ego::dqn::{dqn_train, q_shape, DqnError};
use crate::ego::{DqnPolicy, EgoPolicy, GapAcceptance};
use crate::neural::io;
use crate::scenario::{EnvConfig, NaturalisticAdversary, Outcome};

/// Output directory of one command, collecting the files it writes.
struct Stage {
    dir: PathBuf,
    started: u64,
    files: Vec<String>,
}

impl Stage {
    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        write_atomic(&path, bytes)?;
        self.files.push(rel.to_owned());
        Ok(())
    }

    fn track(&mut self, rel: String) {
        self.files.push(rel);
    }

    /// A previous run of this stage finished cleanly with the same inputs.
    fn already_done(&self, ctx: &Context) -> bool {
        ctx.resume
            && read_manifest(&self.dir).is_some_and(|m| {
                m.exit_status == 0 && m.config_sha256 == ctx.config_sha256 && m.base_seed == ctx.seed && m.build == BUILD_ID
            })
    }
}

/// Run `body` inside the stage directory `rel`, then write its manifest
/// whatever the outcome.
fn staged<F>(ctx: &Context, rel: &str, command: &'static str, body: F) -> Result<(), CliError>
where
    F: FnOnce(&mut Stage) -> Result<String, CliError>,
{
    let dir = ctx.out.join(rel);
    std::fs::create_dir_all(&dir)?;
    let config_path = dir.join("config.json");
    if ctx.resume {
        if let Ok(old) = std::fs::read(&config_path) {
            if old != ctx.config_bytes {
                return Err(CliError::Config(format!(
                    "--resume with a config that differs from {}",
                    config_path.display()
                )));
            }
        }
    }
    let mut stage = Stage { dir, started: now_ms(), files: Vec::new() };
    let result = if stage.already_done(ctx) {
        Ok(format!("{command}: {} already complete", stage.dir.display()))
    } else {
        stage.write("config.json", &ctx.config_bytes)?;
        body(&mut stage)
    };
    let (exit_status, message) = match &result {
        Ok(m) => (0, m.clone()),
        Err(e) => (e.exit_code(), e.to_string()),
    };
    if exit_status == 0 && stage.files.is_empty() {
        log::info!("{message}");
        println!("{message}");
        return result.map(|_| ());
    }
    let manifest = RunManifest {
        command: command.to_owned(),
        config_sha256: ctx.config_sha256.clone(),
        build: BUILD_ID.to_owned(),
        base_seed: ctx.seed,
        started_unix_ms: stage.started,
        finished_unix_ms: now_ms(),
        artifacts: artifact_entries(&stage.dir, &stage.files),
        exit_status,
        message: Some(message.clone()),
    };
    write_manifest(&stage.dir, &manifest)?;
    if exit_status == 0 {
        println!("{message}");
    }
    result.map(|_| ())
}

fn load_ego(ctx: &Context) -> Result<EgoPolicy, CliError> {
    match &ctx.cfg.ego {
        EgoConfig::GapAcceptance { thresholds } => Ok(EgoPolicy::Gap(GapAcceptance::new(*thresholds))),
        EgoConfig::Dqn { weights } => {
            let path = weights.clone().unwrap_or_else(|| ctx.out.join("ego").join("q_network.json"));
            if !path.is_file() {
                return Err(CliError::MissingArtifact(format!(
                    "DQN weights {} (run train-ego first)",
                    path.display()
                )));
            }
            let q_network = io::load_from(&path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
            if q_network.shape() != q_shape() {
                return Err(CliError::Runtime(format!("{}: not a Q-network of shape {:?}", path.display(), q_shape())));
            }
            Ok(EgoPolicy::Dqn(DqnPolicy { q_network }))
        }
    }
}

#[derive(Debug, Serialize)]
struct EgoCurveRow {
    episode: usize,
    epsilon: f64,
    train_outcome: Outcome,
    greedy_outcome: Outcome,
    moving_success: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct EgoTrainingSummary {
    pub seed: u64,
    pub episodes: usize,
    pub converged: bool,
    pub q_network_sha256: String,
}

pub fn train_ego(ctx: &Context) -> Result<(), CliError> {
    if !matches!(ctx.cfg.ego, EgoConfig::Dqn { .. }) {
        println!("ego is {}: rule-based, nothing to train", ctx.cfg.ego.name());
        return Ok(());
    }
    staged(ctx, "ego", "train-ego", |st| {
        let env = ctx.cfg.env();
        let (training, exhausted) = match dqn_train(&env, &NaturalisticAdversary, &ctx.cfg.dqn, ctx.seed) {
            Ok(t) => (t, false),
            Err(DqnError::TrainingBudgetExceeded(t)) => (*t, true),
            Err(e) => return Err(CliError::Runtime(e.to_string())),
        };
        let weights = io::save(&training.policy.q_network);
        st.write("q_network.json", &weights)?;
        st.write(
            "curve.csv",
            &csv_bytes(training.curve.iter().map(|e| EgoCurveRow {
                episode: e.episode,
                epsilon: e.epsilon,
                train_outcome: e.train_outcome,
                greedy_outcome: e.greedy_outcome,
                moving_success: e.moving_success,
            })),
        )?;
        let summary = EgoTrainingSummary {
            seed: ctx.seed,
            episodes: training.curve.len(),
            converged: training.converged,
            q_network_sha256: sha256_hex(&weights),
        };
        st.write("training.json", &json_bytes(&summary))?;
        if exhausted {
            log::warn!("DQN did not converge; best-so-far network written");
            Err(CliError::Budget(format!("DQN stopped at the {}-episode cap", ctx.cfg.dqn.max_episodes)))
        } else {
            Ok(format!("train-ego: converged after {} episodes", summary.episodes))
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum MemberStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct IndexEntry {
    pub id: String,
    pub seed: u64,
    pub status: MemberStatus,
    pub error: Option<String>,
    pub episodes: Option<usize>,
    pub stop_reason: Option<StopReason>,
    pub converged: Option<bool>,
    pub final_return: Option<f64>,
    pub actor_sha256: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct EnsembleIndex {
    pub ego: String,
    pub base_seed: u64,
    pub beta: f64,
    pub members: Vec<IndexEntry>,
}

impl EnsembleIndex {
    pub fn ok_members(&self) -> impl Iterator<Item = &IndexEntry> {
        self.members.iter().filter(|m| m.status == MemberStatus::Ok)
    }
}

fn member_id(i: usize) -> String {
    format!("member-{i:03}")
}

fn ok_entry(id: String, meta: &store::MemberMeta, dir: &Path) -> Result<IndexEntry, CliError> {
    let actor = std::fs::read(dir.join("actor.json"))?;
    Ok(IndexEntry {
        id,
        seed: meta.seed,
        status: MemberStatus::Ok,
        error: None,
        episodes: Some(meta.episodes),
        stop_reason: Some(meta.stop_reason),
        converged: Some(meta.converged),
        final_return: Some(meta.final_return),
        actor_sha256: Some(sha256_hex(&actor)),
    })
}

fn read_meta(dir: &Path) -> Option<store::MemberMeta> {
    serde_json::from_slice(&std::fs::read(dir.join("member.json")).ok()?).ok()
}

/// Train (or, under `--resume`, reuse) `hyper.ensemble_size` members below
/// `stage.dir/prefix` and write their index.
fn run_ensemble(
    ctx: &Context,
    st: &mut Stage,
    prefix: &str,
    env: &EnvConfig,
    ego: &EgoPolicy,
    hyper: &DdpgHyper,
) -> Result<EnsembleIndex, CliError> {
    let root = st.dir.join(prefix);
    let mut todo = Vec::new();
    for i in 0..hyper.ensemble_size {
        let dir = root.join(member_id(i));
        let reusable = ctx.resume
            && store::is_complete(&dir)
            && read_meta(&dir).is_some_and(|m| m.seed == member_seed(ctx.seed, i));
        if reusable {
            log::info!("reusing {}", dir.display());
        } else {
            if dir.exists() {
                std::fs::remove_dir_all(&dir)?;
            }
            todo.push(i);
        }
    }
    let save_errors = Mutex::new(Vec::new());
    let results = crate::adversary::train_members(env, ego, hyper, ctx.seed, &todo, ctx.jobs, |i, res| {
        if let Ok(p) = res {
            let dir = root.join(member_id(i));
            let saved = std::fs::create_dir_all(&dir).map_err(|e| e.to_string()).and_then(|_| store::save(p, &dir).map_err(|e| e.to_string()));
            match saved {
                Ok(()) => log::info!("member {i} done after {} episodes ({})", p.curve.len(), p.stop_reason.as_str()),
                Err(e) => save_errors.lock().expect("save log").push((i, e)),
            }
        }
    })
    .map_err(|e| CliError::Config(e.to_string()))?;
    let save_errors = save_errors.into_inner().expect("save log");

    let mut members = Vec::with_capacity(hyper.ensemble_size);
    for i in 0..hyper.ensemble_size {
        let id = member_id(i);
        let dir = root.join(&id);
        let failure = match todo.iter().position(|&t| t == i) {
            Some(k) => match &results[k] {
                Err(e) => Some(e.to_string()),
                Ok(_) => save_errors.iter().find(|(j, _)| *j == i).map(|(_, e)| e.clone()),
            },
            None => None,
        };
        let entry = match (failure, read_meta(&dir)) {
            (None, Some(meta)) => ok_entry(id.clone(), &meta, &dir)?,
            (failure, _) => IndexEntry {
                id: id.clone(),
                seed: member_seed(ctx.seed, i),
                status: MemberStatus::Failed,
                error: Some(failure.unwrap_or_else(|| "member files incomplete".into())),
                episodes: None,
                stop_reason: None,
                converged: None,
                final_return: None,
                actor_sha256: None,
            },
        };
        if entry.status == MemberStatus::Ok {
            for f in ["actor.json", "critic.json", "actor_target.json", "critic_target.json", "curve.csv", "member.json"] {
                st.track(rel_join(prefix, &format!("{id}/{f}")));
            }
        }
        members.push(entry);
    }
    let index = EnsembleIndex { ego: ego.name().to_owned(), base_seed: ctx.seed, beta: env.reward.beta, members };
    st.write(&rel_join(prefix, "index.json"), &json_bytes(&index))?;
    Ok(index)
}

fn rel_join(prefix: &str, rel: &str) -> String {
    if prefix.is_empty() {
        rel.to_owned()
    } else {
        format!("{prefix}/{rel}")
    }
}

pub fn train_adversaries(ctx: &Context) -> Result<(), CliError> {
    staged(ctx, "ensemble", "train-adversaries", |st| {
        let ego = load_ego(ctx)?;
        let index = run_ensemble(ctx, st, "", &ctx.cfg.env(), &ego, &ctx.cfg.hyper)?;
        let ok = index.ok_members().count();
        if ok == 0 {
            return Err(CliError::EnsembleFailed(format!("0 of {} members trained", index.members.len())));
        }
        Ok(format!("train-adversaries: {ok} of {} members trained", index.members.len()))
    })
}

fn read_index(dir: &Path) -> Result<EnsembleIndex, CliError> {
    let path = dir.join("index.json");
    let bytes = std::fs::read(&path)
        .map_err(|_| CliError::MissingArtifact(format!("ensemble index {} (run train-adversaries first)", path.display())))?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn load_member(dir: &Path, entry: &IndexEntry) -> Result<(String, Traffic), CliError> {
    let member_dir = dir.join(&entry.id);
    let actor = store::load_actor(&member_dir).map_err(|e| CliError::MissingArtifact(e.to_string()))?;
    Ok((entry.id.clone(), Traffic::Learned(ActorAdversary { actor })))
}

fn ensemble_members(ctx: &Context) -> Result<Vec<(String, Traffic)>, CliError> {
    let dir = ctx.out.join("ensemble");
    let index = read_index(&dir)?;
    let members = index.ok_members().map(|e| load_member(&dir, e)).collect::<Result<Vec<_>, _>>()?;
    if members.is_empty() {
        return Err(CliError::MissingArtifact(format!("no trained members listed in {}", dir.join("index.json").display())));
    }
    Ok(members)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Histogram {
    /// Bin edges over `[0, 1]`; the last bin is closed.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn of_rates(values: impl IntoIterator<Item = f64>, bins: usize) -> Self {
        let mut counts = vec![0; bins];
        for v in values {
            counts[((v * bins as f64).floor() as usize).min(bins - 1)] += 1;
        }
        Self { edges: (0..=bins).map(|i| i as f64 / bins as f64).collect(), counts }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct EvalSummary {
    pub selection: String,
    pub ego: String,
    pub seed: u64,
    pub episodes_per_policy: usize,
    pub policies: usize,
    pub mean_success_rate: f64,
    pub mean_crash_rate: f64,
    pub mean_timeout_rate: f64,
    pub success_histogram: Histogram,
    pub crash_histogram: Histogram,
}

fn evaluate_all(
    policies: &[(String, Traffic)],
    env: &EnvConfig,
    ego: &EgoPolicy,
    episodes: usize,
    seed: u64,
) -> Result<Vec<(EvalReport, Vec<EpisodeResult>)>, CliError> {
    policies
        .par_iter()
        .map(|(id, traffic)| {
            let results = evaluate_episodes(env, traffic, ego, episodes, seed).map_err(|e| CliError::Runtime(e.to_string()))?;
            Ok((EvalReport::from_episodes(id, &results, seed), results))
        })
        .collect()
}

fn summarize(selection: &str, ego: &EgoPolicy, seed: u64, episodes: usize, reports: &[EvalReport]) -> EvalSummary {
    let n = reports.len() as f64;
    let mean = |f: fn(&EvalReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    EvalSummary {
        selection: selection.to_owned(),
        ego: ego.name().to_owned(),
        seed,
        episodes_per_policy: episodes,
        policies: reports.len(),
        mean_success_rate: mean(|r| r.success_rate),
        mean_crash_rate: mean(|r| r.crash_rate),
        mean_timeout_rate: mean(|r| r.timeout_rate),
        success_histogram: Histogram::of_rates(reports.iter().map(|r| r.success_rate), 10),
        crash_histogram: Histogram::of_rates(reports.iter().map(|r| r.crash_rate), 10),
    }
}

pub fn evaluate(ctx: &Context, selection: &str) -> Result<(), CliError> {
    if selection.is_empty() || selection.contains(['/', '\\']) || selection.starts_with('.') {
        return Err(CliError::Config(format!("bad --adversary value {selection:?}")));
    }
    staged(ctx, &format!("eval/{selection}"), "evaluate", |st| {
        let ego = load_ego(ctx)?;
        let policies = match selection {
            "naturalistic" => vec![("naturalistic".to_owned(), Traffic::Naturalistic)],
            "ensemble" => ensemble_members(ctx)?,
            id => {
                let dir = ctx.out.join("ensemble");
                let index = read_index(&dir)?;
                let entry = index
                    .ok_members()
                    .find(|e| e.id == id)
                    .ok_or_else(|| CliError::MissingArtifact(format!("unknown ensemble member {id}")))?;
                vec![load_member(&dir, entry)?]
            }
        };
        let episodes = ctx.cfg.analysis.evaluation_episodes;
        let evals = evaluate_all(&policies, &ctx.cfg.env(), &ego, episodes, ctx.seed)?;
        for (report, results) in &evals {
            st.write(&format!("episodes-{}.csv", report.policy_id), &csv_bytes(results))?;
        }
        let reports: Vec<EvalReport> = evals.into_iter().map(|(r, _)| r).collect();
        st.write("policies.csv", &csv_bytes(&reports))?;
        let summary = summarize(selection, &ego, ctx.seed, episodes, &reports);
        st.write("summary.json", &json_bytes(&summary))?;
        Ok(format!(
            "evaluate {selection}: mean success {:.3}, crash {:.3}, timeout {:.3} over {} policies",
            summary.mean_success_rate, summary.mean_crash_rate, summary.mean_timeout_rate, summary.policies
        ))
    })
}

/// Every density behind a cluster report, keyed by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct DensitySet {
    pub naturalistic: StateDensity,
    pub clusters: BTreeMap<String, StateDensity>,
    pub members: BTreeMap<String, StateDensity>,
}

#[derive(Debug, Serialize)]
struct ScatterRow<'a> {
    policy_id: &'a str,
    cluster: usize,
    pc1: f64,
    pc2: f64,
}

#[derive(Debug, Serialize)]
struct DensityRow<'a> {
    density: &'a str,
    row: usize,
    col: usize,
    p: f64,
}

fn density_rows<'a>(name: &'a str, d: &'a StateDensity) -> impl Iterator<Item = DensityRow<'a>> + 'a {
    let n = d.grid.bins;
    d.p.iter().enumerate().map(move |(i, &p)| DensityRow { density: name, row: i / n, col: i % n, p })
}

pub fn cluster(ctx: &Context) -> Result<(), CliError> {
    staged(ctx, "cluster", "cluster", |st| {
        let ego = load_ego(ctx)?;
        let members = ensemble_members(ctx)?;
        let out = cluster_report(&members, &ctx.cfg.env(), &ego, &ctx.cfg.analysis.cluster, ctx.seed)
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        let r = &out.report;
        st.write("report.json", &json_bytes(r))?;

        let clusters: Vec<usize> = r.members.iter().map(|m| m.cluster).collect();
        let scatter_rows = r.members.iter().zip(&out.scatter).flat_map(|(m, pts)| {
            pts.iter().map(move |p| ScatterRow { policy_id: &m.policy_id, cluster: m.cluster, pc1: p[0], pc2: p[1] })
        });
        st.write("scatter.csv", &csv_bytes(scatter_rows))?;
        st.write("scatter.svg", svg::scatter(&out.scatter, &clusters, "Projected states by cluster").as_bytes())?;

        let names: Vec<String> = (0..r.k).map(|c| format!("cluster-{c}")).collect();
        let mut rows: Vec<DensityRow> = density_rows("naturalistic", &out.naturalistic_density).collect();
        for (name, d) in names.iter().zip(&out.cluster_means) {
            rows.extend(density_rows(name, d));
        }
        for (m, d) in r.members.iter().zip(&out.member_densities) {
            rows.extend(density_rows(&m.policy_id, d));
        }
        st.write("densities.csv", &csv_bytes(rows))?;
        let set = DensitySet {
            naturalistic: out.naturalistic_density.clone(),
            clusters: names.iter().cloned().zip(out.cluster_means.iter().cloned()).collect(),
            members: r.members.iter().map(|m| m.policy_id.clone()).zip(out.member_densities.iter().cloned()).collect(),
        };
        st.write("densities.json", &json_bytes(&set))?;
        st.write("heatmap-naturalistic.svg", svg::heatmap(&out.naturalistic_density, "Naturalistic").as_bytes())?;
        for (name, d) in names.iter().zip(&out.cluster_means) {
            st.write(&format!("heatmap-{name}.svg"), svg::heatmap(d, name).as_bytes())?;
        }
        Ok(format!("cluster: {} members in {} clusters (lambda {:.4} nats)", r.members.len(), r.k, r.lambda))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SweepRow {
    pub beta: f64,
    pub members: usize,
    pub episodes: usize,
    pub crash_rate: f64,
    /// Binomial standard error of the pooled crash rate.
    pub crash_stderr: f64,
    pub success_rate: f64,
    pub timeout_rate: f64,
}

pub fn beta_sweep(ctx: &Context, override_betas: Option<&[f64]>) -> Result<(), CliError> {
    let betas = checked_betas(override_betas.unwrap_or(&ctx.cfg.beta_sweep.betas))?;
    staged(ctx, "beta_sweep", "beta-sweep", |st| {
        let ego = load_ego(ctx)?;
        let sweep = &ctx.cfg.beta_sweep;
        let hyper = DdpgHyper { ensemble_size: sweep.ensemble_size.unwrap_or(ctx.cfg.hyper.ensemble_size), ..ctx.cfg.hyper.clone() };
        let mut rows = Vec::with_capacity(betas.len());
        for &beta in &betas {
            let mut env = ctx.cfg.env();
            env.reward.beta = beta;
            let prefix = format!("beta-{beta}");
            let index = run_ensemble(ctx, st, &prefix, &env, &ego, &hyper)?;
            let dir = st.dir.join(&prefix);
            let members = index.ok_members().map(|e| load_member(&dir, e)).collect::<Result<Vec<_>, _>>()?;
            if members.is_empty() {
                return Err(CliError::EnsembleFailed(format!("no member trained for beta {beta}")));
            }
            let evals = evaluate_all(&members, &env, &ego, sweep.evaluation_episodes, ctx.seed)?;
            let reports: Vec<EvalReport> = evals.into_iter().map(|(r, _)| r).collect();
            st.write(&format!("{prefix}/policies.csv"), &csv_bytes(&reports))?;
            let total = (reports.len() * sweep.evaluation_episodes) as f64;
            let pooled = |f: fn(&EvalReport) -> f64| reports.iter().map(|r| f(r) * r.episodes as f64).sum::<f64>() / total;
            let crash = pooled(|r| r.crash_rate);
            rows.push(SweepRow {
                beta,
                members: reports.len(),
                episodes: total as usize,
                crash_rate: crash,
                crash_stderr: (crash * (1.0 - crash) / total).sqrt(),
                success_rate: pooled(|r| r.success_rate),
                timeout_rate: pooled(|r| r.timeout_rate),
            });
            log::info!("beta {beta}: crash rate {crash:.3}");
        }
        st.write("sweep.csv", &csv_bytes(&rows))?;
        let points: Vec<(f64, f64, f64)> = rows.iter().map(|r| (r.beta, r.crash_rate, r.crash_stderr)).collect();
        st.write("sweep.svg", svg::line_plot(&points, "Crash rate by rationality weight", "beta", "crash rate").as_bytes())?;
        let summary: Vec<String> = rows.iter().map(|r| format!("{}: {:.3}", r.beta, r.crash_rate)).collect();
        Ok(format!("beta-sweep: crash rates {}", summary.join(", ")))
    })
}
