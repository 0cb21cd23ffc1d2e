//! On-disk layout of one trained ensemble member.
//!
//! ```text
//! <dir>/actor.json  critic.json  actor_target.json  critic_target.json
//! <dir>/curve.csv   episode,return,outcome,steps,trained,stop_reason
//! <dir>/member.json seed, stop reason, final replay seed and return, hyper, build
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AdversaryError, AdversaryPolicy, DdpgHyper, EpisodeRecord, StopReason};
use crate::artifact::{csv_bytes, write_atomic, write_json, BUILD_ID};
use crate::neural::{io, Mlp};
use crate::scenario::Outcome;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct MemberMeta {
    pub seed: u64,
    pub episodes: usize,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub final_eval_seed: u64,
    pub final_return: f64,
    pub hyper: DdpgHyper,
    pub build: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct CurveRow {
    episode: usize,
    #[serde(rename = "return")]
    ret: f64,
    outcome: Outcome,
    steps: u32,
    trained: bool,
    stop_reason: String,
}

const NETS: [&str; 4] = ["actor", "critic", "actor_target", "critic_target"];

fn store_err(path: &Path, e: impl std::fmt::Display) -> AdversaryError {
    AdversaryError::Store(format!("{}: {e}", path.display()))
}

pub fn curve_csv(p: &AdversaryPolicy) -> Vec<u8> {
    let last = p.curve.len().saturating_sub(1);
    csv_bytes(p.curve.iter().map(|e| CurveRow {
        episode: e.episode,
        ret: e.ret,
        outcome: e.outcome,
        steps: e.steps,
        trained: e.trained,
        stop_reason: if e.episode == last { p.stop_reason.as_str().to_owned() } else { String::new() },
    }))
}

pub fn meta(p: &AdversaryPolicy) -> MemberMeta {
    MemberMeta {
        seed: p.seed,
        episodes: p.curve.len(),
        converged: p.converged,
        stop_reason: p.stop_reason,
        final_eval_seed: p.final_eval_seed,
        final_return: p.final_return,
        hyper: p.hyper.clone(),
        build: BUILD_ID.to_owned(),
    }
}

pub fn save(p: &AdversaryPolicy, dir: &Path) -> Result<(), AdversaryError> {
    let nets = [&p.actor, &p.critic, &p.actor_target, &p.critic_target];
    for (name, net) in NETS.iter().zip(nets) {
        let path = dir.join(format!("{name}.json"));
        write_atomic(&path, &io::save(net)).map_err(|e| store_err(&path, e))?;
    }
    let path = dir.join("curve.csv");
    write_atomic(&path, &curve_csv(p)).map_err(|e| store_err(&path, e))?;
    // member.json last: its presence marks a complete member directory.
    let path = dir.join("member.json");
    write_json(&path, &meta(p)).map_err(|e| store_err(&path, e))
}

/// Whether `dir` holds a completely written member.
pub fn is_complete(dir: &Path) -> bool {
    dir.join("member.json").is_file()
}

pub fn load_actor(dir: &Path) -> Result<Mlp, AdversaryError> {
    let path = dir.join("actor.json");
    io::load_from(&path).map_err(|e| store_err(&path, e))
}

pub fn load(dir: &Path) -> Result<AdversaryPolicy, AdversaryError> {
    let path = dir.join("member.json");
    let bytes = std::fs::read(&path).map_err(|e| store_err(&path, e))?;
    let meta: MemberMeta = serde_json::from_slice(&bytes).map_err(|e| store_err(&path, e))?;
    let mut nets = Vec::with_capacity(4);
    for name in NETS {
        let path = dir.join(format!("{name}.json"));
        nets.push(io::load_from(&path).map_err(|e| store_err(&path, e))?);
    }
    let path = dir.join("curve.csv");
    let mut reader = csv::Reader::from_path(&path).map_err(|e| store_err(&path, e))?;
    let mut curve = Vec::new();
    for row in reader.deserialize::<CurveRow>() {
        let row = row.map_err(|e| store_err(&path, e))?;
        curve.push(EpisodeRecord {
            episode: row.episode,
            ret: row.ret,
            outcome: row.outcome,
            steps: row.steps,
            trained: row.trained,
        });
    }
    let [actor, critic, actor_target, critic_target]: [Mlp; 4] = nets.try_into().expect("four networks");
    Ok(AdversaryPolicy {
        actor,
        critic,
        actor_target,
        critic_target,
        seed: meta.seed,
        curve,
        converged: meta.converged,
        stop_reason: meta.stop_reason,
        final_eval_seed: meta.final_eval_seed,
        final_return: meta.final_return,
        hyper: meta.hyper,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::{train_single, DdpgHyper};
    use crate::ego::GapAcceptance;
    use crate::scenario::EnvConfig;

    #[test]
    fn round_trip_and_completion_marker() {
        let hyper = DdpgHyper { batch_size: 8, buffer_size: 100, warmup: 0, max_episodes: 2, ..DdpgHyper::default() };
        let p = train_single(&EnvConfig::default(), &GapAcceptance::default(), &hyper, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let member = dir.path().join("member_000");
        assert!(!is_complete(&member));
        save(&p, &member).unwrap();
        assert!(is_complete(&member));
        let back = load(&member).unwrap();
        assert_eq!(back, p);
        let csv = String::from_utf8(curve_csv(&p)).unwrap();
        assert!(csv.starts_with("episode,return,outcome,steps,trained,stop_reason\n"));
        assert!(csv.trim_end().ends_with(p.stop_reason.as_str()));
    }
}
