//! JSONL episode traces, one record per step.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::{AdversaryAction, EgoAction, Outcome, Transition, VehicleState, Violation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: f64,
    pub vehicles: [VehicleState; 4],
    pub a_ego: EgoAction,
    pub a_adv: AdversaryAction,
    pub r_ego: f64,
    pub r_adv: f64,
    pub violation: Violation,
    pub outcome: Outcome,
}

impl From<&Transition> for TraceRecord {
    fn from(tr: &Transition) -> Self {
        Self {
            t: tr.s_next.t,
            vehicles: tr.s_next.vehicles,
            a_ego: tr.a_ego,
            a_adv: tr.a_adv,
            r_ego: tr.r_ego,
            r_adv: tr.r_adv,
            violation: tr.violation,
            outcome: tr.s_next.outcome,
        }
    }
}

pub struct TraceWriter<W: Write> {
    out: W,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn record(&mut self, tr: &Transition) -> io::Result<()> {
        serde_json::to_writer(&mut self.out, &TraceRecord::from(tr))?;
        self.out.write_all(b"\n")
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{run_episode, NaturalisticAdversary, RewardConfig, ScenarioConfig};
    use crate::ego::GapAcceptance;
    use rand::SeedableRng;

    #[test]
    fn one_line_per_step() {
        let cfg = ScenarioConfig::default();
        let mut writer = TraceWriter::new(Vec::new());
        let mut ego = GapAcceptance::default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let summary = run_episode(
            &cfg,
            &RewardConfig::default(),
            &mut ego,
            &mut NaturalisticAdversary,
            &mut rng,
            1.0,
            |tr| writer.record(tr).unwrap(),
        )
        .unwrap();
        let text = String::from_utf8(writer.into_inner()).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), summary.steps as usize);
        let last: TraceRecord = serde_json::from_str(lines.last().unwrap()).unwrap();
        assert_eq!(last.outcome, summary.outcome);
        let value: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
        for key in ["t", "vehicles", "a_ego", "a_adv", "r_ego", "r_adv", "violation", "outcome"] {
            assert!(value.get(key).is_some(), "missing {key}");
        }
    }
}
