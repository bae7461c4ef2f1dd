use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::run::RunReport;
use super::scenario::ScenarioScript;
use super::SimError;
use crate::eoi::{apply_deltas, TaskProfile};
use crate::scene::{counts_timeline, CountChange, CountMap};

/// Ground truth from exhaustive per-frame recounting: no latency, no policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleOutput {
    pub script_digest: String,
    pub true_events: Vec<TrueEvent>,
    pub counts_timeline: Vec<(u64, CountMap)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueEvent {
    pub frame_id: u64,
    pub timestamp_ms: u64,
    /// Only the categories whose count changed.
    pub changes: BTreeMap<String, CountChange>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub events_true: u64,
    pub events_logged: u64,
    /// True event frames that have a logged event.
    pub events_matched: u64,
    pub recall: f64,
    pub oracle_count_mismatches: u64,
}

/// FNV-1a over the script's canonical serialization, minus run settings.
pub(crate) fn script_digest(script: &ScenarioScript) -> String {
    let mut canonical = script.clone();
    canonical.policy = None;
    canonical.caption_latency_ms = None;
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in canonical.to_jsonl().bytes() {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{hash:016x}")
}

pub fn oracle(script: &ScenarioScript, profile: &TaskProfile) -> OracleOutput {
    let timeline = counts_timeline(&script.frames, profile);
    let mut true_events = Vec::new();
    let empty = CountMap::new();
    let mut prev = &empty;
    for (frame, (frame_id, counts)) in script.frames.iter().zip(&timeline) {
        let mut changes = BTreeMap::new();
        for cat in prev.keys().chain(counts.keys()) {
            let before = prev.get(cat).copied().unwrap_or(0);
            let after = counts.get(cat).copied().unwrap_or(0);
            if before != after {
                changes.insert(cat.clone(), CountChange { before, after });
            }
        }
        if !changes.is_empty() {
            true_events.push(TrueEvent {
                frame_id: *frame_id,
                timestamp_ms: frame.timestamp_ms,
                changes,
            });
        }
        prev = counts;
    }
    OracleOutput {
        script_digest: script_digest(script),
        true_events,
        counts_timeline: timeline,
    }
}

/// Scores a run against ground truth.
///
/// The event log is replayed on its own count deltas. An event counts as a
/// mismatch when its logged "before" values disagree with the replayed counts
/// or the replayed counts after it differ from the oracle at its frame.
pub fn score(report: &RunReport, truth: &OracleOutput) -> Result<Score, SimError> {
    if report.script_digest != truth.script_digest {
        return Err(SimError::ScriptMismatch {
            report: report.script_digest.clone(),
            oracle: truth.script_digest.clone(),
        });
    }
    let by_frame: BTreeMap<u64, &CountMap> = truth.counts_timeline.iter().map(|(f, c)| (*f, c)).collect();
    let mut running = CountMap::new();
    let mut mismatches = 0;
    for event in &report.event_log {
        let consistent = event
            .count_deltas
            .iter()
            .all(|(cat, ch)| running.get(cat).copied().unwrap_or(0) == ch.before);
        apply_deltas(&mut running, event);
        let agrees = by_frame.get(&event.frame_id).is_some_and(|c| **c == running);
        if !consistent || !agrees {
            mismatches += 1;
        }
    }

    let logged_frames: std::collections::BTreeSet<u64> = report.event_log.iter().map(|e| e.frame_id).collect();
    let matched = truth
        .true_events
        .iter()
        .filter(|t| logged_frames.contains(&t.frame_id))
        .count() as u64;
    let events_true = truth.true_events.len() as u64;
    Ok(Score {
        events_true,
        events_logged: report.event_log.len() as u64,
        events_matched: matched,
        recall: if events_true == 0 {
            1.0
        } else {
            matched as f64 / events_true as f64
        },
        oracle_count_mismatches: mismatches,
    })
}
