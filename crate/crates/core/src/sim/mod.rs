//! Deterministic scenario simulator.
//!
//! A script supplies annotated frames, a gaze trace and timed utterances. The
//! run advances a virtual clock over the merged timeline; captioner latency is
//! a number on that clock, never a real wait. At equal timestamps caption
//! completions go first, then frames, then utterance releases.

mod oracle;
mod run;
mod scenario;
pub mod synth;

use thiserror::Error;

use crate::context::ContextError;
use crate::eoi::{EoiError, TaskProfile};
use crate::scene::SceneError;
use crate::tasks::TaskError;

pub use oracle::{oracle, score, OracleOutput, Score, TrueEvent};
pub use run::{run_scenario, CaptionRecord, Metrics, RoiStatus, RunReport, ToolCall, TurnRecord};
pub use scenario::{ScenarioError, ScenarioScript, ScriptGaze, Utterance, SCENARIO_VERSION};

use crate::eoi::CaptionPolicy;
use crate::gaze::DEFAULT_GAZE_RADIUS_PX;
use crate::tasks::ToolRegistry;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("scenario {scenario}: unknown profile {profile}")]
    UnknownProfile { scenario: String, profile: String },
    #[error("at {at_ms} ms: {source}")]
    Scene { at_ms: u64, source: SceneError },
    #[error("at {at_ms} ms: {source}")]
    Engine { at_ms: u64, source: EoiError },
    #[error("at {at_ms} ms: {source}")]
    Backend { at_ms: u64, source: ContextError },
    #[error("at {at_ms} ms: {source}")]
    Task { at_ms: u64, source: TaskError },
    #[error("report and oracle come from different scripts ({report} vs {oracle})")]
    ScriptMismatch { report: String, oracle: String },
}

/// Run settings that do not come from the script itself.
///
/// Precedence for policy and latency: `*_override` (command-line flags), then
/// the script header, then `default_*` (config file or built-in).
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub profiles: Vec<TaskProfile>,
    pub registry: ToolRegistry,
    pub default_policy: CaptionPolicy,
    pub default_latency_ms: u64,
    pub default_gaze_radius_px: f64,
    pub policy_override: Option<CaptionPolicy>,
    pub latency_override: Option<u64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            profiles: Vec::new(),
            registry: ToolRegistry::new(),
            default_policy: CaptionPolicy::Hybrid,
            default_latency_ms: 0,
            default_gaze_radius_px: DEFAULT_GAZE_RADIUS_PX,
            policy_override: None,
            latency_override: None,
        }
    }
}

impl SimConfig {
    pub fn policy_for(&self, script: &ScenarioScript) -> CaptionPolicy {
        self.policy_override.or(script.policy).unwrap_or(self.default_policy)
    }

    pub fn latency_for(&self, script: &ScenarioScript) -> u64 {
        self.latency_override
            .or(script.caption_latency_ms)
            .unwrap_or(self.default_latency_ms)
    }

    pub fn radius_for(&self, script: &ScenarioScript) -> f64 {
        script.gaze_radius_px.unwrap_or(self.default_gaze_radius_px)
    }

    /// The script's inline profile wins over a configured one.
    pub fn profile_for(&self, script: &ScenarioScript) -> Result<TaskProfile, SimError> {
        script
            .profiles
            .iter()
            .chain(&self.profiles)
            .find(|p| p.task_id == script.profile_ref)
            .cloned()
            .ok_or_else(|| SimError::UnknownProfile {
                scenario: script.name.clone(),
                profile: script.profile_ref.clone(),
            })
    }

    /// Configured tools plus the script's inline tools (inline shadows).
    pub fn registry_for(&self, script: &ScenarioScript) -> Result<ToolRegistry, TaskError> {
        let mut reg = ToolRegistry::new();
        for t in &script.tools {
            reg.insert(t.clone())?;
        }
        for t in self.registry.tools() {
            if reg.get(&t.tool_id).is_none() {
                reg.insert(t.clone())?;
            }
        }
        Ok(reg)
    }
}
