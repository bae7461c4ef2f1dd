use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::oracle::{oracle, score};
use super::scenario::ScenarioScript;
use super::{SimConfig, SimError};
use crate::context::{assemble_prompt, InferenceBackend, LiouStack, PromptBundle, Speaker, Turn};
use crate::eoi::{
    classify_event, poll_captioner, schedule_caption, CaptionPolicy, CaptionStatus, CaptionerState, EventRecord,
    ScheduleDecision, TaskProfile,
};
use crate::gaze::{extract_roi, snapshot_at_release, GazeError, GazeSample};
use crate::geometry::Rect;
use crate::scene::{ingest_frame, FrameRecord, SceneState};
use crate::tasks::{apply_tool, select_tool, TaskError, ToolRegistry};

/// Instruction sent with gaze crops.
pub const ROI_INSTRUCTION: &str = "Describe the object the user is looking at.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoiStatus {
    Captured,
    OutOfScene,
    NoGaze,
    NoFrame,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    pub tool_id: String,
    pub action_input: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_caption: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub index: usize,
    pub press_ts_ms: u64,
    pub release_ts_ms: u64,
    pub utterance: String,
    pub frame_id: Option<u64>,
    pub gaze: Option<GazeSample>,
    pub roi_status: RoiStatus,
    pub roi_rect: Option<Rect>,
    pub roi_caption: Option<String>,
    pub scene_caption: String,
    /// Frame the scene caption was produced from, if any caption existed.
    pub scene_caption_frame_id: Option<u64>,
    pub tool: Option<ToolCall>,
    pub prompt: String,
    pub answer: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionRecord {
    pub event_id: u64,
    pub frame_id: u64,
    pub dispatched_ms: u64,
    pub completed_ms: u64,
    pub caption: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metrics {
    /// Events found by exhaustive recount.
    pub events_true: u64,
    /// Events that made it into the event log.
    pub events_detected: u64,
    pub captions_issued: u64,
    pub count_only_events: u64,
    pub liou_dropped: u64,
    pub oracle_count_mismatches: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub script_digest: String,
    pub policy: CaptionPolicy,
    pub caption_latency_ms: u64,
    pub transcript: Vec<TurnRecord>,
    pub event_log: Vec<EventRecord>,
    pub captions: Vec<CaptionRecord>,
    pub metrics: Metrics,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Plain-text transcript for people.
    pub fn transcript_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "scenario: {} (policy {}, caption latency {} ms)",
            self.scenario, self.policy, self.caption_latency_ms
        );
        for t in &self.transcript {
            let _ = writeln!(out, "\n--- turn {} @ {} ms ---", t.index + 1, t.release_ts_ms);
            let _ = writeln!(out, "user: {}", t.utterance);
            let _ = writeln!(out, "roi: {:?}", t.roi_status);
            if let Some(tool) = &t.tool {
                let _ = writeln!(out, "tool: {} {:?}", tool.tool_id, tool.action_input);
                if let Some(c) = &tool.tool_caption {
                    let _ = writeln!(out, "observation: {c}");
                }
                if let Some(e) = &tool.error {
                    let _ = writeln!(out, "tool error: {e}");
                }
            }
            let _ = writeln!(out, "prompt:");
            for line in t.prompt.lines() {
                let _ = writeln!(out, "  {line}");
            }
            let _ = writeln!(out, "agent: {}", t.answer);
        }
        let m = &self.metrics;
        let _ = writeln!(
            out,
            "\nmetrics: events_true={} events_detected={} captions_issued={} count_only_events={} liou_dropped={} oracle_count_mismatches={}",
            m.events_true, m.events_detected, m.captions_issued, m.count_only_events, m.liou_dropped, m.oracle_count_mismatches
        );
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Step {
    CaptionDone(usize),
    Frame(usize),
    Release(usize),
}

impl Step {
    fn class(&self) -> u8 {
        match self {
            Step::CaptionDone(_) => 0,
            Step::Frame(_) => 1,
            Step::Release(_) => 2,
        }
    }
}

#[derive(Default)]
struct Agenda {
    items: BTreeMap<(u64, u8, u64), Step>,
    seq: u64,
}

impl Agenda {
    fn push(&mut self, at_ms: u64, step: Step) {
        self.items.insert((at_ms, step.class(), self.seq), step);
        self.seq += 1;
    }

    fn pop(&mut self) -> Option<(u64, Step)> {
        self.items.pop_first().map(|((t, _, _), s)| (t, s))
    }
}

struct Runner<'a> {
    script: &'a ScenarioScript,
    profile: TaskProfile,
    registry: ToolRegistry,
    backend: &'a dyn InferenceBackend,
    policy: CaptionPolicy,
    latency: u64,
    gaze: Vec<GazeSample>,
    frame_index: BTreeMap<u64, usize>,

    agenda: Agenda,
    scene: SceneState,
    captioner: CaptionerState,
    liou: LiouStack,
    next_event_id: u64,
    event_log: Vec<EventRecord>,
    captions: Vec<CaptionRecord>,
    history: Vec<Turn>,
    active_task: Option<String>,
    transcript: Vec<TurnRecord>,
}

impl<'a> Runner<'a> {
    fn dispatch(&mut self, event: &EventRecord, at_ms: u64) {
        let idx = self.captions.len();
        self.captions.push(CaptionRecord {
            event_id: event.event_id,
            frame_id: event.frame_id,
            dispatched_ms: at_ms,
            completed_ms: at_ms + self.latency,
            caption: None,
        });
        self.agenda.push(at_ms + self.latency, Step::CaptionDone(idx));
    }

    fn on_frame(&mut self, at_ms: u64, idx: usize) -> Result<(), SimError> {
        let frame = &self.script.frames[idx];
        let (scene, delta) =
            ingest_frame(&self.scene, frame, &self.profile).map_err(|source| SimError::Scene { at_ms, source })?;
        self.scene = scene;
        let Some(mut event) = classify_event(&delta, &self.profile, self.next_event_id) else {
            return Ok(());
        };
        self.next_event_id += 1;
        event.image_ref = frame.image_ref.clone();
        let captioner = std::mem::take(&mut self.captioner);
        let (decision, captioner) = schedule_caption(event, at_ms, captioner, self.policy, self.latency)
            .map_err(|source| SimError::Engine { at_ms, source })?;
        self.captioner = captioner;
        match decision {
            ScheduleDecision::Dispatch(event) => {
                self.dispatch(&event, at_ms);
                self.event_log.push(event);
            }
            ScheduleDecision::ReplacePending { .. } => {}
            ScheduleDecision::RecordCounts { logged, .. } => self.event_log.push(logged),
        }
        Ok(())
    }

    fn on_caption_done(&mut self, at_ms: u64, idx: usize) -> Result<(), SimError> {
        let frame_id = self.captions[idx].frame_id;
        let frame = &self.script.frames[self.frame_index[&frame_id]];
        let image = frame.image(|d| self.profile.admits(d));
        let text = self
            .backend
            .caption(&image, &self.profile.caption_instruction)
            .map_err(|source| SimError::Backend { at_ms, source })?;
        let event_id = self.captions[idx].event_id;
        self.captions[idx].caption = Some(text.clone());
        if let Some(e) = self.event_log.iter_mut().find(|e| e.event_id == event_id) {
            e.caption = Some(text.clone());
        }
        self.liou.push(text, frame_id, at_ms);

        let captioner = std::mem::take(&mut self.captioner);
        let (sent, captioner) =
            poll_captioner(captioner, at_ms, self.latency).map_err(|source| SimError::Engine { at_ms, source })?;
        self.captioner = captioner;
        if let Some((sent_at, mut event)) = sent {
            if self.policy == CaptionPolicy::Naive {
                event.caption_status = CaptionStatus::Captioned;
                self.dispatch(&event, sent_at);
                self.event_log.push(event);
            } else {
                self.dispatch(&event, sent_at);
            }
        }
        Ok(())
    }

    fn latest_frame(&self, at_ms: u64) -> Option<&'a FrameRecord> {
        let frames = &self.script.frames;
        let n = frames.partition_point(|f| f.timestamp_ms <= at_ms);
        n.checked_sub(1).map(|i| &frames[i])
    }

    fn on_release(&mut self, at_ms: u64, idx: usize) -> Result<(), SimError> {
        let utterance = &self.script.utterances[idx];
        let backend_err = |source| SimError::Backend { at_ms, source };

        let scene_entry = self.liou.read().cloned();

        let (gaze, frame, mut roi_status) = match snapshot_at_release(&self.gaze, &self.script.frames, at_ms) {
            Ok((g, f)) => (Some(*g), Some(f), RoiStatus::Captured),
            Err(GazeError::NoGazeData { .. }) => match self.latest_frame(at_ms) {
                Some(f) => (None, Some(f), RoiStatus::NoGaze),
                None => (None, None, RoiStatus::NoFrame),
            },
            Err(_) => (None, None, RoiStatus::NoFrame),
        };

        let mut roi_rect = None;
        let mut roi_caption = None;
        if let (Some(g), Some(f)) = (gaze.as_ref(), frame) {
            match extract_roi(f, g) {
                Ok(crop) => {
                    roi_caption = Some(
                        self.backend
                            .caption(&crop.image_ref, ROI_INSTRUCTION)
                            .map_err(backend_err)?,
                    );
                    roi_rect = Some(crop.rect);
                }
                Err(_) => roi_status = RoiStatus::OutOfScene,
            }
        }

        let mut call_history = self.history.clone();
        let mut tool_call = None;
        let mut tool_turn = None;
        match select_tool(&utterance.text, self.active_task.as_deref(), &self.registry) {
            Ok(Some(sel)) => {
                let tool = self.registry.get(&sel.tool_id).expect("selected tool is registered");
                let outcome = match frame {
                    Some(f) => apply_tool(tool, f, &sel.action_input, self.backend),
                    None => Err(TaskError::NoAnnotations { frame_id: 0 }),
                };
                match outcome {
                    Ok(out) => {
                        let turn = Turn::new(Speaker::Tool, out.tool_caption.clone());
                        call_history.push(turn.clone());
                        tool_turn = Some(turn);
                        self.active_task = Some(sel.tool_id.clone());
                        tool_call = Some(ToolCall {
                            tool_id: sel.tool_id,
                            action_input: sel.action_input,
                            tool_caption: Some(out.tool_caption),
                            error: None,
                        });
                    }
                    Err(TaskError::Backend(source)) => return Err(SimError::Backend { at_ms, source }),
                    Err(e) => {
                        tool_call = Some(ToolCall {
                            tool_id: sel.tool_id,
                            action_input: sel.action_input,
                            tool_caption: None,
                            error: Some(e.to_string()),
                        })
                    }
                }
            }
            Ok(None) => {}
            Err(e) => {
                tool_call = Some(ToolCall {
                    tool_id: String::new(),
                    action_input: BTreeMap::new(),
                    tool_caption: None,
                    error: Some(e.to_string()),
                })
            }
        }

        let scene_caption = scene_entry.as_ref().map(|e| e.caption.clone()).unwrap_or_default();
        let bundle = PromptBundle {
            scene_caption: scene_caption.clone(),
            roi_caption: roi_caption.clone(),
            utterance: utterance.text.clone(),
            history: call_history.clone(),
        };
        let prompt = assemble_prompt(&bundle).map_err(backend_err)?;
        let answer = self.backend.complete(&prompt, &call_history).map_err(backend_err)?;

        self.history.push(Turn::new(Speaker::User, utterance.text.clone()));
        if let Some(t) = tool_turn {
            self.history.push(t);
        }
        self.history.push(Turn::new(Speaker::Assistant, answer.clone()));

        self.transcript.push(TurnRecord {
            index: idx,
            press_ts_ms: utterance.press_ts_ms,
            release_ts_ms: utterance.release_ts_ms,
            utterance: utterance.text.clone(),
            frame_id: frame.map(|f| f.frame_id),
            gaze,
            roi_status,
            roi_rect,
            roi_caption,
            scene_caption,
            scene_caption_frame_id: scene_entry.map(|e| e.frame_id),
            tool: tool_call,
            prompt,
            answer,
        });
        Ok(())
    }
}

/// Runs a script end to end and scores it against the recount oracle.
pub fn run_scenario(
    script: &ScenarioScript,
    config: &SimConfig,
    backend: &dyn InferenceBackend,
) -> Result<RunReport, SimError> {
    let profile = config.profile_for(script)?;
    let registry = config
        .registry_for(script)
        .map_err(|source| SimError::Task { at_ms: 0, source })?;
    let radius = config.radius_for(script);
    let mut runner = Runner {
        script,
        profile,
        registry,
        backend,
        policy: config.policy_for(script),
        latency: config.latency_for(script),
        gaze: script.gaze_trace.iter().map(|g| g.resolve(radius)).collect(),
        frame_index: script.frames.iter().enumerate().map(|(i, f)| (f.frame_id, i)).collect(),
        agenda: Agenda::default(),
        scene: SceneState::default(),
        captioner: CaptionerState::default(),
        liou: LiouStack::new(),
        next_event_id: 1,
        event_log: Vec::new(),
        captions: Vec::new(),
        history: Vec::new(),
        active_task: None,
        transcript: Vec::new(),
    };

    for (i, f) in script.frames.iter().enumerate() {
        runner.agenda.push(f.timestamp_ms, Step::Frame(i));
    }
    for (i, u) in script.utterances.iter().enumerate() {
        runner.agenda.push(u.release_ts_ms, Step::Release(i));
    }
    while let Some((at_ms, step)) = runner.agenda.pop() {
        match step {
            Step::Frame(i) => runner.on_frame(at_ms, i)?,
            Step::CaptionDone(i) => runner.on_caption_done(at_ms, i)?,
            Step::Release(i) => runner.on_release(at_ms, i)?,
        }
    }

    runner.event_log.sort_by_key(|e| e.event_id);
    let truth = oracle(script, &runner.profile);
    let mut report = RunReport {
        scenario: script.name.clone(),
        script_digest: truth.script_digest.clone(),
        policy: runner.policy,
        caption_latency_ms: runner.latency,
        transcript: runner.transcript,
        event_log: runner.event_log,
        captions: runner.captions,
        metrics: Metrics::default(),
    };
    let s = score(&report, &truth)?;
    report.metrics = Metrics {
        events_true: s.events_true,
        events_detected: report.event_log.len() as u64,
        captions_issued: report.captions.len() as u64,
        count_only_events: report
            .event_log
            .iter()
            .filter(|e| e.caption_status == CaptionStatus::CountOnly)
            .count() as u64,
        liou_dropped: runner.liou.dropped_count(),
        oracle_count_mismatches: s.oracle_count_mismatches,
    };
    Ok(report)
}
