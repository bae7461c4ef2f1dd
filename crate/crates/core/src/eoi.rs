//! Events of interest and caption scheduling.
//!
//! [`classify_event`] turns a [`FrameDelta`] into an [`EventRecord`] when an
//! OOI count changes, a tracked object moves or rescales past the profile
//! thresholds, or a custom rule fires. [`schedule_caption`] decides what the
//! single captioner does with each event while it is busy:
//!
//! * [`CaptionPolicy::Naive`] keeps only the newest waiting event. Anything it
//!   replaces is gone, including its count data.
//! * [`CaptionPolicy::Hybrid`] logs every event's counts immediately and still
//!   captions only the newest waiting event once the captioner frees up.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::scene::{CountChange, CountMap, Detection, FrameDelta};

pub const DEFAULT_MIN_CONFIDENCE: f64 = 0.5;
pub const DEFAULT_MOVE_THRESHOLD_PX: f64 = 25.0;
pub const DEFAULT_SCALE_RATIO_THRESHOLD: f64 = 1.5;

#[derive(Debug, Error, PartialEq)]
pub enum EoiError {
    #[error("clock moved backward: {now_ms} ms after {last_ms} ms")]
    ClockRegression { now_ms: u64, last_ms: u64 },
    #[error("inconsistent event log at event {event_id}: {category} before={logged} but running count is {running}")]
    InconsistentLog {
        event_id: u64,
        category: String,
        logged: u32,
        running: u32,
    },
    #[error("invalid task profile {task_id}: {reason}")]
    InvalidProfile { task_id: String, reason: String },
}

fn default_min_confidence() -> f64 {
    DEFAULT_MIN_CONFIDENCE
}
fn default_move_threshold() -> Option<f64> {
    Some(DEFAULT_MOVE_THRESHOLD_PX)
}
fn default_scale_threshold() -> Option<f64> {
    Some(DEFAULT_SCALE_RATIO_THRESHOLD)
}

/// Per-task bundle of OOI categories, thresholds and instructions.
///
/// A behavior threshold of `None` disables that trigger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskProfile {
    pub task_id: String,
    pub ooi_categories: BTreeSet<String>,
    #[serde(default = "default_min_confidence")]
    pub min_confidence: f64,
    #[serde(default = "default_move_threshold")]
    pub move_threshold_px: Option<f64>,
    #[serde(default = "default_scale_threshold")]
    pub scale_ratio_threshold: Option<f64>,
    #[serde(default)]
    pub custom_rules: Vec<CustomRule>,
    #[serde(default)]
    pub caption_instruction: String,
    #[serde(default)]
    pub context_instruction: String,
}

impl TaskProfile {
    pub fn new<S: Into<String>>(task_id: &str, categories: impl IntoIterator<Item = S>) -> Self {
        TaskProfile {
            task_id: task_id.to_string(),
            ooi_categories: categories.into_iter().map(Into::into).collect(),
            min_confidence: DEFAULT_MIN_CONFIDENCE,
            move_threshold_px: Some(DEFAULT_MOVE_THRESHOLD_PX),
            scale_ratio_threshold: Some(DEFAULT_SCALE_RATIO_THRESHOLD),
            custom_rules: Vec::new(),
            caption_instruction: "Describe the scene in detail.".to_string(),
            context_instruction: String::new(),
        }
    }

    /// Same profile with behavior triggers and custom rules switched off, so
    /// only count changes raise events.
    pub fn counts_only(mut self) -> Self {
        self.move_threshold_px = None;
        self.scale_ratio_threshold = None;
        self.custom_rules.clear();
        self
    }

    pub fn admits(&self, d: &Detection) -> bool {
        d.confidence >= self.min_confidence && self.ooi_categories.contains(&d.category)
    }

    pub fn validate(&self) -> Result<(), EoiError> {
        let fail = |reason: &str| {
            Err(EoiError::InvalidProfile {
                task_id: self.task_id.clone(),
                reason: reason.to_string(),
            })
        };
        if self.ooi_categories.is_empty() {
            return fail("ooi_categories is empty");
        }
        if !(0.0..=1.0).contains(&self.min_confidence) {
            return fail("min_confidence must lie in [0, 1]");
        }
        if let Some(t) = self.move_threshold_px {
            if t.is_nan() || t <= 0.0 {
                return fail("move_threshold_px must be positive");
            }
        }
        if let Some(t) = self.scale_ratio_threshold {
            if t.is_nan() || t <= 1.0 {
                return fail("scale_ratio_threshold must exceed 1");
            }
        }
        Ok(())
    }
}

/// A named predicate over a frame delta.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomRule {
    pub name: String,
    #[serde(flatten)]
    pub predicate: RulePredicate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "when", rename_all = "snake_case")]
pub enum RulePredicate {
    /// Category goes from absent to present.
    Appears { category: String },
    /// Category goes from present to absent.
    Disappears { category: String },
    /// Category count crosses upward to at least `count`.
    ReachesCount { category: String, count: u32 },
    /// Total OOI count changes by at least `amount` in one frame.
    TotalJump { amount: u32 },
}

impl RulePredicate {
    pub fn fires(&self, delta: &FrameDelta) -> bool {
        let get = |c: &str| {
            delta
                .counts
                .get(c)
                .copied()
                .unwrap_or(CountChange { before: 0, after: 0 })
        };
        match self {
            RulePredicate::Appears { category } => {
                let c = get(category);
                c.before == 0 && c.after > 0
            }
            RulePredicate::Disappears { category } => {
                let c = get(category);
                c.before > 0 && c.after == 0
            }
            RulePredicate::ReachesCount { category, count } => {
                let c = get(category);
                c.before < *count && c.after >= *count
            }
            RulePredicate::TotalJump { amount } => {
                let before: i64 = delta.counts.values().map(|c| i64::from(c.before)).sum();
                let after: i64 = delta.counts.values().map(|c| i64::from(c.after)).sum();
                (after - before).unsigned_abs() >= u64::from(*amount)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    CountChange,
    BehaviorChange,
    Custom(String),
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EventKind::CountChange => f.write_str("count_change"),
            EventKind::BehaviorChange => f.write_str("behavior_change"),
            EventKind::Custom(name) => write!(f, "custom:{name}"),
        }
    }
}

impl FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "count_change" => Ok(EventKind::CountChange),
            "behavior_change" => Ok(EventKind::BehaviorChange),
            _ => s
                .strip_prefix("custom:")
                .map(|n| EventKind::Custom(n.to_string()))
                .ok_or_else(|| format!("unknown event kind {s:?}")),
        }
    }
}

impl Serialize for EventKind {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for EventKind {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Caption outcome recorded when the event enters the log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaptionStatus {
    Captioned,
    CountOnly,
    Pending,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub event_id: u64,
    pub frame_id: u64,
    pub timestamp_ms: u64,
    pub kinds: BTreeSet<EventKind>,
    pub count_deltas: BTreeMap<String, CountChange>,
    pub caption_status: CaptionStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caption: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_ref: Option<String>,
}

/// Returns an event when any trigger fires on `delta`; simultaneous triggers
/// merge into one record.
pub fn classify_event(delta: &FrameDelta, profile: &TaskProfile, event_id: u64) -> Option<EventRecord> {
    let mut kinds = BTreeSet::new();
    if delta.has_count_change() {
        kinds.insert(EventKind::CountChange);
    }
    let moved = |d: f64| profile.move_threshold_px.is_some_and(|t| d > t);
    let rescaled = |r: f64| profile.scale_ratio_threshold.is_some_and(|t| r > t || r < 1.0 / t);
    if delta
        .motions
        .iter()
        .any(|m| moved(m.displacement_px) || rescaled(m.scale_ratio))
    {
        kinds.insert(EventKind::BehaviorChange);
    }
    for rule in &profile.custom_rules {
        if rule.predicate.fires(delta) {
            kinds.insert(EventKind::Custom(rule.name.clone()));
        }
    }
    if kinds.is_empty() {
        return None;
    }
    Some(EventRecord {
        event_id,
        frame_id: delta.frame_id,
        timestamp_ms: delta.timestamp_ms,
        kinds,
        count_deltas: delta.counts.clone(),
        caption_status: CaptionStatus::Pending,
        caption: None,
        image_ref: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaptionPolicy {
    Naive,
    #[default]
    Hybrid,
}

impl FromStr for CaptionPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "naive" => Ok(CaptionPolicy::Naive),
            "hybrid" => Ok(CaptionPolicy::Hybrid),
            _ => Err(format!("unknown policy {s:?} (expected naive or hybrid)")),
        }
    }
}

impl fmt::Display for CaptionPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CaptionPolicy::Naive => "naive",
            CaptionPolicy::Hybrid => "hybrid",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CaptionerState {
    pub busy_until_ms: u64,
    pub last_dispatch_ms: Option<u64>,
    pub last_now_ms: Option<u64>,
    pub pending: Option<EventRecord>,
}

impl CaptionerState {
    pub fn is_free(&self, now_ms: u64) -> bool {
        now_ms >= self.busy_until_ms
    }

    fn observe(&mut self, now_ms: u64) -> Result<(), EoiError> {
        if let Some(last) = self.last_now_ms {
            if now_ms < last {
                return Err(EoiError::ClockRegression { now_ms, last_ms: last });
            }
        }
        self.last_now_ms = Some(now_ms);
        Ok(())
    }

    fn dispatch(&mut self, at_ms: u64, latency_ms: u64) {
        self.busy_until_ms = at_ms + latency_ms;
        self.last_dispatch_ms = Some(at_ms);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleDecision {
    /// Captioner was free; the event goes out now with status `captioned`.
    Dispatch(EventRecord),
    /// Naive: the event waits; `dropped` is the waiting event it evicted.
    ReplacePending { dropped: Option<u64> },
    /// Hybrid: the event is logged `count_only` and waits as the caption
    /// candidate, superseding `superseded`.
    RecordCounts {
        logged: EventRecord,
        superseded: Option<u64>,
    },
}

/// Routes one event through the captioner under `policy`.
pub fn schedule_caption(
    mut event: EventRecord,
    now_ms: u64,
    mut captioner: CaptionerState,
    policy: CaptionPolicy,
    caption_latency_ms: u64,
) -> Result<(ScheduleDecision, CaptionerState), EoiError> {
    captioner.observe(now_ms)?;
    if captioner.is_free(now_ms) {
        captioner.dispatch(now_ms, caption_latency_ms);
        event.caption_status = CaptionStatus::Captioned;
        return Ok((ScheduleDecision::Dispatch(event), captioner));
    }
    let previous = captioner.pending.as_ref().map(|e| e.event_id);
    let decision = match policy {
        CaptionPolicy::Naive => {
            event.caption_status = CaptionStatus::Pending;
            captioner.pending = Some(event);
            ScheduleDecision::ReplacePending { dropped: previous }
        }
        CaptionPolicy::Hybrid => {
            event.caption_status = CaptionStatus::CountOnly;
            captioner.pending = Some(event.clone());
            ScheduleDecision::RecordCounts {
                logged: event,
                superseded: previous,
            }
        }
    };
    Ok((decision, captioner))
}

/// Once the captioner is free at `now_ms`, sends the waiting event (if any).
/// The dispatch is stamped at the moment the captioner freed up.
pub fn poll_captioner(
    mut captioner: CaptionerState,
    now_ms: u64,
    caption_latency_ms: u64,
) -> Result<(Option<(u64, EventRecord)>, CaptionerState), EoiError> {
    captioner.observe(now_ms)?;
    if !captioner.is_free(now_ms) {
        return Ok((None, captioner));
    }
    match captioner.pending.take() {
        Some(event) => {
            let at = captioner.busy_until_ms.max(captioner.last_dispatch_ms.unwrap_or(0));
            captioner.dispatch(at, caption_latency_ms);
            Ok((Some((at, event)), captioner))
        }
        None => Ok((None, captioner)),
    }
}

/// Rebuilds cumulative OOI counts from the logged count deltas alone.
pub fn reconstruct_timeline(event_log: &[EventRecord]) -> Result<Vec<(u64, CountMap)>, EoiError> {
    let mut running = CountMap::new();
    let mut out = Vec::with_capacity(event_log.len());
    for event in event_log {
        for (category, change) in &event.count_deltas {
            let current = running.get(category).copied().unwrap_or(0);
            if current != change.before {
                return Err(EoiError::InconsistentLog {
                    event_id: event.event_id,
                    category: category.clone(),
                    logged: change.before,
                    running: current,
                });
            }
        }
        apply_deltas(&mut running, event);
        out.push((event.timestamp_ms, running.clone()));
    }
    Ok(out)
}

pub(crate) fn apply_deltas(running: &mut CountMap, event: &EventRecord) {
    for (category, change) in &event.count_deltas {
        if change.after == 0 {
            running.remove(category);
        } else {
            running.insert(category.clone(), change.after);
        }
    }
}
