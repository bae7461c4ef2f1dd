//! Scenario files: UTF-8, one JSON record per line, tagged by `type`.
//!
//! ```text
//! {"type":"header","scenario_version":1,"name":"fruit","frame_rate_hz":2,"profile_ref":"fruit",
//!  "policy":"hybrid","caption_latency_ms":400,"width":1280,"height":720}
//! {"type":"profile","task_id":"fruit","ooi_categories":["apple","banana","orange"]}
//! {"type":"tool","tool_id":"PCB","trigger_terms":["defects"],"profile":{...}}
//! {"type":"frame","frame_id":1,"timestamp_ms":0,"detections":[{"category":"apple","bbox":[10,10,80,80],"confidence":0.9}]}
//! {"type":"gaze","x":640.0,"y":360.0,"radius_px":120.0,"timestamp_ms":0}
//! {"type":"utterance","press_ts_ms":1200,"release_ts_ms":2000,"text":"What am I looking at?"}
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Exactly one header is
//! required. Records of different types may be interleaved in any order; each
//! stream is sorted on load (frames by id, gaze by time, utterances by
//! release time).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eoi::{CaptionPolicy, TaskProfile};
use crate::gaze::GazeSample;
use crate::scene::{Detection, FrameRecord};
use crate::tasks::ToolSpec;

pub const SCENARIO_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
#[error("line {line}: {message}")]
pub struct ScenarioError {
    /// 1-based line number; 0 when the problem is not tied to one line.
    pub line: usize,
    pub message: String,
}

impl ScenarioError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        ScenarioError {
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub press_ts_ms: u64,
    pub release_ts_ms: u64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioScript {
    pub name: String,
    pub frame_rate_hz: f64,
    pub profile_ref: String,
    pub policy: Option<CaptionPolicy>,
    pub caption_latency_ms: Option<u64>,
    pub gaze_radius_px: Option<f64>,
    pub frames: Vec<FrameRecord>,
    pub gaze_trace: Vec<ScriptGaze>,
    pub utterances: Vec<Utterance>,
    /// Profiles and tools declared inline; these shadow the configured ones.
    pub profiles: Vec<TaskProfile>,
    pub tools: Vec<ToolSpec>,
}

impl ScenarioScript {
    pub fn empty(name: &str, profile_ref: &str) -> Self {
        ScenarioScript {
            name: name.to_string(),
            frame_rate_hz: 10.0,
            profile_ref: profile_ref.to_string(),
            policy: None,
            caption_latency_ms: None,
            gaze_radius_px: None,
            frames: Vec::new(),
            gaze_trace: Vec::new(),
            utterances: Vec::new(),
            profiles: Vec::new(),
            tools: Vec::new(),
        }
    }

    /// Frame period in milliseconds, rounded.
    pub fn frame_period_ms(&self) -> u64 {
        (1000.0 / self.frame_rate_hz).round() as u64
    }

    pub fn parse(src: &str) -> Result<Self, ScenarioError> {
        let mut header: Option<(usize, Header)> = None;
        let mut frames: Vec<(usize, FrameLine)> = Vec::new();
        let mut gaze: Vec<(usize, ScriptGaze)> = Vec::new();
        let mut utterances: Vec<(usize, Utterance)> = Vec::new();
        let mut profiles = Vec::new();
        let mut tools = Vec::new();

        for (i, raw) in src.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let record: Record = serde_json::from_str(trimmed).map_err(|e| ScenarioError::at(line, e.to_string()))?;
            match record {
                Record::Header(h) => {
                    if header.is_some() {
                        return Err(ScenarioError::at(line, "duplicate header record"));
                    }
                    header = Some((line, h));
                }
                Record::Profile(p) => {
                    p.validate().map_err(|e| ScenarioError::at(line, e.to_string()))?;
                    profiles.push(p);
                }
                Record::Tool(t) => tools.push(t),
                Record::Frame(f) => frames.push((line, f)),
                Record::Gaze(g) => gaze.push((line, g)),
                Record::Utterance(u) => utterances.push((line, u)),
            }
        }

        let (hline, header) = header.ok_or_else(|| ScenarioError::at(0, "missing header record"))?;
        if header.scenario_version != SCENARIO_VERSION {
            return Err(ScenarioError::at(
                hline,
                format!(
                    "unsupported scenario_version {} (expected {SCENARIO_VERSION})",
                    header.scenario_version
                ),
            ));
        }
        if header.frame_rate_hz.is_nan() || header.frame_rate_hz <= 0.0 {
            return Err(ScenarioError::at(hline, "frame_rate_hz must be positive"));
        }
        if let Some(r) = header.gaze_radius_px {
            if r.is_nan() || r <= 0.0 {
                return Err(ScenarioError::at(hline, "gaze_radius_px must be positive"));
            }
        }

        frames.sort_by_key(|(_, f)| f.frame_id);
        let mut out_frames = Vec::with_capacity(frames.len());
        let mut prev: Option<(u64, u64)> = None;
        for (line, f) in &frames {
            let width = f.width.or(header.width);
            let height = f.height.or(header.height);
            let (Some(width), Some(height)) = (width, height) else {
                return Err(ScenarioError::at(
                    *line,
                    "frame size unknown: set width/height on the frame or header",
                ));
            };
            if width == 0 || height == 0 {
                return Err(ScenarioError::at(*line, "frame size must be non-zero"));
            }
            for d in &f.detections {
                if !d.bbox.fits_within(width, height) {
                    return Err(ScenarioError::at(
                        *line,
                        format!("{} bbox lies outside the frame", d.category),
                    ));
                }
                if !(0.0..=1.0).contains(&d.confidence) {
                    return Err(ScenarioError::at(
                        *line,
                        format!("{} confidence outside [0, 1]", d.category),
                    ));
                }
            }
            if let Some((prev_id, prev_ts)) = prev {
                if prev_id == f.frame_id {
                    return Err(ScenarioError::at(*line, format!("duplicate frame_id {}", f.frame_id)));
                }
                if f.timestamp_ms < prev_ts {
                    return Err(ScenarioError::at(
                        *line,
                        format!("frame {} timestamp goes backward", f.frame_id),
                    ));
                }
            }
            out_frames.push(FrameRecord {
                frame_id: f.frame_id,
                timestamp_ms: f.timestamp_ms,
                width,
                height,
                image_ref: f.image_ref.clone(),
                detections: f.detections.clone(),
            });
            prev = Some((f.frame_id, f.timestamp_ms));
        }

        gaze.sort_by_key(|(_, g)| g.timestamp_ms);
        for (line, g) in &gaze {
            if !g.x.is_finite() || !g.y.is_finite() {
                return Err(ScenarioError::at(*line, "gaze coordinates must be finite"));
            }
            if g.radius_px.is_some_and(|r| r.is_nan() || r <= 0.0) {
                return Err(ScenarioError::at(*line, "radius_px must be positive"));
            }
        }
        let gaze_trace = gaze.into_iter().map(|(_, g)| g).collect();

        utterances.sort_by_key(|(_, u)| u.release_ts_ms);
        for (line, u) in &utterances {
            if u.release_ts_ms < u.press_ts_ms {
                return Err(ScenarioError::at(*line, "release_ts_ms precedes press_ts_ms"));
            }
            if u.text.trim().is_empty() {
                return Err(ScenarioError::at(*line, "utterance text is empty"));
            }
        }

        Ok(ScenarioScript {
            name: header.name,
            frame_rate_hz: header.frame_rate_hz,
            profile_ref: header.profile_ref,
            policy: header.policy,
            caption_latency_ms: header.caption_latency_ms,
            gaze_radius_px: header.gaze_radius_px,
            frames: out_frames,
            gaze_trace,
            utterances: utterances.into_iter().map(|(_, u)| u).collect(),
            profiles,
            tools,
        })
    }

    /// Canonical serialization: header, profiles, tools, then the streams.
    pub fn to_jsonl(&self) -> String {
        let mut lines = Vec::new();
        let header = Header {
            scenario_version: SCENARIO_VERSION,
            name: self.name.clone(),
            frame_rate_hz: self.frame_rate_hz,
            profile_ref: self.profile_ref.clone(),
            policy: self.policy,
            caption_latency_ms: self.caption_latency_ms,
            gaze_radius_px: self.gaze_radius_px,
            width: None,
            height: None,
        };
        let mut push = |r: Record| lines.push(serde_json::to_string(&r).expect("scenario record serializes"));
        push(Record::Header(header));
        for p in &self.profiles {
            push(Record::Profile(p.clone()));
        }
        for t in &self.tools {
            push(Record::Tool(t.clone()));
        }
        for f in &self.frames {
            push(Record::Frame(FrameLine {
                frame_id: f.frame_id,
                timestamp_ms: f.timestamp_ms,
                width: Some(f.width),
                height: Some(f.height),
                image_ref: f.image_ref.clone(),
                detections: f.detections.clone(),
            }));
        }
        for g in &self.gaze_trace {
            push(Record::Gaze(*g));
        }
        for u in &self.utterances {
            push(Record::Utterance(u.clone()));
        }
        let mut out = lines.join("\n");
        out.push('\n');
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Record {
    Header(Header),
    Profile(TaskProfile),
    Tool(ToolSpec),
    Frame(FrameLine),
    Gaze(ScriptGaze),
    Utterance(Utterance),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    scenario_version: u32,
    name: String,
    frame_rate_hz: f64,
    profile_ref: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    policy: Option<CaptionPolicy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    caption_latency_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gaze_radius_px: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    width: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    height: Option<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FrameLine {
    frame_id: u64,
    timestamp_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    width: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    height: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    image_ref: Option<String>,
    #[serde(default)]
    detections: Vec<Detection>,
}

/// Gaze sample as scripted; a missing radius falls back to the header or
/// configured default when the scenario runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScriptGaze {
    pub x: f64,
    pub y: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius_px: Option<f64>,
    pub timestamp_ms: u64,
}

impl ScriptGaze {
    pub fn resolve(&self, default_radius_px: f64) -> GazeSample {
        GazeSample {
            x: self.x,
            y: self.y,
            radius_px: self.radius_px.unwrap_or(default_radius_px),
            timestamp_ms: self.timestamp_ms,
        }
    }
}
