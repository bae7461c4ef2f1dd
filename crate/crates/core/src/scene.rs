//! Frame and detection types plus per-frame scene state.
//!
//! [`ingest_frame`] folds one frame into a [`SceneState`], producing a
//! [`FrameDelta`] with per-category count changes and per-track motion.
//! [`counts_timeline`] is a tracking-free recount used as ground truth.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eoi::TaskProfile;
use crate::geometry::Rect;

/// Minimum IoU for a detection to continue an existing track.
pub const IOU_MATCH_THRESHOLD: f64 = 0.3;

pub type CountMap = BTreeMap<String, u32>;

#[derive(Debug, Error, PartialEq)]
pub enum SceneError {
    #[error("frame {frame_id} rejected: ids must increase (last ingested {last})")]
    RejectedFrame { frame_id: u64, last: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub category: String,
    pub bbox: Rect,
    pub confidence: f64,
}

impl Detection {
    pub fn new(category: impl Into<String>, bbox: Rect, confidence: f64) -> Self {
        Detection {
            category: category.into(),
            bbox,
            confidence,
        }
    }
}

/// A labeled object on an annotated image, with its coarse verbal location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Label {
    pub category: String,
    pub bbox: Rect,
    pub location: String,
}

/// Where an image comes from. Mock backends caption synthetic images from
/// their object lists; remote backends need a file on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ImageRef {
    File {
        path: String,
    },
    Synthetic {
        width: u32,
        height: u32,
        objects: Vec<Detection>,
    },
    Crop {
        source: Box<ImageRef>,
        rect: Rect,
    },
    /// Annotation overlay produced by a task tool.
    Labeled {
        source: Box<ImageRef>,
        categories: Vec<String>,
        labels: Vec<Label>,
    },
}

impl ImageRef {
    /// Short human-readable locator, used for memory records and reports.
    pub fn locator(&self) -> String {
        match self {
            ImageRef::File { path } => path.clone(),
            ImageRef::Synthetic { width, height, objects } => {
                format!("synthetic:{width}x{height}:{}", objects.len())
            }
            ImageRef::Crop { source, rect } => format!(
                "{}#crop={},{},{},{}",
                source.locator(),
                rect.x,
                rect.y,
                rect.width,
                rect.height
            ),
            ImageRef::Labeled { source, labels, .. } => {
                format!("{}#labels={}", source.locator(), labels.len())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame_id: u64,
    pub timestamp_ms: u64,
    pub width: u32,
    pub height: u32,
    /// Opaque locator of the source image, when one exists on disk.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_ref: Option<String>,
    #[serde(default)]
    pub detections: Vec<Detection>,
}

impl FrameRecord {
    /// The image as a captioner sees it. A file locator wins; otherwise a
    /// synthetic image carrying the detections that pass `keep`.
    pub fn image(&self, keep: impl Fn(&Detection) -> bool) -> ImageRef {
        match &self.image_ref {
            Some(path) => ImageRef::File { path: path.clone() },
            None => ImageRef::Synthetic {
                width: self.width,
                height: self.height,
                objects: self.detections.iter().filter(|d| keep(d)).cloned().collect(),
            },
        }
    }

    pub fn bounds(&self) -> Rect {
        Rect::new(0, 0, self.width, self.height)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub track_id: u64,
    pub category: String,
    pub last_bbox: Rect,
    pub last_seen_frame_id: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SceneState {
    pub counts: CountMap,
    pub tracked: Vec<Track>,
    pub last_frame_id: Option<u64>,
    pub next_track_id: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountChange {
    pub before: u32,
    pub after: u32,
}

impl CountChange {
    pub fn changed(&self) -> bool {
        self.before != self.after
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackMotion {
    pub track_id: u64,
    pub category: String,
    /// Distance between box centers, in pixels.
    pub displacement_px: f64,
    /// New area over old area.
    pub scale_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameDelta {
    pub frame_id: u64,
    pub timestamp_ms: u64,
    /// Every OOI category present before or after this frame.
    pub counts: BTreeMap<String, CountChange>,
    pub motions: Vec<TrackMotion>,
}

impl FrameDelta {
    pub fn has_count_change(&self) -> bool {
        self.counts.values().any(CountChange::changed)
    }
}

fn relevant<'a>(frame: &'a FrameRecord, profile: &'a TaskProfile) -> impl Iterator<Item = &'a Detection> + 'a {
    frame.detections.iter().filter(|d| profile.admits(d))
}

fn tally<'a>(detections: impl Iterator<Item = &'a Detection>) -> CountMap {
    let mut counts = CountMap::new();
    for d in detections {
        *counts.entry(d.category.clone()).or_insert(0) += 1;
    }
    counts
}

fn scale_ratio(old: &Rect, new: &Rect) -> f64 {
    match (old.area(), new.area()) {
        (0, 0) => 1.0,
        (0, _) => f64::INFINITY,
        (o, n) => n as f64 / o as f64,
    }
}

/// Folds `frame` into `state`. Detections are filtered by the profile's OOI
/// categories and confidence floor, then matched to live tracks greedily by
/// IoU within a category. Unmatched tracks end; unmatched detections open
/// new tracks with fresh ids.
pub fn ingest_frame(
    state: &SceneState,
    frame: &FrameRecord,
    profile: &TaskProfile,
) -> Result<(SceneState, FrameDelta), SceneError> {
    if let Some(last) = state.last_frame_id {
        if frame.frame_id <= last {
            return Err(SceneError::RejectedFrame {
                frame_id: frame.frame_id,
                last,
            });
        }
    }

    let detections: Vec<&Detection> = relevant(frame, profile).collect();

    // Candidate pairs above threshold, best IoU first; ties by track id then
    // detection index.
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (ti, track) in state.tracked.iter().enumerate() {
        for (di, det) in detections.iter().enumerate() {
            if det.category != track.category {
                continue;
            }
            let iou = track.last_bbox.iou(&det.bbox);
            if iou >= IOU_MATCH_THRESHOLD {
                pairs.push((iou, ti, di));
            }
        }
    }
    pairs.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then_with(|| state.tracked[a.1].track_id.cmp(&state.tracked[b.1].track_id))
            .then_with(|| a.2.cmp(&b.2))
    });

    let mut track_used = vec![false; state.tracked.len()];
    let mut det_owner: Vec<Option<usize>> = vec![None; detections.len()];
    for (_, ti, di) in pairs {
        if track_used[ti] || det_owner[di].is_some() {
            continue;
        }
        track_used[ti] = true;
        det_owner[di] = Some(ti);
    }

    let mut next_track_id = state.next_track_id;
    let mut tracked = Vec::with_capacity(detections.len());
    let mut motions = Vec::new();
    for (det, owner) in detections.iter().zip(&det_owner) {
        let track_id = match owner {
            Some(ti) => {
                let old = &state.tracked[*ti];
                let (ox, oy) = old.last_bbox.center();
                let (nx, ny) = det.bbox.center();
                motions.push(TrackMotion {
                    track_id: old.track_id,
                    category: old.category.clone(),
                    displacement_px: (nx - ox).hypot(ny - oy),
                    scale_ratio: scale_ratio(&old.last_bbox, &det.bbox),
                });
                old.track_id
            }
            None => {
                let id = next_track_id;
                next_track_id += 1;
                id
            }
        };
        tracked.push(Track {
            track_id,
            category: det.category.clone(),
            last_bbox: det.bbox,
            last_seen_frame_id: frame.frame_id,
        });
    }
    tracked.sort_by_key(|t| t.track_id);
    motions.sort_by_key(|m| m.track_id);

    let counts = tally(detections.iter().copied());
    let categories: BTreeSet<&String> = state.counts.keys().chain(counts.keys()).collect();
    let delta_counts = categories
        .into_iter()
        .map(|c| {
            (
                c.clone(),
                CountChange {
                    before: state.counts.get(c).copied().unwrap_or(0),
                    after: counts.get(c).copied().unwrap_or(0),
                },
            )
        })
        .collect();

    let next = SceneState {
        counts,
        tracked,
        last_frame_id: Some(frame.frame_id),
        next_track_id,
    };
    let delta = FrameDelta {
        frame_id: frame.frame_id,
        timestamp_ms: frame.timestamp_ms,
        counts: delta_counts,
        motions,
    };
    Ok((next, delta))
}

/// Per-frame OOI counts by plain recount, no tracking involved.
pub fn counts_timeline(frames: &[FrameRecord], profile: &TaskProfile) -> Vec<(u64, CountMap)> {
    frames
        .iter()
        .map(|f| (f.frame_id, tally(relevant(f, profile))))
        .collect()
}
