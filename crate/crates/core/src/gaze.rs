//! Gaze-driven region of interest.
//!
//! At utterance release the latest gaze sample and the latest frame are paired
//! and a square crop of side `2 * radius_px` is cut around the gaze point.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Rect;
use crate::scene::{FrameRecord, ImageRef};

pub const DEFAULT_GAZE_RADIUS_PX: f64 = 120.0;

#[derive(Debug, Error, PartialEq)]
pub enum GazeError {
    #[error("no gaze sample at or before {release_ts_ms} ms")]
    NoGazeData { release_ts_ms: u64 },
    #[error("no frame at or before {release_ts_ms} ms")]
    NoFrame { release_ts_ms: u64 },
    #[error("gaze ({x}, {y}) lies outside the {width}x{height} scene")]
    OutOfScene { x: f64, y: f64, width: u32, height: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazeSample {
    pub x: f64,
    pub y: f64,
    pub radius_px: f64,
    pub timestamp_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoiCrop {
    pub source_frame_id: u64,
    pub rect: Rect,
    pub image_ref: ImageRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caption: Option<String>,
}

/// Latest gaze sample and latest frame at or before the release instant.
/// Both slices must be sorted by timestamp.
pub fn snapshot_at_release<'a>(
    gaze_trace: &'a [GazeSample],
    frames: &'a [FrameRecord],
    release_ts_ms: u64,
) -> Result<(&'a GazeSample, &'a FrameRecord), GazeError> {
    let g = gaze_trace.partition_point(|s| s.timestamp_ms <= release_ts_ms);
    let sample = g
        .checked_sub(1)
        .map(|i| &gaze_trace[i])
        .ok_or(GazeError::NoGazeData { release_ts_ms })?;
    let f = frames.partition_point(|fr| fr.timestamp_ms <= release_ts_ms);
    let frame = f
        .checked_sub(1)
        .map(|i| &frames[i])
        .ok_or(GazeError::NoFrame { release_ts_ms })?;
    Ok((sample, frame))
}

/// Places a span of `side` pixels centred on `center` inside `[0, limit]`,
/// translating first and shrinking only when the span exceeds the limit.
fn place(center: f64, side: u32, limit: u32) -> (u32, u32) {
    if side >= limit {
        return (0, limit);
    }
    let start = (center - f64::from(side) / 2.0).round();
    let max_start = f64::from(limit - side);
    (start.clamp(0.0, max_start) as u32, side)
}

/// Square crop around the gaze point, kept inside the frame.
pub fn extract_roi(frame: &FrameRecord, gaze: &GazeSample) -> Result<RoiCrop, GazeError> {
    let inside = |v: f64, limit: u32| v >= 0.0 && v <= f64::from(limit);
    if !inside(gaze.x, frame.width) || !inside(gaze.y, frame.height) {
        return Err(GazeError::OutOfScene {
            x: gaze.x,
            y: gaze.y,
            width: frame.width,
            height: frame.height,
        });
    }
    let side = (2.0 * gaze.radius_px).round().max(1.0);
    let side = if side >= f64::from(u32::MAX) {
        u32::MAX
    } else {
        side as u32
    };
    let (x, width) = place(gaze.x, side, frame.width);
    let (y, height) = place(gaze.y, side, frame.height);
    let rect = Rect::new(x, y, width, height);
    Ok(RoiCrop {
        source_frame_id: frame.frame_id,
        rect,
        image_ref: ImageRef::Crop {
            source: Box::new(frame.image(|_| true)),
            rect,
        },
        caption: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(id: u64, ts: u64, w: u32, h: u32) -> FrameRecord {
        FrameRecord {
            frame_id: id,
            timestamp_ms: ts,
            width: w,
            height: h,
            image_ref: None,
            detections: vec![],
        }
    }

    fn gaze(x: f64, y: f64, r: f64, ts: u64) -> GazeSample {
        GazeSample {
            x,
            y,
            radius_px: r,
            timestamp_ms: ts,
        }
    }

    #[test]
    fn latest_at_or_before_release() {
        let trace = [gaze(1.0, 1.0, 10.0, 100)];
        let frames = [frame(1, 90, 10, 10)];
        let (g, f) = snapshot_at_release(&trace, &frames, 120).unwrap();
        assert_eq!(g.timestamp_ms, 100);
        assert_eq!(f.timestamp_ms, 90);

        let trace = [
            gaze(1.0, 1.0, 10.0, 100),
            gaze(2.0, 2.0, 10.0, 120),
            gaze(3.0, 3.0, 10.0, 121),
        ];
        let frames = [frame(1, 90, 10, 10), frame(2, 120, 10, 10), frame(3, 150, 10, 10)];
        let (g, f) = snapshot_at_release(&trace, &frames, 120).unwrap();
        assert_eq!((g.x, f.frame_id), (2.0, 2));
    }

    #[test]
    fn release_before_data_errors() {
        let trace = [gaze(1.0, 1.0, 10.0, 100)];
        let frames = [frame(1, 90, 10, 10)];
        assert_eq!(
            snapshot_at_release(&trace, &frames, 50).unwrap_err(),
            GazeError::NoGazeData { release_ts_ms: 50 }
        );
        assert_eq!(
            snapshot_at_release(&[], &frames, 500).unwrap_err(),
            GazeError::NoGazeData { release_ts_ms: 500 }
        );
        assert_eq!(
            snapshot_at_release(&trace, &frames, 95).unwrap_err(),
            GazeError::NoGazeData { release_ts_ms: 95 }
        );
        assert_eq!(
            snapshot_at_release(&trace, &[frame(1, 200, 10, 10)], 150).unwrap_err(),
            GazeError::NoFrame { release_ts_ms: 150 }
        );
    }

    #[test]
    fn centred_crop() {
        let roi = extract_roi(&frame(1, 0, 1000, 1000), &gaze(500.0, 500.0, 100.0, 0)).unwrap();
        assert_eq!(roi.rect, Rect::new(400, 400, 200, 200));
        assert_eq!(roi.source_frame_id, 1);
    }

    #[test]
    fn crop_translates_at_border() {
        let f = frame(1, 0, 1000, 1000);
        let roi = extract_roi(&f, &gaze(10.0, 10.0, 100.0, 0)).unwrap();
        assert_eq!(roi.rect, Rect::new(0, 0, 200, 200));
        let roi = extract_roi(&f, &gaze(995.0, 1000.0, 100.0, 0)).unwrap();
        assert_eq!(roi.rect, Rect::new(800, 800, 200, 200));
    }

    #[test]
    fn crop_shrinks_only_when_too_large() {
        let roi = extract_roi(&frame(1, 0, 150, 1000), &gaze(75.0, 500.0, 100.0, 0)).unwrap();
        assert_eq!(roi.rect, Rect::new(0, 400, 150, 200));
    }

    #[test]
    fn gaze_outside_scene() {
        let err = extract_roi(&frame(1, 0, 1000, 1000), &gaze(1200.0, 500.0, 100.0, 0)).unwrap_err();
        assert!(matches!(err, GazeError::OutOfScene { .. }));
        assert!(extract_roi(&frame(1, 0, 1000, 1000), &gaze(-0.5, 500.0, 100.0, 0)).is_err());
        assert!(extract_roi(&frame(1, 0, 1000, 1000), &gaze(f64::NAN, 500.0, 100.0, 0)).is_err());
    }

    #[test]
    fn crop_of_crop_is_fixed_point() {
        let f = frame(1, 0, 640, 480);
        let g = gaze(37.0, 470.0, 90.0, 0);
        let roi = extract_roi(&f, &g).unwrap();
        let inner = frame(2, 0, roi.rect.width, roi.rect.height);
        let (cx, cy) = (f64::from(roi.rect.width) / 2.0, f64::from(roi.rect.height) / 2.0);
        let again = extract_roi(&inner, &gaze(cx, cy, g.radius_px, 0)).unwrap();
        assert_eq!(again.rect, Rect::new(0, 0, roi.rect.width, roi.rect.height));
    }
}
