//! Seeded random scenarios for property tests and benchmarks.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use super::scenario::{ScenarioScript, ScriptGaze, Utterance};
use crate::eoi::TaskProfile;
use crate::geometry::Rect;
use crate::scene::{Detection, FrameRecord};

pub const SYNTH_WIDTH: u32 = 640;
pub const SYNTH_HEIGHT: u32 = 480;
pub const SYNTH_FRAME_RATE_HZ: f64 = 10.0;
pub const SYNTH_CATEGORIES: [&str; 4] = ["apple", "banana", "orange", "pear"];

pub fn synth_profile() -> TaskProfile {
    TaskProfile::new("synth", SYNTH_CATEGORIES)
}

/// A scene where per-category counts random-walk between 0 and 4, boxes
/// jitter around slowly, some detections fall below the confidence floor and
/// a distractor category appears now and then.
pub fn random_scenario(seed: u64, n_frames: usize) -> ScenarioScript {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut script = ScenarioScript::empty(&format!("synth-{seed}"), "synth");
    script.frame_rate_hz = SYNTH_FRAME_RATE_HZ;
    script.profiles.push(synth_profile());
    let period = script.frame_period_ms();

    // object state: (category, x, y, size)
    let mut objects: Vec<(usize, i64, i64, u32)> = Vec::new();
    let mut ts = 0u64;
    for i in 0..n_frames {
        for c in 0..SYNTH_CATEGORIES.len() {
            if rng.gen_bool(0.15) {
                let present = objects.iter().filter(|o| o.0 == c).count();
                if rng.gen_bool(0.5) && present < 4 {
                    objects.push((c, rng.gen_range(0..560), rng.gen_range(0..400), rng.gen_range(30..80)));
                } else if let Some(pos) = objects.iter().position(|o| o.0 == c) {
                    objects.remove(pos);
                }
            }
        }
        for o in &mut objects {
            o.1 = (o.1 + rng.gen_range(-6..=6)).clamp(0, 560);
            o.2 = (o.2 + rng.gen_range(-6..=6)).clamp(0, 400);
            if rng.gen_bool(0.05) {
                // swift move
                o.1 = rng.gen_range(0..560);
            }
        }
        let mut detections: Vec<Detection> = objects
            .iter()
            .map(|&(c, x, y, s)| {
                Detection::new(
                    SYNTH_CATEGORIES[c],
                    Rect::new(x as u32, y as u32, s, s),
                    rng.gen_range(0.3..1.0),
                )
            })
            .collect();
        if rng.gen_bool(0.1) {
            detections.push(Detection::new("cup", Rect::new(0, 0, 40, 40), 0.9));
        }
        script.frames.push(FrameRecord {
            frame_id: i as u64 + 1,
            timestamp_ms: ts,
            width: SYNTH_WIDTH,
            height: SYNTH_HEIGHT,
            image_ref: None,
            detections,
        });
        script.gaze_trace.push(ScriptGaze {
            x: rng.gen_range(-40.0..680.0),
            y: rng.gen_range(0.0..480.0),
            radius_px: Some(rng.gen_range(40.0..160.0)),
            timestamp_ms: ts,
        });
        if rng.gen_bool(0.05) {
            script.utterances.push(Utterance {
                press_ts_ms: ts,
                release_ts_ms: ts + rng.gen_range(0..3) * period,
                text: "What am I looking at?".to_string(),
            });
        }
        ts += period;
    }
    script.utterances.sort_by_key(|u| u.release_ts_ms);
    script
}
