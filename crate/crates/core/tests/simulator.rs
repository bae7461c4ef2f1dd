use std::path::PathBuf;

use hux_core::sim::RoiStatus;
use hux_core::{oracle, run_scenario, score, CaptionPolicy, CaptionStatus, MockBackend, ScenarioScript, SimConfig};

fn load(name: &str) -> (String, ScenarioScript) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name);
    let src = std::fs::read_to_string(path).unwrap();
    let script = ScenarioScript::parse(&src).unwrap();
    (src, script)
}

fn run(script: &ScenarioScript, config: &SimConfig) -> hux_core::RunReport {
    run_scenario(script, config, &MockBackend).unwrap()
}

#[test]
fn serialization_order_does_not_matter() {
    for name in ["fruit.scn", "pcb.scn", "gaze_outside.scn", "busy_window.scn"] {
        let (src, script) = load(name);
        let mut lines: Vec<&str> = src.lines().collect();
        lines.reverse();
        let shuffled = ScenarioScript::parse(&lines.join("\n")).unwrap();
        assert_eq!(shuffled, script, "{name}");
        let config = SimConfig::default();
        assert_eq!(
            run(&shuffled, &config).to_json(),
            run(&script, &config).to_json(),
            "{name}"
        );
    }
}

#[test]
fn prompt_scene_is_liou_top_at_release() {
    for name in ["fruit.scn", "pcb.scn", "gaze_outside.scn", "busy_window.scn"] {
        let (_, script) = load(name);
        for latency in [0, 250, 600, 1500] {
            let config = SimConfig {
                latency_override: Some(latency),
                ..SimConfig::default()
            };
            let report = run(&script, &config);
            for turn in &report.transcript {
                let top = report
                    .captions
                    .iter()
                    .rfind(|c| c.completed_ms <= turn.release_ts_ms)
                    .and_then(|c| c.caption.clone())
                    .unwrap_or_default();
                assert_eq!(turn.scene_caption, top, "{name} latency {latency} turn {}", turn.index);
                let line = format!("General detailed description of user environment: {top}");
                assert!(turn.prompt.contains(&line));
            }
        }
    }
}

#[test]
fn fruit_turns_follow_hand_simulated_timeline() {
    // latency 600 at 500 ms frames, every frame an event:
    // captions complete at 600 (f1), 1200 (f2), 1800 (f3), 2400 (f4),
    // 3000 (f5), 3600 (f6), 4200 (f8), 4800 (f9); f7 is superseded by f8
    let (_, script) = load("fruit.scn");
    let report = run(&script, &SimConfig::default());
    assert_eq!(report.policy, CaptionPolicy::Hybrid);
    let scenes: Vec<&str> = report.transcript.iter().map(|t| t.scene_caption.as_str()).collect();
    assert_eq!(
        scenes,
        [
            "A scene containing 1 apple, 2 banana, 1 orange",
            "A scene containing 1 apple, 2 banana",
            "A scene containing 2 banana, 1 orange",
            "A scene containing 3 banana, 1 orange",
        ]
    );
    let frames: Vec<Option<u64>> = report.transcript.iter().map(|t| t.frame_id).collect();
    assert_eq!(frames, [Some(3), Some(5), Some(7), Some(9)]);
}

#[test]
fn out_of_scene_gaze_drops_gazing_line() {
    let (_, script) = load("gaze_outside.scn");
    let report = run(&script, &SimConfig::default());
    let statuses: Vec<RoiStatus> = report.transcript.iter().map(|t| t.roi_status).collect();
    assert_eq!(
        statuses,
        [RoiStatus::Captured, RoiStatus::OutOfScene, RoiStatus::Captured]
    );
    let t = &report.transcript[1];
    assert!(t.roi_caption.is_none() && t.roi_rect.is_none());
    assert!(!t.prompt.contains("gazing"));
    assert!(report.transcript[0].prompt.contains("User is specifically gazing at: "));
}

#[test]
fn busy_window_policies() {
    let (_, script) = load("busy_window.scn");
    let naive = run(
        &script,
        &SimConfig {
            policy_override: Some(CaptionPolicy::Naive),
            ..SimConfig::default()
        },
    );
    let ids: Vec<u64> = naive.event_log.iter().map(|e| e.frame_id).collect();
    assert_eq!(ids, [1, 3]);
    assert!(naive
        .event_log
        .iter()
        .all(|e| e.caption_status == CaptionStatus::Captioned));
    // frame 3 is captioned when the captioner frees at 1000 ms
    assert_eq!(naive.captions[1].dispatched_ms, 1000);

    let hybrid = run(&script, &SimConfig::default());
    let statuses: Vec<CaptionStatus> = hybrid.event_log.iter().map(|e| e.caption_status).collect();
    assert_eq!(
        statuses,
        [
            CaptionStatus::Captioned,
            CaptionStatus::CountOnly,
            CaptionStatus::CountOnly
        ]
    );
    assert_eq!(hybrid.captions.len(), 2);
    assert_eq!(hybrid.captions[1].frame_id, 3);

    let truth = oracle(&script, &script.profiles[0]);
    assert!(score(&naive, &truth).unwrap().oracle_count_mismatches > 0);
    assert_eq!(score(&hybrid, &truth).unwrap().oracle_count_mismatches, 0);
}

#[test]
fn empty_script_gives_empty_report() {
    let (_, script) = load("empty.scn");
    let report = run(&script, &SimConfig::default());
    assert!(report.transcript.is_empty() && report.event_log.is_empty());
    assert_eq!(report.metrics, Default::default());
}

#[test]
fn zero_latency_recall_is_one() {
    let (_, script) = load("fruit.scn");
    let report = run(
        &script,
        &SimConfig {
            latency_override: Some(0),
            policy_override: Some(CaptionPolicy::Naive),
            ..SimConfig::default()
        },
    );
    let s = score(&report, &oracle(&script, &script.profiles[0])).unwrap();
    assert_eq!(s.recall, 1.0);
    assert_eq!(s.oracle_count_mismatches, 0);
}

#[test]
fn score_rejects_other_script() {
    let (_, a) = load("fruit.scn");
    let (_, b) = load("pcb.scn");
    let report = run(&a, &SimConfig::default());
    assert!(score(&report, &oracle(&b, &b.profiles[0])).is_err());
}
