use hux_core::{assemble_prompt, ContextError, PromptBundle, Speaker, Turn};

fn golden(name: &str) -> String {
    let path = format!("{}/tests/golden/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(path).unwrap()
}

fn bundle(scene: &str, roi: Option<&str>, utterance: &str) -> PromptBundle {
    PromptBundle {
        scene_caption: scene.into(),
        roi_caption: roi.map(str::to_string),
        utterance: utterance.into(),
        history: vec![],
    }
}

#[test]
fn five_line_template() {
    let p = assemble_prompt(&bundle(
        "A man and a woman are standing in a room with a whiteboard.",
        Some("A red mug on a wooden desk."),
        "What am I looking at?",
    ))
    .unwrap();
    assert_eq!(p, golden("with_roi.txt"));
    assert_eq!(p.lines().count(), 5);
}

#[test]
fn gazing_line_omitted_without_roi() {
    let p = assemble_prompt(&bundle(
        "A scene containing 2 apple, 1 banana",
        None,
        "How many apples are there?",
    ))
    .unwrap();
    assert_eq!(p, golden("without_roi.txt"));
    assert!(!p.contains("gazing"));
}

#[test]
fn multiline_slots_flattened_and_empty_scene_kept() {
    let p = assemble_prompt(&bundle(
        "",
        Some("A printed circuit board held up close.\nGreen solder mask."),
        "Are there any defects in the circuit?",
    ))
    .unwrap();
    assert_eq!(p, golden("flattened.txt"));
}

#[test]
fn history_does_not_change_the_text() {
    let mut b = bundle("s", Some("r"), "u");
    let plain = assemble_prompt(&b).unwrap();
    b.history = vec![
        Turn::new(Speaker::User, "earlier"),
        Turn::new(Speaker::Assistant, "reply"),
    ];
    assert_eq!(assemble_prompt(&b).unwrap(), plain);
}

#[test]
fn blank_utterance_rejected() {
    assert!(matches!(
        assemble_prompt(&bundle("s", None, "  ")),
        Err(ContextError::EmptyUtterance)
    ));
}
