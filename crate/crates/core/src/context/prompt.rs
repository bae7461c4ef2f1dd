use serde::{Deserialize, Serialize};

use super::ContextError;

/// Fixed prefixes of the five prompt lines.
pub const PROMPT_LINES: [&str; 5] = [
    "Based on the previous responses and new multi-modal information, answer the next question:",
    "General detailed description of user environment:",
    "User is specifically gazing at:",
    "Human's speech query:",
    "Give only a relevant and precise answer to the Human's speech query:",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    User,
    Assistant,
    /// Observation returned by a task tool.
    Tool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: Speaker,
    pub text: String,
}

impl Turn {
    pub fn new(speaker: Speaker, text: impl Into<String>) -> Self {
        Turn {
            speaker,
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub scene_caption: String,
    pub roi_caption: Option<String>,
    pub utterance: String,
    pub history: Vec<Turn>,
}

// Slot text goes on a single line so the template keeps its shape.
fn one_line(s: &str) -> String {
    if s.contains(['\n', '\r']) {
        s.split(['\n', '\r'])
            .filter(|p| !p.is_empty())
            .collect::<Vec<_>>()
            .join(" ")
    } else {
        s.to_string()
    }
}

/// Renders the multimodal prompt. The gazing line is left out when there is
/// no ROI caption; history travels separately as prior turns.
pub fn assemble_prompt(bundle: &PromptBundle) -> Result<String, ContextError> {
    if bundle.utterance.trim().is_empty() {
        return Err(ContextError::EmptyUtterance);
    }
    let mut lines = Vec::with_capacity(5);
    lines.push(PROMPT_LINES[0].to_string());
    lines.push(format!("{} {}", PROMPT_LINES[1], one_line(&bundle.scene_caption)));
    if let Some(roi) = &bundle.roi_caption {
        lines.push(format!("{} {}", PROMPT_LINES[2], one_line(roi)));
    }
    lines.push(format!("{} {}", PROMPT_LINES[3], one_line(&bundle.utterance)));
    lines.push(PROMPT_LINES[4].to_string());
    Ok(lines.join("\n"))
}

/// Slots recovered from a rendered prompt.
#[derive(Debug, Default, PartialEq, Eq)]
pub(crate) struct PromptSlots<'a> {
    pub scene: Option<&'a str>,
    pub roi: Option<&'a str>,
    pub utterance: Option<&'a str>,
}

pub(crate) fn parse_prompt(prompt: &str) -> PromptSlots<'_> {
    let mut slots = PromptSlots::default();
    for line in prompt.lines() {
        let take = |prefix: &str| line.strip_prefix(prefix).map(str::trim);
        if let Some(v) = take(PROMPT_LINES[1]) {
            slots.scene = Some(v);
        } else if let Some(v) = take(PROMPT_LINES[2]) {
            slots.roi = Some(v);
        } else if let Some(v) = take(PROMPT_LINES[3]) {
            slots.utterance = Some(v);
        }
    }
    slots
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bundle(roi: Option<&str>) -> PromptBundle {
        PromptBundle {
            scene_caption: "two fruits on a table".into(),
            roi_caption: roi.map(str::to_string),
            utterance: "What am I looking at?".into(),
            history: vec![],
        }
    }

    #[test]
    fn five_line_template() {
        let p = assemble_prompt(&bundle(Some("a red apple"))).unwrap();
        assert_eq!(
            p,
            "Based on the previous responses and new multi-modal information, answer the next question:\n\
             General detailed description of user environment: two fruits on a table\n\
             User is specifically gazing at: a red apple\n\
             Human's speech query: What am I looking at?\n\
             Give only a relevant and precise answer to the Human's speech query:"
        );
    }

    #[test]
    fn roi_line_omitted() {
        let p = assemble_prompt(&bundle(None)).unwrap();
        assert_eq!(p.lines().count(), 4);
        assert!(!p.contains("gazing"));
    }

    #[test]
    fn empty_utterance() {
        let mut b = bundle(None);
        b.utterance = "  ".into();
        assert!(matches!(assemble_prompt(&b), Err(ContextError::EmptyUtterance)));
    }

    #[test]
    fn multiline_slots_are_flattened() {
        let mut b = bundle(None);
        b.scene_caption = "line one\nline two".into();
        let p = assemble_prompt(&b).unwrap();
        assert_eq!(p.lines().count(), 4);
        assert!(p.contains("environment: line one line two\n"));
    }

    #[test]
    fn parse_recovers_slots() {
        let p = assemble_prompt(&bundle(Some("a red apple"))).unwrap();
        let s = parse_prompt(&p);
        assert_eq!(s.scene, Some("two fruits on a table"));
        assert_eq!(s.roi, Some("a red apple"));
        assert_eq!(s.utterance, Some("What am I looking at?"));
    }
}
