use std::collections::{BTreeMap, BTreeSet};

use super::backend::InferenceBackend;
use super::prompt::{parse_prompt, Speaker, Turn};
use super::ContextError;
use crate::geometry::Rect;
use crate::scene::{Detection, ImageRef, Label};
use crate::text::content_runs;

/// Deterministic stand-in for the captioner and the language model.
///
/// Captions are templated from the object lists carried by synthetic images.
/// Answers are assembled from the structured facts in the prompt and history,
/// so transcripts replay byte for byte.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockBackend;

/// Nouns that refer back to whatever the last tool observation was about.
const GENERIC_NOUNS: &[&str] = &["problems", "issues", "defects", "things", "objects", "items"];

fn resolve_objects(image: &ImageRef) -> Result<Vec<Detection>, ContextError> {
    match image {
        ImageRef::Synthetic { objects, .. } => Ok(objects.clone()),
        ImageRef::Crop { source, rect } => Ok(resolve_objects(source)?
            .into_iter()
            .filter(|d| center_in(&d.bbox, rect))
            .collect()),
        ImageRef::Labeled { source, .. } => resolve_objects(source),
        ImageRef::File { path } => Err(ContextError::UnresolvableImage {
            locator: path.clone(),
            reason: "mock backend needs an annotated synthetic image".into(),
        }),
    }
}

fn center_in(bbox: &Rect, rect: &Rect) -> bool {
    let (cx, cy) = bbox.center();
    cx >= f64::from(rect.x) && cx <= rect.right() as f64 && cy >= f64::from(rect.y) && cy <= rect.bottom() as f64
}

/// "A scene containing 2 apple, 1 banana", categories in lexicographic order.
pub(crate) fn scene_sentence(objects: &[Detection]) -> String {
    let mut counts: BTreeMap<&str, u32> = BTreeMap::new();
    for d in objects {
        *counts.entry(d.category.as_str()).or_insert(0) += 1;
    }
    if counts.is_empty() {
        return "A scene containing nothing of interest".to_string();
    }
    let parts: Vec<String> = counts.iter().map(|(c, n)| format!("{n} {c}")).collect();
    format!("A scene containing {}", parts.join(", "))
}

fn labels_sentence(categories: &[String], labels: &[Label]) -> String {
    if labels.is_empty() {
        return format!("no {} found", categories.join(" or "));
    }
    let items: Vec<String> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| format!("{}. {} located at the {}", i + 1, l.category, l.location))
        .collect();
    let noun = if labels.len() == 1 {
        "labeled object"
    } else {
        "labeled objects"
    };
    format!("There are {} {noun} in the image: {}.", labels.len(), items.join("; "))
}

fn how_many_noun(utterance: &str) -> Option<String> {
    let words: Vec<&str> = utterance
        .split(|c: char| !c.is_alphanumeric() && c != '_')
        .filter(|w| !w.is_empty())
        .collect();
    words
        .windows(3)
        .find(|w| w[0] == "how" && w[1] == "many")
        .map(|w| w[2].to_string())
}

impl InferenceBackend for MockBackend {
    fn caption(&self, image: &ImageRef, _instruction: &str) -> Result<String, ContextError> {
        match image {
            ImageRef::Labeled { categories, labels, .. } => Ok(labels_sentence(categories, labels)),
            other => Ok(scene_sentence(&resolve_objects(other)?)),
        }
    }

    fn complete(&self, prompt: &str, history: &[Turn]) -> Result<String, ContextError> {
        if prompt.trim().is_empty() {
            return Err(ContextError::EmptyPrompt);
        }
        let slots = parse_prompt(prompt);
        let utterance = slots.utterance.unwrap_or(prompt).to_lowercase();
        let scene = slots.scene.unwrap_or("");

        if let Some(last) = history.last() {
            if last.speaker == Speaker::Tool {
                return Ok(format!("According to the tool observation: {}", last.text));
            }
        }
        if utterance.contains("looking at") {
            if let Some(roi) = slots.roi {
                return Ok(format!("You are looking at {roi}."));
            }
        }
        if let Some(noun) = how_many_noun(&utterance) {
            let stem = noun.strip_suffix('s').unwrap_or(&noun);
            if scene.to_lowercase().contains(stem) {
                return Ok(format!("In your environment: {scene}."));
            }
            if let Some(t) = history.iter().rev().find(|t| t.text.to_lowercase().contains(stem)) {
                return Ok(format!("From our conversation: {}", t.text));
            }
            if GENERIC_NOUNS.contains(&noun.as_str()) {
                if let Some(t) = history.iter().rev().find(|t| t.speaker == Speaker::Tool) {
                    return Ok(format!("From the earlier observation: {}", t.text));
                }
            }
            return Ok(format!(
                "None. There is no mention of {noun} in our conversation so far."
            ));
        }
        Ok(format!("In your environment: {scene}."))
    }

    fn keywords(&self, texts: &[&str]) -> Result<Vec<String>, ContextError> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        let mut emit = |k: String| {
            if seen.insert(k.clone()) {
                out.push(k);
            }
        };
        for text in texts {
            for run in content_runs(text) {
                for (i, word) in run.iter().enumerate() {
                    emit(word.clone());
                    if let Some(next) = run.get(i + 1) {
                        emit(format!("{word} {next}"));
                    }
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::prompt::{assemble_prompt, PromptBundle};

    fn det(cat: &str, x: u32, y: u32) -> Detection {
        Detection::new(cat, Rect::new(x, y, 10, 10), 0.9)
    }

    fn synthetic(objects: Vec<Detection>) -> ImageRef {
        ImageRef::Synthetic {
            width: 100,
            height: 100,
            objects,
        }
    }

    #[test]
    fn caption_template() {
        let img = synthetic(vec![det("banana", 0, 0), det("apple", 10, 0), det("apple", 20, 0)]);
        assert_eq!(
            MockBackend.caption(&img, "").unwrap(),
            "A scene containing 2 apple, 1 banana"
        );
        assert_eq!(
            MockBackend.caption(&synthetic(vec![]), "").unwrap(),
            "A scene containing nothing of interest"
        );
    }

    #[test]
    fn crop_caption_sees_only_inside_objects() {
        let img = ImageRef::Crop {
            source: Box::new(synthetic(vec![det("apple", 0, 0), det("pear", 80, 80)])),
            rect: Rect::new(50, 50, 50, 50),
        };
        assert_eq!(MockBackend.caption(&img, "").unwrap(), "A scene containing 1 pear");
    }

    #[test]
    fn file_images_are_unresolvable() {
        let img = ImageRef::File { path: "x.png".into() };
        assert!(matches!(
            MockBackend.caption(&img, ""),
            Err(ContextError::UnresolvableImage { .. })
        ));
    }

    fn prompt(scene: &str, roi: Option<&str>, utterance: &str) -> String {
        assemble_prompt(&PromptBundle {
            scene_caption: scene.into(),
            roi_caption: roi.map(str::to_string),
            utterance: utterance.into(),
            history: vec![],
        })
        .unwrap()
    }

    #[test]
    fn echoes_gaze_object() {
        let p = prompt("two fruits", Some("a red apple"), "What are we looking at?");
        assert!(MockBackend.complete(&p, &[]).unwrap().contains("red apple"));
    }

    #[test]
    fn falls_back_to_scene_counts() {
        let p = prompt("A scene containing 2 apple, 1 banana", None, "What is around me?");
        assert!(MockBackend.complete(&p, &[]).unwrap().contains("2 apple, 1 banana"));
    }

    #[test]
    fn refuses_out_of_context_counts() {
        let history = vec![
            Turn::new(Speaker::Tool, "There are 3 labeled objects in the image: ..."),
            Turn::new(Speaker::Assistant, "three mouse_bite defects"),
        ];
        let p = prompt("A scene containing 4 resistor", None, "How many flowers did you see?");
        let a = MockBackend.complete(&p, &history).unwrap();
        assert!(a.contains("no mention of flowers"), "{a}");
        let p = prompt("A scene containing 4 resistor", None, "How many problems did you see?");
        let a = MockBackend.complete(&p, &history).unwrap();
        assert!(!a.contains("no mention"), "{a}");
    }

    #[test]
    fn empty_prompt_rejected() {
        assert!(matches!(MockBackend.complete(" ", &[]), Err(ContextError::EmptyPrompt)));
    }

    #[test]
    fn keyword_phrases() {
        let k = MockBackend
            .keywords(&["New engineer in the lab", "He is wearing a yellow t-shirt"])
            .unwrap();
        for want in ["new engineer", "engineer", "lab", "yellow t-shirt"] {
            assert!(k.iter().any(|x| x == want), "missing {want}: {k:?}");
        }
        assert!(!k.iter().any(|x| x == "the" || x == "a"));
    }
}
