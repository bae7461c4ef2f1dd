//! Task tools and the selector that decides when one runs.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::{ContextError, InferenceBackend};
use crate::eoi::{EoiError, TaskProfile};
use crate::geometry::Rect;
use crate::scene::{FrameRecord, ImageRef, Label};
use crate::text::tokens;

/// Placeholder in a tool caption instruction replaced by the matched term.
pub const CHECKFOR_SLOT: &str = "{checkfor}";

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("utterance matches several tools: {}", candidates.join(", "))]
    AmbiguousTool { candidates: Vec<String> },
    #[error("frame {frame_id} carries no annotations")]
    NoAnnotations { frame_id: u64 },
    #[error("duplicate tool id {0}")]
    DuplicateTool(String),
    #[error("tool {0} has no trigger terms")]
    NoTriggers(String),
    #[error(transparent)]
    Profile(#[from] EoiError),
    #[error(transparent)]
    Backend(#[from] ContextError),
    #[error("registry {path}: {message}")]
    Load { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub tool_id: String,
    pub trigger_terms: BTreeSet<String>,
    pub profile: TaskProfile,
    #[serde(default = "default_tool_instruction")]
    pub tool_caption_instruction: String,
}

fn default_tool_instruction() -> String {
    "check {checkfor} use labels.".to_string()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ToolRegistry {
    #[serde(default)]
    tools: Vec<ToolSpec>,
}

impl ToolRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, mut tool: ToolSpec) -> Result<(), TaskError> {
        if self.get(&tool.tool_id).is_some() {
            return Err(TaskError::DuplicateTool(tool.tool_id));
        }
        tool.trigger_terms = tool.trigger_terms.iter().map(|t| t.to_lowercase()).collect();
        if tool.trigger_terms.is_empty() {
            return Err(TaskError::NoTriggers(tool.tool_id));
        }
        tool.profile.validate()?;
        self.tools.push(tool);
        self.tools.sort_by(|a, b| a.tool_id.cmp(&b.tool_id));
        Ok(())
    }

    pub fn get(&self, tool_id: &str) -> Option<&ToolSpec> {
        self.tools.iter().find(|t| t.tool_id == tool_id)
    }

    pub fn tools(&self) -> &[ToolSpec] {
        &self.tools
    }

    pub fn is_empty(&self) -> bool {
        self.tools.is_empty()
    }

    /// Parses a TOML registry with one `[[tools]]` table per tool.
    pub fn from_toml_str(src: &str) -> Result<Self, TaskError> {
        let raw: ToolRegistry = toml::from_str(src).map_err(|e| TaskError::Load {
            path: "<inline>".into(),
            message: e.to_string(),
        })?;
        let mut reg = ToolRegistry::new();
        for tool in raw.tools {
            reg.insert(tool)?;
        }
        Ok(reg)
    }

    pub fn load(path: &Path) -> Result<Self, TaskError> {
        let src = std::fs::read_to_string(path).map_err(|e| TaskError::Load {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&src).map_err(|e| match e {
            TaskError::Load { message, .. } => TaskError::Load {
                path: path.display().to_string(),
                message,
            },
            other => other,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolSelection {
    pub tool_id: String,
    pub action_input: BTreeMap<String, String>,
}

/// Decides whether an utterance calls for a tool.
pub trait ToolSelector {
    fn select(
        &self,
        utterance: &str,
        active_task: Option<&str>,
        registry: &ToolRegistry,
    ) -> Result<Option<ToolSelection>, TaskError>;
}

/// Trigger-term matcher over lowercased utterance tokens.
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleSelector;

impl ToolSelector for RuleSelector {
    fn select(
        &self,
        utterance: &str,
        active_task: Option<&str>,
        registry: &ToolRegistry,
    ) -> Result<Option<ToolSelection>, TaskError> {
        select_tool(utterance, active_task, registry)
    }
}

pub fn select_tool(
    utterance: &str,
    active_task: Option<&str>,
    registry: &ToolRegistry,
) -> Result<Option<ToolSelection>, TaskError> {
    let words = tokens(utterance);
    let matches: Vec<(&ToolSpec, &String)> = registry
        .tools()
        .iter()
        .filter_map(|t| words.iter().find(|w| t.trigger_terms.contains(*w)).map(|w| (t, w)))
        .collect();
    let chosen = match matches.len() {
        0 => return Ok(None),
        1 => matches[0],
        _ => match matches.iter().find(|(t, _)| Some(t.tool_id.as_str()) == active_task) {
            Some(m) => *m,
            None => {
                return Err(TaskError::AmbiguousTool {
                    candidates: matches.iter().map(|(t, _)| t.tool_id.clone()).collect(),
                })
            }
        },
    };
    Ok(Some(ToolSelection {
        tool_id: chosen.0.tool_id.clone(),
        action_input: BTreeMap::from([("checkfor".to_string(), chosen.1.clone())]),
    }))
}

const CELL_NAMES: [[&str; 3]; 3] = [
    ["top left", "top center", "top right"],
    ["middle left", "center", "middle right"],
    ["bottom left", "bottom center", "bottom right"],
];

/// 3x3 grid cell (row, col) holding the box center. A center exactly on a
/// cell boundary goes to the lower-index cell.
pub fn grid_cell(bbox: &Rect, width: u32, height: u32) -> (usize, usize) {
    // compare 3 * center against multiples of the extent, all doubled to stay integral
    let index = |origin: u32, extent: u32, limit: u32| {
        let c3 = 3 * (2 * u64::from(origin) + u64::from(extent));
        let l = 2 * u64::from(limit);
        if c3 <= l {
            0
        } else if c3 <= 2 * l {
            1
        } else {
            2
        }
    };
    (index(bbox.y, bbox.height, height), index(bbox.x, bbox.width, width))
}

pub fn cell_name(cell: (usize, usize)) -> &'static str {
    CELL_NAMES[cell.0][cell.1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolOutput {
    pub labeled_image: ImageRef,
    pub tool_caption: String,
}

/// Runs a task tool on a frame: overlays labels for the tool's categories and
/// captions the labeled image with the tool's instruction.
pub fn apply_tool(
    tool: &ToolSpec,
    frame: &FrameRecord,
    action_input: &BTreeMap<String, String>,
    backend: &dyn InferenceBackend,
) -> Result<ToolOutput, TaskError> {
    if frame.detections.is_empty() {
        return Err(TaskError::NoAnnotations {
            frame_id: frame.frame_id,
        });
    }
    let labels: Vec<Label> = frame
        .detections
        .iter()
        .filter(|d| tool.profile.admits(d))
        .map(|d| Label {
            category: d.category.clone(),
            bbox: d.bbox,
            location: cell_name(grid_cell(&d.bbox, frame.width, frame.height)).to_string(),
        })
        .collect();
    let labeled_image = ImageRef::Labeled {
        source: Box::new(frame.image(|_| true)),
        categories: tool.profile.ooi_categories.iter().cloned().collect(),
        labels,
    };
    let checkfor = action_input.get("checkfor").map(String::as_str).unwrap_or("");
    let instruction = tool.tool_caption_instruction.replace(CHECKFOR_SLOT, checkfor);
    let tool_caption = backend.caption(&labeled_image, &instruction)?;
    Ok(ToolOutput {
        labeled_image,
        tool_caption,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::MockBackend;
    use crate::scene::Detection;

    fn pcb_tool() -> ToolSpec {
        ToolSpec {
            tool_id: "PCB".into(),
            trigger_terms: ["defect", "defects"].iter().map(|s| s.to_string()).collect(),
            profile: TaskProfile::new("pcb_defects", ["mouse_bite", "open_circuit", "short"]),
            tool_caption_instruction: default_tool_instruction(),
        }
    }

    fn registry() -> ToolRegistry {
        let mut r = ToolRegistry::new();
        r.insert(pcb_tool()).unwrap();
        r
    }

    #[test]
    fn selects_on_trigger() {
        let s = select_tool("Are there any defects in the circuit?", None, &registry())
            .unwrap()
            .unwrap();
        assert_eq!(s.tool_id, "PCB");
        assert_eq!(s.action_input["checkfor"], "defects");
    }

    #[test]
    fn no_trigger_no_tool() {
        let r = registry();
        assert!(select_tool("How many problems did you see?", Some("PCB"), &r)
            .unwrap()
            .is_none());
        assert!(select_tool("How many flowers did you see?", None, &r)
            .unwrap()
            .is_none());
    }

    #[test]
    fn ambiguity_and_active_task() {
        let mut r = registry();
        let mut other = pcb_tool();
        other.tool_id = "SOLDER".into();
        other.trigger_terms = ["defects", "joints"].iter().map(|s| s.to_string()).collect();
        r.insert(other).unwrap();
        assert!(matches!(
            select_tool("any defects?", None, &r),
            Err(TaskError::AmbiguousTool { .. })
        ));
        let s = select_tool("any defects?", Some("SOLDER"), &r).unwrap().unwrap();
        assert_eq!(s.tool_id, "SOLDER");
        let s = select_tool("check the joints", None, &r).unwrap().unwrap();
        assert_eq!(s.tool_id, "SOLDER");
    }

    #[test]
    fn registry_rejects_duplicates_and_empty_triggers() {
        let mut r = registry();
        assert!(matches!(r.insert(pcb_tool()), Err(TaskError::DuplicateTool(_))));
        let mut t = pcb_tool();
        t.tool_id = "X".into();
        t.trigger_terms.clear();
        assert!(matches!(r.insert(t), Err(TaskError::NoTriggers(_))));
    }

    #[test]
    fn registry_from_toml() {
        let src = r#"
            [[tools]]
            tool_id = "PCB"
            trigger_terms = ["Defects", "defect"]
            tool_caption_instruction = "check {checkfor} use labels."
            [tools.profile]
            task_id = "pcb_defects"
            ooi_categories = ["mouse_bite"]
        "#;
        let r = ToolRegistry::from_toml_str(src).unwrap();
        assert!(r.get("PCB").unwrap().trigger_terms.contains("defects"));
        assert!(ToolRegistry::from_toml_str("[[tools]]\ntool_id = 3").is_err());
    }

    #[test]
    fn grid_cells_and_ties() {
        assert_eq!(grid_cell(&Rect::new(0, 0, 10, 10), 300, 300), (0, 0));
        assert_eq!(grid_cell(&Rect::new(280, 280, 10, 10), 300, 300), (2, 2));
        // center exactly on x = 100 (the first boundary) stays left
        assert_eq!(grid_cell(&Rect::new(95, 150, 10, 10), 300, 300), (1, 0));
        assert_eq!(grid_cell(&Rect::new(96, 150, 10, 10), 300, 300), (1, 1));
        assert_eq!(cell_name((2, 2)), "bottom right");
    }

    fn pcb_frame(dets: Vec<Detection>) -> FrameRecord {
        FrameRecord {
            frame_id: 3,
            timestamp_ms: 0,
            width: 900,
            height: 600,
            image_ref: None,
            detections: dets,
        }
    }

    #[test]
    fn labels_three_mouse_bites() {
        let frame = pcb_frame(vec![
            Detection::new("resistor", Rect::new(400, 250, 40, 20), 0.9),
            Detection::new("mouse_bite", Rect::new(800, 500, 20, 20), 0.8),
            Detection::new("mouse_bite", Rect::new(700, 450, 20, 20), 0.8),
            Detection::new("mouse_bite", Rect::new(50, 40, 20, 20), 0.8),
        ]);
        let input = BTreeMap::from([("checkfor".to_string(), "defects".to_string())]);
        let out = apply_tool(&pcb_tool(), &frame, &input, &MockBackend).unwrap();
        assert_eq!(
            out.tool_caption,
            "There are 3 labeled objects in the image: 1. mouse_bite located at the bottom right; \
             2. mouse_bite located at the bottom right; 3. mouse_bite located at the top left."
        );
        match out.labeled_image {
            ImageRef::Labeled { labels, .. } => assert_eq!(labels.len(), 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn nothing_found_and_no_annotations() {
        let input = BTreeMap::new();
        let frame = pcb_frame(vec![Detection::new("resistor", Rect::new(0, 0, 5, 5), 0.9)]);
        let out = apply_tool(&pcb_tool(), &frame, &input, &MockBackend).unwrap();
        assert_eq!(out.tool_caption, "no mouse_bite or open_circuit or short found");
        assert!(matches!(
            apply_tool(&pcb_tool(), &pcb_frame(vec![]), &input, &MockBackend),
            Err(TaskError::NoAnnotations { frame_id: 3 })
        ));
    }
}
