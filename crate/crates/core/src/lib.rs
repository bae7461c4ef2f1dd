//! Core pipeline for an always-on multimodal assistant.
//!
//! Frames with object annotations flow through [`scene`] (per-frame counts and
//! IoU tracking) into [`eoi`] (event classification and caption scheduling
//! under captioner latency). Utterances pick up the newest scene caption from
//! the [`context`] LIOU register, pair it with a gaze crop from [`gaze`],
//! optionally route through a task tool from [`tasks`], and are answered by an
//! inference backend. [`memory`] persists contextual memory records with
//! keyword retrieval, and [`sim`] drives the whole thing on a virtual clock.

pub mod context;
pub mod eoi;
pub mod gaze;
pub mod geometry;
pub mod memory;
pub mod scene;
pub mod sim;
pub mod tasks;
pub mod text;

pub use context::{
    assemble_prompt, BackendKind, BackendProfile, ContextError, InferenceBackend, LiouEntry, LiouStack, MockBackend,
    PromptBundle, RemoteBackend, Speaker, Turn,
};
pub use eoi::{
    classify_event, poll_captioner, reconstruct_timeline, schedule_caption, CaptionPolicy, CaptionStatus,
    CaptionerState, CustomRule, EoiError, EventKind, EventRecord, RulePredicate, ScheduleDecision, TaskProfile,
};
pub use gaze::{extract_roi, snapshot_at_release, GazeError, GazeSample, RoiCrop};
pub use geometry::Rect;
pub use memory::{
    create_memory, load_store, retrieve, save_store, MemoryDraft, MemoryError, MemoryMeta, MemoryRecord, MemoryStore,
    RetrievalHit,
};
pub use scene::{
    counts_timeline, ingest_frame, CountChange, CountMap, Detection, FrameDelta, FrameRecord, ImageRef, SceneError,
    SceneState, Track, TrackMotion,
};
pub use sim::{oracle, run_scenario, score, OracleOutput, RunReport, ScenarioScript, SimConfig};
pub use tasks::{apply_tool, grid_cell, select_tool, TaskError, ToolRegistry, ToolSelection, ToolSpec};
