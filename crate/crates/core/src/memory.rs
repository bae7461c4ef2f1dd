//! Multi-modal contextual memory.
//!
//! A record joins the caption of the object of interest, the scene caption,
//! what the user said about it, capture metadata and a list of retrieval
//! keywords. Records live in an append-only JSON-lines file. Field names are
//! the snake_case attribute names of the record table:
//!
//! ```text
//! {"record_id":"mem-000001","object_of_interest":"...","scene_description":"...",
//!  "object_type":"Person","name":"Imam","user_context":"New engineer in the lab",
//!  "original_scene_image_location":"...","cropped_object_of_interest_image_location":"...",
//!  "meta":{"location":"...","time":"...","device":"..."},"retrieval_keywords":["imam",...]}
//! ```
//!
//! Retrieval scores a record by the fraction of query tokens found among the
//! tokens of its keywords.

use std::collections::BTreeSet;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::{ContextError, InferenceBackend};
use crate::gaze::RoiCrop;
use crate::scene::FrameRecord;
use crate::text::{token_set, tokens};

#[derive(Debug, Error)]
pub enum MemoryError {
    #[error("missing {0} caption")]
    MissingCaption(&'static str),
    #[error("user context is empty")]
    EmptyUserContext,
    #[error("keyword generation produced no keywords")]
    NoKeywords,
    #[error("query is empty")]
    EmptyQuery,
    #[error("corrupt store at record {index}: {reason}")]
    CorruptStore { index: usize, reason: String },
    #[error("persistence failure: {0}")]
    PersistenceFailure(#[from] std::io::Error),
    #[error(transparent)]
    Backend(#[from] ContextError),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryMeta {
    pub location: String,
    pub time: String,
    pub device: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryRecord {
    pub record_id: String,
    #[serde(rename = "object_of_interest")]
    pub ooi_caption: String,
    #[serde(rename = "scene_description")]
    pub scene_caption: String,
    pub object_type: String,
    #[serde(default)]
    pub name: Option<String>,
    pub user_context: String,
    #[serde(rename = "original_scene_image_location")]
    pub scene_image_path: String,
    #[serde(rename = "cropped_object_of_interest_image_location")]
    pub ooi_image_path: String,
    pub meta: MemoryMeta,
    #[serde(rename = "retrieval_keywords")]
    pub keywords: Vec<String>,
}

/// Inputs for [`MemoryStore::create`]. The OOI caption is taken from the
/// crop's caption.
#[derive(Debug, Clone)]
pub struct MemoryDraft<'a> {
    pub scene: &'a FrameRecord,
    pub scene_caption: Option<&'a str>,
    pub roi: &'a RoiCrop,
    pub object_type: &'a str,
    pub name: Option<&'a str>,
    pub user_context: &'a str,
    pub meta: MemoryMeta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalHit {
    pub record_id: String,
    pub score: f64,
    pub matched_keywords: Vec<String>,
}

/// In-memory view of a record file, optionally bound to a path for appends.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MemoryStore {
    path: Option<PathBuf>,
    records: Vec<MemoryRecord>,
    next_seq: u64,
}

fn seq_of(id: &str) -> Option<u64> {
    id.strip_prefix("mem-").and_then(|n| n.parse().ok())
}

impl MemoryStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn from_records(records: Vec<MemoryRecord>) -> Self {
        let next_seq = records
            .iter()
            .filter_map(|r| seq_of(&r.record_id))
            .max()
            .map_or(1, |m| m + 1);
        MemoryStore {
            path: None,
            records,
            next_seq,
        }
    }

    /// Opens a store file for appending; a missing file is an empty store.
    pub fn open(path: &Path) -> Result<Self, MemoryError> {
        let mut store = if path.exists() {
            Self::load(path)?
        } else {
            Self::default()
        };
        store.path = Some(path.to_path_buf());
        if store.next_seq == 0 {
            store.next_seq = 1;
        }
        Ok(store)
    }

    pub fn load(path: &Path) -> Result<Self, MemoryError> {
        let file = File::open(path)?;
        let mut records = Vec::new();
        for (index, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| MemoryError::CorruptStore {
                index,
                reason: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let record: MemoryRecord = serde_json::from_str(&line).map_err(|e| MemoryError::CorruptStore {
                index,
                reason: e.to_string(),
            })?;
            records.push(record);
        }
        Ok(Self::from_records(records))
    }

    /// Rewrites the whole store at `path` via a temporary file.
    pub fn save(&self, path: &Path) -> Result<(), MemoryError> {
        let tmp = path.with_extension("tmp");
        {
            let mut f = File::create(&tmp)?;
            for r in &self.records {
                writeln!(f, "{}", serde_json::to_string(r).expect("record serializes"))?;
            }
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn records(&self) -> &[MemoryRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Appends a record, syncing it to disk first when the store is file-backed.
    pub fn append(&mut self, record: MemoryRecord) -> Result<(), MemoryError> {
        if let Some(path) = &self.path {
            let mut f = OpenOptions::new().create(true).append(true).open(path)?;
            writeln!(f, "{}", serde_json::to_string(&record).expect("record serializes"))?;
            f.sync_all()?;
        }
        if let Some(seq) = seq_of(&record.record_id) {
            self.next_seq = self.next_seq.max(seq + 1);
        }
        self.records.push(record);
        Ok(())
    }

    fn next_id(&mut self) -> String {
        let seq = self.next_seq.max(1);
        self.next_seq = seq + 1;
        format!("mem-{seq:06}")
    }

    /// Builds a record from captured data, generates keywords and persists it.
    pub fn create(
        &mut self,
        draft: MemoryDraft<'_>,
        keyword_gen: &dyn InferenceBackend,
    ) -> Result<MemoryRecord, MemoryError> {
        let scene_caption = draft
            .scene_caption
            .filter(|c| !c.trim().is_empty())
            .ok_or(MemoryError::MissingCaption("scene"))?;
        let ooi_caption = draft
            .roi
            .caption
            .as_deref()
            .filter(|c| !c.trim().is_empty())
            .ok_or(MemoryError::MissingCaption("object of interest"))?;
        if draft.user_context.trim().is_empty() {
            return Err(MemoryError::EmptyUserContext);
        }
        let mut sources = vec![ooi_caption, scene_caption, draft.user_context];
        if let Some(name) = draft.name {
            sources.insert(0, name);
        }
        let keywords = keyword_gen.keywords(&sources)?;
        if keywords.is_empty() {
            return Err(MemoryError::NoKeywords);
        }
        let scene_image_path = draft
            .scene
            .image_ref
            .clone()
            .unwrap_or_else(|| format!("synthetic:frame/{}", draft.scene.frame_id));
        let record = MemoryRecord {
            record_id: self.next_id(),
            ooi_caption: ooi_caption.to_string(),
            scene_caption: scene_caption.to_string(),
            object_type: draft.object_type.to_string(),
            name: draft.name.map(str::to_string),
            user_context: draft.user_context.to_string(),
            ooi_image_path: draft.roi.image_ref.locator(),
            scene_image_path,
            meta: draft.meta,
            keywords,
        };
        self.append(record.clone())?;
        Ok(record)
    }
}

/// Creates and persists a memory record in `store`.
pub fn create_memory(
    store: &mut MemoryStore,
    draft: MemoryDraft<'_>,
    keyword_gen: &dyn InferenceBackend,
) -> Result<MemoryRecord, MemoryError> {
    store.create(draft, keyword_gen)
}

pub fn load_store(path: &Path) -> Result<MemoryStore, MemoryError> {
    MemoryStore::load(path)
}

pub fn save_store(store: &MemoryStore, path: &Path) -> Result<(), MemoryError> {
    store.save(path)
}

/// Ranks records by keyword overlap with `query`. Zero-score records are left
/// out; ties go to the lower record id.
pub fn retrieve(query: &str, store: &MemoryStore) -> Result<Vec<RetrievalHit>, MemoryError> {
    let query_tokens = token_set(query);
    if query_tokens.is_empty() {
        return Err(MemoryError::EmptyQuery);
    }
    let mut hits: Vec<RetrievalHit> = store
        .records()
        .iter()
        .filter_map(|r| {
            let keyword_tokens: BTreeSet<String> = r.keywords.iter().flat_map(|k| tokens(k)).collect();
            let matched = query_tokens.intersection(&keyword_tokens).count();
            if matched == 0 {
                return None;
            }
            let matched_keywords = r
                .keywords
                .iter()
                .filter(|k| tokens(k).iter().any(|t| query_tokens.contains(t)))
                .cloned()
                .collect();
            Some(RetrievalHit {
                record_id: r.record_id.clone(),
                score: matched as f64 / query_tokens.len() as f64,
                matched_keywords,
            })
        })
        .collect();
    hits.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.record_id.cmp(&b.record_id)));
    Ok(hits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::MockBackend;
    use crate::gaze::{extract_roi, GazeSample};

    fn scene() -> FrameRecord {
        FrameRecord {
            frame_id: 12,
            timestamp_ms: 0,
            width: 640,
            height: 480,
            image_ref: Some("captures/scene_12.png".into()),
            detections: vec![],
        }
    }

    fn roi(frame: &FrameRecord, caption: Option<&str>) -> RoiCrop {
        let mut r = extract_roi(
            frame,
            &GazeSample {
                x: 320.0,
                y: 240.0,
                radius_px: 100.0,
                timestamp_ms: 0,
            },
        )
        .unwrap();
        r.caption = caption.map(str::to_string);
        r
    }

    fn draft<'a>(frame: &'a FrameRecord, crop: &'a RoiCrop, context: &'a str) -> MemoryDraft<'a> {
        MemoryDraft {
            scene: frame,
            scene_caption: Some("A young man waving in an electronics lab"),
            roi: crop,
            object_type: "Person",
            name: Some("Imam"),
            user_context: context,
            meta: MemoryMeta {
                location: "lab".into(),
                time: "2024-07-08T11:18:00".into(),
                device: "headset".into(),
            },
        }
    }

    #[test]
    fn create_fills_every_field() {
        let f = scene();
        let crop = roi(&f, Some("A man wearing a yellow t-shirt"));
        let mut store = MemoryStore::in_memory();
        let r = store
            .create(draft(&f, &crop, "New engineer in the lab"), &MockBackend)
            .unwrap();
        assert_eq!(r.record_id, "mem-000001");
        assert_eq!(r.scene_image_path, "captures/scene_12.png");
        assert_eq!(r.ooi_image_path, "captures/scene_12.png#crop=220,140,200,200");
        for k in ["imam", "new engineer", "yellow t-shirt"] {
            assert!(r.keywords.iter().any(|x| x == k), "missing {k}");
        }
    }

    #[test]
    fn create_preconditions() {
        let f = scene();
        let crop = roi(&f, Some("x"));
        let mut store = MemoryStore::in_memory();
        assert!(matches!(
            store.create(draft(&f, &crop, "  "), &MockBackend),
            Err(MemoryError::EmptyUserContext)
        ));
        let bare = roi(&f, None);
        assert!(matches!(
            store.create(draft(&f, &bare, "ctx"), &MockBackend),
            Err(MemoryError::MissingCaption(_))
        ));
        let mut d = draft(&f, &crop, "ctx");
        d.scene_caption = None;
        assert!(matches!(
            store.create(d, &MockBackend),
            Err(MemoryError::MissingCaption("scene"))
        ));
    }

    #[test]
    fn identical_creates_get_distinct_ids() {
        let f = scene();
        let crop = roi(&f, Some("A man"));
        let mut store = MemoryStore::in_memory();
        let a = store.create(draft(&f, &crop, "New engineer"), &MockBackend).unwrap();
        let b = store.create(draft(&f, &crop, "New engineer"), &MockBackend).unwrap();
        assert_ne!(a.record_id, b.record_id);
        assert_eq!(
            MemoryRecord {
                record_id: String::new(),
                ..a
            },
            MemoryRecord {
                record_id: String::new(),
                ..b
            }
        );
    }

    #[test]
    fn retrieval_scores_and_errors() {
        let f = scene();
        let crop = roi(&f, Some("A man wearing a yellow t-shirt"));
        let mut store = MemoryStore::in_memory();
        store
            .create(draft(&f, &crop, "New engineer in the lab"), &MockBackend)
            .unwrap();
        let hits = retrieve("the new engineer I met", &store).unwrap();
        assert_eq!(hits.len(), 1);
        assert!((hits[0].score - 2.0 / 5.0).abs() < 1e-12);
        assert!(retrieve("quantum bicycle", &store).unwrap().is_empty());
        assert!(matches!(retrieve(" ,. ", &store), Err(MemoryError::EmptyQuery)));
    }

    #[test]
    fn file_store_appends_and_reloads() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("memory.jsonl");
        let f = scene();
        let crop = roi(&f, Some("A man"));
        let mut store = MemoryStore::open(&path).unwrap();
        store.create(draft(&f, &crop, "New engineer"), &MockBackend).unwrap();
        store.create(draft(&f, &crop, "Second visit"), &MockBackend).unwrap();
        let mut reopened = MemoryStore::open(&path).unwrap();
        assert_eq!(reopened.records(), store.records());
        let r = reopened.create(draft(&f, &crop, "Third"), &MockBackend).unwrap();
        assert_eq!(r.record_id, "mem-000003");
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("memory.jsonl");
        let f = scene();
        let crop = roi(&f, Some("A man"));
        let mut store = MemoryStore::open(&path).unwrap();
        store.create(draft(&f, &crop, "one"), &MockBackend).unwrap();
        store.create(draft(&f, &crop, "two"), &MockBackend).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, &text[..text.len() - 20]).unwrap();
        match MemoryStore::load(&path) {
            Err(MemoryError::CorruptStore { index, .. }) => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
    }
}
