//! Workloads shared by the benchmarks.

use hux_core::{MemoryMeta, MemoryRecord, MemoryStore};

const WORDS: [&str; 12] = [
    "engineer", "lab", "yellow", "shirt", "robot", "cup", "desk", "new", "red", "mug", "office", "door",
];

/// A store of `n` records with a few two-word keywords each.
pub fn keyword_store(n: usize) -> MemoryStore {
    let records = (0..n)
        .map(|i| MemoryRecord {
            record_id: format!("mem-{:06}", i + 1),
            ooi_caption: String::new(),
            scene_caption: String::new(),
            object_type: "Object".into(),
            name: None,
            user_context: "bench".into(),
            scene_image_path: String::new(),
            ooi_image_path: String::new(),
            meta: MemoryMeta::default(),
            keywords: (0..6)
                .map(|k| {
                    format!(
                        "{} {}",
                        WORDS[(i * 7 + k) % WORDS.len()],
                        WORDS[(i + k * 5) % WORDS.len()]
                    )
                })
                .collect(),
        })
        .collect();
    MemoryStore::from_records(records)
}
