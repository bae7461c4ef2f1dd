use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiouEntry {
    pub caption: String,
    pub frame_id: u64,
    pub timestamp_ms: u64,
}

/// Last-In-Only-Used caption register.
///
/// Only the newest caption is ever consumed. Overwriting a caption that was
/// never read counts as a drop.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LiouStack {
    top: Option<LiouEntry>,
    top_read: bool,
    dropped_count: u64,
    pushes: u64,
    fresh_reads: u64,
}

impl LiouStack {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, caption: impl Into<String>, frame_id: u64, timestamp_ms: u64) {
        if let Some(prev) = &self.top {
            debug_assert!(timestamp_ms >= prev.timestamp_ms, "LIOU push out of order");
            if !self.top_read {
                self.dropped_count += 1;
            }
        }
        self.top = Some(LiouEntry {
            caption: caption.into(),
            frame_id,
            timestamp_ms,
        });
        self.top_read = false;
        self.pushes += 1;
    }

    /// Returns the newest caption and marks it consumed.
    pub fn read(&mut self) -> Option<&LiouEntry> {
        if self.top.is_some() && !self.top_read {
            self.top_read = true;
            self.fresh_reads += 1;
        }
        self.top.as_ref()
    }

    pub fn peek(&self) -> Option<&LiouEntry> {
        self.top.as_ref()
    }

    pub fn dropped_count(&self) -> u64 {
        self.dropped_count
    }

    pub fn pushes(&self) -> u64 {
        self.pushes
    }

    pub fn fresh_reads(&self) -> u64 {
        self.fresh_reads
    }

    /// True when the top holds a caption nobody has read yet.
    pub fn has_unread(&self) -> bool {
        self.top.is_some() && !self.top_read
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_push_read() {
        let mut s = LiouStack::new();
        s.push("c1", 1, 0);
        assert_eq!(s.read().unwrap().caption, "c1");
        assert_eq!(s.dropped_count(), 0);
    }

    #[test]
    fn unread_pushes_are_dropped() {
        let mut s = LiouStack::new();
        s.push("c1", 1, 0);
        s.push("c2", 2, 10);
        s.push("c3", 3, 20);
        assert_eq!(s.read().unwrap().caption, "c3");
        assert_eq!(s.dropped_count(), 2);
    }

    #[test]
    fn rereading_is_not_fresh() {
        let mut s = LiouStack::new();
        assert!(s.read().is_none());
        s.push("c1", 1, 0);
        s.read();
        s.read();
        assert_eq!(s.fresh_reads(), 1);
        s.push("c2", 2, 5);
        assert_eq!(s.dropped_count(), 0);
        assert!(s.has_unread());
    }
}
