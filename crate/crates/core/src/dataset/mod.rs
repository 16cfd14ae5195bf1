//! Segment manifests, transcripts, video-level splits and the binary
//! embedding table format.

mod embedding;
mod jsonl;
mod split;

pub use embedding::{
    index_path, read_embedding_table, write_embedding_table, EmbeddingTable, FrameSlot,
    RowDescriptor, EMBEDDING_MAGIC, EMBEDDING_VERSION,
};
pub use jsonl::{read_jsonl, write_jsonl};
pub use split::{split_dataset, DatasetSplit, SplitSpec, SplitSubset};

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One annotated video segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub video_id: String,
    pub segment_id: String,
    pub start_sec: f64,
    pub end_sec: f64,
    pub annotation: String,
    pub frame_count: u32,
}

impl SegmentRecord {
    pub fn validate(&self) -> Result<()> {
        let name = format!("{}/{}", self.video_id, self.segment_id);
        if !(self.start_sec.is_finite() && self.start_sec >= 0.0) {
            return Err(Error::Validation(format!(
                "segment {name}: start_sec must be a non-negative number, got {}",
                self.start_sec
            )));
        }
        if !(self.end_sec.is_finite() && self.end_sec > self.start_sec) {
            return Err(Error::Validation(format!(
                "segment {name}: end_sec {} must exceed start_sec {}",
                self.end_sec, self.start_sec
            )));
        }
        if self.frame_count < 3 {
            return Err(Error::Validation(format!(
                "segment {name}: frame_count {} is below the minimum of 3",
                self.frame_count
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoTranscript {
    pub video_id: String,
    pub transcript: String,
}

/// Reads a JSON Lines segment manifest, validating every record and the
/// uniqueness of `(video_id, segment_id)`.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<SegmentRecord>> {
    let records: Vec<SegmentRecord> = read_jsonl(path.as_ref())?;
    validate_manifest(&records)?;
    Ok(records)
}

pub fn validate_manifest(records: &[SegmentRecord]) -> Result<()> {
    let mut seen = HashSet::with_capacity(records.len());
    for record in records {
        record.validate()?;
        if !seen.insert((record.video_id.as_str(), record.segment_id.as_str())) {
            return Err(Error::Validation(format!(
                "duplicate segment {}/{}",
                record.video_id, record.segment_id
            )));
        }
    }
    Ok(())
}

pub fn load_transcripts(path: impl AsRef<Path>) -> Result<Vec<VideoTranscript>> {
    let transcripts: Vec<VideoTranscript> = read_jsonl(path.as_ref())?;
    let mut seen = HashSet::with_capacity(transcripts.len());
    for t in &transcripts {
        if !seen.insert(t.video_id.as_str()) {
            return Err(Error::Validation(format!(
                "duplicate transcript for video {}",
                t.video_id
            )));
        }
    }
    Ok(transcripts)
}
