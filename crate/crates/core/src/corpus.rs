//! Segment-aligned training and evaluation inputs assembled from a manifest
//! and the frame/text embedding tables.

use std::collections::{HashMap, HashSet};

use ndarray::Array2;

use crate::dataset::{EmbeddingTable, FrameSlot, SegmentRecord};
use crate::error::{Error, Result};
use crate::frame_sampler::{FrameLookup, SamplingStrategy};

/// Segments with their sampled frame sequences and annotation embeddings.
#[derive(Debug, Clone)]
pub struct PairedSegments {
    pub segments: Vec<SegmentRecord>,
    /// `T x d` sampled frames per segment, temporal order.
    pub frames: Vec<Array2<f64>>,
    /// `1 x d_text` annotation embedding per segment.
    pub texts: Vec<Array2<f64>>,
}

impl PairedSegments {
    /// Builds pairs for every segment in `segments`, in the given order.
    pub fn build(
        segments: &[SegmentRecord],
        frame_table: &EmbeddingTable,
        text_table: &EmbeddingTable,
        strategy: SamplingStrategy,
    ) -> Result<Self> {
        let lookup = FrameLookup::new(frame_table);
        let text_rows: HashMap<(&str, &str), usize> = text_table
            .index()
            .iter()
            .enumerate()
            .filter(|(_, d)| d.frame_index == FrameSlot::Text)
            .map(|(i, d)| ((d.video_id.as_str(), d.segment_id.as_str()), i))
            .collect();

        let mut frames = Vec::with_capacity(segments.len());
        let mut texts = Vec::with_capacity(segments.len());
        for seg in segments {
            frames.push(lookup.segment_frames(seg, strategy)?);
            let row = text_rows
                .get(&(seg.video_id.as_str(), seg.segment_id.as_str()))
                .ok_or_else(|| {
                    Error::Validation(format!(
                        "no annotation embedding for segment {}/{}",
                        seg.video_id, seg.segment_id
                    ))
                })?;
            let text = text_table.row(*row).mapv(f64::from);
            texts.push(text.insert_axis(ndarray::Axis(0)));
        }
        Ok(Self {
            segments: segments.to_vec(),
            frames,
            texts,
        })
    }

    /// Segments whose video is in `videos`, keeping manifest order.
    pub fn restrict_to_videos(&self, videos: &[String]) -> Self {
        let keep: HashSet<&str> = videos.iter().map(String::as_str).collect();
        let idx: Vec<usize> = (0..self.len())
            .filter(|&i| keep.contains(self.segments[i].video_id.as_str()))
            .collect();
        self.select(&idx)
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            segments: idx.iter().map(|&i| self.segments[i].clone()).collect(),
            frames: idx.iter().map(|&i| self.frames[i].clone()).collect(),
            texts: idx.iter().map(|&i| self.texts[i].clone()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn frame_dim(&self) -> Option<usize> {
        self.frames.first().map(|f| f.ncols())
    }

    pub fn text_dim(&self) -> Option<usize> {
        self.texts.first().map(|t| t.ncols())
    }

    /// Concatenated sampled frames, one row per segment; the clustering input.
    pub fn temporal_features(&self) -> Result<Array2<f64>> {
        let width = self.frames.first().map_or(0, |f| f.len());
        let mut out = Array2::zeros((self.len(), width));
        for (i, f) in self.frames.iter().enumerate() {
            if f.len() != width {
                return Err(Error::Shape(format!(
                    "segment {i} has {} sampled values, expected {width}",
                    f.len()
                )));
            }
            out.row_mut(i)
                .assign(&ndarray::ArrayView1::from(f.as_slice().expect("standard layout")));
        }
        Ok(out)
    }

    /// Distinct annotations in first-seen order, the text embedding of the
    /// first segment carrying each, and every segment's annotation index.
    pub fn candidate_pool(&self) -> CandidatePool {
        let mut position: HashMap<&str, usize> = HashMap::new();
        let mut annotations = Vec::new();
        let mut first_segment = Vec::new();
        let truth = self
            .segments
            .iter()
            .enumerate()
            .map(|(i, s)| {
                *position.entry(s.annotation.as_str()).or_insert_with(|| {
                    annotations.push(s.annotation.clone());
                    first_segment.push(i);
                    annotations.len() - 1
                })
            })
            .collect();
        CandidatePool {
            annotations,
            first_segment,
            truth,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidatePool {
    pub annotations: Vec<String>,
    /// Segment whose text embedding represents each annotation.
    pub first_segment: Vec<usize>,
    /// Candidate index of every segment's own annotation.
    pub truth: Vec<usize>,
}
