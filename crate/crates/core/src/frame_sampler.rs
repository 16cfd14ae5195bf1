//! Frame selection within a segment and temporal concatenation of frame
//! features.

use std::collections::HashMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dataset::{EmbeddingTable, FrameSlot, SegmentRecord};
use crate::error::{Error, Result};

/// Three consecutive 0-based frame indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameTriple(pub [u32; 3]);

impl FrameTriple {
    pub fn indices(&self) -> [u32; 3] {
        self.0
    }
}

/// The frames around the middle of an `frame_count`-frame segment:
/// `(m-1, m, m+1)` with `m = floor(N/2)`, shifted down to `(N-3, N-2, N-1)`
/// if `m + 1` would fall off the end.
pub fn middle_frame_indices(frame_count: u32) -> Result<FrameTriple> {
    if frame_count < 3 {
        return Err(Error::Domain(format!(
            "middle-frame sampling needs at least 3 frames, got {frame_count}"
        )));
    }
    let m = frame_count / 2;
    let start = if m + 1 >= frame_count {
        frame_count - 3
    } else {
        m - 1
    };
    Ok(FrameTriple([start, start + 1, start + 2]))
}

/// `k` evenly spaced indices spanning the whole segment,
/// `round(j * (N-1) / (k-1))` with ties to even; `k = 1` picks `floor(N/2)`.
pub fn uniform_sample_indices(frame_count: u32, k: u32) -> Result<Vec<u32>> {
    if k == 0 {
        return Err(Error::Domain("uniform sampling needs k >= 1".into()));
    }
    if k > frame_count {
        return Err(Error::Domain(format!(
            "cannot sample {k} distinct frames from {frame_count}"
        )));
    }
    if k == 1 {
        return Ok(vec![frame_count / 2]);
    }
    let span = u64::from(frame_count - 1);
    let denom = u64::from(k - 1);
    let mut out: Vec<u32> = (0..u64::from(k))
        .map(|j| round_ratio_ties_even(j * span, denom) as u32)
        .collect();
    out.dedup();
    Ok(out)
}

fn round_ratio_ties_even(num: u64, denom: u64) -> u64 {
    let q = num / denom;
    let r = num % denom;
    match (2 * r).cmp(&denom) {
        std::cmp::Ordering::Less => q,
        std::cmp::Ordering::Greater => q + 1,
        std::cmp::Ordering::Equal => q + (q & 1),
    }
}

/// Concatenation of per-frame feature vectors in temporal order.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalFeature {
    frame_dim: usize,
    values: Vec<f32>,
}

impl TemporalFeature {
    pub fn frame_dim(&self) -> usize {
        self.frame_dim
    }

    pub fn frames(&self) -> usize {
        self.values.len() / self.frame_dim
    }

    /// The `i`-th frame's slice of the concatenation.
    pub fn slot(&self, i: usize) -> &[f32] {
        &self.values[i * self.frame_dim..(i + 1) * self.frame_dim]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.values
    }
}

pub fn temporal_concat(frames: &[&[f32]]) -> Result<TemporalFeature> {
    let first = frames
        .first()
        .ok_or_else(|| Error::Domain("temporal_concat needs at least one frame".into()))?;
    let frame_dim = first.len();
    if frame_dim == 0 {
        return Err(Error::Shape("frame 0 has dimension 0".into()));
    }
    for (i, f) in frames.iter().enumerate() {
        if f.len() != frame_dim {
            return Err(Error::Shape(format!(
                "frame {i} has dimension {}, expected {frame_dim}",
                f.len()
            )));
        }
    }
    Ok(TemporalFeature {
        frame_dim,
        values: frames.concat(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SamplingStrategy {
    #[default]
    Middle,
    Uniform { k: u32 },
}

impl SamplingStrategy {
    pub fn indices(&self, frame_count: u32) -> Result<Vec<u32>> {
        match *self {
            SamplingStrategy::Middle => Ok(middle_frame_indices(frame_count)?.0.to_vec()),
            SamplingStrategy::Uniform { k } => uniform_sample_indices(frame_count, k),
        }
    }
}

/// Looks up frame rows of an embedding table by `(video, segment, frame)`.
pub struct FrameLookup<'a> {
    table: &'a EmbeddingTable,
    rows: HashMap<(&'a str, &'a str, u32), usize>,
}

impl<'a> FrameLookup<'a> {
    pub fn new(table: &'a EmbeddingTable) -> Self {
        let rows = table
            .index()
            .iter()
            .enumerate()
            .filter_map(|(row, desc)| match desc.frame_index {
                FrameSlot::Frame(f) => Some(((desc.video_id.as_str(), desc.segment_id.as_str(), f), row)),
                FrameSlot::Text => None,
            })
            .collect();
        Self { table, rows }
    }

    /// Sampled frame features of one segment as a `T x d` matrix, in
    /// temporal order.
    pub fn segment_frames(
        &self,
        segment: &SegmentRecord,
        strategy: SamplingStrategy,
    ) -> Result<Array2<f64>> {
        let indices = strategy.indices(segment.frame_count)?;
        let d = self.table.dim();
        let mut out = Array2::zeros((indices.len(), d));
        for (t, &f) in indices.iter().enumerate() {
            let row = self
                .rows
                .get(&(segment.video_id.as_str(), segment.segment_id.as_str(), f))
                .ok_or_else(|| {
                    Error::Validation(format!(
                        "no embedding for frame {f} of segment {}/{}",
                        segment.video_id, segment.segment_id
                    ))
                })?;
            out.row_mut(t)
                .assign(&self.table.row(*row).mapv(f64::from));
        }
        Ok(out)
    }

    /// Concatenated sampled frames of one segment.
    pub fn temporal_feature(
        &self,
        segment: &SegmentRecord,
        strategy: SamplingStrategy,
    ) -> Result<TemporalFeature> {
        let frames = self.segment_frames(segment, strategy)?;
        let frame_dim = frames.ncols();
        Ok(TemporalFeature {
            frame_dim,
            values: frames.iter().map(|&v| v as f32).collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn middle_triples() {
        assert_eq!(middle_frame_indices(10).unwrap().0, [4, 5, 6]);
        assert_eq!(middle_frame_indices(3).unwrap().0, [0, 1, 2]);
        assert_eq!(middle_frame_indices(7).unwrap().0, [2, 3, 4]);
        assert_eq!(middle_frame_indices(4).unwrap().0, [1, 2, 3]);
        assert!(middle_frame_indices(2).is_err());
        assert!(middle_frame_indices(0).is_err());
    }

    #[test]
    fn uniform_samples() {
        assert_eq!(uniform_sample_indices(10, 3).unwrap(), vec![0, 4, 9]);
        assert_eq!(uniform_sample_indices(5, 5).unwrap(), vec![0, 1, 2, 3, 4]);
        assert_eq!(uniform_sample_indices(9, 1).unwrap(), vec![4]);
        assert!(uniform_sample_indices(3, 4).is_err());
        assert!(uniform_sample_indices(3, 0).is_err());
    }

    #[test]
    fn concat_small_cases() {
        let f = temporal_concat(&[&[1.0], &[2.0], &[3.0]]).unwrap();
        assert_eq!(f.as_slice(), &[1.0, 2.0, 3.0]);
        let g = temporal_concat(&[&[3.0], &[2.0], &[1.0]]).unwrap();
        assert_ne!(f, g);
        let zeros = [0.0f32; 4];
        let z = temporal_concat(&[&zeros, &zeros, &zeros]).unwrap();
        assert_eq!(z.as_slice(), &[0.0; 12]);
    }

    #[test]
    fn concat_dimension_mismatch_names_the_frame() {
        let err = temporal_concat(&[&[1.0, 2.0], &[1.0, 2.0], &[1.0]]).unwrap_err();
        assert!(err.to_string().contains("frame 2"), "{err}");
    }

    proptest! {
        #[test]
        fn middle_triple_is_in_range_and_centered(n in 3u32..100_000) {
            let [a, b, c] = middle_frame_indices(n).unwrap().0;
            prop_assert!(c < n);
            prop_assert_eq!(b, a + 1);
            prop_assert_eq!(c, b + 1);
            prop_assert!(a <= n / 2 && n / 2 <= c);
        }

        #[test]
        fn uniform_covers_both_ends(n in 2u32..500, k in 2u32..40) {
            prop_assume!(k <= n);
            let idx = uniform_sample_indices(n, k).unwrap();
            prop_assert_eq!(idx.len(), k as usize);
            prop_assert_eq!(idx[0], 0);
            prop_assert_eq!(*idx.last().unwrap(), n - 1);
            prop_assert!(idx.windows(2).all(|w| w[0] < w[1]));
        }

        #[test]
        fn middle_slot_is_recoverable(
            frames in proptest::collection::vec(proptest::collection::vec(-1e3f32..1e3, 5), 3)
        ) {
            let f = temporal_concat(&[&frames[0], &frames[1], &frames[2]]).unwrap();
            prop_assert_eq!(f.slot(1), frames[1].as_slice());
            prop_assert_eq!(f.frames(), 3);
        }
    }
}
