//! Summarizer inputs: predicted segment concepts joined with the transcript.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::dataset::{SegmentRecord, VideoTranscript};
use crate::error::{Error, Result};

/// Version of the prompt template below.
pub const TEMPLATE_VERSION: u32 = 1;
const CONCEPTS_PREFIX: &str = "Concepts: ";
const CONCEPT_SEPARATOR: &str = "; ";
const TRANSCRIPT_PREFIX: &str = "\nTranscript: ";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedInput {
    pub video_id: String,
    /// Concepts in segment start order.
    pub concepts: Vec<String>,
    pub transcript: String,
    pub rendered: String,
}

/// A predicted concept tagged with the start time of its segment.
#[derive(Debug, Clone, PartialEq)]
pub struct TimedConcept {
    pub start_sec: f64,
    pub text: String,
}

/// Renders `Concepts: c1; c2\nTranscript: ...`, or the bare transcript when
/// `include_concepts` is false.
pub fn assemble_augmented_input(
    video_id: &str,
    concepts: &[TimedConcept],
    transcript: &str,
    include_concepts: bool,
) -> Result<AugmentedInput> {
    if transcript.trim().is_empty() {
        return Err(Error::Domain(format!("video {video_id} has an empty transcript")));
    }
    let mut ordered: Vec<&TimedConcept> = concepts.iter().collect();
    ordered.sort_by(|a, b| a.start_sec.total_cmp(&b.start_sec));
    let concepts: Vec<String> = ordered.into_iter().map(|c| c.text.clone()).collect();

    let rendered = if include_concepts {
        if concepts.is_empty() {
            log::warn!("video {video_id}: no concepts to prepend");
        }
        format!(
            "{CONCEPTS_PREFIX}{}{TRANSCRIPT_PREFIX}{transcript}",
            concepts.join(CONCEPT_SEPARATOR)
        )
    } else {
        transcript.to_string()
    };
    Ok(AugmentedInput {
        video_id: video_id.to_string(),
        concepts,
        transcript: transcript.to_string(),
        rendered,
    })
}

/// `{"video_id","prompt"}` line handed to an external summarizer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub video_id: String,
    pub prompt: String,
}

/// `{"video_id","summary"}` line returned by a summarizer, or a reference.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub video_id: String,
    pub summary: String,
}

/// `{"video_id","segment_id","concept"}` line: the Top-1 annotation
/// retrieved for a segment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptPrediction {
    pub video_id: String,
    pub segment_id: String,
    pub concept: String,
}

/// One prompt per video that has predictions, in order of first appearance
/// in `segments`.
pub fn build_prompts(
    segments: &[SegmentRecord],
    predictions: &[ConceptPrediction],
    transcripts: &[VideoTranscript],
    include_concepts: bool,
) -> Result<Vec<AugmentedInput>> {
    let starts: HashMap<(&str, &str), f64> = segments
        .iter()
        .map(|s| ((s.video_id.as_str(), s.segment_id.as_str()), s.start_sec))
        .collect();
    let transcripts: HashMap<&str, &str> = transcripts
        .iter()
        .map(|t| (t.video_id.as_str(), t.transcript.as_str()))
        .collect();

    let mut per_video: BTreeMap<usize, (&str, Vec<TimedConcept>)> = BTreeMap::new();
    let first_seen: HashMap<&str, usize> = segments
        .iter()
        .enumerate()
        .rev()
        .map(|(i, s)| (s.video_id.as_str(), i))
        .collect();
    for p in predictions {
        let start = starts
            .get(&(p.video_id.as_str(), p.segment_id.as_str()))
            .ok_or_else(|| {
                Error::Validation(format!(
                    "prediction for unknown segment {}/{}",
                    p.video_id, p.segment_id
                ))
            })?;
        let order = first_seen[p.video_id.as_str()];
        per_video
            .entry(order)
            .or_insert_with(|| (p.video_id.as_str(), Vec::new()))
            .1
            .push(TimedConcept {
                start_sec: *start,
                text: p.concept.clone(),
            });
    }

    per_video
        .into_values()
        .map(|(video, concepts)| {
            let transcript = transcripts
                .get(video)
                .ok_or_else(|| Error::Validation(format!("no transcript for video {video}")))?;
            assemble_augmented_input(video, &concepts, transcript, include_concepts)
        })
        .collect()
}

/// Per-video reference built from the gold annotations in start order.
pub fn gold_references(segments: &[SegmentRecord]) -> Vec<SummaryRecord> {
    let mut order = Vec::new();
    let mut grouped: HashMap<&str, Vec<&SegmentRecord>> = HashMap::new();
    for s in segments {
        grouped
            .entry(s.video_id.as_str())
            .or_insert_with(|| {
                order.push(s.video_id.as_str());
                Vec::new()
            })
            .push(s);
    }
    order
        .into_iter()
        .map(|video| {
            let mut segs = grouped.remove(video).unwrap();
            segs.sort_by(|a, b| a.start_sec.total_cmp(&b.start_sec));
            SummaryRecord {
                video_id: video.to_string(),
                summary: segs
                    .iter()
                    .map(|s| s.annotation.as_str())
                    .collect::<Vec<_>>()
                    .join(". "),
            }
        })
        .collect()
}
