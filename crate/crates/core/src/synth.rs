//! Synthetic corpus: concept vectors plus Gaussian noise.
//!
//! Each concept `c` has a unit-norm direction `mu_c` in `dim` dimensions
//! (standard normal, normalized). Every frame of a segment showing concept
//! `c` is `mu_c + N(0, frame_noise^2 I)`. Each concept has one annotation
//! sentence whose embedding, `mu_c + N(0, text_noise^2 I)`, is drawn once
//! and shared by all its segments. Segments are shuffled into videos of
//! `segments_per_video`.

use std::path::Path;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{write_embedding_table, write_jsonl, EmbeddingTable, RowDescriptor, SegmentRecord, VideoTranscript};
use crate::error::{Error, Result};
use crate::prompt_assembler::{gold_references, SummaryRecord};

const STEPS: &[&str] = &[
    "melt the butter in a pan",
    "chop the onions finely",
    "add garlic and stir",
    "pour in the beaten eggs",
    "season with salt and pepper",
    "boil the pasta in salted water",
    "slice the tomatoes into rounds",
    "fry the bacon until crisp",
    "whisk flour into the milk",
    "sprinkle cheese on top",
    "knead the dough on a floured board",
    "grill the chicken for five minutes",
    "toss the salad with dressing",
    "simmer the sauce until thick",
    "garnish with fresh parsley",
    "bake in the oven until golden",
];

const FILLER: &[&str] = &[
    "okay so now",
    "next we are going to",
    "alright guys",
    "make sure you",
    "and then just",
    "now what I like to do is",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub concepts: usize,
    pub dim: usize,
    pub segments_per_concept: usize,
    pub segments_per_video: usize,
    pub frame_noise: f64,
    pub text_noise: f64,
    pub min_frames: u32,
    pub max_frames: u32,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            concepts: 10,
            dim: 32,
            segments_per_concept: 40,
            segments_per_video: 5,
            frame_noise: 0.3,
            text_noise: 0.3,
            min_frames: 6,
            max_frames: 24,
            seed: 0,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.concepts == 0 || self.dim == 0 || self.segments_per_concept == 0 || self.segments_per_video == 0 {
            return Err(Error::Validation("synthetic corpus sizes must be positive".into()));
        }
        if self.min_frames < 3 || self.max_frames < self.min_frames {
            return Err(Error::Validation(format!(
                "frame range {}..={} must start at 3 or more",
                self.min_frames, self.max_frames
            )));
        }
        if !(self.frame_noise >= 0.0 && self.text_noise >= 0.0) {
            return Err(Error::Validation("noise levels must be non-negative".into()));
        }
        Ok(())
    }
}

pub fn concept_annotation(c: usize) -> String {
    let step = STEPS[c % STEPS.len()];
    match c / STEPS.len() {
        0 => step.to_string(),
        round => format!("{step} batch {round}"),
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub segments: Vec<SegmentRecord>,
    /// Ground-truth concept per segment.
    pub concept_of: Vec<usize>,
    pub transcripts: Vec<VideoTranscript>,
    /// Every frame of every segment, manifest order then frame order.
    pub frames: EmbeddingTable,
    /// One annotation embedding per segment.
    pub texts: EmbeddingTable,
    pub references: Vec<SummaryRecord>,
}

pub fn generate(config: &SynthConfig) -> Result<SynthCorpus> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let d = config.dim;

    let concepts: Vec<Array1<f64>> = (0..config.concepts)
        .map(|_| {
            let v: Array1<f64> = Array1::from_shape_simple_fn(d, || StandardNormal.sample(&mut rng));
            let norm = v.dot(&v).sqrt();
            v / norm
        })
        .collect();
    let text_noise = Normal::new(0.0, config.text_noise).map_err(|e| Error::Validation(e.to_string()))?;
    let frame_noise = Normal::new(0.0, config.frame_noise).map_err(|e| Error::Validation(e.to_string()))?;
    let text_embeddings: Vec<Array1<f64>> = concepts
        .iter()
        .map(|mu| mu + &Array1::from_shape_simple_fn(d, || text_noise.sample(&mut rng)))
        .collect();

    let mut labels: Vec<usize> = (0..config.concepts)
        .flat_map(|c| std::iter::repeat_n(c, config.segments_per_concept))
        .collect();
    labels.shuffle(&mut rng);

    let mut segments = Vec::with_capacity(labels.len());
    let mut frame_rows = Vec::new();
    let mut frame_index = Vec::new();
    let mut text_rows = Vec::with_capacity(labels.len());
    let mut text_index = Vec::with_capacity(labels.len());
    let mut transcripts = Vec::new();

    for (v, chunk) in labels.chunks(config.segments_per_video).enumerate() {
        let video_id = format!("synth{v:04}");
        let mut clock = rng.random_range(0.0..5.0);
        let mut transcript = Vec::new();
        for (s, &c) in chunk.iter().enumerate() {
            let segment_id = format!("{s:02}");
            let frame_count = rng.random_range(config.min_frames..=config.max_frames);
            let duration = f64::from(frame_count) / 2.0;
            segments.push(SegmentRecord {
                video_id: video_id.clone(),
                segment_id: segment_id.clone(),
                start_sec: round3(clock),
                end_sec: round3(clock + duration),
                annotation: concept_annotation(c),
                frame_count,
            });
            clock += duration + rng.random_range(0.5..3.0);
            for f in 0..frame_count {
                let row = &concepts[c] + &Array1::from_shape_simple_fn(d, || frame_noise.sample(&mut rng));
                frame_rows.extend(row.iter().map(|&x| x as f32));
                frame_index.push(RowDescriptor::frame(video_id.as_str(), segment_id.as_str(), f));
            }
            text_rows.extend(text_embeddings[c].iter().map(|&x| x as f32));
            text_index.push(RowDescriptor::text(video_id.as_str(), segment_id.as_str()));
            transcript.push(format!(
                "{} {}",
                FILLER[rng.random_range(0..FILLER.len())],
                concept_annotation(c)
            ));
        }
        transcripts.push(VideoTranscript {
            video_id,
            transcript: transcript.join(" "),
        });
    }

    let frames = EmbeddingTable::new(
        Array2::from_shape_vec((frame_index.len(), d), frame_rows).expect("row-major frames"),
        frame_index,
    )?;
    let texts = EmbeddingTable::new(
        Array2::from_shape_vec((text_index.len(), d), text_rows).expect("row-major texts"),
        text_index,
    )?;
    let references = gold_references(&segments);
    Ok(SynthCorpus {
        segments,
        concept_of: labels,
        transcripts,
        frames,
        texts,
        references,
    })
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

/// File names written by [`SynthCorpus::write_to`].
pub mod files {
    pub const MANIFEST: &str = "manifest.jsonl";
    pub const TRANSCRIPTS: &str = "transcripts.jsonl";
    pub const FRAMES: &str = "frames.semb";
    pub const TEXTS: &str = "texts.semb";
    pub const REFERENCES: &str = "references.jsonl";
}

impl SynthCorpus {
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_jsonl(&dir.join(files::MANIFEST), &self.segments)?;
        write_jsonl(&dir.join(files::TRANSCRIPTS), &self.transcripts)?;
        write_embedding_table(&self.frames, dir.join(files::FRAMES))?;
        write_embedding_table(&self.texts, dir.join(files::TEXTS))?;
        write_jsonl(&dir.join(files::REFERENCES), &self.references)
    }
}
