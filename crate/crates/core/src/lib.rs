//! Concept retrieval from frozen video-segment embeddings.
//!
//! The pipeline samples the middle frames of each annotated segment,
//! clusters their concatenated features to build diverse training batches,
//! trains small attention heads with a symmetric contrastive loss against
//! annotation embeddings, and evaluates Top-k concept retrieval. Predicted
//! concepts are then joined with video transcripts into summarizer prompts,
//! and generated summaries are scored with ROUGE-1/2/L.

pub mod cli;
pub mod contrastive_trainer;
pub mod corpus;
pub mod dataset;
pub mod diversity_batcher;
pub mod error;
pub mod evaluation;
pub mod frame_sampler;
pub mod prompt_assembler;
pub mod resampler_head;
pub mod synth;

pub use error::{Error, Result};
