//! Trains each head on a synthetic corpus, evaluates Top-1/Top-3 concept
//! retrieval on held-out videos and round-trips the checkpoint.

use semaug::contrastive_trainer::{train, TrainConfig};
use semaug::corpus::PairedSegments;
use semaug::dataset::{split_dataset, SplitSpec};
use semaug::evaluation::evaluate_concepts;
use semaug::frame_sampler::SamplingStrategy;
use semaug::resampler_head::{read_checkpoint, write_checkpoint, HeadMode};
use semaug::synth::{generate, SynthConfig};

fn main() -> semaug::Result<()> {
    let corpus = generate(&SynthConfig::default())?;
    let split = split_dataset(&corpus.segments, &SplitSpec::default())?;
    let all = PairedSegments::build(&corpus.segments, &corpus.frames, &corpus.texts, SamplingStrategy::Middle)?;
    let (train_set, val_set, test_set) = (
        all.restrict_to_videos(&split.train),
        all.restrict_to_videos(&split.val),
        all.restrict_to_videos(&split.test),
    );

    let dir = tempfile::tempdir().expect("temp dir");
    for head_mode in [HeadMode::FrozenMean, HeadMode::LearnablePool, HeadMode::Perceiver] {
        let config = TrainConfig {
            epochs: 60,
            head_mode,
            ..TrainConfig::default()
        };
        let (model, report) = train(&train_set, Some(&val_set), &config)?;
        let eval = evaluate_concepts(&model, &test_set)?;
        println!(
            "{head_mode:?}: loss {:.3} -> {:.3}, test top1 {:.3} top3 {:.3}",
            report.epochs[0].loss,
            report.final_loss(),
            eval.result.top1,
            eval.result.top3
        );

        let path = dir.path().join("model.srck");
        write_checkpoint(&path, &model, config.seed, report.steps)?;
        let (restored, header) = read_checkpoint(&path)?;
        let again = evaluate_concepts(&restored, &test_set)?;
        println!("  restored from step {}: top1 {:.3}", header.step, again.result.top1);
    }
    Ok(())
}
