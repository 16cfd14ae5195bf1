//! Clusters the temporal features of a synthetic corpus and compares
//! cluster-diverse batches with random ones.

use semaug::contrastive_trainer::plan_diversity;
use semaug::corpus::PairedSegments;
use semaug::diversity_batcher::{build_diverse_batches, build_random_batches, kmeans_fit, KMeansConfig};
use semaug::frame_sampler::SamplingStrategy;
use semaug::synth::{generate, SynthConfig};

fn main() -> semaug::Result<()> {
    let corpus = generate(&SynthConfig::default())?;
    let paired = PairedSegments::build(&corpus.segments, &corpus.frames, &corpus.texts, SamplingStrategy::Middle)?;
    let features = paired.temporal_features()?;

    let model = kmeans_fit(features.view(), &KMeansConfig::new(10, 0).with_restarts(10))?;
    println!("cluster sizes {:?}", model.cluster_sizes());
    println!("inertia per iteration {:?}", model.inertia_history);

    let diverse = build_diverse_batches(&model, 16, 1)?;
    let random = build_random_batches(paired.len(), 16, 1)?;
    println!("first diverse batch clusters {:?}", diverse.batches[0].clusters);
    println!(
        "mean pairwise distance: diverse {:.4}, random {:.4}",
        plan_diversity(&diverse, features.view()).unwrap_or(0.0),
        plan_diversity(&random, features.view()).unwrap_or(0.0)
    );
    Ok(())
}
