//! Splits a synthetic manifest by video and shows that no video straddles
//! two subsets.

use std::collections::HashSet;

use semaug::dataset::{split_dataset, SplitSpec};
use semaug::synth::{generate, SynthConfig};

fn main() -> semaug::Result<()> {
    let corpus = generate(&SynthConfig::default())?;
    for seed in [7, 8] {
        let split = split_dataset(&corpus.segments, &SplitSpec { seed, ..SplitSpec::default() })?;
        println!("seed {seed}: {:?} videos, first test videos {:?}", split.sizes(), &split.test[..3]);
        let train: HashSet<_> = split.train.iter().collect();
        assert!(split.val.iter().chain(&split.test).all(|v| !train.contains(v)));
    }
    Ok(())
}
