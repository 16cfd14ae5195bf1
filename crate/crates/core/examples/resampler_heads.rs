//! Runs the three pooling heads on sequences of different lengths: every
//! output has the same dimension and unit norm.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use semaug::resampler_head::{Head, HeadConfig, HeadMode, HeadTrace};

fn main() -> semaug::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for mode in [HeadMode::Perceiver, HeadMode::LearnablePool, HeadMode::FrozenMean] {
        let head = Head::new(HeadConfig::new(16, mode), 0)?;
        println!("{mode:?}: {} parameters", head.params.parameter_count());
        for t in [1, 3, 17] {
            let x = Array2::from_shape_simple_fn((t, 16), || StandardNormal.sample(&mut rng));
            let y = head.forward(x.view())?;
            println!("  T={t:>2} -> dim {} norm {:.6}", y.len(), y.dot(&y).sqrt());
        }
    }

    let head = Head::new(HeadConfig::new(4, HeadMode::Perceiver), 3)?;
    let x = Array2::from_shape_simple_fn((5, 4), || StandardNormal.sample(&mut rng));
    if let HeadTrace::Perceiver(trace) = head.trace(x.view())? {
        println!("attention of latent 0 over 5 frames: {:.3}", trace.attention.row(0));
    }
    Ok(())
}
