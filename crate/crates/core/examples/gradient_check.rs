//! Compares analytic gradients of the contrastive loss with central finite
//! differences on a tiny dual encoder.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use semaug::contrastive_trainer::{finite_difference_check, FdOptions, PairBatch};
use semaug::resampler_head::{DualEncoder, HeadConfig, HeadMode};

fn main() -> semaug::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut sample = |rows| Array2::<f64>::from_shape_simple_fn((rows, 4), || StandardNormal.sample(&mut rng));
    let images: Vec<_> = (0..3).map(|_| sample(3)).collect();
    let texts: Vec<_> = (0..3).map(|_| sample(1)).collect();
    let batch = PairBatch {
        images: images.iter().map(|a| a.view()).collect(),
        texts: texts.iter().map(|a| a.view()).collect(),
    };

    for mode in [HeadMode::Perceiver, HeadMode::LearnablePool] {
        let config = HeadConfig {
            input_dim: 4,
            latents: 2,
            head_dim: 3,
            embed_dim: 4,
            mode,
        };
        let model = DualEncoder::new(config, config, 5, 0.07, true)?;
        let report = finite_difference_check(&model, &batch, &FdOptions::default())?;
        println!("{mode:?}: passed {}", report.passed());
        for b in &report.blocks {
            println!("  {:>5}.{:<8} {:>2} coords, max rel error {:.2e}", b.head, b.block, b.coords_checked, b.max_rel_error);
        }
    }
    Ok(())
}
