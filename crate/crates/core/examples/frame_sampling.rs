//! Picks frames from segments of different lengths and concatenates their
//! features into one temporal vector.

use semaug::frame_sampler::{middle_frame_indices, temporal_concat, uniform_sample_indices};

fn main() -> semaug::Result<()> {
    for n in [3, 4, 10, 61] {
        println!("N={n:>2}: middle {:?}, uniform k=3 {:?}", middle_frame_indices(n)?.indices(), uniform_sample_indices(n, 3)?);
    }

    let frames = [[0.1f32, 0.2], [0.3, 0.4], [0.5, 0.6]];
    let refs: Vec<&[f32]> = frames.iter().map(|f| f.as_slice()).collect();
    let feature = temporal_concat(&refs)?;
    println!("{} frames of dim {} -> {:?}", feature.frames(), feature.frame_dim(), feature.as_slice());

    match middle_frame_indices(2) {
        Ok(_) => unreachable!(),
        Err(e) => println!("two-frame segment rejected: {e}"),
    }
    Ok(())
}
