use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::gradients::{backward_gradients, batch_loss, Gradients, PairBatch};
use crate::error::Result;
use crate::resampler_head::{DualEncoder, HeadParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdOptions {
    /// Central-difference step.
    pub epsilon: f64,
    /// Largest accepted relative error per block.
    pub tolerance: f64,
    /// Coordinates sampled per block; smaller blocks are checked in full.
    pub coords_per_block: usize,
    /// Denominator floor for the relative error, so that gradients that are
    /// exactly zero compare on an absolute scale.
    pub abs_floor: f64,
    pub seed: u64,
}

impl Default for FdOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-4,
            tolerance: 1e-4,
            coords_per_block: 50,
            abs_floor: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockCheck {
    pub head: String,
    pub block: String,
    pub coords_checked: usize,
    pub max_abs_error: f64,
    pub max_rel_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub blocks: Vec<BlockCheck>,
    pub warnings: Vec<String>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.blocks.iter().all(|b| b.passed)
    }

    pub fn max_rel_error(&self) -> f64 {
        self.blocks.iter().map(|b| b.max_rel_error).fold(0.0, f64::max)
    }

    pub fn block(&self, head: &str, block: &str) -> Option<&BlockCheck> {
        self.blocks.iter().find(|b| b.head == head && b.block == block)
    }
}

/// Compares [`backward_gradients`] against central differences.
pub fn finite_difference_check(model: &DualEncoder, batch: &PairBatch, options: &FdOptions) -> Result<GradCheckReport> {
    let (_, analytic) = backward_gradients(model, batch)?;
    check_gradients(model, batch, &analytic, options)
}

/// Compares the supplied gradients against central differences of the loss.
pub fn check_gradients(
    model: &DualEncoder,
    batch: &PairBatch,
    analytic: &Gradients,
    options: &FdOptions,
) -> Result<GradCheckReport> {
    let mut warnings = Vec::new();
    if options.epsilon > 1e-2 {
        let msg = format!(
            "epsilon {} is large; central-difference truncation error grows with epsilon^2",
            options.epsilon
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut blocks = Vec::new();
    for (head_name, params, grads) in [
        ("image", &model.image.params, &analytic.image),
        ("text", &model.text.params, &analytic.text),
    ] {
        for (b, ((block_name, block), (_, grad))) in params.blocks().into_iter().zip(grads.blocks()).enumerate() {
            let coords = if block.len() <= options.coords_per_block {
                (0..block.len()).collect()
            } else {
                rand::seq::index::sample(&mut rng, block.len(), options.coords_per_block).into_vec()
            };
            let grad = grad.as_slice().expect("standard layout");
            let mut errs = Errors::default();
            for &c in &coords {
                let numeric = central_difference(model, batch, options.epsilon, |m, delta| {
                    let target: &mut HeadParams = if head_name == "image" {
                        &mut m.image.params
                    } else {
                        &mut m.text.params
                    };
                    let mut blocks = target.blocks_mut();
                    blocks[b].1.as_slice_mut().expect("standard layout")[c] += delta;
                })?;
                errs.record(grad[c], numeric, options.abs_floor);
            }
            blocks.push(errs.finish(head_name, block_name, coords.len(), options.tolerance));
        }
    }

    if model.learnable_scale {
        let numeric = central_difference(model, batch, options.epsilon, |m, delta| m.log_scale += delta)?;
        let mut errs = Errors::default();
        errs.record(analytic.log_scale, numeric, options.abs_floor);
        blocks.push(errs.finish("scale", "log_scale", 1, options.tolerance));
    }

    Ok(GradCheckReport { blocks, warnings })
}

fn central_difference(
    model: &DualEncoder,
    batch: &PairBatch,
    eps: f64,
    perturb: impl Fn(&mut DualEncoder, f64),
) -> Result<f64> {
    let mut plus = model.clone();
    perturb(&mut plus, eps);
    let mut minus = model.clone();
    perturb(&mut minus, -eps);
    Ok((batch_loss(&plus, batch)? - batch_loss(&minus, batch)?) / (2.0 * eps))
}

#[derive(Default)]
struct Errors {
    abs: f64,
    rel: f64,
}

impl Errors {
    fn record(&mut self, analytic: f64, numeric: f64, floor: f64) {
        let abs = (analytic - numeric).abs();
        let rel = abs / analytic.abs().max(numeric.abs()).max(floor);
        self.abs = self.abs.max(abs);
        self.rel = self.rel.max(rel);
    }

    fn finish(self, head: &str, block: &str, coords: usize, tol: f64) -> BlockCheck {
        BlockCheck {
            head: head.to_string(),
            block: block.to_string(),
            coords_checked: coords,
            max_abs_error: self.abs,
            max_rel_error: self.rel,
            passed: self.rel <= tol,
        }
    }
}
