use ndarray::{Array2, ArrayView2};

use super::{Head, HeadConfig};
use crate::error::{Error, Result};

/// Separate image and text heads plus the contrastive logit scale.
///
/// The scale is stored as its logarithm `t`; logits are `exp(t) * cos`, so the
/// temperature is `exp(-t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualEncoder {
    pub image: Head,
    pub text: Head,
    pub log_scale: f64,
    pub learnable_scale: bool,
}

impl DualEncoder {
    pub fn new(
        image: HeadConfig,
        text: HeadConfig,
        seed: u64,
        temperature_init: f64,
        learnable_scale: bool,
    ) -> Result<Self> {
        if !(temperature_init > 0.0 && temperature_init.is_finite()) {
            return Err(Error::Validation(format!(
                "initial temperature must be positive, got {temperature_init}"
            )));
        }
        if image.embed_dim != text.embed_dim {
            return Err(Error::Shape(format!(
                "image head emits {} dims but text head emits {}",
                image.embed_dim, text.embed_dim
            )));
        }
        Ok(Self {
            image: Head::new(image, seed)?,
            text: Head::new(text, seed.wrapping_add(0x9E37_79B9_7F4A_7C15))?,
            log_scale: (1.0 / temperature_init).ln(),
            learnable_scale,
        })
    }

    pub fn temperature(&self) -> f64 {
        (-self.log_scale).exp()
    }

    pub fn embed_dim(&self) -> usize {
        self.image.config.embed_dim
    }

    /// Embeds each sequence with `head`, one output row per input.
    pub fn embed_all(head: &Head, inputs: &[ArrayView2<f64>]) -> Result<Array2<f64>> {
        let mut out = Array2::zeros((inputs.len(), head.config.embed_dim));
        for (i, x) in inputs.iter().enumerate() {
            out.row_mut(i).assign(&head.forward(*x)?);
        }
        Ok(out)
    }
}
