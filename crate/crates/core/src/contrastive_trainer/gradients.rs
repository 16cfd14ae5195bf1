use ndarray::{Array2, ArrayView2};

use super::loss::{contrastive_loss_and_grad, similarity_matrix};
use crate::error::{Error, Result};
use crate::resampler_head::{DualEncoder, Head, HeadParams, HeadTrace};

/// Matched (frame sequence, annotation sequence) pairs.
#[derive(Debug, Clone)]
pub struct PairBatch<'a> {
    pub images: Vec<ArrayView2<'a, f64>>,
    pub texts: Vec<ArrayView2<'a, f64>>,
}

impl PairBatch<'_> {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}

/// Gradients of the batch loss with respect to every trainable quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub image: HeadParams,
    pub text: HeadParams,
    /// Zero unless the logit scale is learnable.
    pub log_scale: f64,
}

fn embed(head: &Head, inputs: &[ArrayView2<f64>], name: &str) -> Result<(Vec<HeadTrace>, Array2<f64>)> {
    let traces = inputs
        .iter()
        .map(|x| head.trace(*x))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Array2::zeros((inputs.len(), head.config.embed_dim));
    for (i, t) in traces.iter().enumerate() {
        out.row_mut(i).assign(t.output());
    }
    ensure_finite(out.iter(), name)?;
    Ok((traces, out))
}

fn ensure_finite<'a>(mut values: impl Iterator<Item = &'a f64>, name: &str) -> Result<()> {
    if values.any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            tensor: name.to_string(),
        });
    }
    Ok(())
}

fn check_batch(batch: &PairBatch) -> Result<()> {
    if batch.images.len() != batch.texts.len() || batch.is_empty() {
        return Err(Error::Shape(format!(
            "batch has {} image and {} text inputs",
            batch.images.len(),
            batch.texts.len()
        )));
    }
    Ok(())
}

/// Contrastive loss of the model on one batch.
pub fn batch_loss(model: &DualEncoder, batch: &PairBatch) -> Result<f64> {
    check_batch(batch)?;
    let (_, img) = embed(&model.image, &batch.images, "image embeddings")?;
    let (_, txt) = embed(&model.text, &batch.texts, "text embeddings")?;
    let logits = similarity_matrix(img.view(), txt.view(), model.temperature())?;
    Ok(contrastive_loss_and_grad(logits.view())?.0)
}

/// Loss and exact gradients for both heads and, when learnable, the log
/// logit scale.
pub fn backward_gradients(model: &DualEncoder, batch: &PairBatch) -> Result<(f64, Gradients)> {
    check_batch(batch)?;
    let (img_traces, img) = embed(&model.image, &batch.images, "image embeddings")?;
    let (txt_traces, txt) = embed(&model.text, &batch.texts, "text embeddings")?;
    let logits = similarity_matrix(img.view(), txt.view(), model.temperature())?;
    let (loss, g_logits) = contrastive_loss_and_grad(logits.view())?;

    let scale = 1.0 / model.temperature();
    let g_img = g_logits.dot(&txt) * scale;
    let g_txt = g_logits.t().dot(&img) * scale;
    let log_scale = if model.learnable_scale {
        (&g_logits * &logits).sum()
    } else {
        0.0
    };

    let accumulate = |head: &Head, traces: &[HeadTrace], g_out: &Array2<f64>| {
        let mut total = head.params.zeros_like();
        for (trace, g) in traces.iter().zip(g_out.rows()) {
            total.scaled_add(1.0, &head.backward(trace, g));
        }
        total
    };
    let grads = Gradients {
        image: accumulate(&model.image, &img_traces, &g_img),
        text: accumulate(&model.text, &txt_traces, &g_txt),
        log_scale,
    };

    for (head, params) in [("image", &grads.image), ("text", &grads.text)] {
        for (name, block) in params.blocks() {
            ensure_finite(block.iter(), &format!("{head}.{name} gradient"))?;
        }
    }
    ensure_finite(std::iter::once(&grads.log_scale), "log_scale gradient")?;
    Ok((loss, grads))
}
