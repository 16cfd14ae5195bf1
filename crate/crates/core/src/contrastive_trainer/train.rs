use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::gradients::{backward_gradients, PairBatch};
use crate::corpus::PairedSegments;
use crate::diversity_batcher::{
    build_diverse_batches, build_random_batches, kmeans_fit, mean_pairwise_distance, BatchPlan, KMeansConfig, KMeansModel,
};
use crate::error::{Error, Result};
use crate::evaluation::evaluate_concepts;
use crate::frame_sampler::SamplingStrategy;
use crate::resampler_head::{DualEncoder, HeadConfig, HeadMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchingMode {
    Kmeans,
    Random,
}

impl std::str::FromStr for BatchingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kmeans" => Ok(Self::Kmeans),
            "random" => Ok(Self::Random),
            other => Err(Error::Validation(format!("unknown batching mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub temperature_init: f64,
    pub temperature_learnable: bool,
    pub seed: u64,
    pub batching_mode: BatchingMode,
    /// Cluster count for k-means batching.
    pub clusters: usize,
    /// Seeded k-means restarts; the lowest-inertia fit is used.
    pub kmeans_restarts: usize,
    pub head_mode: HeadMode,
    pub latents: usize,
    /// Attention dimension; defaults to the frame feature dimension.
    pub head_dim: Option<usize>,
    /// Shared embedding dimension; defaults to the frame feature dimension.
    pub embed_dim: Option<usize>,
    pub sampling: SamplingStrategy,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            learning_rate: 0.05,
            batch_size: 16,
            temperature_init: 0.07,
            temperature_learnable: false,
            seed: 0,
            batching_mode: BatchingMode::Kmeans,
            clusters: 10,
            kmeans_restarts: 10,
            head_mode: HeadMode::Perceiver,
            latents: 8,
            head_dim: None,
            embed_dim: None,
            sampling: SamplingStrategy::Middle,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Validation(msg));
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be non-negative, got {}", self.learning_rate));
        }
        if !(self.temperature_init > 0.0 && self.temperature_init.is_finite()) {
            return bad(format!("temperature must be positive, got {}", self.temperature_init));
        }
        if self.batch_size == 0 || self.clusters == 0 || self.latents == 0 || self.kmeans_restarts == 0 {
            return bad("batch size, cluster count, restarts and latent count must be at least 1".into());
        }
        Ok(())
    }

    pub fn head_configs(&self, frame_dim: usize, text_dim: usize) -> (HeadConfig, HeadConfig) {
        let embed_dim = self.embed_dim.unwrap_or(frame_dim);
        let make = |input_dim: usize| HeadConfig {
            input_dim,
            latents: self.latents,
            head_dim: self.head_dim.unwrap_or(frame_dim),
            embed_dim,
            mode: self.head_mode,
        };
        (make(frame_dim), make(text_dim))
    }

    pub fn init_model(&self, frame_dim: usize, text_dim: usize) -> Result<DualEncoder> {
        let (image, text) = self.head_configs(frame_dim, text_dim);
        DualEncoder::new(image, text, self.seed, self.temperature_init, self.temperature_learnable)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean batch loss over the epoch.
    pub loss: f64,
    pub val_top1: Option<f64>,
    pub val_top3: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub config: TrainConfig,
    pub train_segments: usize,
    pub steps: u64,
    pub epochs: Vec<EpochRecord>,
    /// Mean pairwise distance of the batches in the first epoch's plan.
    pub first_epoch_batch_diversity: Option<f64>,
    pub checkpoint: Option<String>,
}

impl TrainReport {
    pub fn final_loss(&self) -> f64 {
        self.epochs.last().map_or(f64::NAN, |e| e.loss)
    }
}

fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    seed ^ (epoch as u64 + 1).wrapping_mul(0xD1B5_4A32_D192_ED03)
}

/// Per-epoch batch plans over a fixed set of temporal features.
///
/// k-means is fitted once at construction; each epoch draws a fresh seeded
/// plan from the fitted clusters, or a seeded shuffle in random mode.
#[derive(Debug, Clone)]
pub struct EpochPlanner {
    clusters: Option<KMeansModel>,
    rows: usize,
    batch_size: usize,
    seed: u64,
}

impl EpochPlanner {
    pub fn new(temporal: ArrayView2<f64>, config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        let n = temporal.nrows();
        if n == 0 {
            return Err(Error::Domain("no training segments to batch".into()));
        }
        let batch_size = config.batch_size.min(n);
        if batch_size < config.batch_size {
            log::warn!("batch size {} exceeds the {n} training segments; using {n}", config.batch_size);
        }
        let clusters = match config.batching_mode {
            BatchingMode::Kmeans => {
                let k = config.clusters.min(n);
                let fit = kmeans_fit(temporal, &KMeansConfig::new(k, config.seed).with_restarts(config.kmeans_restarts))?;
                log::info!("k-means: {k} clusters, inertia {:.4} after {} iterations", fit.inertia, fit.iterations);
                Some(fit)
            }
            BatchingMode::Random => None,
        };
        Ok(Self {
            clusters,
            rows: n,
            batch_size,
            seed: config.seed,
        })
    }

    pub fn clusters(&self) -> Option<&KMeansModel> {
        self.clusters.as_ref()
    }

    pub fn plan(&self, epoch: usize) -> Result<BatchPlan> {
        let seed = epoch_seed(self.seed, epoch);
        match &self.clusters {
            Some(fit) => build_diverse_batches(fit, self.batch_size, seed),
            None => build_random_batches(self.rows, self.batch_size, seed),
        }
    }
}

/// Mean over batches of the mean pairwise distance between members.
pub fn plan_diversity(plan: &BatchPlan, features: ArrayView2<f64>) -> Option<f64> {
    let scores: Vec<f64> = plan
        .batches
        .iter()
        .filter(|b| b.len() >= 2)
        .filter_map(|b| mean_pairwise_distance(features, &b.rows).ok())
        .collect();
    (!scores.is_empty()).then(|| scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Plain gradient descent over per-epoch batch plans from [`EpochPlanner`].
pub fn train(
    train_set: &PairedSegments,
    val_set: Option<&PairedSegments>,
    config: &TrainConfig,
) -> Result<(DualEncoder, TrainReport)> {
    config.validate()?;
    let (Some(frame_dim), Some(text_dim)) = (train_set.frame_dim(), train_set.text_dim()) else {
        return Err(Error::Domain("training split is empty".into()));
    };
    let mut model = config.init_model(frame_dim, text_dim)?;
    let n = train_set.len();

    let temporal = train_set.temporal_features()?;
    let planner = EpochPlanner::new(temporal.view(), config)?;

    let mut records = Vec::with_capacity(config.epochs);
    let mut steps = 0u64;
    let mut first_diversity = None;
    for epoch in 0..config.epochs {
        let plan = planner.plan(epoch)?;
        if epoch == 0 {
            first_diversity = plan_diversity(&plan, temporal.view());
        }

        let mut loss_sum = 0.0;
        for batch in &plan.batches {
            let pairs = PairBatch {
                images: batch.rows.iter().map(|&r| train_set.frames[r].view()).collect(),
                texts: batch.rows.iter().map(|&r| train_set.texts[r].view()).collect(),
            };
            let (loss, grads) = backward_gradients(&model, &pairs)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite {
                    tensor: format!("loss at epoch {epoch}"),
                });
            }
            loss_sum += loss;
            let lr = config.learning_rate;
            model.image.params.scaled_add(-lr, &grads.image);
            model.text.params.scaled_add(-lr, &grads.text);
            model.log_scale -= lr * grads.log_scale;
            steps += 1;
        }
        let loss = loss_sum / plan.batches.len() as f64;

        let (val_top1, val_top3) = match val_set.filter(|v| !v.is_empty()) {
            Some(v) => {
                let eval = evaluate_concepts(&model, v)?;
                (Some(eval.result.top1), Some(eval.result.top3))
            }
            None => (None, None),
        };
        log::debug!("epoch {epoch}: loss {loss:.6} val top1 {val_top1:?}");
        records.push(EpochRecord {
            epoch,
            loss,
            val_top1,
            val_top3,
        });
    }

    let report = TrainReport {
        config: *config,
        train_segments: n,
        steps,
        epochs: records,
        first_epoch_batch_diversity: first_diversity,
        checkpoint: None,
    };
    Ok((model, report))
}
