//! Heads that turn a variable-length `T x d` feature sequence into one
//! fixed-size, L2-normalized embedding.
//!
//! * [`HeadMode::Perceiver`]: `R` learned latent queries cross-attend to the
//!   sequence in a single block; the `R x h` result is flattened and
//!   projected to `e` dims.
//! * [`HeadMode::LearnablePool`]: softmax attention pooling with a learned
//!   scoring vector followed by a `d x e` projection.
//! * [`HeadMode::FrozenMean`]: mean over rows, no parameters.

mod checkpoint;
mod dual;

pub use checkpoint::{read_checkpoint, write_checkpoint, CheckpointHeader, CHECKPOINT_MAGIC};
pub use dual::DualEncoder;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadMode {
    Perceiver,
    LearnablePool,
    FrozenMean,
}

impl std::str::FromStr for HeadMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "perceiver" => Ok(Self::Perceiver),
            "learnable_pool" => Ok(Self::LearnablePool),
            "frozen_mean" => Ok(Self::FrozenMean),
            other => Err(Error::Validation(format!("unknown head mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadConfig {
    /// Input feature dimension `d`.
    pub input_dim: usize,
    /// Number of latent queries `R`.
    pub latents: usize,
    /// Attention dimension `h`.
    pub head_dim: usize,
    /// Output embedding dimension `e`.
    pub embed_dim: usize,
    pub mode: HeadMode,
}

impl HeadConfig {
    /// Defaults `R = 8`, `h = e = d`.
    pub fn new(input_dim: usize, mode: HeadMode) -> Self {
        Self {
            input_dim,
            latents: 8,
            head_dim: input_dim,
            embed_dim: input_dim,
            mode,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.latents == 0 || self.head_dim == 0 || self.embed_dim == 0 {
            return Err(Error::Validation(format!(
                "head dimensions must all be >= 1: {self:?}"
            )));
        }
        if self.mode == HeadMode::FrozenMean && self.embed_dim != self.input_dim {
            return Err(Error::Validation(format!(
                "frozen mean pooling emits d = {} dims, but embed_dim is {}",
                self.input_dim, self.embed_dim
            )));
        }
        Ok(())
    }

    pub fn output_dim(&self) -> usize {
        self.embed_dim
    }
}

/// Perceiver-resampler weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ResamplerParams {
    /// `R x d` learned queries.
    pub latents: Array2<f64>,
    pub w_q: Array2<f64>,
    pub w_k: Array2<f64>,
    pub w_v: Array2<f64>,
    /// `(R*h) x e`.
    pub w_o: Array2<f64>,
}

/// Learnable attention-pooling weights.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolParams {
    /// `d x 1` scoring vector.
    pub score: Array2<f64>,
    /// `d x e`.
    pub proj: Array2<f64>,
}

/// Parameters of one head. The same type carries gradients.
#[derive(Debug, Clone, PartialEq)]
pub enum HeadParams {
    Perceiver(ResamplerParams),
    LearnablePool(PoolParams),
    FrozenMean,
}

impl HeadParams {
    /// Parameter blocks in declaration order.
    pub fn blocks(&self) -> Vec<(&'static str, &Array2<f64>)> {
        match self {
            HeadParams::Perceiver(p) => vec![
                ("latents", &p.latents),
                ("w_q", &p.w_q),
                ("w_k", &p.w_k),
                ("w_v", &p.w_v),
                ("w_o", &p.w_o),
            ],
            HeadParams::LearnablePool(p) => vec![("score", &p.score), ("proj", &p.proj)],
            HeadParams::FrozenMean => vec![],
        }
    }

    pub fn blocks_mut(&mut self) -> Vec<(&'static str, &mut Array2<f64>)> {
        match self {
            HeadParams::Perceiver(p) => vec![
                ("latents", &mut p.latents),
                ("w_q", &mut p.w_q),
                ("w_k", &mut p.w_k),
                ("w_v", &mut p.w_v),
                ("w_o", &mut p.w_o),
            ],
            HeadParams::LearnablePool(p) => vec![("score", &mut p.score), ("proj", &mut p.proj)],
            HeadParams::FrozenMean => vec![],
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, b) in z.blocks_mut() {
            b.fill(0.0);
        }
        z
    }

    /// `self += alpha * other`, block by block.
    pub fn scaled_add(&mut self, alpha: f64, other: &HeadParams) {
        for ((_, a), (_, b)) in self.blocks_mut().into_iter().zip(other.blocks()) {
            a.scaled_add(alpha, b);
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.blocks().iter().map(|(_, b)| b.len()).sum()
    }
}

fn glorot(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let s = glorot_bound(rows, cols);
    let dist = Uniform::new_inclusive(-s, s).expect("finite bound");
    Array2::from_shape_simple_fn((rows, cols), || dist.sample(rng))
}

/// `sqrt(6 / (fan_in + fan_out))` for a `rows x cols` matrix.
pub fn glorot_bound(rows: usize, cols: usize) -> f64 {
    (6.0 / (rows + cols) as f64).sqrt()
}

/// Glorot-uniform parameters for `config`, deterministic in `seed`.
pub fn init_head(config: &HeadConfig, seed: u64) -> Result<HeadParams> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let HeadConfig {
        input_dim: d,
        latents: r,
        head_dim: h,
        embed_dim: e,
        ..
    } = *config;
    Ok(match config.mode {
        HeadMode::Perceiver => HeadParams::Perceiver(ResamplerParams {
            latents: glorot(r, d, &mut rng),
            w_q: glorot(d, h, &mut rng),
            w_k: glorot(d, h, &mut rng),
            w_v: glorot(d, h, &mut rng),
            w_o: glorot(r * h, e, &mut rng),
        }),
        HeadMode::LearnablePool => HeadParams::LearnablePool(PoolParams {
            score: glorot(d, 1, &mut rng),
            proj: glorot(d, e, &mut rng),
        }),
        HeadMode::FrozenMean => HeadParams::FrozenMean,
    })
}

fn check_input(features: ArrayView2<f64>, d: usize) -> Result<()> {
    if features.nrows() == 0 {
        return Err(Error::Domain("head input must have at least one row".into()));
    }
    if features.ncols() != d {
        return Err(Error::Shape(format!(
            "head expects {d}-dim features, got {}",
            features.ncols()
        )));
    }
    Ok(())
}

fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

/// Unit-norm copy of `v` and the original norm. A zero vector stays zero.
pub fn l2_normalize(v: ArrayView1<f64>) -> (Array1<f64>, f64) {
    let norm = v.dot(&v).sqrt();
    if norm > 0.0 {
        (v.mapv(|x| x / norm), norm)
    } else {
        (v.to_owned(), 0.0)
    }
}

/// Gradient through `y -> y / |y|` given the normalized output.
fn normalize_backward(out: &Array1<f64>, norm: f64, g_out: ArrayView1<f64>) -> Array1<f64> {
    if norm == 0.0 {
        return Array1::zeros(out.len());
    }
    let proj = out.dot(&g_out);
    (&g_out - &(out * proj)) / norm
}

/// Result of mean pooling.
#[derive(Debug, Clone, PartialEq)]
pub struct Pooled {
    pub embedding: Array1<f64>,
    /// The row mean was the zero vector and was returned unnormalized.
    pub degenerate: bool,
}

pub fn mean_pool(features: ArrayView2<f64>) -> Result<Pooled> {
    if features.nrows() == 0 {
        return Err(Error::Domain("mean pooling needs at least one row".into()));
    }
    let mean = features.mean_axis(Axis(0)).expect("non-empty");
    let (embedding, norm) = l2_normalize(mean.view());
    if norm == 0.0 {
        log::warn!("mean-pooled embedding is the zero vector; left unnormalized");
    }
    Ok(Pooled {
        embedding,
        degenerate: norm == 0.0,
    })
}

/// Softmax-weighted pooling; returns `(weights, pooled)`.
pub fn attention_pool(score: ArrayView1<f64>, features: ArrayView2<f64>) -> (Array1<f64>, Array1<f64>) {
    let mut weights = features.dot(&score);
    softmax_in_place(weights.as_slice_mut().unwrap());
    let pooled = features.t().dot(&weights);
    (weights, pooled)
}

pub fn learnable_pool_forward(params: &PoolParams, features: ArrayView2<f64>) -> Result<Array1<f64>> {
    check_input(features, params.score.nrows())?;
    let (_, pooled) = attention_pool(params.score.column(0), features);
    let y = pooled.dot(&params.proj);
    Ok(l2_normalize(y.view()).0)
}

pub fn resampler_forward(params: &ResamplerParams, features: ArrayView2<f64>) -> Result<Array1<f64>> {
    Ok(PerceiverTrace::forward(params, features)?.output)
}

/// Intermediate tensors of one perceiver forward pass.
#[derive(Debug, Clone)]
pub struct PerceiverTrace {
    features: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    /// `R x T` row-stochastic attention.
    pub attention: Array2<f64>,
    z_flat: Array1<f64>,
    norm: f64,
    pub output: Array1<f64>,
}

impl PerceiverTrace {
    pub fn forward(p: &ResamplerParams, features: ArrayView2<f64>) -> Result<Self> {
        check_input(features, p.w_k.nrows())?;
        let h = p.w_q.ncols();
        let scale = 1.0 / (h as f64).sqrt();
        let q = p.latents.dot(&p.w_q);
        let k = features.dot(&p.w_k);
        let v = features.dot(&p.w_v);
        let mut attention = q.dot(&k.t()) * scale;
        for mut row in attention.rows_mut() {
            softmax_in_place(row.as_slice_mut().unwrap());
        }
        let z = attention.dot(&v);
        let z_flat = Array1::from_iter(z.iter().copied());
        let y = z_flat.dot(&p.w_o);
        let (output, norm) = l2_normalize(y.view());
        Ok(Self {
            features: features.to_owned(),
            q,
            k,
            v,
            attention,
            z_flat,
            norm,
            output,
        })
    }

    pub fn backward(&self, p: &ResamplerParams, g_out: ArrayView1<f64>) -> ResamplerParams {
        let (r, h) = (p.latents.nrows(), p.w_q.ncols());
        let scale = 1.0 / (h as f64).sqrt();
        let g_y = normalize_backward(&self.output, self.norm, g_out);

        let w_o = outer(&self.z_flat, &g_y);
        let g_z = p
            .w_o
            .dot(&g_y)
            .into_shape_with_order((r, h))
            .expect("R*h elements");
        let g_attn = g_z.dot(&self.v.t());
        let g_v = self.attention.t().dot(&g_z);

        // Softmax backward per row, then the 1/sqrt(h) scaling.
        let mut g_s = g_attn;
        for (mut gs, a) in g_s.rows_mut().into_iter().zip(self.attention.rows()) {
            let dot = gs.dot(&a);
            gs.zip_mut_with(&a, |g, &ai| *g = ai * (*g - dot) * scale);
        }
        let g_q = g_s.dot(&self.k);
        let g_k = g_s.t().dot(&self.q);

        ResamplerParams {
            latents: g_q.dot(&p.w_q.t()),
            w_q: p.latents.t().dot(&g_q),
            w_k: self.features.t().dot(&g_k),
            w_v: self.features.t().dot(&g_v),
            w_o,
        }
    }
}

fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    let a2 = a.view().insert_axis(Axis(1));
    let b2 = b.view().insert_axis(Axis(0));
    a2.dot(&b2)
}

/// A head: configuration plus parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Head {
    pub config: HeadConfig,
    pub params: HeadParams,
}

/// Forward state a [`Head`] needs for its backward pass.
#[derive(Debug, Clone)]
pub enum HeadTrace {
    Perceiver(Box<PerceiverTrace>),
    LearnablePool {
        features: Array2<f64>,
        weights: Array1<f64>,
        pooled: Array1<f64>,
        norm: f64,
        output: Array1<f64>,
    },
    FrozenMean {
        output: Array1<f64>,
    },
}

impl HeadTrace {
    pub fn output(&self) -> &Array1<f64> {
        match self {
            HeadTrace::Perceiver(t) => &t.output,
            HeadTrace::LearnablePool { output, .. } | HeadTrace::FrozenMean { output } => output,
        }
    }
}

impl Head {
    pub fn new(config: HeadConfig, seed: u64) -> Result<Self> {
        Ok(Self {
            params: init_head(&config, seed)?,
            config,
        })
    }

    pub fn from_params(config: HeadConfig, params: HeadParams) -> Result<Self> {
        config.validate()?;
        let expected = init_head(&config, 0)?;
        let shapes = |p: &HeadParams| -> Vec<(&'static str, Vec<usize>)> {
            p.blocks().iter().map(|(n, b)| (*n, b.shape().to_vec())).collect()
        };
        if shapes(&expected) != shapes(&params) {
            return Err(Error::Shape(format!(
                "parameter shapes {:?} do not match config {config:?}",
                shapes(&params)
            )));
        }
        Ok(Self { config, params })
    }

    pub fn forward(&self, features: ArrayView2<f64>) -> Result<Array1<f64>> {
        Ok(self.trace(features)?.output().clone())
    }

    pub fn trace(&self, features: ArrayView2<f64>) -> Result<HeadTrace> {
        check_input(features, self.config.input_dim)?;
        Ok(match &self.params {
            HeadParams::Perceiver(p) => HeadTrace::Perceiver(Box::new(PerceiverTrace::forward(p, features)?)),
            HeadParams::LearnablePool(p) => {
                let (weights, pooled) = attention_pool(p.score.column(0), features);
                let y = pooled.dot(&p.proj);
                let (output, norm) = l2_normalize(y.view());
                HeadTrace::LearnablePool {
                    features: features.to_owned(),
                    weights,
                    pooled,
                    norm,
                    output,
                }
            }
            HeadParams::FrozenMean => HeadTrace::FrozenMean {
                output: mean_pool(features)?.embedding,
            },
        })
    }

    /// Parameter gradients given the gradient of the loss w.r.t. the output.
    pub fn backward(&self, trace: &HeadTrace, g_out: ArrayView1<f64>) -> HeadParams {
        match (&self.params, trace) {
            (HeadParams::Perceiver(p), HeadTrace::Perceiver(t)) => {
                HeadParams::Perceiver(t.backward(p, g_out))
            }
            (
                HeadParams::LearnablePool(p),
                HeadTrace::LearnablePool {
                    features,
                    weights,
                    pooled,
                    norm,
                    output,
                },
            ) => {
                let g_y = normalize_backward(output, *norm, g_out);
                let proj = outer(pooled, &g_y);
                let g_pooled = p.proj.dot(&g_y);
                let g_w = features.dot(&g_pooled);
                let dot = g_w.dot(weights);
                let g_s = weights * &(g_w - dot);
                let score = features.t().dot(&g_s).insert_axis(Axis(1));
                HeadParams::LearnablePool(PoolParams { score, proj })
            }
            (HeadParams::FrozenMean, HeadTrace::FrozenMean { .. }) => HeadParams::FrozenMean,
            _ => panic!("trace does not belong to this head"),
        }
    }
}
