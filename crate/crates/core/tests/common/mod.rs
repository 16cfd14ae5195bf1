#![allow(dead_code)]

use std::collections::HashMap;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use semaug::contrastive_trainer::{train, BatchingMode, PairBatch, TrainConfig};
use semaug::corpus::PairedSegments;
use semaug::dataset::{split_dataset, SplitSpec};
use semaug::evaluation::evaluate_concepts;
use semaug::frame_sampler::SamplingStrategy;
use semaug::resampler_head::{DualEncoder, HeadConfig, HeadMode};
use semaug::synth::{generate, SynthConfig};

pub fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(rng))
}

/// Tiny dual encoder: d=4, R=2, h=3, e=4, learnable scale.
pub fn tiny_model(mode: HeadMode, seed: u64) -> DualEncoder {
    let config = HeadConfig {
        input_dim: 4,
        latents: 2,
        head_dim: 3,
        embed_dim: 4,
        mode,
    };
    DualEncoder::new(config, config, seed, 0.07, true).unwrap()
}

/// Three image sequences of length 3 and three single-row texts, d=4.
pub fn tiny_inputs(seed: u64) -> (Vec<Array2<f64>>, Vec<Array2<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1000));
    let images = (0..3).map(|_| gaussian(3, 4, &mut rng)).collect();
    let texts = (0..3).map(|_| gaussian(1, 4, &mut rng)).collect();
    (images, texts)
}

pub fn batch<'a>(images: &'a [Array2<f64>], texts: &'a [Array2<f64>]) -> PairBatch<'a> {
    PairBatch {
        images: images.iter().map(|a| a.view()).collect(),
        texts: texts.iter().map(|a| a.view()).collect(),
    }
}

/// Adjusted Rand index from the pair-counting contingency table.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    let choose2 = |n: usize| (n * n.saturating_sub(1)) as f64 / 2.0;
    let mut table: HashMap<(usize, usize), usize> = HashMap::new();
    let mut rows: HashMap<usize, usize> = HashMap::new();
    let mut cols: HashMap<usize, usize> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&n| choose2(n)).sum();
    let sum_rows: f64 = rows.values().map(|&n| choose2(n)).sum();
    let sum_cols: f64 = cols.values().map(|&n| choose2(n)).sum();
    let expected = sum_rows * sum_cols / choose2(a.len());
    let max = (sum_rows + sum_cols) / 2.0;
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

/// Three isotropic blobs with 100 points each around (0,0), (10,0), (0,10).
pub fn three_blobs(seed: u64) -> (Array2<f64>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.5).unwrap();
    let centers = [(0.0, 0.0), (10.0, 0.0), (0.0, 10.0)];
    let mut x = Array2::zeros((300, 2));
    let mut labels = Vec::with_capacity(300);
    for (c, &(cx, cy)) in centers.iter().enumerate() {
        for i in 0..100 {
            let r = c * 100 + i;
            x[[r, 0]] = cx + noise.sample(&mut rng);
            x[[r, 1]] = cy + noise.sample(&mut rng);
            labels.push(c);
        }
    }
    (x, labels)
}

/// Oracle tokenizer: walks characters, keeping lowercased alphanumeric runs.
pub fn oracle_tokens(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            current.extend(ch.to_lowercase());
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

fn f_measure(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// ROUGE-N by exhaustive matching: every predicted n-gram is paired with
/// the first unused equal reference n-gram.
pub fn oracle_rouge_n(pred: &str, reference: &str, n: usize) -> (f64, f64, f64) {
    let grams = |t: &[String]| -> Vec<Vec<String>> {
        if t.len() < n {
            Vec::new()
        } else {
            (0..=t.len() - n).map(|i| t[i..i + n].to_vec()).collect()
        }
    };
    let p = grams(&oracle_tokens(pred));
    let r = grams(&oracle_tokens(reference));
    let mut used = vec![false; r.len()];
    let mut overlap = 0usize;
    for g in &p {
        if let Some(j) = (0..r.len()).find(|&j| !used[j] && r[j] == *g) {
            used[j] = true;
            overlap += 1;
        }
    }
    let ratio = |total: usize| if total == 0 { 0.0 } else { overlap as f64 / total as f64 };
    let (precision, recall) = (ratio(p.len()), ratio(r.len()));
    (precision, recall, f_measure(precision, recall))
}

/// ROUGE-L with a full (|p|+1) x (|r|+1) LCS table filled from the end.
pub fn oracle_rouge_l(pred: &str, reference: &str) -> (f64, f64, f64) {
    let p = oracle_tokens(pred);
    let r = oracle_tokens(reference);
    let mut table = vec![vec![0usize; r.len() + 1]; p.len() + 1];
    for i in (0..p.len()).rev() {
        for j in (0..r.len()).rev() {
            table[i][j] = if p[i] == r[j] {
                1 + table[i + 1][j + 1]
            } else {
                table[i + 1][j].max(table[i][j + 1])
            };
        }
    }
    let lcs = table[0][0] as f64;
    let precision = if p.is_empty() { 0.0 } else { lcs / p.len() as f64 };
    let recall = if r.is_empty() { 0.0 } else { lcs / r.len() as f64 };
    (precision, recall, f_measure(precision, recall))
}

/// Outcome of one training run on the default synthetic corpus.
#[derive(Debug, Clone, Copy)]
pub struct SyntheticRun {
    pub test_top1: f64,
    pub final_val_top1: f64,
    pub batch_diversity: f64,
}

/// Generates the default corpus for `seed`, splits it by video, trains with
/// the given head and batching, and evaluates on the test videos.
pub fn synthetic_run(head_mode: HeadMode, batching_mode: BatchingMode, seed: u64) -> SyntheticRun {
    let corpus = generate(&SynthConfig {
        seed,
        ..SynthConfig::default()
    })
    .unwrap();
    let split = split_dataset(&corpus.segments, &SplitSpec { seed, ..SplitSpec::default() }).unwrap();
    let all = PairedSegments::build(&corpus.segments, &corpus.frames, &corpus.texts, SamplingStrategy::Middle).unwrap();
    let train_set = all.restrict_to_videos(&split.train);
    let val_set = all.restrict_to_videos(&split.val);
    let test_set = all.restrict_to_videos(&split.test);
    let config = TrainConfig {
        seed,
        head_mode,
        batching_mode,
        ..TrainConfig::default()
    };
    let (model, report) = train(&train_set, Some(&val_set), &config).unwrap();
    let test = evaluate_concepts(&model, &test_set).unwrap();
    SyntheticRun {
        test_top1: test.result.top1,
        final_val_top1: report.epochs.last().unwrap().val_top1.unwrap(),
        batch_diversity: report.first_epoch_batch_diversity.unwrap(),
    }
}

pub fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.into_iter().collect();
    v.iter().sum::<f64>() / v.len() as f64
}
