use std::path::Path;

use ndarray::ArrayView2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::KMeansModel;
use crate::dataset::{read_jsonl, write_jsonl};
use crate::error::{Error, Result};

/// One training batch: row ids with the cluster each row was drawn from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Batch {
    pub rows: Vec<usize>,
    pub clusters: Vec<usize>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn distinct_clusters(&self) -> usize {
        let mut c = self.clusters.clone();
        c.sort_unstable();
        c.dedup();
        c.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchPlan {
    pub batch_size: usize,
    pub batches: Vec<Batch>,
}

impl BatchPlan {
    fn from_sequence(sequence: Vec<(usize, usize)>, batch_size: usize) -> Self {
        let batches = sequence
            .chunks(batch_size)
            .map(|chunk| Batch {
                rows: chunk.iter().map(|&(r, _)| r).collect(),
                clusters: chunk.iter().map(|&(_, c)| c).collect(),
            })
            .collect();
        Self {
            batch_size,
            batches,
        }
    }

    pub fn row_count(&self) -> usize {
        self.batches.iter().map(Batch::len).sum()
    }

    /// Rewrites local row ids `i` to `ids[i]`.
    pub fn remap_rows(&mut self, ids: &[usize]) {
        for batch in &mut self.batches {
            for r in &mut batch.rows {
                *r = ids[*r];
            }
        }
    }

    /// One batch per line: `{"rows":[...],"clusters":[...]}`.
    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        write_jsonl(path.as_ref(), &self.batches)
    }

    pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Self> {
        let batches: Vec<Batch> = read_jsonl(path.as_ref())?;
        for (i, b) in batches.iter().enumerate() {
            if b.rows.len() != b.clusters.len() {
                return Err(Error::Format(format!(
                    "batch {i} lists {} rows but {} clusters",
                    b.rows.len(),
                    b.clusters.len()
                )));
            }
        }
        let batch_size = batches.iter().map(Batch::len).max().unwrap_or(0);
        Ok(Self {
            batch_size,
            batches,
        })
    }
}

/// Round-robin over clusters, largest first, taking one row per cluster per
/// pass from a seeded shuffle of each cluster; the resulting sequence is cut
/// into batches of `batch_size`.
pub fn build_diverse_batches(model: &KMeansModel, batch_size: usize, seed: u64) -> Result<BatchPlan> {
    if batch_size == 0 {
        return Err(Error::Domain("batch size must be at least 1".into()));
    }
    if model.n_rows() < batch_size {
        return Err(Error::Domain(format!(
            "{} clustered rows cannot fill a batch of {batch_size}",
            model.n_rows()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut members = model.members();
    for m in &mut members {
        m.shuffle(&mut rng);
    }
    let mut order: Vec<usize> = (0..model.k).collect();
    order.sort_by(|&a, &b| members[b].len().cmp(&members[a].len()).then(a.cmp(&b)));

    let longest = members.iter().map(Vec::len).max().unwrap_or(0);
    let mut sequence = Vec::with_capacity(model.n_rows());
    for pass in 0..longest {
        for &c in &order {
            if let Some(&row) = members[c].get(pass) {
                sequence.push((row, c));
            }
        }
    }
    Ok(BatchPlan::from_sequence(sequence, batch_size))
}

/// Seeded shuffle of `0..row_count` cut into batches; every row is tagged
/// with cluster 0.
pub fn build_random_batches(row_count: usize, batch_size: usize, seed: u64) -> Result<BatchPlan> {
    if batch_size == 0 || row_count == 0 {
        return Err(Error::Domain(
            "random batching needs at least one row and batch size >= 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<usize> = (0..row_count).collect();
    rows.shuffle(&mut rng);
    Ok(BatchPlan::from_sequence(
        rows.into_iter().map(|r| (r, 0)).collect(),
        batch_size,
    ))
}

/// Mean Euclidean distance over unordered pairs of the given rows.
pub fn mean_pairwise_distance(features: ArrayView2<f64>, rows: &[usize]) -> Result<f64> {
    if rows.len() < 2 {
        return Err(Error::Domain(format!(
            "pairwise distance needs at least 2 rows, got {}",
            rows.len()
        )));
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    for (i, &a) in rows.iter().enumerate() {
        for &b in &rows[i + 1..] {
            let d: f64 = features
                .row(a)
                .iter()
                .zip(features.row(b))
                .map(|(x, y)| (x - y) * (x - y))
                .sum();
            total += d.sqrt();
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}
