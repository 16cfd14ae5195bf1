use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::corpus::PairedSegments;
use crate::error::{Error, Result};
use crate::resampler_head::DualEncoder;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub top1: f64,
    pub top3: f64,
    pub candidate_count: usize,
    pub query_count: usize,
    /// Per query, candidate indices from most to least similar.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ranked: Option<Vec<Vec<usize>>>,
}

/// Zero-based rank of `truth` among the candidates ordered by descending
/// similarity, ties going to the lower candidate index.
pub fn rank_of_truth(similarities: &[f64], truth: usize) -> usize {
    let target = similarities[truth];
    similarities
        .iter()
        .enumerate()
        .filter(|&(j, &s)| s > target || (s == target && j < truth))
        .count()
}

fn similarities(queries: ArrayView2<f64>, candidates: ArrayView2<f64>, truth: &[usize]) -> Result<Array2<f64>> {
    if queries.ncols() != candidates.ncols() {
        return Err(Error::Shape(format!(
            "queries have {} dims, candidates {}",
            queries.ncols(),
            candidates.ncols()
        )));
    }
    if truth.len() != queries.nrows() {
        return Err(Error::Shape(format!(
            "{} truth labels for {} queries",
            truth.len(),
            queries.nrows()
        )));
    }
    if let Some(&t) = truth.iter().find(|&&t| t >= candidates.nrows()) {
        return Err(Error::Domain(format!(
            "truth index {t} outside the {} candidates",
            candidates.nrows()
        )));
    }
    Ok(queries.dot(&candidates.t()))
}

/// Fraction of queries whose true candidate is among the `k` most similar.
/// Rows are expected to be unit-norm, so dot products are cosines.
pub fn topk_retrieval_accuracy(
    queries: ArrayView2<f64>,
    candidates: ArrayView2<f64>,
    truth: &[usize],
    k: usize,
) -> Result<f64> {
    if k == 0 || k > candidates.nrows() {
        return Err(Error::Domain(format!(
            "k = {k} must lie in 1..={}",
            candidates.nrows()
        )));
    }
    if queries.nrows() == 0 {
        return Err(Error::Domain("no queries to evaluate".into()));
    }
    let sims = similarities(queries, candidates, truth)?;
    let hits = sims
        .rows()
        .into_iter()
        .zip(truth)
        .filter(|(row, &t)| rank_of_truth(row.as_slice().unwrap(), t) < k)
        .count();
    Ok(hits as f64 / queries.nrows() as f64)
}

impl RetrievalResult {
    /// Top-1 and Top-3 accuracy. With fewer than three candidates, Top-3 is
    /// computed over the whole pool.
    pub fn compute(
        queries: ArrayView2<f64>,
        candidates: ArrayView2<f64>,
        truth: &[usize],
        keep_rankings: bool,
    ) -> Result<Self> {
        let m = candidates.nrows();
        if m < 3 {
            log::warn!("only {m} candidates; Top-3 covers the whole pool");
        }
        let top1 = topk_retrieval_accuracy(queries, candidates, truth, 1)?;
        let top3 = topk_retrieval_accuracy(queries, candidates, truth, m.min(3))?;
        let ranked = keep_rankings.then(|| {
            queries
                .dot(&candidates.t())
                .rows()
                .into_iter()
                .map(|row| {
                    let mut order: Vec<usize> = (0..m).collect();
                    order.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
                    order
                })
                .collect()
        });
        Ok(Self {
            top1,
            top3,
            candidate_count: m,
            query_count: queries.nrows(),
            ranked,
        })
    }
}

/// Retrieval over the distinct annotations of `set`.
#[derive(Debug, Clone)]
pub struct ConceptEvaluation {
    pub result: RetrievalResult,
    pub annotations: Vec<String>,
    /// Top-1 candidate index per segment.
    pub predictions: Vec<usize>,
}

/// Embeds every segment's frames with the image head and every distinct
/// annotation with the text head, then scores Top-1/Top-3 retrieval.
pub fn evaluate_concepts(model: &DualEncoder, set: &PairedSegments) -> Result<ConceptEvaluation> {
    if set.is_empty() {
        return Err(Error::Domain("cannot evaluate an empty split".into()));
    }
    let pool = set.candidate_pool();
    let frame_views: Vec<_> = set.frames.iter().map(|f| f.view()).collect();
    let text_views: Vec<_> = pool.first_segment.iter().map(|&i| set.texts[i].view()).collect();
    let queries = DualEncoder::embed_all(&model.image, &frame_views)?;
    let candidates = DualEncoder::embed_all(&model.text, &text_views)?;
    let result = RetrievalResult::compute(queries.view(), candidates.view(), &pool.truth, true)?;
    let predictions = result
        .ranked
        .as_ref()
        .expect("rankings kept")
        .iter()
        .map(|r| r[0])
        .collect();
    Ok(ConceptEvaluation {
        result,
        annotations: pool.annotations,
        predictions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn self_retrieval() {
        let x = array![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        assert_eq!(
            topk_retrieval_accuracy(x.view(), x.view(), &[0, 1, 2], 1).unwrap(),
            1.0
        );
    }

    #[test]
    fn full_pool_top_k_is_one() {
        let q = array![[1.0, 0.0], [0.0, 1.0]];
        let c = array![[0.0, 1.0], [1.0, 0.0], [0.6, 0.8]];
        assert_eq!(topk_retrieval_accuracy(q.view(), c.view(), &[0, 1], 3).unwrap(), 1.0);
        assert!(topk_retrieval_accuracy(q.view(), c.view(), &[0, 1], 4).is_err());
    }

    #[test]
    fn ties_go_to_the_lower_index() {
        assert_eq!(rank_of_truth(&[0.5, 0.5, 0.1], 0), 0);
        assert_eq!(rank_of_truth(&[0.5, 0.5, 0.1], 1), 1);
        assert_eq!(rank_of_truth(&[0.1, 0.9, 0.5], 0), 2);
    }

    #[test]
    fn truth_out_of_range() {
        let x = array![[1.0, 0.0]];
        assert!(matches!(
            topk_retrieval_accuracy(x.view(), x.view(), &[1], 1),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn top1_never_exceeds_top3() {
        let q = array![[1.0, 0.0], [0.0, 1.0], [0.6, 0.8]];
        let c = array![[0.0, 1.0], [1.0, 0.0], [0.8, 0.6], [-1.0, 0.0]];
        let r = RetrievalResult::compute(q.view(), c.view(), &[2, 3, 0], false).unwrap();
        assert!(r.top1 <= r.top3);
        assert_eq!(r.candidate_count, 4);
    }
}
