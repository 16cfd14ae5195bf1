use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RougeVariant {
    /// N-gram overlap of the given order.
    N(usize),
    /// Longest common subsequence.
    L,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeScore {
    pub variant: RougeVariant,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl RougeScore {
    fn from_overlap(variant: RougeVariant, overlap: usize, pred_total: usize, ref_total: usize) -> Self {
        let ratio = |total: usize| if total == 0 { 0.0 } else { overlap as f64 / total as f64 };
        Self::from_pr(variant, ratio(pred_total), ratio(ref_total))
    }

    fn from_pr(variant: RougeVariant, precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            variant,
            precision,
            recall,
            f1,
        }
    }

    pub fn prf(&self) -> Prf {
        Prf {
            p: self.precision,
            r: self.recall,
            f: self.f1,
        }
    }
}

/// Lowercased maximal alphanumeric runs.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// ROUGE-N with clipped n-gram counts.
pub fn rouge_n(prediction: &str, reference: &str, n: usize) -> RougeScore {
    assert!(n >= 1, "ROUGE-N needs n >= 1");
    let pred = tokenize(prediction);
    let refr = tokenize(reference);
    let pred_counts = ngram_counts(&pred, n);
    let ref_counts = ngram_counts(&refr, n);
    let overlap = pred_counts
        .iter()
        .map(|(g, &c)| c.min(ref_counts.get(g).copied().unwrap_or(0)))
        .sum();
    RougeScore::from_overlap(
        RougeVariant::N(n),
        overlap,
        pred.len().saturating_sub(n - 1),
        refr.len().saturating_sub(n - 1),
    )
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L over the longest common token subsequence.
pub fn rouge_l(prediction: &str, reference: &str) -> RougeScore {
    let pred = tokenize(prediction);
    let refr = tokenize(reference);
    RougeScore::from_overlap(RougeVariant::L, lcs_len(&pred, &refr), pred.len(), refr.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub p: f64,
    pub r: f64,
    pub f: f64,
}

/// Mean per-pair ROUGE scores over a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusRouge {
    #[serde(rename = "R1")]
    pub r1: Prf,
    #[serde(rename = "R2")]
    pub r2: Prf,
    #[serde(rename = "RL")]
    pub rl: Prf,
}

pub fn score_summary_corpus<P, R>(pairs: &[(P, R)]) -> Result<CorpusRouge>
where
    P: AsRef<str>,
    R: AsRef<str>,
{
    if pairs.is_empty() {
        return Err(Error::Domain("cannot score an empty summary corpus".into()));
    }
    let mut sums = [[0.0f64; 3]; 3];
    for (pred, refr) in pairs {
        let (pred, refr) = (pred.as_ref(), refr.as_ref());
        let scores = [rouge_n(pred, refr, 1), rouge_n(pred, refr, 2), rouge_l(pred, refr)];
        for (acc, s) in sums.iter_mut().zip(scores) {
            acc[0] += s.precision;
            acc[1] += s.recall;
            acc[2] += s.f1;
        }
    }
    let n = pairs.len() as f64;
    let mean = |s: [f64; 3]| Prf {
        p: s[0] / n,
        r: s[1] / n,
        f: s[2] / n,
    };
    Ok(CorpusRouge {
        r1: mean(sums[0]),
        r2: mean(sums[1]),
        rl: mean(sums[2]),
    })
}

/// Text table with one row per labelled result, scores as `P/R/F` to two
/// decimals.
pub fn render_rouge_table(rows: &[(String, CorpusRouge)]) -> String {
    let cell = |s: &Prf| format!("{:.2}/{:.2}/{:.2}", s.p, s.r, s.f);
    let width = rows
        .iter()
        .map(|(l, _)| l.chars().count())
        .chain(std::iter::once(5))
        .max()
        .unwrap();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<width$} | {:<14} | {:<14} | {:<14}",
        "Model", "R-1 (P/R/F)", "R-2 (P/R/F)", "R-L (P/R/F)"
    );
    let _ = writeln!(out, "{}", "-".repeat(width + 54));
    for (label, s) in rows {
        let _ = writeln!(
            out,
            "{:<width$} | {:<14} | {:<14} | {:<14}",
            label,
            cell(&s.r1),
            cell(&s.r2),
            cell(&s.rl)
        );
    }
    out
}
