//! Scores summaries with ROUGE-1, ROUGE-2 and ROUGE-L and prints the corpus
//! table.

use semaug::evaluation::{render_rouge_table, rouge_l, rouge_n, score_summary_corpus};

fn main() -> semaug::Result<()> {
    let (pred, reference) = ("the cat sat", "the cat sat down");
    for s in [rouge_n(pred, reference, 1), rouge_n(pred, reference, 2), rouge_l(pred, reference)] {
        println!("{:?}: p {:.4} r {:.4} f {:.4}", s.variant, s.precision, s.recall, s.f1);
    }

    let references = ["melt the butter then add onions", "boil the pasta in salted water"];
    let with_concepts = ["melt the butter and add onions", "boil pasta in water"];
    let without = ["cook something in a pan", "make the pasta"];
    let pairs = |preds: &[&str]| -> Vec<(String, String)> {
        preds.iter().zip(references).map(|(p, r)| (p.to_string(), r.to_string())).collect()
    };
    let rows = vec![
        ("with concepts".to_string(), score_summary_corpus(&pairs(&with_concepts))?),
        ("transcript only".to_string(), score_summary_corpus(&pairs(&without))?),
    ];
    print!("{}", render_rouge_table(&rows));
    Ok(())
}
