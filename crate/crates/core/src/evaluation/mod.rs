//! Top-k concept retrieval and ROUGE summary scoring.

mod retrieval;
mod rouge;

pub use retrieval::{evaluate_concepts, rank_of_truth, topk_retrieval_accuracy, ConceptEvaluation, RetrievalResult};
pub use rouge::{
    render_rouge_table, rouge_l, rouge_n, score_summary_corpus, tokenize, CorpusRouge, Prf,
    RougeScore, RougeVariant,
};
