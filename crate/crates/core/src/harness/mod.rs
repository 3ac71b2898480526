//! Synthetic corpora, corpus files, and heuristic-versus-oracle evaluation.

pub mod corpus;
pub mod eval;
pub mod generate;

pub use corpus::{parse_corpus, parse_instance, read_corpus, write_corpus};
pub use eval::{
    compare_prices, eval_allocation, eval_prices, summarize_prices, EvalOptions, EvalReport,
    PricePair,
};
pub use generate::{generate, GenConfig};
