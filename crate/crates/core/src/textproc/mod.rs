//! Tokenization, Porter stemming and tf-idf.

mod porter;
mod tfidf;
mod tokenize;

pub use porter::porter_stem;
pub use tfidf::{fit_tfidf, transform_tfidf, TfidfModel, TfidfParams};
pub use tokenize::{token_count, tokenize, TokenStream};
