//! Words-as-classifiers (WAC) grounded lexical semantics.
//!
//! Every vocabulary word owns a binary classifier that scores how well the word fits an
//! entity's feature vector. Expressions are resolved against a scene of candidate entities
//! either by applying each word and then combining the scores, or by first composing the word
//! classifiers into a single classifier and applying that.
//!
//! Module map:
//!
//! - [`data`]: entities, scenes, referring expressions, positional features, JSONL ingestion.
//! - [`scenegen`]: deterministic synthetic scenes with unambiguous referring expressions.
//! - [`classifiers`]: L1 logistic regression, a 3-unit tanh MLP, depth-limited GINI trees, adam.
//! - [`wac`]: vocabulary filtering, negative sampling, per-word training, model persistence.
//! - [`parser`]: stopword removal, relational phrase segmentation, adjective-noun pairs.
//! - [`composition`]: summed predictions, merged MLPs, warm starts, tree grafting, relations.
//! - [`analysis`]: coefficient embeddings, similarity evaluation, t-SNE, DBSCAN, probing.

pub mod analysis;
pub mod classifiers;
pub mod composition;
pub mod data;
pub mod error;
pub mod parser;
pub mod scenegen;
pub mod wac;

mod seed;

pub use error::{Error, Result};
