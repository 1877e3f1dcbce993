//! Reading word classifiers as word vectors: embeddings, similarity evaluation, t-SNE,
//! DBSCAN clustering and probing classifiers along a synthetic attribute sweep.

mod cluster;
mod dbscan;
mod embedding;
mod probe;
mod similarity;
mod stats;
mod tsne;

pub use cluster::{cluster_embeddings, standardize, WordClusters};
pub use dbscan::{dbscan, ClusterConfig, NOISE};
pub use embedding::{
    cosine, embeddings_to_text, extract_embedding, load_external_embeddings, save_embeddings, wac_embeddings,
    EmbeddingSource, EmbeddingTable,
};
pub use probe::{probe_classifier, probe_to_tsv, HueSweep};
pub use similarity::{
    combine_tables, eval_similarity, load_similarity_pairs, SimilarityPair, SimilarityReport, TableScore,
};
pub use stats::{average_ranks, pearson, spearman};
pub use tsne::{tsne, TsneConfig, TsneResult};
