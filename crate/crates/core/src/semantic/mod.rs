//! Semantic spaces (word vectors, attributes, the similarity-SVD subspace),
//! vocabulary neighbor search and the Gaussian width rule.

mod space;
mod svd;
mod wordvec;

pub use space::{
    build_similarity, cosine, euclidean, fallback_sigma, nearest_vocab, nearest_vocab_by, norm, sigma_for,
    sigma_for_by, ClassSimilarityMatrix, Metric, Neighbor, SemanticSpace, SpaceKind, Vocabulary, SIGMA_FRACTION,
};
pub use svd::{jacobi_svd, svd_space, Svd, MAX_SWEEPS, OFF_DIAGONAL_TOL};
pub use wordvec::{load_word_vectors, save_word_vectors, WordVectors};
