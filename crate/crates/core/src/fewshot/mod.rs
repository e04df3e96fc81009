//! Episodic N-way K-shot evaluation over novel classes.

mod classifiers;
mod episode;
mod eval;

pub use classifiers::{knn_classify, lr_objective, lr_train, svm_train, Classifier, LinearModel, LrConfig, SvmConfig};
pub use episode::{sample_episode, Episode, Protocol};
pub use eval::{ci95, evaluate, EvalAugmentation, EvalOptions, EvalReport};
