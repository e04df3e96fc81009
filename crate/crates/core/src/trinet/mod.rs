//! The dual encoder/decoder between multi-level features and a semantic
//! space, its loss, joint training with the extractor, and checkpoints.

mod checkpoint;
mod config;
mod model;
mod train;

pub use checkpoint::{load_model, save_model, Checkpoint, TRIN_MAGIC, TRIN_VERSION};
pub use config::{default_hidden, Reduction, TriNetConfig};
pub use model::{BoundTriNet, LossVars, Mode, TriNetModel};
pub use train::{
    joint_loss, joint_loss_graph, train, trinet_loss_graph, BaseClasses, EpochLog, JointLoss, JointVars, TrainReport,
    Trainee,
};
