//! Dense tensors, a reverse-mode tape, initialization, dropout and Adam.

mod adam;
mod graph;
mod init;
mod linear;
mod tensor;

pub use adam::{adam_step, Adam, AdamState};
pub use graph::{Graph, Op, TapeNode, Var};
pub use init::{dropout, init_params};
pub use linear::{Linear, LinearVars, Parameterized};
pub use tensor::Tensor;
