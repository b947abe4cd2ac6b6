//! Gradient-based and hybrid comparison systems: frozen and online linear
//! heads, the continual-learning trio (EWC, A-GEM, LwF), one-vs-rest online
//! logistic regression, and the retrieval/parametric interpolation hybrid.

mod agem;
mod ewc;
mod knnlm;
mod linear;
mod lwf;
mod ovr;

pub use agem::{agem_step, project_gradient, AgemOutcome, AgemSystem, MemoryBuffer};
pub use ewc::{ewc_loss, ewc_step, fisher_estimate, EwcSystem, FisherDiagonal};
pub use knnlm::{knnlm_predict, ClassScore, HybridConfig, KnnLmSystem};
pub use linear::{
    seed_train, softmax, softmax_with_temperature, LinearHead, OnlineLinear, StaticLinear,
    SEED_EPOCHS, SEED_LR,
};
pub use lwf::{lwf_loss, lwf_step, LwfSystem};
pub use ovr::{OvrLogReg, OvrSystem};
