//! Loss terms, Adam, the learning-rate schedule and the joint training loop.

mod adam;
mod batch;
mod losses;
mod model;
mod trainer;

pub use adam::{Adam, LrSchedule};
pub use batch::{Batch, BatchItem, BatchPlan};
pub use losses::{
    degeneracy_penalty, dynamics_norm_squared, evaluate_losses, loss_and_gradient, loss_deg, loss_int, loss_jac, loss_mod,
    loss_rec, record_losses, Active, JacobianVariant, LossNodes, LossOptions, LossValues, LossWeights,
};
pub use model::{AeModel, BoundAe, BoundModel, LatentModel};
pub use trainer::{train, CheckpointEvent, HistoryRow, TrainHistory, TrainSpec, Trainer};

#[cfg(test)]
mod tests;
