//! Domain types and abstract contracts consumed by every other module.

pub mod data;
pub mod loss;
pub mod param;
pub mod prior;

pub use data::{Dataset, DatasetMeta};
pub use loss::{
    average_loss, loss_scale_estimate, ForwardModel, IdentityForward, LossModel, ResidualForm,
};
pub use param::{ParameterDomain, ParameterVector};
pub use prior::PriorModel;
