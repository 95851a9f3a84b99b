//! Vector fields, the staged discrete update and its instrumentation.

pub mod audit;
pub mod fields;
pub mod params;
pub mod step;

pub use audit::Audit;
pub use params::FieldParams;
pub use step::{discrete_step, relaxation_field, residual_norm, Carry, ClosedFrame, StepInput, StepOptions};
