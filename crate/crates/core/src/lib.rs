//! Simulation error of bidirectional teleportation under PPT-preserving
//! operations, with linear-program and closed-form cross-checks.

pub mod analytic;
pub mod channels;
pub mod error;
pub mod protocols;
pub mod qmat;
pub mod random;
pub mod sdp;
pub mod simerr;
pub mod states;

pub use error::{BqtError, Result};
pub use qmat::{state_fidelity, LabeledOperator, SubsystemSet, C64};
pub use states::ResourceState;
