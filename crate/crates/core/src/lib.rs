//! Optimal control of switched nonlinear systems by relaxation,
//! conditional-gradient descent and frequency-modulation projection.

pub mod adjoint;
pub mod artifacts;
pub mod config;
pub mod error;
pub mod model;
pub mod plot;
pub mod project;
pub mod signal;
pub mod sim;
pub mod solver;
pub mod topology;
pub mod verify;

pub use error::{Error, Result};
