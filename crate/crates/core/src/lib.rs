//! Classical and quantum dynamics of a driven optomechanical cavity with two
//! mechanical mirrors, one of them stiffness-modulated.
//!
//! * [`meanfield`]: classical amplitudes and the stationary operating point.
//! * [`gaussian`]: linearized fluctuations, covariance propagation and
//!   correlation measures.
//! * [`lindblad`]: full master equation in a truncated Fock space.

pub mod config;
pub mod error;
pub mod gaussian;
pub mod lindblad;
pub mod meanfield;
pub mod model;
pub mod ode;
pub mod trajectory;

pub use error::{Error, Result};
pub use model::SystemParams;
pub use trajectory::{TimeGrid, Trajectory};
