//! Kinetically constrained spin chains viewed as graphs over the many-body
//! occupation basis: exact zero-energy cage states found and verified in
//! integer arithmetic, plus the dense-spectrum and quench-dynamics
//! diagnostics that expose them.

pub mod cages;
pub mod dynamics;
pub mod error;
pub mod graph;
pub mod intmat;
pub mod model;
pub mod spectral;
pub mod zeromodes;

pub use error::FscError;
pub use model::{BasisState, Boundary, ModelSpec};
