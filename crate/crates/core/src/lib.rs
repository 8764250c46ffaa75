//! Numerical toolkit for periodically perturbed ODE systems: Malkin and
//! Melnikov bifurcation functions, the generalized averaging operator,
//! planar degree computations and shooting-based verification of the
//! predicted periodic solutions.

pub mod biffun;
pub mod continuation;
pub mod cycles;
pub mod degree;
pub mod error;
pub mod flow;
pub mod integrate;
pub mod linalg;
pub mod quad;
pub mod system;
pub mod systems;

pub use error::{Error, Result};
pub use integrate::{DenseTrajectory, IntegratorConfig, Method};
pub use system::{Field, OdeSystem, PerturbationForm, PerturbedSystem, Rhs};
