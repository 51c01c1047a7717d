//! Radial p-Green functions on warped-product 3-manifolds, the
//! `(|∇u|² + ε)^{(p-2)/2}`-regularized p-Laplace problem, and checkers for
//! the level-set monotonicity and comparison inequalities of `F(t) = ∫_{u=t} |∇u|²`.

pub mod error;
pub mod geometry;
pub mod green;
pub mod monotonicity;
pub mod numerics;
pub mod regularized;
pub mod table;

pub use error::{Error, Result};
