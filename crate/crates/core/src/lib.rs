//! Generating functions of formal symplectic groupoids over `R^d` for
//! polynomial Poisson structures.
//!
//! The crate enumerates Kontsevich graphs, estimates their weights by
//! deterministic seeded Monte Carlo (with an adaptive-quadrature oracle at
//! first order), assembles the deformed generating function as a tree sum,
//! and verifies the associativity equation, the groupoid axioms, the CBH
//! reduction for linear structures and the star-product exponential formula
//! at truncated order.

pub mod cayley;
pub mod cbh;
pub mod error;
pub mod genfun;
pub mod graphs;
pub mod groupoid;
pub mod io;
pub mod momentum;
pub mod poly;
pub mod scalar;
pub mod star;
pub mod symbols;
pub mod weights;

pub use error::Error;
pub use scalar::{Rat, Scalar, WPoly};
