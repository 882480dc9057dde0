//! Numerical building blocks: bracketed root finding, derivative-free
//! minimization, adaptive quadrature, Gauss-Legendre rules and the
//! lattice integrator behind the multivariate normal/t orthant probabilities.

pub mod mvn;
pub mod special;
pub mod optim;
pub mod quad;
pub mod roots;

pub use optim::{bfgs, minimize_bounded_scalar, nelder_mead, numerical_hessian, BfgsOptions, NelderMeadOptions, OptimResult};
pub use quad::{gauss_legendre, integrate};
pub use roots::{brent_root, expand_bracket};
