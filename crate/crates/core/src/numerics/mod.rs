//! Numerical building blocks shared by the analysis modules.

pub mod geometry;
pub mod interp;
pub mod quad;
pub mod quadratic;
pub mod rk;
pub mod roots;
pub mod tridiag;
