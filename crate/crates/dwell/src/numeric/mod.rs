//! Shared numerical building blocks: quadrature, tridiagonal eigensolver,
//! complex log-gamma.

pub mod gamma;
pub mod quad;
pub mod tridiag;
