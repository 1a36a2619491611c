//! Numerical building blocks shared by the analysis modules.

pub mod fd;
pub mod ode;
pub mod quad;
pub mod roots;
