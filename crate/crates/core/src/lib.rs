//! Radial large solutions of `Δu + ∇h·∇u = f(|x|, u)`.
//!
//! The radial problem is mapped by `t = p(r)` onto the singular ODE
//! `z'' = F(t, z)` on `t < 0` ([`transform`]), integrated and shot with
//! [`odesolver`], checked against sufficient conditions in [`criteria`]
//! and cross-validated by a polar finite-difference solver in
//! [`pde_oracle`].

// `!(x > 0.0)` deliberately treats NaN as a failure.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod criteria;
pub mod error;
pub mod exprdsl;
pub mod interp;
pub mod odesolver;
pub mod pde_oracle;
pub mod quadrature;
pub mod transform;

pub use error::{Error, Result};
