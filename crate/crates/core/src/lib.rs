//! Very-weak (H⁻¹) finite element discretization of stochastic porous-medium
//! and fast-diffusion equations
//!
//! ```text
//! du = [Δ(|u|^{p-2} u) + f] dt + σ(u) dW   on (-L, L)^d,  u = 0 on the boundary
//! ```
//!
//! The state is tested against `(-Δ)⁻¹ v`, so every implicit Euler step is a
//! monotone nonlinear system `M (uⁿ - uⁿ⁻¹) + τ K(uⁿ) = τ bⁿ + sⁿ` in which
//! `M` is the H⁻¹ Gram matrix of a piecewise polynomial basis whose inverse
//! Laplacians are known in closed form and have local support. That keeps
//! `M` sparse (at most `5^d` entries per row).
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the CLI and the
//! Monte-Carlo driver live in the companion harness crate.

#![no_std]
#![deny(rust_2018_idioms)]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;
mod math;

pub mod assembly;
pub mod basis;
pub mod grid;
pub mod noise;
pub mod quadrature;
pub mod reference;
pub mod sparse;
pub mod stepper;
pub mod transfer;

pub use error::{Error, Result};

pub use assembly::{Assembler, Field};
pub use basis::{Basis1D, BasisCoefficients};
pub use grid::{Grid, MultiIndex};
pub use noise::{IncrementTable, NoiseModel};
pub use quadrature::QuadratureRule;
pub use reference::BarenblattParams;
pub use sparse::{SparseSymMatrix, SymSolver};
pub use stepper::{Scheme, SchemeConfig, Trajectory};
pub use transfer::PiecewiseConstField;
