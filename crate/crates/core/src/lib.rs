//! Sectional solver core for the ε-family of generalized coagulation equations.
//!
//! The family interpolates between the Smoluchowski coagulation equation
//! (`ε = 1`) and the Oort-Hulst-Safronov equation (`ε → 0`). Everything in this
//! crate is pure computation: kernels, the geometric size grid, the discrete
//! right-hand sides, an RK4 integrator with a positivity guard, convex gauges
//! and the diagnostics that check moment bounds and weak-form identities along
//! trajectories.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the command line
//! and parallel sweeps live in the companion `coag` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

mod error;
mod math;

pub mod diagnostics;
pub mod gauges;
pub mod integrator;
pub mod kernels;
pub mod operators;
pub mod quadrature;
pub mod sizedomain;
pub mod testfn;

pub use error::{Error, Result};
