//! Capacity of the amplitude-constrained N×N complex Gaussian MIMO channel.
//!
//! The capacity-achieving input is a finite mixture of spheres ("shells")
//! centred at the origin, so the whole problem reduces to a one-dimensional
//! amplitude PMF. This crate evaluates the quantities that problem needs
//! (noncentral chi-squared laws, the output mixture density, the information
//! density and its derivative) and runs the nested solver that alternates a
//! Blahut–Arimoto probability update with gradient ascent on the shell radii,
//! bracketing the capacity between a lower bound and a dual upper bound.
//!
//! Everything here is pure computation: `no_std` with `alloc`, no IO.
//! Units are nats throughout; convert with [`nats_to_bits`] at the boundary.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;
pub mod infodensity;
pub mod model;
pub mod quadrature;
pub mod solver;
pub mod specfun;

pub use error::{Error, Result};
pub use infodensity::InfoDensityContext;
pub use model::{ChannelParams, InputPmf};
pub use quadrature::{Grid, QuadratureSpec};
pub use solver::{CapacityResult, InnerConfig, OuterConfig};
pub use specfun::Chi2Params;

/// Convert nats to bits.
#[inline]
pub fn nats_to_bits(x: f64) -> f64 {
    x / core::f64::consts::LN_2
}

/// Convert bits to nats.
#[inline]
pub fn bits_to_nats(x: f64) -> f64 {
    x * core::f64::consts::LN_2
}
