//! Spectral Galerkin simulator for the 3D globally modified (hyperviscous)
//! Navier-Stokes equations driven by transport noise on the unit torus.
//!
//! The crate is organised bottom-up:
//!
//! - [`spectral`]: truncated Fourier representation of real, divergence-free,
//!   mean-zero velocity fields, Sobolev norms, Leray projection and the
//!   dealiased pseudo-spectral advection products.
//! - [`noise`]: the divergence-free noise basis, the radial coefficient
//!   family `θⁿ`, seeded complex Brownian increments and the transport term.
//! - [`corrector`]: the Stratonovich-Itô corrector and its deviation from
//!   `(3ν/5)Δ`.
//! - [`dynamics`]: cut-off, drifts and the time steppers for the stochastic
//!   Galerkin system, the deterministic limit equation and the controlled
//!   skeleton equation.
//! - [`experiments`]: Monte Carlo and deterministic verification harnesses.
//! - [`io`]: configuration files, run manifests, NDJSON trajectories and
//!   binary snapshots.

pub mod corrector;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod io;
pub mod noise;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result};
