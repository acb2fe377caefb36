//! Truncated Fourier representation of divergence-free fields on `T³`.
//!
//! Norm convention: homogeneous `H^s` with weight `(2π|k|)^{2s}`, so that
//! `(-Δ)^Λ` has symbol `(4π²|k|²)^Λ`.

mod field;
mod grid;
mod wave;

pub use field::{
    leray_project, CVec3, SobolevIndex, SpectralVelocity, CZERO3, DIVERGENCE_TOLERANCE,
};
pub(crate) use field::project_mode;
pub(crate) use grid::nonlinear_term_on;
pub use grid::{
    advect_direct, fft_friendly, max_speed, nonlinear_term, required_grid, SpectralGrid,
};
pub use wave::{ModeSet, Slot, WaveVector};

/// Identifier of the norm convention recorded in run manifests.
pub const NORM_CONVENTION: &str = "homogeneous-2pi";
