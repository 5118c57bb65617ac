//! Polarization entanglement of bi-photons from two-crystal, pulse-pumped
//! down-conversion, and its restoration by spectral filtering.
//!
//! The crate is organised bottom-up:
//!
//! - [`qstate`]: kets, 4×4 density matrices, Hermitian eigen-decomposition and
//!   the density-matrix JSON format.
//! - [`spdc`]: Gaussian wave packets, the coherence factor between the two
//!   crystals' emission amplitudes, and the reduced polarization state it implies.
//! - [`measurement`]: joint projective settings, Born probabilities, Poisson
//!   coincidence simulation, polarization correlations and CHSH values.
//! - [`tomography`]: linear inversion and maximum-likelihood reconstruction.
//! - [`entanglement`]: concurrence, von Neumann entropy and the combined report.
//!
//! All basis-dependent quantities use the order `|HH⟩, |HV⟩, |VH⟩, |VV⟩`
//! with Alice as the major index.

#![forbid(unsafe_code)]
// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod entanglement;
mod error;
pub mod measurement;
pub mod qstate;
pub mod spdc;
pub mod tomography;

pub use error::{Error, Result};
pub use num_complex::Complex64;
