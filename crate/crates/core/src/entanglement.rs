//! Entanglement and mixedness of two-photon polarization states.

use std::f64::consts::LN_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::measurement::{chsh_fixed, chsh_max, AngleSet};
use crate::qstate::{kron, pauli, DensityMatrix, Operator4, PSD_TOL};
use crate::Result;

/// Eigenvalues of ρ below this are treated as rounding noise when taking
/// square roots.
const SQRT_FLOOR: f64 = 4.0 * f64::EPSILON;

/// Wootters concurrence `max(0, λ₁ − λ₂ − λ₃ − λ₄)`.
///
/// The `λᵢ` are the square roots of the eigenvalues of `√ρ ρ̃ √ρ`, with
/// `ρ̃ = (σ_y⊗σ_y) ρ* (σ_y⊗σ_y)`. They are computed as the singular values of
/// `√ρ √ρ̃`, which avoids taking square roots of near-zero eigenvalues.
pub fn concurrence(rho: &DensityMatrix) -> f64 {
    let eig = rho.eigen();
    let sqrt_rho = eig.reconstruct_with(|v| if v > SQRT_FLOOR { v.sqrt() } else { 0.0 });
    let flip = spin_flip();
    // √ρ̃ = (σy⊗σy)(√ρ)*(σy⊗σy) because σy⊗σy is real and unitary.
    let sqrt_tilde = flip * sqrt_rho.map(|z| z.conj()) * flip;
    let product = sqrt_rho * sqrt_tilde;
    let mut lambdas: Vec<f64> = product.singular_values().iter().copied().collect();
    lambdas.sort_by(|a, b| b.total_cmp(a));
    (lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3]).clamp(0.0, 1.0)
}

fn spin_flip() -> Operator4 {
    kron(&pauli(2), &pauli(2))
}

/// `ρ̃ = (σ_y⊗σ_y) ρ* (σ_y⊗σ_y)`.
pub fn spin_flipped(rho: &DensityMatrix) -> Operator4 {
    let flip = spin_flip();
    flip * rho.matrix().map(|z: Complex64| z.conj()) * flip
}

/// `−Tr[ρ ln ρ]` in nats.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    entropy_of_spectrum(&rho.eigenvalues())
}

fn entropy_of_spectrum(values: &[f64]) -> f64 {
    values
        .iter()
        .map(|&v| if (PSD_TOL..0.0).contains(&v) { 0.0 } else { v })
        .filter(|&v| v > 0.0)
        .map(|v| -v * v.ln())
        .sum::<f64>()
        .max(0.0)
}

/// Summary of one state's entanglement, mixedness and Bell-CHSH behaviour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntanglementReport {
    pub concurrence: f64,
    pub entropy_nats: f64,
    pub entropy_bits: f64,
    /// Descending.
    pub eigenvalues: [f64; 4],
    /// CHSH value at the report's polarizer angles.
    pub s_fixed: f64,
    /// Maximum CHSH value over all measurement directions.
    pub s_max: f64,
    /// `s_fixed > 2`.
    pub violates_chsh: bool,
}

impl EntanglementReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub fn report(rho: &DensityMatrix) -> Result<EntanglementReport> {
    report_with_angles(rho, &AngleSet::default())
}

pub fn report_with_angles(rho: &DensityMatrix, angles: &AngleSet) -> Result<EntanglementReport> {
    let eigenvalues = rho.eigenvalues();
    let entropy_nats = entropy_of_spectrum(&eigenvalues);
    let s_fixed = chsh_fixed(rho, angles)?;
    Ok(EntanglementReport {
        concurrence: concurrence(rho),
        entropy_nats,
        entropy_bits: entropy_nats / LN_2,
        eigenvalues,
        s_fixed,
        s_max: chsh_max(rho),
        violates_chsh: s_fixed > 2.0,
    })
}
