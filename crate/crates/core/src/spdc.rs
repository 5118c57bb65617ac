//! Two-crystal, pulse-pumped down-conversion.
//!
//! The crystals emit `|HH⟩` and `|VV⟩` pairs whose temporal wave packets are
//! identical up to a delay `τ`. Tracing out the wave packet leaves the
//! polarization state
//!
//! ```text
//! ρ = ½ (|HH⟩⟨HH| + |VV⟩⟨VV| + C |HH⟩⟨VV| + C* |VV⟩⟨HH|)
//! ```
//!
//! where `C` is the normalized overlap of the two packets. Narrower spectral
//! filters stretch the packets, raise `C` and restore entanglement.
//!
//! Times are in femtoseconds and angular frequencies in rad/fs. Spectra are
//! written in the envelope frame (carrier removed), so a zero-chirp packet
//! gives a real, positive `C`.

use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::entanglement::{report, EntanglementReport};
use crate::qstate::{DensityMatrix, Operator4};
use crate::{Error, Result};

pub const DEFAULT_TAU_FS: f64 = 100.0;
pub const DEFAULT_CENTER_NM: f64 = 532.0;
/// Speed of light in nm/fs.
pub const SPEED_OF_LIGHT_NM_PER_FS: f64 = 299.792_458;
/// Time-bandwidth product of a transform-limited Gaussian (intensity FWHMs).
pub const GAUSSIAN_TIME_BANDWIDTH: f64 = 0.441;

/// Gaussian bi-photon wave packet with amplitude envelope
/// `A(t) ∝ exp(−t²/(2σ²))` and zero chirp, plus the inter-crystal delay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WavePacketSpec {
    sigma_t_fs: f64,
    tau_fs: f64,
}

impl WavePacketSpec {
    pub fn new(sigma_t_fs: f64, tau_fs: f64) -> Result<Self> {
        if !(sigma_t_fs > 0.0) || !sigma_t_fs.is_finite() {
            return Err(Error::Parameter(format!(
                "wave-packet width must be positive, got {sigma_t_fs} fs"
            )));
        }
        if !tau_fs.is_finite() {
            return Err(Error::Parameter(format!(
                "delay must be finite, got {tau_fs} fs"
            )));
        }
        // C depends on |τ| only.
        Ok(WavePacketSpec {
            sigma_t_fs,
            tau_fs: tau_fs.abs(),
        })
    }

    pub fn sigma_t_fs(&self) -> f64 {
        self.sigma_t_fs
    }

    pub fn tau_fs(&self) -> f64 {
        self.tau_fs
    }

    /// Matching spectral amplitude, `|g(ω)|² ∝ exp(−ω²σ²)`.
    pub fn spectrum(&self) -> SpectralAmplitude {
        SpectralAmplitude::gaussian(self.sigma_t_fs).expect("width already validated")
    }
}

/// Overlap `C` of the two crystals' wave packets, `|C| ≤ 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherenceFactor(Complex64);

impl CoherenceFactor {
    pub fn new(value: Complex64) -> Result<Self> {
        if !value.is_finite() || value.norm() > 1.0 + 1e-12 {
            return Err(Error::Parameter(format!(
                "coherence factor must satisfy |C| <= 1, got {value}"
            )));
        }
        Ok(CoherenceFactor(value))
    }

    pub fn real(value: f64) -> Result<Self> {
        CoherenceFactor::new(Complex64::new(value, 0.0))
    }

    pub fn value(&self) -> Complex64 {
        self.0
    }

    pub fn magnitude(&self) -> f64 {
        self.0.norm()
    }
}

/// Closed-form overlap of two delayed Gaussian packets, `exp(−τ²/(4σ²))`.
pub fn coherence_gaussian(spec: &WavePacketSpec) -> Result<CoherenceFactor> {
    let tau = spec.tau_fs;
    let sigma = spec.sigma_t_fs;
    CoherenceFactor::real((-(tau * tau) / (4.0 * sigma * sigma)).exp())
}

/// Width `σ` for which a delay `τ` produces the coherence `c_target`.
pub fn fit_effective_width(c_target: f64, tau_fs: f64) -> Result<f64> {
    if !(c_target > 0.0 && c_target < 1.0) {
        return Err(Error::Parameter(format!(
            "target coherence must lie in (0, 1), got {c_target}"
        )));
    }
    if !(tau_fs > 0.0) || !tau_fs.is_finite() {
        return Err(Error::Parameter(format!(
            "delay must be positive, got {tau_fs} fs"
        )));
    }
    Ok(tau_fs / (2.0 * (-c_target.ln()).sqrt()))
}

/// Transform-limited Gaussian width for an interference filter of FWHM
/// `bandwidth_nm` at `center_nm`: `Δν = cΔλ/λ²`, `Δt = 0.441/Δν` (intensity
/// FWHM) and `σ = Δt/(2√ln2)` for the amplitude envelope.
///
/// This is the textbook conversion. It does not reproduce the catalogued
/// coherence values (see [`FilterEntry`]); it is exposed for comparison.
pub fn transform_limited_sigma_t(bandwidth_nm: f64, center_nm: f64) -> Result<f64> {
    if !(bandwidth_nm > 0.0) || !(center_nm > 0.0) {
        return Err(Error::Parameter(format!(
            "bandwidth and center wavelength must be positive, got {bandwidth_nm} nm at {center_nm} nm"
        )));
    }
    let delta_nu = SPEED_OF_LIGHT_NM_PER_FS * bandwidth_nm / (center_nm * center_nm);
    let delta_t = GAUSSIAN_TIME_BANDWIDTH / delta_nu;
    Ok(delta_t / (2.0 * LN_2.sqrt()))
}

/// Shape of a spectral amplitude `g(ω)`.
#[derive(Debug, Clone, PartialEq)]
pub enum SpectralShape {
    /// `|g|² = σ/√π · exp(−ω²σ²)`, the spectrum of a Gaussian packet of width σ.
    Gaussian { sigma_t_fs: f64 },
    /// `|g|² = 1/Δω` on `[−Δω/2, Δω/2]`.
    TopHat { full_width: f64 },
    /// Samples on a uniform grid spanning the support.
    Tabulated { amplitudes: Vec<Complex64> },
}

/// Complex spectral amplitude on a finite support `[omega_min, omega_max]`,
/// normalized so that `∫|g|² dω = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralAmplitude {
    shape: SpectralShape,
    omega_min: f64,
    omega_max: f64,
    n_points: usize,
}

const DEFAULT_GRID_POINTS: usize = 257;
const GAUSSIAN_SUPPORT_STDS: f64 = 8.0;
const QUADRATURE_TARGET: f64 = 1e-8;
const QUADRATURE_LIMIT: f64 = 1e-6;
const MAX_DOUBLINGS: usize = 20;

impl SpectralAmplitude {
    /// Spectrum of a zero-chirp Gaussian packet, truncated at ±8 standard
    /// deviations of `|g|²`.
    pub fn gaussian(sigma_t_fs: f64) -> Result<Self> {
        if !(sigma_t_fs > 0.0) || !sigma_t_fs.is_finite() {
            return Err(Error::Parameter(format!(
                "wave-packet width must be positive, got {sigma_t_fs} fs"
            )));
        }
        let power_std = 1.0 / (sigma_t_fs * 2f64.sqrt());
        let half = GAUSSIAN_SUPPORT_STDS * power_std;
        Ok(SpectralAmplitude {
            shape: SpectralShape::Gaussian { sigma_t_fs },
            omega_min: -half,
            omega_max: half,
            n_points: DEFAULT_GRID_POINTS,
        })
    }

    pub fn top_hat(full_width: f64) -> Result<Self> {
        if !(full_width > 0.0) || !full_width.is_finite() {
            return Err(Error::Parameter(format!(
                "top-hat width must be positive, got {full_width}"
            )));
        }
        Ok(SpectralAmplitude {
            shape: SpectralShape::TopHat { full_width },
            omega_min: -0.5 * full_width,
            omega_max: 0.5 * full_width,
            n_points: DEFAULT_GRID_POINTS,
        })
    }

    /// Uniformly sampled amplitudes; they are rescaled so the trapezoid
    /// estimate of `∫|g|²` is exactly one.
    pub fn tabulated(omega_min: f64, omega_max: f64, amplitudes: Vec<Complex64>) -> Result<Self> {
        let n = amplitudes.len();
        if n < 3 || !(omega_max > omega_min) {
            return Err(Error::Parameter(
                "tabulated spectrum needs at least 3 samples on a non-empty interval".into(),
            ));
        }
        let h = (omega_max - omega_min) / (n - 1) as f64;
        let norm = trapezoid(h, amplitudes.iter().map(|a| a.norm_sqr()));
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Parameter("tabulated spectrum has zero power".into()));
        }
        let scale = norm.sqrt();
        let amplitudes = amplitudes.into_iter().map(|a| a / scale).collect();
        Ok(SpectralAmplitude {
            shape: SpectralShape::Tabulated { amplitudes },
            omega_min,
            omega_max,
            n_points: n,
        })
    }

    pub fn shape(&self) -> &SpectralShape {
        &self.shape
    }

    pub fn support(&self) -> (f64, f64) {
        (self.omega_min, self.omega_max)
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// `|g(ω)|²` for the closed-form shapes. `None` for tabulated data.
    fn power_at(&self, omega: f64) -> Option<f64> {
        match self.shape {
            SpectralShape::Gaussian { sigma_t_fs } => {
                let x = omega * sigma_t_fs;
                Some(sigma_t_fs / PI.sqrt() * (-x * x).exp())
            }
            SpectralShape::TopHat { full_width } => {
                if omega.abs() <= 0.5 * full_width {
                    Some(1.0 / full_width)
                } else {
                    Some(0.0)
                }
            }
            SpectralShape::Tabulated { .. } => None,
        }
    }

    /// `(∫|g|² e^{iωτ} dω, ∫|g|² dω)` on a grid of `n` points.
    fn integrate(&self, tau: f64, n: usize) -> (Complex64, f64) {
        let h = (self.omega_max - self.omega_min) / (n - 1) as f64;
        let omega = |k: usize| self.omega_min + h * k as f64;
        match &self.shape {
            SpectralShape::Tabulated { amplitudes } => {
                let stride = (self.n_points - 1) / (n - 1);
                let power = (0..n).map(|k| amplitudes[k * stride].norm_sqr());
                let norm = trapezoid(h, power.clone());
                let weighted = (0..n).map(|k| {
                    Complex64::from_polar(amplitudes[k * stride].norm_sqr(), omega(k) * tau)
                });
                (trapezoid_c(h, weighted), norm)
            }
            _ => {
                let power: Vec<f64> = (0..n)
                    .map(|k| self.power_at(omega(k)).expect("closed form"))
                    .collect();
                let norm = trapezoid(h, power.iter().copied());
                let weighted = power
                    .iter()
                    .enumerate()
                    .map(|(k, &p)| Complex64::from_polar(p, omega(k) * tau));
                (trapezoid_c(h, weighted), norm)
            }
        }
    }
}

fn trapezoid(h: f64, values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len();
    let mut sum = 0.0;
    for (k, v) in values.enumerate() {
        sum += if k == 0 || k + 1 == n { 0.5 * v } else { v };
    }
    sum * h
}

fn trapezoid_c(h: f64, values: impl ExactSizeIterator<Item = Complex64>) -> Complex64 {
    let n = values.len();
    let mut sum = Complex64::new(0.0, 0.0);
    for (k, v) in values.enumerate() {
        sum += if k == 0 || k + 1 == n { v * 0.5 } else { v };
    }
    sum * h
}

/// `C(τ) = ∫|g(ω)|² e^{iωτ} dω / ∫|g(ω)|² dω` by the composite trapezoid rule.
///
/// Closed-form spectra are refined by grid doubling until the normalized
/// value changes by at most 1e-8. Tabulated spectra cannot be refined, so
/// the full grid is compared against every other sample instead. A final
/// change above 1e-6 is reported as [`Error::Accuracy`].
pub fn coherence_numeric(g: &SpectralAmplitude, tau_fs: f64) -> Result<CoherenceFactor> {
    if !tau_fs.is_finite() {
        return Err(Error::Parameter(format!(
            "delay must be finite, got {tau_fs} fs"
        )));
    }
    let estimate = |n: usize| {
        let (num, norm) = g.integrate(tau_fs, n);
        num / norm
    };

    let (value, change) = match g.shape {
        SpectralShape::Tabulated { .. } => {
            let fine = estimate(g.n_points);
            if !(g.n_points - 1).is_multiple_of(2) {
                return Err(Error::Parameter(
                    "tabulated spectrum needs an odd number of samples for the refinement check"
                        .into(),
                ));
            }
            let coarse = estimate((g.n_points - 1) / 2 + 1);
            (fine, (fine - coarse).norm())
        }
        _ => {
            let mut n = g.n_points;
            let mut previous = estimate(n);
            let mut change = f64::INFINITY;
            for _ in 0..MAX_DOUBLINGS {
                n = 2 * n - 1;
                let next = estimate(n);
                change = (next - previous).norm();
                previous = next;
                if change <= QUADRATURE_TARGET {
                    break;
                }
            }
            (previous, change)
        }
    };
    if change > QUADRATURE_LIMIT {
        return Err(Error::Accuracy {
            relative_change: change,
        });
    }
    CoherenceFactor::new(value)
}

/// Reduced polarization state of the two-crystal source for coherence `C`.
pub fn rho_from_coherence(c: CoherenceFactor) -> DensityMatrix {
    let mut m = Operator4::zeros();
    let half = Complex64::new(0.5, 0.0);
    m[(0, 0)] = half;
    m[(3, 3)] = half;
    m[(0, 3)] = c.value() * 0.5;
    m[(3, 0)] = c.value().conj() * 0.5;
    DensityMatrix::validate(m).expect("|C| <= 1 gives a legitimate state")
}

/// An interference filter with the coherence values it is known to produce
/// at the default 100 fs delay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterEntry {
    /// FWHM bandwidth in nm, centered at 532 nm.
    pub bandwidth_nm: f64,
    /// Coherence of the Gaussian, transform-limited model.
    pub model_coherence: f64,
    /// Concurrence of the experimentally reconstructed state.
    pub observed_concurrence: f64,
}

impl FilterEntry {
    /// Effective width that reproduces `model_coherence` at the default delay.
    pub fn sigma_t_fs(&self) -> f64 {
        fit_effective_width(self.model_coherence, DEFAULT_TAU_FS).expect("catalog values in (0,1)")
    }

    /// Scenario whose Gaussian width is fitted to the observed concurrence
    /// instead of the model coherence.
    pub fn observed_scenario(&self) -> FilterScenario {
        let sigma = fit_effective_width(self.observed_concurrence, DEFAULT_TAU_FS)
            .expect("catalog values in (0,1)");
        FilterScenario {
            bandwidth_nm: Some(self.bandwidth_nm),
            center_nm: DEFAULT_CENTER_NM,
            tau_fs: DEFAULT_TAU_FS,
            sigma_t_fs: Some(sigma),
        }
    }

    pub fn scenario(&self) -> FilterScenario {
        FilterScenario::bandwidth(self.bandwidth_nm)
    }
}

pub const FILTER_CATALOG: [FilterEntry; 2] = [
    FilterEntry {
        bandwidth_nm: 8.0,
        model_coherence: 0.63,
        observed_concurrence: 0.21,
    },
    FilterEntry {
        bandwidth_nm: 1.2,
        model_coherence: 0.99,
        observed_concurrence: 0.74,
    },
];

pub fn catalog_entry(bandwidth_nm: f64) -> Option<&'static FilterEntry> {
    FILTER_CATALOG
        .iter()
        .find(|e| (e.bandwidth_nm - bandwidth_nm).abs() < 1e-9)
}

fn default_center() -> f64 {
    DEFAULT_CENTER_NM
}

fn default_tau() -> f64 {
    DEFAULT_TAU_FS
}

/// Filter scenario, also the on-disk scenario config format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterScenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth_nm: Option<f64>,
    #[serde(default = "default_center")]
    pub center_nm: f64,
    #[serde(default = "default_tau")]
    pub tau_fs: f64,
    /// Explicit width; overrides the catalog.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_t_fs: Option<f64>,
}

impl FilterScenario {
    pub fn bandwidth(bandwidth_nm: f64) -> Self {
        FilterScenario {
            bandwidth_nm: Some(bandwidth_nm),
            center_nm: DEFAULT_CENTER_NM,
            tau_fs: DEFAULT_TAU_FS,
            sigma_t_fs: None,
        }
    }

    pub fn explicit(sigma_t_fs: f64, tau_fs: f64) -> Self {
        FilterScenario {
            bandwidth_nm: None,
            center_nm: DEFAULT_CENTER_NM,
            tau_fs,
            sigma_t_fs: Some(sigma_t_fs),
        }
    }

    /// Resolves the wave packet: explicit width first, then the catalog.
    pub fn wave_packet(&self) -> Result<WavePacketSpec> {
        let sigma = match (self.sigma_t_fs, self.bandwidth_nm) {
            (Some(s), _) => s,
            (None, Some(bw)) => catalog_entry(bw)
                .ok_or_else(|| {
                    Error::Configuration(format!(
                        "no catalogued filter with bandwidth {bw} nm (known: {}); pass an explicit width",
                        FILTER_CATALOG
                            .iter()
                            .map(|e| format!("{} nm", e.bandwidth_nm))
                            .collect::<Vec<_>>()
                            .join(", ")
                    ))
                })?
                .sigma_t_fs(),
            (None, None) => {
                return Err(Error::Configuration(
                    "scenario needs a filter bandwidth or an explicit width".into(),
                ))
            }
        };
        WavePacketSpec::new(sigma, self.tau_fs)
    }
}

/// Everything the model predicts for one filter scenario.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub scenario: FilterScenario,
    pub wave_packet: WavePacketSpec,
    pub coherence: CoherenceFactor,
    pub rho: DensityMatrix,
    pub report: EntanglementReport,
    /// Width from the transform-limited conversion of the bandwidth, when
    /// a bandwidth is given.
    pub transform_limited_sigma_t_fs: Option<f64>,
}

pub fn predict(scenario: &FilterScenario) -> Result<Prediction> {
    let wave_packet = scenario.wave_packet()?;
    let coherence = coherence_gaussian(&wave_packet)?;
    let rho = rho_from_coherence(coherence);
    let report = report(&rho)?;
    let transform_limited_sigma_t_fs = scenario
        .bandwidth_nm
        .map(|bw| transform_limited_sigma_t(bw, scenario.center_nm))
        .transpose()?;
    Ok(Prediction {
        scenario: scenario.clone(),
        wave_packet,
        coherence,
        rho,
        report,
        transform_limited_sigma_t_fs,
    })
}
