//! Joint projective polarization measurements and the statistics built on
//! them: Born probabilities, simulated coincidence counts, correlation
//! functions and CHSH values.

use std::fmt;

use nalgebra::{Matrix3, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::qstate::{kron, pauli, tensor, DensityMatrix, Ket2, Ket4, PSD_TOL};
use crate::{Error, Result};

/// A single-photon projection: one of the named states or a linear
/// polarizer angle in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Analyzer {
    H,
    V,
    D,
    R,
    L,
    Linear(f64),
}

impl Analyzer {
    pub fn ket(&self) -> Ket2 {
        match *self {
            Analyzer::H => Ket2::h(),
            Analyzer::V => Ket2::v(),
            Analyzer::D => Ket2::d(),
            Analyzer::R => Ket2::r(),
            Analyzer::L => Ket2::l(),
            Analyzer::Linear(deg) => Ket2::linear(deg),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "H" => Ok(Analyzer::H),
            "V" => Ok(Analyzer::V),
            "D" => Ok(Analyzer::D),
            "R" => Ok(Analyzer::R),
            "L" => Ok(Analyzer::L),
            other => other
                .parse::<f64>()
                .ok()
                .filter(|d| d.is_finite())
                .map(Analyzer::Linear)
                .ok_or_else(|| Error::Format(format!("unknown analyzer {other:?}"))),
        }
    }
}

impl fmt::Display for Analyzer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Analyzer::H => f.write_str("H"),
            Analyzer::V => f.write_str("V"),
            Analyzer::D => f.write_str("D"),
            Analyzer::R => f.write_str("R"),
            Analyzer::L => f.write_str("L"),
            Analyzer::Linear(deg) => write!(f, "{deg}"),
        }
    }
}

/// Alice's and Bob's projections for one coincidence measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionSetting {
    pub alice: Analyzer,
    pub bob: Analyzer,
}

impl ProjectionSetting {
    pub fn new(alice: Analyzer, bob: Analyzer) -> Self {
        ProjectionSetting { alice, bob }
    }

    /// Joint projection ket `|ψ_A⟩ ⊗ |ψ_B⟩`.
    pub fn ket(&self) -> Ket4 {
        tensor(&self.alice.ket(), &self.bob.ket())
    }

    /// e.g. `"HH"`, `"DR"`, or `"22.5,67.5"` for polarizer angles.
    pub fn label(&self) -> String {
        match (self.alice, self.bob) {
            (Analyzer::Linear(_), _) | (_, Analyzer::Linear(_)) => {
                format!("{},{}", self.alice, self.bob)
            }
            (a, b) => format!("{a}{b}"),
        }
    }
}

/// Alice `{H, V, D, R}` × Bob `{H, V, D, L}`, Alice major.
pub fn standard_tomography_set() -> Vec<ProjectionSetting> {
    use Analyzer::*;
    let alice = [H, V, D, R];
    let bob = [H, V, D, L];
    alice
        .iter()
        .flat_map(|&a| bob.iter().map(move |&b| ProjectionSetting::new(a, b)))
        .collect()
}

/// One coincidence-counting measurement. `coincidences` is a count; it is
/// kept as `f64` so noiseless (expected-value) records can be represented.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TomographyRecord {
    pub setting: ProjectionSetting,
    pub coincidences: f64,
    /// Expected number of pairs for this setting (the normalization `N`).
    pub exposure: f64,
}

impl TomographyRecord {
    pub fn new(setting: ProjectionSetting, coincidences: f64, exposure: f64) -> Result<Self> {
        if !(exposure > 0.0) || !exposure.is_finite() {
            return Err(Error::Parameter(format!(
                "exposure must be positive, got {exposure}"
            )));
        }
        if !(coincidences >= 0.0) || !coincidences.is_finite() {
            return Err(Error::Parameter(format!(
                "coincidence count must be non-negative, got {coincidences}"
            )));
        }
        Ok(TomographyRecord {
            setting,
            coincidences,
            exposure,
        })
    }

    pub fn frequency(&self) -> f64 {
        self.coincidences / self.exposure
    }
}

/// `⟨ψ_A ψ_B|ρ|ψ_A ψ_B⟩`, clamped to `[0, 1]`.
pub fn born_probability(rho: &DensityMatrix, setting: &ProjectionSetting) -> Result<f64> {
    probability_of(rho, &setting.ket())
}

fn probability_of(rho: &DensityMatrix, ket: &Ket4) -> Result<f64> {
    let p = rho.expectation(ket).re;
    if p < PSD_TOL {
        return Err(Error::InvalidProbability(p));
    }
    Ok(p.clamp(0.0, 1.0))
}

/// Poisson-distributed coincidence counts with mean `exposure · p`.
///
/// Setting `k` draws from its own ChaCha stream `k` under `seed`, so each
/// record depends only on `(seed, k)`.
pub fn simulate_counts(
    rho: &DensityMatrix,
    settings: &[ProjectionSetting],
    exposure: f64,
    seed: u64,
) -> Result<Vec<TomographyRecord>> {
    if !(exposure > 0.0) || !exposure.is_finite() {
        return Err(Error::Parameter(format!(
            "exposure must be positive, got {exposure}"
        )));
    }
    settings
        .iter()
        .enumerate()
        .map(|(k, setting)| {
            let mean = exposure * born_probability(rho, setting)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let count = if mean > 0.0 {
                Poisson::new(mean)
                    .map_err(|e| Error::Parameter(e.to_string()))?
                    .sample(&mut rng)
            } else {
                0.0
            };
            TomographyRecord::new(*setting, count, exposure)
        })
        .collect()
}

/// Records whose counts equal their expectation `exposure · p` exactly.
pub fn expected_counts(
    rho: &DensityMatrix,
    settings: &[ProjectionSetting],
    exposure: f64,
) -> Result<Vec<TomographyRecord>> {
    settings
        .iter()
        .map(|s| TomographyRecord::new(*s, exposure * born_probability(rho, s)?, exposure))
        .collect()
}

/// Polarization correlation `E(θ_A, θ_B)` from the four coincidence rates
/// at `θ` and `θ + 90°` on each side.
pub fn correlation(rho: &DensityMatrix, alice_deg: f64, bob_deg: f64) -> Result<f64> {
    let p = |a: f64, b: f64| probability_of(rho, &tensor(&Ket2::linear(a), &Ket2::linear(b)));
    let pp = p(alice_deg, bob_deg)?;
    let pm = p(alice_deg, bob_deg + 90.0)?;
    let mp = p(alice_deg + 90.0, bob_deg)?;
    let mm = p(alice_deg + 90.0, bob_deg + 90.0)?;
    let total = pp + pm + mp + mm;
    if total <= 0.0 {
        return Err(Error::UndefinedCorrelation);
    }
    Ok(((pp - pm - mp + mm) / total).clamp(-1.0, 1.0))
}

/// Polarizer angles `a₁, a₂` for Alice and `b₁, b₂` for Bob, in `[0°, 180°)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleSet {
    pub alice: [f64; 2],
    pub bob: [f64; 2],
}

impl AngleSet {
    pub fn new(alice: [f64; 2], bob: [f64; 2]) -> Result<Self> {
        for a in alice.iter().chain(bob.iter()) {
            if !(0.0..180.0).contains(a) {
                return Err(Error::Parameter(format!(
                    "polarizer angle {a}° outside [0°, 180°)"
                )));
            }
        }
        Ok(AngleSet { alice, bob })
    }
}

impl Default for AngleSet {
    /// `a = {0°, 45°}`, `b = {22.5°, 67.5°}`.
    fn default() -> Self {
        AngleSet {
            alice: [0.0, 45.0],
            bob: [22.5, 67.5],
        }
    }
}

/// `S = |E(a₁,b₁) − E(a₁,b₂) + E(a₂,b₁) + E(a₂,b₂)|`.
pub fn chsh_fixed(rho: &DensityMatrix, angles: &AngleSet) -> Result<f64> {
    let [a1, a2] = angles.alice;
    let [b1, b2] = angles.bob;
    let e = |a, b| correlation(rho, a, b);
    Ok((e(a1, b1)? - e(a1, b2)? + e(a2, b1)? + e(a2, b2)?).abs())
}

/// `T_ij = Tr[ρ σ_i ⊗ σ_j]` for `i, j ∈ {x, y, z}`.
pub fn correlation_tensor(rho: &DensityMatrix) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| {
        let op = kron(&pauli(i + 1), &pauli(j + 1));
        rho.expect_operator(&op).re
    })
}

/// Largest CHSH value over all measurement directions:
/// `2√(m₁ + m₂)` with `m₁ ≥ m₂` the top eigenvalues of `TᵀT`.
pub fn chsh_max(rho: &DensityMatrix) -> f64 {
    let t = correlation_tensor(rho);
    let mut m: Vec<f64> = SymmetricEigen::new(t.transpose() * t)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    m.sort_by(|a, b| b.total_cmp(a));
    2.0 * (m[0] + m[1]).max(0.0).sqrt()
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum AnalyzerRepr {
    Angle(f64),
    Label(String),
}

impl From<Analyzer> for AnalyzerRepr {
    fn from(a: Analyzer) -> Self {
        match a {
            Analyzer::Linear(deg) => AnalyzerRepr::Angle(deg),
            other => AnalyzerRepr::Label(other.to_string()),
        }
    }
}

impl TryFrom<AnalyzerRepr> for Analyzer {
    type Error = Error;

    fn try_from(r: AnalyzerRepr) -> Result<Self> {
        match r {
            AnalyzerRepr::Angle(deg) => Ok(Analyzer::Linear(deg)),
            AnalyzerRepr::Label(s) => Analyzer::parse(&s),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct RecordRepr {
    alice: AnalyzerRepr,
    bob: AnalyzerRepr,
    coincidences: serde_json::Number,
    exposure: f64,
}

/// Serializes records as the counts-file JSON array. Integral counts are
/// written as JSON integers.
pub fn records_to_json(records: &[TomographyRecord]) -> String {
    let reprs: Vec<RecordRepr> = records
        .iter()
        .map(|r| RecordRepr {
            alice: r.setting.alice.into(),
            bob: r.setting.bob.into(),
            coincidences: count_number(r.coincidences),
            exposure: r.exposure,
        })
        .collect();
    serde_json::to_string_pretty(&reprs).expect("records serialize")
}

fn count_number(c: f64) -> serde_json::Number {
    if c.fract() == 0.0 && c >= 0.0 && c < 2f64.powi(53) {
        serde_json::Number::from(c as u64)
    } else {
        serde_json::Number::from_f64(c).expect("finite count")
    }
}

pub fn records_from_json(s: &str) -> Result<Vec<TomographyRecord>> {
    let reprs: Vec<RecordRepr> = serde_json::from_str(s)?;
    reprs
        .into_iter()
        .map(|r| {
            let setting = ProjectionSetting::new(r.alice.try_into()?, r.bob.try_into()?);
            let count = r
                .coincidences
                .as_f64()
                .ok_or_else(|| Error::Format("coincidence count is not a number".into()))?;
            TomographyRecord::new(setting, count, r.exposure)
                .map_err(|e| Error::Format(e.to_string()))
        })
        .collect()
}

/// Coincidence probability for linear polarizers at `(alice_deg, bob_deg)`.
pub fn polarizer_probability(rho: &DensityMatrix, alice_deg: f64, bob_deg: f64) -> Result<f64> {
    probability_of(
        rho,
        &tensor(&Ket2::linear(alice_deg), &Ket2::linear(bob_deg)),
    )
}
