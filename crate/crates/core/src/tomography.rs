//! Density-matrix reconstruction from joint projective coincidence counts.
//!
//! [`linear_invert`] applies the dual basis of the measured projectors
//! directly to the observed frequencies. Under counting noise the result can
//! have negative eigenvalues; [`mle_reconstruct`] fixes this by fitting the
//! counts over `ρ(t) = T†T / Tr[T†T]` with `T` lower triangular, which is a
//! legitimate state for every parameter vector.

pub mod nelder_mead;

use nalgebra::{SMatrix, Vector4};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::measurement::TomographyRecord;
use crate::qstate::{
    eig_hermitian, hermitian_part, kron, pauli, trace, DensityMatrix, Operator4, PSD_TOL,
};
use crate::{Error, Result};

pub use nelder_mead::{Minimum, NelderMead};

/// Number of joint settings in a complete two-qubit tomography.
pub const SETTINGS: usize = 16;
/// Guard added to the variance in the likelihood denominator.
pub const LIKELIHOOD_EPSILON: f64 = 1e-12;
/// Eigenvalue assigned to negative eigenvalues when warm-starting.
pub const INIT_EIGENVALUE_FLOOR: f64 = 1e-6;

type Matrix16 = SMatrix<f64, 16, 16>;

/// `σ_i ⊗ σ_j / 2` for `μ = 4i + j`; orthonormal under the Hilbert-Schmidt product.
fn pauli_basis() -> [Operator4; SETTINGS] {
    std::array::from_fn(|mu| kron(&pauli(mu / 4), &pauli(mu % 4)) * Complex64::new(0.5, 0.0))
}

/// Operators `M_ν` with `Tr[M_ν P_μ] = δ_νμ` for the projectors `P_μ` of
/// `records`, so that `ρ = Σ_ν M_ν p_ν`.
pub fn dual_basis(records: &[TomographyRecord]) -> Result<[Operator4; SETTINGS]> {
    if records.len() != SETTINGS {
        return Err(Error::RecordCount {
            expected: SETTINGS,
            got: records.len(),
        });
    }
    let basis = pauli_basis();
    let kets: Vec<_> = records.iter().map(|r| *r.setting.ket().vector()).collect();
    // B_νμ = ⟨ψ_ν|Γ_μ|ψ_ν⟩
    let b = Matrix16::from_fn(|nu, mu| kets[nu].dotc(&(basis[mu] * kets[nu])).re);
    let sv = b.singular_values();
    let (smin, smax) = sv.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &s| {
        (lo.min(s), hi.max(s))
    });
    if !(smin > 1e-10 * smax) {
        return Err(Error::DegenerateTomography {
            smallest_singular_value: smin,
        });
    }
    let inv = b.try_inverse().ok_or(Error::DegenerateTomography {
        smallest_singular_value: smin,
    })?;
    Ok(std::array::from_fn(|nu| {
        (0..SETTINGS).fold(Operator4::zeros(), |acc, mu| {
            acc + basis[mu] * Complex64::new(inv[(mu, nu)], 0.0)
        })
    }))
}

/// Linear-inversion estimate: Hermitian and unit trace, not necessarily positive.
#[derive(Debug, Clone, PartialEq)]
pub struct RawReconstruction {
    entries: Operator4,
    eigenvalues: [f64; 4],
}

impl RawReconstruction {
    pub fn entries(&self) -> &Operator4 {
        &self.entries
    }

    /// Descending.
    pub fn eigenvalues(&self) -> [f64; 4] {
        self.eigenvalues
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[3]
    }

    pub fn is_legitimate(&self) -> bool {
        self.min_eigenvalue() >= PSD_TOL
    }

    /// The checked density matrix, or [`Error::Illegitimate`].
    pub fn validate(&self) -> Result<DensityMatrix> {
        DensityMatrix::validate(self.entries)
    }
}

/// `ρ = Σ_ν M_ν · n_ν/N_ν`, then symmetrized and trace-normalized.
pub fn linear_invert(records: &[TomographyRecord]) -> Result<RawReconstruction> {
    let duals = dual_basis(records)?;
    let raw = records
        .iter()
        .zip(duals.iter())
        .fold(Operator4::zeros(), |acc, (r, m)| {
            acc + m * Complex64::new(r.frequency(), 0.0)
        });
    let raw = hermitian_part(&raw);
    let tr = trace(&raw).re;
    if !(tr > 0.0) || !tr.is_finite() {
        return Err(Error::Parameter(format!(
            "reconstruction has non-positive trace {tr}; no coincidences recorded?"
        )));
    }
    let entries = raw / Complex64::new(tr, 0.0);
    let eigenvalues = eig_hermitian(&entries)?.values;
    Ok(RawReconstruction {
        entries,
        eigenvalues,
    })
}

/// Sixteen reals defining the lower-triangular `T`:
/// diagonal `t0..t3`, first sub-diagonal `t4+i·t5, t6+i·t7, t8+i·t9`,
/// second `t10+i·t11, t12+i·t13`, corner `t14+i·t15`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleParams {
    pub t: [f64; SETTINGS],
}

/// `(row, col, re index, im index)` of each off-diagonal entry of `T`.
const OFF_DIAGONAL: [(usize, usize, usize, usize); 6] = [
    (1, 0, 4, 5),
    (2, 1, 6, 7),
    (3, 2, 8, 9),
    (2, 0, 10, 11),
    (3, 1, 12, 13),
    (3, 0, 14, 15),
];

impl MleParams {
    pub fn triangular(&self) -> Operator4 {
        let t = &self.t;
        let mut m = Operator4::zeros();
        for i in 0..4 {
            m[(i, i)] = Complex64::new(t[i], 0.0);
        }
        for &(r, c, re, im) in &OFF_DIAGONAL {
            m[(r, c)] = Complex64::new(t[re], t[im]);
        }
        m
    }

    pub fn from_triangular(m: &Operator4) -> Self {
        let mut t = [0.0; SETTINGS];
        for i in 0..4 {
            t[i] = m[(i, i)].re;
        }
        for &(r, c, re, im) in &OFF_DIAGONAL {
            t[re] = m[(r, c)].re;
            t[im] = m[(r, c)].im;
        }
        MleParams { t }
    }

    /// `Tr[T†T]`.
    pub fn norm_sqr(&self) -> f64 {
        self.t.iter().map(|x| x * x).sum()
    }

    /// `T†T / Tr[T†T]`.
    pub fn rho(&self) -> Result<DensityMatrix> {
        let norm = self.norm_sqr();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Parameter("all-zero MLE parameters".into()));
        }
        let t = self.triangular();
        let m = hermitian_part(&(t.adjoint() * t));
        let tr = trace(&m).re;
        DensityMatrix::validate(m / Complex64::new(tr, 0.0))
    }
}

/// Gaussian-approximated negative log-likelihood of a record set, with the
/// projector kets precomputed.
struct Likelihood {
    kets: Vec<Vector4<Complex64>>,
    counts: Vec<f64>,
    exposures: Vec<f64>,
}

impl Likelihood {
    fn new(records: &[TomographyRecord]) -> Self {
        Likelihood {
            kets: records.iter().map(|r| *r.setting.ket().vector()).collect(),
            counts: records.iter().map(|r| r.coincidences).collect(),
            exposures: records.iter().map(|r| r.exposure).collect(),
        }
    }

    /// `Σ_ν (N_ν p_ν − n_ν)² / (2 N_ν p_ν + ε)`; `None` if `t` is all zero.
    fn evaluate(&self, t: &[f64]) -> Option<f64> {
        let norm: f64 = t.iter().map(|x| x * x).sum();
        if !(norm > 0.0) {
            return None;
        }
        let c = |re: usize, im: usize| Complex64::new(t[re], t[im]);
        let (t10, t21, t32) = (c(4, 5), c(6, 7), c(8, 9));
        let (t20, t31, t30) = (c(10, 11), c(12, 13), c(14, 15));
        let mut total = 0.0;
        for ((psi, &n), &exposure) in self.kets.iter().zip(&self.counts).zip(&self.exposures) {
            let y0 = psi[0] * t[0];
            let y1 = t10 * psi[0] + psi[1] * t[1];
            let y2 = t20 * psi[0] + t21 * psi[1] + psi[2] * t[2];
            let y3 = t30 * psi[0] + t31 * psi[1] + t32 * psi[2] + psi[3] * t[3];
            let p = (y0.norm_sqr() + y1.norm_sqr() + y2.norm_sqr() + y3.norm_sqr()) / norm;
            let expected = exposure * p;
            let d = expected - n;
            total += d * d / (2.0 * expected + LIKELIHOOD_EPSILON);
        }
        Some(total)
    }
}

/// `L(t) = Σ_ν (N_ν p_ν(t) − n_ν)² / (2 N_ν p_ν(t) + ε)` with
/// `p_ν(t) = ⟨ψ_ν|ρ(t)|ψ_ν⟩`.
pub fn mle_objective(params: &MleParams, records: &[TomographyRecord]) -> Result<f64> {
    Likelihood::new(records)
        .evaluate(&params.t)
        .ok_or_else(|| Error::Parameter("all-zero MLE parameters".into()))
}

/// Warm start near a linear-inversion estimate. Negative eigenvalues are
/// raised to 1e-6 (rounding-level ones in `[−1e-9, 0)` to zero), the
/// spectrum is renormalized and `T` is the lower-triangular factor with
/// `T†T` equal to the repaired matrix.
pub fn cholesky_init_from_raw(raw: &RawReconstruction) -> MleParams {
    let eig = eig_hermitian(raw.entries()).expect("raw reconstruction is Hermitian");
    let repaired = eig.values.map(|v| {
        if v < PSD_TOL {
            INIT_EIGENVALUE_FLOOR
        } else {
            v.max(0.0)
        }
    });
    let total: f64 = repaired.iter().sum();
    let target = eig.with_values(repaired.map(|v| v / total));
    MleParams::from_triangular(&lower_factor(&hermitian_part(&target)))
}

/// Lower-triangular `T` with `T†T = a` for positive semidefinite `a`.
///
/// With `J` the index reversal, `JaJ = LL†` (Cholesky) gives `T = J L† J`.
/// Pivots at rounding level are treated as zero, so rank-deficient inputs
/// are factored exactly.
fn lower_factor(a: &Operator4) -> Operator4 {
    let rev = |i: usize| 3 - i;
    let b = Operator4::from_fn(|r, c| a[(rev(r), rev(c))]);
    let scale = (0..4).map(|i| b[(i, i)].re).fold(0.0, f64::max);
    let mut l = Operator4::zeros();
    for j in 0..4 {
        let mut d = b[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if d <= 1e-14 * scale {
            continue;
        }
        let pivot = d.sqrt();
        l[(j, j)] = Complex64::new(pivot, 0.0);
        for i in (j + 1)..4 {
            let mut s = b[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / pivot;
        }
    }
    let lh = l.adjoint();
    Operator4::from_fn(|r, c| lh[(rev(r), rev(c))])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleOptions {
    /// Number of starts; start 0 is the warm start itself.
    pub restarts: usize,
    /// Standard deviation of the start perturbation, relative to the
    /// largest warm-start parameter.
    pub perturbation: f64,
    pub optimizer: NelderMead,
}

impl Default for MleOptions {
    fn default() -> Self {
        MleOptions {
            restarts: 8,
            perturbation: 0.2,
            optimizer: NelderMead::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MleResult {
    pub rho: DensityMatrix,
    pub params: MleParams,
    pub objective: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Index of the winning start.
    pub start: usize,
    /// Best objective per optimizer iteration of the winning start.
    pub history: Vec<f64>,
}

pub fn mle_reconstruct(
    records: &[TomographyRecord],
    init: Option<&RawReconstruction>,
    seed: u64,
) -> Result<MleResult> {
    mle_reconstruct_with(records, init, seed, &MleOptions::default())
}

/// Multi-start maximum-likelihood fit. Starts run in parallel; the lowest
/// objective wins, ties going to the lower start index.
pub fn mle_reconstruct_with(
    records: &[TomographyRecord],
    init: Option<&RawReconstruction>,
    seed: u64,
    options: &MleOptions,
) -> Result<MleResult> {
    if records.len() != SETTINGS {
        return Err(Error::RecordCount {
            expected: SETTINGS,
            got: records.len(),
        });
    }
    let computed;
    let raw = match init {
        Some(raw) => raw,
        None => {
            computed = linear_invert(records)?;
            &computed
        }
    };
    let warm = cholesky_init_from_raw(raw);
    let scale = warm.t.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let likelihood = Likelihood::new(records);
    let restarts = options.restarts.max(1);

    let runs: Vec<(usize, Minimum)> = (0..restarts)
        .into_par_iter()
        .map(|k| {
            let mut x0 = warm.t;
            if k > 0 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(k as u64);
                let noise =
                    Normal::new(0.0, options.perturbation * scale).expect("finite perturbation");
                x0.iter_mut().for_each(|x| *x += noise.sample(&mut rng));
            }
            let f = |t: &[f64]| likelihood.evaluate(t).unwrap_or(f64::INFINITY);
            (k, options.optimizer.minimize(f, &x0))
        })
        .collect();

    let (start, best) = runs
        .into_iter()
        .min_by(|(ka, a), (kb, b)| a.f.total_cmp(&b.f).then(ka.cmp(kb)))
        .expect("at least one start");
    let mut t = [0.0; SETTINGS];
    t.copy_from_slice(&best.x);
    let params = MleParams { t };
    Ok(MleResult {
        rho: params.rho()?,
        params,
        objective: best.f,
        iterations: best.iterations,
        evaluations: best.evaluations,
        converged: best.converged,
        start,
        history: best.history,
    })
}

/// Reconstruction summary written next to the reconstructed matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub min_eigenvalue_raw: f64,
    pub raw_eigenvalues: [f64; 4],
    pub raw_legitimate: bool,
    pub mle_eigenvalues: [f64; 4],
    pub evaluations: usize,
}

impl ReconstructionReport {
    pub fn new(raw: &RawReconstruction, mle: &MleResult) -> Self {
        ReconstructionReport {
            objective: mle.objective,
            iterations: mle.iterations,
            converged: mle.converged,
            min_eigenvalue_raw: raw.min_eigenvalue(),
            raw_eigenvalues: raw.eigenvalues(),
            raw_legitimate: raw.is_legitimate(),
            mle_eigenvalues: mle.rho.eigenvalues(),
            evaluations: mle.evaluations,
        }
    }
}
