//! Kets, operators and density matrices on the one- and two-photon
//! polarization spaces.
//!
//! Two-photon objects are stored in the fixed basis order
//! `|HH⟩, |HV⟩, |VH⟩, |VV⟩` (Alice major).

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// 4×4 complex operator on the two-photon polarization space.
pub type Operator4 = Matrix4<Complex64>;

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
/// Most negative eigenvalue still accepted as positive semidefinite.
pub const PSD_TOL: f64 = -1e-9;

pub const BASIS_LABEL: &str = "HH,HV,VH,VV";

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Single-photon polarization ket `a_H|H⟩ + a_V|V⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ket2(Vector2<Complex64>);

impl Ket2 {
    /// Unnormalized ket from raw amplitudes.
    pub fn new(h: Complex64, v: Complex64) -> Self {
        Ket2(Vector2::new(h, v))
    }

    pub fn h() -> Self {
        Ket2::new(ONE, ZERO)
    }

    pub fn v() -> Self {
        Ket2::new(ZERO, ONE)
    }

    /// Diagonal, `(|H⟩ + |V⟩)/√2`.
    pub fn d() -> Self {
        Ket2::new(ONE * FRAC_1_SQRT_2, ONE * FRAC_1_SQRT_2)
    }

    /// Right circular, `(|H⟩ + i|V⟩)/√2`.
    pub fn r() -> Self {
        Ket2::new(ONE * FRAC_1_SQRT_2, I * FRAC_1_SQRT_2)
    }

    /// Left circular, `(|H⟩ − i|V⟩)/√2`.
    pub fn l() -> Self {
        Ket2::new(ONE * FRAC_1_SQRT_2, -I * FRAC_1_SQRT_2)
    }

    /// Transmitted state of a linear polarizer at `degrees` from horizontal.
    pub fn linear(degrees: f64) -> Self {
        let (s, c) = degrees.to_radians().sin_cos();
        Ket2::new(ONE * c, ONE * s)
    }

    pub fn amplitudes(&self) -> [Complex64; 2] {
        [self.0[0], self.0[1]]
    }

    pub fn vector(&self) -> &Vector2<Complex64> {
        &self.0
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalize(&self) -> Result<Self> {
        let n = self.norm_sqr().sqrt();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::Parameter(format!(
                "cannot normalize ket with norm {n}"
            )));
        }
        Ok(Ket2(self.0.unscale(n)))
    }

    pub fn scale(&self, alpha: Complex64) -> Self {
        Ket2(self.0 * alpha)
    }
}

/// Two-photon polarization ket in the `HH, HV, VH, VV` basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ket4(Vector4<Complex64>);

impl Ket4 {
    pub fn new(amplitudes: [Complex64; 4]) -> Self {
        Ket4(Vector4::from(amplitudes))
    }

    pub fn amplitudes(&self) -> [Complex64; 4] {
        [self.0[0], self.0[1], self.0[2], self.0[3]]
    }

    pub fn vector(&self) -> &Vector4<Complex64> {
        &self.0
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalize(&self) -> Result<Self> {
        let n = self.norm_sqr().sqrt();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::Parameter(format!(
                "cannot normalize ket with norm {n}"
            )));
        }
        Ok(Ket4(self.0.unscale(n)))
    }

    pub fn inner(&self, other: &Ket4) -> Complex64 {
        self.0.dotc(&other.0)
    }

    /// `|ψ⟩⟨ψ|` without any checks.
    pub fn outer(&self) -> Operator4 {
        self.0 * self.0.adjoint()
    }

    /// Pure-state density matrix. The ket is normalized first.
    pub fn density(&self) -> Result<DensityMatrix> {
        let k = self.normalize()?;
        Ok(DensityMatrix(k.outer()))
    }
}

/// `(|HH⟩ + |VV⟩)/√2`.
pub fn bell_phi_plus() -> Ket4 {
    let a = ONE * FRAC_1_SQRT_2;
    Ket4::new([a, ZERO, ZERO, a])
}

/// Kronecker product `a ⊗ b`, Alice (`a`) major.
pub fn tensor(a: &Ket2, b: &Ket2) -> Ket4 {
    let [ah, av] = a.amplitudes();
    let [bh, bv] = b.amplitudes();
    Ket4::new([ah * bh, ah * bv, av * bh, av * bv])
}

/// Kronecker product of two single-photon operators.
pub fn kron(a: &Matrix2<Complex64>, b: &Matrix2<Complex64>) -> Operator4 {
    Operator4::from_fn(|r, c| a[(r / 2, c / 2)] * b[(r % 2, c % 2)])
}

/// Pauli matrix `σ_k` for `k = 0..=3` (`σ_0` is the identity). The `σ_z`
/// eigenbasis is `{|H⟩, |V⟩}` with `|H⟩ ↦ +1`.
pub fn pauli(k: usize) -> Matrix2<Complex64> {
    match k {
        0 => Matrix2::new(ONE, ZERO, ZERO, ONE),
        1 => Matrix2::new(ZERO, ONE, ONE, ZERO),
        2 => Matrix2::new(ZERO, -I, I, ZERO),
        3 => Matrix2::new(ONE, ZERO, ZERO, -ONE),
        _ => panic!("pauli index {k} out of range"),
    }
}

pub fn trace(m: &Operator4) -> Complex64 {
    (0..4).map(|i| m[(i, i)]).sum()
}

/// `max |m_ij − conj(m_ji)|`.
pub fn hermitian_deviation(m: &Operator4) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..4 {
        for j in i..4 {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `(m + m†)/2`.
pub fn hermitian_part(m: &Operator4) -> Operator4 {
    (m + m.adjoint()).unscale(2.0)
}

/// Eigen-decomposition of a Hermitian operator.
///
/// `values` are sorted descending and `vectors` holds the matching
/// orthonormal eigenvectors as columns, so `m = V diag(values) V†`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianEigen {
    pub values: [f64; 4],
    pub vectors: Operator4,
}

impl HermitianEigen {
    pub fn reconstruct(&self) -> Operator4 {
        self.reconstruct_with(|x| x)
    }

    /// `V f(Λ) V†`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> Operator4 {
        self.with_values(self.values.map(f))
    }

    /// `V diag(values) V†`: the same eigenvectors with a new spectrum.
    pub fn with_values(&self, values: [f64; 4]) -> Operator4 {
        let mut out = Operator4::zeros();
        for (k, &w) in values.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let v = self.vectors.column(k);
            out += (v * v.adjoint()) * Complex64::new(w, 0.0);
        }
        out
    }

    pub fn min_value(&self) -> f64 {
        self.values[3]
    }
}

const JACOBI_MAX_SWEEPS: usize = 64;

/// Hermitian eigen-decomposition by cyclic complex Jacobi rotations.
pub fn eig_hermitian(m: &Operator4) -> Result<HermitianEigen> {
    let deviation = hermitian_deviation(m);
    if !deviation.is_finite() || deviation > HERMITIAN_TOL {
        return Err(Error::NotHermitian { deviation });
    }
    let mut a = hermitian_part(m);
    for i in 0..4 {
        a[(i, i)].im = 0.0;
    }
    let mut v = Operator4::identity();

    let scale = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..4)
            .flat_map(|i| (0..4).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= f64::EPSILON * 1e-2 * scale || off == 0.0 {
            break;
        }
        for p in 0..3 {
            for q in (p + 1)..4 {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }

    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&x, &y| a[(y, y)].re.total_cmp(&a[(x, x)].re));
    let mut values = [0.0; 4];
    let mut vectors = Operator4::zeros();
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = a[(src, src)].re;
        vectors.set_column(dst, &v.column(src));
    }
    Ok(HermitianEigen { values, vectors })
}

/// Annihilates `a[p][q]` with a unitary rotation in the `(p, q)` plane.
fn rotate(a: &mut Operator4, v: &mut Operator4, p: usize, q: usize) {
    let b = a[(p, q)];
    let b_abs = b.norm();
    if b_abs == 0.0 {
        return;
    }
    let phase = b / b_abs;
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    let theta = (aqq - app) / (2.0 * b_abs);
    let t = if theta.is_infinite() {
        0.0
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    // J = diag(1, conj(phase)) · [[c, s], [-s, c]] embedded in the (p, q) plane.
    let pc = phase.conj();
    let j_pp = Complex64::new(c, 0.0);
    let j_pq = Complex64::new(s, 0.0);
    let j_qp = pc * -s;
    let j_qq = pc * c;

    // A ← A J
    for r in 0..4 {
        let arp = a[(r, p)];
        let arq = a[(r, q)];
        a[(r, p)] = arp * j_pp + arq * j_qp;
        a[(r, q)] = arp * j_pq + arq * j_qq;
    }
    // A ← J† A
    for col in 0..4 {
        let apc = a[(p, col)];
        let aqc = a[(q, col)];
        a[(p, col)] = j_pp.conj() * apc + j_qp.conj() * aqc;
        a[(q, col)] = j_pq.conj() * apc + j_qq.conj() * aqc;
    }
    a[(p, q)] = ZERO;
    a[(q, p)] = ZERO;
    a[(p, p)] = Complex64::new(app - t * b_abs, 0.0);
    a[(q, q)] = Complex64::new(aqq + t * b_abs, 0.0);
    // V ← V J
    for r in 0..4 {
        let vrp = v[(r, p)];
        let vrq = v[(r, q)];
        v[(r, p)] = vrp * j_pp + vrq * j_qp;
        v[(r, q)] = vrp * j_pq + vrq * j_qq;
    }
}

/// Hermitian, unit-trace, positive semidefinite 4×4 operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(Operator4);

impl DensityMatrix {
    /// Checks Hermiticity, unit trace and positivity. A negative eigenvalue
    /// below [`PSD_TOL`] yields [`Error::Illegitimate`].
    pub fn validate(m: Operator4) -> Result<Self> {
        let deviation = hermitian_deviation(&m);
        if !deviation.is_finite() || deviation > HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation });
        }
        let tr = trace(&m);
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidTrace { trace: tr.re });
        }
        let eig = eig_hermitian(&m)?;
        if eig.min_value() < PSD_TOL {
            return Err(Error::Illegitimate {
                min_eigenvalue: eig.min_value(),
            });
        }
        Ok(DensityMatrix(m))
    }

    /// `I/4`.
    pub fn maximally_mixed() -> Self {
        DensityMatrix(Operator4::identity() * Complex64::new(0.25, 0.0))
    }

    pub fn matrix(&self) -> &Operator4 {
        &self.0
    }

    pub fn into_matrix(self) -> Operator4 {
        self.0
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.0[(row, col)]
    }

    pub fn eigen(&self) -> HermitianEigen {
        eig_hermitian(&self.0).expect("validated density matrix is Hermitian")
    }

    pub fn eigenvalues(&self) -> [f64; 4] {
        self.eigen().values
    }

    /// `⟨ψ|ρ|ψ⟩`.
    pub fn expectation(&self, ket: &Ket4) -> Complex64 {
        ket.vector().dotc(&(self.0 * ket.vector()))
    }

    /// `Tr[ρ O]`.
    pub fn expect_operator(&self, op: &Operator4) -> Complex64 {
        trace(&(self.0 * op))
    }

    /// Trace distance `½‖ρ − σ‖₁`.
    pub fn trace_distance(&self, other: &DensityMatrix) -> f64 {
        let diff = hermitian_part(&(self.0 - other.0));
        let eig = eig_hermitian(&diff).expect("difference of Hermitian matrices");
        0.5 * eig.values.iter().map(|x| x.abs()).sum::<f64>()
    }

    /// Fidelity with a pure state, `⟨ψ|ρ|ψ⟩`.
    pub fn fidelity_pure(&self, ket: &Ket4) -> f64 {
        self.expectation(ket).re
    }

    pub fn to_json(&self) -> String {
        operator_to_json(&self.0)
    }

    /// Parses the density-matrix JSON format and validates the result.
    pub fn from_json(s: &str) -> Result<Self> {
        DensityMatrix::validate(operator_from_json(s)?)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct OperatorJson {
    basis: String,
    re: [[f64; 4]; 4],
    im: [[f64; 4]; 4],
}

/// Serializes an operator as `{"basis": "HH,HV,VH,VV", "re": [[..]], "im": [[..]]}`.
/// Floats are written in shortest round-trip form, so parsing restores
/// every entry bit for bit.
pub fn operator_to_json(m: &Operator4) -> String {
    let mut re = [[0.0; 4]; 4];
    let mut im = [[0.0; 4]; 4];
    for r in 0..4 {
        for c in 0..4 {
            re[r][c] = m[(r, c)].re;
            im[r][c] = m[(r, c)].im;
        }
    }
    let doc = OperatorJson {
        basis: BASIS_LABEL.to_string(),
        re,
        im,
    };
    serde_json::to_string_pretty(&doc).expect("finite operator entries serialize")
}

/// Parses the operator JSON format without any physical checks.
pub fn operator_from_json(s: &str) -> Result<Operator4> {
    let doc: OperatorJson = serde_json::from_str(s)?;
    let basis: String = doc.basis.chars().filter(|c| !c.is_whitespace()).collect();
    if basis != BASIS_LABEL {
        return Err(Error::Format(format!(
            "unsupported basis {:?}, expected {BASIS_LABEL:?}",
            doc.basis
        )));
    }
    Ok(Operator4::from_fn(|r, c| {
        Complex64::new(doc.re[r][c], doc.im[r][c])
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn assert_ket4(k: &Ket4, expected: [Complex64; 4]) {
        for (a, e) in k.amplitudes().iter().zip(expected) {
            assert!((a - e).norm() < 1e-15, "{a} vs {e}");
        }
    }

    #[test]
    fn phi_plus_amplitudes() {
        let phi = bell_phi_plus();
        let s = FRAC_1_SQRT_2;
        assert_ket4(&phi, [c(s, 0.0), ZERO, ZERO, c(s, 0.0)]);
        assert_abs_diff_eq!(phi.inner(&phi).re, 1.0, epsilon = 1e-15);
        let eig = phi.density().unwrap().eigenvalues();
        for (v, e) in eig.iter().zip([1.0, 0.0, 0.0, 0.0]) {
            assert_abs_diff_eq!(*v, e, epsilon = 1e-12);
        }
    }

    #[test]
    fn tensor_examples() {
        assert_ket4(&tensor(&Ket2::h(), &Ket2::h()), [ONE, ZERO, ZERO, ZERO]);
        let half = c(0.5, 0.0);
        assert_ket4(&tensor(&Ket2::d(), &Ket2::d()), [half; 4]);
        // (|H⟩+i|V⟩)(|H⟩−i|V⟩)/2 = (HH − i HV + i VH + VV)/2
        assert_ket4(
            &tensor(&Ket2::r(), &Ket2::l()),
            [c(0.5, 0.0), c(0.0, -0.5), c(0.0, 0.5), c(0.5, 0.0)],
        );
    }

    #[test]
    fn named_kets_are_normalized() {
        for k in [
            Ket2::h(),
            Ket2::v(),
            Ket2::d(),
            Ket2::r(),
            Ket2::l(),
            Ket2::linear(33.0),
        ] {
            assert_abs_diff_eq!(k.norm_sqr(), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn normalize_rejects_zero() {
        assert!(Ket2::new(ZERO, ZERO).normalize().is_err());
        assert!(Ket4::new([ZERO; 4]).normalize().is_err());
    }

    #[test]
    fn eig_identity_quarter() {
        let eig = eig_hermitian(DensityMatrix::maximally_mixed().matrix()).unwrap();
        for v in eig.values {
            assert_abs_diff_eq!(v, 0.25, epsilon = 1e-15);
        }
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let mut m = Operator4::identity();
        m[(0, 1)] = c(0.1, 0.0);
        assert!(matches!(eig_hermitian(&m), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn eig_handles_complex_coupling() {
        // [[1, i], [-i, 1]] has eigenvalues 2 and 0.
        let mut m = Operator4::zeros();
        m[(0, 0)] = ONE;
        m[(2, 2)] = ONE;
        m[(0, 2)] = I;
        m[(2, 0)] = -I;
        let eig = eig_hermitian(&m).unwrap();
        assert_abs_diff_eq!(eig.values[0], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(eig.values[3], 0.0, epsilon = 1e-14);
        assert!((eig.reconstruct() - m).camax() < 1e-14);
    }

    #[test]
    fn validate_accepts_mixed_rejects_bad_trace() {
        let m = DensityMatrix::maximally_mixed().into_matrix();
        assert!(DensityMatrix::validate(m).is_ok());
        let bad = m * Complex64::new(0.9, 0.0);
        assert!(matches!(
            DensityMatrix::validate(bad),
            Err(Error::InvalidTrace { .. })
        ));
    }

    #[test]
    fn validate_flags_negative_eigenvalue() {
        // Diagonal in a rotated basis with the raw linear-inversion spectrum.
        let spectrum = [0.641, 0.361, 0.080, -0.082];
        let eig = HermitianEigen {
            values: spectrum,
            vectors: kron(&hadamard(), &Matrix2::identity()),
        };
        let m = eig.reconstruct();
        let tr = trace(&m).re;
        let m = m / Complex64::new(tr, 0.0);
        match DensityMatrix::validate(m) {
            Err(Error::Illegitimate { min_eigenvalue }) => {
                assert_abs_diff_eq!(min_eigenvalue, -0.082 / tr, epsilon = 1e-12)
            }
            other => panic!("expected Illegitimate, got {other:?}"),
        }
    }

    fn hadamard() -> Matrix2<Complex64> {
        Matrix2::new(ONE, ONE, ONE, -ONE) * c(FRAC_1_SQRT_2, 0.0)
    }

    #[test]
    fn json_round_trip_is_exact() {
        let rho = tensor(&Ket2::r(), &Ket2::linear(10.0)).density().unwrap();
        let text = rho.to_json();
        assert!(text.contains("\"basis\": \"HH,HV,VH,VV\""));
        let back = DensityMatrix::from_json(&text).unwrap();
        assert_eq!(back, rho);
    }

    #[test]
    fn json_rejects_other_basis() {
        let text = operator_to_json(&Operator4::identity()).replace("HH,HV,VH,VV", "HH,VV,HV,VH");
        assert!(matches!(operator_from_json(&text), Err(Error::Format(_))));
    }
}
