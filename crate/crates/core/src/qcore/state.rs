use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::matrix::{r, tensor, ComplexMatrix, Subsystem, C64, ZERO};
use crate::error::{Error, Result};

pub const NORM_TOL: f64 = 1e-12;
pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const POSITIVITY_TOL: f64 = -1e-9;

/// Two-link time-bin basis, qubit u first.
pub const TIME_BIN_BASIS: [&str; 4] = ["ee", "el", "le", "ll"];
/// Two-photon polarization basis.
pub const POLARIZATION_BASIS: [&str; 4] = ["HH", "HV", "VH", "VV"];
/// Single-photon hybrid basis (polarization x time bin).
pub const HYBRID_BASIS: [&str; 4] = ["He", "Ve", "Hl", "Vl"];
pub const QUBIT_BASIS: [&str; 2] = ["0", "1"];
pub const COMPUTATIONAL_BASIS: [&str; 4] = ["00", "01", "10", "11"];
pub const POLARIZATION_QUBIT: [&str; 2] = ["H", "V"];

pub fn labels(basis: &[&str]) -> Vec<String> {
    basis.iter().map(|s| s.to_string()).collect()
}

/// Default labels for a space of the given dimension.
pub fn default_labels(dim: usize) -> Vec<String> {
    match dim {
        2 => labels(&QUBIT_BASIS),
        4 => labels(&COMPUTATIONAL_BASIS),
        _ => (0..dim).map(|i| i.to_string()).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PureState {
    amplitudes: Vec<C64>,
    basis_labels: Vec<String>,
}

impl PureState {
    pub fn new(amplitudes: Vec<C64>, basis_labels: Vec<String>) -> Result<Self> {
        if amplitudes.len() != basis_labels.len() {
            return Err(Error::LabelMismatch { labels: basis_labels.len(), dim: amplitudes.len() });
        }
        if amplitudes.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        let norm_sq: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum();
        if (norm_sq - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { norm_sq });
        }
        Ok(Self { amplitudes, basis_labels })
    }

    /// Normalizes `amplitudes` before validation.
    pub fn normalized(amplitudes: Vec<C64>, basis_labels: Vec<String>) -> Result<Self> {
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NotNormalized { norm_sq: norm * norm });
        }
        Self::new(amplitudes.into_iter().map(|z| z / norm).collect(), basis_labels)
    }

    /// Computational basis vector `index`.
    pub fn basis(index: usize, basis_labels: Vec<String>) -> Result<Self> {
        let mut amps = vec![ZERO; basis_labels.len()];
        if index >= amps.len() {
            return Err(Error::DimensionMismatch { expected: amps.len(), found: index });
        }
        amps[index] = r(1.0);
        Self::new(amps, basis_labels)
    }

    /// Looks up a basis vector by its label.
    pub fn from_label(label: &str, basis_labels: Vec<String>) -> Result<Self> {
        let idx = basis_labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown basis label {label}")))?;
        Self::basis(idx, basis_labels)
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn basis_labels(&self) -> &[String] {
        &self.basis_labels
    }

    pub fn with_labels(&self, basis_labels: Vec<String>) -> Result<Self> {
        Self::new(self.amplitudes.clone(), basis_labels)
    }

    pub fn to_vector(&self) -> DVector<C64> {
        DVector::from_column_slice(&self.amplitudes)
    }

    pub fn projector(&self) -> DensityMatrix {
        let v = self.to_vector();
        DensityMatrix::new_unchecked(ComplexMatrix::outer(&v, &v), self.basis_labels.clone())
    }

    pub fn inner(&self, other: &PureState) -> Result<C64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum())
    }

    /// Product state `self ⊗ other` with concatenated labels.
    pub fn tensor(&self, other: &PureState) -> PureState {
        let mut amps = Vec::with_capacity(self.dim() * other.dim());
        let mut labels = Vec::with_capacity(amps.capacity());
        for (a, la) in self.amplitudes.iter().zip(&self.basis_labels) {
            for (b, lb) in other.amplitudes.iter().zip(&other.basis_labels) {
                amps.push(a * b);
                labels.push(format!("{la}{lb}"));
            }
        }
        PureState { amplitudes: amps, basis_labels: labels }
    }
}

/// Validated density operator: Hermitian, unit trace and positive
/// semidefinite within the module tolerances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
    basis_labels: Vec<String>,
}

impl DensityMatrix {
    pub fn new(matrix: ComplexMatrix, basis_labels: Vec<String>) -> Result<Self> {
        Self::check(&matrix, &basis_labels)?;
        Ok(Self { matrix, basis_labels })
    }

    /// Builds a state with default labels for its dimension.
    pub fn from_matrix(matrix: ComplexMatrix) -> Result<Self> {
        let labels = default_labels(matrix.rows());
        Self::new(matrix, labels)
    }

    pub(crate) fn new_unchecked(matrix: ComplexMatrix, basis_labels: Vec<String>) -> Self {
        debug_assert_eq!(matrix.rows(), basis_labels.len());
        Self { matrix, basis_labels }
    }

    fn check(matrix: &ComplexMatrix, basis_labels: &[String]) -> Result<()> {
        if !matrix.is_square() {
            return Err(Error::NotSquare { rows: matrix.rows(), cols: matrix.cols() });
        }
        if basis_labels.len() != matrix.rows() {
            return Err(Error::LabelMismatch { labels: basis_labels.len(), dim: matrix.rows() });
        }
        let deviation = matrix.hermiticity_deviation();
        if deviation > HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation });
        }
        let trace = matrix.trace();
        if (trace.re - 1.0).abs() > TRACE_TOL || trace.im.abs() > TRACE_TOL {
            return Err(Error::TraceNotOne { trace: trace.re });
        }
        let min_eigenvalue = matrix.hermitian_eigenvalues()?[0];
        if min_eigenvalue < POSITIVITY_TOL {
            return Err(Error::NotPositive { min_eigenvalue });
        }
        Ok(())
    }

    /// Clips negative eigenvalues and renormalizes. Opt-in repair for
    /// estimates that are slightly unphysical.
    pub fn project_to_psd(matrix: &ComplexMatrix, basis_labels: Vec<String>) -> Result<Self> {
        let clipped = matrix.map_spectrum(|x| x.max(0.0))?;
        let trace = clipped.trace().re;
        if trace <= 0.0 {
            return Err(Error::TraceNotOne { trace });
        }
        Self::new(clipped.scale(1.0 / trace), basis_labels)
    }

    pub fn maximally_mixed(basis_labels: Vec<String>) -> Self {
        let n = basis_labels.len();
        Self { matrix: ComplexMatrix::identity(n).scale(1.0 / n as f64), basis_labels }
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn basis_labels(&self) -> &[String] {
        &self.basis_labels
    }

    pub fn with_labels(&self, basis_labels: Vec<String>) -> Result<Self> {
        if basis_labels.len() != self.dim() {
            return Err(Error::LabelMismatch { labels: basis_labels.len(), dim: self.dim() });
        }
        Ok(Self { matrix: self.matrix.clone(), basis_labels })
    }

    pub fn require_labels(&self, expected: &[&str]) -> Result<()> {
        if self.basis_labels.iter().map(String::as_str).ne(expected.iter().copied()) {
            return Err(Error::WrongBasis { expected: labels(expected), found: self.basis_labels.clone() });
        }
        Ok(())
    }

    /// `Tr[A rho]`, real part (A assumed Hermitian).
    pub fn expectation(&self, op: &ComplexMatrix) -> Result<f64> {
        if op.shape() != (self.dim(), self.dim()) {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: op.rows() });
        }
        Ok((op * &self.matrix).trace().re)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.matrix.hermitian_eigenvalues().expect("validated square matrix")
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    /// `p * self + (1 - p) * other`.
    pub fn mix(&self, other: &DensityMatrix, p: f64) -> Result<DensityMatrix> {
        if other.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::OutOfRange { name: "mixing weight", value: p, min: 0.0, max: 1.0 });
        }
        let m = self.matrix.scale(p) + other.matrix.scale(1.0 - p);
        Ok(Self { matrix: m, basis_labels: self.basis_labels.clone() })
    }

    /// `rho_u ⊗ rho_v` with concatenated labels.
    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        let mut labels = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.basis_labels {
            for b in &other.basis_labels {
                labels.push(format!("{a}{b}"));
            }
        }
        DensityMatrix { matrix: tensor(&self.matrix, &other.matrix), basis_labels: labels }
    }

    /// Applies `K rho K^†` for each Kraus operator and sums; re-validates.
    pub fn apply_kraus(&self, kraus: &[ComplexMatrix]) -> Result<DensityMatrix> {
        let mut out = ComplexMatrix::zeros(self.dim(), self.dim());
        for k in kraus {
            out = out + k * &self.matrix * k.adjoint();
        }
        DensityMatrix::new(out.hermitian_part(), self.basis_labels.clone())
    }

    /// Unitary conjugation `U rho U^†`.
    pub fn conjugate(&self, u: &ComplexMatrix) -> Result<DensityMatrix> {
        let m = u * &self.matrix * u.adjoint();
        DensityMatrix::new(m.hermitian_part(), self.basis_labels.clone())
    }
}

/// Reduced state of a `2 ⊗ 2` density matrix on the kept qubit.
pub fn partial_trace(rho: &DensityMatrix, keep: Subsystem) -> Result<DensityMatrix> {
    if rho.dim() != 4 {
        return Err(Error::DimensionMismatch { expected: 4, found: rho.dim() });
    }
    let m = rho.matrix();
    let mut out = ComplexMatrix::zeros(2, 2);
    for i in 0..2 {
        for j in 0..2 {
            let mut acc = ZERO;
            for k in 0..2 {
                acc += match keep {
                    Subsystem::U => m[(2 * i + k, 2 * j + k)],
                    Subsystem::V => m[(2 * k + i, 2 * k + j)],
                };
            }
            out[(i, j)] = acc;
        }
    }
    let labels = reduced_labels(rho.basis_labels(), keep);
    Ok(DensityMatrix::new_unchecked(out, labels))
}

fn reduced_labels(full: &[String], keep: Subsystem) -> Vec<String> {
    let pick = |idx: usize| -> Option<String> {
        let chars: Vec<char> = full.get(idx)?.chars().collect();
        if chars.len() != 2 {
            return None;
        }
        Some(match keep {
            Subsystem::U => chars[0].to_string(),
            Subsystem::V => chars[1].to_string(),
        })
    };
    let (a, b) = match keep {
        Subsystem::U => (pick(0), pick(2)),
        Subsystem::V => (pick(0), pick(1)),
    };
    match (a, b) {
        (Some(a), Some(b)) if a != b => vec![a, b],
        _ => labels(&QUBIT_BASIS),
    }
}

/// `<psi| rho |psi>`.
pub fn fidelity_pure(rho: &DensityMatrix, psi: &PureState) -> Result<f64> {
    if rho.dim() != psi.dim() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), found: psi.dim() });
    }
    let v = psi.to_vector();
    let value = (v.adjoint() * rho.matrix().as_nalgebra() * &v)[(0, 0)];
    Ok(value.re)
}
