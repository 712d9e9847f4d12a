use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn r(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Dense complex matrix. Indexing is `(row, col)`; constructors take
/// entries in row-major order.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix", into = "RawMatrix")]
pub struct ComplexMatrix {
    inner: DMatrix<C64>,
}

#[derive(Serialize, Deserialize)]
struct RawMatrix {
    rows: usize,
    cols: usize,
    /// Row-major `[re, im]` pairs.
    entries: Vec<[f64; 2]>,
}

impl TryFrom<RawMatrix> for ComplexMatrix {
    type Error = Error;

    fn try_from(raw: RawMatrix) -> Result<Self> {
        let entries = raw.entries.iter().map(|e| c(e[0], e[1])).collect();
        ComplexMatrix::new(raw.rows, raw.cols, entries)
    }
}

impl From<ComplexMatrix> for RawMatrix {
    fn from(m: ComplexMatrix) -> Self {
        let (rows, cols) = m.shape();
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                let z = m[(i, j)];
                entries.push([z.re, z.im]);
            }
        }
        RawMatrix { rows, cols, entries }
    }
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<C64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::EntryCount { expected: rows * cols, found: entries.len() });
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { inner: DMatrix::from_row_slice(rows, cols, &entries) })
    }

    pub fn from_real(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        Self::new(rows, cols, entries.iter().map(|&x| r(x)).collect())
    }

    pub fn from_nalgebra(inner: DMatrix<C64>) -> Self {
        Self { inner }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { inner: DMatrix::zeros(rows, cols) }
    }

    pub fn identity(n: usize) -> Self {
        Self { inner: DMatrix::identity(n, n) }
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        Self { inner: DMatrix::from_diagonal(&DVector::from_column_slice(diag)) }
    }

    /// Outer product `|a><b|`.
    pub fn outer(a: &DVector<C64>, b: &DVector<C64>) -> Self {
        Self { inner: a * b.adjoint() }
    }

    pub fn pauli_x() -> Self {
        Self::new(2, 2, vec![ZERO, ONE, ONE, ZERO]).expect("static")
    }

    pub fn pauli_y() -> Self {
        Self::new(2, 2, vec![ZERO, -I, I, ZERO]).expect("static")
    }

    pub fn pauli_z() -> Self {
        Self::new(2, 2, vec![ONE, ZERO, ZERO, -ONE]).expect("static")
    }

    pub fn rows(&self) -> usize {
        self.inner.nrows()
    }

    pub fn cols(&self) -> usize {
        self.inner.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.inner.shape()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn as_nalgebra(&self) -> &DMatrix<C64> {
        &self.inner
    }

    pub fn into_nalgebra(self) -> DMatrix<C64> {
        self.inner
    }

    pub fn adjoint(&self) -> Self {
        Self { inner: self.inner.adjoint() }
    }

    pub fn transpose(&self) -> Self {
        Self { inner: self.inner.transpose() }
    }

    pub fn conj(&self) -> Self {
        Self { inner: self.inner.map(|z| z.conj()) }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { inner: self.inner.map(|z| z * s) }
    }

    pub fn scale_c(&self, s: C64) -> Self {
        Self { inner: self.inner.map(|z| z * s) }
    }

    pub fn trace(&self) -> C64 {
        self.inner.trace()
    }

    /// `(A + A^†)/2`.
    pub fn hermitian_part(&self) -> Self {
        Self { inner: (&self.inner + self.inner.adjoint()) * r(0.5) }
    }

    pub fn max_abs(&self) -> f64 {
        self.inner.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.shape(), other.shape(), "shape mismatch in max_abs_diff");
        self.inner.iter().zip(other.inner.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    /// Eigen-decomposition of the Hermitian part. Eigenvalues ascending,
    /// eigenvectors in the matching columns.
    pub fn hermitian_eigen(&self) -> Result<(Vec<f64>, ComplexMatrix)> {
        if !self.is_square() {
            return Err(Error::NotSquare { rows: self.rows(), cols: self.cols() });
        }
        let h = self.hermitian_part().inner;
        let eig = h.symmetric_eigen();
        let n = self.rows();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Eigen);
        }
        let vectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
        Ok((values, Self { inner: vectors }))
    }

    pub fn hermitian_eigenvalues(&self) -> Result<Vec<f64>> {
        self.hermitian_eigen().map(|(v, _)| v)
    }

    /// `V diag(f(λ)) V^†` for the Hermitian part of `self`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let (values, vectors) = self.hermitian_eigen()?;
        Ok(reassemble(&vectors, &values.iter().map(|&x| f(x)).collect::<Vec<_>>()))
    }

    pub fn singular_values(&self) -> Vec<f64> {
        self.inner.clone().svd(false, false).singular_values.iter().copied().collect()
    }

    pub fn column(&self, j: usize) -> DVector<C64> {
        self.inner.column(j).into_owned()
    }

    pub fn mul_vec(&self, v: &DVector<C64>) -> DVector<C64> {
        &self.inner * v
    }
}

/// `V diag(values) V^†`.
pub fn reassemble(vectors: &ComplexMatrix, values: &[f64]) -> ComplexMatrix {
    let n = vectors.rows();
    let mut out = DMatrix::<C64>::zeros(n, n);
    for (k, &lambda) in values.iter().enumerate() {
        if lambda == 0.0 {
            continue;
        }
        let v = vectors.inner.column(k);
        out += (v * v.adjoint()) * r(lambda);
    }
    ComplexMatrix { inner: out }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    fn index(&self, idx: (usize, usize)) -> &C64 {
        &self.inner[idx]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, idx: (usize, usize)) -> &mut C64 {
        &mut self.inner[idx]
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl $trait<&ComplexMatrix> for &ComplexMatrix {
            type Output = ComplexMatrix;

            fn $method(self, rhs: &ComplexMatrix) -> ComplexMatrix {
                ComplexMatrix { inner: &self.inner $op &rhs.inner }
            }
        }

        impl $trait<ComplexMatrix> for ComplexMatrix {
            type Output = ComplexMatrix;

            fn $method(self, rhs: ComplexMatrix) -> ComplexMatrix {
                ComplexMatrix { inner: self.inner $op rhs.inner }
            }
        }

        impl $trait<&ComplexMatrix> for ComplexMatrix {
            type Output = ComplexMatrix;

            fn $method(self, rhs: &ComplexMatrix) -> ComplexMatrix {
                ComplexMatrix { inner: self.inner $op &rhs.inner }
            }
        }

        impl $trait<ComplexMatrix> for &ComplexMatrix {
            type Output = ComplexMatrix;

            fn $method(self, rhs: ComplexMatrix) -> ComplexMatrix {
                ComplexMatrix { inner: &self.inner $op rhs.inner }
            }
        }
    };
}

binop!(Add, add, +);
binop!(Sub, sub, -);
binop!(Mul, mul, *);

impl Neg for ComplexMatrix {
    type Output = ComplexMatrix;

    fn neg(self) -> ComplexMatrix {
        ComplexMatrix { inner: -self.inner }
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows(), self.cols())?;
        for i in 0..self.rows() {
            write!(f, "  ")?;
            for j in 0..self.cols() {
                let z = self[(i, j)];
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Kronecker product; the left operand's index is the major one.
pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix { inner: a.inner.kronecker(&b.inner) }
}

/// Left-to-right Kronecker product of several factors.
pub fn tensor_all<'a>(factors: impl IntoIterator<Item = &'a ComplexMatrix>) -> ComplexMatrix {
    factors
        .into_iter()
        .fold(ComplexMatrix::identity(1), |acc, m| tensor(&acc, m))
}

/// Sum of singular values, `Tr sqrt(A A^†)`.
pub fn trace_norm(a: &ComplexMatrix) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::NotSquare { rows: a.rows(), cols: a.cols() });
    }
    Ok(a.singular_values().iter().sum())
}

/// Element-wise transpose in the fixed computational basis.
pub fn transpose_computational(a: &ComplexMatrix) -> ComplexMatrix {
    a.transpose()
}

/// Bipartite subsystem selector; `U` is the left (major) factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Subsystem {
    U,
    V,
}

/// Partial transpose of a `2 ⊗ 2` operator on the chosen qubit.
pub fn partial_transpose(a: &ComplexMatrix, which: Subsystem) -> Result<ComplexMatrix> {
    if a.shape() != (4, 4) {
        return Err(Error::DimensionMismatch { expected: 4, found: a.rows().max(a.cols()) });
    }
    let mut out = ComplexMatrix::zeros(4, 4);
    for iu in 0..2 {
        for iv in 0..2 {
            for ju in 0..2 {
                for jv in 0..2 {
                    let (ru, rv, cu, cv) = match which {
                        Subsystem::U => (ju, iv, iu, jv),
                        Subsystem::V => (iu, jv, ju, iv),
                    };
                    out[(2 * ru + rv, 2 * cu + cv)] = a[(2 * iu + iv, 2 * ju + jv)];
                }
            }
        }
    }
    Ok(out)
}

/// Reorders the qubit factors of a `2^n`-dimensional operator.
/// Output factor `k` is input factor `perm[k]`.
pub fn permute_qubits(a: &ComplexMatrix, perm: &[usize]) -> Result<ComplexMatrix> {
    let n = perm.len();
    let dim = 1usize << n;
    if a.shape() != (dim, dim) {
        return Err(Error::DimensionMismatch { expected: dim, found: a.rows() });
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || seen[p] {
            return Err(Error::InvalidParameter(format!("invalid qubit permutation {perm:?}")));
        }
        seen[p] = true;
    }
    // bit of factor k sits at position (n - 1 - k) in the index
    let map = |out_idx: usize| -> usize {
        let mut in_idx = 0;
        for (k, &p) in perm.iter().enumerate() {
            let bit = (out_idx >> (n - 1 - k)) & 1;
            in_idx |= bit << (n - 1 - p);
        }
        in_idx
    };
    let lookup: Vec<usize> = (0..dim).map(map).collect();
    Ok(ComplexMatrix::from_nalgebra(DMatrix::from_fn(dim, dim, |i, j| a[(lookup[i], lookup[j])])))
}
