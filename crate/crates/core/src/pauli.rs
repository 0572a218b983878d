//! Pauli strings, dense operators, and the normalized Frobenius inner product.
//!
//! Labels are ordered base-4 with `I=0, X=1, Y=2, Z=3` and qubit 0 as the
//! most significant digit, so `"IZ"` has index 3 and `"ZI"` has index 12.
//! Matrices follow the same convention: qubit 0 is the leftmost Kronecker
//! factor.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::settings::Settings;
use crate::{Error, Result};

const ALPHABET: [char; 4] = ['I', 'X', 'Y', 'Z'];

/// An N-qubit Pauli string over `{I, X, Y, Z}`, stored as its base-4 index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliLabel {
    num_qubits: usize,
    index: usize,
}

impl PauliLabel {
    pub fn from_index(num_qubits: usize, index: usize) -> Result<Self> {
        // 4^31 overflows nothing on 64-bit, but nothing sensible needs more.
        if num_qubits == 0 || num_qubits > 31 {
            return Err(Error::InvalidLabel {
                label: format!("#{index}"),
                reason: format!("qubit count {num_qubits} out of range"),
            });
        }
        if index >= 1usize << (2 * num_qubits) {
            return Err(Error::InvalidLabel {
                label: format!("#{index}"),
                reason: format!("index out of range for {num_qubits} qubits"),
            });
        }
        Ok(PauliLabel { num_qubits, index })
    }

    pub fn identity(num_qubits: usize) -> Self {
        PauliLabel {
            num_qubits,
            index: 0,
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn is_identity(&self) -> bool {
        self.index == 0
    }

    /// Single-qubit factor on `qubit` as 0..4 (`I, X, Y, Z`).
    pub fn factor(&self, qubit: usize) -> u8 {
        let shift = 2 * (self.num_qubits - 1 - qubit);
        ((self.index >> shift) & 3) as u8
    }

    pub fn factor_char(&self, qubit: usize) -> char {
        ALPHABET[self.factor(qubit) as usize]
    }

    /// Bit masks over basis-state indices: `(x_mask, z_mask, y_count)`.
    ///
    /// Qubit `q` maps to bit `n - 1 - q` of a basis index.
    fn masks(&self) -> (usize, usize, u32) {
        let mut x_mask = 0;
        let mut z_mask = 0;
        let mut y_count = 0;
        for q in 0..self.num_qubits {
            let bit = 1 << (self.num_qubits - 1 - q);
            match self.factor(q) {
                1 => x_mask |= bit,
                2 => {
                    x_mask |= bit;
                    z_mask |= bit;
                    y_count += 1;
                }
                3 => z_mask |= bit,
                _ => {}
            }
        }
        (x_mask, z_mask, y_count)
    }

    /// Sparse action of the Pauli matrix: `row ↦ (column, entry)` for its
    /// single nonzero entry in that row.
    pub fn sparse(&self) -> SparsePauli {
        let (x_mask, z_mask, y_count) = self.masks();
        // Y = [[0, -i], [i, 0]] = -i · (X with a Z-style sign on row 1).
        let y_phase = match y_count % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, -1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, 1.0),
        };
        SparsePauli {
            x_mask,
            z_mask,
            y_phase,
        }
    }
}

/// Row-wise sparse form of a Pauli string: a signed, phased permutation.
#[derive(Clone, Copy, Debug)]
pub struct SparsePauli {
    x_mask: usize,
    z_mask: usize,
    y_phase: Complex64,
}

impl SparsePauli {
    /// Column and value of the nonzero entry in `row`.
    #[inline]
    pub fn entry(&self, row: usize) -> (usize, Complex64) {
        let col = row ^ self.x_mask;
        let sign = if (row & self.z_mask).count_ones() % 2 == 1 {
            -1.0
        } else {
            1.0
        };
        (col, self.y_phase * sign)
    }
}

impl fmt::Display for PauliLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in 0..self.num_qubits {
            write!(f, "{}", self.factor_char(q))?;
        }
        Ok(())
    }
}

impl FromStr for PauliLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let invalid = |reason: &str| Error::InvalidLabel {
            label: s.to_string(),
            reason: reason.to_string(),
        };
        if s.is_empty() {
            return Err(invalid("empty label"));
        }
        let mut index = 0usize;
        let mut n = 0usize;
        for c in s.chars() {
            let digit = ALPHABET
                .iter()
                .position(|&a| a == c)
                .ok_or_else(|| invalid("characters must be one of I, X, Y, Z"))?;
            index = index
                .checked_mul(4)
                .ok_or_else(|| invalid("too many qubits"))?
                + digit;
            n += 1;
        }
        PauliLabel::from_index(n, index).map_err(|_| invalid("too many qubits"))
    }
}

impl Serialize for PauliLabel {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PauliLabel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A square complex matrix of dimension at least 2 with finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseOperator {
    matrix: DMatrix<Complex64>,
}

impl DenseOperator {
    pub fn new(matrix: DMatrix<Complex64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Dimension(format!(
                "operator must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.nrows() < 2 {
            return Err(Error::Dimension(format!(
                "operator dimension must be at least 2, got {}",
                matrix.nrows()
            )));
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Invalid("operator has non-finite entries".into()));
        }
        Ok(DenseOperator { matrix })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::new(DMatrix::identity(dim, dim))
    }

    pub fn from_diagonal(diagonal: &[Complex64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diagonal)))
    }

    /// Builds from row-major entries.
    pub fn from_row_major(dim: usize, entries: &[Complex64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::Dimension(format!(
                "expected {} entries for a {dim}x{dim} operator, got {}",
                dim * dim,
                entries.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(dim, dim, entries))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Qubit count when the dimension is a power of two.
    pub fn num_qubits(&self) -> Option<usize> {
        qubits_for_dim(self.dim())
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.matrix
    }

    pub fn adjoint(&self) -> DenseOperator {
        DenseOperator {
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn mul(&self, rhs: &DenseOperator) -> Result<DenseOperator> {
        if self.dim() != rhs.dim() {
            return Err(Error::Dimension(format!(
                "cannot multiply {0}x{0} by {1}x{1}",
                self.dim(),
                rhs.dim()
            )));
        }
        Ok(DenseOperator {
            matrix: &self.matrix * &rhs.matrix,
        })
    }

    /// ‖A†A − 1‖_max.
    pub fn unitarity_deviation(&self) -> f64 {
        let gram = self.matrix.adjoint() * &self.matrix;
        gram.iter()
            .enumerate()
            .map(|(k, z)| {
                let (i, j) = (k % self.dim(), k / self.dim());
                let target = if i == j { 1.0 } else { 0.0 };
                (z - Complex64::new(target, 0.0)).norm()
            })
            .fold(0.0, f64::max)
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_deviation() <= tol
    }

    /// Errors unless the operator is unitary within tolerance or the
    /// settings admit non-physical inputs.
    pub fn ensure_unitary(&self, settings: &Settings, what: &str) -> Result<()> {
        if settings.allow_nonphysical {
            return Ok(());
        }
        let dev = self.unitarity_deviation();
        if dev > settings.unitarity_tol {
            return Err(Error::Physicality(format!(
                "{what} is not unitary: max |U†U - 1| = {dev:e} exceeds {:e}",
                settings.unitarity_tol
            )));
        }
        Ok(())
    }
}

/// `log2(dim)` when `dim` is a power of two and at least 2.
pub fn qubits_for_dim(dim: usize) -> Option<usize> {
    (dim >= 2 && dim.is_power_of_two()).then(|| dim.trailing_zeros() as usize)
}

/// All `4^n` labels in index order, starting with the all-identity string.
pub fn pauli_basis(n: usize, settings: &Settings) -> Result<Vec<PauliLabel>> {
    settings.check_qubits(n)?;
    Ok((0..1usize << (2 * n))
        .map(|index| PauliLabel {
            num_qubits: n,
            index,
        })
        .collect())
}

/// Dense `2^n × 2^n` matrix of a Pauli string.
pub fn materialize(p: &PauliLabel) -> DenseOperator {
    let dim = 1usize << p.num_qubits();
    let sparse = p.sparse();
    let mut m = DMatrix::zeros(dim, dim);
    for row in 0..dim {
        let (col, value) = sparse.entry(row);
        m[(row, col)] = value;
    }
    DenseOperator { matrix: m }
}

/// `Tr(A†B) / norm_dim`.
///
/// `norm_dim` defaults to the shared dimension; leakage callers pass the
/// computational-subspace dimension instead.
pub fn frobenius_inner(a: &DenseOperator, b: &DenseOperator, norm_dim: Option<usize>) -> Result<Complex64> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension(format!(
            "inner product of {0}x{0} and {1}x{1} operators",
            a.dim(),
            b.dim()
        )));
    }
    let norm = norm_dim.unwrap_or(a.dim());
    if norm == 0 {
        return Err(Error::Invalid("normalization dimension must be at least 1".into()));
    }
    Ok(matrix_inner(a.matrix(), b.matrix()) / norm as f64)
}

/// Unnormalized `Tr(A†B) = Σ conj(a_ij) b_ij`.
pub(crate) fn matrix_inner(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}
