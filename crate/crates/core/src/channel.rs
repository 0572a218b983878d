//! Superoperators acting on row-major vectorized operators.
//!
//! `vec(|a⟩⟨b|)` sits at index `a·D + b`, so conjugation `ρ ↦ UρU†` is the
//! Kronecker product `U ⊗ U*`. Channel inner products are normalized by the
//! superoperator's matrix dimension `D²`, which makes the `P ⊗ Q*` family
//! orthonormal.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::pauli::{matrix_inner, qubits_for_dim, DenseOperator, PauliLabel};
use crate::settings::Settings;
use crate::{Error, Result};

/// Outcome of [`check_physicality`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysicalityReport {
    pub trace_preserving: bool,
    pub hermiticity_preserving: bool,
    pub diagonal_real: bool,
    /// max over columns of |Σ_a S[(a,a),(c,d)] − δ_cd|
    pub trace_deviation: f64,
    /// max |S[(a,b),(c,d)] − conj S[(b,a),(d,c)]|
    pub hermiticity_deviation: f64,
    /// max |Im w_PP|; NaN when the dimension is not a power of two.
    pub diagonal_imag: f64,
}

impl PhysicalityReport {
    pub fn all_pass(&self) -> bool {
        self.trace_preserving && self.hermiticity_preserving && self.diagonal_real
    }
}

/// A `D² × D²` matrix representing a linear map on `D × D` operators.
#[derive(Clone, Debug, PartialEq)]
pub struct SuperOperator {
    dim: usize,
    matrix: DMatrix<Complex64>,
    last_check: Option<PhysicalityReport>,
}

impl SuperOperator {
    /// `dim` is the underlying operator dimension `D`.
    pub fn new(dim: usize, matrix: DMatrix<Complex64>) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Dimension(format!(
                "superoperator operator dimension must be at least 2, got {dim}"
            )));
        }
        let size = dim * dim;
        if matrix.nrows() != size || matrix.ncols() != size {
            return Err(Error::Dimension(format!(
                "superoperator on {dim}x{dim} operators must be {size}x{size}, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Invalid("superoperator has non-finite entries".into()));
        }
        Ok(SuperOperator {
            dim,
            matrix,
            last_check: None,
        })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::new(dim, DMatrix::identity(dim * dim, dim * dim))
    }

    /// Operator dimension `D`; the matrix is `D² × D²`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_qubits(&self) -> Option<usize> {
        qubits_for_dim(self.dim)
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.matrix
    }

    /// Physicality status from the most recent [`SuperOperator::record_physicality`].
    pub fn last_check(&self) -> Option<&PhysicalityReport> {
        self.last_check.as_ref()
    }

    pub fn record_physicality(&mut self, tol: f64) -> PhysicalityReport {
        let report = check_physicality(self, tol);
        self.last_check = Some(report);
        report
    }

    /// Applies the channel to an operator.
    pub fn apply(&self, rho: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
        if rho.nrows() != self.dim || rho.ncols() != self.dim {
            return Err(Error::Dimension(format!(
                "channel on {0}x{0} operators applied to {1}x{2}",
                self.dim,
                rho.nrows(),
                rho.ncols()
            )));
        }
        Ok(devectorize(&(&self.matrix * vectorize(rho)), self.dim))
    }

    fn matrix_size(&self) -> usize {
        self.dim * self.dim
    }
}

/// Row-major flattening: entry `(a, b)` lands at `a·D + b`.
pub fn vectorize(op: &DMatrix<Complex64>) -> DVector<Complex64> {
    // nalgebra stores column-major; the transpose's storage is our row-major order.
    DVector::from_column_slice(op.transpose().as_slice())
}

pub fn devectorize(v: &DVector<Complex64>, dim: usize) -> DMatrix<Complex64> {
    DMatrix::from_row_slice(dim, dim, v.as_slice())
}

fn check_channel_dim(dim: usize, settings: &Settings) -> Result<()> {
    let cap = settings.max_channel_qubits;
    if dim > 1usize << cap {
        return Err(Error::SizeLimit {
            what: "superoperator construction",
            requested: usize::BITS as usize - (dim - 1).leading_zeros() as usize,
            cap,
        });
    }
    Ok(())
}

/// `U ⊗ U*`, the superoperator of `ρ ↦ UρU†`.
pub fn lift_unitary(u: &DenseOperator, settings: &Settings) -> Result<SuperOperator> {
    check_channel_dim(u.dim(), settings)?;
    u.ensure_unitary(settings, "lifted operator")?;
    Ok(lift_operator(u))
}

/// `A ⊗ A*` without a unitarity check.
pub(crate) fn lift_operator(a: &DenseOperator) -> SuperOperator {
    let m = a.matrix();
    SuperOperator {
        dim: a.dim(),
        matrix: m.kronecker(&m.conjugate()),
        last_check: None,
    }
}

/// Collects `vec(oracle(|a⟩⟨b|))` into column `a·D + b`.
///
/// Columns are evaluated in parallel; the result does not depend on the
/// evaluation order.
pub fn channel_from_oracle<F>(oracle: F, dim: usize, settings: &Settings) -> Result<SuperOperator>
where
    F: Fn(&DenseOperator) -> DenseOperator + Sync,
{
    if dim < 2 {
        return Err(Error::Dimension(format!("oracle dimension must be at least 2, got {dim}")));
    }
    check_channel_dim(dim, settings)?;
    let size = dim * dim;
    let columns: Vec<DVector<Complex64>> = (0..size)
        .into_par_iter()
        .map(|col| {
            let (a, b) = (col / dim, col % dim);
            let mut unit = DMatrix::zeros(dim, dim);
            unit[(a, b)] = Complex64::new(1.0, 0.0);
            let input = DenseOperator::new(unit).expect("unit matrix is valid");
            let out = oracle(&input);
            if out.dim() != dim {
                return Err(Error::Dimension(format!(
                    "oracle mapped a {dim}x{dim} input to {0}x{0}",
                    out.dim()
                )));
            }
            Ok(vectorize(out.matrix()))
        })
        .collect::<Result<_>>()?;
    SuperOperator::new(dim, DMatrix::from_columns(&columns))
}

/// `outer ∘ inner`.
pub fn compose(outer: &SuperOperator, inner: &SuperOperator) -> Result<SuperOperator> {
    if outer.dim != inner.dim {
        return Err(Error::Dimension(format!(
            "cannot compose channels on dimensions {} and {}",
            outer.dim, inner.dim
        )));
    }
    SuperOperator::new(outer.dim, &outer.matrix * &inner.matrix)
}

/// Conjugate transpose; conjugates every Pauli-pair coefficient.
pub fn adjoint_channel(s: &SuperOperator) -> SuperOperator {
    SuperOperator {
        dim: s.dim,
        matrix: s.matrix.adjoint(),
        last_check: None,
    }
}

/// `(1/D²) Σ_{a,b} ⟨a|𝓒(|a⟩⟨b|)|b⟩`, possibly complex.
pub fn entanglement_fidelity_complex(s: &SuperOperator) -> Complex64 {
    let d = s.dim;
    let mut total = Complex64::new(0.0, 0.0);
    for a in 0..d {
        for b in 0..d {
            // ⟨a|𝓒(|a⟩⟨b|)|b⟩ is row a·D+b of column a·D+b.
            total += s.matrix[(a * d + b, a * d + b)];
        }
    }
    total / (d * d) as f64
}

/// Entanglement fidelity with a maximally entangled reference, computed
/// without forming the doubled state.
pub fn entanglement_fidelity(s: &SuperOperator, settings: &Settings) -> Result<f64> {
    let f = entanglement_fidelity_complex(s);
    if f.im.abs() > settings.realness_tol {
        return Err(Error::Physicality(format!(
            "entanglement fidelity has imaginary part {:e} (tolerance {:e})",
            f.im, settings.realness_tol
        )));
    }
    Ok(f.re)
}

/// `Tr(A†B) / D²` over superoperator matrices.
pub fn channel_inner(a: &SuperOperator, b: &SuperOperator) -> Result<Complex64> {
    if a.dim != b.dim {
        return Err(Error::Dimension(format!(
            "inner product of channels on dimensions {} and {}",
            a.dim, b.dim
        )));
    }
    Ok(matrix_inner(&a.matrix, &b.matrix) / a.matrix_size() as f64)
}

/// `√(Tr[(A−B)†(A−B)] / D²)`.
pub fn channel_distance(a: &SuperOperator, b: &SuperOperator) -> Result<f64> {
    if a.dim != b.dim {
        return Err(Error::Dimension(format!(
            "distance between channels on dimensions {} and {}",
            a.dim, b.dim
        )));
    }
    let sq: f64 = a
        .matrix
        .iter()
        .zip(b.matrix.iter())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum();
    Ok((sq / a.matrix_size() as f64).sqrt())
}

/// `⟨P ⊗ Q*, S⟩` using the single nonzero per row of `P ⊗ Q*`.
pub fn pauli_pair_coefficient(s: &SuperOperator, p: &PauliLabel, q: &PauliLabel) -> Complex64 {
    let d = s.dim;
    let sp = p.sparse();
    let sq = q.sparse();
    let mut total = Complex64::new(0.0, 0.0);
    for a in 0..d {
        let (c, pv) = sp.entry(a);
        for b in 0..d {
            let (e, qv) = sq.entry(b);
            // (P ⊗ Q*)[(a,b),(c,e)] = P[a,c]·conj(Q[b,e])
            total += pv.conj() * qv * s.matrix[(a * d + b, c * d + e)];
        }
    }
    total / (d * d) as f64
}

/// Dense `P ⊗ Q*`.
pub fn pauli_pair_superoperator(p: &PauliLabel, q: &PauliLabel) -> Result<SuperOperator> {
    if p.num_qubits() != q.num_qubits() {
        return Err(Error::Dimension(format!(
            "Pauli pair {p}, {q} has mismatched qubit counts"
        )));
    }
    let d = 1usize << p.num_qubits();
    let sp = p.sparse();
    let sq = q.sparse();
    let mut m = DMatrix::zeros(d * d, d * d);
    for a in 0..d {
        let (c, pv) = sp.entry(a);
        for b in 0..d {
            let (e, qv) = sq.entry(b);
            m[(a * d + b, c * d + e)] = pv * qv.conj();
        }
    }
    SuperOperator::new(d, m)
}

/// Report-only physicality checks; `s` is left untouched.
pub fn check_physicality(s: &SuperOperator, tol: f64) -> PhysicalityReport {
    let d = s.dim;
    let m = &s.matrix;

    let mut trace_deviation: f64 = 0.0;
    for c in 0..d {
        for e in 0..d {
            let col = c * d + e;
            let tr: Complex64 = (0..d).map(|a| m[(a * d + a, col)]).sum();
            let target = if c == e { 1.0 } else { 0.0 };
            trace_deviation = trace_deviation.max((tr - target).norm());
        }
    }

    let mut hermiticity_deviation: f64 = 0.0;
    for a in 0..d {
        for b in 0..d {
            for c in 0..d {
                for e in 0..d {
                    let x = m[(a * d + b, c * d + e)];
                    let y = m[(b * d + a, e * d + c)];
                    hermiticity_deviation = hermiticity_deviation.max((x - y.conj()).norm());
                }
            }
        }
    }

    let diagonal_imag = match s.num_qubits() {
        Some(n) => (0..1usize << (2 * n))
            .into_par_iter()
            .map(|index| {
                let p = PauliLabel::from_index(n, index).expect("index in range");
                pauli_pair_coefficient(s, &p, &p).im.abs()
            })
            .reduce(|| 0.0, f64::max),
        None => f64::NAN,
    };

    PhysicalityReport {
        trace_preserving: trace_deviation <= tol,
        hermiticity_preserving: hermiticity_deviation <= tol,
        diagonal_real: diagonal_imag.is_nan() || diagonal_imag <= tol,
        trace_deviation,
        hermiticity_deviation,
        diagonal_imag,
    }
}
