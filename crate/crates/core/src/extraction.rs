//! Nearest Pauli channel extraction.
//!
//! For an error unitary `U_err = U U₀†` the Pauli amplitudes are
//! `u_P = ⟨P, U_err⟩`, and the closest Pauli channel (Frobenius metric) puts
//! weight `|u_P|²` on each `P`. For an error channel `S = 𝓤 ∘ Û₀⁻¹` the
//! weights are the diagonal Pauli-pair coefficients `w_PP = ⟨P ⊗ P*, S⟩`.
//! Everything off that diagonal is coherent error no Pauli channel can
//! represent; its squared norm is reported as the coherent residual.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::channel::{compose, lift_unitary, pauli_pair_coefficient, pauli_pair_superoperator, SuperOperator};
use crate::pauli::{pauli_basis, qubits_for_dim, DenseOperator, PauliLabel};
use crate::settings::Settings;
use crate::{Error, Result};

/// Quality indicators carried alongside the extracted probabilities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Diagnostics {
    /// Weight on the all-identity string.
    pub identity_prob: f64,
    /// `Σ_{P≠Q} |w_PQ|²`: squared distance floor to any Pauli channel.
    pub coherent_residual_sq: f64,
    /// Channel distance between the model and the (projected) error channel.
    pub distance_to_source: f64,
}

/// Probabilities `e_P` over all `4^n` Pauli strings plus leaked weight.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliNoiseModel {
    num_qubits: usize,
    probabilities: BTreeMap<PauliLabel, f64>,
    leakage_weight: f64,
    diagnostics: Diagnostics,
}

impl PauliNoiseModel {
    /// Assembles a model from explicit parts. Labels missing from
    /// `probabilities` get weight zero.
    pub fn from_parts(
        num_qubits: usize,
        probabilities: BTreeMap<PauliLabel, f64>,
        leakage_weight: f64,
        diagnostics: Diagnostics,
    ) -> Result<Self> {
        let mut full = BTreeMap::new();
        for index in 0..1usize << (2 * num_qubits) {
            full.insert(PauliLabel::from_index(num_qubits, index)?, 0.0);
        }
        for (label, p) in probabilities {
            if label.num_qubits() != num_qubits {
                return Err(Error::Invalid(format!(
                    "label {label} does not act on {num_qubits} qubits"
                )));
            }
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Invalid(format!("probability of {label} is {p}, outside [0, 1]")));
            }
            full.insert(label, p);
        }
        if !(0.0..=1.0).contains(&leakage_weight) {
            return Err(Error::Invalid(format!("leakage weight {leakage_weight} outside [0, 1]")));
        }
        Ok(PauliNoiseModel {
            num_qubits,
            probabilities: full,
            leakage_weight,
            diagnostics,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn probability(&self, label: &PauliLabel) -> f64 {
        self.probabilities.get(label).copied().unwrap_or(0.0)
    }

    /// All `4^n` probabilities in label-index order.
    pub fn probabilities(&self) -> &BTreeMap<PauliLabel, f64> {
        &self.probabilities
    }

    pub fn probability_vector(&self) -> Vec<f64> {
        self.probabilities.values().copied().collect()
    }

    pub fn leakage_weight(&self) -> f64 {
        self.leakage_weight
    }

    pub fn diagnostics(&self) -> &Diagnostics {
        &self.diagnostics
    }

    pub fn total_probability(&self) -> f64 {
        self.probabilities.values().sum()
    }

    /// `Σ_P e_P P ⊗ P*`.
    pub fn to_channel(&self, settings: &Settings) -> Result<SuperOperator> {
        settings.check_channel_qubits(self.num_qubits)?;
        Ok(pauli_channel_unchecked(self.num_qubits, &self.probability_vector()))
    }
}

/// `Σ_P e_P P ⊗ P*` for a probability vector in label-index order.
pub(crate) fn pauli_channel_unchecked(n: usize, probs: &[f64]) -> SuperOperator {
    let d = 1usize << n;
    let mut m = DMatrix::<Complex64>::zeros(d * d, d * d);
    for (index, &e) in probs.iter().enumerate() {
        if e == 0.0 {
            continue;
        }
        let sp = PauliLabel::from_index(n, index).expect("index in range").sparse();
        for a in 0..d {
            let (c, pa) = sp.entry(a);
            for b in 0..d {
                let (f, pb) = sp.entry(b);
                m[(a * d + b, c * d + f)] += pa * pb.conj() * e;
            }
        }
    }
    SuperOperator::new(d, m).expect("shape is consistent")
}

/// Computational subspace of a larger Hilbert space.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LeakageSpec {
    full_dim: usize,
    comp_indices: Vec<usize>,
}

impl LeakageSpec {
    pub fn new(full_dim: usize, comp_indices: Vec<usize>) -> Result<Self> {
        if comp_indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Invalid(format!(
                "computational indices {comp_indices:?} must be distinct and sorted"
            )));
        }
        if let Some(&bad) = comp_indices.iter().find(|&&i| i >= full_dim) {
            return Err(Error::Invalid(format!(
                "computational index {bad} is outside the {full_dim}-level space"
            )));
        }
        if qubits_for_dim(comp_indices.len()).is_none() {
            return Err(Error::Invalid(format!(
                "computational subspace has {} levels; need a power of two ≥ 2",
                comp_indices.len()
            )));
        }
        Ok(LeakageSpec {
            full_dim,
            comp_indices,
        })
    }

    pub fn full_dim(&self) -> usize {
        self.full_dim
    }

    pub fn comp_indices(&self) -> &[usize] {
        &self.comp_indices
    }

    pub fn comp_dim(&self) -> usize {
        self.comp_indices.len()
    }

    pub fn num_qubits(&self) -> usize {
        qubits_for_dim(self.comp_dim()).expect("validated")
    }

    /// Embeds a computational-subspace operator, acting as identity on the
    /// leaked levels.
    pub fn embed(&self, op: &DenseOperator) -> Result<DenseOperator> {
        if op.dim() != self.comp_dim() {
            return Err(Error::Dimension(format!(
                "cannot embed a {0}x{0} operator into a {1}-level computational subspace",
                op.dim(),
                self.comp_dim()
            )));
        }
        let mut m = DMatrix::identity(self.full_dim, self.full_dim);
        for (i, &r) in self.comp_indices.iter().enumerate() {
            for (j, &c) in self.comp_indices.iter().enumerate() {
                m[(r, c)] = op.matrix()[(i, j)];
            }
        }
        DenseOperator::new(m)
    }
}

/// Pauli-pair coefficients `w_PQ` of a channel, indexed by label index.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientMatrix {
    num_qubits: usize,
    entries: DMatrix<Complex64>,
}

impl CoefficientMatrix {
    pub fn new(num_qubits: usize, entries: DMatrix<Complex64>) -> Result<Self> {
        let size = 1usize << (2 * num_qubits);
        if entries.nrows() != size || entries.ncols() != size {
            return Err(Error::Dimension(format!(
                "coefficient matrix for {num_qubits} qubits must be {size}x{size}"
            )));
        }
        Ok(CoefficientMatrix { num_qubits, entries })
    }

    /// `w_PQ = u_P u_Q*`, the coefficients of `U ⊗ U*`.
    pub fn from_amplitudes(num_qubits: usize, amplitudes: &BTreeMap<PauliLabel, Complex64>) -> Result<Self> {
        let u = DVector::from_iterator(amplitudes.len(), amplitudes.values().copied());
        Self::new(num_qubits, &u * u.adjoint())
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn get(&self, p: &PauliLabel, q: &PauliLabel) -> Complex64 {
        self.entries[(p.index(), q.index())]
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        self.entries.diagonal().iter().copied().collect()
    }

    /// Largest |Im w_PP|.
    pub fn max_diagonal_imag(&self) -> f64 {
        self.entries.diagonal().iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }
}

/// `U U₀†`.
pub fn error_unitary(u: &DenseOperator, u0: &DenseOperator, settings: &Settings) -> Result<DenseOperator> {
    if u.dim() != u0.dim() {
        return Err(Error::Dimension(format!(
            "implementation is {0}x{0} but target is {1}x{1}",
            u.dim(),
            u0.dim()
        )));
    }
    u.ensure_unitary(settings, "implemented gate")?;
    u0.ensure_unitary(settings, "target gate")?;
    u.mul(&u0.adjoint())
}

/// `u_P = ⟨P, U_err⟩` for every Pauli string.
pub fn pauli_coefficients(u_err: &DenseOperator, settings: &Settings) -> Result<BTreeMap<PauliLabel, Complex64>> {
    let n = u_err.num_qubits().ok_or_else(|| {
        Error::Dimension(format!(
            "error unitary dimension {} is not a power of two; supply a leakage subspace",
            u_err.dim()
        ))
    })?;
    let basis = pauli_basis(n, settings)?;
    let d = u_err.dim();
    let m = u_err.matrix();
    let values: Vec<Complex64> = basis
        .par_iter()
        .map(|p| {
            let sp = p.sparse();
            // Tr(P†U)/D with one nonzero per row of P
            let tr: Complex64 = (0..d)
                .map(|row| {
                    let (col, v) = sp.entry(row);
                    v.conj() * m[(row, col)]
                })
                .sum();
            tr / d as f64
        })
        .collect();
    Ok(basis.into_iter().zip(values).collect())
}

/// `𝔼_b ⟨b| P U_err |b⟩` using only state-vector access to `U_err`.
///
/// Prepares each bitstring state, evolves it under the oracle and then `P`,
/// projects back onto the same bitstring, and averages.
pub fn pauli_coefficient_via_bitstrings<F>(p: &PauliLabel, oracle: F) -> Result<Complex64>
where
    F: Fn(&DVector<Complex64>) -> DVector<Complex64>,
{
    let d = 1usize << p.num_qubits();
    let sp = p.sparse();
    let mut total = Complex64::new(0.0, 0.0);
    for b in 0..d {
        let mut state = DVector::zeros(d);
        state[b] = Complex64::new(1.0, 0.0);
        let evolved = oracle(&state);
        if evolved.len() != d {
            return Err(Error::Dimension(format!(
                "state oracle returned length {} for a {d}-dimensional input",
                evolved.len()
            )));
        }
        let mut after_p = DVector::zeros(d);
        for row in 0..d {
            let (col, v) = sp.entry(row);
            after_p[row] = v * evolved[col];
        }
        total += after_p[b];
    }
    Ok(total / d as f64)
}

/// `𝓤 ∘ Û₀⁻¹`.
pub fn error_channel(u_channel: &SuperOperator, u0: &DenseOperator, settings: &Settings) -> Result<SuperOperator> {
    if u_channel.dim() != u0.dim() {
        return Err(Error::Dimension(format!(
            "channel acts on dimension {} but target is {1}x{1}",
            u_channel.dim(),
            u0.dim()
        )));
    }
    compose(u_channel, &lift_unitary(&u0.adjoint(), settings)?)
}

/// All `w_PQ = ⟨P ⊗ Q*, S⟩`.
pub fn coefficient_matrix(s: &SuperOperator, settings: &Settings) -> Result<CoefficientMatrix> {
    let n = channel_qubits(s)?;
    settings.check_channel_qubits(n)?;
    let basis = pauli_basis(n, settings)?;
    let size = basis.len();
    let rows: Vec<Vec<Complex64>> = basis
        .par_iter()
        .map(|p| basis.iter().map(|q| pauli_pair_coefficient(s, p, q)).collect())
        .collect();
    let entries = DMatrix::from_fn(size, size, |i, j| rows[i][j]);
    CoefficientMatrix::new(n, entries)
}

/// `w_PP = 𝔼_{a,b} ⟨a| P S(|a⟩⟨b|) P |b⟩` for every `P`, one fidelity
/// evaluation per Pauli string, never forming the full coefficient matrix.
pub fn diagonal_weights_via_fidelity(s: &SuperOperator, settings: &Settings) -> Result<BTreeMap<PauliLabel, f64>> {
    let n = channel_qubits(s)?;
    settings.check_channel_qubits(n)?;
    let basis = pauli_basis(n, settings)?;
    let d = s.dim();
    let m = s.matrix();
    let values: Vec<Complex64> = basis
        .par_iter()
        .map(|p| {
            let sp = p.sparse();
            let mut total = Complex64::new(0.0, 0.0);
            for a in 0..d {
                let (a_flip, pa) = sp.entry(a);
                for b in 0..d {
                    // P|b⟩ = P[b⊕x, b] |b⊕x⟩, and P is Hermitian.
                    let (b_flip, pb) = sp.entry(b);
                    let out = m[(a_flip * d + b_flip, a * d + b)];
                    total += pa * out * pb.conj();
                }
            }
            total / (d * d) as f64
        })
        .collect();
    let mut weights = BTreeMap::new();
    for (p, w) in basis.into_iter().zip(values) {
        if w.im.abs() > settings.realness_tol {
            return Err(Error::Physicality(format!(
                "fidelity-route weight of {p} has imaginary part {:e} (tolerance {:e})",
                w.im, settings.realness_tol
            )));
        }
        weights.insert(p, w.re);
    }
    Ok(weights)
}

/// `Σ_{P≠Q} |w_PQ|²`.
pub fn coherent_residual(w: &CoefficientMatrix) -> f64 {
    let total: f64 = w.entries.iter().map(|z| z.norm_sqr()).sum();
    let diagonal: f64 = w.entries.diagonal().iter().map(|z| z.norm_sqr()).sum();
    (total - diagonal).max(0.0)
}

/// Coherent residual from the channel norm and its diagonal weights:
/// `‖S‖² − Σ_P |w_PP|²`, since the `P ⊗ Q*` family is a complete
/// orthonormal basis.
pub fn coherent_residual_from_diagonal(s: &SuperOperator, diagonal: &BTreeMap<PauliLabel, f64>) -> f64 {
    let d2 = (s.dim() * s.dim()) as f64;
    let norm_sq: f64 = s.matrix().iter().map(|z| z.norm_sqr()).sum::<f64>() / d2;
    let diag_sq: f64 = diagonal.values().map(|w| w * w).sum();
    (norm_sq - diag_sq).max(0.0)
}

/// Closest Pauli channel to the channel with coefficient matrix `w`.
pub fn nearest_pauli_channel(
    w: &CoefficientMatrix,
    leakage_weight: f64,
    settings: &Settings,
) -> Result<PauliNoiseModel> {
    let n = w.num_qubits;
    let imag = w.max_diagonal_imag();
    if imag > settings.realness_tol {
        return Err(Error::Physicality(format!(
            "diagonal Pauli weights have imaginary part up to {imag:e} (tolerance {:e})",
            settings.realness_tol
        )));
    }
    let diagonal: Vec<f64> = w.diagonal().iter().map(|z| z.re).collect();
    // Im w_PP is below tolerance but still part of the distance.
    let imag_sq: f64 = w.diagonal().iter().map(|z| z.im * z.im).sum();
    project(n, &diagonal, coherent_residual(w) + imag_sq, leakage_weight, settings)
}

/// Closest Pauli channel given only the real diagonal weights and the
/// coherent residual (e.g. from [`diagonal_weights_via_fidelity`] and
/// [`coherent_residual_from_diagonal`]).
pub fn nearest_pauli_channel_from_diagonal(
    diagonal: &BTreeMap<PauliLabel, f64>,
    coherent_residual_sq: f64,
    leakage_weight: f64,
    settings: &Settings,
) -> Result<PauliNoiseModel> {
    let n = diagonal
        .keys()
        .next()
        .map(PauliLabel::num_qubits)
        .ok_or_else(|| Error::Invalid("no diagonal weights supplied".into()))?;
    if diagonal.len() != 1 << (2 * n) || diagonal.keys().enumerate().any(|(i, p)| p.index() != i || p.num_qubits() != n) {
        return Err(Error::Invalid(format!(
            "diagonal weights must cover all {} Pauli strings on {n} qubits",
            1usize << (2 * n)
        )));
    }
    let values: Vec<f64> = diagonal.values().copied().collect();
    project(n, &values, coherent_residual_sq, leakage_weight, settings)
}

fn project(
    n: usize,
    diagonal: &[f64],
    coherent_residual_sq: f64,
    leakage_weight: f64,
    settings: &Settings,
) -> Result<PauliNoiseModel> {
    let floor = settings.negative_floor;
    let mut probabilities = BTreeMap::new();
    let mut mismatch_sq = 0.0;
    for (index, &w) in diagonal.iter().enumerate() {
        let label = PauliLabel::from_index(n, index)?;
        if !w.is_finite() || w < -floor || w > 1.0 + floor {
            return Err(Error::NonPhysicalChannel {
                label: label.to_string(),
                value: w,
                floor,
            });
        }
        let e = w.clamp(0.0, 1.0);
        mismatch_sq += (w - e) * (w - e);
        probabilities.insert(label, e);
    }

    let leakage = check_leakage(leakage_weight)?;
    let total: f64 = probabilities.values().sum::<f64>() + leakage;
    if !settings.allow_nonphysical && (total - 1.0).abs() > settings.sum_tol {
        return Err(Error::Physicality(format!(
            "Pauli weights plus leakage sum to {total:.17}, not 1 within {:e}; the channel is not trace preserving",
            settings.sum_tol
        )));
    }

    let diagnostics = Diagnostics {
        identity_prob: probabilities[&PauliLabel::identity(n)],
        coherent_residual_sq,
        distance_to_source: (coherent_residual_sq + mismatch_sq).sqrt(),
    };
    PauliNoiseModel::from_parts(n, probabilities, leakage, diagnostics)
}

fn check_leakage(weight: f64) -> Result<f64> {
    const SLACK: f64 = 1e-9;
    if !weight.is_finite() || !(-SLACK..=1.0 + SLACK).contains(&weight) {
        return Err(Error::Physicality(format!(
            "leakage weight {weight:e} outside [0, 1]"
        )));
    }
    Ok(weight.clamp(0.0, 1.0))
}

/// Restricts an error unitary on the full space to the computational block.
///
/// Returns the block and `1 − Σ_P |u_P|²` of that block as the leaked weight.
pub fn leakage_project(
    u_full: &DenseOperator,
    spec: &LeakageSpec,
    settings: &Settings,
) -> Result<(DenseOperator, f64)> {
    if u_full.dim() != spec.full_dim() {
        return Err(Error::Dimension(format!(
            "leakage subspace is defined on {} levels but the operator is {1}x{1}",
            spec.full_dim(),
            u_full.dim()
        )));
    }
    let idx = spec.comp_indices();
    let block = DMatrix::from_fn(idx.len(), idx.len(), |i, j| u_full.matrix()[(idx[i], idx[j])]);
    let block = DenseOperator::new(block)?;
    let amplitudes = pauli_coefficients(&block, settings)?;
    let retained: f64 = amplitudes.values().map(|u| u.norm_sqr()).sum();
    let leakage = check_leakage(1.0 - retained)?;
    Ok((block, leakage))
}

/// Channel analogue of [`leakage_project`]: keeps `S[(a,b),(c,e)]` with all
/// four indices in the computational subspace; leaked weight is
/// `1 − Σ_P w_PP` of the block.
pub fn leakage_project_channel(
    s_full: &SuperOperator,
    spec: &LeakageSpec,
    settings: &Settings,
) -> Result<(SuperOperator, f64)> {
    if s_full.dim() != spec.full_dim() {
        return Err(Error::Dimension(format!(
            "leakage subspace is defined on {} levels but the channel acts on {}",
            spec.full_dim(),
            s_full.dim()
        )));
    }
    let idx = spec.comp_indices();
    let (k, full) = (idx.len(), s_full.dim());
    let block = DMatrix::from_fn(k * k, k * k, |r, c| {
        let (a, b) = (idx[r / k], idx[r % k]);
        let (x, y) = (idx[c / k], idx[c % k]);
        s_full.matrix()[(a * full + b, x * full + y)]
    });
    let block = SuperOperator::new(k, block)?;
    let diagonal = diagonal_weights_via_fidelity(&block, settings)?;
    let leakage = check_leakage(1.0 - diagonal.values().sum::<f64>())?;
    Ok((block, leakage))
}

fn channel_qubits(s: &SuperOperator) -> Result<usize> {
    s.num_qubits().ok_or_else(|| {
        Error::Dimension(format!(
            "channel dimension {} is not a power of two; supply a leakage subspace",
            s.dim()
        ))
    })
}

/// Output of a full extraction run.
#[derive(Clone, Debug)]
pub struct Extraction {
    pub model: PauliNoiseModel,
    /// Pauli amplitudes `u_P`, present for the unitary route.
    pub amplitudes: Option<BTreeMap<PauliLabel, Complex64>>,
    pub coefficients: CoefficientMatrix,
}

/// Unitary route: `U, U₀ → U_err → u_P → e_P = |u_P|²`.
///
/// With a leakage subspace, `u` lives on the full space and `u0` may be
/// given either on the full space or on the computational subspace (then it
/// is embedded with identity on the leaked levels).
pub fn extract_from_unitary(
    u: &DenseOperator,
    u0: &DenseOperator,
    leakage: Option<&LeakageSpec>,
    settings: &Settings,
) -> Result<Extraction> {
    let (u_err, leakage_weight) = match leakage {
        None => (error_unitary(u, u0, settings)?, 0.0),
        Some(spec) => {
            let target = if u0.dim() == spec.comp_dim() && u0.dim() != spec.full_dim() {
                spec.embed(u0)?
            } else {
                u0.clone()
            };
            let full = error_unitary(u, &target, settings)?;
            leakage_project(&full, spec, settings)?
        }
    };
    let n = u_err
        .num_qubits()
        .ok_or_else(|| Error::Dimension(format!("error unitary dimension {} is not a power of two", u_err.dim())))?;
    let amplitudes = pauli_coefficients(&u_err, settings)?;
    let coefficients = CoefficientMatrix::from_amplitudes(n, &amplitudes)?;
    let diagonal: BTreeMap<PauliLabel, f64> = amplitudes.iter().map(|(p, u)| (*p, u.norm_sqr())).collect();
    // Σ_{P≠Q} |u_P|²|u_Q|² = (Σ|u_P|²)² − Σ|u_P|⁴
    let total: f64 = diagonal.values().sum();
    let fourth: f64 = diagonal.values().map(|w| w * w).sum();
    let residual = (total * total - fourth).max(0.0);
    let model = nearest_pauli_channel_from_diagonal(&diagonal, residual, leakage_weight, settings)?;
    Ok(Extraction {
        model,
        amplitudes: Some(amplitudes),
        coefficients,
    })
}

/// Channel route: `𝓤, U₀ → 𝓤 ∘ Û₀⁻¹ → w_PQ → e_P = w_PP`.
pub fn extract_from_channel(
    u_channel: &SuperOperator,
    u0: &DenseOperator,
    leakage: Option<&LeakageSpec>,
    settings: &Settings,
) -> Result<Extraction> {
    let (err, leakage_weight) = match leakage {
        None => (error_channel(u_channel, u0, settings)?, 0.0),
        Some(spec) => {
            let target = if u0.dim() == spec.comp_dim() && u0.dim() != spec.full_dim() {
                spec.embed(u0)?
            } else {
                u0.clone()
            };
            let full = error_channel(u_channel, &target, settings)?;
            leakage_project_channel(&full, spec, settings)?
        }
    };
    let coefficients = coefficient_matrix(&err, settings)?;
    let model = nearest_pauli_channel(&coefficients, leakage_weight, settings)?;
    Ok(Extraction {
        model,
        amplitudes: None,
        coefficients,
    })
}

/// `P ⊗ P*` for `P` on `n` qubits.
pub fn pauli_hat(p: &PauliLabel) -> SuperOperator {
    pauli_pair_superoperator(p, p).expect("same label")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{channel_distance, lift_unitary};
    use crate::pauli::{frobenius_inner, materialize};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn label(s: &str) -> PauliLabel {
        s.parse().unwrap()
    }

    fn ez(eps: f64) -> DenseOperator {
        DenseOperator::from_diagonal(&[c(eps.cos(), -eps.sin()), c(eps.cos(), eps.sin())]).unwrap()
    }

    fn cz() -> DenseOperator {
        DenseOperator::from_diagonal(&[c(1., 0.), c(1., 0.), c(1., 0.), c(-1., 0.)]).unwrap()
    }

    fn ez_on_qubit0(eps: f64) -> DenseOperator {
        let m = ez(eps).matrix().kronecker(&DMatrix::identity(2, 2));
        DenseOperator::new(m).unwrap()
    }

    fn dephasing(eps: f64, s: &Settings) -> SuperOperator {
        let a = lift_unitary(&ez(eps), s).unwrap().into_matrix();
        let b = lift_unitary(&ez(-eps), s).unwrap().into_matrix();
        SuperOperator::new(2, (a + b) * c(0.5, 0.)).unwrap()
    }

    fn max_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn error_unitary_examples() {
        let s = Settings::default();
        let u = cz();
        assert!(max_diff(error_unitary(&u, &u, &s).unwrap().matrix(), &DMatrix::identity(4, 4)) < 1e-15);

        let noisy = ez_on_qubit0(0.1).mul(&cz()).unwrap();
        let err = error_unitary(&noisy, &cz(), &s).unwrap();
        assert!(max_diff(err.matrix(), ez_on_qubit0(0.1).matrix()) < 1e-15);

        let id = DenseOperator::identity(4).unwrap();
        assert_eq!(error_unitary(&cz(), &id, &s).unwrap(), cz());
        assert!(matches!(error_unitary(&cz(), &ez(0.1), &s), Err(Error::Dimension(_))));
    }

    #[test]
    fn coefficients_examples() {
        let s = Settings::default();
        let id = pauli_coefficients(&DenseOperator::identity(4).unwrap(), &s).unwrap();
        for (p, u) in &id {
            let expected = if p.is_identity() { 1.0 } else { 0.0 };
            assert_eq!(*u, c(expected, 0.));
        }

        let eps: f64 = 0.1;
        let u = pauli_coefficients(&ez(eps), &s).unwrap();
        assert!((u[&label("I")] - c(eps.cos(), 0.)).norm() < 1e-15);
        assert!((u[&label("Z")] - c(0., -eps.sin())).norm() < 1e-15);
        assert_eq!(u[&label("X")].norm(), 0.0);
        assert_eq!(u[&label("Y")].norm(), 0.0);
    }

    #[test]
    fn coefficients_match_dense_inner_product() {
        let s = Settings::default();
        let u = DenseOperator::new(DMatrix::from_fn(4, 4, |i, j| c((i * 3 + j) as f64 * 0.1, (i as f64 - j as f64) * 0.2))).unwrap();
        let sparse = pauli_coefficients(&u, &s).unwrap();
        for (p, v) in sparse {
            let dense = frobenius_inner(&materialize(&p), &u, None).unwrap();
            assert!((v - dense).norm() < 1e-14, "{p}");
        }
    }

    #[test]
    fn coefficients_need_power_of_two() {
        let s = Settings::default();
        let u = DenseOperator::identity(3).unwrap();
        assert!(matches!(pauli_coefficients(&u, &s), Err(Error::Dimension(_))));
    }

    #[test]
    fn bitstring_routine_examples() {
        let eps: f64 = 0.1;
        let ident = |v: &DVector<Complex64>| v.clone();
        assert_eq!(pauli_coefficient_via_bitstrings(&label("I"), ident).unwrap(), c(1., 0.));

        let u = ez(eps);
        let apply = |v: &DVector<Complex64>| u.matrix() * v;
        let z = pauli_coefficient_via_bitstrings(&label("Z"), apply).unwrap();
        assert!((z - c(0., -eps.sin())).norm() < 1e-15);
        let x = pauli_coefficient_via_bitstrings(&label("X"), apply).unwrap();
        assert_eq!(x, c(0., 0.));
    }

    #[test]
    fn error_channel_examples() {
        let s = Settings::default();
        let lifted = lift_unitary(&cz(), &s).unwrap();
        let err = error_channel(&lifted, &cz(), &s).unwrap();
        assert!(max_diff(err.matrix(), &DMatrix::identity(16, 16)) < 1e-15);

        let noisy = lift_unitary(&ez_on_qubit0(0.1).mul(&cz()).unwrap(), &s).unwrap();
        let err = error_channel(&noisy, &cz(), &s).unwrap();
        let expected = lift_unitary(&ez_on_qubit0(0.1), &s).unwrap();
        assert!(max_diff(err.matrix(), expected.matrix()) < 1e-14);

        // dephasing on qubit 0 applied after CZ
        let deph = SuperOperator::new(4, {
            let a = lift_unitary(&ez_on_qubit0(0.1), &s).unwrap().into_matrix();
            let b = lift_unitary(&ez_on_qubit0(-0.1), &s).unwrap().into_matrix();
            (a + b) * c(0.5, 0.)
        })
        .unwrap();
        let implemented = crate::channel::compose(&deph, &lift_unitary(&cz(), &s).unwrap()).unwrap();
        let err = error_channel(&implemented, &cz(), &s).unwrap();
        assert!(max_diff(err.matrix(), deph.matrix()) < 1e-14);
    }

    #[test]
    fn coefficient_matrix_examples() {
        let s = Settings::default();
        let w = coefficient_matrix(&SuperOperator::identity(4).unwrap(), &s).unwrap();
        for i in 0..16 {
            for j in 0..16 {
                let expected = if i == 0 && j == 0 { 1.0 } else { 0.0 };
                assert!((w.entries()[(i, j)] - c(expected, 0.)).norm() < 1e-15);
            }
        }

        let eps: f64 = 0.1;
        let w = coefficient_matrix(&lift_unitary(&ez(eps), &s).unwrap(), &s).unwrap();
        let (i, z) = (label("I"), label("Z"));
        assert!((w.get(&i, &i).re - eps.cos().powi(2)).abs() < 1e-15);
        assert!((w.get(&z, &z).re - eps.sin().powi(2)).abs() < 1e-15);
        assert!((w.get(&i, &z).norm() - eps.cos() * eps.sin()).abs() < 1e-15);
        assert!((w.get(&z, &i).norm() - eps.cos() * eps.sin()).abs() < 1e-15);

        let w = coefficient_matrix(&dephasing(eps, &s), &s).unwrap();
        assert!(coherent_residual(&w) < 1e-30);
    }

    #[test]
    fn coefficient_matrix_of_unitary_lift_is_outer_product() {
        let s = Settings::default();
        let u = ez_on_qubit0(0.2).mul(&DenseOperator::new(materialize(&label("XY")).into_matrix() * c(0.6f64.cos(), 0.) + DMatrix::identity(4, 4) * c(0., 0.6f64.sin())).unwrap()).unwrap();
        let w = coefficient_matrix(&lift_unitary(&u, &s).unwrap(), &s).unwrap();
        let amps = pauli_coefficients(&u, &s).unwrap();
        let outer = CoefficientMatrix::from_amplitudes(2, &amps).unwrap();
        assert!(max_diff(w.entries(), outer.entries()) < 1e-15);
    }

    #[test]
    fn fidelity_route_examples() {
        let s = Settings::default();
        let id = diagonal_weights_via_fidelity(&SuperOperator::identity(2).unwrap(), &s).unwrap();
        assert_eq!(id.values().copied().collect::<Vec<_>>(), [1.0, 0.0, 0.0, 0.0]);

        let eps: f64 = 0.1;
        let w = diagonal_weights_via_fidelity(&lift_unitary(&ez(eps), &s).unwrap(), &s).unwrap();
        assert!((w[&label("I")] - eps.cos().powi(2)).abs() < 1e-15);
        assert!((w[&label("Z")] - eps.sin().powi(2)).abs() < 1e-15);
        assert!(w[&label("X")].abs() < 1e-15);
    }

    #[test]
    fn nearest_examples() {
        let s = Settings::default();
        let eps: f64 = 0.1;
        let w = coefficient_matrix(&lift_unitary(&ez(eps), &s).unwrap(), &s).unwrap();
        let model = nearest_pauli_channel(&w, 0.0, &s).unwrap();
        assert!((model.probability(&label("I")) - eps.cos().powi(2)).abs() < 1e-15);
        assert!((model.probability(&label("Z")) - eps.sin().powi(2)).abs() < 1e-15);
        assert_eq!(model.leakage_weight(), 0.0);
        let expected_residual = 2.0 * (eps.cos() * eps.sin()).powi(2);
        assert!((model.diagnostics().coherent_residual_sq - expected_residual).abs() < 1e-15);
        assert!((model.diagnostics().distance_to_source - expected_residual.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn nearest_rejects_negative_weight() {
        let s = Settings::default();
        let mut entries = DMatrix::zeros(4, 4);
        entries[(0, 0)] = c(1.0 + 1e-3, 0.);
        entries[(1, 1)] = c(-1e-3, 0.);
        let w = CoefficientMatrix::new(1, entries).unwrap();
        assert!(matches!(nearest_pauli_channel(&w, 0.0, &s), Err(Error::NonPhysicalChannel { .. })));
    }

    #[test]
    fn nearest_clamps_tiny_negative_weight() {
        let s = Settings::default();
        let mut entries = DMatrix::zeros(4, 4);
        entries[(0, 0)] = c(1.0 + 1e-10, 0.);
        entries[(3, 3)] = c(-1e-10, 0.);
        let w = CoefficientMatrix::new(1, entries).unwrap();
        let model = nearest_pauli_channel(&w, 0.0, &s).unwrap();
        assert_eq!(model.probability(&label("Z")), 0.0);
        assert_eq!(model.probability(&label("I")), 1.0);
    }

    #[test]
    fn nearest_rejects_imaginary_diagonal() {
        let s = Settings::default();
        let mut entries = DMatrix::zeros(4, 4);
        entries[(0, 0)] = c(1.0, 1e-6);
        let w = CoefficientMatrix::new(1, entries).unwrap();
        assert!(nearest_pauli_channel(&w, 0.0, &s).unwrap_err().is_physicality());
    }

    #[test]
    fn nearest_rejects_non_trace_preserving_unless_allowed() {
        let s = Settings::default();
        let mut entries = DMatrix::zeros(4, 4);
        entries[(0, 0)] = c(0.5, 0.);
        let w = CoefficientMatrix::new(1, entries).unwrap();
        assert!(nearest_pauli_channel(&w, 0.0, &s).unwrap_err().is_physicality());
        let lax = Settings {
            allow_nonphysical: true,
            ..s
        };
        assert_eq!(nearest_pauli_channel(&w, 0.0, &lax).unwrap().total_probability(), 0.5);
    }

    #[test]
    fn pauli_channel_is_fixed_point() {
        let s = Settings::default();
        let probs = [0.7, 0.1, 0.15, 0.05];
        let ch = pauli_channel_unchecked(1, &probs);
        let model = nearest_pauli_channel(&coefficient_matrix(&ch, &s).unwrap(), 0.0, &s).unwrap();
        for (got, want) in model.probability_vector().iter().zip(probs) {
            assert!((got - want).abs() < 1e-15);
        }
        assert!(model.diagnostics().distance_to_source < 1e-15);
        assert!(channel_distance(&model.to_channel(&s).unwrap(), &ch).unwrap() < 1e-15);
    }

    #[test]
    fn coherent_residual_examples() {
        let s = Settings::default();
        let eps: f64 = 0.1;
        let pauli = pauli_channel_unchecked(1, &[0.9, 0.0, 0.0, 0.1]);
        assert!(coherent_residual(&coefficient_matrix(&pauli, &s).unwrap()) < 1e-30);

        let l = lift_unitary(&ez(eps), &s).unwrap();
        let w = coefficient_matrix(&l, &s).unwrap();
        let expected = 2.0 * eps.cos().powi(2) * eps.sin().powi(2);
        assert!((coherent_residual(&w) - expected).abs() < 1e-15);

        let model = nearest_pauli_channel(&w, 0.0, &s).unwrap();
        let d = channel_distance(&l, &model.to_channel(&s).unwrap()).unwrap();
        assert!((d * d - expected).abs() < 1e-15);

        let diag = diagonal_weights_via_fidelity(&l, &s).unwrap();
        assert!((coherent_residual_from_diagonal(&l, &diag) - expected).abs() < 1e-15);
    }

    #[test]
    fn leakage_spec_validation() {
        assert!(LeakageSpec::new(3, vec![0, 1]).is_ok());
        assert!(LeakageSpec::new(3, vec![1, 0]).is_err());
        assert!(LeakageSpec::new(3, vec![0, 0]).is_err());
        assert!(LeakageSpec::new(3, vec![0, 3]).is_err());
        assert!(LeakageSpec::new(3, vec![0, 1, 2]).is_err());
        assert!(LeakageSpec::new(3, vec![0]).is_err());
    }

    #[test]
    fn leakage_identity() {
        let s = Settings::default();
        let spec = LeakageSpec::new(3, vec![0, 1]).unwrap();
        let (block, leak) = leakage_project(&DenseOperator::identity(3).unwrap(), &spec, &s).unwrap();
        assert_eq!(block.matrix(), &DMatrix::identity(2, 2));
        assert_eq!(leak, 0.0);
    }

    #[test]
    fn leakage_swap_levels() {
        let s = Settings::default();
        let spec = LeakageSpec::new(3, vec![0, 1]).unwrap();
        let mut m = DMatrix::zeros(3, 3);
        m[(0, 0)] = c(1., 0.);
        m[(1, 2)] = c(1., 0.);
        m[(2, 1)] = c(1., 0.);
        let swap = DenseOperator::new(m).unwrap();
        let (block, leak) = leakage_project(&swap, &spec, &s).unwrap();
        assert_eq!(block.matrix(), &DMatrix::from_diagonal(&DVector::from_vec(vec![c(1., 0.), c(0., 0.)])));
        let u = pauli_coefficients(&block, &s).unwrap();
        assert_eq!(u[&label("I")], c(0.5, 0.));
        assert_eq!(u[&label("Z")], c(0.5, 0.));
        assert_eq!(leak, 0.5);
    }

    #[test]
    fn leakage_block_diagonal_is_leak_free() {
        let s = Settings::default();
        // two qutrits; computational levels |00>,|01>,|10>,|11> sit at 0,1,3,4
        let spec = LeakageSpec::new(9, vec![0, 1, 3, 4]).unwrap();
        let mut diag = vec![c(1., 0.); 9];
        diag[4] = c(-1., 0.);
        for (k, z) in diag.iter_mut().enumerate() {
            if ![0, 1, 3, 4].contains(&k) {
                *z = Complex64::from_polar(1.0, 0.3 * k as f64);
            }
        }
        let u = DenseOperator::from_diagonal(&diag).unwrap();
        let ex = extract_from_unitary(&u, &cz(), Some(&spec), &s).unwrap();
        assert!(ex.model.leakage_weight().abs() < 1e-15);
        assert!((ex.model.probability(&PauliLabel::identity(2)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn extract_unitary_with_leakage_swap() {
        let s = Settings::default();
        let spec = LeakageSpec::new(3, vec![0, 1]).unwrap();
        let mut m = DMatrix::zeros(3, 3);
        m[(0, 0)] = c(1., 0.);
        m[(1, 2)] = c(1., 0.);
        m[(2, 1)] = c(1., 0.);
        let swap = DenseOperator::new(m).unwrap();
        let ex = extract_from_unitary(&swap, &DenseOperator::identity(2).unwrap(), Some(&spec), &s).unwrap();
        assert_eq!(ex.model.leakage_weight(), 0.5);
        assert_eq!(ex.model.probability(&label("I")), 0.25);
        assert_eq!(ex.model.probability(&label("Z")), 0.25);

        // same result from the channel route
        let ch = lift_unitary(&swap, &s).unwrap();
        let exc = extract_from_channel(&ch, &DenseOperator::identity(3).unwrap(), Some(&spec), &s).unwrap();
        assert!((exc.model.leakage_weight() - 0.5).abs() < 1e-15);
        assert!((exc.model.probability(&label("Z")) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn unitary_and_channel_routes_agree() {
        let s = Settings::default();
        let noisy = ez_on_qubit0(0.15).mul(&cz()).unwrap();
        let a = extract_from_unitary(&noisy, &cz(), None, &s).unwrap();
        let b = extract_from_channel(&lift_unitary(&noisy, &s).unwrap(), &cz(), None, &s).unwrap();
        for (x, y) in a.model.probability_vector().iter().zip(b.model.probability_vector()) {
            assert!((x - y).abs() < 1e-14);
        }
        let (da, db) = (a.model.diagnostics(), b.model.diagnostics());
        assert!((da.coherent_residual_sq - db.coherent_residual_sq).abs() < 1e-14);
        assert!((da.distance_to_source - db.distance_to_source).abs() < 1e-14);
    }
}
