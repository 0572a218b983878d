//! Analytic and seeded random gates and channels.
//!
//! Random unitaries draw a complex Ginibre matrix from a ChaCha8 stream
//! (`ChaCha8Rng::seed_from_u64(seed)`), filling entries row by row with the
//! real part then the imaginary part of each entry from a standard normal,
//! and orthonormalize it with a Householder QR whose `R` diagonal phases are
//! folded back into `Q`. The result is Haar distributed and identical on
//! every platform for a given seed.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::channel::{lift_unitary, SuperOperator};
use crate::extraction::pauli_channel_unchecked;
use crate::pauli::{DenseOperator, PauliLabel};
use crate::settings::Settings;
use crate::{Error, Result};

const SIMPLEX_TOL: f64 = 1e-12;

/// One weighted unitary in an ensemble.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleMember {
    pub weight: f64,
    pub unitary: DenseOperator,
}

/// `E_Z(ε) = e^{−iεZ} = diag(e^{−iε}, e^{iε})`.
pub fn gen_ez(epsilon: f64) -> Result<DenseOperator> {
    if !epsilon.is_finite() {
        return Err(Error::Invalid(format!("epsilon must be finite, got {epsilon}")));
    }
    DenseOperator::from_diagonal(&[
        Complex64::from_polar(1.0, -epsilon),
        Complex64::from_polar(1.0, epsilon),
    ])
}

/// `diag(1, 1, 1, −e^{−iθ})`: CZ with an excess phase θ on `|11⟩`.
pub fn gen_overrotated_cz(theta: f64) -> Result<DenseOperator> {
    if !theta.is_finite() {
        return Err(Error::Invalid(format!("theta must be finite, got {theta}")));
    }
    let one = Complex64::new(1.0, 0.0);
    DenseOperator::from_diagonal(&[one, one, one, -Complex64::from_polar(1.0, -theta)])
}

/// Haar-random unitary on `n` qubits, deterministic per seed.
pub fn gen_random_unitary(n: usize, seed: u64, settings: &Settings) -> Result<DenseOperator> {
    settings.check_qubits(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(random_unitary_from(&mut rng, 1 << n))
}

fn random_unitary_from(rng: &mut ChaCha8Rng, dim: usize) -> DenseOperator {
    let mut entries = Vec::with_capacity(dim * dim);
    for _ in 0..dim * dim {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        entries.push(Complex64::new(re, im));
    }
    let ginibre = DMatrix::from_row_slice(dim, dim, &entries);
    let (mut q, r) = ginibre.qr().unpack();
    for j in 0..dim {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 { rjj / rjj.norm() } else { Complex64::new(1.0, 0.0) };
        for z in q.column_mut(j).iter_mut() {
            *z *= phase;
        }
    }
    DenseOperator::new(q).expect("QR of a finite matrix is finite")
}

/// `members` random unitaries on `n` qubits with random simplex weights.
pub fn gen_random_ensemble(n: usize, members: usize, seed: u64, settings: &Settings) -> Result<Vec<EnsembleMember>> {
    settings.check_qubits(n)?;
    if members == 0 {
        return Err(Error::Invalid("ensemble needs at least one member".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..members).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = raw.iter().sum();
    Ok(raw
        .into_iter()
        .map(|w| EnsembleMember {
            weight: w / total,
            unitary: random_unitary_from(&mut rng, 1 << n),
        })
        .collect())
}

/// Random mixed-unitary channel: the average of a seeded random ensemble.
pub fn gen_random_channel(n: usize, members: usize, seed: u64, settings: &Settings) -> Result<SuperOperator> {
    average_channel(&gen_random_ensemble(n, members, seed, settings)?, settings)
}

/// `Σ_P e_P P ⊗ P*`.
pub fn gen_pauli_channel(probabilities: &BTreeMap<PauliLabel, f64>, settings: &Settings) -> Result<SuperOperator> {
    let n = probabilities
        .keys()
        .next()
        .map(PauliLabel::num_qubits)
        .ok_or_else(|| Error::Invalid("Pauli channel needs at least one probability".into()))?;
    settings.check_channel_qubits(n)?;
    let mut dense = vec![0.0; 1 << (2 * n)];
    for (label, &p) in probabilities {
        if label.num_qubits() != n {
            return Err(Error::Invalid(format!("label {label} does not act on {n} qubits")));
        }
        if !p.is_finite() || p < 0.0 {
            return Err(Error::Invalid(format!("probability of {label} is {p}; must be nonnegative")));
        }
        dense[label.index()] = p;
    }
    let total: f64 = dense.iter().sum();
    if (total - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::Invalid(format!("Pauli probabilities sum to {total:.17}, not 1")));
    }
    Ok(pauli_channel_unchecked(n, &dense))
}

/// `Σ_s w_s U(s) ⊗ U(s)*`.
pub fn average_channel(members: &[EnsembleMember], settings: &Settings) -> Result<SuperOperator> {
    let first = members
        .first()
        .ok_or_else(|| Error::Invalid("ensemble is empty".into()))?;
    let dim = first.unitary.dim();
    let mut total = 0.0;
    for (k, m) in members.iter().enumerate() {
        if !m.weight.is_finite() || m.weight < 0.0 {
            return Err(Error::Invalid(format!("ensemble weight {k} is {}; must be nonnegative", m.weight)));
        }
        if m.unitary.dim() != dim {
            return Err(Error::Dimension(format!(
                "ensemble member {k} is {0}x{0}, expected {dim}x{dim}",
                m.unitary.dim()
            )));
        }
        total += m.weight;
    }
    if (total - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::Invalid(format!("ensemble weights sum to {total:.17}, not 1")));
    }
    let mut acc = DMatrix::<Complex64>::zeros(dim * dim, dim * dim);
    for m in members {
        acc += lift_unitary(&m.unitary, settings)?.into_matrix() * Complex64::new(m.weight, 0.0);
    }
    SuperOperator::new(dim, acc)
}
