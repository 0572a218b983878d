//! Numerical tolerances and resource caps shared by every module.

use serde::{Deserialize, Serialize};

pub const DEFAULT_MAX_QUBITS: usize = 6;
pub const DEFAULT_MAX_CHANNEL_QUBITS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    /// Max deviation ‖A†A − 1‖_max accepted for operators treated as unitary.
    pub unitarity_tol: f64,
    /// Max imaginary residue accepted on quantities that must be real.
    pub realness_tol: f64,
    /// Max deviation of a probability total from one.
    pub sum_tol: f64,
    /// Diagonal weights in [-negative_floor, 0) are clamped to zero; below that is an error.
    pub negative_floor: f64,
    /// Qubit cap for Pauli enumeration.
    pub max_qubits: usize,
    /// Qubit cap for anything that allocates a superoperator.
    pub max_channel_qubits: usize,
    /// Admit non-unitary / non-trace-preserving inputs for diagnostics.
    pub allow_nonphysical: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            unitarity_tol: 1e-9,
            realness_tol: 1e-9,
            sum_tol: 1e-9,
            negative_floor: 1e-6,
            max_qubits: DEFAULT_MAX_QUBITS,
            max_channel_qubits: DEFAULT_MAX_CHANNEL_QUBITS,
            allow_nonphysical: false,
        }
    }
}

impl Settings {
    pub fn check_qubits(&self, n: usize) -> crate::Result<()> {
        if n == 0 || n > self.max_qubits {
            return Err(crate::Error::SizeLimit {
                what: "Pauli enumeration",
                requested: n,
                cap: self.max_qubits,
            });
        }
        Ok(())
    }

    pub fn check_channel_qubits(&self, n: usize) -> crate::Result<()> {
        if n == 0 || n > self.max_channel_qubits {
            return Err(crate::Error::SizeLimit {
                what: "superoperator construction",
                requested: n,
                cap: self.max_channel_qubits,
            });
        }
        Ok(())
    }
}
