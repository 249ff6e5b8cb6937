use std::f64::consts::PI;

use crate::error::{Result, TwirlError};
use crate::linalg::{kron_all, pauli_rotation, ComplexMatrix, PauliAxis, C64};
use crate::random::{haar_unitary, RngHandle, UnitarySource};

/// Rotation constant of the optimized two-qubit cycle.
pub const DEFAULT_TWO_QUBIT_C: f64 = 1.0894;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleKind {
    /// `[e^{icσ_x}, e^{icσ_z}]`.
    TwoQubitC(f64),
    /// `[e^{i2π/3 σ_x}, e^{i2π/5 σ_y}, e^{i2π/3 σ_z}]`.
    ThreeQubitXyz,
}

pub fn deterministic_schedule(kind: ScheduleKind) -> UnitarySource {
    let list = match kind {
        ScheduleKind::TwoQubitC(cv) => vec![pauli_rotation(PauliAxis::X, cv), pauli_rotation(PauliAxis::Z, cv)],
        ScheduleKind::ThreeQubitXyz => vec![
            pauli_rotation(PauliAxis::X, 2.0 * PI / 3.0),
            pauli_rotation(PauliAxis::Y, 2.0 * PI / 5.0),
            pauli_rotation(PauliAxis::Z, 2.0 * PI / 3.0),
        ],
    };
    UnitarySource::Cycle(list)
}

/// Ising coupling used for `n` qubits when none is given.
pub fn default_ising_alpha(n_qubits: usize) -> f64 {
    if n_qubits >= 4 {
        1.03
    } else {
        1.10
    }
}

/// Diagonal of `exp(iα Σ_k σ_z^(k) σ_z^(k+1))` with periodic boundary, in
/// the computational basis (qubit 0 is the most significant bit, bit 0 ↦ +1).
pub fn ising_phases(n_qubits: usize, alpha: f64) -> Vec<C64> {
    let dim = 1usize << n_qubits;
    (0..dim)
        .map(|x| {
            let z = |k: usize| if (x >> (n_qubits - 1 - k)) & 1 == 0 { 1i64 } else { -1 };
            let s: i64 = (0..n_qubits).map(|k| z(k) * z((k + 1) % n_qubits)).sum();
            C64::from_polar(1.0, alpha * s as f64)
        })
        .collect()
}

/// Independent Haar single-qubit unitaries on every qubit followed by the
/// periodic nearest-neighbour Ising evolution.
pub fn ising_unitary(n_qubits: usize, alpha: f64, rng: &mut RngHandle) -> Result<ComplexMatrix> {
    if n_qubits < 2 {
        return Err(TwirlError::InvalidParameter("ising unitary needs n >= 2 qubits".into()));
    }
    let layer: Vec<ComplexMatrix> = (0..n_qubits).map(|_| haar_unitary(2, rng)).collect::<Result<_>>()?;
    let mut u = kron_all(&layer)?;
    let phases = ising_phases(n_qubits, alpha);
    let dim = u.cols();
    for (r, ph) in phases.iter().enumerate() {
        for z in &mut u.as_mut_slice()[r * dim..(r + 1) * dim] {
            *z *= ph;
        }
    }
    Ok(u)
}
