//! Circuit-level realizations: the ancilla-controlled mixing block, the
//! matched-control sandwich that twirls a channel, and stabilizer-group
//! depolarization.

use crate::error::{Result, TwirlError};
use crate::linalg::{c, kron, kron_all, left_apply_local, pauli, right_apply_local_adjoint, tensor_power, ComplexMatrix, PauliAxis, C64};
use crate::superop::Superoperator;

use super::{DensityMatrix, QuditRegister};

/// Result of one ancilla-controlled block.
#[derive(Debug, Clone)]
pub struct CircuitOutcome {
    /// Register state after the ancilla is measured and discarded.
    pub unconditional: DensityMatrix,
    /// Probabilities of ancilla outcomes 0 and 1.
    pub probabilities: [f64; 2],
    /// Register state conditioned on each outcome.
    pub conditional: [DensityMatrix; 2],
}

/// Simulates the block: ancilla in `(|0⟩+|1⟩)/√2`, `u^⊗N` on the register
/// controlled by the ancilla, ancilla measured in the computational basis.
pub fn circuit_twirl_step(rho: &DensityMatrix, u: &ComplexMatrix, reg: QuditRegister) -> Result<CircuitOutcome> {
    reg.check_state(rho)?;
    reg.check_local(u)?;
    let dim = reg.dim();
    let plus = ComplexMatrix::from_rows(&[vec![c(0.5, 0.0), c(0.5, 0.0)], vec![c(0.5, 0.0), c(0.5, 0.0)]])?;
    let joint = kron(&plus, rho.matrix())?;
    let w = tensor_power(u, reg.n_qudits)?;
    // controlled-W = |0⟩⟨0| ⊗ 1 + |1⟩⟨1| ⊗ W
    let mut cw = ComplexMatrix::identity(2 * dim);
    for i in 0..dim {
        for j in 0..dim {
            cw[(dim + i, dim + j)] = w[(i, j)];
        }
    }
    let evolved = &(&cw * &joint) * &cw.adjoint();
    let mut blocks = Vec::with_capacity(2);
    let mut probabilities = [0.0; 2];
    for (b, p) in probabilities.iter_mut().enumerate() {
        let mut block = ComplexMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                block[(i, j)] = evolved[(b * dim + i, b * dim + j)];
            }
        }
        *p = block.trace().re;
        blocks.push(block);
    }
    let unconditional = DensityMatrix::from_channel_output(&blocks[0] + &blocks[1]);
    let cond = |b: usize| DensityMatrix::from_channel_output(blocks[b].scale_real(1.0 / probabilities[b]));
    Ok(CircuitOutcome { unconditional, probabilities, conditional: [cond(0), cond(1)] })
}

/// Superoperator of `ρ ↦ ½[Λ(ρ) + W†Λ(WρW†)W]`, `W = u^⊗N`: the block
/// applied before the channel and its inverse after, sharing one control.
pub fn channel_twirl_step(channel: &Superoperator, u: &ComplexMatrix, reg: QuditRegister) -> Result<Superoperator> {
    reg.check_local(u)?;
    if channel.state_dim() != reg.dim() {
        return Err(TwirlError::Shape(format!(
            "channel acts on dimension {}, register has {}",
            channel.state_dim(),
            reg.dim()
        )));
    }
    // C = W*⊗W has slot factors [u*; N] ++ [u; N], so C† has [uᵀ; N] ++ [u†; N]
    let ut = u.transpose();
    let ud = u.adjoint();
    let n = reg.n_qudits;
    let adj_factors: Vec<&ComplexMatrix> = std::iter::repeat_n(&ut, n).chain(std::iter::repeat_n(&ud, n)).collect();
    let mut sandwich = channel.matrix().clone();
    // Λ·C = Λ·(C†)†
    right_apply_local_adjoint(&mut sandwich, &adj_factors)?;
    left_apply_local(&mut sandwich, &adj_factors)?;
    let mixed = (&sandwich + channel.matrix()).scale_real(0.5);
    Superoperator::new(n, reg.local_dim, mixed)
}

/// Tensor product of Pauli operators; `None` is the identity.
pub fn pauli_string(ops: &[Option<PauliAxis>]) -> Result<ComplexMatrix> {
    let factors: Vec<ComplexMatrix> =
        ops.iter().map(|op| op.map_or_else(|| ComplexMatrix::identity(2), pauli)).collect();
    kron_all(&factors)
}

/// `(|0…0⟩ + |1…1⟩)/√2`.
pub fn ghz_state(n_qubits: usize) -> Result<DensityMatrix> {
    let dim = 1usize << n_qubits;
    let mut psi = vec![c(0.0, 0.0); dim];
    psi[0] = c(1.0, 0.0);
    psi[dim - 1] = c(1.0, 0.0);
    DensityMatrix::pure(&psi)
}

/// `X^⊗N` and `Z_k Z_{k+1}` for `k = 0..N−2`.
pub fn ghz_stabilizer_generators(n_qubits: usize) -> Result<Vec<ComplexMatrix>> {
    if n_qubits < 2 {
        return Err(TwirlError::InvalidParameter("GHZ stabilizer needs N >= 2".into()));
    }
    let mut gens = vec![pauli_string(&vec![Some(PauliAxis::X); n_qubits])?];
    for k in 0..n_qubits - 1 {
        let mut ops = vec![None; n_qubits];
        ops[k] = Some(PauliAxis::Z);
        ops[k + 1] = Some(PauliAxis::Z);
        gens.push(pauli_string(&ops)?);
    }
    Ok(gens)
}

const STABILIZER_TOL: f64 = 1e-10;

fn check_generators(dim: usize, generators: &[ComplexMatrix]) -> Result<()> {
    let id = ComplexMatrix::identity(dim);
    for (i, g) in generators.iter().enumerate() {
        if g.rows() != dim || g.cols() != dim {
            return Err(TwirlError::Shape(format!("generator {i} does not act on dimension {dim}")));
        }
        g.require_unitary()?;
        if (g * g).max_abs_diff(&id) > STABILIZER_TOL {
            return Err(TwirlError::InvalidParameter(format!("generator {i} does not square to the identity")));
        }
        for (j, h) in generators.iter().enumerate().skip(i + 1) {
            if (g * h).max_abs_diff(&(h * g)) > STABILIZER_TOL {
                return Err(TwirlError::InvalidParameter(format!("generators {i} and {j} do not commute")));
            }
        }
    }
    Ok(())
}

/// Depolarizes over the group generated by commuting involutions in
/// `generators.len()` steps of `ρ ← ½(ρ + g ρ g†)`.
pub fn stabilizer_depolarize(rho: &DensityMatrix, generators: &[ComplexMatrix]) -> Result<DensityMatrix> {
    check_generators(rho.dim(), generators)?;
    let mut state = rho.matrix().clone();
    for g in generators {
        let rotated = &(g * &state) * &g.adjoint();
        state = (&state + &rotated).scale_real(0.5);
    }
    Ok(DensityMatrix::from_channel_output(state))
}

/// All `2^k` products of subsets of the generators.
pub fn stabilizer_group(generators: &[ComplexMatrix]) -> Result<Vec<ComplexMatrix>> {
    let dim = generators.first().map_or(1, ComplexMatrix::rows);
    check_generators(dim, generators)?;
    let mut elements = vec![ComplexMatrix::identity(dim)];
    for g in generators {
        let with_g: Vec<ComplexMatrix> = elements.iter().map(|s| s * g).collect();
        elements.extend(with_g);
    }
    Ok(elements)
}

/// `2^{−k} Σ_S S ρ S†` over explicitly enumerated group elements.
pub fn stabilizer_group_sum(rho: &DensityMatrix, elements: &[ComplexMatrix]) -> Result<DensityMatrix> {
    let dim = rho.dim();
    let mut acc = ComplexMatrix::zeros(dim, dim);
    for s in elements {
        acc += &(&(s * rho.matrix()) * &s.adjoint());
    }
    let scale = C64::new(1.0 / elements.len() as f64, 0.0);
    Ok(DensityMatrix::from_channel_output(acc.scale(scale)))
}
