//! State-level twirling channels.
//!
//! The exact twirl projects onto the operators commuting with every
//! `U^⊗N` (Werner family) or, for two qudits, every `U ⊗ U*` (isotropic
//! family). The approximate channels replace the group integral by
//! averages over drawn unitaries: plain averaging `P_M`, and the iterated
//! two-branch mixing `Q_{K,M} = (P_K)^M` whose mean squared error decays as
//! `K^{-M}`.

mod basis;
mod circuit;
mod schedule;

pub use basis::{build_isotropic_basis, build_permutation_basis, PermutationBasis, MAX_BASIS_QUDITS};
pub use circuit::{
    channel_twirl_step, circuit_twirl_step, ghz_stabilizer_generators, ghz_state, pauli_string,
    stabilizer_depolarize, stabilizer_group, stabilizer_group_sum, CircuitOutcome,
};
pub use schedule::{
    default_ising_alpha, deterministic_schedule, ising_phases, ising_unitary, ScheduleKind, DEFAULT_TWO_QUBIT_C,
};

use serde::{Deserialize, Serialize};

use crate::error::{Result, TwirlError};
use crate::linalg::{conjugate_local, hs_inner, ComplexMatrix};
use crate::random::{draw_unitary, RngHandle, UnitarySource};

/// Tolerances applied when validating a density matrix.
pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-9;

/// Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity, trace and positivity.
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let rho = DensityMatrix { matrix };
        rho.validate()?;
        Ok(rho)
    }

    /// Wraps the output of a channel known to preserve the state invariants.
    pub(crate) fn from_channel_output(matrix: ComplexMatrix) -> Self {
        DensityMatrix { matrix }
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.matrix;
        m.require_square().map_err(|_| TwirlError::InvalidState("not square".into()))?;
        if !m.is_finite() {
            return Err(TwirlError::InvalidState("non-finite entries".into()));
        }
        let herm = m.hermiticity_deviation();
        if herm > HERMITIAN_TOL {
            return Err(TwirlError::InvalidState(format!("not Hermitian (deviation {herm:.3e})")));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(TwirlError::InvalidState(format!("trace {tr} != 1")));
        }
        let min_ev = self.min_eigenvalue()?;
        if min_ev < -PSD_TOL {
            return Err(TwirlError::InvalidState(format!("negative eigenvalue {min_ev:.3e}")));
        }
        Ok(())
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.matrix.hermitian_eigenvalues()?[0])
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityMatrix { matrix: ComplexMatrix::identity(dim).scale_real(1.0 / dim as f64) }
    }

    /// `|ψ⟩⟨ψ|/⟨ψ|ψ⟩`.
    pub fn pure(psi: &[crate::linalg::C64]) -> Result<Self> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if norm <= 0.0 {
            return Err(TwirlError::InvalidState("zero state vector".into()));
        }
        Ok(DensityMatrix { matrix: ComplexMatrix::outer(psi).scale_real(1.0 / norm) })
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    /// `‖ρ‖² = Tr(ρ²)`.
    pub fn purity(&self) -> f64 {
        crate::linalg::hs_norm_sq(&self.matrix).value()
    }
}

/// `N` qudits of local dimension `d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QuditRegister {
    pub n_qudits: usize,
    pub local_dim: usize,
}

impl QuditRegister {
    pub fn new(n_qudits: usize, local_dim: usize) -> Result<Self> {
        if n_qudits < 1 {
            return Err(TwirlError::InvalidParameter("register needs at least one qudit".into()));
        }
        if local_dim < 2 {
            return Err(TwirlError::InvalidParameter("local dimension must be >= 2".into()));
        }
        let reg = QuditRegister { n_qudits, local_dim };
        reg.checked_dim()?;
        Ok(reg)
    }

    fn checked_dim(&self) -> Result<usize> {
        self.local_dim
            .checked_pow(self.n_qudits as u32)
            .ok_or_else(|| TwirlError::Overflow(format!("{}^{}", self.local_dim, self.n_qudits)))
    }

    /// `d^N`.
    pub fn dim(&self) -> usize {
        self.local_dim.pow(self.n_qudits as u32)
    }

    fn check_state(&self, rho: &DensityMatrix) -> Result<()> {
        if rho.dim() != self.dim() {
            return Err(TwirlError::Shape(format!(
                "state of dimension {} on a register of dimension {}",
                rho.dim(),
                self.dim()
            )));
        }
        Ok(())
    }

    fn check_local(&self, u: &ComplexMatrix) -> Result<()> {
        if u.rows() != self.local_dim || u.cols() != self.local_dim {
            return Err(TwirlError::Shape(format!(
                "unitary is {}x{}, register needs {}x{}",
                u.rows(),
                u.cols(),
                self.local_dim,
                self.local_dim
            )));
        }
        Ok(())
    }
}

/// Which invariant family a twirl projects onto.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// `U^⊗N` conjugations.
    #[default]
    Werner,
    /// `U ⊗ U*` conjugations, two qudits only.
    Isotropic,
}

impl Variant {
    /// Per-qudit factors of the conjugating unitary for the drawn `u`.
    pub fn local_factors(self, u: &ComplexMatrix, reg: QuditRegister) -> Vec<ComplexMatrix> {
        match self {
            Variant::Werner => vec![u.clone(); reg.n_qudits],
            Variant::Isotropic => vec![u.clone(), u.conj()],
        }
    }
}

/// Parameters of an iterated twirl `Q_{K,M}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwirlPlan {
    pub register: QuditRegister,
    /// Branches per iteration; each iteration consumes `k − 1` unitaries.
    pub k: usize,
    pub iterations: usize,
    pub source: UnitarySource,
    pub variant: Variant,
}

impl TwirlPlan {
    pub fn new(
        register: QuditRegister,
        k: usize,
        iterations: usize,
        source: UnitarySource,
        variant: Variant,
    ) -> Result<Self> {
        let plan = TwirlPlan { register, k, iterations, source, variant };
        plan.validate()?;
        Ok(plan)
    }

    /// Two-branch Werner plan.
    pub fn recursive(register: QuditRegister, iterations: usize, source: UnitarySource) -> Result<Self> {
        Self::new(register, 2, iterations, source, Variant::Werner)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(TwirlError::InvalidParameter(format!("K = {} must be >= 2", self.k)));
        }
        if self.variant == Variant::Isotropic && self.register.n_qudits != 2 {
            return Err(TwirlError::InvalidParameter("isotropic twirling needs N = 2".into()));
        }
        self.source.validate()?;
        if let Some(d) = self.source.fixed_dim() {
            if d != self.register.local_dim {
                return Err(TwirlError::Shape(format!(
                    "source produces {d}-dimensional unitaries, register has d = {}",
                    self.register.local_dim
                )));
            }
        }
        Ok(())
    }

    /// Unitaries consumed by the full plan, `M(K − 1)`.
    pub fn unitary_budget(&self) -> usize {
        self.iterations * (self.k - 1)
    }
}

fn conjugate_variant(rho: &ComplexMatrix, u: &ComplexMatrix, reg: QuditRegister, variant: Variant) -> Result<ComplexMatrix> {
    let factors = variant.local_factors(u, reg);
    let refs: Vec<&ComplexMatrix> = factors.iter().collect();
    conjugate_local(rho, &refs)
}

/// `W ρ W†` with `W = u^⊗N`.
pub fn conjugate_state(rho: &DensityMatrix, u: &ComplexMatrix, reg: QuditRegister) -> Result<DensityMatrix> {
    reg.check_state(rho)?;
    reg.check_local(u)?;
    Ok(DensityMatrix::from_channel_output(conjugate_variant(&rho.matrix, u, reg, Variant::Werner)?))
}

/// Averages `ρ` with its conjugates by each unitary in `unitaries`:
/// `(ρ + Σ_j W_j ρ W_j†)/(1 + len)`.
pub fn mix_step(
    rho: &DensityMatrix,
    unitaries: &[ComplexMatrix],
    reg: QuditRegister,
    variant: Variant,
) -> Result<DensityMatrix> {
    reg.check_state(rho)?;
    let mut acc = rho.matrix.clone();
    for u in unitaries {
        reg.check_local(u)?;
        acc += &conjugate_variant(&rho.matrix, u, reg, variant)?;
    }
    Ok(DensityMatrix::from_channel_output(acc.scale_real(1.0 / (1 + unitaries.len()) as f64)))
}

/// `½[ρ + u^⊗N ρ (u^⊗N)†]`.
pub fn twirl_step(rho: &DensityMatrix, u: &ComplexMatrix, reg: QuditRegister) -> Result<DensityMatrix> {
    mix_step(rho, std::slice::from_ref(u), reg, Variant::Werner)
}

/// `½[ρ + (u⊗u*) ρ (u⊗u*)†]`.
pub fn isotropic_twirl_step(rho: &DensityMatrix, u: &ComplexMatrix, reg: QuditRegister) -> Result<DensityMatrix> {
    if reg.n_qudits != 2 {
        return Err(TwirlError::InvalidParameter("isotropic twirling needs N = 2".into()));
    }
    mix_step(rho, std::slice::from_ref(u), reg, Variant::Isotropic)
}

/// `P_M ρ = (1/M)[ρ + Σ_{k=1}^{M−1} U_k^⊗N ρ (U_k^⊗N)†]`.
pub fn average_twirl(
    rho: &DensityMatrix,
    m: usize,
    source: &UnitarySource,
    reg: QuditRegister,
    rng: &mut RngHandle,
) -> Result<DensityMatrix> {
    if m == 0 {
        return Err(TwirlError::InvalidParameter("averaging needs M >= 1".into()));
    }
    let unitaries = (0..m - 1)
        .map(|step| draw_unitary(source, reg.local_dim, step, rng))
        .collect::<Result<Vec<_>>>()?;
    mix_step(rho, &unitaries, reg, Variant::Werner)
}

/// Stateful driver of `Q_{K,M}`: each call to [`RecursiveTwirl::step`]
/// applies one `P_K`, drawing `K − 1` unitaries. Cycle sources are indexed
/// by the running unitary count.
pub struct RecursiveTwirl<'a> {
    plan: &'a TwirlPlan,
    drawn: usize,
}

impl<'a> RecursiveTwirl<'a> {
    pub fn new(plan: &'a TwirlPlan) -> Result<Self> {
        plan.validate()?;
        Ok(RecursiveTwirl { plan, drawn: 0 })
    }

    pub fn draw_branch_unitaries(&mut self, rng: &mut RngHandle) -> Result<Vec<ComplexMatrix>> {
        let d = self.plan.register.local_dim;
        (0..self.plan.k - 1)
            .map(|_| {
                let u = draw_unitary(&self.plan.source, d, self.drawn, rng);
                self.drawn += 1;
                u
            })
            .collect()
    }

    pub fn step(&mut self, rho: &DensityMatrix, rng: &mut RngHandle) -> Result<DensityMatrix> {
        let us = self.draw_branch_unitaries(rng)?;
        mix_step(rho, &us, self.plan.register, self.plan.variant)
    }

    pub fn unitaries_drawn(&self) -> usize {
        self.drawn
    }
}

/// Applies all `plan.iterations` steps of `Q_{K,M}` to `rho`.
pub fn recursive_twirl(rho: &DensityMatrix, plan: &TwirlPlan, rng: &mut RngHandle) -> Result<DensityMatrix> {
    plan.register.check_state(rho)?;
    let mut driver = RecursiveTwirl::new(plan)?;
    let mut state = rho.clone();
    for _ in 0..plan.iterations {
        state = driver.step(&state, rng)?;
    }
    Ok(state)
}

/// Exact projection `Σ_k Tr(ρ R_k) R_k` onto the invariant family.
pub fn exact_twirl(rho: &DensityMatrix, basis: &PermutationBasis) -> Result<DensityMatrix> {
    if basis.register().dim() != rho.dim() {
        return Err(TwirlError::Shape(format!(
            "basis for dimension {} applied to state of dimension {}",
            basis.register().dim(),
            rho.dim()
        )));
    }
    let dim = rho.dim();
    let mut out = ComplexMatrix::zeros(dim, dim);
    for r in basis.operators() {
        let coeff = hs_inner(r, &rho.matrix)?;
        out.axpy(coeff, r)?;
    }
    Ok(DensityMatrix::from_channel_output(out))
}
