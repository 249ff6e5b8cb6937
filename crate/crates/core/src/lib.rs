//! Recursive twirling of multi-qudit states and superoperators.
//!
//! The exact twirl `Pρ = ∫ U^⊗N ρ (U^⊗N)† dU` is approximated by iterating
//! `ρ ← ½[ρ + U_k^⊗N ρ (U_k^⊗N)†]` with fresh unitaries, which converges in
//! mean square as `2^{−M}` instead of the `1/M` of plain averaging. The
//! crate provides the channels, their Liouville representation, the exact
//! projections used as references, unitary sources (Haar, biased, cyclic
//! schedules, Ising circuits), moment integrals over `U(d)`, and the
//! trajectory harness used to measure convergence.

pub mod error;
pub mod experiments;
pub mod integrate;
pub mod linalg;
pub mod random;
pub mod superop;
pub mod twirl;

pub use error::{Result, TwirlError};
pub use linalg::{ComplexMatrix, C64};
pub use random::{RngHandle, UnitarySource};
pub use superop::Superoperator;
pub use twirl::{DensityMatrix, PermutationBasis, QuditRegister, TwirlPlan, Variant};
