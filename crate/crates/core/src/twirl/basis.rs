use crate::error::{Result, TwirlError};
use crate::linalg::{c, hs_inner, hs_norm_sq, ComplexMatrix, C64};

use super::{QuditRegister, Variant};

/// Largest qudit count accepted by [`build_permutation_basis`].
pub const MAX_BASIS_QUDITS: usize = 6;

/// Largest state dimension for which dense basis operators are built.
const MAX_BASIS_DIM: usize = 2048;

/// Relative residual below which a Gram-Schmidt candidate is dropped.
const RANK_TOL: f64 = 1e-8;

/// HS-orthonormal Hermitian operators `R_k` spanning the invariant family
/// of a register: `Tr(R_k R_l) = δ_kl`.
#[derive(Debug, Clone, PartialEq)]
pub struct PermutationBasis {
    register: QuditRegister,
    variant: Variant,
    operators: Vec<ComplexMatrix>,
}

impl PermutationBasis {
    pub fn register(&self) -> QuditRegister {
        self.register
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn operators(&self) -> &[ComplexMatrix] {
        &self.operators
    }

    /// `N_R`, the dimension of the invariant family.
    pub fn count(&self) -> usize {
        self.operators.len()
    }
}

/// All permutations of `0..n` in lexicographic one-line order.
pub(crate) fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut current: Vec<usize> = (0..n).collect();
    let mut out = vec![current.clone()];
    loop {
        // next lexicographic permutation
        let Some(i) = (1..n).rev().find(|&i| current[i - 1] < current[i]) else {
            return out;
        };
        let pivot = i - 1;
        let j = (pivot + 1..n).rev().find(|&j| current[j] > current[pivot]).expect("successor exists");
        current.swap(pivot, j);
        current[i..].reverse();
        out.push(current.clone());
    }
}

/// Permutation operator mapping `|i_0 … i_{N−1}⟩` to the basis state whose
/// slot `perm[k]` holds `i_k`.
pub(crate) fn permutation_operator(perm: &[usize], d: usize) -> ComplexMatrix {
    let n = perm.len();
    let dim = d.pow(n as u32);
    let mut m = ComplexMatrix::zeros(dim, dim);
    let mut digits = vec![0usize; n];
    let mut target = vec![0usize; n];
    for x in 0..dim {
        let mut rem = x;
        for k in (0..n).rev() {
            digits[k] = rem % d;
            rem /= d;
        }
        for k in 0..n {
            target[perm[k]] = digits[k];
        }
        let y = target.iter().fold(0, |acc, &t| acc * d + t);
        m[(y, x)] = c(1.0, 0.0);
    }
    m
}

/// Adds `candidate` to `basis` after modified Gram-Schmidt (two passes),
/// unless its residual is at most `RANK_TOL` of its original norm.
fn orthonormalize_into(basis: &mut Vec<ComplexMatrix>, candidate: ComplexMatrix) -> Result<()> {
    let original = hs_norm_sq(&candidate).value().sqrt();
    if original == 0.0 {
        return Ok(());
    }
    let mut r = candidate;
    for _pass in 0..2 {
        for q in basis.iter() {
            let coeff = hs_inner(q, &r)?;
            r.axpy(-coeff, q)?;
        }
    }
    let residual = hs_norm_sq(&r).value().sqrt();
    if residual <= RANK_TOL * original {
        return Ok(());
    }
    basis.push(r.scale_real(1.0 / residual));
    Ok(())
}

/// Orthonormalizes the `N!` qudit permutation operators.
///
/// Permutations are visited in lexicographic order; each contributes the
/// Hermitian candidates `V + V†` and `i(V − V†)`, which span the same space
/// as the permutations themselves because the set is closed under inverses.
pub fn build_permutation_basis(reg: QuditRegister) -> Result<PermutationBasis> {
    if reg.n_qudits > MAX_BASIS_QUDITS {
        return Err(TwirlError::ResourceGuard(format!(
            "permutation basis limited to N <= {MAX_BASIS_QUDITS}, got N = {}",
            reg.n_qudits
        )));
    }
    if reg.dim() > MAX_BASIS_DIM {
        return Err(TwirlError::ResourceGuard(format!(
            "permutation basis limited to d^N <= {MAX_BASIS_DIM}, got {}",
            reg.dim()
        )));
    }
    let mut operators = Vec::new();
    for perm in permutations(reg.n_qudits) {
        let v = permutation_operator(&perm, reg.local_dim);
        let vt = v.adjoint();
        orthonormalize_into(&mut operators, &v + &vt)?;
        orthonormalize_into(&mut operators, (&v - &vt).scale(c(0.0, 1.0)))?;
    }
    Ok(PermutationBasis { register: reg, variant: Variant::Werner, operators })
}

/// Basis of the two-qudit isotropic family: the maximally entangled
/// projector `|Φ⁺⟩⟨Φ⁺|` and `(1 − |Φ⁺⟩⟨Φ⁺|)/√(d²−1)`. These are the
/// partial transposes of `1` and the swap, orthonormalized.
pub fn build_isotropic_basis(reg: QuditRegister) -> Result<PermutationBasis> {
    if reg.n_qudits != 2 {
        return Err(TwirlError::InvalidParameter("isotropic twirling needs N = 2".into()));
    }
    let d = reg.local_dim;
    let amp = 1.0 / (d as f64).sqrt();
    let phi: Vec<C64> = (0..d * d).map(|i| if i / d == i % d { c(amp, 0.0) } else { c(0.0, 0.0) }).collect();
    let proj = ComplexMatrix::outer(&phi);
    let rest = (&ComplexMatrix::identity(d * d) - &proj).scale_real(1.0 / ((d * d - 1) as f64).sqrt());
    Ok(PermutationBasis { register: reg, variant: Variant::Isotropic, operators: vec![proj, rest] })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{haar_unitary, RngHandle};
    use crate::linalg::{kron, tensor_power};

    #[test]
    fn lexicographic_permutations() {
        let p = permutations(3);
        assert_eq!(p.len(), 6);
        assert_eq!(p[0], vec![0, 1, 2]);
        assert_eq!(p[1], vec![0, 2, 1]);
        assert_eq!(p[5], vec![2, 1, 0]);
        assert_eq!(permutations(1), vec![vec![0]]);
    }

    #[test]
    fn known_basis_sizes() {
        for (n, d, nr) in [(1, 2, 1), (2, 2, 2), (2, 3, 2), (2, 5, 2), (3, 2, 5), (3, 3, 6), (4, 2, 14)] {
            let b = build_permutation_basis(QuditRegister::new(n, d).unwrap()).unwrap();
            assert_eq!(b.count(), nr, "N = {n}, d = {d}");
        }
    }

    #[test]
    fn basis_is_orthonormal_hermitian_and_invariant() {
        let mut rng = RngHandle::new(1, 0);
        for (n, d) in [(2, 3), (3, 2), (3, 3)] {
            let reg = QuditRegister::new(n, d).unwrap();
            let b = build_permutation_basis(reg).unwrap();
            let w = tensor_power(&haar_unitary(d, &mut rng).unwrap(), n).unwrap();
            for (i, r) in b.operators().iter().enumerate() {
                assert!(r.is_hermitian(1e-12));
                for (j, s) in b.operators().iter().enumerate() {
                    let ip = hs_inner(r, s).unwrap();
                    let target = if i == j { 1.0 } else { 0.0 };
                    assert!((ip - c(target, 0.0)).norm() <= 1e-9);
                }
                assert!((&w * r).max_abs_diff(&(r * &w)) <= 1e-9);
            }
        }
    }

    #[test]
    fn two_qudit_basis_spans_symmetric_and_antisymmetric_projectors() {
        // R₁ ∝ 1 + V₁₂, R₂ ∝ 1 − V₁₂ lie in the span of the built basis
        for d in [2, 3, 4] {
            let reg = QuditRegister::new(2, d).unwrap();
            let b = build_permutation_basis(reg).unwrap();
            let id = ComplexMatrix::identity(d * d);
            let swap = permutation_operator(&[1, 0], d);
            let df = d as f64;
            let r1 = (&id + &swap).scale_real(1.0 / (2.0 * df * (df + 1.0)).sqrt());
            let r2 = (&id - &swap).scale_real(1.0 / (2.0 * df * (df - 1.0)).sqrt());
            for r in [&r1, &r2] {
                assert!((hs_norm_sq(r).value() - 1.0).abs() < 1e-12);
                let mut proj = ComplexMatrix::zeros(d * d, d * d);
                for q in b.operators() {
                    proj.axpy(hs_inner(q, r).unwrap(), q).unwrap();
                }
                assert!(proj.max_abs_diff(r) < 1e-12);
            }
        }
    }

    #[test]
    fn swap_operator_exchanges_factors() {
        let mut rng = RngHandle::new(2, 0);
        let a = haar_unitary(3, &mut rng).unwrap();
        let b = haar_unitary(3, &mut rng).unwrap();
        let v = permutation_operator(&[1, 0], 3);
        let lhs = &(&v * &kron(&a, &b).unwrap()) * &v;
        assert!(lhs.max_abs_diff(&kron(&b, &a).unwrap()) < 1e-14);
    }

    #[test]
    fn resource_guard() {
        assert!(matches!(
            build_permutation_basis(QuditRegister::new(7, 2).unwrap()),
            Err(TwirlError::ResourceGuard(_))
        ));
        assert!(matches!(
            build_permutation_basis(QuditRegister::new(3, 16).unwrap()),
            Err(TwirlError::ResourceGuard(_))
        ));
    }
}
