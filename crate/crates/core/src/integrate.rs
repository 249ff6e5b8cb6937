//! Integration of trace polynomials over the unitary group.
//!
//! Once the moment operator `M = ∫ U^⊗m ⊗ (U†)^⊗n dU` is known,
//! `∫ Π Tr(A_i U) Π Tr(B_j U†) dU = Tr(M · A_1⊗…⊗A_m⊗B_1⊗…⊗B_n)` for any
//! choice of the `A_i`, `B_j`.
//!
//! `U ↦ U ⊗ U†` is not a representation, so iterating `½[1 + U_k ⊗ U_k†]`
//! does not converge to its average. `R(U) = U^⊗m ⊗ (U*)^⊗n` is one, and
//! `G_{k+1} = ½[1 + R(U_k)] G_k`, `G_0 = 1` converges to the projector
//! `∫ R(U) dU`. Since `U† = (U*)ᵀ`, transposing the last `n` tensor slots of
//! `G` gives `M`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TwirlError};
use crate::linalg::{hs_distance_sq, kron_all, left_apply_local, ComplexMatrix, C64};
use crate::random::{draw_unitary, RngHandle, UnitarySource};

/// Largest moment operator side length `d^{m+n}`.
pub const MAX_MOMENT_DIM: usize = 4096;

/// Default iteration count; there is no stopping rule, only the diagnostic.
pub const DEFAULT_ITERS: usize = 200;

/// Group integrated over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntegrationGroup {
    #[default]
    Unitary,
    /// Experimental: samples rescaled by `det(U)^{−1/d}`.
    Special,
}

/// Moment operator estimate after a number of recursion steps.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentOperator {
    pub m: usize,
    pub n: usize,
    pub d: usize,
    pub matrix: ComplexMatrix,
    pub iterations_done: usize,
    /// `‖G_k − G_{k−1}‖²` for `k = 1..=iterations_done` (equal to the
    /// distance between the transposed iterates).
    pub diagnostics: Vec<f64>,
}

fn moment_side(m: usize, n: usize, d: usize) -> Result<usize> {
    if d < 1 {
        return Err(TwirlError::InvalidParameter("dimension must be >= 1".into()));
    }
    d.checked_pow((m + n) as u32).filter(|&s| s <= MAX_MOMENT_DIM).ok_or_else(|| {
        TwirlError::ResourceGuard(format!("d^(m+n) = {d}^{} exceeds {MAX_MOMENT_DIM}", m + n))
    })
}

fn special_unitary(u: ComplexMatrix) -> ComplexMatrix {
    let d = u.rows();
    let m = nalgebra::DMatrix::<C64>::from_fn(d, d, |i, j| u[(i, j)]);
    let det = m.determinant();
    let phase = C64::from_polar(1.0, -det.arg() / d as f64);
    u.scale(phase)
}

/// Runs `iters` steps of the recursion from the identity and returns the
/// partially transposed iterate.
pub fn moment_operator(
    m: usize,
    n: usize,
    d: usize,
    iters: usize,
    source: &UnitarySource,
    rng: &mut RngHandle,
) -> Result<MomentOperator> {
    moment_operator_over(m, n, d, iters, source, IntegrationGroup::Unitary, rng)
}

pub fn moment_operator_over(
    m: usize,
    n: usize,
    d: usize,
    iters: usize,
    source: &UnitarySource,
    group: IntegrationGroup,
    rng: &mut RngHandle,
) -> Result<MomentOperator> {
    let side = moment_side(m, n, d)?;
    source.validate()?;
    let mut current = ComplexMatrix::identity(side);
    let mut diagnostics = Vec::with_capacity(iters);
    for step in 0..iters {
        let mut u = draw_unitary(source, d, step, rng)?;
        if group == IntegrationGroup::Special {
            u = special_unitary(u);
        }
        let uc = u.conj();
        let factors: Vec<&ComplexMatrix> =
            std::iter::repeat_n(&u, m).chain(std::iter::repeat_n(&uc, n)).collect();
        let mut rotated = current.clone();
        if !factors.is_empty() {
            left_apply_local(&mut rotated, &factors)?;
        }
        let next = (&current + &rotated).scale_real(0.5);
        diagnostics.push(hs_distance_sq(&next, &current)?);
        current = next;
    }
    if !current.is_finite() {
        return Err(TwirlError::NonFinite("moment iteration".into()));
    }
    let matrix = transpose_trailing_slots(&current, d, m, n);
    Ok(MomentOperator { m, n, d, matrix, iterations_done: iters, diagnostics })
}

/// Partial transpose of the last `n` of `m + n` tensor slots of dimension `d`.
fn transpose_trailing_slots(g: &ComplexMatrix, d: usize, m: usize, n: usize) -> ComplexMatrix {
    let tail = d.pow(n as u32);
    let head = d.pow(m as u32);
    let side = head * tail;
    let mut out = ComplexMatrix::zeros(side, side);
    for a in 0..head {
        for b in 0..tail {
            for cc in 0..head {
                for e in 0..tail {
                    out[(a * tail + e, cc * tail + b)] = g[(a * tail + b, cc * tail + e)];
                }
            }
        }
    }
    out
}

/// Mean of `runs` independent moment operators on streams `0..runs` of `seed`.
#[allow(clippy::too_many_arguments)]
pub fn averaged_moment_operator(
    m: usize,
    n: usize,
    d: usize,
    iters: usize,
    source: &UnitarySource,
    group: IntegrationGroup,
    seed: u64,
    runs: usize,
) -> Result<MomentOperator> {
    if runs == 0 {
        return Err(TwirlError::InvalidParameter("runs must be >= 1".into()));
    }
    let mut ops = (0..runs as u64)
        .map(|s| moment_operator_over(m, n, d, iters, source, group, &mut RngHandle::new(seed, s)))
        .collect::<Result<Vec<_>>>()?;
    let mut first = ops.remove(0);
    for op in &ops {
        first.matrix += &op.matrix;
        for (a, b) in first.diagnostics.iter_mut().zip(&op.diagnostics) {
            *a += b;
        }
    }
    let scale = 1.0 / runs as f64;
    first.matrix = first.matrix.scale_real(scale);
    first.diagnostics.iter_mut().for_each(|x| *x *= scale);
    Ok(first)
}

/// `Tr(M · A_1⊗…⊗A_m⊗B_1⊗…⊗B_n)`.
pub fn trace_integral(a_list: &[ComplexMatrix], b_list: &[ComplexMatrix], mop: &MomentOperator) -> Result<C64> {
    if a_list.len() != mop.m || b_list.len() != mop.n {
        return Err(TwirlError::Shape(format!(
            "moment operator has (m, n) = ({}, {}), got {} A and {} B matrices",
            mop.m,
            mop.n,
            a_list.len(),
            b_list.len()
        )));
    }
    if let Some(bad) = a_list.iter().chain(b_list).find(|x| x.rows() != mop.d || x.cols() != mop.d) {
        return Err(TwirlError::Shape(format!(
            "integrand matrix is {}x{}, expected {}x{}",
            bad.rows(),
            bad.cols(),
            mop.d,
            mop.d
        )));
    }
    let k = kron_all(a_list.iter().chain(b_list))?;
    let side = k.rows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..side {
        for j in 0..side {
            acc += mop.matrix[(i, j)] * k[(j, i)];
        }
    }
    Ok(acc)
}

/// Rewrites an `(N, N)` moment operator in the layout of the twirl
/// superoperator `∫ (U^⊗N)* ⊗ U^⊗N dU`:
/// `S[(e, a), (b, c)] = M[(a, b), (c, e)]`, each index an `N`-digit block.
pub fn moment_as_twirl_superop(mop: &MomentOperator) -> Result<ComplexMatrix> {
    if mop.m != mop.n {
        return Err(TwirlError::InvalidParameter("only balanced moments map onto a twirl".into()));
    }
    let block = mop.d.pow(mop.m as u32);
    let side = block * block;
    let mut s = ComplexMatrix::zeros(side, side);
    for a in 0..block {
        for b in 0..block {
            for cc in 0..block {
                for e in 0..block {
                    s[(e * block + a, b * block + cc)] = mop.matrix[(a * block + b, cc * block + e)];
                }
            }
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, kron};
    use crate::random::{ginibre, haar_unitary};
    use crate::superop::exact_twirl_superop;
    use crate::twirl::{build_permutation_basis, QuditRegister};

    fn swap_over_d(d: usize) -> ComplexMatrix {
        let mut s = ComplexMatrix::zeros(d * d, d * d);
        for i in 0..d {
            for j in 0..d {
                s[(i * d + j, j * d + i)] = c(1.0 / d as f64, 0.0);
            }
        }
        s
    }

    #[test]
    fn trivial_moment_is_identity() {
        let mop = moment_operator(0, 0, 3, 10, &UnitarySource::Haar, &mut RngHandle::new(1, 0)).unwrap();
        assert_eq!(mop.matrix, ComplexMatrix::identity(1));
        assert_eq!(trace_integral(&[], &[], &mop).unwrap(), c(1.0, 0.0));
    }

    #[test]
    fn first_moment_vanishes() {
        for d in [2, 3] {
            let mop = moment_operator(1, 0, d, 200, &UnitarySource::Haar, &mut RngHandle::new(2, d as u64)).unwrap();
            assert!(mop.matrix.max_abs() <= 1e-3);
            let a = ginibre(d, d, &mut RngHandle::new(3, 0)).unwrap();
            assert!(trace_integral(&[a], &[], &mop).unwrap().norm() <= 1e-3);
        }
        let mop = moment_operator(2, 1, 2, 200, &UnitarySource::Haar, &mut RngHandle::new(4, 0)).unwrap();
        assert!(mop.matrix.max_abs() <= 1e-3);
    }

    #[test]
    fn balanced_moment_is_swap_over_d() {
        for d in [2, 3] {
            let mut devs: Vec<f64> = (0..9)
                .map(|s| {
                    let mop = moment_operator(1, 1, d, 200, &UnitarySource::Haar, &mut RngHandle::new(5, s)).unwrap();
                    mop.matrix.max_abs_diff(&swap_over_d(d))
                })
                .collect();
            devs.sort_by(f64::total_cmp);
            assert!(devs[4] <= 1e-3, "d = {d}: {}", devs[4]);
        }
    }

    #[test]
    fn balanced_moment_is_near_projector_and_diagnostics_decay() {
        let mop = moment_operator(1, 1, 3, 200, &UnitarySource::Haar, &mut RngHandle::new(6, 0)).unwrap();
        let g = &mop.matrix;
        // 1·SWAP/d is the projector after reordering; here check G = G†, G·(dG) = G
        assert!(g.adjoint().max_abs_diff(g) <= 1e-2);
        let dg = g.scale_real(3.0);
        assert!((&dg * &dg).max_abs_diff(&ComplexMatrix::identity(9)) <= 1e-2);
        assert_eq!(mop.diagnostics.len(), 200);
        assert!(mop.diagnostics[199] < mop.diagnostics[0]);
        let s = moment_as_twirl_superop(&mop).unwrap();
        assert!((&s * &s).max_abs_diff(&s) <= 1e-2);
    }

    #[test]
    fn trace_integral_unit_and_random() {
        let d = 3;
        let mop = moment_operator(1, 1, d, 200, &UnitarySource::Haar, &mut RngHandle::new(7, 0)).unwrap();
        let id = ComplexMatrix::identity(d);
        assert!((trace_integral(&[id.clone()], &[id], &mop).unwrap() - c(1.0, 0.0)).norm() < 1e-3);
        let mut rng = RngHandle::new(8, 0);
        for _ in 0..20 {
            let a = ginibre(d, d, &mut rng).unwrap();
            let b = ginibre(d, d, &mut rng).unwrap();
            let expected = (&a * &b).trace() / d as f64;
            let got = trace_integral(&[a], &[b], &mop).unwrap();
            assert!((got - expected).norm() <= 1e-3);
        }
    }

    #[test]
    fn trace_integral_is_linear() {
        let d = 2;
        let mop = moment_operator(1, 2, d, 30, &UnitarySource::Haar, &mut RngHandle::new(9, 0)).unwrap();
        let mut rng = RngHandle::new(10, 0);
        let a = ginibre(d, d, &mut rng).unwrap();
        let a2 = ginibre(d, d, &mut rng).unwrap();
        let b1 = ginibre(d, d, &mut rng).unwrap();
        let b2 = ginibre(d, d, &mut rng).unwrap();
        let b3 = ginibre(d, d, &mut rng).unwrap();
        let (x, y) = (c(0.3, -1.2), c(2.0, 0.5));
        let mut combo = b2.scale(x);
        combo.axpy(y, &b3).unwrap();
        let lhs = trace_integral(&[a.clone()], &[b1.clone(), combo], &mop).unwrap();
        let rhs = x * trace_integral(&[a.clone()], &[b1.clone(), b2.clone()], &mop).unwrap()
            + y * trace_integral(&[a.clone()], &[b1.clone(), b3.clone()], &mop).unwrap();
        assert!((lhs - rhs).norm() <= 1e-12 * lhs.norm().max(1.0));
        let mut acombo = a.scale(x);
        acombo.axpy(y, &a2).unwrap();
        let lhs = trace_integral(&[acombo], &[b1.clone(), b2.clone()], &mop).unwrap();
        let rhs = x * trace_integral(&[a], &[b1.clone(), b2.clone()], &mop).unwrap()
            + y * trace_integral(&[a2], &[b1, b2], &mop).unwrap();
        assert!((lhs - rhs).norm() <= 1e-12 * lhs.norm().max(1.0));
    }

    #[test]
    fn balanced_moment_reproduces_twirl_superop() {
        let reg = QuditRegister::new(2, 2).unwrap();
        let s_p = exact_twirl_superop(reg, &build_permutation_basis(reg).unwrap()).unwrap();
        let mop = moment_operator(2, 2, 2, 200, &UnitarySource::Haar, &mut RngHandle::new(11, 0)).unwrap();
        let s = moment_as_twirl_superop(&mop).unwrap();
        assert!(s.max_abs_diff(s_p.matrix()) <= 1e-3);
    }

    #[test]
    fn errors_and_guard() {
        assert!(matches!(
            moment_operator(4, 4, 4, 1, &UnitarySource::Haar, &mut RngHandle::new(0, 0)),
            Err(TwirlError::ResourceGuard(_))
        ));
        let mop = moment_operator(1, 1, 2, 5, &UnitarySource::Haar, &mut RngHandle::new(0, 0)).unwrap();
        let id = ComplexMatrix::identity(2);
        assert!(trace_integral(&[id.clone()], &[], &mop).is_err());
        assert!(trace_integral(&[id], &[ComplexMatrix::identity(3)], &mop).is_err());
        assert!(moment_as_twirl_superop(&moment_operator(1, 0, 2, 1, &UnitarySource::Haar, &mut RngHandle::new(0, 0)).unwrap()).is_err());
    }

    #[test]
    fn averaging_runs_and_special_unitary_samples() {
        let avg = averaged_moment_operator(1, 1, 2, 50, &UnitarySource::Haar, IntegrationGroup::Unitary, 3, 4).unwrap();
        assert!(avg.matrix.max_abs_diff(&swap_over_d(2)) < 1e-3);
        let u = haar_unitary(3, &mut RngHandle::new(12, 0)).unwrap();
        let su = special_unitary(u);
        let m = nalgebra::DMatrix::<C64>::from_fn(3, 3, |i, j| su[(i, j)]);
        assert!((m.determinant() - c(1.0, 0.0)).norm() < 1e-12);
        assert!(su.is_unitary());
        let _ = kron;
    }
}
