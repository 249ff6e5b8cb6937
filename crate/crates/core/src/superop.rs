//! Superoperators acting on column-stacked states, the exact twirl
//! projector `S_P = Σ_k vec(R_k) vec(R_k)†`, and closed-form error laws.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TwirlError};
use crate::linalg::{fmt_f64, hs_distance_sq, hs_norm_sq, kron, left_apply_local, unvec, vec, write_matrix_fields, ComplexMatrix, MatrixFile};
use crate::random::{draw_unitary, RngHandle, UnitarySource};
use crate::twirl::{DensityMatrix, PermutationBasis, QuditRegister, TwirlPlan, Variant};

/// Largest superoperator side length, `d^{2N}`, that may be built.
pub const MAX_SUPEROP_DIM: usize = 4096;

/// Matrix `S` with `vec(Λ(ρ)) = S vec(ρ)` for a channel on `N` qudits of
/// dimension `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Superoperator {
    n_qudits: usize,
    local_dim: usize,
    matrix: ComplexMatrix,
}

impl Superoperator {
    pub fn new(n_qudits: usize, local_dim: usize, matrix: ComplexMatrix) -> Result<Self> {
        let side = superop_side(n_qudits, local_dim)?;
        if matrix.rows() != side || matrix.cols() != side {
            return Err(TwirlError::Shape(format!(
                "superoperator for N = {n_qudits}, d = {local_dim} must be {side}x{side}, got {}x{}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        Ok(Superoperator { n_qudits, local_dim, matrix })
    }

    pub fn identity(n_qudits: usize, local_dim: usize) -> Result<Self> {
        let side = superop_side(n_qudits, local_dim)?;
        Ok(Superoperator { n_qudits, local_dim, matrix: ComplexMatrix::identity(side) })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn n_qudits(&self) -> usize {
        self.n_qudits
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    /// `d^N`.
    pub fn state_dim(&self) -> usize {
        self.local_dim.pow(self.n_qudits as u32)
    }

    /// `d^{2N}`.
    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    /// The channel's action on a matrix, through `vec`.
    pub fn apply_matrix(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        unvec(&self.matrix.apply(&vec(rho)?)?, self.state_dim())
    }

    pub fn apply_state(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        DensityMatrix::new(self.apply_matrix(rho.matrix())?)
    }

    pub fn to_json(&self) -> String {
        let mut s = format!("{{\"kind\": \"superoperator\", \"n\": {}, \"d\": {}, ", self.n_qudits, self.local_dim);
        write_matrix_fields(&self.matrix, &mut s);
        s.push('}');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct File {
            kind: String,
            n: usize,
            d: usize,
            #[serde(flatten)]
            matrix: MatrixFile,
        }
        let f: File = serde_json::from_str(text)?;
        if f.kind != "superoperator" {
            return Err(TwirlError::Parse(format!("expected kind \"superoperator\", got {:?}", f.kind)));
        }
        Superoperator::new(f.n, f.d, f.matrix.try_into()?)
    }
}

fn superop_side(n_qudits: usize, local_dim: usize) -> Result<usize> {
    let side = local_dim
        .checked_pow(2 * n_qudits as u32)
        .filter(|&s| s <= MAX_SUPEROP_DIM)
        .ok_or_else(|| {
            TwirlError::ResourceGuard(format!(
                "superoperator for N = {n_qudits}, d = {local_dim} exceeds {MAX_SUPEROP_DIM}x{MAX_SUPEROP_DIM}"
            ))
        })?;
    Ok(side)
}

/// Slot factors of `(W)* ⊗ W` for the conjugating unitary `W` of a variant.
fn superop_factors(u: &ComplexMatrix, reg: QuditRegister, variant: Variant) -> Vec<ComplexMatrix> {
    let state = variant.local_factors(u, reg);
    state.iter().map(ComplexMatrix::conj).chain(state.iter().cloned()).collect()
}

/// `S_P = Σ_k vec(R_k) vec(R_k)†`.
pub fn exact_twirl_superop(reg: QuditRegister, basis: &PermutationBasis) -> Result<Superoperator> {
    if basis.register() != reg {
        return Err(TwirlError::Shape("basis was built for a different register".into()));
    }
    let side = superop_side(reg.n_qudits, reg.local_dim)?;
    let mut s = ComplexMatrix::zeros(side, side);
    for r in basis.operators() {
        let v = vec(r)?;
        for i in 0..side {
            if v[i].norm_sqr() == 0.0 {
                continue;
            }
            for j in 0..side {
                s[(i, j)] += v[i] * v[j].conj();
            }
        }
    }
    Superoperator::new(reg.n_qudits, reg.local_dim, s)
}

/// One realization of `S_{PM} = (1/M)(1 + Σ_{k=1}^{M−1} (U_k^⊗N)* ⊗ U_k^⊗N)`.
pub fn avg_twirl_superop(
    m: usize,
    source: &UnitarySource,
    reg: QuditRegister,
    rng: &mut RngHandle,
) -> Result<Superoperator> {
    if m == 0 {
        return Err(TwirlError::InvalidParameter("averaging needs M >= 1".into()));
    }
    let mut acc = Superoperator::identity(reg.n_qudits, reg.local_dim)?.matrix;
    let id = acc.clone();
    for step in 0..m - 1 {
        let u = draw_unitary(source, reg.local_dim, step, rng)?;
        let factors = superop_factors(&u, reg, Variant::Werner);
        let refs: Vec<&ComplexMatrix> = factors.iter().collect();
        let mut c = id.clone();
        left_apply_local(&mut c, &refs)?;
        acc += &c;
    }
    Superoperator::new(reg.n_qudits, reg.local_dim, acc.scale_real(1.0 / m as f64))
}

/// `S ← (S + Σ_j C_j S)/K` with `C_j = (W_j)* ⊗ W_j`.
pub fn mix_superop(s: &Superoperator, unitaries: &[ComplexMatrix], reg: QuditRegister, variant: Variant) -> Result<Superoperator> {
    let mut acc = s.matrix.clone();
    for u in unitaries {
        let factors = superop_factors(u, reg, variant);
        let refs: Vec<&ComplexMatrix> = factors.iter().collect();
        let mut rotated = s.matrix.clone();
        left_apply_local(&mut rotated, &refs)?;
        acc += &rotated;
    }
    Superoperator::new(s.n_qudits, s.local_dim, acc.scale_real(1.0 / (1 + unitaries.len()) as f64))
}

/// One realization of `S_{QM}` for a plan (`K` branches per iteration).
pub fn recursive_twirl_superop(plan: &TwirlPlan, rng: &mut RngHandle) -> Result<Superoperator> {
    let reg = plan.register;
    let mut driver = crate::twirl::RecursiveTwirl::new(plan)?;
    let mut s = Superoperator::identity(reg.n_qudits, reg.local_dim)?;
    for _ in 0..plan.iterations {
        let us = driver.draw_branch_unitaries(rng)?;
        s = mix_superop(&s, &us, reg, plan.variant)?;
    }
    Ok(s)
}

/// `‖s − s_ref‖²`.
pub fn superop_error(s: &Superoperator, s_ref: &Superoperator) -> Result<f64> {
    if s.dim() != s_ref.dim() {
        return Err(TwirlError::Shape(format!("superoperators of size {} and {}", s.dim(), s_ref.dim())));
    }
    hs_distance_sq(&s.matrix, &s_ref.matrix)
}

pub fn superop_norm_sq(s: &Superoperator) -> f64 {
    hs_norm_sq(&s.matrix).value()
}

/// Closed-form mean squared error laws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum TheoryLaw {
    /// `gap / M`, plain averaging with `M` terms.
    AvgAlgebraic,
    /// `gap · K^{−M}` after `M` iterations of `P_K`.
    RecursiveExponential { k: usize },
    /// Stated bound `gap · [2/(1+p_g²)]^{−M}` for a biased two-branch source.
    /// Not a true bound for delta-like `g`: see [`TheoryLaw::BiasedIdentityBranch`].
    BiasedBound { p_g: f64 },
    /// `gap · [(1+p_g)/2]^M`. With the identity branch of `½(1 + C)` the
    /// Haar draws remove all cross terms but a `g` draw may leave
    /// `Re Tr(A†C A) = ‖A‖²`, so this is what the one-step estimate gives.
    BiasedIdentityBranch { p_g: f64 },
    /// `gap · exp(−(ln K/(K−1)) N_U)` against the unitary count `N_U`.
    KBranch { k: usize },
}

impl TheoryLaw {
    pub fn name(&self) -> &'static str {
        match self {
            TheoryLaw::AvgAlgebraic => "avg-algebraic",
            TheoryLaw::RecursiveExponential { .. } => "recursive-exponential",
            TheoryLaw::BiasedBound { .. } => "biased-bound",
            TheoryLaw::BiasedIdentityBranch { .. } => "biased-identity-branch",
            TheoryLaw::KBranch { .. } => "k-branch",
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            TheoryLaw::AvgAlgebraic => Ok(()),
            TheoryLaw::RecursiveExponential { k } | TheoryLaw::KBranch { k } if k >= 2 => Ok(()),
            TheoryLaw::BiasedBound { p_g } | TheoryLaw::BiasedIdentityBranch { p_g } if (0.0..=1.0).contains(&p_g) => {
                Ok(())
            }
            other => Err(TwirlError::InvalidParameter(format!("invalid theory parameters {other:?}"))),
        }
    }

    /// Predicted value at `x` (iterations, terms, or unitary count by law).
    /// The algebraic law is undefined at `x = 0` and yields `None` there.
    pub fn value(&self, gap: f64, x: usize) -> Option<f64> {
        let xf = x as f64;
        match *self {
            TheoryLaw::AvgAlgebraic => (x > 0).then(|| gap / xf),
            TheoryLaw::RecursiveExponential { k } => Some(gap * (k as f64).powf(-xf)),
            TheoryLaw::BiasedBound { p_g } => Some(gap * (2.0 / (1.0 + p_g * p_g)).powf(-xf)),
            TheoryLaw::BiasedIdentityBranch { p_g } => Some(gap * ((1.0 + p_g) / 2.0).powf(xf)),
            TheoryLaw::KBranch { k } => {
                let kf = k as f64;
                Some(gap * (-(kf.ln() / (kf - 1.0)) * xf).exp())
            }
        }
    }
}

/// Tabulated theory values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryCurve {
    pub law: TheoryLaw,
    /// Initial gap, e.g. `‖ρ‖² − ‖Pρ‖²` or `d^{2N} − N_R`.
    pub gap: f64,
    pub values: Vec<(usize, f64)>,
}

impl TheoryCurve {
    pub fn value_at(&self, x: usize) -> Option<f64> {
        self.law.value(self.gap, x)
    }
}

/// Tabulates `law` for `x = 0..=max` (skipping points where it is undefined).
pub fn theory_curve(law: TheoryLaw, gap: f64, max: usize) -> Result<TheoryCurve> {
    law.validate()?;
    if gap.is_nan() || gap < 0.0 {
        return Err(TwirlError::InvalidParameter(format!("initial gap {gap} must be >= 0")));
    }
    let values = (0..=max).filter_map(|x| law.value(gap, x).map(|v| (x, v))).collect();
    Ok(TheoryCurve { law, gap, values })
}

/// `d^{2N} − N_R`, the initial superoperator error `‖1 − S_P‖²`.
pub fn superop_gap(basis: &PermutationBasis) -> f64 {
    let side = basis.register().dim();
    (side * side) as f64 - basis.count() as f64
}

/// Formats a theory value with 17 significant digits, for CSV output.
pub fn format_theory(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// `(W)* ⊗ W` as a dense matrix; used by tests and the CLI.
pub fn conjugation_matrix(w: &ComplexMatrix) -> Result<ComplexMatrix> {
    kron(&w.conj(), w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, conjugation_superop, tensor_power};
    use crate::random::{haar_unitary, hs_random_density};
    use crate::twirl::{build_isotropic_basis, build_permutation_basis, exact_twirl, RecursiveTwirl};

    fn sp(n: usize, d: usize) -> (QuditRegister, PermutationBasis, Superoperator) {
        let reg = QuditRegister::new(n, d).unwrap();
        let basis = build_permutation_basis(reg).unwrap();
        let s = exact_twirl_superop(reg, &basis).unwrap();
        (reg, basis, s)
    }

    #[test]
    fn exact_superop_is_projector_with_integer_trace() {
        for (n, d, nr) in [(1, 3, 1), (2, 2, 2), (2, 3, 2), (3, 2, 5)] {
            let (_, _, s) = sp(n, d);
            let t = s.matrix().trace();
            assert!((t.re - nr as f64).abs() < 1e-8 && t.im.abs() < 1e-8);
            assert!((s.matrix() * s.matrix()).max_abs_diff(s.matrix()) <= 1e-9);
            assert!(s.matrix().adjoint().max_abs_diff(s.matrix()) <= 1e-9);
            for ev in s.matrix().hermitian_eigenvalues().unwrap() {
                assert!(ev.abs() < 1e-8 || (ev - 1.0).abs() < 1e-8, "{ev}");
            }
            assert!((superop_norm_sq(&s) - nr as f64).abs() < 1e-8);
        }
    }

    #[test]
    fn single_qudit_projector_is_rank_one() {
        let (_, _, s) = sp(1, 3);
        let v = vec(&ComplexMatrix::identity(3).scale_real(1.0 / 3f64.sqrt())).unwrap();
        let expected = ComplexMatrix::outer(&v);
        assert!(s.matrix().max_abs_diff(&expected) < 1e-14);
    }

    #[test]
    fn exact_superop_matches_state_projection() {
        let mut rng = RngHandle::new(1, 0);
        for (n, d) in [(2, 2), (3, 2), (2, 3)] {
            let (reg, basis, s) = sp(n, d);
            let rho = hs_random_density(reg.dim(), &mut rng).unwrap();
            let via_s = s.apply_matrix(rho.matrix()).unwrap();
            let direct = exact_twirl(&rho, &basis).unwrap();
            assert!(via_s.max_abs_diff(direct.matrix()) <= 1e-10);
        }
        let reg = QuditRegister::new(2, 2).unwrap();
        let iso = build_isotropic_basis(reg).unwrap();
        let s = exact_twirl_superop(reg, &iso).unwrap();
        assert!((s.matrix().trace().re - 2.0).abs() < 1e-12);
        assert!(exact_twirl_superop(QuditRegister::new(3, 2).unwrap(), &iso).is_err());
    }

    #[test]
    fn superop_error_basics() {
        let (reg, basis, s) = sp(2, 2);
        let id = Superoperator::identity(reg.n_qudits, reg.local_dim).unwrap();
        assert_eq!(superop_error(&s, &s).unwrap(), 0.0);
        let e = superop_error(&id, &s).unwrap();
        assert!((e - superop_gap(&basis)).abs() < 1e-10);
        assert!((e - 14.0).abs() < 1e-10);
        assert!((superop_error(&s, &id).unwrap() - e).abs() < 1e-12);
        let (_, _, s3) = sp(3, 2);
        assert!(superop_error(&s, &s3).is_err());
    }

    #[test]
    fn avg_superop_cases() {
        let reg = QuditRegister::new(2, 2).unwrap();
        let mut rng = RngHandle::new(2, 0);
        let one = avg_twirl_superop(1, &UnitarySource::Haar, reg, &mut rng).unwrap();
        assert_eq!(*one.matrix(), ComplexMatrix::identity(16));
        assert!(avg_twirl_superop(0, &UnitarySource::Haar, reg, &mut rng).is_err());
        let s = avg_twirl_superop(6, &UnitarySource::Haar, reg, &mut rng).unwrap();
        let out = s.apply_matrix(&ComplexMatrix::identity(4).scale_real(0.25)).unwrap();
        assert!((out.trace() - c(1.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn avg_superop_error_law() {
        // ⟨‖S_PM − S_P‖²⟩ = (16 − 2)/M at M = 8
        let (reg, _, s_p) = sp(2, 2);
        let n = 10_000;
        let mut total = 0.0;
        for t in 0..n {
            let mut rng = RngHandle::new(3, t);
            let s = avg_twirl_superop(8, &UnitarySource::Haar, reg, &mut rng).unwrap();
            total += superop_error(&s, &s_p).unwrap();
        }
        let mean = total / n as f64;
        assert!((mean - 14.0 / 8.0).abs() <= 0.05 * 14.0 / 8.0, "{mean}");
    }

    #[test]
    fn recursive_superop_consistent_with_state_channel() {
        let reg = QuditRegister::new(2, 2).unwrap();
        let plan = TwirlPlan::recursive(reg, 6, UnitarySource::Haar).unwrap();
        let rho = hs_random_density(4, &mut RngHandle::new(4, 0)).unwrap();
        let s = recursive_twirl_superop(&plan, &mut RngHandle::new(5, 0)).unwrap();
        let state = crate::twirl::recursive_twirl(&rho, &plan, &mut RngHandle::new(5, 0)).unwrap();
        assert!(s.apply_matrix(rho.matrix()).unwrap().max_abs_diff(state.matrix()) <= 1e-10);
        let plan0 = TwirlPlan::recursive(reg, 0, UnitarySource::Haar).unwrap();
        assert_eq!(*recursive_twirl_superop(&plan0, &mut RngHandle::new(0, 0)).unwrap().matrix(), ComplexMatrix::identity(16));
    }

    #[test]
    fn mix_superop_equals_dense_conjugation() {
        let reg = QuditRegister::new(2, 2).unwrap();
        let mut rng = RngHandle::new(6, 0);
        let u = haar_unitary(2, &mut rng).unwrap();
        let id = Superoperator::identity(2, 2).unwrap();
        let mixed = mix_superop(&id, &[u.clone()], reg, Variant::Werner).unwrap();
        let c = conjugation_superop(&u, 2).unwrap();
        let expected = (&ComplexMatrix::identity(16) + c.matrix()).scale_real(0.5);
        assert!(mixed.matrix().max_abs_diff(&expected) < 1e-14);
        let w = tensor_power(&u, 2).unwrap();
        assert!(conjugation_matrix(&w).unwrap().max_abs_diff(c.matrix()) < 1e-15);
    }

    #[test]
    fn mean_superop_norm_follows_closed_form() {
        // ⟨‖S_QM‖²⟩ = d^{2N} + (N_R − d^{2N})(1 − 2^{−M})
        let (reg, basis, _) = sp(2, 2);
        let plan = TwirlPlan::recursive(reg, 6, UnitarySource::Haar).unwrap();
        let n = 10_000;
        let mut sums = [0.0f64; 7];
        for t in 0..n {
            let mut rng = RngHandle::new(7, t);
            let mut driver = RecursiveTwirl::new(&plan).unwrap();
            let mut s = Superoperator::identity(2, 2).unwrap();
            sums[0] += superop_norm_sq(&s);
            for m in 1..=6 {
                let us = driver.draw_branch_unitaries(&mut rng).unwrap();
                s = mix_superop(&s, &us, reg, Variant::Werner).unwrap();
                sums[m] += superop_norm_sq(&s);
            }
        }
        let full = 16.0;
        let nr = basis.count() as f64;
        for (m, s) in sums.iter().enumerate() {
            let theory = full + (nr - full) * (1.0 - 0.5f64.powi(m as i32));
            assert!((s / n as f64 - theory).abs() <= 0.05 * theory);
        }
    }

    #[test]
    fn theory_curves() {
        let rec = theory_curve(TheoryLaw::RecursiveExponential { k: 2 }, 59.0, 12).unwrap();
        assert_eq!(rec.value_at(3), Some(59.0 / 8.0));
        assert_eq!(rec.values.len(), 13);
        for w in rec.values.windows(2) {
            assert_eq!(w[1].1 * 2.0, w[0].1);
        }
        let avg = theory_curve(TheoryLaw::AvgAlgebraic, 14.0, 20).unwrap();
        assert_eq!(avg.value_at(14), Some(1.0));
        assert_eq!(avg.value_at(0), None);
        assert_eq!(avg.values[0].0, 1);
        let biased = theory_curve(TheoryLaw::BiasedBound { p_g: 0.0 }, 3.0, 10).unwrap();
        assert_eq!(biased.values, rec_values(3.0, 10));
        let kb = theory_curve(TheoryLaw::KBranch { k: 4 }, 1.0, 9).unwrap();
        assert!((kb.value_at(9).unwrap() - 4f64.powi(-3)).abs() < 1e-15);
        assert!(theory_curve(TheoryLaw::BiasedBound { p_g: 1.5 }, 1.0, 3).is_err());
        assert!(theory_curve(TheoryLaw::KBranch { k: 1 }, 1.0, 3).is_err());
        assert!(theory_curve(TheoryLaw::AvgAlgebraic, -1.0, 3).is_err());
    }

    fn rec_values(gap: f64, max: usize) -> Vec<(usize, f64)> {
        (0..=max).map(|m| (m, gap * 2f64.powi(-(m as i32)))).collect()
    }

    #[test]
    fn guard_and_json() {
        assert!(matches!(Superoperator::identity(4, 3), Err(TwirlError::ResourceGuard(_))));
        let (_, _, s) = sp(2, 2);
        let back = Superoperator::from_json(&s.to_json()).unwrap();
        assert_eq!(back, s);
        let plain = s.matrix().to_json();
        assert!(Superoperator::from_json(&plain).is_err());
    }
}
