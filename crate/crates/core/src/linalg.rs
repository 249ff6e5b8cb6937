//! Dense complex matrices and the Hilbert-Schmidt geometry used throughout.
//!
//! [`ComplexMatrix`] stores its entries in row-major order. That layout is
//! an implementation detail: the only column-ordered view exposed to callers
//! is [`vec`], which stacks columns (`vec(Σ ρ_kl |k⟩⟨l|) = Σ ρ_kl |l⟩⊗|k⟩`),
//! and its inverse [`unvec`].
//!
//! Tensor factors follow the usual Kronecker convention: in `A ⊗ B` the
//! first factor owns the most significant digit of the row/column index.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TwirlError};
use crate::superop::Superoperator;

pub type C64 = Complex64;

/// Maximum entry deviation of `U†U` from the identity accepted as unitary.
pub const UNITARITY_TOL: f64 = 1e-9;

#[inline]
pub(crate) const fn c(re: f64, im: f64) -> C64 {
    Complex64::new(re, im)
}

const ZERO: C64 = c(0.0, 0.0);
const ONE: C64 = c(1.0, 0.0);

/// Dense complex matrix, row-major storage.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for col in 0..self.cols {
                let z = self[(r, col)];
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = ONE;
        }
        m
    }

    /// Builds a matrix from row-major entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        let expected = rows
            .checked_mul(cols)
            .ok_or_else(|| TwirlError::Overflow(format!("{rows}x{cols} shape")))?;
        if data.len() != expected {
            return Err(TwirlError::Shape(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(ComplexMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let r = rows.len();
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != cols) {
            return Err(TwirlError::Shape("ragged rows".into()));
        }
        Self::from_vec(r, cols, rows.iter().flatten().copied().collect())
    }

    pub fn from_diag(diag: &[C64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &z) in diag.iter().enumerate() {
            m.data[i * n + i] = z;
        }
        m
    }

    /// Rank-one projector `|ψ⟩⟨ψ|` (the vector is not normalized here).
    pub fn outer(psi: &[C64]) -> Self {
        let n = psi.len();
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m.data[i * n + j] = psi[i] * psi[j].conj();
            }
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Entries in row-major order.
    #[inline]
    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn require_square(&self) -> Result<usize> {
        if self.is_square() {
            Ok(self.rows)
        } else {
            Err(TwirlError::NotSquare { rows: self.rows, cols: self.cols })
        }
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for col in 0..self.cols {
                out.data[col * self.rows + r] = self.data[r * self.cols + col].conj();
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for col in 0..self.cols {
                out.data[col * self.rows + r] = self.data[r * self.cols + col];
            }
        }
        out
    }

    /// Element-wise complex conjugate.
    pub fn conj(&self) -> Self {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: C64, other: &ComplexMatrix) -> Result<()> {
        self.check_same_shape(other)?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
        Ok(())
    }

    fn check_same_shape(&self, other: &ComplexMatrix) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(TwirlError::Shape(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }

    pub fn try_add(&self, other: &ComplexMatrix) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(ONE, other)?;
        Ok(out)
    }

    pub fn try_sub(&self, other: &ComplexMatrix) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(-ONE, other)?;
        Ok(out)
    }

    pub fn matmul(&self, other: &ComplexMatrix) -> Result<Self> {
        if self.cols != other.rows {
            return Err(TwirlError::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let (n, k, m) = (self.rows, self.cols, other.cols);
        let mut out = Self::zeros(n, m);
        for i in 0..n {
            let out_row = &mut out.data[i * m..(i + 1) * m];
            for p in 0..k {
                let a = self.data[i * k + p];
                if a == ZERO {
                    continue;
                }
                let b_row = &other.data[p * m..(p + 1) * m];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Matrix-vector product.
    pub fn apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        if v.len() != self.cols {
            return Err(TwirlError::Shape(format!(
                "vector of length {} for {}x{} matrix",
                v.len(),
                self.rows,
                self.cols
            )));
        }
        Ok((0..self.rows)
            .map(|r| {
                self.data[r * self.cols..(r + 1) * self.cols]
                    .iter()
                    .zip(v)
                    .map(|(&a, &b)| a * b)
                    .sum()
            })
            .collect())
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self.data[i * self.cols + i]).sum()
    }

    /// Largest entrywise modulus of `self - other`; infinite on shape mismatch.
    pub fn max_abs_diff(&self, other: &ComplexMatrix) -> f64 {
        if self.rows != other.rows || self.cols != other.cols {
            return f64::INFINITY;
        }
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let d = (self.data[i * n + j] - self.data[j * n + i].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_deviation() <= tol
    }

    /// Max-entry deviation of `U†U` from the identity.
    pub fn unitarity_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let mut s = ZERO;
                for k in 0..n {
                    s += self.data[k * n + i].conj() * self.data[k * n + j];
                }
                if i == j {
                    s -= ONE;
                }
                worst = worst.max(s.norm());
            }
        }
        worst
    }

    pub fn is_unitary(&self) -> bool {
        self.unitarity_deviation() <= UNITARITY_TOL
    }

    pub fn require_unitary(&self) -> Result<()> {
        self.require_square()?;
        let deviation = self.unitarity_deviation();
        if deviation > UNITARITY_TOL {
            return Err(TwirlError::NotUnitary { deviation });
        }
        Ok(())
    }

    /// Eigenvalues of a Hermitian matrix, ascending. Only the Hermitian part
    /// of `self` is used.
    ///
    /// `H = A + iB` is embedded as the real symmetric `[[A, −B], [B, A]]`,
    /// whose spectrum is that of `H` with every eigenvalue doubled.
    pub fn hermitian_eigenvalues(&self) -> Result<Vec<f64>> {
        let n = self.require_square()?;
        let h = |i: usize, j: usize| 0.5 * (self.data[i * n + j] + self.data[j * n + i].conj());
        let m = nalgebra::DMatrix::<f64>::from_fn(2 * n, 2 * n, |i, j| {
            let z = h(i % n, j % n);
            match (i < n, j < n) {
                (true, true) | (false, false) => z.re,
                (true, false) => -z.im,
                (false, true) => z.im,
            }
        });
        // nalgebra's symmetric QR returns NaN on some very sparse inputs
        // (e.g. 81x81 projectors); a scalar shift avoids the exact zeros.
        let shift = 0.618_033_988_749_895 * self.max_abs().max(1.0);
        let shifted = m + nalgebra::DMatrix::<f64>::identity(2 * n, 2 * n) * shift;
        let mut ev: Vec<f64> = shifted.symmetric_eigenvalues().iter().map(|x| x - shift).collect();
        if ev.iter().any(|x| !x.is_finite()) {
            return Err(TwirlError::NonFinite("eigenvalue decomposition".into()));
        }
        ev.sort_by(f64::total_cmp);
        Ok(ev.into_iter().step_by(2).collect())
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (r, col): (usize, usize)) -> &C64 {
        assert!(r < self.rows && col < self.cols, "index out of bounds");
        &self.data[r * self.cols + col]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (r, col): (usize, usize)) -> &mut C64 {
        assert!(r < self.rows && col < self.cols, "index out of bounds");
        &mut self.data[r * self.cols + col]
    }
}

// The operator impls panic on shape mismatch; use the `try_*`/`matmul`
// methods where shapes are not known to agree.
impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.try_add(rhs).expect("shape mismatch in add")
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.try_sub(rhs).expect("shape mismatch in sub")
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs).expect("shape mismatch in mul")
    }
}

impl AddAssign<&ComplexMatrix> for ComplexMatrix {
    fn add_assign(&mut self, rhs: &ComplexMatrix) {
        self.axpy(ONE, rhs).expect("shape mismatch in add_assign")
    }
}

/// Squared Hilbert-Schmidt norm `Tr(A†A)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct HsNorm(f64);

impl HsNorm {
    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Kronecker product.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    let rows = a
        .rows
        .checked_mul(b.rows)
        .ok_or_else(|| TwirlError::Overflow("kron rows".into()))?;
    let cols = a
        .cols
        .checked_mul(b.cols)
        .ok_or_else(|| TwirlError::Overflow("kron cols".into()))?;
    rows.checked_mul(cols)
        .ok_or_else(|| TwirlError::Overflow("kron entry count".into()))?;
    let mut out = ComplexMatrix::zeros(rows, cols);
    for ia in 0..a.rows {
        for ja in 0..a.cols {
            let s = a.data[ia * a.cols + ja];
            if s == ZERO {
                continue;
            }
            for ib in 0..b.rows {
                let dst = (ia * b.rows + ib) * cols + ja * b.cols;
                let src = &b.data[ib * b.cols..(ib + 1) * b.cols];
                for (o, &z) in out.data[dst..dst + b.cols].iter_mut().zip(src) {
                    *o = s * z;
                }
            }
        }
    }
    Ok(out)
}

/// `u ⊗ u ⊗ … ⊗ u` with `copies` factors; `copies == 0` gives the 1×1 identity.
pub fn tensor_power(u: &ComplexMatrix, copies: usize) -> Result<ComplexMatrix> {
    let mut out = ComplexMatrix::identity(1);
    for _ in 0..copies {
        out = kron(&out, u)?;
    }
    Ok(out)
}

/// Kronecker product of a list of factors, first factor most significant.
pub fn kron_all<'a, I>(factors: I) -> Result<ComplexMatrix>
where
    I: IntoIterator<Item = &'a ComplexMatrix>,
{
    let mut out = ComplexMatrix::identity(1);
    for f in factors {
        out = kron(&out, f)?;
    }
    Ok(out)
}

/// Column-stacking vectorization.
pub fn vec(a: &ComplexMatrix) -> Result<Vec<C64>> {
    let n = a.require_square()?;
    let mut v = vec![ZERO; n * n];
    for k in 0..n {
        for l in 0..n {
            v[l * n + k] = a.data[k * n + l];
        }
    }
    Ok(v)
}

/// Inverse of [`vec`].
pub fn unvec(v: &[C64], dim: usize) -> Result<ComplexMatrix> {
    if dim.checked_mul(dim) != Some(v.len()) {
        return Err(TwirlError::Shape(format!(
            "vector of length {} cannot be unvec'd to {dim}x{dim}",
            v.len()
        )));
    }
    let mut out = ComplexMatrix::zeros(dim, dim);
    for k in 0..dim {
        for l in 0..dim {
            out.data[k * dim + l] = v[l * dim + k];
        }
    }
    Ok(out)
}

pub fn hs_norm_sq(a: &ComplexMatrix) -> HsNorm {
    HsNorm(a.data.iter().map(|z| z.norm_sqr()).sum())
}

/// `Tr(a†b)`.
pub fn hs_inner(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<C64> {
    a.check_same_shape(b)?;
    Ok(a.data.iter().zip(&b.data).map(|(x, y)| x.conj() * y).sum())
}

/// `‖a − b‖²` without allocating the difference.
pub fn hs_distance_sq(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    a.check_same_shape(b)?;
    Ok(a.data.iter().zip(&b.data).map(|(x, y)| (x - y).norm_sqr()).sum())
}

/// Superoperator `(u^⊗copies)* ⊗ u^⊗copies` of the conjugation `ρ ↦ WρW†`.
pub fn conjugation_superop(u: &ComplexMatrix, copies: usize) -> Result<Superoperator> {
    u.require_unitary()?;
    let w = tensor_power(u, copies)?;
    let s = kron(&w.conj(), &w)?;
    Superoperator::new(copies, u.rows, s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PauliAxis {
    X,
    Y,
    Z,
}

pub fn pauli(axis: PauliAxis) -> ComplexMatrix {
    let (a, b, cc, d) = match axis {
        PauliAxis::X => (ZERO, ONE, ONE, ZERO),
        PauliAxis::Y => (ZERO, c(0.0, -1.0), c(0.0, 1.0), ZERO),
        PauliAxis::Z => (ONE, ZERO, ZERO, -ONE),
    };
    ComplexMatrix { rows: 2, cols: 2, data: vec![a, b, cc, d] }
}

/// `exp(i·angle·σ_axis) = cos(angle)·I + i·sin(angle)·σ_axis`.
pub fn pauli_rotation(axis: PauliAxis, angle: f64) -> ComplexMatrix {
    let cos = c(angle.cos(), 0.0);
    let isin = c(0.0, angle.sin());
    let sigma = pauli(axis);
    let mut out = ComplexMatrix::identity(2).scale(cos);
    out.axpy(isin, &sigma).expect("2x2");
    out
}

/// Applies a `d×d` matrix to one tensor slot of a flat buffer viewed as
/// `[outer][d][inner]`.
fn apply_slot(buf: &mut [C64], outer: usize, d: usize, inner: usize, u: &[C64], tmp: &mut Vec<C64>) {
    let block = d * inner;
    tmp.resize(block, ZERO);
    for o in 0..outer {
        let chunk = &mut buf[o * block..(o + 1) * block];
        tmp.copy_from_slice(chunk);
        for a in 0..d {
            let dst = &mut chunk[a * inner..(a + 1) * inner];
            dst.fill(ZERO);
            for b in 0..d {
                let coef = u[a * d + b];
                if coef == ZERO {
                    continue;
                }
                let src = &tmp[b * inner..(b + 1) * inner];
                for (x, &y) in dst.iter_mut().zip(src) {
                    *x += coef * y;
                }
            }
        }
    }
}

fn slot_count(n: usize, d: usize) -> Option<usize> {
    if d < 2 {
        return if n == 1 { Some(0) } else { None };
    }
    let mut k = 0;
    let mut m = n;
    while m > 1 {
        if !m.is_multiple_of(d) {
            return None;
        }
        m /= d;
        k += 1;
    }
    Some(k)
}

fn check_local_factors(dim: usize, factors: &[&ComplexMatrix]) -> Result<usize> {
    let d = factors.first().map_or(1, |f| f.rows);
    if factors.iter().any(|f| f.rows != d || f.cols != d) {
        return Err(TwirlError::Shape("local factors must share one square size".into()));
    }
    let expected = d
        .checked_pow(factors.len() as u32)
        .ok_or_else(|| TwirlError::Overflow("local factor dimension".into()))?;
    if expected != dim {
        return Err(TwirlError::Shape(format!(
            "{} factors of size {d} do not act on dimension {dim}",
            factors.len()
        )));
    }
    Ok(d)
}

/// In place `mat ← (f₀ ⊗ f₁ ⊗ …) · mat` without forming the Kronecker product.
pub fn left_apply_local(mat: &mut ComplexMatrix, factors: &[&ComplexMatrix]) -> Result<()> {
    let d = check_local_factors(mat.rows, factors)?;
    let k = factors.len();
    let mut tmp = Vec::new();
    for (j, f) in factors.iter().enumerate() {
        let outer = d.pow(j as u32);
        let inner = d.pow((k - j - 1) as u32) * mat.cols;
        apply_slot(&mut mat.data, outer, d, inner, &f.data, &mut tmp);
    }
    Ok(())
}

/// In place `mat ← mat · (f₀ ⊗ f₁ ⊗ …)†`.
pub fn right_apply_local_adjoint(mat: &mut ComplexMatrix, factors: &[&ComplexMatrix]) -> Result<()> {
    let d = check_local_factors(mat.cols, factors)?;
    let k = factors.len();
    let mut tmp = Vec::new();
    for (j, f) in factors.iter().enumerate() {
        let conj: Vec<C64> = f.data.iter().map(|z| z.conj()).collect();
        let outer = mat.rows * d.pow(j as u32);
        let inner = d.pow((k - j - 1) as u32);
        apply_slot(&mut mat.data, outer, d, inner, &conj, &mut tmp);
    }
    Ok(())
}

/// `W ρ W†` with `W = f₀ ⊗ f₁ ⊗ …`, computed slot by slot.
pub fn conjugate_local(rho: &ComplexMatrix, factors: &[&ComplexMatrix]) -> Result<ComplexMatrix> {
    let mut out = rho.clone();
    left_apply_local(&mut out, factors)?;
    right_apply_local_adjoint(&mut out, factors)?;
    Ok(out)
}

/// Number of `d`-dimensional tensor slots in a space of dimension `n`, if exact.
pub fn tensor_slots(n: usize, d: usize) -> Option<usize> {
    slot_count(n, d)
}

/// JSON matrix file: `{"rows": R, "cols": C, "data": [[re, im], ...]}`,
/// entries row by row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixFile {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<[f64; 2]>,
}

impl From<&ComplexMatrix> for MatrixFile {
    fn from(m: &ComplexMatrix) -> Self {
        MatrixFile {
            rows: m.rows,
            cols: m.cols,
            data: m.data.iter().map(|z| [z.re, z.im]).collect(),
        }
    }
}

impl TryFrom<MatrixFile> for ComplexMatrix {
    type Error = TwirlError;
    fn try_from(f: MatrixFile) -> Result<Self> {
        let m = ComplexMatrix::from_vec(f.rows, f.cols, f.data.iter().map(|&[re, im]| c(re, im)).collect())?;
        if !m.is_finite() {
            return Err(TwirlError::Parse("matrix contains non-finite entries".into()));
        }
        Ok(m)
    }
}

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        // keep the sign of negative zero
        return if x.is_sign_negative() { "-0.0".into() } else { "0.0".into() };
    }
    format!("{x:.16e}")
}

/// Writes the matrix JSON body fields (`"rows"`, `"cols"`, `"data"`), used by
/// both plain matrix files and annotated superoperator files.
pub(crate) fn write_matrix_fields(m: &ComplexMatrix, out: &mut String) {
    use std::fmt::Write;
    let _ = write!(out, "\"rows\": {}, \"cols\": {}, \"data\": [", m.rows, m.cols);
    for (i, z) in m.data.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        let _ = write!(out, "[{}, {}]", fmt_f64(z.re), fmt_f64(z.im));
    }
    out.push(']');
}

impl ComplexMatrix {
    pub fn to_json(&self) -> String {
        let mut s = String::from("{");
        write_matrix_fields(self, &mut s);
        s.push('}');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: MatrixFile = serde_json::from_str(text)?;
        file.try_into()
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

/// Parses either a single matrix object or a JSON array of them.
pub fn matrices_from_json(text: &str) -> Result<Vec<ComplexMatrix>> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let files: Vec<MatrixFile> = match value {
        serde_json::Value::Array(_) => serde_json::from_value(value)?,
        other => vec![serde_json::from_value(other)?],
    };
    files.into_iter().map(ComplexMatrix::try_from).collect()
}

pub fn matrices_to_json(ms: &[ComplexMatrix]) -> String {
    let body: Vec<String> = ms.iter().map(ComplexMatrix::to_json).collect();
    format!("[{}]", body.join(", "))
}
