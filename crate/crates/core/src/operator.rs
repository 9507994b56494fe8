//! Dense complex operators on small truncated Hilbert spaces.
//!
//! Everything in this crate lives in the single-excitation sector: a basis
//! `{|vac>, |1_0>, .., |1_{n-1}>}` where index 0 is the global ground state.
//! The matrices involved are at most 6x6, so a flat row-major buffer with
//! hand-written loops beats any general-purpose matrix library here.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{shape, Error, Result};

/// Trace tolerance for a stored density matrix.
pub const TRACE_TOL: f64 = 1e-9;
/// Entrywise Hermiticity tolerance for a stored density matrix.
pub const HERMITICITY_TOL: f64 = 1e-10;
/// Smallest admissible eigenvalue of a density matrix (integrator noise).
pub const POSITIVITY_TOL: f64 = -1e-8;
/// Entrywise Hermiticity tolerance for Hamiltonians.
pub const HAMILTONIAN_HERMITICITY_TOL: f64 = 1e-12;

/// Square complex matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct ComplexOperator {
    dim: usize,
    data: Vec<C64>,
}

impl ComplexOperator {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![C64::new(0.0, 0.0); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut out = Self::zeros(dim);
        for i in 0..dim {
            out[(i, i)] = C64::new(1.0, 0.0);
        }
        out
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                data.push(f(r, c));
            }
        }
        Self { dim, data }
    }

    /// Builds a real matrix from rows. All rows must have the same length as
    /// the number of rows.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(shape("rows do not form a square matrix"));
        }
        Ok(Self::from_fn(dim, |r, c| C64::new(rows[r][c], 0.0)))
    }

    /// `|row><col|` on a `dim`-dimensional space.
    pub fn outer(dim: usize, row: usize, col: usize) -> Self {
        let mut out = Self::zeros(dim);
        out[(row, col)] = C64::new(1.0, 0.0);
        out
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |r, c| self[(c, r)].conj())
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|z| z * s).collect() }
    }

    /// Matrix product `self * rhs`.
    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        self.check_same_dim(rhs, "matmul")?;
        let mut out = Self::zeros(self.dim);
        mul_into(self, rhs, &mut out);
        Ok(out)
    }

    pub fn commutator(&self, rhs: &Self) -> Result<Self> {
        Ok(&self.matmul(rhs)? - &rhs.matmul(self)?)
    }

    /// Largest entrywise `|A - A^dagger|`.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0_f64;
        for r in 0..n {
            for c in r..n {
                worst = worst.max((self[(r, c)] - self[(c, r)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    /// Largest entrywise `|A - B|`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim, "max_abs_diff on different dimensions");
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Pads the operator with zero rows/columns up to `new_dim`.
    pub fn embed(&self, new_dim: usize) -> Result<Self> {
        if new_dim < self.dim {
            return Err(shape(format!("cannot embed {}x{} into {new_dim}", self.dim, self.dim)));
        }
        let mut out = Self::zeros(new_dim);
        for r in 0..self.dim {
            for c in 0..self.dim {
                out[(r, c)] = self[(r, c)];
            }
        }
        Ok(out)
    }

    /// The `n x n` block starting at `(offset, offset)`.
    pub fn sub_block(&self, offset: usize, n: usize) -> Result<Self> {
        if offset + n > self.dim {
            return Err(shape(format!("block {offset}+{n} exceeds dimension {}", self.dim)));
        }
        Ok(Self::from_fn(n, |r, c| self[(r + offset, c + offset)]))
    }

    /// Non-zero entries as `(row, col, value)`.
    pub fn nonzeros(&self) -> Vec<(usize, usize, C64)> {
        let n = self.dim;
        (0..n * n).filter(|&k| self.data[k] != C64::new(0.0, 0.0)).map(|k| (k / n, k % n, self.data[k])).collect()
    }

    /// Eigenvalues of a Hermitian operator in ascending order.
    ///
    /// Only the Hermitian part is looked at; callers check Hermiticity first.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.to_nalgebra().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }

    pub fn from_nalgebra(m: &DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(shape("matrix is not square"));
        }
        Ok(Self::from_fn(m.nrows(), |r, c| m[(r, c)]))
    }

    fn check_same_dim(&self, other: &Self, what: &str) -> Result<()> {
        if self.dim != other.dim {
            return Err(shape(format!("{what}: {} vs {}", self.dim, other.dim)));
        }
        Ok(())
    }
}

/// `out = a * b`, skipping structural zeros of `a`.
///
/// Model operators are sparse (ladder operators, tridiagonal Hamiltonians),
/// which makes the skip worthwhile even at this size.
pub(crate) fn mul_into(a: &ComplexOperator, b: &ComplexOperator, out: &mut ComplexOperator) {
    let n = a.dim;
    debug_assert!(b.dim == n && out.dim == n);
    out.data.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
    for r in 0..n {
        let out_row = &mut out.data[r * n..(r + 1) * n];
        for k in 0..n {
            let aik = a.data[r * n + k];
            if aik.re == 0.0 && aik.im == 0.0 {
                continue;
            }
            let b_row = &b.data[k * n..(k + 1) * n];
            for (o, bkc) in out_row.iter_mut().zip(b_row) {
                *o += aik * bkc;
            }
        }
    }
}

impl Index<(usize, usize)> for ComplexOperator {
    type Output = C64;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.dim + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexOperator {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.dim + c]
    }
}

impl Add for &ComplexOperator {
    type Output = ComplexOperator;
    fn add(self, rhs: &ComplexOperator) -> ComplexOperator {
        assert_eq!(self.dim, rhs.dim, "operator dimensions differ");
        ComplexOperator { dim: self.dim, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect() }
    }
}

impl AddAssign<&ComplexOperator> for ComplexOperator {
    fn add_assign(&mut self, rhs: &ComplexOperator) {
        assert_eq!(self.dim, rhs.dim, "operator dimensions differ");
        self.data.iter_mut().zip(&rhs.data).for_each(|(a, b)| *a += b);
    }
}

impl Sub for &ComplexOperator {
    type Output = ComplexOperator;
    fn sub(self, rhs: &ComplexOperator) -> ComplexOperator {
        assert_eq!(self.dim, rhs.dim, "operator dimensions differ");
        ComplexOperator { dim: self.dim, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect() }
    }
}

impl Neg for &ComplexOperator {
    type Output = ComplexOperator;
    fn neg(self) -> ComplexOperator {
        self.scale(C64::new(-1.0, 0.0))
    }
}

impl Mul<f64> for &ComplexOperator {
    type Output = ComplexOperator;
    fn mul(self, s: f64) -> ComplexOperator {
        self.scale(C64::new(s, 0.0))
    }
}

impl Mul<C64> for &ComplexOperator {
    type Output = ComplexOperator;
    fn mul(self, s: C64) -> ComplexOperator {
        self.scale(s)
    }
}

impl fmt::Debug for ComplexOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexOperator({}x{}) [", self.dim, self.dim)?;
        for r in 0..self.dim {
            write!(f, "  ")?;
            for c in 0..self.dim {
                let z = self[(r, c)];
                write!(f, "{:+.4e}{:+.4e}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Hermitian, unit-trace, positive semidefinite state.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(ComplexOperator);

impl DensityMatrix {
    /// Pure basis state `|index><index|`.
    pub fn basis_state(dim: usize, index: usize) -> Result<Self> {
        if dim == 0 || index >= dim {
            return Err(Error::InvalidDimension(format!("basis state {index} in dimension {dim}")));
        }
        Ok(Self(ComplexOperator::outer(dim, index, index)))
    }

    /// Validates `op` against the density-matrix invariants.
    pub fn new(op: ComplexOperator) -> Result<Self> {
        let rho = Self(op);
        rho.check()?;
        Ok(rho)
    }

    /// Wraps `op` without checking. Intermediate integrator states use this.
    pub fn new_unchecked(op: ComplexOperator) -> Self {
        Self(op)
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn as_operator(&self) -> &ComplexOperator {
        &self.0
    }

    pub fn into_operator(self) -> ComplexOperator {
        self.0
    }

    pub fn trace_error(&self) -> f64 {
        (self.0.trace() - C64::new(1.0, 0.0)).norm()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.0.hermitian_eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// `Tr(rho^2)`.
    pub fn purity(&self) -> f64 {
        // Tr(rho rho) = sum_ij rho_ij rho_ji = sum_ij |rho_ij|^2 for Hermitian rho.
        self.0.as_slice().iter().map(|z| z.norm_sqr()).sum()
    }

    /// Checks trace, Hermiticity and positivity.
    pub fn check(&self) -> Result<()> {
        self.check_cheap()?;
        let min_ev = self.min_eigenvalue();
        if min_ev < POSITIVITY_TOL {
            return Err(Error::Invariant(format!("positivity: smallest eigenvalue {min_ev:e}")));
        }
        Ok(())
    }

    /// Trace and Hermiticity only.
    pub fn check_cheap(&self) -> Result<()> {
        let tr = self.trace_error();
        if tr >= TRACE_TOL {
            return Err(Error::Invariant(format!("trace: |Tr rho - 1| = {tr:e}")));
        }
        let herm = self.0.hermiticity_error();
        if herm >= HERMITICITY_TOL {
            return Err(Error::Invariant(format!("hermiticity: max |rho - rho^dagger| = {herm:e}")));
        }
        Ok(())
    }
}

/// Lowering operators for `mode_count` modes on the single-excitation space.
///
/// The space has dimension `mode_count + 1`; index 0 is the vacuum and index
/// `j + 1` holds one excitation in mode `j`. Operator `j` maps `|1_j>` to
/// `|vac>` and annihilates every other basis state.
pub fn ladder_operators(mode_count: usize) -> Result<Vec<ComplexOperator>> {
    if mode_count == 0 {
        return Err(Error::InvalidDimension("mode_count must be at least 1".into()));
    }
    let dim = mode_count + 1;
    Ok((0..mode_count).map(|j| ComplexOperator::outer(dim, 0, j + 1)).collect())
}

/// `Tr(A rho)`.
pub fn expectation(rho: &DensityMatrix, a: &ComplexOperator) -> Result<C64> {
    trace_product(a, rho.as_operator())
}

/// `Tr(A B)` without forming the product.
pub fn trace_product(a: &ComplexOperator, b: &ComplexOperator) -> Result<C64> {
    if a.dim() != b.dim() {
        return Err(shape(format!("trace product: {} vs {}", a.dim(), b.dim())));
    }
    let n = a.dim();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    Ok(acc)
}
