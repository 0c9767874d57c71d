//! Sparse linear solves.
//!
//! The default path is a sparse LU from `faer` with the symbolic analysis
//! cached so step-size changes only pay the numeric refactorization. A
//! Jacobi-scaled BiCGStab fallback exists for configurations that ask for an
//! iterative solver; the saddle systems here are best served by the direct
//! path at the scales this crate targets.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, SparseColMatRef, SymbolicSparseColMatRef, Triplet};

use super::sparse::CsrMatrix;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LinearSolver {
    Direct,
    /// Jacobi-preconditioned BiCGStab with a relative tolerance.
    BiCgStab { tol: f64, max_iter: usize },
}

impl Default for LinearSolver {
    fn default() -> Self {
        LinearSolver::Direct
    }
}

/// One-shot sparse LU of a CSR matrix (used for projections and small
/// systems where no pattern reuse is worthwhile).
pub struct DirectFactor {
    lu: Lu<usize, f64>,
    n: usize,
}

impl DirectFactor {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        assert_eq!(a.nrows, a.ncols);
        let mut trips = Vec::with_capacity(a.nnz());
        for r in 0..a.nrows {
            for k in a.row_ptr[r]..a.row_ptr[r + 1] {
                trips.push(Triplet {
                    row: r,
                    col: a.col_idx[k],
                    val: a.vals[k],
                });
            }
        }
        let mat = SparseColMat::<usize, f64>::try_new_from_triplets(a.nrows, a.ncols, &trips)
            .map_err(|e| Error::LinearSolve(format!("building sparse matrix: {e:?}")))?;
        let lu = mat
            .sp_lu()
            .map_err(|e| Error::LinearSolve(format!("sparse LU: {e:?}")))?;
        Ok(DirectFactor { lu, n: a.nrows })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(rhs.len(), self.n);
        let b = faer::Mat::<f64>::from_fn(self.n, 1, |i, _| rhs[i]);
        let x = self.lu.solve(&b);
        (0..self.n).map(|i| x[(i, 0)]).collect()
    }
}

/// Sparse LU with reusable symbolic analysis over a fixed CSC pattern.
pub struct PatternFactor {
    symbolic: SymbolicLu<usize>,
    lu: Lu<usize, f64>,
}

impl PatternFactor {
    pub fn new(
        n: usize,
        col_ptr: &[usize],
        row_idx: &[usize],
        vals: &[f64],
    ) -> Result<(SymbolicLu<usize>, Self)> {
        let sym_mat = SymbolicSparseColMatRef::new_checked(n, n, col_ptr, None, row_idx);
        let symbolic = SymbolicLu::try_new(sym_mat)
            .map_err(|e| Error::LinearSolve(format!("symbolic LU: {e:?}")))?;
        let f = Self::refactor_with(symbolic.clone(), n, col_ptr, row_idx, vals)?;
        Ok((symbolic, f))
    }

    pub fn refactor_with(
        symbolic: SymbolicLu<usize>,
        n: usize,
        col_ptr: &[usize],
        row_idx: &[usize],
        vals: &[f64],
    ) -> Result<Self> {
        let sym_mat = SymbolicSparseColMatRef::new_checked(n, n, col_ptr, None, row_idx);
        let mat = SparseColMatRef::new(sym_mat, vals);
        let lu = Lu::try_new_with_symbolic(symbolic.clone(), mat)
            .map_err(|e| Error::LinearSolve(format!("numeric LU: {e:?}")))?;
        Ok(PatternFactor { symbolic, lu })
    }

    pub fn symbolic(&self) -> SymbolicLu<usize> {
        self.symbolic.clone()
    }

    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = rhs.len();
        let mut b = faer::Mat::<f64>::from_fn(n, 1, |i, _| rhs[i]);
        self.lu.solve_in_place(&mut b);
        for i in 0..n {
            rhs[i] = b[(i, 0)];
        }
    }
}

/// Jacobi-scaled BiCGStab on a CSR matrix. Returns Err on breakdown or when
/// the iteration budget is exhausted.
pub fn bicgstab(
    a: &CsrMatrix,
    rhs: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let n = a.nrows;
    let mut diag = vec![1.0; n];
    for i in 0..n {
        let d = a.get(i, i);
        if d.abs() > 1e-300 {
            diag[i] = d;
        }
    }
    let prec = |v: &[f64]| -> Vec<f64> { v.iter().zip(&diag).map(|(x, d)| x / d).collect() };

    let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    let mut r = rhs.to_vec();
    let ax = a.matvec(&x);
    for i in 0..n {
        r[i] -= ax[i];
    }
    let r0 = r.clone();
    let nrm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let b_norm = nrm(rhs).max(1e-300);
    if nrm(&r) / b_norm <= tol {
        return Ok(x);
    }
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();

    let mut rho = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    for _ in 0..max_iter {
        let rho_new = dot(&r0, &r);
        if rho_new.abs() < 1e-300 {
            return Err(Error::LinearSolve("bicgstab breakdown (rho)".into()));
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        let ph = prec(&p);
        v = a.matvec(&ph);
        alpha = rho / dot(&r0, &v);
        let mut s = r.clone();
        for i in 0..n {
            s[i] -= alpha * v[i];
        }
        if nrm(&s) / b_norm <= tol {
            for i in 0..n {
                x[i] += alpha * ph[i];
            }
            return Ok(x);
        }
        let sh = prec(&s);
        let t = a.matvec(&sh);
        let tt = dot(&t, &t);
        if tt.abs() < 1e-300 {
            return Err(Error::LinearSolve("bicgstab breakdown (t)".into()));
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * ph[i] + omega * sh[i];
            r[i] = s[i] - omega * t[i];
        }
        if nrm(&r) / b_norm <= tol {
            return Ok(x);
        }
    }
    Err(Error::LinearSolve(format!(
        "bicgstab did not reach tol {tol:.1e} in {max_iter} iterations"
    )))
}
