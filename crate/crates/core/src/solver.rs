//! Dense local solves and a restarted GMRES iteration for the global sparse
//! system.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("matrix singular (zero pivot)")]
    Singular,
    #[error("dimension mismatch: matrix {n}x{n}, rhs {rhs}")]
    DimensionMismatch { n: usize, rhs: usize },
    #[error("gmres stagnated at relative residual {residual:.3e} after {iterations} iterations")]
    Stagnated { residual: f64, iterations: usize },
    #[error("gmres hit the outer-cycle limit at relative residual {residual:.3e} after {iterations} iterations")]
    MaxOuterExceeded { residual: f64, iterations: usize },
}

/// Solve `A x = b` by LU with partial pivoting; returns the solution and the
/// verified relative residual.
pub fn dense_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<(DVector<f64>, f64), SolverError> {
    let n = a.nrows();
    if b.len() != n {
        return Err(SolverError::DimensionMismatch { n, rhs: b.len() });
    }
    let x = a.clone().lu().solve(b).ok_or(SolverError::Singular)?;
    let bnorm = b.norm();
    let residual = if bnorm > 0.0 {
        (a * &x - b).norm() / bnorm
    } else {
        (a * &x).norm()
    };
    Ok((x, residual))
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone)]
pub struct Csr {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl Csr {
    /// Build from (row, col, value) triplets; duplicate positions are summed.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(r, c, v) in triplets {
            assert!(r < n && c < n, "triplet ({r}, {c}) out of range");
            rows[r].push((c, v));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in &mut rows {
            row.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for &(c, v) in row.iter() {
                if last == Some(c) {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Csr {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_nnz(&self, r: usize) -> usize {
        self.row_ptr[r + 1] - self.row_ptr[r]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let lo = self.row_ptr[r];
        let hi = self.row_ptr[r + 1];
        match self.col_idx[lo..hi].binary_search(&c) {
            Ok(k) => self.values[lo + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(self.n);
        for r in 0..self.n {
            let mut s = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            y[r] = s;
        }
        y
    }

    pub fn diagonal(&self) -> DVector<f64> {
        DVector::from_iterator(self.n, (0..self.n).map(|r| self.get(r, r)))
    }

    /// Dense copy (test-sized systems only).
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.col_idx[k])] = self.values[k];
            }
        }
        m
    }
}

/// Convergence report of an iterative solve.
#[derive(Debug, Clone, Copy)]
pub struct SolveReport {
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

pub const GMRES_DEFAULT_RESTART: usize = 30;
pub const GMRES_DEFAULT_TOL: f64 = 1e-10;
pub const GMRES_DEFAULT_MAX_OUTER: usize = 200;
/// Larger restart used as a second attempt when the short cycle stagnates.
pub const GMRES_FALLBACK_RESTART: usize = 150;

/// Restarted GMRES with Jacobi right preconditioning.
///
/// Failure modes are distinct: [`SolverError::Stagnated`] when an outer cycle
/// improves the residual by less than a factor 1e-3 relative, and
/// [`SolverError::MaxOuterExceeded`] when the cycle budget runs out.
pub fn gmres_restarted(
    a: &Csr,
    b: &DVector<f64>,
    restart: usize,
    tol: f64,
    max_outer: usize,
) -> Result<(DVector<f64>, SolveReport), SolverError> {
    let n = a.n();
    if b.len() != n {
        return Err(SolverError::DimensionMismatch { n, rhs: b.len() });
    }
    let restart = restart.max(1);
    // right preconditioner M = diag(A): iterate on A M^-1 y = b, x = M^-1 y
    let mut inv_diag = a.diagonal();
    for v in inv_diag.iter_mut() {
        *v = if v.abs() > 0.0 { 1.0 / *v } else { 1.0 };
    }
    let precond = |v: &DVector<f64>| v.component_mul(&inv_diag);
    let bnorm = b.norm();
    if bnorm == 0.0 {
        return Ok((
            DVector::zeros(n),
            SolveReport {
                iterations: 0,
                residual: 0.0,
                converged: true,
            },
        ));
    }

    let mut x = DVector::zeros(n);
    let mut total_iters = 0usize;
    let mut residual = 1.0;
    for _outer in 0..max_outer {
        let r0 = b - a.matvec(&x);
        let beta = r0.norm();
        residual = beta / bnorm;
        if residual <= tol {
            return Ok((
                x,
                SolveReport {
                    iterations: total_iters,
                    residual,
                    converged: true,
                },
            ));
        }
        let cycle_start = residual;

        // Arnoldi with Givens-rotation QR of the Hessenberg matrix
        let mut v: Vec<DVector<f64>> = vec![r0 / beta];
        let mut h = DMatrix::zeros(restart + 1, restart);
        let mut cs = vec![0.0f64; restart];
        let mut sn = vec![0.0f64; restart];
        let mut g = DVector::zeros(restart + 1);
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..restart {
            let mut w = a.matvec(&precond(&v[k]));
            for i in 0..=k {
                h[(i, k)] = w.dot(&v[i]);
                w -= h[(i, k)] * &v[i];
            }
            let wnorm = w.norm();
            h[(k + 1, k)] = wnorm;
            // apply previous rotations to the new column
            for i in 0..k {
                let t = cs[i] * h[(i, k)] + sn[i] * h[(i + 1, k)];
                h[(i + 1, k)] = -sn[i] * h[(i, k)] + cs[i] * h[(i + 1, k)];
                h[(i, k)] = t;
            }
            // new rotation annihilating the subdiagonal entry
            let (c, s) = {
                let (p, q) = (h[(k, k)], h[(k + 1, k)]);
                let r = p.hypot(q);
                if r == 0.0 {
                    (1.0, 0.0)
                } else {
                    (p / r, q / r)
                }
            };
            cs[k] = c;
            sn[k] = s;
            h[(k, k)] = c * h[(k, k)] + s * h[(k + 1, k)];
            h[(k + 1, k)] = 0.0;
            g[k + 1] = -s * g[k];
            g[k] *= c;
            k_used = k + 1;
            total_iters += 1;
            residual = g[k + 1].abs() / bnorm;
            if residual <= tol || wnorm == 0.0 {
                break; // converged or lucky breakdown
            }
            if k + 1 < restart {
                v.push(w / wnorm);
            }
        }
        // back-substitution for the cycle update
        let mut y = DVector::zeros(k_used);
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= h[(i, j)] * y[j];
            }
            y[i] = s / h[(i, i)];
        }
        let mut update = DVector::zeros(n);
        for i in 0..k_used {
            update += y[i] * &v[i];
        }
        x += precond(&update);

        let true_res = (b - a.matvec(&x)).norm() / bnorm;
        residual = true_res;
        if residual <= tol {
            return Ok((
                x,
                SolveReport {
                    iterations: total_iters,
                    residual,
                    converged: true,
                },
            ));
        }
        if residual > cycle_start * (1.0 - 1e-3) {
            return Err(SolverError::Stagnated {
                residual,
                iterations: total_iters,
            });
        }
    }
    Err(SolverError::MaxOuterExceeded {
        residual,
        iterations: total_iters,
    })
}
