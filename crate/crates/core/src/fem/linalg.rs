//! Linear solvers for the assembled systems.
//!
//! The direct path is a sparse LU with partial pivoting (faer). The
//! iterative path is restarted GMRES right-preconditioned with ILU(0).

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseRowMatRef, SymbolicSparseRowMatRef};
use faer::Mat;

use super::sparse::{dot, norm2, CsrMatrix};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SolverKind {
    Direct,
    Gmres { restart: usize, max_iter: usize },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    pub kind: SolverKind,
    /// Required relative residual `|Ax - b| / |b|`.
    pub tolerance: f64,
}

impl SolverConfig {
    pub fn direct() -> Self {
        Self {
            kind: SolverKind::Direct,
            tolerance: 1e-12,
        }
    }

    pub fn gmres() -> Self {
        Self {
            kind: SolverKind::Gmres {
                restart: 60,
                max_iter: 5000,
            },
            tolerance: 1e-10,
        }
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self::direct()
    }
}

/// `|Ax - b|_2 / |b|_2`, or the absolute residual when `b = 0`.
pub fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    let r: Vec<f64> = ax.iter().zip(b).map(|(p, q)| p - q).collect();
    let nb = norm2(b);
    if nb > 0.0 {
        norm2(&r) / nb
    } else {
        norm2(&r)
    }
}

/// Solves `Ax = b` and returns the solution with its relative residual.
pub fn solve(a: &CsrMatrix, b: &[f64], config: &SolverConfig) -> Result<(Vec<f64>, f64)> {
    if b.len() != a.dim() {
        return Err(Error::InvalidArgument(format!(
            "right-hand side has length {} for a {}x{} system",
            b.len(),
            a.dim(),
            a.dim()
        )));
    }
    if b.iter().all(|&v| v == 0.0) {
        return Ok((vec![0.0; b.len()], 0.0));
    }
    let x = match config.kind {
        SolverKind::Direct => direct_solve(a, b, config.tolerance)?,
        SolverKind::Gmres { restart, max_iter } => gmres(a, b, config.tolerance, restart, max_iter)?,
    };
    let res = relative_residual(a, &x, b);
    if !res.is_finite() || res > config.tolerance {
        return Err(Error::LinearSolve(format!(
            "relative residual {res:e} exceeds tolerance {:e}",
            config.tolerance
        )));
    }
    Ok((x, res))
}

struct DirectLu {
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl DirectLu {
    fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.dim();
        let pattern = a.pattern();
        let symbolic = SymbolicSparseRowMatRef::new_checked(n, n, pattern.row_ptr(), None, pattern.col_idx());
        let mat = SparseRowMatRef::new(symbolic, a.values());
        let lu = mat
            .sp_lu()
            .map_err(|e| Error::LinearSolve(format!("sparse LU failed: {e:?}")))?;
        Ok(Self { lu })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut rhs = Mat::<f64>::from_fn(b.len(), 1, |i, _| b[i]);
        self.lu.solve_in_place(rhs.as_mut());
        (0..b.len()).map(|i| rhs[(i, 0)]).collect()
    }
}

fn direct_solve(a: &CsrMatrix, b: &[f64], tolerance: f64) -> Result<Vec<f64>> {
    let lu = DirectLu::factor(a)?;
    let mut x = lu.solve(b);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::LinearSolve("matrix is numerically singular".into()));
    }
    // A couple of refinement sweeps recover digits lost to pivot growth.
    for _ in 0..2 {
        if relative_residual(a, &x, b) <= 0.1 * tolerance {
            break;
        }
        let ax = a.mul_vec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
        let dx = lu.solve(&r);
        x.iter_mut().zip(&dx).for_each(|(xi, d)| *xi += d);
    }
    Ok(x)
}

/// Incomplete LU with zero fill on the matrix's own pattern.
struct Ilu0 {
    a: CsrMatrix,
    diag: Vec<usize>,
}

impl Ilu0 {
    fn new(a: &CsrMatrix) -> Result<Self> {
        let n = a.dim();
        let pattern = a.pattern().clone();
        let rp = pattern.row_ptr();
        let ci = pattern.col_idx();
        let mut diag = vec![0; n];
        for (i, d) in diag.iter_mut().enumerate() {
            *d = pattern
                .find(i, i)
                .ok_or_else(|| Error::LinearSolve(format!("ILU(0): missing diagonal in row {i}")))?;
        }
        let mut lu = a.clone();
        let vals = lu.values_mut();
        for i in 0..n {
            for kk in rp[i]..rp[i + 1] {
                let k = ci[kk];
                if k >= i {
                    break;
                }
                let pivot = vals[diag[k]];
                if pivot == 0.0 {
                    return Err(Error::LinearSolve(format!("ILU(0): zero pivot in row {k}")));
                }
                let factor = vals[kk] / pivot;
                vals[kk] = factor;
                for jj in kk + 1..rp[i + 1] {
                    let j = ci[jj];
                    if let Some(pos) = pattern.find(k, j) {
                        vals[jj] -= factor * vals[pos];
                    }
                }
            }
        }
        Ok(Self { a: lu, diag })
    }

    fn apply(&self, r: &[f64]) -> Vec<f64> {
        let n = r.len();
        let p = self.a.pattern();
        let (rp, ci, v) = (p.row_ptr(), p.col_idx(), self.a.values());
        let mut y = r.to_vec();
        for i in 0..n {
            for k in rp[i]..self.diag[i] {
                y[i] -= v[k] * y[ci[k]];
            }
        }
        for i in (0..n).rev() {
            for k in self.diag[i] + 1..rp[i + 1] {
                y[i] -= v[k] * y[ci[k]];
            }
            y[i] /= v[self.diag[i]];
        }
        y
    }
}

fn gmres(a: &CsrMatrix, b: &[f64], tol: f64, restart: usize, max_iter: usize) -> Result<Vec<f64>> {
    let n = b.len();
    let precond = Ilu0::new(a)?;
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    let mut iters = 0;
    let m = restart.max(1);
    while iters < max_iter {
        let ax = a.mul_vec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
        let beta = norm2(&r);
        if beta <= 0.5 * tol * bnorm {
            return Ok(x);
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut z_basis: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut h = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut used = 0;
        for j in 0..m {
            let z = precond.apply(&basis[j]);
            let mut w = a.mul_vec(&z);
            z_basis.push(z);
            for (i, v) in basis.iter().enumerate() {
                h[i][j] = dot(&w, v);
                w.iter_mut().zip(v).for_each(|(wk, vk)| *wk -= h[i][j] * vk);
            }
            h[j + 1][j] = norm2(&w);
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let denom = h[j][j].hypot(h[j + 1][j]);
            if denom == 0.0 {
                used = j;
                break;
            }
            cs[j] = h[j][j] / denom;
            sn[j] = h[j + 1][j] / denom;
            h[j][j] = denom;
            h[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            used = j + 1;
            iters += 1;
            if g[j + 1].abs() <= 0.5 * tol * bnorm || iters >= max_iter {
                break;
            }
            let hn = norm2(&w);
            basis.push(w.iter().map(|v| v / hn).collect());
        }
        let mut y = vec![0.0; used];
        for i in (0..used).rev() {
            let s: f64 = (i + 1..used).map(|k| h[i][k] * y[k]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        for (yi, z) in y.iter().zip(&z_basis) {
            x.iter_mut().zip(z).for_each(|(xk, zk)| *xk += yi * zk);
        }
        if used == 0 {
            break;
        }
    }
    if relative_residual(a, &x, b) <= tol {
        Ok(x)
    } else {
        Err(Error::LinearSolve(format!(
            "GMRES did not reach tolerance {tol:e} in {max_iter} iterations"
        )))
    }
}
