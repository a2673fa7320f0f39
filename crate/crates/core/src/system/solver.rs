//! Linear solvers: Jacobi-preconditioned CG and BiCGStab, a dense
//! factorization fallback for small systems, and a reverse Cuthill-McKee
//! envelope Cholesky for matrices that are factored once and solved many
//! times (the constant Poisson block of the time loop).

use super::sparse::{dot, norm, CsrMatrix};
use crate::{Error, Result};
use nalgebra::DVector;

/// Systems at or below this size go straight to dense factorization.
pub const DENSE_FALLBACK_LIMIT: usize = 2000;

/// Iteration count and final relative residual of an accepted solve.
#[derive(Debug, Clone, Copy)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

/// Application of an approximate inverse, used inside the Krylov solvers.
pub trait Preconditioner {
    fn apply_to(&self, r: &[f64], out: &mut [f64]);
}

/// Diagonal (Jacobi) preconditioner.
pub struct Jacobi {
    inv_diag: Vec<f64>,
}

impl Jacobi {
    pub fn of(a: &CsrMatrix) -> Self {
        Self {
            inv_diag: a
                .diagonal()
                .iter()
                .map(|&d| if d.abs() > 0.0 { 1.0 / d } else { 1.0 })
                .collect(),
        }
    }
}

impl Preconditioner for Jacobi {
    fn apply_to(&self, r: &[f64], out: &mut [f64]) {
        for ((o, ri), di) in out.iter_mut().zip(r).zip(&self.inv_diag) {
            *o = ri * di;
        }
    }
}

fn residual_norm(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.mul(x);
    let mut acc = 0.0;
    for (axi, bi) in ax.iter().zip(b) {
        acc += (axi - bi) * (axi - bi);
    }
    acc.sqrt()
}

/// Direct dense solve with a residual check.
pub fn dense_solve(a: &CsrMatrix, b: &[f64], tol: f64) -> Result<(Vec<f64>, SolveStats)> {
    let ad = a.to_dense();
    let bd = DVector::from_column_slice(b);
    let x = ad
        .lu()
        .solve(&bd)
        .ok_or(Error::SolverFailure {
            iterations: 0,
            residual: f64::INFINITY,
        })?
        .as_slice()
        .to_vec();
    let b_norm = norm(b).max(f64::MIN_POSITIVE);
    let res = residual_norm(a, &x, b) / b_norm;
    if res > tol.max(1e-10) {
        return Err(Error::SolverFailure {
            iterations: 0,
            residual: res,
        });
    }
    Ok((x, SolveStats {
        iterations: 0,
        residual: res,
    }))
}

/// Conjugate gradients with Jacobi preconditioning; `x0` is the warm start.
pub fn conjugate_gradient(
    a: &CsrMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveStats)> {
    let n = a.n_rows;
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok((vec![0.0; n], SolveStats {
            iterations: 0,
            residual: 0.0,
        }));
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d.abs() > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut r = {
        let ax = a.mul(&x);
        b.iter().zip(ax).map(|(bi, axi)| bi - axi).collect::<Vec<_>>()
    };
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut r_norm = norm(&r);
    let mut q = vec![0.0; n];
    for it in 0..max_iter {
        if r_norm <= tol * b_norm {
            return Ok((x, SolveStats {
                iterations: it,
                residual: r_norm / b_norm,
            }));
        }
        a.mul_into(&p, &mut q);
        let pq = dot(&p, &q);
        if pq <= 0.0 {
            return Err(Error::SolverFailure {
                iterations: it,
                residual: r_norm / b_norm,
            });
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        r_norm = norm(&r);
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    if r_norm <= tol * b_norm {
        return Ok((x, SolveStats {
            iterations: max_iter,
            residual: r_norm / b_norm,
        }));
    }
    Err(Error::SolverFailure {
        iterations: max_iter,
        residual: r_norm / b_norm,
    })
}

/// BiCGStab with Jacobi preconditioning; `x0` is the warm start.
pub fn bicgstab(
    a: &CsrMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveStats)> {
    bicgstab_prec(a, b, x0, tol, max_iter, &Jacobi::of(a))
}

/// BiCGStab with a caller-supplied preconditioner.
pub fn bicgstab_prec(
    a: &CsrMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
    precond: &dyn Preconditioner,
) -> Result<(Vec<f64>, SolveStats)> {
    let n = a.n_rows;
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok((vec![0.0; n], SolveStats {
            iterations: 0,
            residual: 0.0,
        }));
    }
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut r: Vec<f64> = {
        let ax = a.mul(&x);
        b.iter().zip(ax).map(|(bi, axi)| bi - axi).collect()
    };
    let r_hat = r.clone();
    let mut rho = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut p_hat = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut s_hat = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut r_norm = norm(&r);
    for it in 0..max_iter {
        if r_norm <= tol * b_norm {
            return Ok((x, SolveStats {
                iterations: it,
                residual: r_norm / b_norm,
            }));
        }
        let rho_new = dot(&r_hat, &r);
        if rho_new.abs() < 1e-300 {
            return Err(Error::SolverFailure {
                iterations: it,
                residual: r_norm / b_norm,
            });
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        precond.apply_to(&p, &mut p_hat);
        a.mul_into(&p_hat, &mut v);
        let rhv = dot(&r_hat, &v);
        if rhv.abs() < 1e-300 {
            return Err(Error::SolverFailure {
                iterations: it,
                residual: r_norm / b_norm,
            });
        }
        alpha = rho / rhv;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm(&s) <= tol * b_norm {
            for i in 0..n {
                x[i] += alpha * p_hat[i];
            }
            let res = residual_norm(a, &x, b) / b_norm;
            return Ok((x, SolveStats {
                iterations: it + 1,
                residual: res,
            }));
        }
        precond.apply_to(&s, &mut s_hat);
        a.mul_into(&s_hat, &mut t);
        let tt = dot(&t, &t);
        if tt == 0.0 {
            return Err(Error::SolverFailure {
                iterations: it,
                residual: r_norm / b_norm,
            });
        }
        omega = dot(&t, &s) / tt;
        if omega.abs() < 1e-300 {
            return Err(Error::SolverFailure {
                iterations: it,
                residual: r_norm / b_norm,
            });
        }
        for i in 0..n {
            x[i] += alpha * p_hat[i] + omega * s_hat[i];
            r[i] = s[i] - omega * t[i];
        }
        r_norm = norm(&r);
    }
    if r_norm <= tol * b_norm {
        return Ok((x, SolveStats {
            iterations: max_iter,
            residual: r_norm / b_norm,
        }));
    }
    Err(Error::SolverFailure {
        iterations: max_iter,
        residual: r_norm / b_norm,
    })
}

/// One-shot solve: dense factorization for small systems, otherwise CG for
/// symmetric matrices and BiCGStab for nonsymmetric ones, both capped at
/// 10 n iterations. The accepted solution always satisfies the relative
/// residual tolerance.
pub fn solve_linear(a: &CsrMatrix, b: &[f64], symmetric: bool, tol: f64) -> Result<Vec<f64>> {
    assert_eq!(a.n_rows, a.n_cols);
    let n = a.n_rows;
    if n == 0 {
        return Ok(Vec::new());
    }
    if n <= DENSE_FALLBACK_LIMIT {
        return dense_solve(a, b, tol).map(|(x, _)| x);
    }
    let max_iter = 10 * n;
    let result = if symmetric {
        conjugate_gradient(a, b, None, tol, max_iter)
    } else {
        bicgstab(a, b, None, tol, max_iter)
    };
    result.map(|(x, _)| x)
}

/// Reverse Cuthill-McKee ordering of a symmetric sparsity pattern.
fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.n_rows;
    let degree = |i: usize| a.row_ptr[i + 1] - a.row_ptr[i];
    let mut order = Vec::with_capacity(n);
    let mut visited = vec![false; n];
    let mut starts: Vec<usize> = (0..n).collect();
    starts.sort_by_key(|&i| degree(i));
    for &start in &starts {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        let mut queue = std::collections::VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            order.push(i);
            let mut nbrs: Vec<usize> = (a.row_ptr[i]..a.row_ptr[i + 1])
                .map(|idx| a.cols[idx])
                .filter(|&j| !visited[j])
                .collect();
            nbrs.sort_by_key(|&j| degree(j));
            for j in nbrs {
                if !visited[j] {
                    visited[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    order.reverse();
    order
}

/// Envelope LDL^T factorization of a symmetric positive definite matrix,
/// stored row by row from the first nonzero of each (permuted) row.
#[derive(Debug, Clone)]
pub struct EnvelopeLdl {
    /// perm[new] = old index.
    perm: Vec<usize>,
    first: Vec<usize>,
    rows: Vec<Vec<f64>>,
    diag: Vec<f64>,
}

impl EnvelopeLdl {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        assert_eq!(a.n_rows, a.n_cols);
        let n = a.n_rows;
        let perm = reverse_cuthill_mckee(a);
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }

        // Envelope extents in the permuted numbering.
        let mut first: Vec<usize> = (0..n).collect();
        for old_r in 0..n {
            let nr = inv[old_r];
            for idx in a.row_ptr[old_r]..a.row_ptr[old_r + 1] {
                let nc = inv[a.cols[idx]];
                if nc < nr {
                    first[nr] = first[nr].min(nc);
                } else if nr < nc {
                    first[nc] = first[nc].min(nr);
                }
            }
        }

        let mut rows: Vec<Vec<f64>> = (0..n).map(|i| vec![0.0; i - first[i]]).collect();
        let mut diag = vec![0.0; n];
        for old_r in 0..n {
            let nr = inv[old_r];
            for idx in a.row_ptr[old_r]..a.row_ptr[old_r + 1] {
                let nc = inv[a.cols[idx]];
                let v = a.vals[idx];
                if nc < nr {
                    rows[nr][nc - first[nr]] = v;
                } else if nc == nr {
                    diag[nr] = v;
                }
            }
        }

        // In-place LDL^T inside the envelope.
        for i in 0..n {
            let fi = first[i];
            for j in fi..i {
                let fj = first[j];
                let lo = fi.max(fj);
                let mut sum = rows[i][j - fi];
                for m in lo..j {
                    sum -= rows[i][m - fi] * diag[m] * rows[j][m - fj];
                }
                rows[i][j - fi] = sum / diag[j];
            }
            let mut d = diag[i];
            for m in fi..i {
                let l = rows[i][m - fi];
                d -= l * l * diag[m];
            }
            if !(d > 0.0) {
                return Err(Error::SolverFailure {
                    iterations: i,
                    residual: d,
                });
            }
            diag[i] = d;
        }

        Ok(Self {
            perm,
            first,
            rows,
            diag,
        })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.diag.len();
        let mut y: Vec<f64> = (0..n).map(|i| b[self.perm[i]]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let mut acc = y[i];
            for m in fi..i {
                acc -= self.rows[i][m - fi] * y[m];
            }
            y[i] = acc;
        }
        for i in 0..n {
            y[i] /= self.diag[i];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let yi = y[i];
            for m in fi..i {
                y[m] -= self.rows[i][m - fi] * yi;
            }
        }
        let mut x = vec![0.0; n];
        for i in 0..n {
            x[self.perm[i]] = y[i];
        }
        x
    }
}

impl Preconditioner for EnvelopeLdl {
    fn apply_to(&self, r: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.solve(r));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// 1D Laplacian plus identity, SPD and well conditioned.
    fn laplacian_1d(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 3.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, t)
    }

    #[test]
    fn identity_solve_returns_rhs() {
        let a = CsrMatrix::identity(5);
        let b = vec![1.0, -2.0, 3.0, 0.5, 0.0];
        let x = solve_linear(&a, &b, true, 1e-12).unwrap();
        for (xi, bi) in x.iter().zip(&b) {
            assert_relative_eq!(xi, bi);
        }
    }

    #[test]
    fn cg_and_bicgstab_agree_with_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 80;
        let a = laplacian_1d(n);
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (x_dense, _) = dense_solve(&a, &b, 1e-12).unwrap();
        let (x_cg, _) = conjugate_gradient(&a, &b, None, 1e-13, 10 * n).unwrap();
        let (x_bi, _) = bicgstab(&a, &b, None, 1e-13, 10 * n).unwrap();
        for i in 0..n {
            assert_relative_eq!(x_cg[i], x_dense[i], epsilon = 1e-9);
            assert_relative_eq!(x_bi[i], x_dense[i], epsilon = 1e-9);
        }
    }

    #[test]
    fn bicgstab_handles_nonsymmetric() {
        let n = 60;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 4.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.5));
                t.push((i + 1, i, -0.5));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, t);
        let b = vec![1.0; n];
        let (x, stats) = bicgstab(&a, &b, None, 1e-12, 10 * n).unwrap();
        assert!(stats.residual <= 1e-12);
        let r = a.mul(&x);
        for (ri, bi) in r.iter().zip(&b) {
            assert_relative_eq!(ri, bi, epsilon = 1e-9);
        }
    }

    #[test]
    fn envelope_ldl_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 50;
        let a = laplacian_1d(n);
        let ldl = EnvelopeLdl::new(&a).unwrap();
        for _ in 0..3 {
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let x = ldl.solve(&b);
            let (x_dense, _) = dense_solve(&a, &b, 1e-12).unwrap();
            for i in 0..n {
                assert_relative_eq!(x[i], x_dense[i], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn warm_start_reduces_iterations() {
        let n = 200;
        let a = laplacian_1d(n);
        let b = vec![1.0; n];
        let (x, cold) = conjugate_gradient(&a, &b, None, 1e-12, 10 * n).unwrap();
        let (_, warm) = conjugate_gradient(&a, &b, Some(&x), 1e-12, 10 * n).unwrap();
        assert!(warm.iterations <= 1);
        assert!(cold.iterations > warm.iterations);
    }
}
