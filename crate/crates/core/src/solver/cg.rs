//! Jacobi-preconditioned conjugate gradient for the SPD tumor system.

use crate::error::{check_len, Error, Result};
use crate::mesh::SparseSymmetricMatrix;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgStats {
    pub iterations: usize,
    /// Final `||b - Ax|| / ||b||` (0 when `b = 0`).
    pub relative_residual: f64,
}

/// Scratch vectors reused across solves of the same dimension.
#[derive(Clone, Debug, Default)]
pub struct CgWorkspace {
    r: Vec<f64>,
    z: Vec<f64>,
    p: Vec<f64>,
    ap: Vec<f64>,
    inv_diag: Vec<f64>,
    b: Vec<f64>,
}

impl CgWorkspace {
    fn resize(&mut self, n: usize) {
        for v in [
            &mut self.r,
            &mut self.z,
            &mut self.p,
            &mut self.ap,
            &mut self.inv_diag,
            &mut self.b,
        ] {
            v.clear();
            v.resize(n, 0.0);
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solve `A x = b` for symmetric positive definite `A`, starting from zero.
pub fn solve_spd(
    matrix: &SparseSymmetricMatrix,
    rhs: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let mut x = vec![0.0; rhs.len()];
    solve_spd_into(
        matrix,
        rhs,
        &mut x,
        tol,
        max_iter,
        &mut CgWorkspace::default(),
    )?;
    Ok(x)
}

/// Solve in place, using the incoming `x` as the initial guess.
///
/// The system is rescaled by a power of two so that `max |b|` is of order one;
/// this is exact and keeps nearly-extinct fields out of the subnormal range,
/// where the inner products underflow and CG breaks down.
///
/// On non-convergence the error carries `step: 0`; callers that know the
/// time step index rewrite it.
pub fn solve_spd_into(
    matrix: &SparseSymmetricMatrix,
    rhs: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
    ws: &mut CgWorkspace,
) -> Result<CgStats> {
    let n = matrix.dim();
    check_len(n, rhs.len())?;
    check_len(n, x.len())?;
    ws.resize(n);

    let b_max = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if b_max == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgStats {
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let scale = (-b_max.log2().floor()).clamp(-1000.0, 1000.0).exp2();
    for (bs, b) in ws.b.iter_mut().zip(rhs) {
        *bs = scale * b;
    }
    x.iter_mut().for_each(|v| *v *= scale);
    let stats = pcg(matrix, x, tol, max_iter, ws);
    let unscale = 1.0 / scale;
    x.iter_mut().for_each(|v| *v *= unscale);
    stats
}

// index loops update several same-length vectors in lockstep
#[allow(clippy::needless_range_loop)]
fn pcg(
    matrix: &SparseSymmetricMatrix,
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
    ws: &mut CgWorkspace,
) -> Result<CgStats> {
    let n = matrix.dim();
    let rhs = &ws.b;
    let b_norm = dot(rhs, rhs).sqrt();

    for (inv, d) in ws.inv_diag.iter_mut().zip(matrix.diagonal()) {
        *inv = if d > 0.0 { 1.0 / d } else { 1.0 };
    }

    matrix.mul_vec_into(x, &mut ws.ap);
    for i in 0..n {
        ws.r[i] = rhs[i] - ws.ap[i];
        ws.z[i] = ws.inv_diag[i] * ws.r[i];
    }
    ws.p.copy_from_slice(&ws.z);
    let mut rz = dot(&ws.r, &ws.z);
    let mut res = dot(&ws.r, &ws.r).sqrt() / b_norm;

    let mut iterations = 0;
    while res > tol {
        if iterations == max_iter {
            return Err(Error::SolverFailure {
                step: 0,
                iterations,
                residual: res,
            });
        }
        matrix.mul_vec_into(&ws.p, &mut ws.ap);
        let pap = dot(&ws.p, &ws.ap);
        if !(pap > 0.0) {
            return Err(Error::SolverFailure {
                step: 0,
                iterations,
                residual: res,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * ws.p[i];
            ws.r[i] -= alpha * ws.ap[i];
            ws.z[i] = ws.inv_diag[i] * ws.r[i];
        }
        let rz_next = dot(&ws.r, &ws.z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            ws.p[i] = ws.z[i] + beta * ws.p[i];
        }
        res = dot(&ws.r, &ws.r).sqrt() / b_norm;
        iterations += 1;
    }

    Ok(CgStats {
        iterations,
        relative_residual: res,
    })
}
