use rayon::prelude::*;

use super::system::{det_dot, SparseSystem};
use crate::error::{contract, Result};

/// Result of a PCG solve. A solve that hits `maxit` is reported with
/// `converged == false` rather than as an error.
#[derive(Debug, Clone, PartialEq)]
pub struct PcgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Final `‖Ax − b‖₂ / ‖b‖₂` (0 when `b = 0`).
    pub relative_residual: f64,
}

/// Euclidean norm. The plain sum of squares is used unless it underflows,
/// in which case the vector is rescaled by its largest magnitude first.
fn norm2(v: &[f64]) -> f64 {
    let sq = det_dot(v, v);
    if sq >= f64::MIN_POSITIVE {
        return sq.sqrt();
    }
    let m = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if m == 0.0 {
        return 0.0;
    }
    let scaled: Vec<f64> = v.iter().map(|x| x / m).collect();
    m * det_dot(&scaled, &scaled).sqrt()
}

/// Jacobi-preconditioned conjugate gradients, warm-started at `x0`. Stops
/// once `‖Ax − b‖₂ <= tol · ‖b‖₂`. Decoupled unknowns (all-zero rows) keep
/// their value from `x0`.
pub fn pcg_solve(sys: &SparseSystem, x0: &[f64], tol: f64, maxit: usize) -> Result<PcgOutcome> {
    let n = sys.n();
    if x0.len() != n {
        return contract(format!("initial vector has {} entries, system {n}", x0.len()));
    }
    sys.check_solvable()?;
    let b = sys.rhs();
    let diag = sys.diag();
    let b_norm = norm2(b);
    let keep = |i: usize, v: f64| if diag[i] == 0.0 { x0[i] } else { v };
    if b_norm == 0.0 {
        return Ok(PcgOutcome {
            x: (0..n).map(|i| keep(i, 0.0)).collect(),
            iterations: 0,
            converged: true,
            relative_residual: 0.0,
        });
    }
    if sys.is_diagonal() {
        let x: Vec<f64> = (0..n).map(|i| keep(i, b[i] / diag[i])).collect();
        return Ok(PcgOutcome {
            x,
            iterations: 1,
            converged: true,
            relative_residual: 0.0,
        });
    }

    let mut x = x0.to_vec();
    let mut q = vec![0.0; n];
    sys.apply(&x, &mut q);
    let mut r: Vec<f64> = b.iter().zip(&q).map(|(bi, qi)| bi - qi).collect();
    let mut r_norm = norm2(&r);
    if r_norm <= tol * b_norm {
        return Ok(PcgOutcome {
            x,
            iterations: 0,
            converged: true,
            relative_residual: r_norm / b_norm,
        });
    }
    // CG is scale invariant: run the recurrence on r / 2^k with 2^k ≈ ‖r‖ so
    // tiny right-hand sides (weights near underflow) do not drive the inner
    // products into subnormals. Power-of-two scaling is exact.
    let k = r_norm.log2().floor() as i32;
    let (scale, inv) = (2f64.powi(k), 2f64.powi(-k));
    r.par_iter_mut().for_each(|ri| *ri *= inv);
    let b_norm_scaled = b_norm * inv;
    let threshold = tol * b_norm_scaled;
    r_norm *= inv;
    let precond = |ri: f64, di: f64| if di == 0.0 { 0.0 } else { ri / di };
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(&ri, &di)| precond(ri, di)).collect();
    let mut p = z.clone();
    let mut rz = det_dot(&r, &z);

    for it in 1..=maxit {
        sys.apply(&p, &mut q);
        let pq = det_dot(&p, &q);
        if !(pq > 0.0) {
            return contract("system is not positive definite");
        }
        let step = rz / pq;
        x.par_iter_mut()
            .zip(&p)
            .for_each(|(xi, pi)| *xi += step * (scale * pi));
        r.par_iter_mut()
            .zip(&q)
            .for_each(|(ri, qi)| *ri -= step * qi);
        r_norm = det_dot(&r, &r).sqrt();
        if r_norm <= threshold {
            return Ok(PcgOutcome {
                x,
                iterations: it,
                converged: true,
                relative_residual: r_norm / b_norm_scaled,
            });
        }
        z.par_iter_mut()
            .zip(&r)
            .zip(diag)
            .for_each(|((zi, &ri), &di)| *zi = precond(ri, di));
        let rz_next = det_dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        p.par_iter_mut()
            .zip(&z)
            .for_each(|(pi, zi)| *pi = zi + beta * *pi);
    }
    Ok(PcgOutcome {
        x,
        iterations: maxit,
        converged: false,
        relative_residual: r_norm / b_norm_scaled,
    })
}
