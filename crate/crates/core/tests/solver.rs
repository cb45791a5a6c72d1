mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rgif::solver::{half_window, pcg_solve, SparseSystem};

/// Random diagonally dominant stencil system with O(1) right-hand side.
fn random_system(seed: u64, w: usize, h: usize) -> SparseSystem {
    let mut rng = rng(seed);
    let offsets = half_window(1);
    let n = w * h;
    let mut planes = vec![vec![0.0; n]; offsets.len()];
    for (k, &(dr, dc)) in offsets.iter().enumerate() {
        for i in 0..n {
            let (r, c) = ((i / w) as isize + dr, (i % w) as isize + dc);
            if r >= 0 && c >= 0 && (r as usize) < h && (c as usize) < w {
                planes[k][i] = -rng.gen_range(0.0..1.0);
            }
        }
    }
    let zero = SparseSystem::from_stencil(w, h, vec![0.0; n], offsets.clone(), planes.clone(), vec![0.0; n]).unwrap();
    let diag: Vec<f64> = zero
        .offdiag_abs_sums()
        .iter()
        .map(|s| s + rng.gen_range(0.01..0.5))
        .collect();
    let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    SparseSystem::from_stencil(w, h, diag, offsets, planes, rhs).unwrap()
}

#[test]
fn pcg_matches_dense_cholesky() {
    let sys = random_system(11, 50, 50);
    sys.check_invariants().unwrap();
    let n = sys.n();
    let dense = sys.to_dense();
    let a = DMatrix::from_fn(n, n, |i, j| dense[i][j]);
    let exact = a.cholesky().unwrap().solve(&DVector::from_column_slice(sys.rhs()));
    let out = pcg_solve(&sys, &vec![0.0; n], 1e-10, 5000).unwrap();
    assert!(out.converged);
    assert!(out.relative_residual <= 1e-10);
    assert!(max_abs_diff(&out.x, exact.as_slice()) < 1e-8);
}

#[test]
fn pcg_is_scale_invariant_near_underflow() {
    let sys = random_system(12, 12, 9);
    let tiny = 2f64.powi(-700);
    let scaled = SparseSystem::from_stencil(
        sys.width(),
        sys.height(),
        sys.diag().to_vec(),
        sys.offsets().to_vec(),
        sys.planes().to_vec(),
        sys.rhs().iter().map(|b| b * tiny).collect(),
    )
    .unwrap();
    let n = sys.n();
    let a = pcg_solve(&sys, &vec![0.0; n], 1e-12, 1000).unwrap();
    let b = pcg_solve(&scaled, &vec![0.0; n], 1e-12, 1000).unwrap();
    assert_eq!(a.iterations, b.iterations);
    for (x, y) in a.x.iter().zip(&b.x) {
        assert_eq!(*x * tiny, *y);
    }
}

#[test]
fn warm_start_at_solution_needs_no_iterations() {
    let sys = random_system(13, 10, 10);
    let n = sys.n();
    let first = pcg_solve(&sys, &vec![0.0; n], 1e-14, 1000).unwrap();
    let again = pcg_solve(&sys, &first.x, 1e-10, 1000).unwrap();
    assert_eq!(again.iterations, 0);
    assert_eq!(again.x, first.x);
}
