//! Brute-force references used to validate the sparse solver: direct energy
//! evaluation by double summation, dense assembly of the reweighted system,
//! and a direct weighted-least-squares solve.
//!
//! Everything here is single-threaded, dense and deliberately naive. The
//! dense system is built by scattering each quadratic term of the
//! reweighted objective into a full matrix, which is a different route from
//! the row-gather stencil assembly in [`crate::solver`].

use nalgebra::{DMatrix, DVector};

use crate::error::{contract, Result};
use crate::image::Image;
use crate::kernels::{guidance_weight, phi, phi_prime, spatial_weight};
use crate::params::FilterParams;
use crate::solver::Scales;

/// Largest system the dense path accepts.
pub const MAX_DENSE_UNKNOWNS: usize = 4096;

#[derive(Debug, Clone)]
pub struct DenseSystem {
    pub n: usize,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl DenseSystem {
    fn zeros(n: usize) -> Result<Self> {
        if n > MAX_DENSE_UNKNOWNS {
            return contract(format!(
                "dense oracle limited to {MAX_DENSE_UNKNOWNS} unknowns, got {n}"
            ));
        }
        Ok(Self {
            n,
            a: DMatrix::zeros(n, n),
            b: DVector::zeros(n),
        })
    }

    /// Adds `weight · (x_a − x_b)²` to the objective's half-gradient system.
    fn add_pair(&mut self, a: usize, b: usize, weight: f64) {
        self.a[(a, a)] += weight;
        self.a[(b, b)] += weight;
        self.a[(a, b)] -= weight;
        self.a[(b, a)] -= weight;
    }

    /// Adds `weight · (x_a − value)²`.
    fn add_anchor(&mut self, a: usize, value: f64, weight: f64) {
        self.a[(a, a)] += weight;
        self.b[a] += weight * value;
    }

    /// Solves by Cholesky factorization.
    pub fn solve(&self) -> Result<Vec<f64>> {
        let chol = self
            .a
            .clone()
            .cholesky()
            .ok_or_else(|| crate::Error::Contract("dense system is not SPD".into()))?;
        Ok(chol.solve(&self.b).iter().copied().collect())
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in 0..i {
                worst = worst.max((self.a[(i, j)] - self.a[(j, i)]).abs());
            }
        }
        worst
    }
}

fn window(r: usize) -> impl Iterator<Item = (isize, isize)> {
    let r = r as isize;
    (-r..=r).flat_map(move |di| (-r..=r).map(move |dj| (di, dj)))
}

fn inside(img: &Image, row: usize, col: usize, off: (isize, isize)) -> Option<(usize, usize)> {
    let r = row as isize + off.0;
    let c = col as isize + off.1;
    if r < 0 || c < 0 || r >= img.height() as isize || c >= img.width() as isize {
        None
    } else {
        Some((r as usize, c as usize))
    }
}

fn data_omega(p: &FilterParams, off: (isize, isize)) -> f64 {
    if p.r_d == 0 {
        1.0
    } else {
        spatial_weight(off.0, off.1, p.sigma_d)
    }
}

fn check_dims(img: &Image, target: &Image, guide: &Image) -> Result<()> {
    if img.channels() != 1 || !img.same_dims(target) || !img.same_spatial_dims(guide) {
        return contract("oracle expects matching single-channel image and target");
    }
    Ok(())
}

/// Robust energy by direct double summation over clipped windows.
pub fn energy(
    img: &Image,
    target: &Image,
    guide: &Image,
    p: &FilterParams,
    scales: Scales<'_>,
) -> Result<f64> {
    check_dims(img, target, guide)?;
    let w = img.width();
    let mut data_term = 0.0;
    let mut smooth_term = 0.0;
    for row in 0..img.height() {
        for col in 0..w {
            let i = row * w + col;
            let xi = img.at(row, col, 0);
            for off in window(p.r_d) {
                if let Some((r, c)) = inside(img, row, col, off) {
                    let diff = xi - target.at(r, c, 0);
                    data_term += data_omega(p, off) * phi(diff * diff, scales.data(i))?;
                }
            }
            for off in window(p.r_s) {
                if off == (0, 0) {
                    continue;
                }
                if let Some((r, c)) = inside(img, row, col, off) {
                    let diff = xi - img.at(r, c, 0);
                    let wg = guidance_weight((row, col), (r, c), guide, p.sigma_s, p.sigma_g)?;
                    smooth_term += wg * phi(diff * diff, scales.smooth(i))?;
                }
            }
        }
    }
    Ok((1.0 - p.alpha) * data_term + p.alpha * smooth_term)
}

/// Dense reweighted system at iterate `current`: each term of the
/// reweighted quadratic is scattered into the matrix.
pub fn dense_assemble(
    current: &Image,
    target: &Image,
    guide: &Image,
    p: &FilterParams,
    scales: Scales<'_>,
) -> Result<DenseSystem> {
    check_dims(current, target, guide)?;
    let w = current.width();
    let mut sys = DenseSystem::zeros(current.pixels())?;
    for row in 0..current.height() {
        for col in 0..w {
            let i = row * w + col;
            let xi = current.at(row, col, 0);
            for off in window(p.r_d) {
                if let Some((r, c)) = inside(current, row, col, off) {
                    let t = target.at(r, c, 0);
                    let d = phi_prime((xi - t) * (xi - t), scales.data(i))?;
                    sys.add_anchor(i, t, (1.0 - p.alpha) * data_omega(p, off) * d);
                }
            }
            for off in window(p.r_s) {
                if off == (0, 0) {
                    continue;
                }
                if let Some((r, c)) = inside(current, row, col, off) {
                    let diff = xi - current.at(r, c, 0);
                    let s = phi_prime(diff * diff, scales.smooth(i))?;
                    let wg = guidance_weight((row, col), (r, c), guide, p.sigma_s, p.sigma_g)?;
                    sys.add_pair(i, r * w + c, p.alpha * wg * s);
                }
            }
        }
    }
    Ok(sys)
}

/// One reweighted update computed densely.
pub fn dense_assemble_solve(
    current: &Image,
    target: &Image,
    guide: &Image,
    p: &FilterParams,
    scales: Scales<'_>,
) -> Result<Image> {
    let sys = dense_assemble(current, target, guide, p, scales)?;
    Image::gray(current.width(), current.height(), sys.solve()?)
}

/// Direct minimizer of the weighted least-squares objective with guidance
/// weights `κ = ω^g` and data weights `c = ω` (pixel-to-pixel when
/// `r_d = 0`).
pub fn wls_solve(target: &Image, guide: &Image, p: &FilterParams) -> Result<Image> {
    check_dims(target, target, guide)?;
    let w = target.width();
    let mut sys = DenseSystem::zeros(target.pixels())?;
    for row in 0..target.height() {
        for col in 0..w {
            let i = row * w + col;
            for off in window(p.r_d) {
                if let Some((r, c)) = inside(target, row, col, off) {
                    sys.add_anchor(i, target.at(r, c, 0), (1.0 - p.alpha) * data_omega(p, off));
                }
            }
            for off in window(p.r_s) {
                if off == (0, 0) {
                    continue;
                }
                if let Some((r, c)) = inside(target, row, col, off) {
                    let kappa = guidance_weight((row, col), (r, c), guide, p.sigma_s, p.sigma_g)?;
                    sys.add_pair(i, r * w + c, p.alpha * kappa);
                }
            }
        }
    }
    Image::gray(w, target.height(), sys.solve()?)
}

/// Dense 4-neighbor Laplacian matrix with replicated borders.
pub fn dense_laplacian(width: usize, height: usize) -> DMatrix<f64> {
    let n = width * height;
    let mut l = DMatrix::zeros(n, n);
    for row in 0..height {
        for col in 0..width {
            let i = row * width + col;
            let nbrs = [
                (row.wrapping_sub(1), col),
                (row + 1, col),
                (row, col.wrapping_sub(1)),
                (row, col + 1),
            ];
            for (r, c) in nbrs {
                let j = if r < height && c < width { r * width + c } else { i };
                l[(i, j)] += 1.0;
                l[(i, i)] -= 1.0;
            }
        }
    }
    l
}
