//! Scalar building blocks of the energy: the exponential error norm, its
//! derivative with respect to the squared argument, and the spatial and
//! guidance weights.
//!
//! An infinite scale is a first-class value: the norm then degenerates to
//! the plain quadratic exactly.

use crate::error::{contract, Result};
use crate::image::Image;

/// Exponential error norm `2λ²(1 − exp(−x²/2λ²))`.
pub fn phi(x2: f64, lambda: f64) -> Result<f64> {
    if !(x2 >= 0.0) {
        return contract(format!("squared difference must be >= 0, got {x2}"));
    }
    Ok(phi_unchecked(x2, lambda))
}

/// Derivative of [`phi`] with respect to `x2`: `exp(−x²/2λ²)`.
pub fn phi_prime(x2: f64, lambda: f64) -> Result<f64> {
    if !(x2 >= 0.0) {
        return contract(format!("squared difference must be >= 0, got {x2}"));
    }
    Ok(phi_prime_unchecked(x2, lambda))
}

#[inline]
pub(crate) fn phi_unchecked(x2: f64, lambda: f64) -> f64 {
    if lambda.is_infinite() {
        return x2;
    }
    let two_l2 = 2.0 * lambda * lambda;
    // expm1 keeps the large-λ limit accurate
    -two_l2 * (-x2 / two_l2).exp_m1()
}

#[inline]
pub(crate) fn phi_prime_unchecked(x2: f64, lambda: f64) -> f64 {
    if lambda.is_infinite() {
        return 1.0;
    }
    (-x2 / (2.0 * lambda * lambda)).exp()
}

/// `∂φ/∂λ` at fixed `x2`: `4λ(1 − e) − (2x²/λ)e` with `e = φ'(x²)`.
#[inline]
pub(crate) fn phi_dlambda(x2: f64, lambda: f64) -> f64 {
    let e = phi_prime_unchecked(x2, lambda);
    4.0 * lambda * (1.0 - e) - 2.0 * x2 / lambda * e
}

/// Gaussian spatial falloff `exp(−(di² + dj²)/2σ²)`.
#[inline]
pub fn spatial_weight(di: isize, dj: isize, sigma: f64) -> f64 {
    let d2 = (di * di + dj * dj) as f64;
    (-d2 / (2.0 * sigma * sigma)).exp()
}

/// Squared guidance distance averaged over the guidance channels.
#[inline]
pub(crate) fn guidance_distance2(g: &Image, a: usize, b: usize) -> f64 {
    let ch = g.channels();
    let data = g.data();
    let (pa, pb) = (&data[a * ch..(a + 1) * ch], &data[b * ch..(b + 1) * ch]);
    let sum: f64 = pa.iter().zip(pb).map(|(x, y)| (x - y) * (x - y)).sum();
    sum / ch as f64
}

/// Range factor of the guidance weight for a precomputed channel-averaged
/// squared distance.
#[inline]
pub(crate) fn range_weight(dist2: f64, sigma_g: f64) -> f64 {
    (-dist2 / (2.0 * sigma_g * sigma_g)).exp()
}

/// Bilateral guidance weight between pixels `i = (row, col)` and `j`.
pub fn guidance_weight(
    i: (usize, usize),
    j: (usize, usize),
    guide: &Image,
    sigma_s: f64,
    sigma_g: f64,
) -> Result<f64> {
    let (w, h) = (guide.width(), guide.height());
    if i.0 >= h || i.1 >= w || j.0 >= h || j.1 >= w {
        return contract(format!("pixel {i:?} or {j:?} outside {w}x{h} guidance"));
    }
    let di = i.0 as isize - j.0 as isize;
    let dj = i.1 as isize - j.1 as isize;
    let dist2 = guidance_distance2(guide, i.0 * w + i.1, j.0 * w + j.1);
    Ok(spatial_weight(di, dj, sigma_s) * range_weight(dist2, sigma_g))
}
