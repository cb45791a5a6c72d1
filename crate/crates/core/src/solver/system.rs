use rayon::prelude::*;

use super::context::{neighbor, GuidedContext, Offset, Scales};
use crate::error::{contract, parameter, Result};
use crate::image::Image;
use crate::kernels::{phi_prime_unchecked, phi_unchecked};
use crate::params::FilterParams;

/// Fixed chunk length for reductions. Partial sums are combined in chunk
/// order, so results do not depend on the thread count.
pub(crate) const REDUCE_CHUNK: usize = 4096;

pub(crate) fn det_sum(values: &[f64]) -> f64 {
    let partials: Vec<f64> = values
        .par_chunks(REDUCE_CHUNK)
        .map(|c| c.iter().sum::<f64>())
        .collect();
    partials.iter().sum()
}

pub(crate) fn det_dot(a: &[f64], b: &[f64]) -> f64 {
    let partials: Vec<f64> = a
        .par_chunks(REDUCE_CHUNK)
        .zip(b.par_chunks(REDUCE_CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(u, v)| u * v).sum::<f64>())
        .collect();
    partials.iter().sum()
}

/// Symmetric sparse system on a pixel grid, stored as one plane per
/// half-window offset plus a per-row anchor. `planes[k][i]` is the entry
/// `A(i, i + offsets[k])`; the mirrored entry is the same number.
///
/// The anchor is the diagonal excess `A(i, i) − Σ_j |A(i, j)|`; for an
/// assembled system it is the data-term mass. Products are formed as
/// `anchor_i x_i + Σ_j (|a_ij| x_i + a_ij x_j)`, so a tiny anchor is never
/// absorbed into a large diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSystem {
    width: usize,
    height: usize,
    anchor: Vec<f64>,
    diag: Vec<f64>,
    offsets: Vec<Offset>,
    planes: Vec<Vec<f64>>,
    rhs: Vec<f64>,
}

impl SparseSystem {
    /// Builds a system from raw stencil data. Offsets must be positively
    /// oriented (see [`super::half_window`]); plane entries whose neighbor
    /// lies outside the grid must be zero.
    pub fn from_stencil(
        width: usize,
        height: usize,
        diag: Vec<f64>,
        offsets: Vec<Offset>,
        planes: Vec<Vec<f64>>,
        rhs: Vec<f64>,
    ) -> Result<Self> {
        let n = width * height;
        if diag.len() != n || rhs.len() != n {
            return contract("diagonal and rhs must have one entry per pixel");
        }
        if planes.len() != offsets.len() || planes.iter().any(|p| p.len() != n) {
            return contract("one full-size plane per offset required");
        }
        for (&off, plane) in offsets.iter().zip(&planes) {
            if !(off.0 > 0 || (off.0 == 0 && off.1 > 0)) {
                return contract(format!("offset {off:?} is not positively oriented"));
            }
            for (i, &v) in plane.iter().enumerate() {
                if v != 0.0 && neighbor(i / width, i % width, off, width, height).is_none() {
                    return contract(format!("entry at pixel {i}, offset {off:?} leaves the grid"));
                }
            }
        }
        let mut sys = Self {
            width,
            height,
            anchor: Vec::new(),
            diag,
            offsets,
            planes,
            rhs,
        };
        sys.anchor = sys
            .diag
            .iter()
            .zip(sys.offdiag_abs_sums())
            .map(|(d, s)| d - s)
            .collect();
        Ok(sys)
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    /// Per-row diagonal excess over the absolute off-diagonal row sum.
    pub fn anchor(&self) -> &[f64] {
        &self.anchor
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn offsets(&self) -> &[Offset] {
        &self.offsets
    }

    pub fn planes(&self) -> &[Vec<f64>] {
        &self.planes
    }

    /// Matrix entry `A(i, j)`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.diag[i];
        }
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        let (rl, cl) = ((lo / self.width) as isize, (lo % self.width) as isize);
        let (rh, ch) = ((hi / self.width) as isize, (hi % self.width) as isize);
        let off = (rh - rl, ch - cl);
        match self.offsets.iter().position(|&o| o == off) {
            Some(k) => self.planes[k][lo],
            None => 0.0,
        }
    }

    /// Dense copy, for tests and small diagnostics.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            a[i][i] = self.diag[i];
        }
        for (&off, plane) in self.offsets.iter().zip(&self.planes) {
            for (i, &v) in plane.iter().enumerate() {
                if let Some(j) = neighbor(i / self.width, i % self.width, off, self.width, self.height)
                {
                    a[i][j] = v;
                    a[j][i] = v;
                }
            }
        }
        a
    }

    /// Sum of absolute off-diagonal entries of each row.
    pub fn offdiag_abs_sums(&self) -> Vec<f64> {
        let (w, h) = (self.width, self.height);
        (0..self.n())
            .into_par_iter()
            .map(|i| {
                let (row, col) = (i / w, i % w);
                let mut s = 0.0;
                for (&off, plane) in self.offsets.iter().zip(&self.planes) {
                    s += plane[i].abs();
                    if let Some(j) = neighbor(row, col, (-off.0, -off.1), w, h) {
                        s += plane[j].abs();
                    }
                }
                s
            })
            .collect()
    }

    /// Checks the assembled-system invariants exactly: finite entries,
    /// positive diagonal, non-positive off-diagonals and strict diagonal
    /// dominance (a positive anchor). Symmetry holds by construction of the
    /// storage.
    pub fn check_invariants(&self) -> Result<()> {
        if self.rhs.iter().any(|v| !v.is_finite()) {
            return contract("non-finite right-hand side");
        }
        for plane in &self.planes {
            if let Some(v) = plane.iter().find(|v| !v.is_finite() || **v > 0.0) {
                return contract(format!("off-diagonal entry {v} is positive or non-finite"));
            }
        }
        for (i, (&d, &m)) in self.diag.iter().zip(&self.anchor).enumerate() {
            if !(d > 0.0 && d.is_finite()) {
                return contract(format!("diagonal entry {i} is {d}"));
            }
            if !(m > 0.0) {
                return contract(format!(
                    "row {i} not strictly diagonally dominant: diagonal excess {m}"
                ));
            }
        }
        Ok(())
    }

    /// Conditions `pcg_solve` relies on: finite entries and (weak) diagonal
    /// dominance with a positive diagonal, except for decoupled rows (see
    /// [`SparseSystem::is_decoupled`]).
    pub(crate) fn check_solvable(&self) -> Result<()> {
        if self.rhs.iter().any(|v| !v.is_finite()) {
            return contract("non-finite right-hand side");
        }
        if self.planes.iter().flatten().any(|v| !v.is_finite()) {
            return contract("non-finite off-diagonal entry");
        }
        for (i, (&d, &m)) in self.diag.iter().zip(&self.anchor).enumerate() {
            if d == 0.0 && self.is_decoupled(i) {
                continue;
            }
            if !(d > 0.0 && d.is_finite()) {
                return contract(format!("diagonal entry {i} is {d}"));
            }
            if m < -1e-12 * d {
                return contract(format!("row {i} not diagonally dominant: excess {m}"));
            }
        }
        Ok(())
    }

    /// Row `i` (and so column `i`) is entirely zero with a zero right-hand
    /// side. This happens when every weight of a pixel underflows; the
    /// unknown is then free and the solver leaves it at its initial value.
    pub fn is_decoupled(&self, i: usize) -> bool {
        self.diag[i] == 0.0 && self.anchor[i] == 0.0 && self.rhs[i] == 0.0
    }

    pub(crate) fn is_diagonal(&self) -> bool {
        self.planes.iter().all(|p| p.iter().all(|&v| v == 0.0))
    }

    /// `y = A x`, row-parallel.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let (w, h) = (self.width, self.height);
        y.par_chunks_mut(w).enumerate().for_each(|(row, out)| {
            let base = row * w;
            for (col, v) in out.iter_mut().enumerate() {
                *v = self.anchor[base + col] * x[base + col];
            }
            for (&(di, dj), plane) in self.offsets.iter().zip(&self.planes) {
                // forward neighbor (row + di, col + dj)
                let fr = row as isize + di;
                if fr < h as isize {
                    let fbase = fr as usize * w;
                    let (c0, c1) = col_range(w, dj);
                    for col in c0..c1 {
                        let j = fbase + (col as isize + dj) as usize;
                        let a = plane[base + col];
                        out[col] += a.abs() * x[base + col] + a * x[j];
                    }
                }
                // backward neighbor (row - di, col - dj), entry stored at the neighbor
                let br = row as isize - di;
                if br >= 0 {
                    let bbase = br as usize * w;
                    let (c0, c1) = col_range(w, -dj);
                    for col in c0..c1 {
                        let j = bbase + (col as isize - dj) as usize;
                        let a = plane[j];
                        out[col] += a.abs() * x[base + col] + a * x[j];
                    }
                }
            }
        });
    }
}

/// Columns `c` with `0 <= c + dj < w`.
#[inline]
fn col_range(w: usize, dj: isize) -> (usize, usize) {
    if dj >= 0 {
        (0, w.saturating_sub(dj as usize))
    } else {
        ((-dj) as usize, w)
    }
}

/// Symmetrized smoothness weight of a pair. With one scale per pixel the
/// two orientations of the pair carry different `s`; their mean keeps the
/// system symmetric and is exactly what the per-pixel energy produces.
#[inline]
fn pair_smooth_weight(x2: f64, li: f64, lj: f64) -> f64 {
    if li == lj {
        phi_prime_unchecked(x2, li)
    } else {
        0.5 * (phi_prime_unchecked(x2, li) + phi_prime_unchecked(x2, lj))
    }
}

/// Assembles the reweighted linear system for the current iterate.
pub fn assemble_with(
    ctx: &GuidedContext,
    current: &Image,
    target: &Image,
    p: &FilterParams,
    scales: Scales<'_>,
) -> Result<SparseSystem> {
    if !(0.0..1.0).contains(&p.alpha) {
        return parameter(format!("alpha must lie in [0, 1), got {}", p.alpha));
    }
    ctx.check_channel(current, "current iterate")?;
    ctx.check_channel(target, "target")?;
    let (w, h) = (ctx.width, ctx.height);
    let n = w * h;
    scales.check(n)?;
    let cur = current.data();
    let tgt = target.data();
    let alpha = p.alpha;

    let planes: Vec<Vec<f64>> = ctx
        .offsets
        .iter()
        .zip(&ctx.guide_planes)
        .map(|(&off, gplane)| {
            let mut plane = vec![0.0; n];
            plane.par_chunks_mut(w).enumerate().for_each(|(row, out)| {
                for (col, v) in out.iter_mut().enumerate() {
                    let i = row * w + col;
                    if let Some(j) = neighbor(row, col, off, w, h) {
                        let diff = cur[i] - cur[j];
                        let s = pair_smooth_weight(diff * diff, scales.smooth(i), scales.smooth(j));
                        *v = -2.0 * alpha * gplane[i] * s;
                    }
                }
            });
            plane
        })
        .collect();

    let mut anchor = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    anchor
        .par_chunks_mut(w)
        .zip(diag.par_chunks_mut(w))
        .zip(rhs.par_chunks_mut(w))
        .enumerate()
        .for_each(|(row, ((arow, drow), rrow))| {
            for col in 0..w {
                let i = row * w + col;
                let lam = scales.data(i);
                let mut mass = 0.0;
                let mut acc = 0.0;
                for &(off, omega) in &ctx.data_window {
                    if let Some(j) = neighbor(row, col, off, w, h) {
                        let diff = cur[i] - tgt[j];
                        let wd = omega * phi_prime_unchecked(diff * diff, lam);
                        mass += wd;
                        acc += wd * tgt[j];
                    }
                }
                let mut smooth = 0.0;
                for (&off, plane) in ctx.offsets.iter().zip(&planes) {
                    smooth -= plane[i];
                    if let Some(j) = neighbor(row, col, (-off.0, -off.1), w, h) {
                        smooth -= plane[j];
                    }
                }
                arow[col] = (1.0 - alpha) * mass;
                drow[col] = arow[col] + smooth;
                rrow[col] = (1.0 - alpha) * acc;
            }
        });

    Ok(SparseSystem {
        width: w,
        height: h,
        anchor,
        diag,
        offsets: ctx.offsets.clone(),
        planes,
        rhs,
    })
}

/// Assembles the system for iterate `current`, target `target` and guidance
/// `guide`. Builds a fresh [`GuidedContext`]; loops should hold one and call
/// [`assemble_with`].
pub fn assemble_system(
    current: &Image,
    target: &Image,
    guide: &Image,
    p: &FilterParams,
    scales: Scales<'_>,
) -> Result<SparseSystem> {
    if !current.same_dims(target) || !current.same_spatial_dims(guide) {
        return contract("iterate, target and guidance dimensions disagree");
    }
    let ctx = GuidedContext::new(guide, p)?;
    assemble_with(&ctx, current, target, p, scales)
}

/// Robust energy of `img` evaluated on the stencil layout.
pub fn energy_with(
    ctx: &GuidedContext,
    img: &Image,
    target: &Image,
    p: &FilterParams,
    scales: Scales<'_>,
) -> Result<f64> {
    ctx.check_channel(img, "image")?;
    ctx.check_channel(target, "target")?;
    let (w, h) = (ctx.width, ctx.height);
    scales.check(w * h)?;
    let cur = img.data();
    let tgt = target.data();
    let per_pixel: Vec<f64> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let (row, col) = (i / w, i % w);
            let mut data = 0.0;
            for &(off, omega) in &ctx.data_window {
                if let Some(j) = neighbor(row, col, off, w, h) {
                    let diff = cur[i] - tgt[j];
                    data += omega * phi_unchecked(diff * diff, scales.data(i));
                }
            }
            let mut smooth = 0.0;
            for (&off, gplane) in ctx.offsets.iter().zip(&ctx.guide_planes) {
                if let Some(j) = neighbor(row, col, off, w, h) {
                    let diff = cur[i] - cur[j];
                    let x2 = diff * diff;
                    smooth += gplane[i]
                        * (phi_unchecked(x2, scales.smooth(i)) + phi_unchecked(x2, scales.smooth(j)));
                }
            }
            (1.0 - p.alpha) * data + p.alpha * smooth
        })
        .collect();
    Ok(det_sum(&per_pixel))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(alpha: f64, r_d: usize, r_s: usize, lambda: f64) -> FilterParams {
        FilterParams {
            alpha,
            r_d,
            r_s,
            sigma_d: 1.0,
            sigma_s: 1.0,
            sigma_g: 10.0,
            lambda_d: lambda,
            lambda_s: lambda,
            ..Default::default()
        }
    }

    #[test]
    fn single_pixel_system() {
        let i0 = Image::gray(1, 1, vec![42.0]).unwrap();
        let cur = Image::gray(1, 1, vec![40.0]).unwrap();
        let p = params(0.7, 0, 1, 5.0);
        let sys = assemble_system(&cur, &i0, &i0, &p, Scales::from_params(&p)).unwrap();
        let d = (-4.0f64 / 50.0).exp();
        assert!((sys.diag()[0] - 0.3 * d).abs() < 1e-15);
        assert!((sys.rhs()[0] - 0.3 * d * 42.0).abs() < 1e-13);
        assert!((sys.rhs()[0] / sys.diag()[0] - 42.0).abs() < 1e-12);
    }

    #[test]
    fn two_pixel_system_by_hand() {
        // I0 = In = (0, 100), alpha = 0.5, r_d = 0, r_s = 1, sigma_s = 1, lambda = 10
        let img = Image::gray(2, 1, vec![0.0, 100.0]).unwrap();
        let g = Image::filled(2, 1, 1, 3.0);
        let p = params(0.5, 0, 1, 10.0);
        let sys = assemble_system(&img, &img, &g, &p, Scales::from_params(&p)).unwrap();
        let omega_g = (-0.5f64).exp();
        let s = (-10000.0f64 / 200.0).exp();
        let off = -2.0 * 0.5 * omega_g * s;
        let diag = 0.5 * 1.0 + 2.0 * 0.5 * omega_g * s;
        let a = sys.to_dense();
        assert!((a[0][1] - off).abs() < 1e-12);
        assert!((a[1][0] - off).abs() < 1e-12);
        assert!((a[0][0] - diag).abs() < 1e-12);
        assert!((a[1][1] - diag).abs() < 1e-12);
        assert_eq!(sys.rhs(), &[0.0, 50.0]);
        sys.check_invariants().unwrap();
    }

    #[test]
    fn alpha_one_rejected_at_assembly() {
        let img = Image::filled(2, 2, 1, 1.0);
        let p = params(0.5, 0, 1, 10.0);
        let ctx = GuidedContext::new(&img, &p).unwrap();
        let bad = FilterParams { alpha: 1.0, ..p.clone() };
        assert!(assemble_with(&ctx, &img, &img, &bad, Scales::from_params(&p)).is_err());
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let a = Image::filled(2, 2, 1, 1.0);
        let b = Image::filled(3, 2, 1, 1.0);
        let p = params(0.5, 0, 1, 10.0);
        assert!(assemble_system(&a, &b, &a, &p, Scales::from_params(&p)).is_err());
    }

    #[test]
    fn apply_matches_dense() {
        let img = Image::from_fn(5, 4, |r, c| ((r * 7 + c * 13) % 11) as f64 * 9.0);
        let p = params(0.8, 1, 2, 15.0);
        let sys = assemble_system(&img, &img, &img, &p, Scales::from_params(&p)).unwrap();
        let x: Vec<f64> = (0..20).map(|i| (i as f64).sin()).collect();
        let mut y = vec![0.0; 20];
        sys.apply(&x, &mut y);
        let a = sys.to_dense();
        for i in 0..20 {
            let yi: f64 = (0..20).map(|j| a[i][j] * x[j]).sum();
            assert!((yi - y[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn small_data_mass_is_not_absorbed() {
        // the pixel's residual makes its data weight ~1e-20, far below the
        // rounding unit of its diagonal
        let cur = Image::gray(3, 1, vec![100.0, 100.0, 100.0]).unwrap();
        let tgt = Image::gray(3, 1, vec![100.0, 100.0 + 5.0 * 2f64.sqrt() * 6.8, 100.0]).unwrap();
        let p = params(0.5, 0, 1, 5.0);
        let sys = assemble_system(&cur, &tgt, &cur, &p, Scales::from_params(&p)).unwrap();
        let sums = sys.offdiag_abs_sums();
        assert_eq!(sys.diag()[1], sums[1]);
        assert!(sys.anchor()[1] > 0.0);
        sys.check_invariants().unwrap();
        let mut y = vec![0.0; 3];
        sys.apply(&[7.0; 3], &mut y);
        for (yi, ai) in y.iter().zip(sys.anchor()) {
            assert_eq!(*yi, 7.0 * ai);
        }
    }

    #[test]
    fn from_stencil_validation() {
        assert!(SparseSystem::from_stencil(2, 1, vec![2.0, 2.0], vec![(0, 1)], vec![vec![1.0, 0.0]], vec![3.0, 3.0]).is_ok());
        // entry pointing outside the grid
        assert!(SparseSystem::from_stencil(2, 1, vec![2.0, 2.0], vec![(0, 1)], vec![vec![0.0, 1.0]], vec![3.0, 3.0]).is_err());
        // negative orientation
        assert!(SparseSystem::from_stencil(2, 1, vec![2.0, 2.0], vec![(0, -1)], vec![vec![0.0, 1.0]], vec![3.0, 3.0]).is_err());
    }
}
