//! Per-pixel adaptation of the error-norm scale λ by steepest descent,
//! alternated with image updates.
//!
//! The λ energy is the robust filter energy evaluated with one λ per pixel
//! plus `β Σ |∇λ|²` (forward differences, Neumann borders). Its gradient in
//! `λᵢ` is the closed-form derivative of the norm terms anchored at pixel
//! `i` minus `2βΔλᵢ`.

use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{contract, Result};
use crate::image::{mean_abs, Image};
use crate::io::{save_image_with, BitDepth, FileFormat};
use crate::kernels::phi_dlambda;
use crate::params::FilterParams;
use crate::solver::{energy_with, irls_step, neighbor, GuidedContext, IrlsTrace, Scales};

/// Per-pixel λ field with its clamp bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
    min: f64,
    max: f64,
}

impl LambdaMap {
    pub fn uniform(width: usize, height: usize, value: f64, bounds: (f64, f64)) -> Result<Self> {
        Self::from_values(width, height, vec![value; width * height], bounds)
    }

    /// Wraps raw values. They must be positive; the clamp bounds are
    /// enforced by [`lambda_step`].
    pub fn from_values(
        width: usize,
        height: usize,
        values: Vec<f64>,
        bounds: (f64, f64),
    ) -> Result<Self> {
        if values.len() != width * height {
            return contract("lambda map size does not match its dimensions");
        }
        if values.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return contract("lambda values must be finite and positive");
        }
        if !(bounds.0 > 0.0 && bounds.0 <= bounds.1) {
            return contract(format!("invalid lambda bounds {bounds:?}"));
        }
        Ok(Self {
            width,
            height,
            values,
            min: bounds.0,
            max: bounds.1,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.min, self.max)
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn to_image(&self) -> Image {
        Image::gray(self.width, self.height, self.values.clone()).expect("finite by construction")
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// 4-neighbor Laplacian with replicated borders.
pub fn discrete_laplacian(lam: &LambdaMap) -> Vec<f64> {
    let (w, h) = (lam.width, lam.height);
    let v = &lam.values;
    (0..w * h)
        .into_par_iter()
        .map(|i| {
            let (row, col) = (i / w, i % w);
            let up = if row > 0 { v[i - w] } else { v[i] };
            let down = if row + 1 < h { v[i + w] } else { v[i] };
            let left = if col > 0 { v[i - 1] } else { v[i] };
            let right = if col + 1 < w { v[i + 1] } else { v[i] };
            up + down + left + right - 4.0 * v[i]
        })
        .collect()
}

/// `β Σ |∇λ|²` with forward differences; differences across the border are
/// zero.
pub fn lambda_regularizer(lam: &LambdaMap, beta: f64) -> f64 {
    let (w, h) = (lam.width, lam.height);
    let v = &lam.values;
    let mut sum = 0.0;
    for row in 0..h {
        for col in 0..w {
            let i = row * w + col;
            if col + 1 < w {
                sum += (v[i + 1] - v[i]).powi(2);
            }
            if row + 1 < h {
                sum += (v[i + w] - v[i]).powi(2);
            }
        }
    }
    beta * sum
}

fn check_map(ctx: &GuidedContext, lam: &LambdaMap) -> Result<()> {
    if lam.width != ctx.width() || lam.height != ctx.height() {
        return contract(format!(
            "lambda map is {}x{}, image {}x{}",
            lam.width,
            lam.height,
            ctx.width(),
            ctx.height()
        ));
    }
    Ok(())
}

/// Gradient of the λ energy with respect to every `λᵢ`.
pub fn lambda_gradient_with(
    ctx: &GuidedContext,
    lam: &LambdaMap,
    current: &Image,
    target: &Image,
    p: &FilterParams,
) -> Result<Vec<f64>> {
    check_map(ctx, lam)?;
    ctx.check_channel(current, "current iterate")?;
    ctx.check_channel(target, "target")?;
    let (w, h) = (ctx.width, ctx.height);
    let cur = current.data();
    let tgt = target.data();
    let lap = discrete_laplacian(lam);
    let grad = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let (row, col) = (i / w, i % w);
            let li = lam.values[i];
            let mut data = 0.0;
            for &(off, omega) in &ctx.data_window {
                if let Some(j) = neighbor(row, col, off, w, h) {
                    let diff = cur[i] - tgt[j];
                    data += omega * phi_dlambda(diff * diff, li);
                }
            }
            let mut smooth = 0.0;
            for (&off, gplane) in ctx.offsets.iter().zip(&ctx.guide_planes) {
                if let Some(j) = neighbor(row, col, off, w, h) {
                    let diff = cur[i] - cur[j];
                    smooth += gplane[i] * phi_dlambda(diff * diff, li);
                }
                if let Some(j) = neighbor(row, col, (-off.0, -off.1), w, h) {
                    let diff = cur[i] - cur[j];
                    smooth += gplane[j] * phi_dlambda(diff * diff, li);
                }
            }
            (1.0 - p.alpha) * data + p.alpha * smooth - 2.0 * p.beta * lap[i]
        })
        .collect();
    Ok(grad)
}

pub fn lambda_gradient(
    lam: &LambdaMap,
    current: &Image,
    target: &Image,
    guide: &Image,
    p: &FilterParams,
) -> Result<Vec<f64>> {
    if !current.same_dims(target) || !current.same_spatial_dims(guide) {
        return contract("iterate, target and guidance dimensions disagree");
    }
    let ctx = GuidedContext::new(guide, p)?;
    lambda_gradient_with(&ctx, lam, current, target, p)
}

/// λ energy: robust energy under the map plus the gradient regularizer.
pub fn lambda_energy_with(
    ctx: &GuidedContext,
    lam: &LambdaMap,
    current: &Image,
    target: &Image,
    p: &FilterParams,
) -> Result<f64> {
    check_map(ctx, lam)?;
    let robust = energy_with(ctx, current, target, p, Scales::PerPixel(&lam.values))?;
    Ok(robust + lambda_regularizer(lam, p.beta))
}

/// `λᵢ ← clamp(λᵢ − τ gradᵢ, λ_min, λ_max)`.
pub fn lambda_step(lam: &LambdaMap, grad: &[f64], tau: f64) -> Result<LambdaMap> {
    if grad.len() != lam.values.len() {
        return contract("gradient size does not match the lambda map");
    }
    let values = lam
        .values
        .iter()
        .zip(grad)
        .map(|(&l, &g)| (l - tau * g).clamp(lam.min, lam.max))
        .collect();
    Ok(LambdaMap {
        values,
        ..lam.clone()
    })
}

/// Alternates one reweighted image update under the current λ map with one
/// λ descent step, until the IRLS stopping rule fires.
pub fn rgif_optimize(
    target: &Image,
    guide: &Image,
    p: &FilterParams,
    init: &Image,
) -> Result<(Image, LambdaMap, IrlsTrace)> {
    if target.channels() != 1 {
        return contract("parameter optimization works on single-channel targets");
    }
    if !target.same_dims(init) || !target.same_spatial_dims(guide) {
        return contract("target, initial iterate and guidance dimensions disagree");
    }
    let ctx = GuidedContext::new(guide, p)?;
    rgif_optimize_with(&ctx, target, p, init, |_, _, _| {})
}

/// [`rgif_optimize`] on a prepared context; `observer` sees each iterate and
/// the λ map that follows it.
pub fn rgif_optimize_with(
    ctx: &GuidedContext,
    target: &Image,
    p: &FilterParams,
    init: &Image,
    mut observer: impl FnMut(usize, &Image, &LambdaMap),
) -> Result<(Image, LambdaMap, IrlsTrace)> {
    ctx.check_channel(target, "target")?;
    ctx.check_channel(init, "initial iterate")?;
    let mut map = LambdaMap::uniform(
        ctx.width(),
        ctx.height(),
        p.lambda0.clamp(p.lambda_min, p.lambda_max),
        (p.lambda_min, p.lambda_max),
    )?;
    let mut current = init.clone();
    let mut trace = IrlsTrace::started(energy_with(
        ctx,
        &current,
        target,
        p,
        Scales::PerPixel(map.values()),
    )?);
    for it in 1..=p.irls_maxit {
        let (next, outcome) = irls_step(ctx, &current, target, p, Scales::PerPixel(map.values()))?;
        let mad = mean_abs(&next, &current)?;
        let energy = energy_with(ctx, &next, target, p, Scales::PerPixel(map.values()))?;
        trace.record(mad, energy, &outcome);
        let grad = lambda_gradient_with(ctx, &map, &next, target, p)?;
        map = lambda_step(&map, &grad, p.tau)?;
        observer(it, &next, &map);
        current = next;
        if mad < p.irls_tol {
            trace.converged = true;
            break;
        }
    }
    Ok((current, map, trace))
}

/// Writes a λ map for inspection. PFM keeps raw values; 16-bit PGM/PNG are
/// affinely scaled to the full range and a `<path>.txt` sidecar records
/// `lambda = offset + scale * sample`.
pub fn save_lambda_map(map: &LambdaMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let img = map.to_image();
    match FileFormat::from_path(path)? {
        FileFormat::Pfm => save_image_with(&img, path, BitDepth::Auto),
        _ => {
            let (lo, hi) = img.min_max();
            let scale = if hi > lo { (hi - lo) / 65535.0 } else { 1.0 };
            let scaled = img.map(|v| (v - lo) / scale);
            save_image_with(&scaled, path, BitDepth::Sixteen)?;
            let mut sidecar = path.as_os_str().to_owned();
            sidecar.push(".txt");
            fs::write(sidecar, format!("offset = {lo}\nscale = {scale}\n"))?;
            Ok(())
        }
    }
}
