//! Application recipes built on [`irls_filter`] and [`rgif_optimize`].
//!
//! Every pipeline normalizes its inputs to `[0, 255]`, filters, and maps the
//! result back to the input's original range (tone mapping instead produces
//! a display image in `[0, 255]`).

use crate::error::{contract, parameter, Result};
use crate::image::{bicubic_resample, denormalize, median3x3, normalize, Image, NORMALIZED_MAX};
use crate::param_opt::{rgif_optimize, LambdaMap};
use crate::params::{Application, FilterParams, TONEMAP_ALPHAS};
use crate::solver::{irls_filter, IrlsTrace};

/// Default detail gain for detail enhancement.
pub const DEFAULT_BOOST: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub application: Application,
    pub params: FilterParams,
    /// Depth upsampling factor.
    pub factor: u32,
    pub boost: f64,
    pub layer_gains: [f64; 3],
    /// Divisor applied to the tone-mapping base range in the log domain.
    /// `None` maps the base range onto `ln(100)`.
    pub compression: Option<f64>,
}

impl PipelineConfig {
    /// Preset configuration for `application`; `factor` only matters for
    /// depth upsampling.
    pub fn new(application: Application, factor: u32) -> Result<Self> {
        Ok(Self {
            application,
            params: application.preset(factor)?,
            factor,
            boost: DEFAULT_BOOST,
            layer_gains: [1.0; 3],
            compression: None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.application == Application::DepthUpsample && ![2, 4, 8, 16].contains(&self.factor) {
            return parameter(format!("factor must be 2, 4, 8 or 16, got {}", self.factor));
        }
        if !(self.boost > 0.0 && self.boost.is_finite()) {
            return parameter(format!("boost must be > 0, got {}", self.boost));
        }
        if let Some(c) = self.compression {
            if !(c > 0.0 && c.is_finite()) {
                return parameter(format!("compression must be > 0, got {c}"));
            }
        }
        if self.layer_gains.iter().any(|g| !g.is_finite()) {
            return parameter("layer gains must be finite");
        }
        Ok(())
    }
}

/// Filtered image plus diagnostics.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub image: Image,
    pub trace: IrlsTrace,
    pub lambda_map: Option<LambdaMap>,
}

/// Guided depth upsampling with λ-map adaptation. The bicubic upsampling of
/// `lowres` is both the data target and the initial iterate.
pub fn depth_upsample(
    lowres: &Image,
    color: &Image,
    factor: u32,
    p: &FilterParams,
) -> Result<PipelineOutput> {
    if lowres.channels() != 1 {
        return contract("depth map must be single-channel");
    }
    if factor == 0 {
        return parameter("factor must be positive");
    }
    let f = factor as usize;
    if color.width() != lowres.width() * f || color.height() != lowres.height() * f {
        return contract(format!(
            "guidance is {}x{}, expected {}x{} for factor {factor}",
            color.width(),
            color.height(),
            lowres.width() * f,
            lowres.height() * f
        ));
    }
    let (depth_n, info) = normalize(lowres);
    let (guide_n, _) = normalize(color);
    let init = bicubic_resample(&depth_n, factor as f64)?;
    let (out, map, trace) = rgif_optimize(&init, &guide_n, p, &init)?;
    Ok(PipelineOutput {
        image: denormalize(&out, &info),
        trace,
        lambda_map: Some(map),
    })
}

/// Flash/no-flash (or NIR-guided) filtering: the flash image guides the
/// no-flash target, channel by channel.
pub fn flash_noflash(noflash: &Image, flash: &Image, p: &FilterParams) -> Result<PipelineOutput> {
    if !noflash.same_spatial_dims(flash) {
        return contract("flash and no-flash images differ in size");
    }
    let (target, info) = normalize(noflash);
    let (guide, _) = normalize(flash);
    let (out, trace) = irls_filter(&target, &guide, p, &target)?;
    Ok(PipelineOutput {
        image: denormalize(&out, &info),
        trace,
        lambda_map: None,
    })
}

/// Self-guided base layer of `img` on the normalized scale.
fn base_layer(norm: &Image, p: &FilterParams) -> Result<(Image, IrlsTrace)> {
    irls_filter(norm, norm, p, norm)
}

/// Detail enhancement: `base + boost · (img − base)`, clipped to the
/// normalized range before mapping back.
pub fn detail_enhance(img: &Image, boost: f64, p: &FilterParams) -> Result<PipelineOutput> {
    if !(boost > 0.0 && boost.is_finite()) {
        return parameter(format!("boost must be > 0, got {boost}"));
    }
    let (norm, info) = normalize(img);
    let (base, trace) = base_layer(&norm, p)?;
    let mut out = norm.clone();
    for (o, (&b, &v)) in out
        .data_mut()
        .iter_mut()
        .zip(base.data().iter().zip(norm.data()))
    {
        *o = (b + boost * (v - b)).clamp(0.0, NORMALIZED_MAX);
    }
    Ok(PipelineOutput {
        image: denormalize(&out, &info),
        trace,
        lambda_map: None,
    })
}

fn luminance(img: &Image) -> Image {
    let ch = img.channels();
    let data = img
        .data()
        .chunks_exact(ch)
        .map(|px| px.iter().sum::<f64>() / ch as f64)
        .collect();
    Image::gray(img.width(), img.height(), data).expect("finite")
}

/// Progressively smoother base layers of the log luminance, in log units,
/// one per level of [`TONEMAP_ALPHAS`]. Also returns the log luminance.
pub fn tonemap_layers(hdr: &Image, p: &FilterParams) -> Result<(Image, [Image; 3], IrlsTrace)> {
    if hdr.data().iter().any(|&v| !(v > 0.0)) {
        return contract("HDR samples must be strictly positive");
    }
    let log_lum = luminance(hdr).map(f64::ln);
    let (norm, info) = normalize(&log_lum);
    let mut layers = Vec::with_capacity(3);
    let mut traces = Vec::with_capacity(3);
    for &alpha in &TONEMAP_ALPHAS {
        let level = FilterParams {
            alpha,
            ..p.clone()
        };
        let (u, trace) = irls_filter(&norm, &norm, &level, &norm)?;
        layers.push(denormalize(&u, &info));
        traces.push(trace);
    }
    let layers: [Image; 3] = layers.try_into().expect("three levels");
    Ok((log_lum, layers, IrlsTrace::combine(&traces)))
}

/// Multi-scale tone mapping in the log-luminance domain.
pub fn tonemap_hdr(
    hdr: &Image,
    gains: [f64; 3],
    compression: Option<f64>,
    p: &FilterParams,
) -> Result<PipelineOutput> {
    let (log_lum, [u1, u2, u3], trace) = tonemap_layers(hdr, p)?;
    let (lo, hi) = u3.min_max();
    let divisor = match compression {
        Some(c) if c > 0.0 => c,
        Some(c) => return parameter(format!("compression must be > 0, got {c}")),
        None if hi > lo => (hi - lo) / 100f64.ln(),
        None => 1.0,
    };
    let n = log_lum.pixels();
    let (l, b1, b2, b3) = (log_lum.data(), u1.data(), u2.data(), u3.data());
    let out_log: Vec<f64> = (0..n)
        .map(|i| {
            let details = gains[0] * (l[i] - b1[i]) + gains[1] * (b1[i] - b2[i]) + gains[2] * (b2[i] - b3[i]);
            (b3[i] - hi) / divisor + details
        })
        .collect();
    let ch = hdr.channels();
    let mut rgb = Vec::with_capacity(n * ch);
    for (i, px) in hdr.data().chunks_exact(ch).enumerate() {
        let lum_in = l[i].exp();
        let lum_out = out_log[i].exp();
        rgb.extend(px.iter().map(|&v| lum_out * (v / lum_in)));
    }
    let mapped = Image::new(hdr.width(), hdr.height(), ch, rgb)?;
    let (display, _) = normalize(&mapped);
    Ok(PipelineOutput {
        image: display,
        trace,
        lambda_map: None,
    })
}

/// Texture smoothing: 3x3 median prefilter, then self-guided filtering of
/// the prefiltered image.
pub fn texture_smooth(img: &Image, p: &FilterParams) -> Result<PipelineOutput> {
    let (norm, info) = normalize(img);
    let pre = median3x3(&norm);
    let (out, trace) = base_layer(&pre, p)?;
    Ok(PipelineOutput {
        image: denormalize(&out, &info),
        trace,
        lambda_map: None,
    })
}

/// Clip-art compression-artifact removal: self-guided filtering, no
/// prefilter.
pub fn dejpeg_clipart(img: &Image, p: &FilterParams) -> Result<PipelineOutput> {
    let (norm, info) = normalize(img);
    let (out, trace) = base_layer(&norm, p)?;
    Ok(PipelineOutput {
        image: denormalize(&out, &info),
        trace,
        lambda_map: None,
    })
}
