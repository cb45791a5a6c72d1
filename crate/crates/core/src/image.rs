//! Image container and the pixel-level utilities shared by the filter and
//! the application pipelines: normalization, per-channel dispatch, bicubic
//! resampling, a 3x3 median prefilter and the MAE/MAD metric.
//!
//! Samples are `f64`, stored row-major with channels interleaved. Every
//! neighborhood operation here clamps coordinates at the border.

use crate::error::{contract, parameter, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
    value_range: (f64, f64),
}

impl Image {
    /// Builds an image from interleaved samples. All samples must be finite.
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 {
            return contract("image needs at least one channel");
        }
        if data.len() != width * height * channels {
            return contract(format!(
                "sample count {} does not match {}x{}x{}",
                data.len(),
                width,
                height,
                channels
            ));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::Decode(format!("non-finite sample {bad}")));
        }
        let value_range = sample_range(&data);
        Ok(Self {
            width,
            height,
            channels,
            data,
            value_range,
        })
    }

    pub fn gray(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(width, height, 1, data)
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
            value_range: (value, value),
        }
    }

    /// Builds a single-channel image by evaluating `f(row, col)`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        let value_range = sample_range(&data);
        Self {
            width,
            height,
            channels: 1,
            data,
            value_range,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Range of the samples before any normalization was applied.
    pub fn value_range(&self) -> (f64, f64) {
        self.value_range
    }

    pub fn set_value_range(&mut self, range: (f64, f64)) {
        self.value_range = range;
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize, ch: usize) -> f64 {
        self.data[(row * self.width + col) * self.channels + ch]
    }

    pub fn same_dims(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub fn same_spatial_dims(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Extracts channel `k` as a single-channel image.
    pub fn channel(&self, k: usize) -> Image {
        assert!(k < self.channels, "channel {k} out of range");
        let data: Vec<f64> = self
            .data
            .iter()
            .skip(k)
            .step_by(self.channels)
            .copied()
            .collect();
        let value_range = sample_range(&data);
        Image {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
            value_range,
        }
    }

    /// Interleaves single-channel planes of identical size.
    pub fn from_channels(planes: &[Image]) -> Result<Image> {
        let first = match planes.first() {
            Some(p) => p,
            None => return contract("no channels to merge"),
        };
        if planes
            .iter()
            .any(|p| p.channels != 1 || !p.same_spatial_dims(first))
        {
            return contract("channel planes must be single-channel and equally sized");
        }
        let channels = planes.len();
        let mut data = vec![0.0; first.pixels() * channels];
        for (k, plane) in planes.iter().enumerate() {
            for (i, &v) in plane.data.iter().enumerate() {
                data[i * channels + k] = v;
            }
        }
        let value_range = sample_range(&data);
        Ok(Image {
            width: first.width,
            height: first.height,
            channels,
            data,
            value_range,
        })
    }

    pub fn min_max(&self) -> (f64, f64) {
        sample_range(&self.data)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Image {
        let data: Vec<f64> = self.data.iter().map(|&v| f(v)).collect();
        Image {
            data,
            ..self.clone()
        }
    }
}

fn sample_range(data: &[f64]) -> (f64, f64) {
    if data.is_empty() {
        return (0.0, 0.0);
    }
    data.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
}

/// Inverse of [`normalize`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RestoreInfo {
    pub lo: f64,
    pub hi: f64,
}

pub const NORMALIZED_MAX: f64 = 255.0;
const CONSTANT_LEVEL: f64 = 127.5;

/// Affinely maps all samples onto `[0, 255]`. A constant image maps to 127.5.
pub fn normalize(img: &Image) -> (Image, RestoreInfo) {
    let (lo, hi) = img.min_max();
    let info = RestoreInfo { lo, hi };
    let mut out = if hi > lo {
        let scale = NORMALIZED_MAX / (hi - lo);
        img.map(|v| ((v - lo) * scale).min(NORMALIZED_MAX))
    } else {
        img.map(|_| CONSTANT_LEVEL)
    };
    out.value_range = img.value_range;
    (out, info)
}

pub fn denormalize(img: &Image, info: &RestoreInfo) -> Image {
    let RestoreInfo { lo, hi } = *info;
    let mut out = if hi > lo {
        let scale = (hi - lo) / NORMALIZED_MAX;
        img.map(|v| lo + v * scale)
    } else {
        img.map(|v| lo + (v - CONSTANT_LEVEL))
    };
    out.value_range = (lo, hi);
    out
}

/// Applies a single-channel transform to every channel independently.
pub fn for_each_channel<F>(img: &Image, mut f: F) -> Result<Image>
where
    F: FnMut(&Image) -> Result<Image>,
{
    let mut planes = Vec::with_capacity(img.channels);
    for k in 0..img.channels {
        let plane = if img.channels == 1 {
            img.clone()
        } else {
            img.channel(k)
        };
        let out = f(&plane)?;
        if !out.same_dims(&plane) {
            return contract(format!(
                "channel transform changed dimensions from {}x{}x1 to {}x{}x{}",
                plane.width, plane.height, out.width, out.height, out.channels
            ));
        }
        planes.push(out);
    }
    if planes.len() == 1 {
        return Ok(planes.pop().unwrap());
    }
    Image::from_channels(&planes)
}

/// Keys cubic convolution kernel with `a = -0.5`.
#[inline]
pub fn keys_kernel(x: f64) -> f64 {
    const A: f64 = -0.5;
    let x = x.abs();
    if x <= 1.0 {
        ((A + 2.0) * x - (A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((A * x - 5.0 * A) * x + 8.0 * A) * x - 4.0 * A
    } else {
        0.0
    }
}

/// Source taps and weights for one output coordinate on a half-pixel
/// centered grid.
fn cubic_taps(out_idx: usize, scale: f64, len: usize) -> ([usize; 4], [f64; 4]) {
    let src = (out_idx as f64 + 0.5) * scale - 0.5;
    let base = src.floor();
    let t = src - base;
    let base = base as isize;
    let last = len as isize - 1;
    let mut idx = [0usize; 4];
    let mut w = [0.0; 4];
    for k in 0..4 {
        let off = k as isize - 1;
        idx[k] = (base + off).clamp(0, last) as usize;
        w[k] = keys_kernel(t - off as f64);
    }
    (idx, w)
}

/// Resizes by `factor` with bicubic (Keys, a = -0.5) interpolation. Output
/// dimensions are `round(dim * factor)`.
pub fn bicubic_resample(img: &Image, factor: f64) -> Result<Image> {
    if !(factor > 0.0) || !factor.is_finite() {
        return parameter(format!("resample factor must be positive, got {factor}"));
    }
    let out_w = (img.width as f64 * factor).round() as usize;
    let out_h = (img.height as f64 * factor).round() as usize;
    if out_w == 0 || out_h == 0 {
        return parameter(format!("resample factor {factor} yields an empty image"));
    }
    let sx = img.width as f64 / out_w as f64;
    let sy = img.height as f64 / out_h as f64;
    let cols: Vec<_> = (0..out_w).map(|c| cubic_taps(c, sx, img.width)).collect();
    let ch = img.channels;
    let mut data = vec![0.0; out_w * out_h * ch];
    for r in 0..out_h {
        let (ri, rw) = cubic_taps(r, sy, img.height);
        for (c, (ci, cw)) in cols.iter().enumerate() {
            for k in 0..ch {
                let mut acc = 0.0;
                for a in 0..4 {
                    let mut row_acc = 0.0;
                    for b in 0..4 {
                        row_acc += cw[b] * img.at(ri[a], ci[b], k);
                    }
                    acc += rw[a] * row_acc;
                }
                data[(r * out_w + c) * ch + k] = acc;
            }
        }
    }
    let mut out = Image::new(out_w, out_h, ch, data)?;
    out.value_range = img.value_range;
    Ok(out)
}

/// 3x3 median per channel with clamped borders.
pub fn median3x3(img: &Image) -> Image {
    let (w, h, ch) = (img.width, img.height, img.channels);
    let mut data = vec![0.0; img.data.len()];
    let mut window = [0.0f64; 9];
    for r in 0..h {
        for c in 0..w {
            for k in 0..ch {
                let mut n = 0;
                for dr in -1isize..=1 {
                    let rr = (r as isize + dr).clamp(0, h as isize - 1) as usize;
                    for dc in -1isize..=1 {
                        let cc = (c as isize + dc).clamp(0, w as isize - 1) as usize;
                        window[n] = img.at(rr, cc, k);
                        n += 1;
                    }
                }
                window.sort_unstable_by(f64::total_cmp);
                data[(r * w + c) * ch + k] = window[4];
            }
        }
    }
    Image {
        data,
        ..img.clone()
    }
}

/// Mean absolute difference over all samples. Used both as MAE against a
/// reference and as MAD between successive iterates.
pub fn mean_abs(a: &Image, b: &Image) -> Result<f64> {
    if !a.same_dims(b) {
        return contract(format!(
            "mean_abs on {}x{}x{} vs {}x{}x{}",
            a.width, a.height, a.channels, b.width, b.height, b.channels
        ));
    }
    if a.data.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = a.data.iter().zip(&b.data).map(|(x, y)| (x - y).abs()).sum();
    Ok(sum / a.data.len() as f64)
}

/// Error metrics for a run: MAE to a reference, MAD of the last step and
/// a per-iteration series.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricReport {
    pub mae: f64,
    pub mad: f64,
    pub per_iteration: Vec<(usize, f64)>,
}

impl MetricReport {
    pub fn push(&mut self, iteration: usize, value: f64) {
        debug_assert!(self
            .per_iteration
            .last()
            .map_or(true, |&(last, _)| iteration > last));
        self.per_iteration.push((iteration, value));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(w: usize, h: usize, c: usize, data: &[f64]) -> Image {
        Image::new(w, h, c, data.to_vec()).unwrap()
    }

    #[test]
    fn rejects_bad_sample_count() {
        assert!(Image::new(2, 2, 1, vec![0.0; 3]).is_err());
        assert!(Image::new(1, 1, 1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn normalize_endpoints_and_affine() {
        let (n, _) = normalize(&img(2, 1, 1, &[0.0, 65535.0]));
        assert_eq!(n.data(), &[0.0, 255.0]);
        let (n, info) = normalize(&img(3, 1, 1, &[10.0, 20.0, 30.0]));
        assert_eq!(n.data(), &[0.0, 127.5, 255.0]);
        let back = denormalize(&n, &info);
        assert_eq!(back.data(), &[10.0, 20.0, 30.0]);
    }

    #[test]
    fn normalize_constant_image() {
        let (n, info) = normalize(&img(2, 2, 1, &[7.0; 4]));
        assert!(n.data().iter().all(|&v| v == 127.5));
        assert!(denormalize(&n, &info).data().iter().all(|&v| v == 7.0));
    }

    #[test]
    fn for_each_channel_applies_per_channel() {
        let rgb = img(2, 1, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(for_each_channel(&rgb, |p| Ok(p.clone())).unwrap(), rgb);

        let two = img(1, 1, 2, &[1.0, 2.0]);
        let plus = for_each_channel(&two, |p| Ok(p.map(|v| v + 1.0))).unwrap();
        assert_eq!(plus.data(), &[2.0, 3.0]);

        let centered = for_each_channel(&rgb, |p| {
            let mean = p.data().iter().sum::<f64>() / p.data().len() as f64;
            Ok(p.map(|v| v - mean))
        })
        .unwrap();
        for k in 0..3 {
            assert_eq!(centered.channel(k).data().iter().sum::<f64>(), 0.0);
        }
    }

    #[test]
    fn for_each_channel_rejects_resizing_transform() {
        let rgb = img(2, 1, 3, &[0.0; 6]);
        let err = for_each_channel(&rgb, |_| Ok(Image::filled(1, 1, 1, 0.0)));
        assert!(matches!(err, Err(Error::Contract(_))));
    }

    #[test]
    fn keys_kernel_is_interpolating() {
        assert_eq!(keys_kernel(0.0), 1.0);
        assert_eq!(keys_kernel(1.0), 0.0);
        assert_eq!(keys_kernel(2.0), 0.0);
        assert_eq!(keys_kernel(-1.0), 0.0);
        for i in 0..=100 {
            let t = i as f64 / 100.0;
            let sum: f64 = (-1..=2).map(|k| keys_kernel(t - k as f64)).sum();
            assert!((sum - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn bicubic_identity_and_constant() {
        let ramp = Image::from_fn(4, 4, |r, c| (r * 4 + c) as f64);
        assert_eq!(bicubic_resample(&ramp, 1.0).unwrap().data(), ramp.data());

        let flat = Image::filled(3, 2, 1, 42.0);
        let up = bicubic_resample(&flat, 8.0).unwrap();
        assert_eq!((up.width(), up.height()), (24, 16));
        assert!(up.data().iter().all(|&v| (v - 42.0).abs() < 1e-12));
    }

    #[test]
    fn bicubic_rejects_bad_factor() {
        let flat = Image::filled(2, 2, 1, 0.0);
        assert!(matches!(bicubic_resample(&flat, 0.0), Err(Error::Parameter(_))));
        assert!(matches!(bicubic_resample(&flat, -2.0), Err(Error::Parameter(_))));
        assert!(matches!(bicubic_resample(&flat, 0.1), Err(Error::Parameter(_))));
    }

    #[test]
    fn median_cases() {
        let flat = Image::filled(4, 4, 1, 3.0);
        assert_eq!(median3x3(&flat), flat);

        let mut data = vec![0.0; 25];
        data[12] = 255.0;
        let out = median3x3(&img(5, 5, 1, &data));
        assert!(out.data().iter().all(|&v| v == 0.0));

        let nine = Image::from_fn(3, 3, |r, c| (r * 3 + c + 1) as f64);
        assert_eq!(median3x3(&nine).at(1, 1, 0), 5.0);
    }

    #[test]
    fn mean_abs_cases() {
        let a = img(2, 1, 1, &[0.0, 0.0]);
        let b = img(2, 1, 1, &[1.0, 3.0]);
        assert_eq!(mean_abs(&a, &a).unwrap(), 0.0);
        assert_eq!(mean_abs(&a, &b).unwrap(), 2.0);
        assert!(mean_abs(&a, &img(1, 1, 1, &[0.0])).is_err());
    }
}
