#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rgif::image::{bicubic_resample, normalize, Image};
use rgif::FilterParams;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize, lo: f64, hi: f64) -> Image {
    Image::from_fn(w, h, |_, _| rng.gen_range(lo..hi))
}

/// Piecewise-constant image with a few random rectangles plus noise.
pub fn blocky_image(rng: &mut ChaCha8Rng, w: usize, h: usize, noise: f64) -> Image {
    let mut img = Image::filled(w, h, 1, rng.gen_range(20.0..230.0));
    for _ in 0..3 {
        let (r0, c0) = (rng.gen_range(0..h), rng.gen_range(0..w));
        let (r1, c1) = (rng.gen_range(r0..h) + 1, rng.gen_range(c0..w) + 1);
        let v = rng.gen_range(20.0..230.0);
        for r in r0..r1 {
            for c in c0..c1 {
                img.data_mut()[r * w + c] = v;
            }
        }
    }
    add_noise(&img, noise, rng)
}

pub fn add_noise(img: &Image, sigma: f64, rng: &mut ChaCha8Rng) -> Image {
    if sigma == 0.0 {
        return img.clone();
    }
    let normal = Normal::new(0.0, sigma).unwrap();
    let mut out = img.clone();
    for v in out.data_mut() {
        *v += normal.sample(rng);
    }
    out
}

pub fn small_params(alpha: f64, r_d: usize, r_s: usize, lambda: f64) -> FilterParams {
    FilterParams {
        alpha,
        r_d,
        r_s,
        sigma_d: r_d.max(1) as f64,
        sigma_s: r_s.max(1) as f64,
        sigma_g: 10.0,
        lambda_d: lambda,
        lambda_s: lambda,
        ..Default::default()
    }
}

/// Two-plateau depth scene: depth 60 left of the vertical edge, 180 right
/// of it. The guidance follows the edge and carries a checkerboard texture
/// on the left plateau, which the depth does not have.
pub struct DepthScene {
    pub size: usize,
    pub factor: u32,
    pub truth: Image,
    pub guide: Image,
    pub lowres: Image,
}

pub const LOW_DEPTH: f64 = 60.0;
pub const HIGH_DEPTH: f64 = 180.0;

impl DepthScene {
    pub fn new(size: usize, factor: u32, noise: f64, seed: u64) -> Self {
        let edge = size / 2;
        let truth = Image::from_fn(size, size, |_, c| if c < edge { LOW_DEPTH } else { HIGH_DEPTH });
        let guide = Image::from_fn(size, size, |r, c| {
            if c >= edge {
                200.0
            } else if ((r / 4) + (c / 4)) % 2 == 0 {
                50.0
            } else {
                110.0
            }
        });
        let f = factor as usize;
        let (lw, lh) = (size / f, size / f);
        let mut low = Image::from_fn(lw, lh, |r, c| {
            let mut acc = 0.0;
            for y in r * f..(r + 1) * f {
                for x in c * f..(c + 1) * f {
                    acc += truth.at(y, x, 0);
                }
            }
            acc / (f * f) as f64
        });
        low = add_noise(&low, noise, &mut rng(seed));
        Self {
            size,
            factor,
            truth,
            guide,
            lowres: low,
        }
    }

    pub fn edge(&self) -> usize {
        self.size / 2
    }

    /// Bicubic upsampling of the low-resolution depth.
    pub fn bicubic(&self) -> Image {
        bicubic_resample(&self.lowres, self.factor as f64).unwrap()
    }

    /// Distance in columns from pixel column `c` to the edge, measured to
    /// the boundary between columns `edge - 1` and `edge`.
    pub fn edge_distance(&self, c: usize) -> usize {
        let e = self.edge();
        if c < e {
            e - 1 - c
        } else {
            c - e
        }
    }

    /// Inner part of the textured (left) plateau, away from the edge and
    /// the image border.
    pub fn textured_region(&self, r: usize, c: usize) -> bool {
        let e = self.edge();
        r >= 2 && r + 2 < self.size && c >= 2 && c + 4 < e
    }
}

/// Mean forward-difference gradient magnitude over pixels where `mask`
/// holds (both neighbors inside the image).
pub fn mean_gradient(img: &Image, mask: impl Fn(usize, usize) -> bool) -> f64 {
    let (w, h) = (img.width(), img.height());
    let mut acc = 0.0;
    let mut n = 0usize;
    for r in 0..h - 1 {
        for c in 0..w - 1 {
            if mask(r, c) {
                let dx = img.at(r, c + 1, 0) - img.at(r, c, 0);
                let dy = img.at(r + 1, c, 0) - img.at(r, c, 0);
                acc += (dx * dx + dy * dy).sqrt();
                n += 1;
            }
        }
    }
    acc / n as f64
}

pub fn masked_mean(values: &[f64], w: usize, mask: impl Fn(usize, usize) -> bool) -> f64 {
    let mut acc = 0.0;
    let mut n = 0usize;
    for (i, v) in values.iter().enumerate() {
        if mask(i / w, i % w) {
            acc += v;
            n += 1;
        }
    }
    acc / n as f64
}

pub fn masked_variance(img: &Image, mask: impl Fn(usize, usize) -> bool + Copy) -> f64 {
    let mean = masked_mean(img.data(), img.width(), mask);
    let sq: Vec<f64> = img.data().iter().map(|v| (v - mean) * (v - mean)).collect();
    masked_mean(&sq, img.width(), mask)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn bits(values: &[f64]) -> Vec<u64> {
    values.iter().map(|v| v.to_bits()).collect()
}

pub fn normalized(img: &Image) -> Image {
    normalize(img).0
}
