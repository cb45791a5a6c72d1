use rayon::prelude::*;

use crate::error::{contract, Result};
use crate::image::Image;
use crate::kernels::{guidance_distance2, range_weight, spatial_weight};
use crate::params::FilterParams;

/// A stencil offset `(row, col)`.
pub type Offset = (isize, isize);

/// Offsets of a `(2r+1)²` window with positive orientation: `di > 0`, or
/// `di == 0 && dj > 0`. Each unordered neighbor pair appears once.
pub fn half_window(r: usize) -> Vec<Offset> {
    let r = r as isize;
    let mut out = Vec::new();
    for di in 0..=r {
        for dj in -r..=r {
            if di > 0 || dj > 0 {
                out.push((di, dj));
            }
        }
    }
    out
}

/// Neighbor of pixel `(row, col)` at `off`, if inside a `w`×`h` grid.
#[inline]
pub(crate) fn neighbor(row: usize, col: usize, off: Offset, w: usize, h: usize) -> Option<usize> {
    let r = row as isize + off.0;
    let c = col as isize + off.1;
    if r < 0 || c < 0 || r >= h as isize || c >= w as isize {
        None
    } else {
        Some(r as usize * w + c as usize)
    }
}

/// Everything that depends only on the guidance image and the window
/// parameters: data-window spatial weights and one guidance-weight plane per
/// half-window smoothness offset (zero where the neighbor falls outside).
#[derive(Debug, Clone)]
pub struct GuidedContext {
    pub(crate) width: usize,
    pub(crate) height: usize,
    pub(crate) data_window: Vec<(Offset, f64)>,
    pub(crate) offsets: Vec<Offset>,
    pub(crate) guide_planes: Vec<Vec<f64>>,
}

impl GuidedContext {
    pub fn new(guide: &Image, p: &FilterParams) -> Result<Self> {
        p.validate()?;
        let (w, h) = (guide.width(), guide.height());
        if w == 0 || h == 0 {
            return contract("empty guidance image");
        }
        let rd = p.r_d as isize;
        let mut data_window = Vec::new();
        for di in -rd..=rd {
            for dj in -rd..=rd {
                let omega = if p.r_d == 0 {
                    1.0
                } else {
                    spatial_weight(di, dj, p.sigma_d)
                };
                data_window.push(((di, dj), omega));
            }
        }
        let offsets = half_window(p.r_s);
        let guide_planes = offsets
            .iter()
            .map(|&off| {
                let spatial = spatial_weight(off.0, off.1, p.sigma_s);
                let mut plane = vec![0.0; w * h];
                plane
                    .par_chunks_mut(w)
                    .enumerate()
                    .for_each(|(row, out)| {
                        for (col, v) in out.iter_mut().enumerate() {
                            if let Some(j) = neighbor(row, col, off, w, h) {
                                let d2 = guidance_distance2(guide, row * w + col, j);
                                *v = spatial * range_weight(d2, p.sigma_g);
                            }
                        }
                    });
                plane
            })
            .collect();
        Ok(Self {
            width: w,
            height: h,
            data_window,
            offsets,
            guide_planes,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub(crate) fn check_channel(&self, img: &Image, what: &str) -> Result<()> {
        if img.channels() != 1 || img.width() != self.width || img.height() != self.height {
            return contract(format!(
                "{what} must be a single {}x{} channel, got {}x{}x{}",
                self.width,
                self.height,
                img.width(),
                img.height(),
                img.channels()
            ));
        }
        Ok(())
    }
}

/// Error-norm scales used while assembling or evaluating the energy.
#[derive(Debug, Clone, Copy)]
pub enum Scales<'a> {
    Uniform { data: f64, smooth: f64 },
    /// One scale per pixel, shared by the data and smoothness terms.
    PerPixel(&'a [f64]),
}

impl<'a> Scales<'a> {
    pub fn from_params(p: &FilterParams) -> Self {
        Scales::Uniform {
            data: p.lambda_d,
            smooth: p.lambda_s,
        }
    }

    #[inline]
    pub(crate) fn data(&self, i: usize) -> f64 {
        match self {
            Scales::Uniform { data, .. } => *data,
            Scales::PerPixel(v) => v[i],
        }
    }

    #[inline]
    pub(crate) fn smooth(&self, i: usize) -> f64 {
        match self {
            Scales::Uniform { smooth, .. } => *smooth,
            Scales::PerPixel(v) => v[i],
        }
    }

    pub(crate) fn check(&self, n: usize) -> Result<()> {
        match self {
            Scales::Uniform { data, smooth } => {
                if !(*data > 0.0 && *smooth > 0.0) {
                    return contract("error-norm scales must be positive");
                }
            }
            Scales::PerPixel(v) => {
                if v.len() != n {
                    return contract(format!("lambda map has {} entries, expected {n}", v.len()));
                }
                if v.iter().any(|&l| !(l > 0.0)) {
                    return contract("lambda map must be positive everywhere");
                }
            }
        }
        Ok(())
    }
}
