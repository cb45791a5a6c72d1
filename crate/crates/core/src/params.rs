//! Filter parameters, their flat `key = value` text form, and the compiled
//! per-application presets.

use std::fmt;
use std::str::FromStr;

use crate::error::{parameter, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FilterParams {
    /// Smoothness/data balance, in `[0, 1)`.
    pub alpha: f64,
    /// Data window radius; 0 gives a pixel-to-pixel data term.
    pub r_d: usize,
    /// Smoothness window radius, at least 1.
    pub r_s: usize,
    pub sigma_d: f64,
    pub sigma_s: f64,
    pub sigma_g: f64,
    /// Error-norm scale of the data term; `f64::INFINITY` makes it quadratic.
    pub lambda_d: f64,
    pub lambda_s: f64,
    pub beta: f64,
    pub tau: f64,
    pub lambda0: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub pcg_tol: f64,
    pub pcg_maxit: usize,
    pub irls_tol: f64,
    pub irls_maxit: usize,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self {
            alpha: 0.9,
            r_d: 1,
            r_s: 1,
            sigma_d: 1.0,
            sigma_s: 1.0,
            sigma_g: 10.0,
            lambda_d: 10.0,
            lambda_s: 10.0,
            beta: 0.0,
            tau: 0.0,
            lambda0: 10.0,
            lambda_min: 0.5,
            lambda_max: 100.0,
            pcg_tol: 1e-8,
            pcg_maxit: 1000,
            irls_tol: 0.1,
            irls_maxit: 20,
        }
    }
}

/// Every recognized key, in serialization order.
pub const KEYS: &[&str] = &[
    "alpha",
    "r_d",
    "r_s",
    "sigma_d",
    "sigma_s",
    "sigma_g",
    "lambda_d",
    "lambda_s",
    "beta",
    "tau",
    "lambda0",
    "lambda_min",
    "lambda_max",
    "pcg_tol",
    "pcg_maxit",
    "irls_tol",
    "irls_maxit",
];

fn parse_real(key: &str, value: &str) -> Result<f64> {
    let v = value.trim();
    let parsed = match v.to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" | "∞" => Ok(f64::INFINITY),
        _ => f64::from_str(v),
    };
    parsed.map_err(|_| Error::Parameter(format!("{key}: cannot parse {value:?} as a number")))
}

fn parse_count(key: &str, value: &str) -> Result<usize> {
    usize::from_str(value.trim())
        .map_err(|_| Error::Parameter(format!("{key}: cannot parse {value:?} as a count")))
}

fn fmt_real(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v}")
    }
}

impl FilterParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && !v.is_nan() {
                Ok(())
            } else {
                parameter(format!("{name} must be > 0, got {v}"))
            }
        };
        let finite_positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                parameter(format!("{name} must be finite and > 0, got {v}"))
            }
        };
        if !(0.0..1.0).contains(&self.alpha) {
            return parameter(format!("alpha must lie in [0, 1), got {}", self.alpha));
        }
        if self.r_s < 1 {
            return parameter("r_s must be at least 1");
        }
        if self.r_d > 0 {
            finite_positive("sigma_d", self.sigma_d)?;
        }
        finite_positive("sigma_s", self.sigma_s)?;
        finite_positive("sigma_g", self.sigma_g)?;
        positive("lambda_d", self.lambda_d)?;
        positive("lambda_s", self.lambda_s)?;
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return parameter(format!("beta must be >= 0, got {}", self.beta));
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return parameter(format!("tau must be >= 0, got {}", self.tau));
        }
        finite_positive("lambda_min", self.lambda_min)?;
        finite_positive("lambda_max", self.lambda_max)?;
        if self.lambda_min > self.lambda_max {
            return parameter("lambda_min exceeds lambda_max");
        }
        finite_positive("lambda0", self.lambda0)?;
        finite_positive("pcg_tol", self.pcg_tol)?;
        if self.pcg_maxit == 0 || self.irls_maxit == 0 {
            return parameter("iteration limits must be at least 1");
        }
        if !(self.irls_tol >= 0.0) {
            return parameter(format!("irls_tol must be >= 0, got {}", self.irls_tol));
        }
        Ok(())
    }

    /// Sets one field from its text form. Unknown keys are rejected; the
    /// record is not re-validated.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "alpha" => self.alpha = parse_real(key, value)?,
            "r_d" => self.r_d = parse_count(key, value)?,
            "r_s" => self.r_s = parse_count(key, value)?,
            "sigma_d" => self.sigma_d = parse_real(key, value)?,
            "sigma_s" => self.sigma_s = parse_real(key, value)?,
            "sigma_g" => self.sigma_g = parse_real(key, value)?,
            "lambda_d" => self.lambda_d = parse_real(key, value)?,
            "lambda_s" => self.lambda_s = parse_real(key, value)?,
            "lambda" => {
                let v = parse_real(key, value)?;
                self.lambda_d = v;
                self.lambda_s = v;
            }
            "beta" => self.beta = parse_real(key, value)?,
            "tau" => self.tau = parse_real(key, value)?,
            "lambda0" => self.lambda0 = parse_real(key, value)?,
            "lambda_min" => self.lambda_min = parse_real(key, value)?,
            "lambda_max" => self.lambda_max = parse_real(key, value)?,
            "pcg_tol" => self.pcg_tol = parse_real(key, value)?,
            "pcg_maxit" => self.pcg_maxit = parse_count(key, value)?,
            "irls_tol" => self.irls_tol = parse_real(key, value)?,
            "irls_maxit" => self.irls_maxit = parse_count(key, value)?,
            _ => return parameter(format!("unknown parameter {key:?}")),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let v = match key {
            "alpha" => fmt_real(self.alpha),
            "r_d" => self.r_d.to_string(),
            "r_s" => self.r_s.to_string(),
            "sigma_d" => fmt_real(self.sigma_d),
            "sigma_s" => fmt_real(self.sigma_s),
            "sigma_g" => fmt_real(self.sigma_g),
            "lambda_d" => fmt_real(self.lambda_d),
            "lambda_s" => fmt_real(self.lambda_s),
            "beta" => fmt_real(self.beta),
            "tau" => fmt_real(self.tau),
            "lambda0" => fmt_real(self.lambda0),
            "lambda_min" => fmt_real(self.lambda_min),
            "lambda_max" => fmt_real(self.lambda_max),
            "pcg_tol" => fmt_real(self.pcg_tol),
            "pcg_maxit" => self.pcg_maxit.to_string(),
            "irls_tol" => fmt_real(self.irls_tol),
            "irls_maxit" => self.irls_maxit.to_string(),
            _ => return None,
        };
        Some(v)
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_kv_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Parameter(format!("line {}: expected key = value", n + 1))
            })?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }
}

impl fmt::Display for FilterParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for key in KEYS {
            writeln!(f, "{key} = {}", self.get(key).unwrap())?;
        }
        Ok(())
    }
}

/// Application recipes with compiled parameter presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Application {
    DepthUpsample,
    FlashNoFlash,
    DetailEnhance,
    ToneMap,
    TextureSmooth,
    Dejpeg,
}

/// Smoothness weights of the three tone-mapping decomposition levels.
pub const TONEMAP_ALPHAS: [f64; 3] = [1.0 / 9.0, 1.0 / 2.0, 8.0 / 9.0];

/// Depth-upsampling balance for a supported factor.
pub fn depth_alpha(factor: u32) -> Result<f64> {
    match factor {
        2 => Ok(0.6),
        4 => Ok(0.8),
        8 => Ok(0.9),
        16 => Ok(0.93),
        _ => parameter(format!("depth upsampling factor must be 2, 4, 8 or 16, got {factor}")),
    }
}

impl Application {
    pub const ALL: [Application; 6] = [
        Application::DepthUpsample,
        Application::FlashNoFlash,
        Application::DetailEnhance,
        Application::ToneMap,
        Application::TextureSmooth,
        Application::Dejpeg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Application::DepthUpsample => "depth-upsample",
            Application::FlashNoFlash => "flash-noflash",
            Application::DetailEnhance => "detail-enhance",
            Application::ToneMap => "tonemap",
            Application::TextureSmooth => "texture-smooth",
            Application::Dejpeg => "dejpeg",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == name)
    }

    /// Preset parameters. `factor` selects the depth balance and is ignored
    /// elsewhere; tone mapping reports its first level (see
    /// [`TONEMAP_ALPHAS`]).
    pub fn preset(self, factor: u32) -> Result<FilterParams> {
        let base = FilterParams::default();
        let p = match self {
            Application::DepthUpsample => FilterParams {
                alpha: depth_alpha(factor)?,
                r_d: 7,
                r_s: 7,
                sigma_d: 7.0,
                sigma_s: 7.0,
                sigma_g: 10.0,
                lambda_d: 7.0,
                lambda_s: 7.0,
                beta: 0.5,
                tau: 0.3,
                lambda0: 7.0,
                ..base
            },
            Application::FlashNoFlash => FilterParams {
                alpha: 0.7,
                r_d: 1,
                r_s: 4,
                sigma_d: 1.0,
                sigma_s: 4.0,
                sigma_g: 5.0,
                lambda_d: 5.0,
                lambda_s: 5.0,
                lambda0: 5.0,
                ..base
            },
            Application::DetailEnhance => FilterParams {
                alpha: 0.8,
                r_d: 0,
                r_s: 3,
                // unused with r_d = 0
                sigma_d: 1.0,
                sigma_s: 3.0,
                sigma_g: 10.0,
                lambda_d: f64::INFINITY,
                lambda_s: 10.0,
                lambda0: 10.0,
                ..base
            },
            Application::ToneMap => FilterParams {
                alpha: TONEMAP_ALPHAS[0],
                r_d: 1,
                r_s: 6,
                sigma_d: 1.0,
                sigma_s: 6.0,
                sigma_g: 20.0,
                lambda_d: 20.0,
                lambda_s: 20.0,
                lambda0: 20.0,
                ..base
            },
            Application::TextureSmooth | Application::Dejpeg => FilterParams {
                alpha: 0.9,
                r_d: 5,
                r_s: 5,
                sigma_d: 5.0,
                sigma_s: 5.0,
                sigma_g: 15.0,
                lambda_d: 10.0,
                lambda_s: 10.0,
                lambda0: 10.0,
                ..base
            },
        };
        Ok(p)
    }
}
