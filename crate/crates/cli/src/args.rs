//! Command-line grammar.

use std::path::PathBuf;

use clap::{Arg, ArgMatches, Args, Command, FromArgMatches, Parser, Subcommand};
use rgif::params::KEYS;

#[derive(Debug, Parser)]
#[command(name = "rgif", version, about = "Robust guided image filtering")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Commands,
}

#[derive(Debug, Subcommand)]
pub enum Commands {
    /// Filter an image under a guidance image with explicit parameters.
    Filter {
        #[command(flatten)]
        paths: Paths3,
        /// Adapt a per-pixel λ map while filtering (uses beta, tau, lambda0).
        #[arg(long)]
        adapt: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Upsample a low-resolution depth map under a color image.
    DepthUpsample {
        #[command(flatten)]
        paths: Paths3,
        /// Upsampling factor: 2, 4, 8 or 16. Selects the alpha preset.
        #[arg(long)]
        factor: u32,
        #[command(flatten)]
        common: Common,
    },
    /// Denoise a no-flash image guided by a flash (or NIR) image.
    FlashNoflash {
        #[command(flatten)]
        paths: Paths3,
        #[command(flatten)]
        common: Common,
    },
    /// Boost the detail layer of an image.
    DetailEnhance {
        #[command(flatten)]
        paths: Paths2,
        /// Detail gain.
        #[arg(long, default_value_t = rgif::pipelines::DEFAULT_BOOST)]
        boost: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Tone-map an HDR image (PFM) to a display image.
    Tonemap {
        #[command(flatten)]
        paths: Paths2,
        /// Gains of the three detail layers, fine to coarse: `g1,g2,g3`.
        #[arg(long, value_delimiter = ',', default_values_t = [1.0, 1.0, 1.0])]
        gains: Vec<f64>,
        /// Divisor of the base layer's log range (default: map it onto ln 100).
        #[arg(long)]
        compression: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Remove texture while keeping structure edges.
    TextureSmooth {
        #[command(flatten)]
        paths: Paths2,
        #[command(flatten)]
        common: Common,
    },
    /// Remove compression artifacts from clip-art.
    Dejpeg {
        #[command(flatten)]
        paths: Paths2,
        #[command(flatten)]
        common: Common,
    },
    /// Print the mean absolute error between two images as `mae,<value>`.
    Metrics { a: PathBuf, b: PathBuf },
}

/// Target, guidance and output paths. Optional only so that
/// `--print-params` works without them.
#[derive(Debug, Args)]
pub struct Paths3 {
    pub input: Option<PathBuf>,
    pub guidance: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Paths2 {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Flat `key = value` parameter file, applied over the preset.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Write the per-iteration trace as CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Write the adapted λ map (PFM).
    #[arg(long = "lambda-map")]
    pub lambda_map: Option<PathBuf>,
    /// Accepted for scripts; results never depend on the thread count.
    #[arg(long)]
    pub deterministic: bool,
    /// Worker threads (falls back to RGIF_THREADS, then all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Print the effective parameters and exit.
    #[arg(long = "print-params")]
    pub print_params: bool,
    #[command(flatten)]
    pub overrides: Overrides,
}

/// `--<key> <value>` for every parameter key, plus `--lambda` for both
/// error-norm scales. Values are kept as text and parsed by the core.
#[derive(Debug, Default, Clone)]
pub struct Overrides(pub Vec<(String, String)>);

/// Applied before the individual keys so `--lambda_s` can refine `--lambda`.
const SHORTHANDS: &[&str] = &["lambda"];

fn override_keys() -> impl Iterator<Item = &'static str> {
    SHORTHANDS.iter().chain(KEYS).copied()
}

impl FromArgMatches for Overrides {
    fn from_arg_matches(m: &ArgMatches) -> Result<Self, clap::Error> {
        let mut out = Overrides::default();
        out.update_from_arg_matches(m)?;
        Ok(out)
    }

    fn update_from_arg_matches(&mut self, m: &ArgMatches) -> Result<(), clap::Error> {
        for key in override_keys() {
            if let Some(v) = m.get_one::<String>(key) {
                self.0.retain(|(k, _)| k != key);
                self.0.push((key.to_string(), v.clone()));
            }
        }
        Ok(())
    }
}

impl Args for Overrides {
    fn augment_args(mut cmd: Command) -> Command {
        for key in override_keys() {
            let help = if key == "lambda" {
                "Set lambda_d and lambda_s together".to_string()
            } else {
                format!("Override parameter {key}")
            };
            cmd = cmd.arg(
                Arg::new(key)
                    .long(key)
                    .value_name("VALUE")
                    .allow_hyphen_values(true)
                    .help(help)
                    .help_heading("Parameters"),
            );
        }
        cmd
    }

    fn augment_args_for_update(cmd: Command) -> Command {
        Self::augment_args(cmd)
    }
}
