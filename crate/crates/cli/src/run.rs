//! Executes a parsed invocation and maps failures to exit codes.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use rgif::image::{denormalize, normalize};
use rgif::io::{load_image, save_image};
use rgif::param_opt::save_lambda_map;
use rgif::params::TONEMAP_ALPHAS;
use rgif::pipelines::{self, PipelineConfig, PipelineOutput};
use rgif::{irls_filter, mean_abs, rgif_optimize, Application, Error, FilterParams, Image};

use crate::args::{Commands, Common, Overrides};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

/// A failure with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io(_) | Error::Format(_) | Error::Decode(_) => EXIT_IO,
            Error::Parameter(_) | Error::Contract(_) => EXIT_USAGE,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn load(path: &Path) -> Result<Image, Failure> {
    load_image(path).map_err(|e| {
        let mut f = Failure::from(e);
        f.message = format!("{}: {}", path.display(), f.message);
        f
    })
}

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure {
        code: EXIT_IO,
        message: format!("{}: {e}", path.display()),
    }
}

/// Worker count: `--threads`, else `RGIF_THREADS`, else rayon's default.
pub fn thread_count(flag: Option<usize>) -> Result<Option<usize>, Failure> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var("RGIF_THREADS") {
            Ok(v) if !v.trim().is_empty() => Some(
                v.trim()
                    .parse()
                    .map_err(|_| Failure::usage(format!("RGIF_THREADS: cannot parse {v:?}")))?,
            ),
            _ => None,
        },
    };
    if n == Some(0) {
        return Err(Failure::usage("thread count must be at least 1"));
    }
    Ok(n)
}

/// Preset < config file < command line.
pub fn resolve_params(
    preset: FilterParams,
    config: Option<&Path>,
    overrides: &Overrides,
) -> Result<FilterParams, Failure> {
    let mut p = preset;
    if let Some(path) = config {
        let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
        p.apply_kv_text(&text)
            .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    }
    for (key, value) in &overrides.0 {
        p.set(key, value).map_err(|e| Failure::usage(format!("--{key}: {e}")))?;
    }
    Ok(p)
}

fn required<'a>(path: &'a Option<PathBuf>, what: &str) -> Result<&'a Path, Failure> {
    path.as_deref()
        .ok_or_else(|| Failure::usage(format!("missing {what} path")))
}

fn print_params(cfg: &PipelineConfig, tonemap: bool) -> Result<(), Failure> {
    let mut out = io::stdout().lock();
    let text = if tonemap {
        // the preset's alpha is the first level; list all three
        let levels: Vec<String> = TONEMAP_ALPHAS.iter().map(|a| a.to_string()).collect();
        format!("# alpha per detail level: {}\n{}", levels.join(", "), cfg.params)
    } else {
        cfg.params.to_string()
    };
    out.write_all(text.as_bytes())
        .map_err(|e| io_failure(Path::new("<stdout>"), e))
}

fn write_outputs(out: &PipelineOutput, output: &Path, common: &Common) -> Result<i32, Failure> {
    save_image(&out.image, output)?;
    if let Some(path) = &common.trace {
        let file = fs::File::create(path).map_err(|e| io_failure(path, e))?;
        let mut w = BufWriter::new(file);
        out.trace
            .write_csv(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| io_failure(path, e))?;
    }
    if let (Some(path), Some(map)) = (&common.lambda_map, &out.lambda_map) {
        save_lambda_map(map, path)?;
    }
    let t = &out.trace;
    if !t.converged || !t.pcg_converged {
        eprintln!(
            "warning: solver did not converge (IRLS stopping rule met: {}, every PCG solve converged: {}); output written",
            t.converged, t.pcg_converged
        );
        return Ok(EXIT_NOT_CONVERGED);
    }
    Ok(EXIT_OK)
}

/// Generic filtering on the normalized scale, optionally with λ-map
/// adaptation.
fn filter(input: &Path, guidance: &Path, adapt: bool, p: &FilterParams) -> Result<PipelineOutput, Failure> {
    let target = load(input)?;
    let guide = load(guidance)?;
    let (tn, info) = normalize(&target);
    let (gn, _) = normalize(&guide);
    let (image, trace, lambda_map) = if adapt {
        let (out, map, trace) = rgif_optimize(&tn, &gn, p, &tn)?;
        (out, trace, Some(map))
    } else {
        let (out, trace) = irls_filter(&tn, &gn, p, &tn)?;
        (out, trace, None)
    };
    Ok(PipelineOutput {
        image: denormalize(&image, &info),
        trace,
        lambda_map,
    })
}

pub fn run(command: Commands) -> Result<i32, Failure> {
    if let Commands::Metrics { a, b } = &command {
        let (a, b) = (load(a)?, load(b)?);
        println!("mae,{}", mean_abs(&a, &b)?);
        return Ok(EXIT_OK);
    }
    let (app, common) = match &command {
        Commands::Filter { common, .. } => (None, common),
        Commands::DepthUpsample { common, .. } => (Some(Application::DepthUpsample), common),
        Commands::FlashNoflash { common, .. } => (Some(Application::FlashNoFlash), common),
        Commands::DetailEnhance { common, .. } => (Some(Application::DetailEnhance), common),
        Commands::Tonemap { common, .. } => (Some(Application::ToneMap), common),
        Commands::TextureSmooth { common, .. } => (Some(Application::TextureSmooth), common),
        Commands::Dejpeg { common, .. } => (Some(Application::Dejpeg), common),
        Commands::Metrics { .. } => unreachable!(),
    };
    let factor = match &command {
        Commands::DepthUpsample { factor, .. } => *factor,
        _ => 1,
    };
    // `filter` has no application; it starts from the library defaults
    let mut cfg = match app {
        Some(app) => PipelineConfig::new(app, factor)?,
        None => PipelineConfig {
            params: FilterParams::default(),
            ..PipelineConfig::new(Application::TextureSmooth, 1)?
        },
    };
    cfg.params = resolve_params(cfg.params, common.config.as_deref(), &common.overrides)?;
    match &command {
        Commands::DetailEnhance { boost, .. } => cfg.boost = *boost,
        Commands::Tonemap {
            gains, compression, ..
        } => {
            cfg.layer_gains = gains
                .as_slice()
                .try_into()
                .map_err(|_| Failure::usage(format!("--gains takes three values, got {}", gains.len())))?;
            cfg.compression = *compression;
        }
        _ => {}
    }
    cfg.validate()?;
    let produces_map = matches!(command, Commands::DepthUpsample { .. } | Commands::Filter { adapt: true, .. });
    if common.lambda_map.is_some() && !produces_map {
        return Err(Failure::usage(
            "--lambda-map needs depth-upsample or filter --adapt",
        ));
    }
    if common.print_params {
        print_params(&cfg, app == Some(Application::ToneMap))?;
        return Ok(EXIT_OK);
    }
    let p = &cfg.params;
    let (out, output) = match &command {
        Commands::Filter { paths, adapt, .. } => {
            let input = required(&paths.input, "input")?;
            let guidance = required(&paths.guidance, "guidance")?;
            let output = required(&paths.output, "output")?;
            (filter(input, guidance, *adapt, p)?, output)
        }
        Commands::DepthUpsample { paths, .. } => {
            let input = required(&paths.input, "depth")?;
            let guidance = required(&paths.guidance, "color")?;
            let output = required(&paths.output, "output")?;
            let (low, color) = (load(input)?, load(guidance)?);
            (pipelines::depth_upsample(&low, &color, cfg.factor, p)?, output)
        }
        Commands::FlashNoflash { paths, .. } => {
            let input = required(&paths.input, "no-flash")?;
            let guidance = required(&paths.guidance, "flash")?;
            let output = required(&paths.output, "output")?;
            let (noflash, flash) = (load(input)?, load(guidance)?);
            (pipelines::flash_noflash(&noflash, &flash, p)?, output)
        }
        Commands::DetailEnhance { paths, .. }
        | Commands::Tonemap { paths, .. }
        | Commands::TextureSmooth { paths, .. }
        | Commands::Dejpeg { paths, .. } => {
            let input = required(&paths.input, "input")?;
            let output = required(&paths.output, "output")?;
            let img = load(input)?;
            let out = match &command {
                Commands::DetailEnhance { .. } => pipelines::detail_enhance(&img, cfg.boost, p)?,
                Commands::Tonemap { .. } => pipelines::tonemap_hdr(&img, cfg.layer_gains, cfg.compression, p)?,
                Commands::TextureSmooth { .. } => pipelines::texture_smooth(&img, p)?,
                _ => pipelines::dejpeg_clipart(&img, p)?,
            };
            (out, output)
        }
        Commands::Metrics { .. } => unreachable!(),
    };
    write_outputs(&out, output, common)
}

/// Thread setting of a command, if it takes one.
pub fn threads_flag(command: &Commands) -> Option<usize> {
    match command {
        Commands::Filter { common, .. }
        | Commands::DepthUpsample { common, .. }
        | Commands::FlashNoflash { common, .. }
        | Commands::DetailEnhance { common, .. }
        | Commands::Tonemap { common, .. }
        | Commands::TextureSmooth { common, .. }
        | Commands::Dejpeg { common, .. } => common.threads,
        Commands::Metrics { .. } => None,
    }
}
