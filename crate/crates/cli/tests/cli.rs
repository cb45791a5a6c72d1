use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rgif::image::Image;
use rgif::io::{load_image, save_image};
use rgif::params::KEYS;
use rgif::{Application, FilterParams};

fn rgif() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_rgif"));
    cmd.env_remove("RGIF_THREADS");
    cmd
}

fn run(args: &[&str]) -> Output {
    rgif().args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn params_from(text: &str) -> FilterParams {
    let mut p = FilterParams::default();
    p.apply_kv_text(text).unwrap();
    p
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn save(&self, name: &str, img: &Image) -> PathBuf {
        let path = self.path(name);
        save_image(img, &path).unwrap();
        path
    }

    /// 4x-downsampled two-plateau depth and its textured color guidance.
    fn depth_pair(&self) -> (PathBuf, PathBuf) {
        let low = Image::from_fn(6, 6, |r, c| if c < 3 { 60.0 + r as f64 } else { 180.0 });
        let color = Image::from_fn(24, 24, |r, c| {
            let v = if c < 12 { 40.0 + 30.0 * ((r / 3 + c / 3) % 2) as f64 } else { 200.0 };
            v
        });
        let color = Image::from_channels(&[color.clone(), color.clone(), color]).unwrap();
        (self.save("low.pgm", &low), self.save("color.ppm", &color))
    }

    fn texture(&self) -> PathBuf {
        let img = Image::from_fn(20, 20, |r, c| {
            let base = if c < 10 { 50.0 } else { 190.0 };
            base + if (r + c) % 2 == 0 { 6.0 } else { -6.0 }
        });
        self.save("tex.pgm", &img)
    }
}

#[test]
fn depth_factor_selects_alpha() {
    for (factor, alpha) in [("2", 0.6), ("4", 0.8), ("8", 0.9), ("16", 0.93)] {
        let out = run(&["depth-upsample", "--factor", factor, "--print-params"]);
        assert_eq!(code(&out), 0);
        assert_eq!(params_from(&stdout(&out)).alpha, alpha);
    }
    let out = run(&["depth-upsample", "--factor", "3", "--print-params"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn printed_params_match_the_presets() {
    let cases = [
        ("depth-upsample", Application::DepthUpsample),
        ("flash-noflash", Application::FlashNoFlash),
        ("detail-enhance", Application::DetailEnhance),
        ("tonemap", Application::ToneMap),
        ("texture-smooth", Application::TextureSmooth),
        ("dejpeg", Application::Dejpeg),
    ];
    for (name, app) in cases {
        let out = run(&[name, "--factor", "8", "--print-params"]);
        let out = if code(&out) == 0 { out } else { run(&[name, "--print-params"]) };
        assert_eq!(code(&out), 0, "{name}");
        let text = stdout(&out);
        assert_eq!(params_from(&text), app.preset(8).unwrap(), "{name}");
        for key in KEYS {
            assert!(text.lines().any(|l| l.starts_with(&format!("{key} = "))), "{name} lacks {key}");
        }
    }
    let tonemap = stdout(&run(&["tonemap", "--print-params"]));
    assert!(tonemap.starts_with("# alpha per detail level: 0.1111111111111111, 0.5, 0.8888888888888888"));
}

#[test]
fn invalid_values_are_usage_errors() {
    let f = Fixture::new();
    let tex = f.texture();
    let out_path = f.path("o.pgm");
    let out = run(&["filter", "--alpha", "1.0", p(&tex), p(&tex), p(&out_path)]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha"));
    assert!(!out_path.exists());
    assert_eq!(code(&run(&["filter", "--r_s", "two", "--print-params"])), 1);
    assert_eq!(code(&run(&["filter", "--gamma", "2", "--print-params"])), 1);
    assert_eq!(code(&run(&["texture-smooth", "--threads", "0", p(&tex), p(&out_path)])), 1);
    assert_eq!(code(&run(&["tonemap", "--gains", "1,2", "--print-params"])), 1);
}

#[test]
fn config_then_command_line_precedence() {
    let f = Fixture::new();
    let cfg = f.path("params.conf");
    fs::write(&cfg, "# tweaks\nlambda_s = 12\nr_s = 2  # narrower\n").unwrap();
    let from_config = params_from(&stdout(&run(&["texture-smooth", "--config", p(&cfg), "--print-params"])));
    assert_eq!((from_config.lambda_s, from_config.r_s), (12.0, 2));
    assert_eq!(from_config.lambda_d, 10.0);
    let out = run(&["texture-smooth", "--config", p(&cfg), "--lambda_s", "20", "--print-params"]);
    let both = params_from(&stdout(&out));
    assert_eq!((both.lambda_s, both.r_s), (20.0, 2));
    let shorthand = params_from(&stdout(&run(&["dejpeg", "--lambda", "inf", "--lambda_s", "4", "--print-params"])));
    assert_eq!((shorthand.lambda_d, shorthand.lambda_s), (f64::INFINITY, 4.0));

    fs::write(&cfg, "lambda_x = 3\n").unwrap();
    assert_eq!(code(&run(&["texture-smooth", "--config", p(&cfg), "--print-params"])), 1);
    assert_eq!(code(&run(&["texture-smooth", "--config", p(&f.path("none.conf")), "--print-params"])), 2);
}

#[test]
fn texture_smooth_writes_output_and_trace() {
    let f = Fixture::new();
    let tex = f.texture();
    let (out_path, trace) = (f.path("smooth.pgm"), f.path("trace.csv"));
    let out = run(&["texture-smooth", "--trace", p(&trace), p(&tex), p(&out_path)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let img = load_image(&out_path).unwrap();
    assert_eq!((img.width(), img.height()), (20, 20));
    let csv = fs::read_to_string(&trace).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("iteration,mad,energy,pcg_iters"));
    let rows: Vec<&str> = lines.collect();
    assert!(!rows.is_empty());
    for (k, row) in rows.iter().enumerate() {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols.len(), 4);
        assert_eq!(cols[0], (k + 1).to_string());
        assert!(cols[1].parse::<f64>().is_ok() && cols[2].parse::<f64>().is_ok());
    }
}

#[test]
fn every_pipeline_runs() {
    let f = Fixture::new();
    let tex = f.texture();
    let rgb = Image::from_fn(12, 12, |r, c| if r < 6 { 40.0 } else if c < 5 { 120.0 } else { 220.0 });
    let rgb = Image::from_channels(&[rgb.clone(), rgb.map(|v| v * 0.5), rgb.map(|v| v + 5.0)]).unwrap();
    let rgb_path = f.save("rgb.ppm", &rgb);
    let hdr = rgb.map(|v| (v / 40.0).exp());
    let hdr_path = f.save("hdr.pfm", &hdr);
    let o = |n: &str| f.path(n);
    let runs: Vec<Vec<String>> = vec![
        vec!["detail-enhance".into(), "--boost".into(), "2".into(), p(&tex).into(), p(&o("d.pgm")).into()],
        vec!["tonemap".into(), "--gains".into(), "1,1.5,2".into(), p(&hdr_path).into(), p(&o("t.png")).into()],
        vec!["dejpeg".into(), p(&rgb_path).into(), p(&o("j.ppm")).into()],
        vec!["flash-noflash".into(), p(&rgb_path).into(), p(&rgb_path).into(), p(&o("f.ppm")).into()],
        vec!["filter".into(), "--r_s".into(), "2".into(), p(&tex).into(), p(&tex).into(), p(&o("g.pfm")).into()],
    ];
    for args in runs {
        let out = rgif().args(&args).output().unwrap();
        assert_eq!(code(&out), 0, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(Path::new(args.last().unwrap()).exists());
    }
}

#[test]
fn missing_paths() {
    let f = Fixture::new();
    let out = run(&["texture-smooth", p(&f.path("absent.png")), p(&f.path("o.png"))]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.png"));
    assert_eq!(code(&run(&["texture-smooth", p(&f.texture())])), 1);
    let out = run(&["texture-smooth", p(&f.texture()), p(&f.path("o.bmp"))]);
    assert_eq!(code(&out), 2);
}

#[test]
fn metrics_prints_mae() {
    let f = Fixture::new();
    let a = f.save("a.pgm", &Image::gray(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap());
    let b = f.save("b.pgm", &Image::gray(2, 2, vec![1.0, 2.0, 3.0, 8.0]).unwrap());
    let out = run(&["metrics", p(&a), p(&a)]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "mae,0\n");
    assert_eq!(stdout(&run(&["metrics", p(&a), p(&b)])), "mae,1\n");
}

#[test]
fn depth_upsample_with_lambda_map() {
    let f = Fixture::new();
    let (low, color) = f.depth_pair();
    let (out_path, map) = (f.path("up.pfm"), f.path("lambda.pfm"));
    let out = run(&[
        "depth-upsample", "--factor", "4", "--r_d", "3", "--r_s", "3", "--lambda-map", p(&map),
        p(&low), p(&color), p(&out_path),
    ]);
    assert!([0, 3].contains(&code(&out)), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(load_image(&out_path).unwrap().width(), 24);
    let lam = load_image(&map).unwrap();
    assert!(lam.data().iter().all(|&v| (0.5..=100.0).contains(&v)));
    // only the adaptive commands produce a map
    let tex = f.texture();
    let out = run(&["texture-smooth", "--lambda-map", p(&map), p(&tex), p(&f.path("x.pgm"))]);
    assert_eq!(code(&out), 1);
}

#[test]
fn non_convergence_exits_3_and_still_writes() {
    let f = Fixture::new();
    let tex = f.texture();
    let out_path = f.path("n.pgm");
    let out = run(&["texture-smooth", "--irls_maxit", "1", "--irls_tol", "0", p(&tex), p(&out_path)]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("did not converge"));
    assert!(out_path.exists());
}

#[test]
fn results_do_not_depend_on_threads() {
    let f = Fixture::new();
    let (low, color) = f.depth_pair();
    let mut outputs = Vec::new();
    for (i, threads) in ["1", "2", "4"].iter().enumerate() {
        let path = f.path(&format!("u{i}.pfm"));
        let out = run(&[
            "depth-upsample", "--factor", "4", "--r_d", "3", "--r_s", "3", "--deterministic",
            "--threads", threads, p(&low), p(&color), p(&path),
        ]);
        assert!([0, 3].contains(&code(&out)));
        outputs.push(fs::read(&path).unwrap());
    }
    let env_path = f.path("env.pfm");
    let out = rgif()
        .env("RGIF_THREADS", "3")
        .args(["depth-upsample", "--factor", "4", "--r_d", "3", "--r_s", "3", p(&low), p(&color), p(&env_path)])
        .output()
        .unwrap();
    assert!([0, 3].contains(&code(&out)));
    outputs.push(fs::read(&env_path).unwrap());
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
    let bad = rgif().env("RGIF_THREADS", "many").args(["dejpeg", "--print-params"]).output().unwrap();
    assert_eq!(code(&bad), 1);
}

#[test]
fn help_exits_zero() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["filter", "--help"])), 0);
    assert_eq!(code(&run(&[])), 1);
}
