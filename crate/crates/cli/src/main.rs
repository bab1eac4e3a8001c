use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use nalgebra::Vector3;
use rayon::prelude::*;

use gaze_pose::config::{RoiProviderKind, ServoNoise};
use gaze_pose::dataset::{load_meta, write_dataset, Dataset};
use gaze_pose::pipeline::{IntensityRoi, OracleRoi, SidecarRoi};
use gaze_pose::record::{summary_csv_row, SUMMARY_HEADER};
use gaze_pose::synth::{tilted_gaze, Glint, ShadowRamp};
use gaze_pose::{
    run_servo_experiment, summarize, CameraIntrinsics, Config, Error, ErrorKind, EyeScene,
    FrameMeta, FrameRecord, GrayImage, GroundTruth, Result, RoiProvider, SweepSpec, TrackerState,
};

/// Exit status for each error class. Usage errors from argument parsing
/// also exit with 2.
fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Usage => 2,
        ErrorKind::Detection => 3,
        ErrorKind::Fit => 4,
        ErrorKind::Io => 5,
    }
}

#[derive(Parser)]
#[command(
    name = "gaze-pose",
    version,
    about = "3-D iris position and gaze direction from single frames"
)]
struct Cli {
    /// Configuration file (key = value).
    #[arg(long, global = true, env = "GAZE_POSE_CONFIG")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic rotation sweep with ground truth and sidecar boxes.
    Synth(SynthArgs),
    /// Estimate pose for one image and print a JSON record.
    Detect(DetectArgs),
    /// Track every frame of a dataset; write JSON lines and a CSV summary.
    Track(TrackArgs),
    /// Simulate the camera servo over a dataset's sweep; write a CSV report.
    Servo(ServoArgs),
    /// Print or write the configuration.
    #[command(subcommand)]
    Config(ConfigCommand),
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 300)]
    frames: usize,
    /// Rotation axis: x, y, z or "ax,ay,az".
    #[arg(long, default_value = "y")]
    axis: String,
    /// Angle range in degrees, START:END.
    #[arg(long, default_value = "-30:30", allow_hyphen_values = true)]
    range: String,
    /// Frame size, WIDTHxHEIGHT.
    #[arg(long, default_value = "1920x1080")]
    res: String,
    /// Focal length in pixels (default scales with width).
    #[arg(long)]
    focal: Option<f64>,
    /// Upward tilt of the gaze before sweeping, degrees.
    #[arg(long, default_value_t = 30.0, allow_hyphen_values = true)]
    tilt: f64,
    #[arg(long, default_value_t = 1.0)]
    exposure: f64,
    /// Shadow ramp strength in [0, 1].
    #[arg(long, default_value_t = 0.0)]
    shadow: f64,
    /// Shadow ramp direction, "dx,dy".
    #[arg(long, default_value = "1,0", allow_hyphen_values = true)]
    shadow_dir: String,
    /// Add a specular glint on the iris.
    #[arg(long)]
    glints: bool,
    /// Sidecar box margin (default from config).
    #[arg(long)]
    margin: Option<f64>,
}

#[derive(Args)]
struct ProviderArgs {
    /// Override the configured ROI provider.
    #[arg(long, value_parser = ["oracle", "sidecar", "intensity"])]
    provider: Option<String>,
}

impl ProviderArgs {
    fn apply(&self, cfg: &mut Config) -> Result<()> {
        if let Some(p) = &self.provider {
            cfg.roi_provider = p.parse()?;
        }
        Ok(())
    }
}

#[derive(Args)]
struct DetectArgs {
    image: PathBuf,
    /// Ground-truth metadata (default: image path with .json).
    #[arg(long)]
    meta: Option<PathBuf>,
    /// Sidecar box file (default: image path with .txt).
    #[arg(long)]
    sidecar: Option<PathBuf>,
    #[command(flatten)]
    provider: ProviderArgs,
}

#[derive(Args)]
struct TrackArgs {
    dataset: PathBuf,
    /// Per-frame records (default: DATASET/track.jsonl).
    #[arg(long)]
    jsonl: Option<PathBuf>,
    /// Summary table (default: DATASET/track_summary.csv).
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    provider: ProviderArgs,
}

#[derive(Args)]
struct ServoArgs {
    dataset: PathBuf,
    /// Pose sampling interval, e.g. "10" or "10deg-intervals".
    #[arg(long, default_value = "10deg-intervals")]
    at: String,
    /// Override the configured estimator noise.
    #[arg(long, value_parser = ["none", "table"])]
    noise: Option<String>,
    /// Report path (default: DATASET/servo.csv).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ConfigCommand {
    /// Write the default configuration (stdout when no path is given).
    Init {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the effective configuration.
    Show,
}

fn usage(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

fn parse_pair(s: &str, sep: char, what: &str) -> Result<(f64, f64)> {
    let (a, b) = s
        .split_once(sep)
        .ok_or_else(|| usage(format!("{what} must look like A{sep}B, got {s:?}")))?;
    let num = |v: &str| {
        v.trim()
            .parse::<f64>()
            .map_err(|_| usage(format!("bad number {v:?} in {what}")))
    };
    Ok((num(a)?, num(b)?))
}

fn parse_res(s: &str) -> Result<(usize, usize)> {
    let (w, h) = parse_pair(s, 'x', "--res")?;
    if w < 1.0 || h < 1.0 || w.fract() != 0.0 || h.fract() != 0.0 {
        return Err(usage(format!("bad resolution {s:?}")));
    }
    Ok((w as usize, h as usize))
}

fn parse_axis(s: &str) -> Result<Vector3<f64>> {
    match s {
        "x" => Ok(Vector3::x()),
        "y" => Ok(Vector3::y()),
        "z" => Ok(Vector3::z()),
        _ => {
            let parts: Vec<f64> = s
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| usage(format!("bad axis {s:?}")))?;
            match parts[..] {
                [x, y, z] if x != 0.0 || y != 0.0 || z != 0.0 => {
                    Ok(Vector3::new(x, y, z).normalize())
                }
                _ => Err(usage(format!("bad axis {s:?}"))),
            }
        }
    }
}

fn parse_interval(s: &str) -> Result<f64> {
    let trimmed = s.trim_end_matches("-intervals").trim_end_matches("deg");
    match trimmed.parse::<f64>() {
        Ok(v) if v > 0.0 => Ok(v),
        _ => Err(usage(format!("bad interval {s:?}"))),
    }
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    match path {
        Some(p) => Config::load(p),
        None => Ok(Config::default()),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn cmd_synth(args: &SynthArgs, cfg: &Config) -> Result<()> {
    let (width, height) = parse_res(&args.res)?;
    let (start, end) = parse_pair(&args.range, ':', "--range")?;
    let focal = args
        .focal
        .unwrap_or_else(|| SweepSpec::default_focal(width));
    let spec = SweepSpec {
        axis: parse_axis(&args.axis)?,
        intrinsics: CameraIntrinsics::centered(focal, width, height),
        ..SweepSpec::about_y(start, end, args.frames, width, height)
    };
    let shadow = if args.shadow > 0.0 {
        let (dx, dy) = parse_pair(&args.shadow_dir, ',', "--shadow-dir")?;
        Some(ShadowRamp {
            direction: [dx, dy],
            strength: args.shadow,
        })
    } else {
        None
    };
    let glints = if args.glints {
        vec![Glint {
            offset: [0.35, -0.3],
            radius_px: 4.0 * width as f64 / 1920.0,
            intensity: 1.0,
        }]
    } else {
        vec![]
    };
    let template = EyeScene {
        gaze_normal: tilted_gaze(args.tilt),
        exposure: args.exposure,
        shadow,
        glints,
        ..Default::default()
    };
    let manifest = write_dataset(
        &args.out,
        &spec,
        &template,
        args.margin.unwrap_or(cfg.roi_margin),
    )?;
    eprintln!(
        "wrote {} frames to {}",
        manifest.frames.len(),
        args.out.display()
    );
    Ok(())
}

/// Per-frame inputs gathered around an image.
struct FrameContext {
    meta: Option<FrameMeta>,
    sidecar: PathBuf,
}

fn intrinsics_for(
    cfg: &Config,
    fallback: Option<CameraIntrinsics>,
    img: &GrayImage,
) -> CameraIntrinsics {
    cfg.intrinsics.or(fallback).unwrap_or_else(|| {
        CameraIntrinsics::centered(
            SweepSpec::default_focal(img.width()),
            img.width(),
            img.height(),
        )
    })
}

fn provider_for<'a>(
    cfg: &Config,
    ctx: &'a FrameContext,
    cam: &'a CameraIntrinsics,
) -> Result<Box<dyn RoiProvider + 'a>> {
    Ok(match cfg.roi_provider {
        RoiProviderKind::Oracle => {
            let meta = ctx
                .meta
                .as_ref()
                .ok_or_else(|| usage("the oracle provider needs ground-truth metadata"))?;
            Box::new(OracleRoi {
                scene: &meta.scene,
                cam,
                margin: cfg.roi_margin,
            })
        }
        RoiProviderKind::Sidecar => Box::new(SidecarRoi(ctx.sidecar.clone())),
        RoiProviderKind::Intensity => Box::new(IntensityRoi),
    })
}

fn cmd_detect(args: &DetectArgs, cfg: &Config) -> Result<()> {
    let img = GrayImage::load(&args.image)?;
    let meta_path = args
        .meta
        .clone()
        .unwrap_or_else(|| args.image.with_extension("json"));
    // Metadata is optional unless explicitly requested.
    let meta = match load_meta(&meta_path) {
        Ok(m) => Some(m),
        Err(e) if args.meta.is_some() => return Err(e),
        Err(_) => None,
    };
    let ctx = FrameContext {
        sidecar: args
            .sidecar
            .clone()
            .unwrap_or_else(|| args.image.with_extension("txt")),
        meta,
    };
    let cam = intrinsics_for(cfg, ctx.meta.as_ref().map(|m| m.intrinsics), &img);
    let provider = provider_for(cfg, &ctx, &cam)?;
    let frame = args
        .image
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let truth = ctx.meta.as_ref().map(GroundTruth::from);
    let started = Instant::now();
    let (result, err) = TrackerState::new().process_frame_with_error(
        0,
        &img,
        provider.as_ref(),
        &cam,
        &cfg.pipeline(),
        truth.as_ref(),
    );
    let timing = cfg
        .record_timing
        .then(|| started.elapsed().as_secs_f64() * 1e3);
    let line = FrameRecord::from_result(frame, &result, timing).to_json_line()?;
    print!("{line}");
    err.map_or(Ok(()), Err)
}

fn cmd_track(args: &TrackArgs, cfg: &Config) -> Result<()> {
    let ds = Dataset::open(&args.dataset)?;
    let pipeline = cfg.pipeline();
    let mut state = TrackerState::new();
    let mut results = Vec::with_capacity(ds.manifest.frames.len());
    let mut jsonl = String::new();

    // Decode ahead in parallel; tracking itself stays sequential.
    for chunk in ds.manifest.frames.chunks(16) {
        let loaded: Vec<_> = chunk
            .par_iter()
            .map(|f| {
                let img = GrayImage::load(ds.image_path(f));
                let meta = ds.load_meta(f).ok();
                (f, img, meta)
            })
            .collect();
        for (f, img, meta) in loaded {
            let started = Instant::now();
            let result = match img {
                Err(e) => state.record_failure(f.index, &e),
                Ok(img) => {
                    let ctx = FrameContext {
                        meta,
                        sidecar: ds.sidecar_path(f),
                    };
                    let cam = intrinsics_for(cfg, Some(ds.manifest.intrinsics), &img);
                    let truth = ctx.meta.as_ref().map(GroundTruth::from);
                    let provider = provider_for(cfg, &ctx, &cam);
                    let result = match provider {
                        Ok(p) => state.process_frame(
                            f.index,
                            &img,
                            p.as_ref(),
                            &cam,
                            &pipeline,
                            truth.as_ref(),
                        ),
                        Err(e) => state.record_failure(f.index, &e),
                    };
                    result
                }
            };
            let timing = cfg
                .record_timing
                .then(|| started.elapsed().as_secs_f64() * 1e3);
            jsonl += &FrameRecord::from_result(f.stem(), &result, timing).to_json_line()?;
            results.push(result);
        }
    }
    let summary = summarize(&results)?;
    let jsonl_path = args
        .jsonl
        .clone()
        .unwrap_or_else(|| ds.dir.join("track.jsonl"));
    let csv_path = args
        .csv
        .clone()
        .unwrap_or_else(|| ds.dir.join("track_summary.csv"));
    write_file(&jsonl_path, &jsonl)?;
    let label = format!("{}x{}", ds.manifest.width, ds.manifest.height);
    write_file(
        &csv_path,
        &(SUMMARY_HEADER.to_string() + &summary_csv_row(&label, &summary)),
    )?;
    eprintln!(
        "{} frames, {} lost, center error mean {} px, normal error mean {} deg",
        summary.frames,
        summary.lost,
        summary
            .center_error_mean_px
            .map_or("n/a".into(), |v| format!("{v:.3}")),
        summary
            .normal_error_mean_deg
            .map_or("n/a".into(), |v| format!("{v:.3}")),
    );
    Ok(())
}

fn cmd_servo(args: &ServoArgs, cfg: &Config) -> Result<()> {
    let ds = Dataset::open(&args.dataset)?;
    let step = parse_interval(&args.at)?;
    let sweep = &ds.manifest.sweep;
    let (lo, hi) = (
        sweep.angle_start_deg.min(sweep.angle_end_deg),
        sweep.angle_start_deg.max(sweep.angle_end_deg),
    );
    let poses: Vec<f64> = (0..)
        .map(|i| lo + step * i as f64)
        .take_while(|a| *a <= hi + 1e-9)
        .collect();
    let mut cfg = cfg.clone();
    if let Some(n) = &args.noise {
        cfg.servo_noise = if n == "none" {
            ServoNoise::None
        } else {
            ServoNoise::Table
        };
    }
    let template = &ds.manifest.template;
    let exp = gaze_pose::ServoExperiment {
        rotation_axis: sweep.axis,
        eye_radius: template.eye_radius,
        ..cfg.servo_experiment(poses)
    };
    let report = run_servo_experiment(&exp)?;
    let out = args.out.clone().unwrap_or_else(|| ds.dir.join("servo.csv"));
    write_file(&out, &report.to_csv())?;
    eprintln!(
        "{} poses, mean distance {:.3} mm, mean angle error {:.3} deg",
        report.rows.len(),
        report.mean_distance_mm,
        report.mean_angle_error_deg
    );
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli.config.as_deref())?;
    match &cli.command {
        Command::Synth(a) => cmd_synth(a, &cfg),
        Command::Detect(a) => {
            let mut cfg = cfg;
            a.provider.apply(&mut cfg)?;
            cmd_detect(a, &cfg)
        }
        Command::Track(a) => {
            let mut cfg = cfg;
            a.provider.apply(&mut cfg)?;
            cmd_track(a, &cfg)
        }
        Command::Servo(a) => cmd_servo(a, &cfg),
        Command::Config(ConfigCommand::Init { out }) => match out {
            Some(path) => Config::default().save(path),
            None => {
                print!("{}", Config::default().to_text());
                Ok(())
            }
        },
        Command::Config(ConfigCommand::Show) => {
            print!("{}", cfg.to_text());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = std::io::stdout().flush();
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
