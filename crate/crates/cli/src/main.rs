use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use retarget_core::config::RunConfig;
use retarget_core::cuts::{detect_cuts_naive, read_cut_list, read_histograms};
use retarget_core::export::{self, RunMetadata};
use retarget_core::gaze::{load_gaze, FrameGeometry, GazeSet, LoadReport};
use retarget_core::metrics::included_gaze;
use retarget_core::pipeline::run_pipeline;
use retarget_core::synth::{generate, SynthSpec};
use retarget_core::Error;

#[derive(Parser)]
#[command(name = "retarget", version, about = "Gaze-driven video retargeting")]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline from a TOML config.
    Run { config: PathBuf },
    /// Generate synthetic gaze from a TOML regime spec.
    Synth {
        spec: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Included-gaze percentage of a crop path.
    Score {
        gaze: PathBuf,
        crop_path: PathBuf,
        /// Source frame size as WIDTHxHEIGHT.
        #[arg(long)]
        size: String,
        #[arg(long, default_value_t = 25.0)]
        fps: f64,
        /// Write the full per-frame report here instead of a summary on stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Redraw plot.svg for a finished run directory.
    Plot { run_dir: PathBuf },
}

const EXIT_VALIDATION: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_IO: u8 = 4;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e.root() {
                Error::Solver { .. } | Error::Infeasible { .. } => EXIT_SOLVER,
                Error::Io(_) => EXIT_IO,
                _ => EXIT_VALIDATION,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return EXIT_IO;
        }
    }
    EXIT_VALIDATION
}

fn open(path: &Path) -> anyhow::Result<BufReader<File>> {
    let f = File::open(path).map_err(Error::from).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(f))
}

fn load(path: &Path, geometry: FrameGeometry) -> anyhow::Result<(GazeSet, LoadReport)> {
    let (gs, report) = load_gaze(open(path)?, geometry).with_context(|| format!("reading {}", path.display()))?;
    for w in &report.warnings {
        tracing::warn!("{}: {w}", path.display());
    }
    if report.warning_count() > report.warnings.len() {
        tracing::warn!("{} more gaze warnings", report.warning_count() - report.warnings.len());
    }
    Ok((gs, report))
}

fn run(config_path: &Path) -> anyhow::Result<()> {
    let text = fs::read_to_string(config_path)
        .map_err(Error::from)
        .with_context(|| format!("reading {}", config_path.display()))?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    let cfg = RunConfig::from_toml(&text, base)?;
    let mut params = cfg.validate()?;
    params.solver.record_trace = cfg.output.debug;
    let crop = cfg.crop_geometry()?;

    let (gs, report) = load(&cfg.gaze, cfg.geometry)?;
    let original_cuts = match (&cfg.cuts, &cfg.histograms) {
        (Some(p), _) => read_cut_list(open(p)?, cfg.geometry.frames).with_context(|| format!("reading {}", p.display()))?,
        (None, Some(p)) => {
            let hist = read_histograms(open(p)?).with_context(|| format!("reading {}", p.display()))?;
            if hist.len() != cfg.geometry.frames {
                return Err(Error::Validation(format!(
                    "{} histograms for {} frames",
                    hist.len(),
                    cfg.geometry.frames
                ))
                .into());
            }
            detect_cuts_naive(&hist, cfg.cut_threshold)?
        }
        (None, None) => Vec::new(),
    };

    let result = run_pipeline(&gs, &original_cuts, &crop, &params)?;
    let one_based = |v: &[usize]| v.iter().map(|&c| c + 1).collect::<Vec<_>>();
    let meta = RunMetadata {
        gaze_file: cfg.gaze.clone(),
        geometry: cfg.geometry,
        aspect: cfg.aspect.clone(),
        target_width: crop.target_width,
        users: gs.n_users(),
        samples: gs.valid_count(),
        rejected_records: report.rejected,
        invalid_samples: report.invalidated,
        original_cuts: one_based(&original_cuts),
        new_cuts: one_based(&result.path.cuts),
        included_gaze_pct: result.inclusion.included_pct,
        centered_window_included_pct: result.baseline_inclusion.included_pct,
    };
    let files = export::run_outputs(&gs, &result, &meta, &params, &crop, &cfg.output)?;
    export::write_all(&cfg.output_dir, &files).with_context(|| format!("writing {}", cfg.output_dir.display()))?;
    println!(
        "{} frames, {} new cuts, included gaze {:.2}% (centered window {:.2}%), wrote {}",
        gs.n_frames(),
        result.path.cuts.len(),
        result.inclusion.included_pct,
        result.baseline_inclusion.included_pct,
        cfg.output_dir.display()
    );
    Ok(())
}

fn synth(spec_path: &Path, output: &Path, seed: u64) -> anyhow::Result<()> {
    let text = fs::read_to_string(spec_path)
        .map_err(Error::from)
        .with_context(|| format!("reading {}", spec_path.display()))?;
    let spec: SynthSpec = toml::from_str(&text).map_err(|e| Error::Validation(format!("synth spec: {e}")))?;
    let gs = generate(&spec, seed)?;
    export::write_all(
        output.parent().unwrap_or(Path::new(".")),
        &[(file_name(output)?, gs.to_csv().into_bytes())],
    )?;
    Ok(())
}

fn file_name(path: &Path) -> anyhow::Result<String> {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .ok_or_else(|| Error::Validation(format!("{} is not a file path", path.display())).into())
}

fn parse_size(text: &str) -> anyhow::Result<(u32, u32)> {
    let bad = || Error::Validation(format!("size must look like 1366x768, got {text:?}"));
    let (w, h) = text.split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((w.trim().parse().map_err(|_| bad())?, h.trim().parse().map_err(|_| bad())?))
}

fn score(gaze: &Path, crop_path: &Path, size: &str, fps: f64, output: Option<&Path>) -> anyhow::Result<()> {
    let (width, height) = parse_size(size)?;
    let rows = export::read_crop_csv(open(crop_path)?).with_context(|| format!("reading {}", crop_path.display()))?;
    let geometry = FrameGeometry::new(width, height, fps, rows.len())?;
    let (gs, _) = load(gaze, geometry)?;
    let rects: Vec<_> = rows.iter().map(|r| r.rect()).collect();
    let report = included_gaze(&gs, &rects)?;
    match output {
        Some(path) => {
            let body = serde_json::to_string_pretty(&report)? + "\n";
            export::write_all(path.parent().unwrap_or(Path::new(".")), &[(file_name(path)?, body.into_bytes())])?;
        }
        None => println!(
            "{}",
            serde_json::json!({ "included_pct": report.included_pct, "n_samples": report.n_samples })
        ),
    }
    Ok(())
}

fn plot(run_dir: &Path) -> anyhow::Result<()> {
    let meta_path = run_dir.join(export::RUN_JSON);
    let meta: RunMetadata = serde_json::from_reader(open(&meta_path)?)
        .map_err(|e| Error::Validation(format!("{}: {e}", meta_path.display())))?;
    let (gs, _) = load(&meta.gaze_file, meta.geometry)?;
    let r = export::read_path_csv(open(&run_dir.join(export::PATH_CSV))?)?;
    let rows = export::read_crop_csv(open(&run_dir.join(export::CROP_CSV))?)?;
    if r.len() != gs.n_frames() || rows.len() != gs.n_frames() {
        return Err(Error::Validation("run directory files disagree on the frame count".into()).into());
    }
    let x: Vec<f64> = rows.iter().map(|row| row.x).collect();
    let cuts: Vec<usize> = rows.iter().filter(|row| row.is_cut == 1).map(|row| row.frame - 1).collect();
    let svg = export::plot_svg(&gs, &r, &x, &cuts);
    export::write_all(run_dir, &[(export::PLOT_SVG.to_string(), svg.into_bytes())])?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => tracing::Level::WARN,
        1 => tracing::Level::INFO,
        _ => tracing::Level::DEBUG,
    };
    tracing_subscriber::fmt().with_writer(std::io::stderr).with_max_level(level).with_target(false).init();

    let outcome = match &cli.command {
        Command::Run { config } => run(config),
        Command::Synth { spec, output, seed } => synth(spec, output, *seed),
        Command::Score { gaze, crop_path, size, fps, output } => score(gaze, crop_path, size, *fps, output.as_deref()),
        Command::Plot { run_dir } => plot(run_dir),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
