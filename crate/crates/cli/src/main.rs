//! `iris` command-line front end.
//!
//! Any pipeline tunable can be overridden with `--<key> <value>` (dashes or
//! underscores) anywhere on the command line; overrides apply after
//! `--config`. Deciding commands exit 0 for authentic, 1 for impostor and
//! 2 on any error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use iris_core::encoding::IrisCode;
use iris_core::imaging::{pgm, GrayImage};
use iris_core::matching::{align_and_match, Decision, MatchResult};
use iris_core::normalization::{equalize_strip, rubber_sheet};
use iris_core::pipeline::store::{read_rotation, write_rotation};
use iris_core::pipeline::{
    calibrate_threshold, run_pipeline, segment, PipelineConfig, PipelineOutput, ScoreHistogram, TemplateStore,
};
use iris_core::synth::{render, EyeSpec};

#[derive(Parser)]
#[command(name = "iris", version, about = "Iris segmentation, encoding and matching")]
struct Cli {
    /// `key=value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the run's diagnostics as JSON to this path (`-` for stdout).
    #[arg(long, global = true)]
    diagnostics: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic eye.
    Synth(SynthArgs),
    /// Find the pupil, iris ellipse and eyelids.
    Segment {
        image: PathBuf,
        /// Pupil mask as a 0/255 PGM.
        #[arg(long)]
        mask: Option<PathBuf>,
        /// Pupil circle as `cx cy r`.
        #[arg(long)]
        circle: Option<PathBuf>,
        /// Ellipse accumulator heat map as PGM.
        #[arg(long)]
        dump_accumulator: Option<PathBuf>,
    },
    /// Unwrap the iris into the 64x256 strip.
    Normalize {
        image: PathBuf,
        #[arg(long)]
        strip: PathBuf,
        /// Validity mask as a 0/255 PGM.
        #[arg(long)]
        mask: PathBuf,
    },
    /// Encode an image into an .irc file.
    Encode {
        image: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "")]
        subject: String,
        #[arg(long, default_value = "")]
        capture: String,
    },
    /// Add an image to a template store.
    Enroll {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        subject: String,
        #[arg(long)]
        capture: String,
        image: PathBuf,
    },
    /// Check an image against every capture of a claimed subject.
    Verify {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        subject: String,
        image: PathBuf,
    },
    /// Compare two images or .irc files.
    Match { first: PathBuf, second: PathBuf },
    /// Score all template pairs of a store.
    Evaluate {
        #[arg(long)]
        store: PathBuf,
        /// Histogram CSV `bin_low,genuine_count,impostor_count`.
        #[arg(long)]
        histogram: Option<PathBuf>,
    },
    /// Derive the decision threshold from a store's score histograms.
    Calibrate {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        histogram: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SynthArgs {
    /// Identity seed: texture and, unless --plain, geometry and lids.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Eye rotation in degrees, clockwise on screen.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    rotation: f64,
    /// Uniform noise amplitude in gray levels.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Seed for the noise only, so captures of one identity differ.
    #[arg(long, default_value_t = 0)]
    noise_seed: u64,
    /// Centered, lid-free eye of fixed geometry.
    #[arg(long)]
    plain: bool,
    #[arg(long)]
    out: PathBuf,
    /// Ground truth as `key=value` lines.
    #[arg(long)]
    truth: Option<PathBuf>,
}

/// Splits `--<key> <value>` pipeline overrides out of the raw arguments.
fn take_overrides(args: Vec<String>) -> Result<(Vec<String>, Vec<(String, String)>)> {
    let mut rest = Vec::with_capacity(args.len());
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let key = arg.strip_prefix("--").map(|k| k.replace('-', "_"));
        match key {
            Some(k) if PipelineConfig::KEYS.contains(&k.as_str()) => {
                let value = it.next().with_context(|| format!("--{k} needs a value"))?;
                overrides.push((k, value));
            }
            _ => rest.push(arg),
        }
    }
    Ok((rest, overrides))
}

fn load_config(path: Option<&Path>, overrides: &[(String, String)]) -> Result<PipelineConfig> {
    let mut cfg = match path {
        Some(p) => PipelineConfig::load(p).with_context(|| format!("config {}", p.display()))?,
        None => PipelineConfig::default(),
    };
    for (k, v) in overrides {
        cfg.set(k, v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn read_image(path: &Path) -> Result<GrayImage> {
    pgm::read(path).with_context(|| format!("reading {}", path.display()))
}

fn pipeline(path: &Path, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    run_pipeline(&read_image(path)?, cfg).with_context(|| format!("processing {}", path.display()))
}

fn emit_json(target: Option<&Path>, json: &str) -> Result<()> {
    match target {
        None => Ok(()),
        Some(p) if p.as_os_str() == "-" => {
            println!("{json}");
            Ok(())
        }
        Some(p) => std::fs::write(p, format!("{json}\n")).with_context(|| format!("writing {}", p.display())),
    }
}

fn report(m: &MatchResult) -> ExitCode {
    println!(
        "HD={:.4} N={} shift={} decision={}",
        m.hd, m.compared_bits, m.shift_applied, m.decision
    );
    match m.decision {
        Decision::Authentic => ExitCode::from(0),
        Decision::Impostor => ExitCode::from(1),
    }
}

/// A code and its rotation, from an .irc file (plus sidecar) or an image.
fn load_code(path: &Path, cfg: &PipelineConfig) -> Result<(IrisCode, Option<f64>)> {
    if path.extension().is_some_and(|e| e == "irc") {
        let code = IrisCode::read(path).with_context(|| format!("reading {}", path.display()))?;
        Ok((code, read_rotation(path)?))
    } else {
        let out = pipeline(path, cfg)?;
        Ok((out.code.clone(), out.rotation()))
    }
}

fn write_histogram(path: Option<&Path>, hist: &ScoreHistogram) -> Result<()> {
    if let Some(p) = path {
        std::fs::write(p, hist.to_csv()).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn synth(args: &SynthArgs) -> Result<()> {
    let mut spec = if args.plain {
        EyeSpec::new(args.seed)
    } else {
        EyeSpec::new(args.seed).random_identity(&mut ChaCha8Rng::seed_from_u64(args.seed))
    };
    spec.rotation = args.rotation.to_radians();
    spec.noise = args.noise;
    let (img, truth) = render(&spec, args.noise_seed)?;
    pgm::write(&img, &args.out)?;
    if let Some(p) = &args.truth {
        std::fs::write(p, truth.to_text())?;
    }
    Ok(())
}

fn run(cli: Cli, cfg: PipelineConfig) -> Result<ExitCode> {
    let diagnostics = cli.diagnostics.as_deref();
    match cli.command {
        Command::Synth(args) => synth(&args)?,
        Command::Segment {
            image,
            mask,
            circle,
            dump_accumulator,
        } => {
            let seg = segment(&read_image(&image)?, &cfg)?;
            let g = &seg.geometry;
            let line = format!("{} {} {}", g.pupil.cx, g.pupil.cy, g.pupil.radius);
            println!("pupil {line}");
            println!("ellipse a={} b={}", g.ellipse.a, g.ellipse.b);
            for (name, lid) in [("upper", &g.upper_lid), ("lower", &g.lower_lid)] {
                match lid {
                    Some(p) => println!("{name} d={} tilt={}", p.d, p.tilt().to_degrees()),
                    None => println!("{name} none"),
                }
            }
            if let Some(p) = mask {
                pgm::write(&seg.pupil_mask.to_image(), p)?;
            }
            if let Some(p) = circle {
                std::fs::write(p, format!("{line}\n"))?;
            }
            if let Some(p) = dump_accumulator {
                pgm::write(&seg.accumulator.to_heatmap(), p)?;
            }
            emit_json(diagnostics, &serde_json::to_string_pretty(g)?)?;
        }
        Command::Normalize { image, strip, mask } => {
            let img = read_image(&image)?;
            let seg = segment(&img, &cfg)?;
            let s = equalize_strip(&rubber_sheet(&img, &seg.geometry)?);
            pgm::write(&s.to_image(), strip)?;
            pgm::write(&s.mask_image(), mask)?;
            emit_json(diagnostics, &serde_json::to_string_pretty(&seg.geometry)?)?;
        }
        Command::Encode {
            image,
            out,
            subject,
            capture,
        } => {
            let run = pipeline(&image, &cfg)?;
            run.code.clone().with_labels(subject, capture).write(&out)?;
            write_rotation(&out, run.rotation())?;
            emit_json(diagnostics, &run.diagnostics.to_json())?;
        }
        Command::Enroll {
            store,
            subject,
            capture,
            image,
        } => {
            let run = pipeline(&image, &cfg)?;
            let path = TemplateStore::open(&store)?.enroll(&subject, &capture, &run.code, run.rotation())?;
            println!("enrolled {}", path.display());
            emit_json(diagnostics, &run.diagnostics.to_json())?;
        }
        Command::Verify { store, subject, image } => {
            let store = TemplateStore::open(&store)?;
            let run = pipeline(&image, &cfg)?;
            let v = store.verify(&subject, &run.code, run.rotation(), &cfg.layout, &cfg.matching)?;
            emit_json(diagnostics, &run.diagnostics.to_json())?;
            return Ok(report(&v.result));
        }
        Command::Match { first, second } => {
            let (a, ta) = load_code(&first, &cfg)?;
            let (b, tb) = load_code(&second, &cfg)?;
            let m = align_and_match(&a, ta, &b, tb, &cfg.layout, &cfg.matching)?;
            emit_json(diagnostics, &serde_json::to_string_pretty(&m)?)?;
            return Ok(report(&m));
        }
        Command::Evaluate { store, histogram } => {
            let scores = TemplateStore::open(&store)?.evaluate(&cfg.layout, &cfg.matching);
            let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
            println!(
                "genuine={} impostor={} skipped={} genuine_mean={:.4} impostor_mean={:.4}",
                scores.genuine.len(),
                scores.impostor.len(),
                scores.skipped,
                mean(&scores.genuine),
                mean(&scores.impostor)
            );
            write_histogram(
                histogram.as_deref(),
                &ScoreHistogram::from_scores(&scores.genuine, &scores.impostor),
            )?;
            emit_json(diagnostics, &serde_json::to_string_pretty(&scores)?)?;
        }
        Command::Calibrate { store, histogram } => {
            let scores = TemplateStore::open(&store)?.evaluate(&cfg.layout, &cfg.matching);
            let cal = calibrate_threshold(&scores.genuine, &scores.impostor)?;
            println!("threshold={:.4}", cal.threshold);
            write_histogram(histogram.as_deref(), &cal.histogram)?;
            emit_json(diagnostics, &serde_json::to_string_pretty(&cal)?)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let result = (|| {
        let (args, overrides) = take_overrides(std::env::args().collect())?;
        let cli = Cli::try_parse_from(args).map_err(|e| {
            if !e.use_stderr() {
                // --help and --version
                let _ = e.print();
                std::process::exit(0);
            }
            anyhow::Error::from(e)
        })?;
        let cfg = load_config(cli.config.as_deref(), &overrides)?;
        run(cli, cfg)
    })();
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
