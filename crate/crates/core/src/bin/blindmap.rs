use std::path::{Path, PathBuf};
use std::process::ExitCode;

use blindmap::haze::{
    estimate_atmospheric_light, estimate_haze_amount, synthesize_haze, transmission_from_depth, HazeParams,
};
use blindmap::io::{load_image, save_blindness_map};
use blindmap::metrics::{measure_fps, score_sample, FPS_MIN_FRAMES, FPS_WARMUP};
use blindmap::motion::{motion_ground_truth, DEFAULT_V_MAX};
use blindmap::pipeline::{
    build_dataset, evaluate_run, run_baselines, split_dataset, write_outcome, DatasetManifest, EvalOptions,
    PipelineConfig,
};
use blindmap::scene::toy_scene;
use blindmap::{dense_flow, BlindnessType, Error, FlowParams, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "blindmap",
    version,
    about = "Blindness-map dataset synthesis, estimation and evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a corpus and its manifest from a pipeline config.
    Synth {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config output root.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated subset of clear,haze,motion,defocus.
        #[arg(long, value_delimiter = ',')]
        types: Option<Vec<String>>,
    },
    /// Re-split an existing manifest.
    Split {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 0.98)]
        ratio: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output manifest path; defaults to overwriting the input.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a predictions directory against the test split.
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = blindmap::metrics::DEFAULT_ALPHA)]
        alpha: f32,
    },
    /// Run the dark-channel haze baseline on the test split.
    Baseline {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Throughput of haze estimation plus scoring on synthetic frames.
    Bench {
        #[arg(long, default_value_t = 256)]
        size: usize,
        #[arg(long, default_value_t = 50)]
        frames: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run a classical estimator on one image and save the blindness map.
    Estimate {
        #[arg(value_enum)]
        kind: EstimateKind,
        image: PathBuf,
        /// Following frame, required for motion.
        #[arg(long)]
        next: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimateKind {
    Haze,
    Motion,
}

fn manifest_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth {
            config,
            seed,
            out,
            types,
        } => {
            let mut cfg = PipelineConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(o) = out {
                cfg.output_root = o;
            }
            if let Some(names) = types {
                let keep = names
                    .iter()
                    .map(|n| BlindnessType::from_name(n).ok_or_else(|| Error::Config(format!("unknown type {n:?}"))))
                    .collect::<Result<Vec<_>>>()?;
                for t in BlindnessType::ALL {
                    if !keep.contains(&t) {
                        cfg.counts.set(t, 0);
                    }
                }
            }
            let manifest = build_dataset(&cfg)?;
            let counts: serde_json::Map<_, _> = BlindnessType::ALL
                .iter()
                .map(|&t| {
                    let (train, test) = manifest.split_counts(t);
                    (t.name().to_string(), json!({"train": train, "test": test}))
                })
                .collect();
            print_json(&json!({"output_root": cfg.output_root, "records": manifest.records.len(), "splits": counts}));
        }
        Command::Split {
            manifest,
            ratio,
            seed,
            out,
        } => {
            let m = DatasetManifest::load(&manifest)?;
            let split = split_dataset(&m, ratio, seed)?;
            split.save(out.as_ref().unwrap_or(&manifest))?;
        }
        Command::Evaluate {
            manifest,
            predictions,
            out,
            alpha,
        } => {
            let m = DatasetManifest::load(&manifest)?;
            let opts = EvalOptions {
                alpha,
                ..EvalOptions::default()
            };
            let outcome = evaluate_run(&m, &manifest_dir(&manifest), &predictions, &opts)?;
            write_outcome(&outcome, &out)?;
            print_json(&json!({"report": outcome.report, "missing_ids": outcome.missing_ids}));
        }
        Command::Baseline { manifest, out } => {
            let m = DatasetManifest::load(&manifest)?;
            let reports = run_baselines(&m, &manifest_dir(&manifest), &out, &EvalOptions::default())?;
            let path = out.join("baselines.json");
            let text = serde_json::to_string_pretty(&reports).expect("serializable") + "\n";
            std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
            print_json(&serde_json::to_value(&reports).expect("serializable"));
        }
        Command::Bench { size, frames, seed } => {
            let n = frames.max(FPS_WARMUP + FPS_MIN_FRAMES);
            let params = HazeParams::default();
            let mut inputs = Vec::with_capacity(n);
            for i in 0..n as u64 {
                let scene = toy_scene(size, size, seed.wrapping_add(i), 0.0);
                let t = transmission_from_depth(&scene.depth, 0.02)?;
                let a = estimate_atmospheric_light(&scene.image)?;
                let hazy = synthesize_haze(&scene.image, &t, a)?;
                inputs.push((hazy, blindmap::haze::haze_ground_truth(&t)));
            }
            let fps = measure_fps(&inputs, |(img, gt)| {
                let map = estimate_haze_amount(img, &params)?;
                score_sample(&map, gt, blindmap::metrics::DEFAULT_ALPHA, 1.0)
            })?;
            print_json(&json!({"size": size, "frames": n, "fps": fps}));
        }
        Command::Estimate { kind, image, next, out } => {
            let img = load_image(&image)?.into_rgb();
            let map = match kind {
                EstimateKind::Haze => estimate_haze_amount(&img, &HazeParams::default())?,
                EstimateKind::Motion => {
                    let next = next.ok_or_else(|| Error::InvalidParameter("motion estimation needs --next".into()))?;
                    let f1 = load_image(&next)?.into_rgb();
                    let flow = dense_flow(&img, &f1, &FlowParams::default())?;
                    motion_ground_truth(&flow, DEFAULT_V_MAX)?
                }
            };
            save_blindness_map(&map, &out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({"error": e.kind(), "message": e.to_string()}));
            ExitCode::FAILURE
        }
    }
}
