use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde_json::{json, Value};

use super::config::PipelineConfig;
use super::ingest::{discover_frames, Frame};
use super::manifest::{split_dataset, DatasetManifest, SampleRecord, Split};
use crate::defocus::{coc_model_for_targets, defocus_ground_truth, render_defocus};
use crate::depth::{fill_depth, DepthMap};
use crate::error::{Error, Result};
use crate::haze::{estimate_atmospheric_light, haze_ground_truth, synthesize_haze, transmission_from_depth};
use crate::io::{load_depth, load_image, save_blindness_map, save_image, BitDepth};
use crate::motion::synthesize_motion_sample;
use crate::raster::{BlindnessMap, BlindnessType, RasterImage};

pub const IMAGES_DIR: &str = "images";
pub const MAPS_DIR: &str = "maps";
pub const MASKS_DIR: &str = "masks";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Independent generator stream for sample `index` of type `t`.
pub fn sample_rng(seed: u64, t: BlindnessType, index: u64) -> Xoshiro256PlusPlus {
    let type_salt = ((t.code() as i64 + 2) as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let index_salt = index.wrapping_add(1).wrapping_mul(0xD1B5_4A32_D192_ED03);
    Xoshiro256PlusPlus::seed_from_u64(seed ^ type_salt ^ index_salt.rotate_left(17))
}

struct Job {
    kind: BlindnessType,
    index: usize,
    frame: Option<usize>,
}

struct Generated {
    degraded: RasterImage,
    ground_truth: BlindnessMap,
    aux_mask: Option<BlindnessMap>,
    params: BTreeMap<String, Value>,
}

fn dense_depth_for(frame: &Frame, img: &RasterImage) -> Result<DepthMap> {
    let path = frame
        .depth
        .as_ref()
        .ok_or_else(|| Error::NotFound(PathBuf::from(format!("depth for {}", frame.rgb.display()))))?;
    let depth = fill_depth(&load_depth(path)?)?;
    if depth.dims() != img.dims() {
        return Err(Error::SizeMismatch(format!(
            "depth {:?} vs frame {:?} for {}",
            depth.dims(),
            img.dims(),
            frame.rgb.display()
        )));
    }
    Ok(depth)
}

fn uniform<T>(rng: &mut Xoshiro256PlusPlus, range: [T; 2]) -> T
where
    T: rand::distr::uniform::SampleUniform + PartialOrd + Copy,
{
    rng.random_range(range[0]..=range[1])
}

fn generate(cfg: &PipelineConfig, frames: &[Frame], job: &Job) -> Result<Generated> {
    let frame_idx = job
        .frame
        .ok_or_else(|| Error::NotFound(PathBuf::from("successor frame")))?;
    let frame = &frames[frame_idx];
    let clean = load_image(&frame.rgb)?.into_rgb();
    let mut rng = sample_rng(cfg.seed, job.kind, job.index as u64);
    let mut params = BTreeMap::new();
    match job.kind {
        BlindnessType::NoBlindness => Ok(Generated {
            ground_truth: BlindnessMap::zeros(clean.height(), clean.width()),
            degraded: clean,
            aux_mask: None,
            params,
        }),
        BlindnessType::Haze => {
            let depth = dense_depth_for(frame, &clean)?;
            let airlight = estimate_atmospheric_light(&clean)?;
            let beta = uniform(&mut rng, cfg.haze.beta_range);
            let t = transmission_from_depth(&depth, beta)?;
            let hazy = synthesize_haze(&clean, &t, airlight)?;
            params.insert("beta_atm".into(), json!(beta));
            params.insert("A".into(), json!(airlight.0));
            Ok(Generated {
                degraded: hazy,
                ground_truth: haze_ground_truth(&t),
                aux_mask: None,
                params,
            })
        }
        BlindnessType::DefocusBlur => {
            let depth = dense_depth_for(frame, &clean)?;
            let s = &cfg.defocus;
            let focus_q = uniform(&mut rng, s.focus_quantile_range);
            let p99 = uniform(&mut rng, s.p99_fraction_range);
            let model = coc_model_for_targets(&depth, focus_q, p99, s.max_diameter)?;
            let (blurred, diameters) = render_defocus(&clean, &depth, &model, s.layers)?;
            params.insert("d_f".into(), json!(model.focus_depth));
            params.insert("kappa".into(), json!(model.kappa));
            params.insert("D_max".into(), json!(model.max_diameter));
            params.insert("layers".into(), json!(s.layers));
            params.insert("focus_quantile".into(), json!(focus_q));
            params.insert("p99_fraction".into(), json!(p99));
            Ok(Generated {
                degraded: blurred,
                ground_truth: defocus_ground_truth(&diameters, model.max_diameter),
                aux_mask: None,
                params,
            })
        }
        BlindnessType::MotionBlur => {
            let next_idx = frame
                .successor
                .ok_or_else(|| Error::NotFound(PathBuf::from(format!("successor of {}", frame.rgb.display()))))?;
            let next = load_image(&frames[next_idx].rgb)?.into_rgb();
            let m = &cfg.motion;
            let sample = synthesize_motion_sample(&clean, &next, &m.flow, m.v_max, m.aux_threshold)?;
            params.insert("V_max".into(), json!(m.v_max));
            params.insert("aux_threshold".into(), json!(m.aux_threshold));
            params.insert("flow".into(), serde_json::to_value(m.flow).expect("plain struct"));
            params.insert("successor_path".into(), json!(frames[next_idx].rgb));
            Ok(Generated {
                degraded: sample.blurred,
                ground_truth: sample.ground_truth,
                aux_mask: Some(sample.aux_mask),
                params,
            })
        }
    }
}

fn write_sample(out: &Path, id: &str, frame: &Frame, job: &Job, g: Generated) -> Result<SampleRecord> {
    let file = format!("{id}.png");
    let degraded_path = Path::new(IMAGES_DIR).join(&file);
    let gt_map_path = Path::new(MAPS_DIR).join(&file);
    save_image(&g.degraded, out.join(&degraded_path), BitDepth::Eight)?;
    save_blindness_map(&g.ground_truth, out.join(&gt_map_path))?;
    let aux_mask_path = match &g.aux_mask {
        Some(mask) => {
            let p = Path::new(MASKS_DIR).join(&file);
            save_blindness_map(mask, out.join(&p))?;
            Some(p)
        }
        None => None,
    };
    Ok(SampleRecord {
        id: id.to_string(),
        blindness_type: job.kind,
        clean_path: frame.rgb.clone(),
        degraded_path,
        gt_map_path,
        aux_mask_path,
        params: g.params,
        split: Split::Train,
    })
}

/// Generates the configured corpus under `output_root`, writes
/// `manifest.json` there and returns the manifest.
///
/// A sample whose inputs are missing or unreadable is skipped with a
/// warning; failures to write outputs abort the run.
pub fn build_dataset(config: &PipelineConfig) -> Result<DatasetManifest> {
    config.validate()?;
    let frames = discover_frames(&config.rgb_root, &config.depth_root)?;
    if frames.is_empty() {
        return Err(Error::Config(format!(
            "no PNG frames under {}",
            config.rgb_root.display()
        )));
    }
    let out = &config.output_root;
    for d in [IMAGES_DIR, MAPS_DIR, MASKS_DIR] {
        std::fs::create_dir_all(out.join(d)).map_err(|e| Error::io(out.join(d), e))?;
    }

    let with_successor: Vec<usize> = (0..frames.len()).filter(|&i| frames[i].successor.is_some()).collect();
    let mut jobs = Vec::with_capacity(config.counts.total());
    for kind in BlindnessType::ALL {
        for index in 0..config.counts.get(kind) {
            let frame = if kind == BlindnessType::MotionBlur {
                (!with_successor.is_empty()).then(|| with_successor[index % with_successor.len()])
            } else {
                Some(index % frames.len())
            };
            jobs.push(Job { kind, index, frame });
        }
    }
    info!("generating {} samples from {} frames", jobs.len(), frames.len());

    let results: Vec<Result<Option<SampleRecord>>> = jobs
        .par_iter()
        .map(|job| {
            let id = format!("{}_{:06}", job.kind.name(), job.index);
            match generate(config, &frames, job) {
                Ok(g) => {
                    let frame = &frames[job.frame.expect("generated samples have a frame")];
                    write_sample(out, &id, frame, job, g).map(Some)
                }
                Err(e) => {
                    warn!("skipping {id}: {e}");
                    Ok(None)
                }
            }
        })
        .collect();

    let mut manifest = DatasetManifest::default();
    for r in results {
        if let Some(rec) = r? {
            manifest.records.push(rec);
        }
    }
    if !manifest.records.is_empty() {
        manifest = split_dataset(&manifest, config.split_ratio, config.seed)?;
    } else {
        warn!("no samples were generated");
    }
    manifest.save(out.join(MANIFEST_FILE))?;
    Ok(manifest)
}
