use std::path::Path;

use log::info;
use rayon::prelude::*;
use serde::Serialize;

use super::evaluate::{evaluate_run, EvalOptions};
use super::manifest::{resolve, DatasetManifest};
use crate::error::{Error, Result};
use crate::haze::{estimate_haze_amount, HazeParams};
use crate::io::{load_blindness_map, load_image, save_blindness_map};
use crate::metrics::{measure_fps, score_sample, EvalReport, FPS_MIN_FRAMES, FPS_WARMUP};
use crate::raster::BlindnessType;

#[derive(Clone, Debug, Serialize)]
pub struct BaselineReport {
    pub name: String,
    pub report: EvalReport,
}

/// Dark-channel haze estimation on the hazy and clear test records, each
/// scored separately. Predicted maps go to `out_dir/<name>/<id>.png`.
pub fn run_baselines(
    manifest: &DatasetManifest,
    manifest_dir: &Path,
    out_dir: &Path,
    opts: &EvalOptions,
) -> Result<Vec<BaselineReport>> {
    let params = HazeParams::default();
    let mut reports = Vec::new();
    for (name, kind) in [
        ("dcp_haze", BlindnessType::Haze),
        ("dcp_clear", BlindnessType::NoBlindness),
    ] {
        let subset = DatasetManifest {
            version: manifest.version.clone(),
            records: manifest
                .test_records()
                .filter(|r| r.blindness_type == kind)
                .cloned()
                .collect(),
        };
        if subset.records.is_empty() {
            info!("{name}: no test records, skipped");
            continue;
        }
        let pred_dir = out_dir.join(name);
        std::fs::create_dir_all(&pred_dir).map_err(|e| Error::io(&pred_dir, e))?;
        subset.records.par_iter().try_for_each(|rec| -> Result<()> {
            let img = load_image(resolve(manifest_dir, &rec.degraded_path))?;
            let map = estimate_haze_amount(&img, &params)?;
            save_blindness_map(&map, pred_dir.join(format!("{}.png", rec.id)))
        })?;
        let mut outcome = evaluate_run(&subset, manifest_dir, &pred_dir, opts)?;

        let mut frames = Vec::new();
        for rec in &subset.records {
            frames.push((
                load_image(resolve(manifest_dir, &rec.degraded_path))?,
                load_blindness_map(resolve(manifest_dir, &rec.gt_map_path))?,
            ));
        }
        let want = FPS_WARMUP + FPS_MIN_FRAMES;
        let cycled: Vec<_> = frames.iter().cycle().take(want.max(frames.len())).collect();
        let fps = measure_fps(&cycled, |(img, gt)| {
            let map = estimate_haze_amount(img, &params)?;
            score_sample(&map, gt, opts.alpha, opts.f_beta)
        })?;
        outcome.report.fps = Some(fps);
        info!(
            "{name}: mae {:.4} over {} samples, {fps:.1} fps",
            outcome.report.mae, outcome.report.n_samples
        );
        reports.push(BaselineReport {
            name: name.to_string(),
            report: outcome.report,
        });
    }
    if reports.is_empty() {
        return Err(Error::Empty("no hazy or clear test records for the baselines".into()));
    }
    Ok(reports)
}
