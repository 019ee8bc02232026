use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::warn;
use rayon::prelude::*;

use super::manifest::{resolve, DatasetManifest, SampleRecord};
use crate::error::{Error, Result};
use crate::io::load_blindness_map;
use crate::metrics::{
    aggregate, pr_curve, score_sample, EvalReport, PrPoint, SampleScores, DEFAULT_ALPHA, DEFAULT_F_BETA,
};
use crate::raster::{resize_map, BlindnessMap, BlindnessType, Plane};

/// `{id: [p_haze, p_motion, p_defocus]}` inside the predictions directory.
pub const PROBABILITIES_FILE: &str = "probabilities.json";
pub const PR_STEPS: usize = 256;

const TYPED: [BlindnessType; 3] = [
    BlindnessType::Haze,
    BlindnessType::MotionBlur,
    BlindnessType::DefocusBlur,
];

type Scored = (SampleScores, BlindnessMap, BlindnessMap);

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalOptions {
    pub alpha: f32,
    pub f_beta: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            f_beta: DEFAULT_F_BETA,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EvalOutcome {
    pub report: EvalReport,
    /// Test ids without a usable prediction; scored as worst case.
    pub missing_ids: Vec<String>,
    pub pr_curve: Vec<PrPoint>,
}

/// Clear when every probability is below 0.5, otherwise the argmax.
pub fn predicted_type(probs: [f32; 3]) -> BlindnessType {
    if probs.iter().all(|&p| p < 0.5) {
        return BlindnessType::NoBlindness;
    }
    let mut best = 0;
    for i in 1..3 {
        if probs[i] > probs[best] {
            best = i;
        }
    }
    TYPED[best]
}

fn load_probabilities(dir: &Path) -> Result<Option<BTreeMap<String, [f32; 3]>>> {
    let path = dir.join(PROBABILITIES_FILE);
    if !path.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let probs = serde_json::from_str(&text).map_err(|source| Error::Json { path, source })?;
    Ok(Some(probs))
}

/// `<id>.png`, else the per-type map for the record's type; clear records
/// take the pixelwise max over whichever per-type maps exist.
fn prediction_for(dir: &Path, rec: &SampleRecord) -> Result<Option<BlindnessMap>> {
    let direct = dir.join(format!("{}.png", rec.id));
    if direct.exists() {
        return load_blindness_map(direct).map(Some);
    }
    let typed = |t: BlindnessType| dir.join(format!("{}_{}.png", rec.id, t.name()));
    if rec.blindness_type != BlindnessType::NoBlindness {
        let p = typed(rec.blindness_type);
        return if p.exists() {
            load_blindness_map(p).map(Some)
        } else {
            Ok(None)
        };
    }
    let mut acc: Option<BlindnessMap> = None;
    for t in TYPED {
        let p = typed(t);
        if !p.exists() {
            continue;
        }
        let m = load_blindness_map(p)?;
        acc = Some(match acc {
            None => m,
            Some(prev) => {
                let m = resize_map(&m, prev.height(), prev.width())?;
                let data = prev.data().iter().zip(m.data()).map(|(a, b)| a.max(*b)).collect();
                BlindnessMap::new(Plane::from_vec(prev.height(), prev.width(), data)?)?
            }
        });
    }
    Ok(acc)
}

/// Scores the test split of `manifest` against maps in `predictions_root`.
/// Predictions are resized to the ground-truth resolution.
pub fn evaluate_run(
    manifest: &DatasetManifest,
    manifest_dir: &Path,
    predictions_root: &Path,
    opts: &EvalOptions,
) -> Result<EvalOutcome> {
    let tests: Vec<&SampleRecord> = manifest.test_records().collect();
    if tests.is_empty() {
        return Err(Error::Empty("manifest has no test records".into()));
    }
    let probs = load_probabilities(predictions_root)?;

    let scored: Vec<Result<Option<Scored>>> = tests
        .par_iter()
        .map(|rec| {
            let gt = load_blindness_map(resolve(manifest_dir, &rec.gt_map_path))?;
            let pred = match prediction_for(predictions_root, rec) {
                Ok(Some(p)) => p,
                Ok(None) => return Ok(None),
                Err(e) => {
                    warn!("unreadable prediction for {}: {e}", rec.id);
                    return Ok(None);
                }
            };
            let pred = if pred.dims() == gt.dims() {
                pred
            } else {
                resize_map(&pred, gt.height(), gt.width())?
            };
            let s = score_sample(&pred, &gt, opts.alpha, opts.f_beta)?;
            Ok(Some((s, pred, gt)))
        })
        .collect();

    let mut scores = Vec::with_capacity(tests.len());
    let mut pairs = Vec::with_capacity(tests.len());
    let mut missing_ids = Vec::new();
    for (rec, r) in tests.iter().zip(scored) {
        match r? {
            Some((s, pred, gt)) => {
                scores.push(s);
                pairs.push((pred, gt));
            }
            None => {
                warn!("no prediction for test id {}", rec.id);
                missing_ids.push(rec.id.clone());
                scores.push(SampleScores::WORST);
            }
        }
    }

    let classification_accuracy = probs.map(|probs| {
        let hits = tests
            .iter()
            .filter(|rec| {
                probs
                    .get(&rec.id)
                    .is_some_and(|&p| predicted_type(p) == rec.blindness_type)
            })
            .count();
        hits as f64 / tests.len() as f64
    });
    let report = aggregate(&scores, None, classification_accuracy)?;
    Ok(EvalOutcome {
        report,
        missing_ids,
        pr_curve: pr_curve(&pairs, opts.alpha, PR_STEPS)?,
    })
}

/// Writes `report.json` and `pr_curve.csv` into `dir`.
pub fn write_outcome(outcome: &EvalOutcome, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let report = dir.join("report.json");
    let json = serde_json::to_string_pretty(&outcome.report).expect("plain struct") + "\n";
    std::fs::write(&report, json).map_err(|e| Error::io(&report, e))?;
    let csv = dir.join("pr_curve.csv");
    let mut text = String::from("threshold,precision,recall\n");
    for p in &outcome.pr_curve {
        text.push_str(&format!("{},{},{}\n", p.threshold, p.precision, p.recall));
    }
    std::fs::write(&csv, text).map_err(|e| Error::io(&csv, e))?;
    Ok((report, csv))
}
