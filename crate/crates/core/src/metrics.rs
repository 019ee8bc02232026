//! Map fusion, binarization and the evaluation metrics.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{check_size, Error, Result};
use crate::raster::{BlindnessMap, Plane};

pub const DEFAULT_ALPHA: f32 = 0.455;
pub const DEFAULT_FUSION_BETA: f32 = 0.1;
pub const DEFAULT_F_BETA: f64 = 1.0;
pub const FPS_WARMUP: usize = 5;
pub const FPS_MIN_FRAMES: usize = 10;

/// Strictly binary per-pixel map.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMap {
    height: usize,
    width: usize,
    data: Vec<bool>,
}

impl BinaryMap {
    pub fn new(height: usize, width: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::SizeMismatch(format!(
                "binary map {height}x{width} needs {} values, got {}",
                height * width,
                data.len()
            )));
        }
        Ok(Self { height, width, data })
    }

    pub fn from_bits(height: usize, width: usize, bits: &[u8]) -> Result<Self> {
        Self::new(height, width, bits.iter().map(|&b| b != 0).collect())
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn complement(&self) -> Self {
        Self {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|b| !b).collect(),
        }
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

/// `b_final = b_mb p_mb + b_db p_db + beta m`, clamped to [0,1].
pub fn fuse_maps(
    motion: &BlindnessMap,
    defocus: &BlindnessMap,
    p_motion: f32,
    p_defocus: f32,
    aux_mask: &BlindnessMap,
    beta_fuse: f32,
) -> Result<BlindnessMap> {
    check_size("fusion motion/defocus", motion.dims(), defocus.dims())?;
    check_size("fusion motion/mask", motion.dims(), aux_mask.dims())?;
    for p in [p_motion, p_defocus] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!(
                "probabilities must lie in [0,1], got {p}"
            )));
        }
    }
    let (h, w) = motion.dims();
    let data = motion
        .data()
        .iter()
        .zip(defocus.data())
        .zip(aux_mask.data())
        .map(|((&mb, &db), &m)| mb * p_motion + db * p_defocus + beta_fuse * m)
        .collect();
    Ok(BlindnessMap::from_plane_clamped(Plane::from_vec(h, w, data)?))
}

/// Threshold `tau = alpha v_max + (1 - alpha) v_min`.
pub fn binarization_threshold(map: &BlindnessMap, alpha: f32) -> f32 {
    let (lo, hi) = map.plane().min_max();
    alpha * hi + (1.0 - alpha) * lo
}

/// Pixel is blind iff its amount is strictly above the map's threshold.
pub fn binarize(map: &BlindnessMap, alpha: f32) -> BinaryMap {
    binarize_plane(map.plane(), alpha)
}

/// [`binarize`] on an unconstrained plane.
pub fn binarize_plane(plane: &Plane, alpha: f32) -> BinaryMap {
    let (lo, hi) = plane.min_max();
    // A constant map has no blind pixels; computing tau through the blend
    // could round below the constant.
    let data = if lo == hi {
        vec![false; plane.data().len()]
    } else {
        let tau = alpha as f64 * hi as f64 + (1.0 - alpha as f64) * lo as f64;
        plane.data().iter().map(|&v| v as f64 > tau).collect()
    };
    BinaryMap {
        height: plane.height(),
        width: plane.width(),
        data,
    }
}

fn check_binary(a: &BinaryMap, b: &BinaryMap) -> Result<()> {
    check_size("binary maps", a.dims(), b.dims())?;
    if a.data.is_empty() {
        return Err(Error::Empty("binary map has no pixels".into()));
    }
    Ok(())
}

/// Fraction of agreeing pixels.
pub fn accuracy(pred: &BinaryMap, gt: &BinaryMap) -> Result<f64> {
    check_binary(pred, gt)?;
    let agree = pred.data.iter().zip(&gt.data).filter(|(a, b)| a == b).count();
    Ok(agree as f64 / pred.data.len() as f64)
}

/// Mean IoU over the blind and clear classes; a class absent from both maps scores 1.
pub fn miou(pred: &BinaryMap, gt: &BinaryMap) -> Result<f64> {
    check_binary(pred, gt)?;
    let iou = |class: bool| {
        let mut inter = 0usize;
        let mut union = 0usize;
        for (&p, &g) in pred.data.iter().zip(&gt.data) {
            let (p, g) = (p == class, g == class);
            inter += (p && g) as usize;
            union += (p || g) as usize;
        }
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    };
    Ok((iou(true) + iou(false)) / 2.0)
}

/// Precision and recall of the blind class.
///
/// Returns `None` for a term whose denominator is zero.
pub fn precision_recall(pred: &BinaryMap, gt: &BinaryMap) -> Result<(Option<f64>, Option<f64>)> {
    check_binary(pred, gt)?;
    let tp = pred.data.iter().zip(&gt.data).filter(|(&p, &g)| p && g).count();
    let npred = pred.count_ones();
    let ngt = gt.count_ones();
    let precision = (npred > 0).then(|| tp as f64 / npred as f64);
    let recall = (ngt > 0).then(|| tp as f64 / ngt as f64);
    Ok((precision, recall))
}

/// `F = (1 + beta) P R / (beta^2 P + R)`.
///
/// Empty prediction and empty ground truth scores 1; if only one side is
/// empty, or nothing overlaps, the score is 0.
pub fn f_measure(pred: &BinaryMap, gt: &BinaryMap, beta: f64) -> Result<f64> {
    let (precision, recall) = precision_recall(pred, gt)?;
    Ok(match (precision, recall) {
        (None, None) => 1.0,
        (Some(p), Some(r)) if p + r > 0.0 => (1.0 + beta) * p * r / (beta * beta * p + r),
        _ => 0.0,
    })
}

/// Mean absolute and mean squared error.
pub fn mae_mse(pred: &BlindnessMap, gt: &BlindnessMap) -> Result<(f64, f64)> {
    check_size("continuous maps", pred.dims(), gt.dims())?;
    let n = pred.data().len();
    if n == 0 {
        return Err(Error::Empty("map has no pixels".into()));
    }
    let (mut abs, mut sq) = (0.0f64, 0.0f64);
    for (&a, &b) in pred.data().iter().zip(gt.data()) {
        let e = (a as f64 - b as f64).abs();
        abs += e;
        sq += e * e;
    }
    Ok((abs / n as f64, sq / n as f64))
}

/// Population variance.
pub fn accuracy_variance(per_image: &[f64]) -> Result<f64> {
    if per_image.is_empty() {
        return Err(Error::Empty("no accuracies".into()));
    }
    let n = per_image.len() as f64;
    // Shift by the first value so identical inputs give exactly zero.
    let shift = per_image[0];
    let mean = per_image.iter().map(|a| a - shift).sum::<f64>() / n;
    Ok(per_image.iter().map(|a| (a - shift - mean).powi(2)).sum::<f64>() / n)
}

/// Frames per second over all but the first [`FPS_WARMUP`] frames.
pub fn measure_fps<T, R>(frames: &[T], mut process: impl FnMut(&T) -> R) -> Result<f64> {
    if frames.len() < FPS_MIN_FRAMES {
        return Err(Error::InvalidParameter(format!(
            "fps measurement needs at least {FPS_MIN_FRAMES} frames, got {}",
            frames.len()
        )));
    }
    for f in &frames[..FPS_WARMUP] {
        std::hint::black_box(process(f));
    }
    let timed = &frames[FPS_WARMUP..];
    let start = Instant::now();
    for f in timed {
        std::hint::black_box(process(f));
    }
    let secs = start.elapsed().as_secs_f64().max(1e-9);
    Ok(timed.len() as f64 / secs)
}

/// Aggregate scores for a set of predictions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub accuracy_variance: f64,
    pub f_measure: f64,
    pub miou: f64,
    pub mae: f64,
    pub mse: f64,
    /// Frames per second of the producing method, when it was timed.
    pub fps: Option<f64>,
    /// Type-classification hit rate, when probabilities were supplied.
    pub classification_accuracy: Option<f64>,
    pub n_samples: usize,
}

/// Scores of one prediction against one ground truth.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleScores {
    pub accuracy: f64,
    pub miou: f64,
    pub f_measure: f64,
    pub mae: f64,
    pub mse: f64,
}

impl SampleScores {
    /// Worst possible scores, used for missing predictions.
    pub const WORST: SampleScores = SampleScores {
        accuracy: 0.0,
        miou: 0.0,
        f_measure: 0.0,
        mae: 1.0,
        mse: 1.0,
    };
}

/// Binarizes both maps with the same `alpha` and scores them.
pub fn score_sample(pred: &BlindnessMap, gt: &BlindnessMap, alpha: f32, f_beta: f64) -> Result<SampleScores> {
    let (mae, mse) = mae_mse(pred, gt)?;
    let bp = binarize(pred, alpha);
    let bg = binarize(gt, alpha);
    Ok(SampleScores {
        accuracy: accuracy(&bp, &bg)?,
        miou: miou(&bp, &bg)?,
        f_measure: f_measure(&bp, &bg, f_beta)?,
        mae,
        mse,
    })
}

/// Per-image means in input order; σ² over the per-image accuracies.
pub fn aggregate(
    scores: &[SampleScores],
    fps: Option<f64>,
    classification_accuracy: Option<f64>,
) -> Result<EvalReport> {
    if scores.is_empty() {
        return Err(Error::Empty("no scored samples".into()));
    }
    let n = scores.len() as f64;
    let mean = |f: fn(&SampleScores) -> f64| scores.iter().map(f).sum::<f64>() / n;
    let accs: Vec<f64> = scores.iter().map(|s| s.accuracy).collect();
    Ok(EvalReport {
        accuracy: mean(|s| s.accuracy),
        accuracy_variance: accuracy_variance(&accs)?,
        f_measure: mean(|s| s.f_measure),
        miou: mean(|s| s.miou),
        mae: mean(|s| s.mae),
        mse: mean(|s| s.mse),
        fps,
        classification_accuracy,
        n_samples: scores.len(),
    })
}

/// One point of the pooled precision-recall sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrPoint {
    pub threshold: f32,
    pub precision: f64,
    pub recall: f64,
}

/// Pooled precision/recall at `steps` uniform thresholds `i / (steps - 1)`.
///
/// Predictions are thresholded at each value; ground truths are binarized
/// once with `alpha`. An undefined precision (no positive predictions) is 1.
pub fn pr_curve(pairs: &[(BlindnessMap, BlindnessMap)], alpha: f32, steps: usize) -> Result<Vec<PrPoint>> {
    if steps < 2 {
        return Err(Error::InvalidParameter("pr curve needs at least 2 thresholds".into()));
    }
    let mut gts = Vec::with_capacity(pairs.len());
    for (pred, gt) in pairs {
        check_size("pr curve maps", pred.dims(), gt.dims())?;
        gts.push(binarize(gt, alpha));
    }
    let total_pos: usize = gts.iter().map(|g| g.count_ones()).sum();
    Ok((0..steps)
        .map(|i| {
            let threshold = i as f32 / (steps - 1) as f32;
            let (mut tp, mut npred) = (0usize, 0usize);
            for ((pred, _), g) in pairs.iter().zip(&gts) {
                for (&p, &t) in pred.data().iter().zip(&g.data) {
                    if p > threshold {
                        npred += 1;
                        tp += t as usize;
                    }
                }
            }
            PrPoint {
                threshold,
                precision: if npred > 0 { tp as f64 / npred as f64 } else { 1.0 },
                recall: if total_pos > 0 {
                    tp as f64 / total_pos as f64
                } else {
                    1.0
                },
            }
        })
        .collect())
}
