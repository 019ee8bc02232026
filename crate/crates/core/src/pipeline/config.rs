use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::defocus::{DEFAULT_LAYERS, DEFAULT_MAX_DIAMETER};
use crate::error::{Error, Result};
use crate::flow::FlowParams;
use crate::motion::{DEFAULT_AUX_THRESHOLD, DEFAULT_V_MAX};
use crate::raster::BlindnessType;

/// Requested number of samples per blindness type.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TypeCounts {
    #[serde(default)]
    pub clear: usize,
    #[serde(default)]
    pub haze: usize,
    #[serde(default)]
    pub motion: usize,
    #[serde(default)]
    pub defocus: usize,
}

impl TypeCounts {
    pub fn get(&self, t: BlindnessType) -> usize {
        match t {
            BlindnessType::NoBlindness => self.clear,
            BlindnessType::Haze => self.haze,
            BlindnessType::MotionBlur => self.motion,
            BlindnessType::DefocusBlur => self.defocus,
        }
    }

    pub fn set(&mut self, t: BlindnessType, n: usize) {
        match t {
            BlindnessType::NoBlindness => self.clear = n,
            BlindnessType::Haze => self.haze = n,
            BlindnessType::MotionBlur => self.motion = n,
            BlindnessType::DefocusBlur => self.defocus = n,
        }
    }

    pub fn total(&self) -> usize {
        self.clear + self.haze + self.motion + self.defocus
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HazeSettings {
    /// Uniform range for the attenuation coefficient, 1/m.
    pub beta_range: [f32; 2],
}

impl Default for HazeSettings {
    fn default() -> Self {
        Self {
            beta_range: [0.01, 0.1],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DefocusSettings {
    pub layers: usize,
    pub max_diameter: usize,
    /// Focus depth is drawn at a uniform quantile of the frame's depths.
    pub focus_quantile_range: [f64; 2],
    /// The 99th-percentile diameter is drawn as this fraction of `max_diameter`.
    pub p99_fraction_range: [f64; 2],
}

impl Default for DefocusSettings {
    fn default() -> Self {
        Self {
            layers: DEFAULT_LAYERS,
            max_diameter: DEFAULT_MAX_DIAMETER,
            focus_quantile_range: [0.2, 0.8],
            p99_fraction_range: [0.3, 1.0],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MotionSettings {
    pub v_max: f32,
    pub aux_threshold: f32,
    pub flow: FlowParams,
}

impl Default for MotionSettings {
    fn default() -> Self {
        Self {
            v_max: DEFAULT_V_MAX,
            aux_threshold: DEFAULT_AUX_THRESHOLD,
            flow: FlowParams::default(),
        }
    }
}

fn default_split_ratio() -> f64 {
    0.98
}

/// Everything needed to reproduce a corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub rgb_root: PathBuf,
    pub depth_root: PathBuf,
    pub output_root: PathBuf,
    pub counts: TypeCounts,
    #[serde(default = "default_split_ratio")]
    pub split_ratio: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub haze: HazeSettings,
    #[serde(default)]
    pub defocus: DefocusSettings,
    #[serde(default)]
    pub motion: MotionSettings,
}

impl PipelineConfig {
    pub fn new(rgb_root: impl Into<PathBuf>, depth_root: impl Into<PathBuf>, output_root: impl Into<PathBuf>) -> Self {
        Self {
            rgb_root: rgb_root.into(),
            depth_root: depth_root.into(),
            output_root: output_root.into(),
            counts: TypeCounts::default(),
            split_ratio: default_split_ratio(),
            seed: 0,
            haze: HazeSettings::default(),
            defocus: DefocusSettings::default(),
            motion: MotionSettings::default(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return bad(format!("split_ratio must lie in (0,1), got {}", self.split_ratio));
        }
        let [b0, b1] = self.haze.beta_range;
        if !(b0 > 0.0 && b0 <= b1 && b1.is_finite()) {
            return bad(format!(
                "haze.beta_range must satisfy 0 < lo <= hi, got {:?}",
                self.haze.beta_range
            ));
        }
        let d = &self.defocus;
        if d.layers < 2 {
            return bad(format!("defocus.layers must be >= 2, got {}", d.layers));
        }
        if d.max_diameter == 0 || d.max_diameter.is_multiple_of(2) {
            return bad(format!("defocus.max_diameter must be odd, got {}", d.max_diameter));
        }
        for (name, [lo, hi]) in [
            ("defocus.focus_quantile_range", d.focus_quantile_range),
            ("defocus.p99_fraction_range", d.p99_fraction_range),
        ] {
            if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
                return bad(format!(
                    "{name} must be an ordered range inside [0,1], got [{lo}, {hi}]"
                ));
            }
        }
        if !(self.motion.v_max > 0.0) {
            return bad(format!("motion.v_max must be > 0, got {}", self.motion.v_max));
        }
        self.motion
            .flow
            .validate()
            .map_err(|e| Error::Config(format!("motion.flow: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_json_fills_defaults() {
        let cfg: PipelineConfig =
            serde_json::from_str(r#"{"rgb_root":"a","depth_root":"b","output_root":"c","counts":{"haze":2}}"#).unwrap();
        assert_eq!(cfg.split_ratio, 0.98);
        assert_eq!(cfg.counts.haze, 2);
        assert_eq!(cfg.defocus.layers, 16);
        assert_eq!(cfg.defocus.max_diameter, 31);
        assert_eq!(cfg.motion.v_max, 32.0);
        assert_eq!(cfg.motion.flow, FlowParams::default());
        cfg.validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        let mut cfg = PipelineConfig::new("a", "b", "c");
        cfg.split_ratio = 1.0;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let mut cfg = PipelineConfig::new("a", "b", "c");
        cfg.defocus.max_diameter = 30;
        assert!(cfg.validate().is_err());
        assert!(serde_json::from_str::<PipelineConfig>(
            r#"{"rgb_root":"a","depth_root":"b","output_root":"c","counts":{},"bogus":1}"#
        )
        .is_err());
    }
}
