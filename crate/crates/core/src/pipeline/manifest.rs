use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::build::sample_rng;
use crate::error::{Error, Result};
use crate::raster::BlindnessType;

/// Format tag; names the portable generator used for every random draw.
pub const MANIFEST_VERSION: &str = "blindmap-manifest/1; rng=xoshiro256++";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// One generated sample. Paths are relative to the manifest's directory,
/// except `clean_path`, which points at the source frame as configured.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    pub blindness_type: BlindnessType,
    pub clean_path: PathBuf,
    pub degraded_path: PathBuf,
    pub gt_map_path: PathBuf,
    pub aux_mask_path: Option<PathBuf>,
    pub params: BTreeMap<String, serde_json::Value>,
    pub split: Split,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: String,
    pub records: Vec<SampleRecord>,
}

impl Default for DatasetManifest {
    fn default() -> Self {
        Self {
            version: MANIFEST_VERSION.to_string(),
            records: Vec::new(),
        }
    }
}

impl DatasetManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        crate::io::ensure_parent(path)?;
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn records_of(&self, t: BlindnessType) -> impl Iterator<Item = &SampleRecord> {
        self.records.iter().filter(move |r| r.blindness_type == t)
    }

    pub fn test_records(&self) -> impl Iterator<Item = &SampleRecord> {
        self.records.iter().filter(|r| r.split == Split::Test)
    }

    /// (train, test) counts for one type.
    pub fn split_counts(&self, t: BlindnessType) -> (usize, usize) {
        self.records_of(t).fold((0, 0), |(tr, te), r| match r.split {
            Split::Train => (tr + 1, te),
            Split::Test => (tr, te + 1),
        })
    }
}

/// Resolves a manifest-relative path.
pub(crate) fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Per-type shuffled split; `ceil(ratio * n)` samples of each type go to training.
pub fn split_dataset(manifest: &DatasetManifest, ratio: f64, seed: u64) -> Result<DatasetManifest> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "split ratio must lie in (0,1), got {ratio}"
        )));
    }
    if manifest.records.is_empty() {
        return Err(Error::Empty("manifest has no records".into()));
    }
    let mut out = manifest.clone();
    for t in BlindnessType::ALL {
        let mut idx: Vec<usize> = (0..out.records.len())
            .filter(|&i| out.records[i].blindness_type == t)
            .collect();
        if idx.is_empty() {
            continue;
        }
        let n_train = ((ratio * idx.len() as f64).ceil() as usize).min(idx.len());
        // Stream index u64::MAX keeps split draws apart from per-sample draws.
        let mut rng = sample_rng(seed, t, u64::MAX);
        idx.shuffle(&mut rng);
        for (k, &i) in idx.iter().enumerate() {
            out.records[i].split = if k < n_train { Split::Train } else { Split::Test };
        }
    }
    Ok(out)
}
