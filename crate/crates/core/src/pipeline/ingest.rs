use std::path::{Path, PathBuf};

use walkdir::WalkDir;

use crate::error::{Error, Result};

/// A clean input frame and its aligned depth, if present.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub rgb: PathBuf,
    /// Same relative path under the depth root; `None` when that file is absent.
    pub depth: Option<PathBuf>,
    /// Index of the next frame in the same sequence directory.
    pub successor: Option<usize>,
}

/// Lists every PNG under `rgb_root` in sorted path order.
///
/// Frames sharing a parent directory form one sequence; consecutive names in
/// a sequence are consecutive frames. Depth for `rgb_root/a/b.png` is looked
/// up at `depth_root/a/b.png`.
pub fn discover_frames(rgb_root: &Path, depth_root: &Path) -> Result<Vec<Frame>> {
    if !rgb_root.is_dir() {
        return Err(Error::Config(format!(
            "rgb_root {} is not a directory",
            rgb_root.display()
        )));
    }
    let mut paths: Vec<PathBuf> = WalkDir::new(rgb_root)
        .follow_links(true)
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file())
        .map(|e| e.into_path())
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
        .collect();
    paths.sort();
    let mut frames: Vec<Frame> = paths
        .iter()
        .map(|p| {
            let rel = p.strip_prefix(rgb_root).expect("walked under root");
            let d = depth_root.join(rel);
            Frame {
                rgb: p.clone(),
                depth: d.is_file().then_some(d),
                successor: None,
            }
        })
        .collect();
    for i in 0..frames.len().saturating_sub(1) {
        if frames[i].rgb.parent() == frames[i + 1].rgb.parent() {
            frames[i].successor = Some(i + 1);
        }
    }
    Ok(frames)
}
