#![allow(dead_code)]

use std::path::{Path, PathBuf};

use blindmap::io::{save_depth, save_image, BitDepth};
use blindmap::pipeline::{PipelineConfig, TypeCounts};
use blindmap::scene::toy_scene;

pub const H: usize = 40;
pub const W: usize = 56;

/// Two sequences of toy frames with depth, written under `root/rgb` and
/// `root/depth`. Foreground blocks drift 1.5 px per frame.
pub fn write_corpus(root: &Path, frames_per_seq: usize) -> (PathBuf, PathBuf) {
    let rgb = root.join("rgb");
    let depth = root.join("depth");
    for seq in 0..2u64 {
        for i in 0..frames_per_seq {
            let scene = toy_scene(H, W, 100 + seq, 1.5 * i as f32);
            let name = format!("seq{seq}/{i:06}.png");
            save_image(&scene.image, rgb.join(&name), BitDepth::Eight).unwrap();
            save_depth(&scene.depth, depth.join(&name)).unwrap();
        }
    }
    (rgb, depth)
}

pub fn config(root: &Path, out: &str, per_type: usize) -> PipelineConfig {
    let (rgb, depth) = (root.join("rgb"), root.join("depth"));
    let mut cfg = PipelineConfig::new(rgb, depth, root.join(out));
    cfg.counts = TypeCounts {
        clear: per_type,
        haze: per_type,
        motion: per_type,
        defocus: per_type,
    };
    cfg.split_ratio = 0.5;
    cfg.seed = 7;
    cfg
}

/// Every regular file below `dir` with its bytes, in path order.
pub fn tree_bytes(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let bytes = std::fs::read(&p).unwrap();
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), bytes));
            }
        }
    }
    out.sort();
    out
}
