//! Deterministic toy scenes: piecewise-constant-albedo street views with
//! metric depth, and smooth textures for flow experiments.

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::depth::DepthMap;
use crate::raster::RasterImage;

pub const SKY_DEPTH: f32 = 250.0;
const SKY: [f32; 3] = [0.82, 0.86, 0.92];

/// Saturated albedos: every one has a near-black channel.
const ALBEDOS: [[f32; 3]; 6] = [
    [0.62, 0.34, 0.03],
    [0.05, 0.42, 0.28],
    [0.48, 0.06, 0.09],
    [0.12, 0.18, 0.55],
    [0.40, 0.45, 0.04],
    [0.30, 0.03, 0.38],
];

#[derive(Clone, Copy)]
struct Block {
    x0: f32,
    x1: f32,
    base_row: f32,
    height: f32,
    depth: f32,
    albedo: [f32; 3],
}

/// One RGB frame and its dense depth. `shift_x` translates the foreground
/// blocks horizontally (in pixels) so consecutive frames show motion.
#[derive(Clone, Debug)]
pub struct ToyScene {
    pub image: RasterImage,
    pub depth: DepthMap,
}

fn horizon(h: usize) -> f32 {
    (h as f32 * 0.22).round()
}

fn ground_depth(h: usize, y: f32) -> f32 {
    let dy = y - horizon(h) + 0.5;
    (1.6 * h as f32 / dy.max(0.5)).clamp(2.5, 150.0)
}

fn layout(h: usize, w: usize, seed: u64) -> (usize, Vec<Block>) {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let ground = rng.random_range(0..ALBEDOS.len());
    let n = rng.random_range(2..=3);
    let hz = horizon(h);
    let mut blocks = Vec::with_capacity(n);
    for _ in 0..n {
        let base_row = rng.random_range(hz + 0.25 * h as f32..h as f32 * 0.95);
        let depth = ground_depth(h, base_row);
        let width = rng.random_range(0.15..0.3) * w as f32;
        let x0 = rng.random_range(0.0..(w as f32 - width));
        let height = rng.random_range(0.2..0.4) * h as f32;
        let mut albedo = rng.random_range(0..ALBEDOS.len());
        if albedo == ground {
            albedo = (albedo + 1) % ALBEDOS.len();
        }
        blocks.push(Block {
            x0,
            x1: x0 + width,
            base_row,
            height,
            depth,
            albedo: ALBEDOS[albedo],
        });
    }
    // Painter's order: far blocks first.
    blocks.sort_by(|a, b| b.depth.total_cmp(&a.depth));
    (ground, blocks)
}

/// A street-like scene: sky above the horizon, a receding ground plane and a
/// few constant-albedo blocks standing on it.
pub fn toy_scene(h: usize, w: usize, seed: u64, shift_x: f32) -> ToyScene {
    let (ground, blocks) = layout(h, w, seed);
    let hz = horizon(h);
    let mut colour = vec![0.0f32; h * w * 3];
    let mut depth = vec![0.0f32; h * w];
    for y in 0..h {
        for x in 0..w {
            let (yf, xf) = (y as f32, x as f32);
            let (mut c, mut d) = if yf < hz {
                (SKY, SKY_DEPTH)
            } else {
                (ALBEDOS[ground], ground_depth(h, yf))
            };
            for b in &blocks {
                let inside_x = xf >= b.x0 + shift_x && xf < b.x1 + shift_x;
                let inside_y = yf < b.base_row && yf >= b.base_row - b.height;
                if inside_x && inside_y {
                    c = b.albedo;
                    d = b.depth;
                }
            }
            let i = y * w + x;
            colour[i * 3..i * 3 + 3].copy_from_slice(&c);
            depth[i] = d;
        }
    }
    ToyScene {
        image: RasterImage::new(h, w, 3, colour).expect("albedos lie in [0,1]"),
        depth: DepthMap::from_raw(h, w, depth).expect("consistent size"),
    }
}

/// Smooth random texture sampled at `(x - dx, y - dy)`.
pub fn textured_frame(h: usize, w: usize, seed: u64, dx: f32, dy: f32) -> RasterImage {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let waves: Vec<(f32, f32, f32, f32)> = (0..6)
        .map(|_| {
            let period = rng.random_range(7.0f32..22.0);
            let angle = rng.random_range(0.0f32..std::f32::consts::PI);
            let phase = rng.random_range(0.0f32..std::f32::consts::TAU);
            let amp = rng.random_range(0.04f32..0.1);
            let k = std::f32::consts::TAU / period;
            (k * angle.cos(), k * angle.sin(), phase, amp)
        })
        .collect();
    RasterImage::from_fn(h, w, 3, |y, x, c| {
        let (xf, yf) = (x as f32 - dx, y as f32 - dy);
        let v: f32 = waves
            .iter()
            .map(|&(kx, ky, ph, a)| a * (kx * xf + ky * yf + ph).sin())
            .sum();
        0.5 + v * (1.0 - 0.15 * c as f32)
    })
    .expect("in range after clamping")
}
