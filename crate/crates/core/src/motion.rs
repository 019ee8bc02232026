//! Flow-based frame interpolation, multi-frame motion-blur averaging and
//! flow-magnitude ground truth.

use std::path::Path;

use image::{DynamicImage, ImageBuffer, ImageFormat, LumaA};

use crate::error::{check_size, Error, Result};
use crate::flow::{dense_flow, FlowField, FlowParams};
use crate::io::decode_png;
use crate::raster::{BlindnessMap, Plane, RasterImage};

pub const DEFAULT_V_MAX: f32 = 32.0;
pub const DEFAULT_AUX_THRESHOLD: f32 = 0.02;
pub const BLUR_FRAMES: usize = 5;

/// Backward warp: `out(x) = img(x - s * flow(x))`, bilinear with border clamping.
pub fn warp(img: &RasterImage, flow: &FlowField, s: f32) -> Result<RasterImage> {
    check_size("warp image / flow", img.dims(), flow.dims())?;
    if s == 0.0 {
        return Ok(img.clone());
    }
    let c = img.channels();
    let mut data = Vec::with_capacity(img.data().len());
    for y in 0..img.height() {
        for x in 0..img.width() {
            let (u, v) = flow.get(y, x);
            let sy = y as f32 - s * v;
            let sx = x as f32 - s * u;
            for ch in 0..c {
                data.push(img.sample_bilinear(sy, sx, ch));
            }
        }
    }
    RasterImage::from_vec_clamped(img.height(), img.width(), c, data)
}

/// Blend positions `i / (n + 1)` for `i = 1..=n`.
pub fn interpolation_times(n: usize) -> Vec<f32> {
    (1..=n).map(|i| i as f32 / (n + 1) as f32).collect()
}

/// `n` intermediate frames from bidirectional flow-warp blending.
pub fn interpolate_frames_with_flow(
    f0: &RasterImage,
    f1: &RasterImage,
    forward: &FlowField,
    backward: &FlowField,
    n: usize,
) -> Result<Vec<RasterImage>> {
    check_size("interpolation frames", f0.dims(), f1.dims())?;
    check_size("forward flow", f0.dims(), forward.dims())?;
    check_size("backward flow", f0.dims(), backward.dims())?;
    if f0.channels() != f1.channels() {
        return Err(Error::SizeMismatch("frames have different channel counts".into()));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("interpolated frame count must be >= 1".into()));
    }
    interpolation_times(n)
        .into_iter()
        .map(|s| {
            let a = warp(f0, forward, s)?;
            let b = warp(f1, backward, 1.0 - s)?;
            let data = a
                .data()
                .iter()
                .zip(b.data())
                .map(|(&p, &q)| (1.0 - s) * p + s * q)
                .collect();
            RasterImage::from_vec_clamped(f0.height(), f0.width(), f0.channels(), data)
        })
        .collect()
}

/// Estimates both flows and returns `n` intermediate frames.
pub fn interpolate_frames(
    f0: &RasterImage,
    f1: &RasterImage,
    n: usize,
    params: &FlowParams,
) -> Result<Vec<RasterImage>> {
    check_size("interpolation frames", f0.dims(), f1.dims())?;
    let forward = dense_flow(f0, f1, params)?;
    let backward = dense_flow(f1, f0, params)?;
    interpolate_frames_with_flow(f0, f1, &forward, &backward, n)
}

/// Pixel-wise mean of exactly five frames.
pub fn synthesize_motion_blur(frames: &[RasterImage]) -> Result<RasterImage> {
    if frames.len() != BLUR_FRAMES {
        return Err(Error::InvalidParameter(format!(
            "motion blur needs exactly {BLUR_FRAMES} frames, got {}",
            frames.len()
        )));
    }
    average_frames(frames)
}

/// Pixel-wise mean of any non-empty frame sequence.
pub fn average_frames(frames: &[RasterImage]) -> Result<RasterImage> {
    let first = frames.first().ok_or_else(|| Error::Empty("no frames".into()))?;
    for f in frames {
        check_size("blur frames", first.dims(), f.dims())?;
        if f.channels() != first.channels() {
            return Err(Error::SizeMismatch("frames have different channel counts".into()));
        }
    }
    let inv = 1.0 / frames.len() as f64;
    let data = (0..first.data().len())
        .map(|i| (frames.iter().map(|f| f.data()[i] as f64).sum::<f64>() * inv) as f32)
        .collect();
    RasterImage::from_vec_clamped(first.height(), first.width(), first.channels(), data)
}

/// `clamp(|flow| / v_max, 0, 1)`.
pub fn motion_ground_truth(flow: &FlowField, v_max: f32) -> Result<BlindnessMap> {
    if !(v_max > 0.0) {
        return Err(Error::InvalidParameter(format!("v_max must be > 0, got {v_max}")));
    }
    let inv = 1.0 / v_max;
    Ok(BlindnessMap::from_plane_clamped(flow.magnitude().map(|m| m * inv)))
}

/// Binary motion-region mask: amount above `threshold`.
pub fn motion_aux_mask(gt: &BlindnessMap, threshold: f32) -> BlindnessMap {
    BlindnessMap::from_plane_clamped(gt.plane().map(|v| if v > threshold { 1.0 } else { 0.0 }))
}

/// Everything produced for one motion-blur sample.
#[derive(Clone, Debug)]
pub struct MotionSample {
    pub blurred: RasterImage,
    pub ground_truth: BlindnessMap,
    pub aux_mask: BlindnessMap,
    pub flow: FlowField,
}

/// Two endpoint frames -> three interpolated frames -> five-frame average,
/// with ground truth from the endpoint flow.
pub fn synthesize_motion_sample(
    f0: &RasterImage,
    f1: &RasterImage,
    params: &FlowParams,
    v_max: f32,
    aux_threshold: f32,
) -> Result<MotionSample> {
    check_size("motion frames", f0.dims(), f1.dims())?;
    let forward = dense_flow(f0, f1, params)?;
    let backward = dense_flow(f1, f0, params)?;
    let mut frames = Vec::with_capacity(BLUR_FRAMES);
    frames.push(f0.clone());
    frames.extend(interpolate_frames_with_flow(
        f0,
        f1,
        &forward,
        &backward,
        BLUR_FRAMES - 2,
    )?);
    frames.push(f1.clone());
    let blurred = synthesize_motion_blur(&frames)?;
    let ground_truth = motion_ground_truth(&forward, v_max)?;
    let aux_mask = motion_aux_mask(&ground_truth, aux_threshold);
    Ok(MotionSample {
        blurred,
        ground_truth,
        aux_mask,
        flow: forward,
    })
}

fn encode_component(c: f32) -> u16 {
    ((c as f64 + 512.0) * 64.0).round().clamp(0.0, 65535.0) as u16
}

fn decode_component(p: u16) -> f32 {
    (p as f64 / 64.0 - 512.0) as f32
}

/// Debug dump: two-plane 16-bit PNG, `round((component + 512) * 64)`.
pub fn save_flow_png(flow: &FlowField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    crate::io::ensure_parent(path)?;
    let raw: Vec<u16> = flow
        .u()
        .iter()
        .zip(flow.v())
        .flat_map(|(&u, &v)| [encode_component(u), encode_component(v)])
        .collect();
    ImageBuffer::<LumaA<u16>, Vec<u16>>::from_raw(flow.width() as u32, flow.height() as u32, raw)
        .expect("buffer size")
        .save_with_format(path, ImageFormat::Png)
        .map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::other(e.to_string()),
        })
}

pub fn load_flow_png(path: impl AsRef<Path>) -> Result<FlowField> {
    let path = path.as_ref();
    match decode_png(path)? {
        DynamicImage::ImageLumaA16(b) => {
            let (w, h) = b.dimensions();
            let raw = b.into_raw();
            let u = raw.iter().step_by(2).map(|&p| decode_component(p)).collect();
            let v = raw.iter().skip(1).step_by(2).map(|&p| decode_component(p)).collect();
            FlowField::new(h as usize, w as usize, u, v)
        }
        _ => Err(Error::UnsupportedFormat {
            path: path.to_path_buf(),
            expected: "two-plane 16-bit PNG",
        }),
    }
}

/// Magnitude as an unconstrained plane, in pixels.
pub fn flow_magnitude(flow: &FlowField) -> Plane {
    flow.magnitude()
}
