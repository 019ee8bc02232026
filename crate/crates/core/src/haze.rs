//! Haze synthesis with the atmospheric scattering model and the
//! dark-channel-prior estimator.

use serde::{Deserialize, Serialize};

use crate::depth::DepthMap;
use crate::error::{check_size, Error, Result};
use crate::filter::{guided_filter, min_filter};
use crate::raster::{BlindnessMap, Plane, RasterImage};

pub const DEFAULT_OMEGA: f32 = 0.95;
pub const DEFAULT_T_FLOOR: f32 = 0.1;
pub const DEFAULT_PATCH: usize = 15;
pub const DEFAULT_GUIDE_RADIUS: usize = 20;
pub const DEFAULT_GUIDE_EPS: f32 = 1e-3;

/// Global airlight colour.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtmosphericLight(pub [f32; 3]);

impl AtmosphericLight {
    pub fn new(rgb: [f32; 3]) -> Result<Self> {
        if rgb.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::InvalidParameter(format!(
                "atmospheric light channels must lie in [0,1], got {rgb:?}"
            )));
        }
        Ok(Self(rgb))
    }
}

/// Parameters of the dark-channel estimator and of the scattering model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HazeParams {
    /// Attenuation coefficient, 1/m.
    pub beta_atm: f32,
    pub omega: f32,
    /// Odd dark-channel window size.
    pub patch: usize,
    pub t_floor: f32,
    pub guide_radius: usize,
    pub guide_eps: f32,
}

impl Default for HazeParams {
    fn default() -> Self {
        Self {
            beta_atm: 0.05,
            omega: DEFAULT_OMEGA,
            patch: DEFAULT_PATCH,
            t_floor: DEFAULT_T_FLOOR,
            guide_radius: DEFAULT_GUIDE_RADIUS,
            guide_eps: DEFAULT_GUIDE_EPS,
        }
    }
}

impl HazeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta_atm > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "beta_atm must be > 0, got {}",
                self.beta_atm
            )));
        }
        if !(self.omega > 0.0 && self.omega <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "omega must lie in (0,1], got {}",
                self.omega
            )));
        }
        check_patch(self.patch)
    }
}

fn check_patch(patch: usize) -> Result<()> {
    if patch == 0 || patch.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "patch must be odd and >= 1, got {patch}"
        )));
    }
    Ok(())
}

/// `t = exp(-beta * d)` on a dense depth map.
pub fn transmission_from_depth(depth: &DepthMap, beta_atm: f32) -> Result<BlindnessMap> {
    depth.require_dense()?;
    if !(beta_atm > 0.0) {
        return Err(Error::InvalidParameter(format!("beta_atm must be > 0, got {beta_atm}")));
    }
    let t = depth
        .depths()
        .iter()
        .map(|&d| (-(beta_atm as f64) * d as f64).exp() as f32)
        .collect();
    BlindnessMap::from_vec(depth.height(), depth.width(), t)
}

/// Haze amount ground truth, `1 - t`.
pub fn haze_ground_truth(t: &BlindnessMap) -> BlindnessMap {
    BlindnessMap::from_plane_clamped(t.plane().map(|v| 1.0 - v))
}

/// `I = J t + A (1 - t)` per channel.
pub fn synthesize_haze(clean: &RasterImage, t: &BlindnessMap, airlight: AtmosphericLight) -> Result<RasterImage> {
    check_size("clean image / transmission", clean.dims(), t.dims())?;
    let c = clean.channels();
    let data = clean
        .data()
        .chunks_exact(c)
        .zip(t.data())
        .flat_map(|(px, &tv)| {
            px.iter()
                .enumerate()
                .map(move |(ch, &j)| j * tv + airlight.0[ch.min(2)] * (1.0 - tv))
        })
        .collect();
    RasterImage::from_vec_clamped(clean.height(), clean.width(), c, data)
}

/// Recovers the clean radiance given the exact transmission and airlight.
///
/// Pixels with `t <= t_min` are returned as the airlight colour.
pub fn invert_haze(hazy: &RasterImage, t: &BlindnessMap, airlight: AtmosphericLight, t_min: f32) -> Result<Vec<f32>> {
    check_size("hazy image / transmission", hazy.dims(), t.dims())?;
    let c = hazy.channels();
    Ok(hazy
        .data()
        .chunks_exact(c)
        .zip(t.data())
        .flat_map(|(px, &tv)| {
            px.iter().enumerate().map(move |(ch, &i)| {
                let a = airlight.0[ch.min(2)];
                if tv > t_min {
                    (i - a * (1.0 - tv)) / tv
                } else {
                    a
                }
            })
        })
        .collect())
}

/// Minimum over channels, then over the `patch`×`patch` window (edge clamped).
pub fn dark_channel(img: &RasterImage, patch: usize) -> Result<Plane> {
    if img.channels() != 3 {
        return Err(Error::InvalidParameter(format!(
            "dark channel needs a 3-channel image, got {}",
            img.channels()
        )));
    }
    check_patch(patch)?;
    let per_pixel = Plane::from_vec(
        img.height(),
        img.width(),
        img.data().chunks_exact(3).map(|p| p[0].min(p[1]).min(p[2])).collect(),
    )?;
    Ok(min_filter(&per_pixel, patch / 2))
}

/// Airlight from the brightest 0.1% of dark-channel pixels.
///
/// Candidates are ranked by dark-channel value (ties in scan order); among
/// them the pixel with the largest channel sum wins, first occurrence on ties.
pub fn estimate_atmospheric_light(img: &RasterImage) -> Result<AtmosphericLight> {
    estimate_atmospheric_light_with_patch(img, DEFAULT_PATCH)
}

pub fn estimate_atmospheric_light_with_patch(img: &RasterImage, patch: usize) -> Result<AtmosphericLight> {
    let dark = dark_channel(img, patch)?;
    let n = dark.data().len();
    if n == 0 {
        return Err(Error::Empty("image has no pixels".into()));
    }
    let top = ((n as f64 * 0.001).ceil() as usize).max(1);
    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps scan order among equal dark values.
    order.sort_by(|&a, &b| dark.data()[b].total_cmp(&dark.data()[a]));
    let w = img.width();
    let mut best = order[0];
    let mut best_sum = f32::NEG_INFINITY;
    for &i in &order[..top] {
        let s: f32 = img.pixel(i / w, i % w).iter().sum();
        if s > best_sum || (s == best_sum && i < best) {
            best_sum = s;
            best = i;
        }
    }
    let px = img.pixel(best / w, best % w);
    AtmosphericLight::new([px[0], px[1], px[2]])
}

/// Raw dark-channel transmission `1 - omega * dark(I / A)`, before clamping and refinement.
pub fn raw_transmission_dcp(hazy: &RasterImage, airlight: AtmosphericLight, omega: f32, patch: usize) -> Result<Plane> {
    if hazy.channels() != 3 {
        return Err(Error::InvalidParameter(
            "DCP transmission needs a 3-channel image".into(),
        ));
    }
    if airlight.0.iter().any(|&a| a <= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "atmospheric light has a zero channel: {:?}",
            airlight.0
        )));
    }
    let normalized = RasterImage::from_fn(hazy.height(), hazy.width(), 3, |y, x, c| {
        hazy.get(y, x, c) / airlight.0[c]
    })?;
    let dark = dark_channel(&normalized, patch)?;
    Ok(dark.map(|d| 1.0 - omega * d))
}

/// Dark-channel transmission estimate, clamped to `[t_floor, 1]` and
/// refined by a guided filter on the hazy image.
pub fn estimate_transmission_dcp(
    hazy: &RasterImage,
    airlight: AtmosphericLight,
    params: &HazeParams,
) -> Result<BlindnessMap> {
    let raw = raw_transmission_dcp(hazy, airlight, params.omega, params.patch)?;
    let clamped = raw.map(|t| t.clamp(params.t_floor, 1.0));
    let refined = guided_filter(hazy, &clamped, params.guide_radius, params.guide_eps)?;
    Ok(BlindnessMap::from_plane_clamped(
        refined.map(|t| t.clamp(params.t_floor, 1.0)),
    ))
}

/// Full baseline: estimate airlight, transmission, and return the haze amount `1 - t`.
pub fn estimate_haze_amount(hazy: &RasterImage, params: &HazeParams) -> Result<BlindnessMap> {
    let mut airlight = estimate_atmospheric_light_with_patch(hazy, params.patch)?;
    // Black airlight would make I/A undefined; such frames carry no haze signal.
    for a in airlight.0.iter_mut() {
        *a = a.max(1e-3);
    }
    let t = estimate_transmission_dcp(hazy, airlight, params)?;
    Ok(haze_ground_truth(&t))
}
