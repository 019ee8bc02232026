//! Pixel containers shared by every synthesis and evaluation module.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single-channel field of finite reals with no range constraint.
///
/// Used for intermediate quantities such as dark channels, transmission
/// estimates and circle-of-confusion diameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Plane {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl Plane {
    pub fn filled(height: usize, width: usize, value: f32) -> Self {
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn from_vec(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::SizeMismatch(format!(
                "plane {height}x{width} needs {} values, got {}",
                height * width,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("plane values must be finite".into()));
        }
        Ok(Self { height, width, data })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(f(y, x));
            }
        }
        Self { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f32 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, v: f32) {
        self.data[y * self.width + x] = v;
    }

    /// Sample with edge clamping for out-of-range integer coordinates.
    #[inline]
    pub fn get_clamped(&self, y: isize, x: isize) -> f32 {
        let yy = y.clamp(0, self.height as isize - 1) as usize;
        let xx = x.clamp(0, self.width as isize - 1) as usize;
        self.get(yy, xx)
    }

    /// Bilinear sample at a real-valued position, clamping to the border.
    pub fn sample_bilinear(&self, y: f32, x: f32) -> f32 {
        bilinear(&self.data, self.height, self.width, 1, 0, y, x)
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Plane {
        Plane {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn min_max(&self) -> (f32, f32) {
        self.data
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64
    }
}

/// H×W×C image, channels 1 or 3, values in [0,1], row-major interleaved.
#[derive(Clone, Debug, PartialEq)]
pub struct RasterImage {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl RasterImage {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidParameter(format!(
                "image must have 1 or 3 channels, got {channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::SizeMismatch(format!(
                "image {height}x{width}x{channels} needs {} values, got {}",
                height * width * channels,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "image values must be finite and in [0,1], found {bad}"
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    /// Builds an image, clamping every value into [0,1]. Non-finite values become 0.
    pub fn from_vec_clamped(height: usize, width: usize, channels: usize, mut data: Vec<f32>) -> Result<Self> {
        for v in data.iter_mut() {
            *v = if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
        }
        Self::new(height, width, channels, data)
    }

    pub fn filled(height: usize, width: usize, pixel: &[f32]) -> Result<Self> {
        let channels = pixel.len();
        let mut data = Vec::with_capacity(height * width * channels);
        for _ in 0..height * width {
            data.extend_from_slice(pixel);
        }
        Self::new(height, width, channels, data)
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(y, x, c));
                }
            }
        }
        Self::from_vec_clamped(height, width, channels, data)
    }

    /// Single-channel image from a plane; values are clamped into [0,1].
    pub fn from_plane(plane: &Plane) -> Self {
        Self::from_vec_clamped(plane.height, plane.width, 1, plane.data.clone())
            .expect("plane dimensions are consistent")
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn pixel(&self, y: usize, x: usize) -> &[f32] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn sample_bilinear(&self, y: f32, x: f32, c: usize) -> f32 {
        bilinear(&self.data, self.height, self.width, self.channels, c, y, x)
    }

    pub fn channel(&self, c: usize) -> Plane {
        Plane {
            height: self.height,
            width: self.width,
            data: self.data.iter().skip(c).step_by(self.channels).copied().collect(),
        }
    }

    /// Reassembles an image from per-channel planes, clamping into [0,1].
    pub fn from_channels(planes: &[Plane]) -> Result<Self> {
        let first = planes.first().ok_or_else(|| Error::Empty("no channel planes".into()))?;
        for p in planes {
            crate::error::check_size("channel planes", first.dims(), p.dims())?;
        }
        let n = first.data.len();
        let mut data = Vec::with_capacity(n * planes.len());
        for i in 0..n {
            for p in planes {
                data.push(p.data[i]);
            }
        }
        Self::from_vec_clamped(first.height, first.width, planes.len(), data)
    }

    /// Rec. 601 luma for 3-channel images; the single channel otherwise.
    pub fn luminance(&self) -> Plane {
        if self.channels == 1 {
            return self.channel(0);
        }
        Plane {
            height: self.height,
            width: self.width,
            data: self
                .data
                .chunks_exact(3)
                .map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2])
                .collect(),
        }
    }

    /// Per-pixel mean over channels.
    pub fn channel_mean(&self) -> Plane {
        let inv = 1.0 / self.channels as f32;
        Plane {
            height: self.height,
            width: self.width,
            data: self
                .data
                .chunks_exact(self.channels)
                .map(|p| p.iter().sum::<f32>() * inv)
                .collect(),
        }
    }

    /// Gray images replicated to three channels; RGB returned as is.
    pub fn into_rgb(self) -> RasterImage {
        if self.channels == 3 {
            return self;
        }
        RasterImage {
            height: self.height,
            width: self.width,
            channels: 3,
            data: self.data.iter().flat_map(|&v| [v, v, v]).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &RasterImage) -> f32 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max)
    }
}

/// Per-pixel blindness amount in [0,1].
#[derive(Clone, Debug, PartialEq)]
pub struct BlindnessMap(Plane);

impl BlindnessMap {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self(Plane::filled(height, width, 0.0))
    }

    pub fn new(plane: Plane) -> Result<Self> {
        if let Some(bad) = plane.data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidParameter(format!(
                "blindness amounts must lie in [0,1], found {bad}"
            )));
        }
        Ok(Self(plane))
    }

    pub fn from_vec(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        Self::new(Plane::from_vec(height, width, data)?)
    }

    /// Clamps every value into [0,1].
    pub fn from_plane_clamped(plane: Plane) -> Self {
        Self(plane.map(|v| v.clamp(0.0, 1.0)))
    }

    pub fn plane(&self) -> &Plane {
        &self.0
    }

    pub fn into_plane(self) -> Plane {
        self.0
    }

    pub fn height(&self) -> usize {
        self.0.height
    }

    pub fn width(&self) -> usize {
        self.0.width
    }

    pub fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }

    pub fn data(&self) -> &[f32] {
        &self.0.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f32 {
        self.0.get(y, x)
    }
}

/// Degradation class of a sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum BlindnessType {
    NoBlindness,
    Haze,
    MotionBlur,
    DefocusBlur,
}

impl BlindnessType {
    pub const ALL: [BlindnessType; 4] = [
        BlindnessType::NoBlindness,
        BlindnessType::Haze,
        BlindnessType::MotionBlur,
        BlindnessType::DefocusBlur,
    ];

    pub fn code(self) -> i8 {
        match self {
            BlindnessType::NoBlindness => -1,
            BlindnessType::Haze => 0,
            BlindnessType::MotionBlur => 1,
            BlindnessType::DefocusBlur => 2,
        }
    }

    pub fn from_code(code: i8) -> Option<Self> {
        match code {
            -1 => Some(BlindnessType::NoBlindness),
            0 => Some(BlindnessType::Haze),
            1 => Some(BlindnessType::MotionBlur),
            2 => Some(BlindnessType::DefocusBlur),
            _ => None,
        }
    }

    /// Lower-case name used in sample ids and on the command line.
    pub fn name(self) -> &'static str {
        match self {
            BlindnessType::NoBlindness => "clear",
            BlindnessType::Haze => "haze",
            BlindnessType::MotionBlur => "motion",
            BlindnessType::DefocusBlur => "defocus",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.name() == name)
    }
}

impl fmt::Display for BlindnessType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl From<BlindnessType> for i8 {
    fn from(t: BlindnessType) -> i8 {
        t.code()
    }
}

impl TryFrom<i8> for BlindnessType {
    type Error = String;

    fn try_from(code: i8) -> std::result::Result<Self, String> {
        BlindnessType::from_code(code).ok_or_else(|| format!("unknown blindness type code {code}"))
    }
}

#[inline]
fn bilinear(data: &[f32], h: usize, w: usize, channels: usize, c: usize, y: f32, x: f32) -> f32 {
    let y = y.clamp(0.0, (h - 1) as f32);
    let x = x.clamp(0.0, (w - 1) as f32);
    let y0 = y.floor() as usize;
    let x0 = x.floor() as usize;
    let y1 = (y0 + 1).min(h - 1);
    let x1 = (x0 + 1).min(w - 1);
    let fy = y - y0 as f32;
    let fx = x - x0 as f32;
    let at = |yy: usize, xx: usize| data[(yy * w + xx) * channels + c];
    let top = at(y0, x0) + (at(y0, x1) - at(y0, x0)) * fx;
    let bottom = at(y1, x0) + (at(y1, x1) - at(y1, x0)) * fx;
    top + (bottom - top) * fy
}

/// Align-corners bilinear resampling.
pub fn resize_bilinear(img: &RasterImage, height: usize, width: usize) -> Result<RasterImage> {
    if height == 0 || width == 0 {
        return Err(Error::InvalidParameter(format!(
            "resize target must be non-zero, got {height}x{width}"
        )));
    }
    if (height, width) == img.dims() {
        return Ok(img.clone());
    }
    let scale = |src: usize, dst: usize| {
        if dst > 1 {
            (src - 1) as f32 / (dst - 1) as f32
        } else {
            0.0
        }
    };
    let sy = scale(img.height, height);
    let sx = scale(img.width, width);
    let mut data = Vec::with_capacity(height * width * img.channels);
    for y in 0..height {
        for x in 0..width {
            for c in 0..img.channels {
                data.push(img.sample_bilinear(y as f32 * sy, x as f32 * sx, c));
            }
        }
    }
    RasterImage::from_vec_clamped(height, width, img.channels, data)
}

/// Resizes a blindness map to the given size (align-corners bilinear).
pub fn resize_map(map: &BlindnessMap, height: usize, width: usize) -> Result<BlindnessMap> {
    let img = RasterImage::from_plane(map.plane());
    let out = resize_bilinear(&img, height, width)?;
    Ok(BlindnessMap::from_plane_clamped(out.channel(0)))
}
