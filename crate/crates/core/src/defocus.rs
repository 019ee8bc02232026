//! Depth-layered defocus rendering with occlusion-aware compositing.
//!
//! Layers are indexed far to near: layer `K-1` is the nearest. Each layer's
//! contribution is `((A_k L + A*_k L*_k) * h_k) M_k` with the occlusion term
//! `M_k = prod_{k' > k} (1 - A_k' * h_k')`, so nearer layers carve out the
//! blurred farther ones. The sum is divided by the same composite evaluated
//! on an all-ones image, which makes constant images exact fixed points and
//! keeps every output pixel a convex combination of input pixels.

use serde::{Deserialize, Serialize};

use crate::depth::{propagate_nearest, DepthMap};
use crate::error::{check_size, Error, Result};
use crate::raster::{BlindnessMap, Plane, RasterImage};

pub const DEFAULT_LAYERS: usize = 16;
pub const DEFAULT_MAX_DIAMETER: usize = 31;

/// Thin-lens style circle-of-confusion law, `D = kappa * |1/d_f - 1/d|` clamped to `[0, D_max]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CocModel {
    /// In-focus depth, metres.
    pub focus_depth: f32,
    /// Pixel-metres.
    pub kappa: f32,
    /// Largest diameter in pixels; odd.
    pub max_diameter: usize,
}

impl CocModel {
    pub fn new(focus_depth: f32, kappa: f32, max_diameter: usize) -> Result<Self> {
        let m = Self {
            focus_depth,
            kappa,
            max_diameter,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.focus_depth > 0.0 && self.focus_depth.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "focus depth must be > 0, got {}",
                self.focus_depth
            )));
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "kappa must be >= 0, got {}",
                self.kappa
            )));
        }
        if self.max_diameter == 0 || self.max_diameter.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "max diameter must be odd and >= 1, got {}",
                self.max_diameter
            )));
        }
        Ok(())
    }

    pub fn diameter_at_inverse_depth(&self, inv_depth: f64) -> f32 {
        let d = self.kappa as f64 * (1.0 / self.focus_depth as f64 - inv_depth).abs();
        d.clamp(0.0, self.max_diameter as f64) as f32
    }

    pub fn diameter(&self, depth: f32) -> f32 {
        self.diameter_at_inverse_depth(1.0 / depth as f64)
    }
}

/// Per-pixel CoC diameter in pixels.
pub fn coc_diameter_map(depth: &DepthMap, model: &CocModel) -> Result<Plane> {
    depth.require_dense()?;
    model.validate()?;
    Plane::from_vec(
        depth.height(),
        depth.width(),
        depth.depths().iter().map(|&d| model.diameter(d)).collect(),
    )
}

/// Defocus ground truth `D / D_max`.
pub fn defocus_ground_truth(diameters: &Plane, max_diameter: usize) -> BlindnessMap {
    let inv = 1.0 / max_diameter as f32;
    BlindnessMap::from_plane_clamped(diameters.map(|d| d * inv))
}

/// Picks `d_f` at a depth quantile and `kappa` so that the 99th-percentile
/// diameter equals `p99_fraction * D_max`.
pub fn coc_model_for_targets(
    depth: &DepthMap,
    focus_quantile: f64,
    p99_fraction: f64,
    max_diameter: usize,
) -> Result<CocModel> {
    depth.require_dense()?;
    let mut sorted: Vec<f32> = depth.depths().to_vec();
    sorted.sort_by(f32::total_cmp);
    let focus = quantile(&sorted, focus_quantile);
    let mut spread: Vec<f64> = sorted
        .iter()
        .map(|&d| (1.0 / focus as f64 - 1.0 / d as f64).abs())
        .collect();
    spread.sort_by(f64::total_cmp);
    let p99 = quantile(&spread, 0.99);
    let kappa = if p99 > 0.0 {
        (p99_fraction * max_diameter as f64 / p99) as f32
    } else {
        0.0
    };
    CocModel::new(focus, kappa, max_diameter)
}

fn quantile<T: Copy>(sorted: &[T], q: f64) -> T {
    let idx = ((sorted.len() - 1) as f64 * q.clamp(0.0, 1.0)).round() as usize;
    sorted[idx]
}

/// Uniform disk point-spread function.
///
/// Support is every integer offset within radius `(diameter - 1) / 2` of the
/// centre, so a diameter of `D` spans `D` pixels across its middle row and any
/// diameter up to 1 is the identity.
#[derive(Clone, Debug, PartialEq)]
pub struct DiskKernel {
    radius: usize,
    /// Half-width of the support on each row, `dy = -radius..=radius`.
    half_widths: Vec<usize>,
    count: usize,
}

impl DiskKernel {
    pub fn new(diameter: f32) -> Result<Self> {
        if !(diameter >= 0.0 && diameter.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "disk diameter must be >= 0, got {diameter}"
            )));
        }
        let rho = ((diameter as f64 - 1.0) / 2.0).max(0.0);
        let r2 = rho * rho;
        let radius = (rho + 1e-9).floor() as usize;
        let half_widths: Vec<usize> = (-(radius as i64)..=radius as i64)
            .map(|dy| ((r2 - (dy * dy) as f64).max(0.0) + 1e-9).sqrt().floor() as usize)
            .collect();
        let count = half_widths.iter().map(|w| 2 * w + 1).sum();
        Ok(Self {
            radius,
            half_widths,
            count,
        })
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn size(&self) -> usize {
        2 * self.radius + 1
    }

    pub fn is_identity(&self) -> bool {
        self.radius == 0
    }

    pub fn nonzero_count(&self) -> usize {
        self.count
    }

    /// Dense `size × size` weights, row-major.
    pub fn weights(&self) -> Vec<f64> {
        let s = self.size();
        let v = 1.0 / self.count as f64;
        let mut out = vec![0.0; s * s];
        for (row, &hw) in self.half_widths.iter().enumerate() {
            for dx in (self.radius - hw)..=(self.radius + hw) {
                out[row * s + dx] = v;
            }
        }
        out
    }
}

/// Convenience wrapper returning the dense kernel of [`DiskKernel`].
pub fn disk_kernel(diameter: f32) -> Result<(usize, Vec<f64>)> {
    let k = DiskKernel::new(diameter)?;
    Ok((k.size(), k.weights()))
}

/// Convolves a plane with a disk, replicating border pixels.
pub fn convolve_disk(input: &[f64], height: usize, width: usize, kernel: &DiskKernel) -> Vec<f64> {
    if kernel.is_identity() {
        return input.to_vec();
    }
    let stride = width + 1;
    let mut prefix = vec![0.0f64; height * stride];
    for y in 0..height {
        let row = &input[y * width..(y + 1) * width];
        let p = &mut prefix[y * stride..(y + 1) * stride];
        for x in 0..width {
            p[x + 1] = p[x] + row[x];
        }
    }
    // Sum of row[clamp(x)] over x in [lo, hi].
    let span_sum = |y: usize, lo: i64, hi: i64| -> f64 {
        let p = &prefix[y * stride..(y + 1) * stride];
        let row = &input[y * width..(y + 1) * width];
        let w = width as i64;
        let mut s = 0.0;
        if lo < 0 {
            s += (-lo).min(hi - lo + 1) as f64 * row[0];
        }
        if hi >= w {
            s += (hi - w + 1).min(hi - lo + 1) as f64 * row[width - 1];
        }
        let a = lo.max(0);
        let b = hi.min(w - 1);
        if a <= b {
            s += p[b as usize + 1] - p[a as usize];
        }
        s
    };
    let inv = 1.0 / kernel.count as f64;
    let r = kernel.radius as i64;
    let mut out = vec![0.0f64; height * width];
    for y in 0..height {
        for x in 0..width {
            let mut acc = 0.0;
            for (row, &hw) in kernel.half_widths.iter().enumerate() {
                let yy = (y as i64 + row as i64 - r).clamp(0, height as i64 - 1) as usize;
                let hw = hw as i64;
                acc += span_sum(yy, x as i64 - hw, x as i64 + hw);
            }
            out[y * width + x] = acc * inv;
        }
    }
    out
}

/// One depth layer of the decomposition.
#[derive(Clone, Debug)]
pub struct DepthLayer {
    /// Representative depth (metres) at the bin's inverse-depth midpoint.
    pub depth: f32,
    pub diameter: f32,
    /// `A_k`: pixels belonging to this layer.
    pub mask: Vec<bool>,
    /// `A*_k`: nearer-layer pixels inside the extension band.
    pub extension_mask: Vec<bool>,
    /// `L*_k`: replicated layer colours on the extension band, zero elsewhere.
    pub extension: Vec<f32>,
    pub kernel: DiskKernel,
}

impl DepthLayer {
    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&m| m)
    }
}

/// Layers ordered far (index 0) to near (index K-1).
#[derive(Clone, Debug)]
pub struct DepthLayerSet {
    pub image: RasterImage,
    pub layers: Vec<DepthLayer>,
}

/// Splits an image into `k` inverse-depth bins with occlusion extensions.
pub fn decompose_layers(img: &RasterImage, depth: &DepthMap, k: usize, model: &CocModel) -> Result<DepthLayerSet> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("layer count must be >= 2, got {k}")));
    }
    depth.require_dense()?;
    model.validate()?;
    check_size("image / depth", img.dims(), depth.dims())?;
    let (h, w) = img.dims();
    let n = h * w;
    let c = img.channels();

    let inv: Vec<f64> = depth.depths().iter().map(|&d| 1.0 / d as f64).collect();
    let lo = inv.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = inv.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let bin_of = |v: f64| -> usize {
        if span <= 0.0 {
            0
        } else {
            (((v - lo) / span * k as f64).floor() as usize).min(k - 1)
        }
    };
    let bins: Vec<usize> = inv.iter().map(|&v| bin_of(v)).collect();
    let band = model.max_diameter.div_ceil(2);

    let mut layers = Vec::with_capacity(k);
    for b in 0..k {
        let rep_inv = if span <= 0.0 {
            lo
        } else {
            lo + (b as f64 + 0.5) * span / k as f64
        };
        let diameter = model.diameter_at_inverse_depth(rep_inv);
        let mask: Vec<bool> = bins.iter().map(|&x| x == b).collect();
        let mut extension_mask = vec![false; n];
        let mut extension = vec![0.0f32; n * c];
        if mask.iter().any(|&m| m) && b + 1 < k {
            let origin = propagate_nearest(h, w, &mask, Some(band));
            for i in 0..n {
                if let Some(src) = origin[i] {
                    if bins[i] > b {
                        extension_mask[i] = true;
                        extension[i * c..(i + 1) * c].copy_from_slice(&img.data()[src * c..(src + 1) * c]);
                    }
                }
            }
        }
        layers.push(DepthLayer {
            depth: (1.0 / rep_inv) as f32,
            diameter,
            mask,
            extension_mask,
            extension,
            kernel: DiskKernel::new(diameter)?,
        });
    }
    Ok(DepthLayerSet {
        image: img.clone(),
        layers,
    })
}

/// Composites the blurred layers near-over-far.
pub fn layered_defocus_blur(set: &DepthLayerSet) -> Result<RasterImage> {
    let img = &set.image;
    let (h, w) = img.dims();
    let n = h * w;
    let c = img.channels();
    for layer in &set.layers {
        if layer.mask.len() != n || layer.extension_mask.len() != n || layer.extension.len() != n * c {
            return Err(Error::SizeMismatch("layer buffers do not match the image".into()));
        }
    }
    let mut numer = vec![vec![0.0f64; n]; c];
    let mut denom = vec![0.0f64; n];
    let mut occlusion = vec![1.0f64; n];

    for layer in set.layers.iter().rev() {
        if layer.is_empty() {
            continue;
        }
        let weight: Vec<f64> = (0..n)
            .map(|i| (layer.mask[i] || layer.extension_mask[i]) as u8 as f64)
            .collect();
        let blurred_weight = convolve_disk(&weight, h, w, &layer.kernel);
        for i in 0..n {
            denom[i] += blurred_weight[i] * occlusion[i];
        }
        for (ch, acc) in numer.iter_mut().enumerate() {
            let colour: Vec<f64> = (0..n)
                .map(|i| {
                    if layer.mask[i] {
                        img.data()[i * c + ch] as f64
                    } else if layer.extension_mask[i] {
                        layer.extension[i * c + ch] as f64
                    } else {
                        0.0
                    }
                })
                .collect();
            let blurred = convolve_disk(&colour, h, w, &layer.kernel);
            for i in 0..n {
                acc[i] += blurred[i] * occlusion[i];
            }
        }
        let mask: Vec<f64> = layer.mask.iter().map(|&m| m as u8 as f64).collect();
        let coverage = convolve_disk(&mask, h, w, &layer.kernel);
        for i in 0..n {
            occlusion[i] *= 1.0 - coverage[i];
        }
    }

    let mut data = vec![0.0f32; n * c];
    for i in 0..n {
        for ch in 0..c {
            data[i * c + ch] = if denom[i] > 1e-12 {
                (numer[ch][i] / denom[i]) as f32
            } else {
                img.data()[i * c + ch]
            };
        }
    }
    RasterImage::from_vec_clamped(h, w, c, data)
}

/// Renders a defocused image and returns it with the per-pixel diameters.
pub fn render_defocus(
    img: &RasterImage,
    depth: &DepthMap,
    model: &CocModel,
    layers: usize,
) -> Result<(RasterImage, Plane)> {
    let diameters = coc_diameter_map(depth, model)?;
    let set = decompose_layers(img, depth, layers, model)?;
    Ok((layered_defocus_blur(&set)?, diameters))
}
