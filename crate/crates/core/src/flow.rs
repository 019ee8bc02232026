//! Dense optical flow by two-frame polynomial expansion.
//!
//! Every pixel neighbourhood is approximated by a quadratic
//! `f(z) ~ z'Az + b'z + c` fitted with Gaussian-weighted least squares.
//! A displacement `d` between frames shows up as `b1 - b0 = -2 A d`, so the
//! flow is solved per pixel from window-aggregated normal equations, refined
//! over several iterations and over an image pyramid.

use serde::{Deserialize, Serialize};

use crate::error::{check_size, Error, Result};
use crate::filter::box_mean;
use crate::raster::{Plane, RasterImage};

/// Displacement field from frame 0 to frame 1: pixel `x` of frame 0 is found
/// at `x + (u, v)` in frame 1.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowField {
    height: usize,
    width: usize,
    u: Vec<f32>,
    v: Vec<f32>,
}

impl FlowField {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            u: vec![0.0; height * width],
            v: vec![0.0; height * width],
        }
    }

    pub fn new(height: usize, width: usize, u: Vec<f32>, v: Vec<f32>) -> Result<Self> {
        if u.len() != height * width || v.len() != height * width {
            return Err(Error::SizeMismatch(format!(
                "flow components must have {} values",
                height * width
            )));
        }
        if u.iter().chain(&v).any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("flow components must be finite".into()));
        }
        Ok(Self { height, width, u, v })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> (f32, f32)) -> Self {
        let mut u = Vec::with_capacity(height * width);
        let mut v = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                let (a, b) = f(y, x);
                u.push(a);
                v.push(b);
            }
        }
        Self { height, width, u, v }
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

    pub fn u(&self) -> &[f32] {
        &self.u
    }

    pub fn v(&self) -> &[f32] {
        &self.v
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> (f32, f32) {
        let i = y * self.width + x;
        (self.u[i], self.v[i])
    }

    pub fn magnitude(&self) -> Plane {
        Plane::from_vec(
            self.height,
            self.width,
            self.u.iter().zip(&self.v).map(|(a, b)| a.hypot(*b)).collect(),
        )
        .expect("consistent")
    }

    pub fn negated(&self) -> FlowField {
        FlowField {
            height: self.height,
            width: self.width,
            u: self.u.iter().map(|a| -a).collect(),
            v: self.v.iter().map(|a| -a).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowParams {
    pub pyramid_levels: usize,
    pub pyramid_scale: f32,
    /// Odd averaging window for the normal equations.
    pub window: usize,
    pub iterations: usize,
    /// Odd polynomial-fit neighbourhood size.
    pub poly_n: usize,
    pub poly_sigma: f32,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            pyramid_levels: 3,
            pyramid_scale: 0.5,
            window: 15,
            iterations: 3,
            poly_n: 5,
            poly_sigma: 1.1,
        }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.pyramid_levels == 0 {
            return bad("pyramid_levels must be >= 1".into());
        }
        if !(self.pyramid_scale > 0.0 && self.pyramid_scale < 1.0) {
            return bad(format!("pyramid_scale must lie in (0,1), got {}", self.pyramid_scale));
        }
        if self.window.is_multiple_of(2) || self.poly_n.is_multiple_of(2) {
            return bad(format!(
                "window and poly_n must be odd, got {} and {}",
                self.window, self.poly_n
            ));
        }
        if self.poly_n < 3 {
            return bad("poly_n must be >= 3".into());
        }
        if !(self.poly_sigma > 0.0) {
            return bad("poly_sigma must be > 0".into());
        }
        Ok(())
    }
}

/// Quadratic coefficients per pixel: `[b_x, b_y, a_xx, a_yy, a_xy]` where
/// `a_xy` is the off-diagonal entry of the symmetric matrix A.
type Expansion = Vec<[f32; 5]>;

fn solve_6x6(mut m: [[f64; 6]; 6]) -> [[f64; 6]; 6] {
    let mut inv = [[0.0f64; 6]; 6];
    for (i, row) in inv.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for col in 0..6 {
        let pivot = (col..6)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .expect("non-empty range");
        m.swap(col, pivot);
        inv.swap(col, pivot);
        let p = m[col][col];
        for k in 0..6 {
            m[col][k] /= p;
            inv[col][k] /= p;
        }
        for r in 0..6 {
            if r != col {
                let f = m[r][col];
                if f != 0.0 {
                    for k in 0..6 {
                        m[r][k] -= f * m[col][k];
                        inv[r][k] -= f * inv[col][k];
                    }
                }
            }
        }
    }
    inv
}

fn poly_expansion(img: &Plane, poly_n: usize, sigma: f32) -> Expansion {
    let (h, w) = img.dims();
    let r = (poly_n / 2) as i64;
    let g: Vec<f64> = (-r..=r)
        .map(|t| (-(t * t) as f64 / (2.0 * sigma as f64 * sigma as f64)).exp())
        .collect();

    // Basis order: 1, x, y, x², y², xy.
    let basis = |x: f64, y: f64| [1.0, x, y, x * x, y * y, x * y];
    let mut gram = [[0.0f64; 6]; 6];
    for dy in -r..=r {
        for dx in -r..=r {
            let wgt = g[(dy + r) as usize] * g[(dx + r) as usize];
            let b = basis(dx as f64, dy as f64);
            for i in 0..6 {
                for j in 0..6 {
                    gram[i][j] += wgt * b[i] * b[j];
                }
            }
        }
    }
    let ginv = solve_6x6(gram);

    // Horizontal pass: sums of g(dx) dx^p f for p = 0, 1, 2.
    let mut rows = vec![[0.0f64; 3]; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0.0f64; 3];
            for dx in -r..=r {
                let f = img.get_clamped(y as isize, x as isize + dx as isize) as f64;
                let gf = g[(dx + r) as usize] * f;
                let d = dx as f64;
                acc[0] += gf;
                acc[1] += gf * d;
                acc[2] += gf * d * d;
            }
            rows[y * w + x] = acc;
        }
    }
    let mut out = vec![[0.0f32; 5]; h * w];
    for y in 0..h {
        for x in 0..w {
            // Moments in basis order.
            let mut m = [0.0f64; 6];
            for dy in -r..=r {
                let yy = (y as i64 + dy).clamp(0, h as i64 - 1) as usize;
                let row = rows[yy * w + x];
                let gy = g[(dy + r) as usize];
                let d = dy as f64;
                m[0] += gy * row[0];
                m[1] += gy * row[1];
                m[2] += gy * d * row[0];
                m[3] += gy * row[2];
                m[4] += gy * d * d * row[0];
                m[5] += gy * d * row[1];
            }
            let mut coeff = [0.0f64; 6];
            for i in 0..6 {
                coeff[i] = (0..6).map(|j| ginv[i][j] * m[j]).sum();
            }
            out[y * w + x] = [
                coeff[1] as f32,
                coeff[2] as f32,
                coeff[3] as f32,
                coeff[4] as f32,
                (coeff[5] * 0.5) as f32,
            ];
        }
    }
    out
}

fn sample_expansion(exp: &Expansion, h: usize, w: usize, y: f32, x: f32) -> [f32; 5] {
    let y = y.clamp(0.0, (h - 1) as f32);
    let x = x.clamp(0.0, (w - 1) as f32);
    let y0 = y.floor() as usize;
    let x0 = x.floor() as usize;
    let y1 = (y0 + 1).min(h - 1);
    let x1 = (x0 + 1).min(w - 1);
    let fy = y - y0 as f32;
    let fx = x - x0 as f32;
    let mut out = [0.0f32; 5];
    for (k, o) in out.iter_mut().enumerate() {
        let a = exp[y0 * w + x0][k];
        let b = exp[y0 * w + x1][k];
        let c = exp[y1 * w + x0][k];
        let d = exp[y1 * w + x1][k];
        let top = a + (b - a) * fx;
        let bottom = c + (d - c) * fx;
        *o = top + (bottom - top) * fy;
    }
    out
}

/// Per-pixel normal-equation terms `[g11, g12, g22, h1, h2]`.
fn update_matrices(r0: &Expansion, r1: &Expansion, flow: &FlowField) -> [Plane; 5] {
    let (h, w) = flow.dims();
    let mut fields: [Vec<f32>; 5] = std::array::from_fn(|_| vec![0.0; h * w]);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let (du, dv) = flow.get(y, x);
            let p0 = r0[i];
            let p1 = sample_expansion(r1, h, w, y as f32 + dv, x as f32 + du);
            let a11 = (p0[2] + p1[2]) * 0.5;
            let a22 = (p0[3] + p1[3]) * 0.5;
            let a12 = (p0[4] + p1[4]) * 0.5;
            let db1 = -0.5 * (p1[0] - p0[0]) + a11 * du + a12 * dv;
            let db2 = -0.5 * (p1[1] - p0[1]) + a12 * du + a22 * dv;
            fields[0][i] = a11 * a11 + a12 * a12;
            fields[1][i] = a12 * (a11 + a22);
            fields[2][i] = a12 * a12 + a22 * a22;
            fields[3][i] = a11 * db1 + a12 * db2;
            fields[4][i] = a12 * db1 + a22 * db2;
        }
    }
    fields.map(|f| Plane::from_vec(h, w, f).expect("consistent"))
}

fn solve_flow(terms: &[Plane; 5], window: usize) -> FlowField {
    let (h, w) = terms[0].dims();
    let radius = window / 2;
    let avg: Vec<Plane> = terms.iter().map(|t| box_mean(t, radius)).collect();
    let mut u = vec![0.0f32; h * w];
    let mut v = vec![0.0f32; h * w];
    for i in 0..h * w {
        let g11 = avg[0].data()[i] as f64;
        let g12 = avg[1].data()[i] as f64;
        let g22 = avg[2].data()[i] as f64;
        let h1 = avg[3].data()[i] as f64;
        let h2 = avg[4].data()[i] as f64;
        let det = g11 * g22 - g12 * g12 + 1e-3;
        u[i] = ((g22 * h1 - g12 * h2) / det) as f32;
        v[i] = ((g11 * h2 - g12 * h1) / det) as f32;
    }
    FlowField {
        height: h,
        width: w,
        u,
        v,
    }
}

fn gaussian_blur(img: &Plane, sigma: f32) -> Plane {
    if sigma <= 0.0 {
        return img.clone();
    }
    let r = (sigma * 3.0).ceil() as i64;
    let k: Vec<f64> = (-r..=r)
        .map(|t| (-(t * t) as f64 / (2.0 * (sigma as f64).powi(2))).exp())
        .collect();
    let norm: f64 = k.iter().sum();
    let (h, w) = img.dims();
    let horiz = Plane::from_fn(h, w, |y, x| {
        let s: f64 = (-r..=r)
            .map(|t| k[(t + r) as usize] * img.get_clamped(y as isize, x as isize + t as isize) as f64)
            .sum();
        (s / norm) as f32
    });
    Plane::from_fn(h, w, |y, x| {
        let s: f64 = (-r..=r)
            .map(|t| k[(t + r) as usize] * horiz.get_clamped(y as isize + t as isize, x as isize) as f64)
            .sum();
        (s / norm) as f32
    })
}

/// Half-pixel-centred bilinear resampling of an unconstrained plane.
fn resample(img: &Plane, h: usize, w: usize) -> Plane {
    let sy = img.height() as f32 / h as f32;
    let sx = img.width() as f32 / w as f32;
    Plane::from_fn(h, w, |y, x| {
        img.sample_bilinear((y as f32 + 0.5) * sy - 0.5, (x as f32 + 0.5) * sx - 0.5)
    })
}

fn to_gray255(img: &RasterImage) -> Plane {
    img.luminance().map(|v| v * 255.0)
}

/// Dense flow from `f0` to `f1`.
pub fn dense_flow(f0: &RasterImage, f1: &RasterImage, params: &FlowParams) -> Result<FlowField> {
    check_size("flow frames", f0.dims(), f1.dims())?;
    params.validate()?;
    let g0 = to_gray255(f0);
    let g1 = to_gray255(f1);
    let (h, w) = f0.dims();

    // Coarsest level first; each level is built from the full-resolution frame.
    let mut levels = Vec::new();
    for k in 0..params.pyramid_levels {
        let s = params.pyramid_scale.powi(k as i32);
        let lh = ((h as f32 * s).round() as usize).max(1);
        let lw = ((w as f32 * s).round() as usize).max(1);
        if k > 0 && (lh < 8 || lw < 8) {
            break;
        }
        levels.push((s, lh, lw));
    }

    let mut flow: Option<FlowField> = None;
    for &(s, lh, lw) in levels.iter().rev() {
        let (i0, i1) = if s < 1.0 {
            let sigma = (1.0 / s - 1.0) * 0.5;
            (
                resample(&gaussian_blur(&g0, sigma), lh, lw),
                resample(&gaussian_blur(&g1, sigma), lh, lw),
            )
        } else {
            (g0.clone(), g1.clone())
        };
        let mut current = match flow.take() {
            None => FlowField::zeros(lh, lw),
            Some(prev) => {
                let fy = lh as f32 / prev.height as f32;
                let fx = lw as f32 / prev.width as f32;
                let pu = Plane::from_vec(prev.height, prev.width, prev.u).expect("consistent");
                let pv = Plane::from_vec(prev.height, prev.width, prev.v).expect("consistent");
                FlowField {
                    height: lh,
                    width: lw,
                    u: resample(&pu, lh, lw).data().iter().map(|a| a * fx).collect(),
                    v: resample(&pv, lh, lw).data().iter().map(|a| a * fy).collect(),
                }
            }
        };
        let r0 = poly_expansion(&i0, params.poly_n, params.poly_sigma);
        let r1 = poly_expansion(&i1, params.poly_n, params.poly_sigma);
        for _ in 0..params.iterations.max(1) {
            let terms = update_matrices(&r0, &r1, &current);
            current = solve_flow(&terms, params.window);
        }
        flow = Some(current);
    }
    Ok(flow.expect("at least one pyramid level"))
}
