//! Window filters: box mean, min filter and the guided filter.

use std::collections::VecDeque;

use crate::error::{check_size, Error, Result};
use crate::raster::{Plane, RasterImage};

/// Mean over the (2r+1)² window clipped to the image bounds.
pub fn box_mean(input: &Plane, radius: usize) -> Plane {
    let (h, w) = input.dims();
    let stride = w + 1;
    let mut integral = vec![0.0f64; (h + 1) * stride];
    for y in 0..h {
        let mut row = 0.0f64;
        for x in 0..w {
            row += input.get(y, x) as f64;
            integral[(y + 1) * stride + x + 1] = integral[y * stride + x + 1] + row;
        }
    }
    Plane::from_fn(h, w, |y, x| {
        let y0 = y.saturating_sub(radius);
        let x0 = x.saturating_sub(radius);
        let y1 = (y + radius + 1).min(h);
        let x1 = (x + radius + 1).min(w);
        let sum = integral[y1 * stride + x1] - integral[y0 * stride + x1] - integral[y1 * stride + x0]
            + integral[y0 * stride + x0];
        (sum / ((y1 - y0) * (x1 - x0)) as f64) as f32
    })
}

/// Sliding-window minimum over `[i - radius, i + radius]` clipped to the slice.
fn min_filter_1d(input: &[f32], radius: usize, out: &mut [f32]) {
    let n = input.len();
    let mut window: VecDeque<usize> = VecDeque::new();
    let mut next = 0;
    for (i, o) in out.iter_mut().enumerate() {
        let hi = (i + radius).min(n - 1);
        while next <= hi {
            while window.back().is_some_and(|&b| input[b] >= input[next]) {
                window.pop_back();
            }
            window.push_back(next);
            next += 1;
        }
        while window.front().is_some_and(|&f| f + radius < i) {
            window.pop_front();
        }
        *o = input[*window.front().expect("window is never empty")];
    }
}

/// Minimum over the (2r+1)² window with edge clamping.
pub fn min_filter(input: &Plane, radius: usize) -> Plane {
    let (h, w) = input.dims();
    let mut rows = vec![0.0f32; h * w];
    for y in 0..h {
        min_filter_1d(&input.data()[y * w..(y + 1) * w], radius, &mut rows[y * w..(y + 1) * w]);
    }
    let mut out = vec![0.0f32; h * w];
    let mut col = vec![0.0f32; h];
    let mut col_out = vec![0.0f32; h];
    for x in 0..w {
        for y in 0..h {
            col[y] = rows[y * w + x];
        }
        min_filter_1d(&col, radius, &mut col_out);
        for y in 0..h {
            out[y * w + x] = col_out[y];
        }
    }
    Plane::from_vec(h, w, out).expect("consistent")
}

/// Gray-guide guided filter.
///
/// A 3-channel guide is reduced to its channel mean. Output is
/// `mean(a) * guide + mean(b)` with `a = cov(I,p) / (var(I) + eps)` and
/// `b = mean(p) - a * mean(I)` over clipped box windows.
pub fn guided_filter(guide: &RasterImage, input: &Plane, radius: usize, eps: f32) -> Result<Plane> {
    check_size("guided filter guide/input", guide.dims(), input.dims())?;
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "guided filter eps must be > 0, got {eps}"
        )));
    }
    let guide = guide.channel_mean();
    let (h, w) = input.dims();
    let product = |a: &Plane, b: &Plane| Plane::from_fn(h, w, |y, x| a.get(y, x) * b.get(y, x));
    let mean_i = box_mean(&guide, radius);
    let mean_p = box_mean(input, radius);
    let corr_ip = box_mean(&product(&guide, input), radius);
    let corr_ii = box_mean(&product(&guide, &guide), radius);

    let n = h * w;
    let mut a = vec![0.0f32; n];
    let mut b = vec![0.0f32; n];
    for i in 0..n {
        let mi = mean_i.data()[i] as f64;
        let mp = mean_p.data()[i] as f64;
        let var = (corr_ii.data()[i] as f64 - mi * mi).max(0.0);
        let cov = corr_ip.data()[i] as f64 - mi * mp;
        let ai = cov / (var + eps as f64);
        a[i] = ai as f32;
        b[i] = (mp - ai * mi) as f32;
    }
    let mean_a = box_mean(&Plane::from_vec(h, w, a)?, radius);
    let mean_b = box_mean(&Plane::from_vec(h, w, b)?, radius);
    Ok(Plane::from_fn(h, w, |y, x| {
        mean_a.get(y, x) * guide.get(y, x) + mean_b.get(y, x)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_box(p: &Plane, r: usize) -> Plane {
        let (h, w) = p.dims();
        Plane::from_fn(h, w, |y, x| {
            let mut s = 0.0f64;
            let mut n = 0;
            for yy in y.saturating_sub(r)..(y + r + 1).min(h) {
                for xx in x.saturating_sub(r)..(x + r + 1).min(w) {
                    s += p.get(yy, xx) as f64;
                    n += 1;
                }
            }
            (s / n as f64) as f32
        })
    }

    fn brute_min(p: &Plane, r: usize) -> Plane {
        let (h, w) = p.dims();
        Plane::from_fn(h, w, |y, x| {
            let mut m = f32::INFINITY;
            for yy in y.saturating_sub(r)..(y + r + 1).min(h) {
                for xx in x.saturating_sub(r)..(x + r + 1).min(w) {
                    m = m.min(p.get(yy, xx));
                }
            }
            m
        })
    }

    fn texture(h: usize, w: usize) -> Plane {
        Plane::from_fn(h, w, |y, x| {
            (0.5 + 0.3 * ((x as f32) * 0.7).sin() * ((y as f32) * 0.45).cos()
                + 0.15 * ((x * 7 + y * 13) % 11) as f32 / 11.0)
                .clamp(0.0, 1.0)
        })
    }

    #[test]
    fn box_and_min_match_brute_force() {
        let p = texture(13, 17);
        for r in [0, 1, 3, 9] {
            let a = box_mean(&p, r);
            let b = brute_box(&p, r);
            for (x, y) in a.data().iter().zip(b.data()) {
                assert!((x - y).abs() < 1e-6);
            }
            assert_eq!(min_filter(&p, r), brute_min(&p, r));
        }
    }

    #[test]
    fn constant_input_is_preserved() {
        let guide = RasterImage::from_plane(&texture(20, 24));
        let input = Plane::filled(20, 24, 0.37);
        let out = guided_filter(&guide, &input, 5, 1e-3).unwrap();
        assert!(out.data().iter().all(|&v| (v - 0.37).abs() < 1e-5));
    }

    #[test]
    fn self_guidance_with_tiny_eps_is_near_identity() {
        let p = texture(24, 24);
        let guide = RasterImage::from_plane(&p);
        let out = guided_filter(&guide, &p, 4, 1e-9).unwrap();
        let dev = out
            .data()
            .iter()
            .zip(p.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max);
        assert!(dev < 1e-3, "max deviation {dev}");
    }

    #[test]
    fn huge_eps_reduces_to_iterated_box_mean() {
        let p = texture(18, 22);
        let guide = RasterImage::from_plane(&texture(18, 22).map(|v| 1.0 - v));
        let r = 3;
        let out = guided_filter(&guide, &p, r, 1e9).unwrap();
        let oracle = brute_box(&brute_box(&p, r), r);
        for (a, b) in out.data().iter().zip(oracle.data()) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn rejects_mismatch_and_bad_eps() {
        let guide = RasterImage::filled(4, 4, &[0.5]).unwrap();
        assert!(matches!(
            guided_filter(&guide, &Plane::filled(4, 5, 0.0), 1, 1e-3),
            Err(Error::SizeMismatch(_))
        ));
        assert!(guided_filter(&guide, &Plane::filled(4, 4, 0.0), 1, 0.0).is_err());
    }
}
