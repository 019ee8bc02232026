//! PNG readers and writers for images, depth maps and blindness maps.
//!
//! Images: 8- or 16-bit, gray or RGB, value `p / (2^bits - 1)`.
//! Depth: 16-bit gray, `stored / 256` metres, 0 marks a hole.
//! Blindness maps: 16-bit gray, `round(amount * 65535)`.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use image::{DynamicImage, ImageBuffer, ImageError, ImageFormat, ImageReader, Luma, Rgb};

use crate::depth::DepthMap;
use crate::error::{Error, Result};
use crate::raster::{BlindnessMap, Plane, RasterImage};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    fn max_value(self) -> f32 {
        match self {
            BitDepth::Eight => 255.0,
            BitDepth::Sixteen => 65535.0,
        }
    }
}

pub(crate) fn decode_png(path: &Path) -> Result<DynamicImage> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = ImageReader::with_format(BufReader::new(file), ImageFormat::Png);
    reader.decode().map_err(|e| match e {
        ImageError::IoError(io) => Error::io(path, io),
        other => Error::Decode {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    })
}

fn map_save_err(path: &Path, e: ImageError) -> Error {
    match e {
        ImageError::IoError(io) => Error::io(path, io),
        other => Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::other(other.to_string()),
        },
    }
}

/// Loads an 8/16-bit gray or RGB PNG and normalizes it to [0,1].
pub fn load_image(path: impl AsRef<Path>) -> Result<RasterImage> {
    let path = path.as_ref();
    let img = decode_png(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        DynamicImage::ImageLuma8(b) => normalize(h, w, 1, b.as_raw().iter().map(|&p| p as f32), 255.0),
        DynamicImage::ImageRgb8(b) => normalize(h, w, 3, b.as_raw().iter().map(|&p| p as f32), 255.0),
        DynamicImage::ImageLuma16(b) => normalize(h, w, 1, b.as_raw().iter().map(|&p| p as f32), 65535.0),
        DynamicImage::ImageRgb16(b) => normalize(h, w, 3, b.as_raw().iter().map(|&p| p as f32), 65535.0),
        other => {
            let channels = other.color().channel_count();
            if channels == 1 || channels == 3 {
                Err(Error::UnsupportedFormat {
                    path: path.to_path_buf(),
                    expected: "8-bit or 16-bit integer samples",
                })
            } else {
                Err(Error::UnsupportedChannels {
                    path: path.to_path_buf(),
                    channels,
                })
            }
        }
    }
}

fn normalize(h: usize, w: usize, channels: usize, raw: impl Iterator<Item = f32>, max: f32) -> Result<RasterImage> {
    RasterImage::new(h, w, channels, raw.map(|p| p / max).collect())
}

fn quantize(v: f32, max: f32) -> f32 {
    (v.clamp(0.0, 1.0) * max).round()
}

/// Writes an image as a gray or RGB PNG at the requested bit depth.
/// Creates the parent directory of an output path.
pub(crate) fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e)),
        _ => Ok(()),
    }
}

pub fn save_image(img: &RasterImage, path: impl AsRef<Path>, depth: BitDepth) -> Result<()> {
    let path = path.as_ref();
    ensure_parent(path)?;
    let (w, h) = (img.width() as u32, img.height() as u32);
    let max = depth.max_value();
    let result = match (depth, img.channels()) {
        (BitDepth::Eight, 1) => {
            let raw = img.data().iter().map(|&v| quantize(v, max) as u8).collect();
            ImageBuffer::<Luma<u8>, Vec<u8>>::from_raw(w, h, raw)
                .expect("buffer size")
                .save_with_format(path, ImageFormat::Png)
        }
        (BitDepth::Eight, _) => {
            let raw = img.data().iter().map(|&v| quantize(v, max) as u8).collect();
            ImageBuffer::<Rgb<u8>, Vec<u8>>::from_raw(w, h, raw)
                .expect("buffer size")
                .save_with_format(path, ImageFormat::Png)
        }
        (BitDepth::Sixteen, 1) => {
            let raw = img.data().iter().map(|&v| quantize(v, max) as u16).collect();
            ImageBuffer::<Luma<u16>, Vec<u16>>::from_raw(w, h, raw)
                .expect("buffer size")
                .save_with_format(path, ImageFormat::Png)
        }
        (BitDepth::Sixteen, _) => {
            let raw = img.data().iter().map(|&v| quantize(v, max) as u16).collect();
            ImageBuffer::<Rgb<u16>, Vec<u16>>::from_raw(w, h, raw)
                .expect("buffer size")
                .save_with_format(path, ImageFormat::Png)
        }
    };
    result.map_err(|e| map_save_err(path, e))
}

pub(crate) fn save_gray16(path: &Path, h: usize, w: usize, raw: Vec<u16>) -> Result<()> {
    ensure_parent(path)?;
    ImageBuffer::<Luma<u16>, Vec<u16>>::from_raw(w as u32, h as u32, raw)
        .expect("buffer size")
        .save_with_format(path, ImageFormat::Png)
        .map_err(|e| map_save_err(path, e))
}

pub(crate) fn load_gray16(path: &Path) -> Result<(usize, usize, Vec<u16>)> {
    match decode_png(path)? {
        DynamicImage::ImageLuma16(b) => {
            let (w, h) = b.dimensions();
            Ok((h as usize, w as usize, b.into_raw()))
        }
        _ => Err(Error::UnsupportedFormat {
            path: path.to_path_buf(),
            expected: "single-channel 16-bit PNG",
        }),
    }
}

/// Writes a blindness map as single-channel 16-bit PNG, `round(amount * 65535)`.
pub fn save_blindness_map(map: &BlindnessMap, path: impl AsRef<Path>) -> Result<()> {
    let raw = map.data().iter().map(|&v| quantize(v, 65535.0) as u16).collect();
    save_gray16(path.as_ref(), map.height(), map.width(), raw)
}

/// Reads a map written by [`save_blindness_map`].
pub fn load_blindness_map(path: impl AsRef<Path>) -> Result<BlindnessMap> {
    let (h, w, raw) = load_gray16(path.as_ref())?;
    BlindnessMap::from_vec(h, w, raw.into_iter().map(|p| p as f32 / 65535.0).collect())
}

/// Reads a 16-bit depth PNG: `stored / 256` metres, 0 is a hole.
pub fn load_depth(path: impl AsRef<Path>) -> Result<DepthMap> {
    let (h, w, raw) = load_gray16(path.as_ref())?;
    DepthMap::from_raw(h, w, raw.into_iter().map(|p| p as f32 / 256.0).collect())
}

/// Inverse of [`load_depth`]; depths beyond 255.996 m saturate.
pub fn save_depth(depth: &DepthMap, path: impl AsRef<Path>) -> Result<()> {
    let raw = depth
        .depths()
        .iter()
        .zip(depth.valid_mask())
        .map(|(&d, &ok)| {
            if ok {
                (d * 256.0).round().clamp(1.0, 65535.0) as u16
            } else {
                0
            }
        })
        .collect();
    save_gray16(path.as_ref(), depth.height(), depth.width(), raw)
}

/// Writes an unconstrained plane as 16-bit gray after clamping to [0,1].
pub fn save_plane(plane: &Plane, path: impl AsRef<Path>) -> Result<()> {
    save_blindness_map(&BlindnessMap::from_plane_clamped(plane.clone()), path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eight_bit_extremes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.png");
        ImageBuffer::<Luma<u8>, Vec<u8>>::from_raw(2, 1, vec![255, 0])
            .unwrap()
            .save(&p)
            .unwrap();
        let img = load_image(&p).unwrap();
        assert_eq!(img.data(), &[1.0, 0.0]);
    }

    #[test]
    fn sixteen_bit_midpoint() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g16.png");
        ImageBuffer::<Luma<u16>, Vec<u16>>::from_raw(1, 1, vec![32768])
            .unwrap()
            .save(&p)
            .unwrap();
        let img = load_image(&p).unwrap();
        assert!((img.data()[0] - 0.500_007_6).abs() < 1e-7);
    }

    #[test]
    fn map_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.png");
        let map = BlindnessMap::from_vec(1, 3, vec![1.0, 0.0, 0.5]).unwrap();
        save_blindness_map(&map, &p).unwrap();
        let (_, _, raw) = load_gray16(&p).unwrap();
        assert_eq!(raw, vec![65535, 0, 32768]);
    }

    #[test]
    fn depth_decoding() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.png");
        save_gray16(&p, 1, 3, vec![256, 0, 20480]).unwrap();
        let d = load_depth(&p).unwrap();
        assert_eq!(d.depths(), &[1.0, 0.0, 80.0]);
        assert_eq!(d.valid_mask(), &[true, false, true]);
    }

    #[test]
    fn depth_rejects_eight_bit() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d8.png");
        ImageBuffer::<Luma<u8>, Vec<u8>>::from_raw(1, 1, vec![3])
            .unwrap()
            .save(&p)
            .unwrap();
        assert!(matches!(load_depth(&p), Err(Error::UnsupportedFormat { .. })));
    }

    #[test]
    fn distinct_load_errors() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("nope.png");
        assert!(matches!(load_image(&missing), Err(Error::NotFound(_))));

        let rgba = dir.path().join("rgba.png");
        ImageBuffer::<image::Rgba<u8>, Vec<u8>>::from_raw(1, 1, vec![1, 2, 3, 4])
            .unwrap()
            .save(&rgba)
            .unwrap();
        assert!(matches!(
            load_image(&rgba),
            Err(Error::UnsupportedChannels { channels: 4, .. })
        ));

        let corrupt = dir.path().join("bad.png");
        std::fs::write(&corrupt, b"\x89PNG\r\n\x1a\nnot really").unwrap();
        assert!(matches!(load_image(&corrupt), Err(Error::Decode { .. })));
    }

    #[test]
    fn unwritable_path() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("plain");
        std::fs::write(&file, b"x").unwrap();
        let map = BlindnessMap::zeros(2, 2);
        let err = save_blindness_map(&map, file.join("m.png")).unwrap_err();
        assert!(matches!(err, Error::NotFound(_) | Error::Io { .. }));
    }

    #[test]
    fn image_roundtrip_at_source_depth() {
        let dir = tempfile::tempdir().unwrap();
        for (depth, max) in [(BitDepth::Eight, 255.0f32), (BitDepth::Sixteen, 65535.0)] {
            let img = RasterImage::from_fn(5, 4, 3, |y, x, c| {
                (((y * 31 + x * 7 + c * 13) % 256) as f32 * 97.0 % max).round() / max
            })
            .unwrap();
            let p = dir.path().join("rt.png");
            save_image(&img, &p, depth).unwrap();
            assert_eq!(load_image(&p).unwrap(), img);
        }
    }
}
