//! Metric depth maps and dense-depth filling.

use crate::error::{Error, Result};
use crate::raster::Plane;

/// H×W metric depth with a per-pixel validity mask.
///
/// Invalid pixels always carry depth 0; valid ones are finite and positive.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthMap {
    height: usize,
    width: usize,
    depth: Vec<f32>,
    valid: Vec<bool>,
}

impl DepthMap {
    /// Builds a map from raw depths; any value that is not finite and positive
    /// is treated as a hole.
    pub fn from_raw(height: usize, width: usize, raw: Vec<f32>) -> Result<Self> {
        if raw.len() != height * width {
            return Err(Error::SizeMismatch(format!(
                "depth {height}x{width} needs {} values, got {}",
                height * width,
                raw.len()
            )));
        }
        let valid: Vec<bool> = raw.iter().map(|d| d.is_finite() && *d > 0.0).collect();
        let depth = raw
            .into_iter()
            .zip(&valid)
            .map(|(d, &ok)| if ok { d } else { 0.0 })
            .collect();
        Ok(Self {
            height,
            width,
            depth,
            valid,
        })
    }

    pub fn dense(plane: &Plane) -> Result<Self> {
        let map = Self::from_raw(plane.height(), plane.width(), plane.data().to_vec())?;
        if !map.is_dense() {
            return Err(Error::NonDenseDepth);
        }
        Ok(map)
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let raw = Plane::from_fn(height, width, &mut f).into_vec();
        Self::from_raw(height, width, raw).expect("dimensions are consistent")
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

    pub fn depths(&self) -> &[f32] {
        &self.depth
    }

    pub fn valid_mask(&self) -> &[bool] {
        &self.valid
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f32 {
        self.depth[y * self.width + x]
    }

    #[inline]
    pub fn is_valid(&self, y: usize, x: usize) -> bool {
        self.valid[y * self.width + x]
    }

    pub fn is_dense(&self) -> bool {
        self.valid.iter().all(|&v| v)
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    pub(crate) fn require_dense(&self) -> Result<()> {
        if self.is_dense() {
            Ok(())
        } else {
            Err(Error::NonDenseDepth)
        }
    }

    /// (min, max) over valid pixels.
    pub fn valid_range(&self) -> Option<(f32, f32)> {
        self.depth
            .iter()
            .zip(&self.valid)
            .filter(|(_, &ok)| ok)
            .map(|(&d, _)| d)
            .fold(None, |acc, d| match acc {
                None => Some((d, d)),
                Some((lo, hi)) => Some((lo.min(d), hi.max(d))),
            })
    }

    pub fn to_plane(&self) -> Plane {
        Plane::from_vec(self.height, self.width, self.depth.clone()).expect("consistent")
    }
}

/// Propagates source pixels outward by 4-connected dilation rounds.
///
/// Each round assigns every still-empty pixel that touches a pixel filled in
/// an earlier round; the donor is the first such neighbour in scan order
/// (up, left, right, down). Returns, per pixel, the index of the source pixel
/// whose value it inherits, or `None` if it lies more than `max_rounds`
/// Manhattan steps away from every source.
pub(crate) fn propagate_nearest(
    height: usize,
    width: usize,
    is_source: &[bool],
    max_rounds: Option<usize>,
) -> Vec<Option<usize>> {
    let n = height * width;
    let mut origin: Vec<Option<usize>> = (0..n).map(|i| is_source[i].then_some(i)).collect();
    let mut frontier: Vec<usize> = (0..n).filter(|&i| is_source[i]).collect();
    let mut round = 0usize;
    let mut queued = vec![false; n];
    while !frontier.is_empty() {
        if max_rounds.is_some_and(|m| round >= m) {
            break;
        }
        round += 1;
        let mut candidates = Vec::new();
        for &i in &frontier {
            for j in neighbours(i, height, width).into_iter().flatten() {
                if origin[j].is_none() && !queued[j] {
                    queued[j] = true;
                    candidates.push(j);
                }
            }
        }
        candidates.sort_unstable();
        // Donors must come from earlier rounds, so resolve against a snapshot.
        let assigned: Vec<(usize, usize)> = candidates
            .iter()
            .map(|&j| {
                let donor = neighbours(j, height, width)
                    .into_iter()
                    .flatten()
                    .find_map(|k| origin[k])
                    .expect("candidate touches a filled pixel");
                (j, donor)
            })
            .collect();
        for &(j, donor) in &assigned {
            origin[j] = Some(donor);
        }
        frontier = candidates;
    }
    origin
}

#[inline]
fn neighbours(i: usize, height: usize, width: usize) -> [Option<usize>; 4] {
    let y = i / width;
    let x = i % width;
    [
        (y > 0).then(|| i - width),
        (x > 0).then(|| i - 1),
        (x + 1 < width).then(|| i + 1),
        (y + 1 < height).then(|| i + width),
    ]
}

/// Densifies a sparse depth map by nearest-valid dilation.
///
/// Valid pixels keep their depth; each hole takes the depth of the valid pixel
/// reached first by 4-connected dilation (Manhattan distance, ties broken in
/// scan order).
pub fn fill_depth(sparse: &DepthMap) -> Result<DepthMap> {
    if sparse.valid_count() == 0 {
        return Err(Error::NoValidDepth);
    }
    if sparse.is_dense() {
        return Ok(sparse.clone());
    }
    let origin = propagate_nearest(sparse.height, sparse.width, &sparse.valid, None);
    let depth = origin
        .iter()
        .map(|o| sparse.depth[o.expect("every pixel is reachable from a valid pixel")])
        .collect();
    Ok(DepthMap {
        height: sparse.height,
        width: sparse.width,
        depth,
        valid: vec![true; sparse.height * sparse.width],
    })
}
