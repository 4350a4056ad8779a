//! Histogram of oriented gradients restricted to edge pixels (HoGe).
//!
//! One global histogram per box: every edge pixel inside the box adds its
//! gradient magnitude to the bin of its orientation, then the histogram is
//! L2-normalised. Orientation is unsigned (`[0°, 180°)`) unless requested
//! otherwise.

use thiserror::Error;

use crate::edges::{EdgeMask, GradientField};
use crate::geometry::Rect;

pub const DEFAULT_DIMS: usize = 120;

#[derive(Debug, Error, PartialEq)]
pub enum HogeError {
    #[error("box {0} extends outside the {1}x{2} image")]
    BoxOutOfBounds(Rect, usize, usize),
    #[error("histogram needs at least 2 bins, got {0}")]
    InvalidDims(usize),
    #[error("gradient field and edge mask differ in size")]
    DimensionMismatch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HogeVector {
    pub bins: Vec<f64>,
    /// No edge pixel with non-zero gradient fell in the box.
    pub empty: bool,
}

impl HogeVector {
    pub fn dim(&self) -> usize {
        self.bins.len()
    }

    /// L2-normalise a raw magnitude histogram.
    pub fn from_raw(raw: Vec<f64>) -> Self {
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 && norm.is_finite() {
            Self {
                bins: raw.into_iter().map(|v| v / norm).collect(),
                empty: false,
            }
        } else {
            Self {
                bins: vec![0.0; raw.len()],
                empty: true,
            }
        }
    }
}

/// Bin of an orientation expressed as a fraction of the full period.
#[inline]
fn bin_of(fraction: f64, dims: usize) -> usize {
    ((fraction * dims as f64) as usize).min(dims - 1)
}

fn period(signed: bool) -> f64 {
    if signed {
        std::f64::consts::TAU
    } else {
        std::f64::consts::PI
    }
}

/// Integer pixel range `[c0, c1) × [r0, r1)` covered by `bbox`.
fn pixel_range(bbox: &Rect, width: usize, height: usize) -> Result<(usize, usize, usize, usize), HogeError> {
    let oob = bbox.x_min < 0.0
        || bbox.y_min < 0.0
        || bbox.x_max > width as f64
        || bbox.y_max > height as f64
        || bbox.is_degenerate();
    if oob {
        return Err(HogeError::BoxOutOfBounds(*bbox, width, height));
    }
    Ok((
        bbox.x_min.floor() as usize,
        bbox.y_min.floor() as usize,
        (bbox.x_max.ceil() as usize).min(width),
        (bbox.y_max.ceil() as usize).min(height),
    ))
}

/// Unnormalised histogram over the edge pixels of `bbox`.
pub fn hoge_raw(
    gradients: &GradientField,
    edge_mask: &EdgeMask,
    bbox: &Rect,
    dims: usize,
    signed: bool,
) -> Result<Vec<f64>, HogeError> {
    if dims < 2 {
        return Err(HogeError::InvalidDims(dims));
    }
    if gradients.width != edge_mask.width || gradients.height != edge_mask.height {
        return Err(HogeError::DimensionMismatch);
    }
    let (c0, r0, c1, r1) = pixel_range(bbox, edge_mask.width, edge_mask.height)?;
    let mut raw = vec![0.0; dims];
    let p = period(signed);
    for y in r0..r1 {
        for x in c0..c1 {
            let i = y * edge_mask.width + x;
            if edge_mask.bits[i] {
                let theta = gradients.orientation(i, signed);
                raw[bin_of(theta / p, dims)] += gradients.magnitude[i];
            }
        }
    }
    Ok(raw)
}

/// HoGe descriptor of one box, scanning every pixel in it.
pub fn hoge(
    gradients: &GradientField,
    edge_mask: &EdgeMask,
    bbox: &Rect,
    dims: usize,
    signed: bool,
) -> Result<HogeVector, HogeError> {
    hoge_raw(gradients, edge_mask, bbox, dims, signed).map(HogeVector::from_raw)
}

#[derive(Debug, Clone, Copy)]
struct EdgeSample {
    col: u32,
    /// Orientation as a fraction of the period, in `[0, 1)`.
    fraction: f64,
    magnitude: f64,
}

/// Row-indexed list of edge pixels for evaluating many boxes on one image.
/// Only edge pixels are visited, and each row is entered by binary search.
#[derive(Debug, Clone)]
pub struct EdgeIndex {
    width: usize,
    height: usize,
    signed: bool,
    row_start: Vec<usize>,
    samples: Vec<EdgeSample>,
}

impl EdgeIndex {
    pub fn new(gradients: &GradientField, edge_mask: &EdgeMask, signed: bool) -> Result<Self, HogeError> {
        if gradients.width != edge_mask.width || gradients.height != edge_mask.height {
            return Err(HogeError::DimensionMismatch);
        }
        let (w, h) = (edge_mask.width, edge_mask.height);
        let p = period(signed);
        let mut row_start = Vec::with_capacity(h + 1);
        let mut samples = Vec::new();
        for y in 0..h {
            row_start.push(samples.len());
            for x in 0..w {
                let i = y * w + x;
                if edge_mask.bits[i] {
                    samples.push(EdgeSample {
                        col: x as u32,
                        fraction: gradients.orientation(i, signed) / p,
                        magnitude: gradients.magnitude[i],
                    });
                }
            }
        }
        row_start.push(samples.len());
        Ok(Self {
            width: w,
            height: h,
            signed,
            row_start,
            samples,
        })
    }

    pub fn signed(&self) -> bool {
        self.signed
    }

    pub fn raw(&self, bbox: &Rect, dims: usize) -> Result<Vec<f64>, HogeError> {
        if dims < 2 {
            return Err(HogeError::InvalidDims(dims));
        }
        let (c0, r0, c1, r1) = pixel_range(bbox, self.width, self.height)?;
        let mut raw = vec![0.0; dims];
        for y in r0..r1 {
            let row = &self.samples[self.row_start[y]..self.row_start[y + 1]];
            let start = row.partition_point(|s| (s.col as usize) < c0);
            for s in row[start..].iter().take_while(|s| (s.col as usize) < c1) {
                raw[bin_of(s.fraction, dims)] += s.magnitude;
            }
        }
        Ok(raw)
    }

    pub fn hoge(&self, bbox: &Rect, dims: usize) -> Result<HogeVector, HogeError> {
        self.raw(bbox, dims).map(HogeVector::from_raw)
    }
}
