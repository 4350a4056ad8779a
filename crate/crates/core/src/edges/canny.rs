//! Canny edge detection: Gaussian smoothing, 3×3 Sobel gradients,
//! orientation-quantised non-maximum suppression and double-threshold
//! hysteresis.

use crate::ingest::GrayImage;

use super::EdgeError;

/// Gradient magnitudes below this (intensity levels per pixel) are treated as
/// zero. Keeps flat regions and numerical residue out of the threshold
/// statistics.
pub const MIN_GRADIENT_MAGNITUDE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CannyConfig {
    pub gaussian_sigma: f64,
    /// Quantile of the non-zero gradient magnitudes used as the high threshold.
    pub high_threshold_percentile: f64,
    /// Low threshold as a fraction of the high one.
    pub low_high_ratio: f64,
}

impl Default for CannyConfig {
    fn default() -> Self {
        Self {
            gaussian_sigma: 1.4,
            high_threshold_percentile: 0.8,
            low_high_ratio: 0.4,
        }
    }
}

impl CannyConfig {
    pub fn validate(&self) -> Result<(), EdgeError> {
        let ok = self.gaussian_sigma > 0.0
            && self.gaussian_sigma.is_finite()
            && self.high_threshold_percentile > 0.0
            && self.high_threshold_percentile <= 1.0
            && self.low_high_ratio > 0.0
            && self.low_high_ratio < 1.0;
        if ok {
            Ok(())
        } else {
            Err(EdgeError::InvalidConfig(format!("{self:?}")))
        }
    }
}

/// Per-pixel image derivatives of the smoothed image.
#[derive(Debug, Clone)]
pub struct GradientField {
    pub width: usize,
    pub height: usize,
    pub gx: Vec<f64>,
    pub gy: Vec<f64>,
    pub magnitude: Vec<f64>,
}

impl GradientField {
    /// Orientation in radians, `[0, π)` when unsigned, `[0, 2π)` when signed.
    /// A left-to-right intensity step has orientation 0.
    pub fn orientation(&self, idx: usize, signed: bool) -> f64 {
        let (gx, gy) = (self.gx[idx], self.gy[idx]);
        if !signed {
            // fold into the upper half-plane so g and -g agree bit for bit
            let (fx, fy) = if gy < 0.0 || (gy == 0.0 && gx < 0.0) {
                (-gx, -gy)
            } else {
                (gx, gy.abs())
            };
            let theta = fy.atan2(fx);
            return if theta >= std::f64::consts::PI { 0.0 } else { theta };
        }
        let mut theta = gy.atan2(gx);
        if theta < 0.0 {
            theta += std::f64::consts::TAU;
        }
        if theta >= std::f64::consts::TAU {
            theta -= std::f64::consts::TAU;
        }
        theta
    }

    /// Multiply all gradients by `c`.
    pub fn scaled(&self, c: f64) -> GradientField {
        GradientField {
            width: self.width,
            height: self.height,
            gx: self.gx.iter().map(|v| v * c).collect(),
            gy: self.gy.iter().map(|v| v * c).collect(),
            magnitude: self.magnitude.iter().map(|v| v * c).collect(),
        }
    }
}

/// Binary edge image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeMask {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

impl EdgeMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            bits,
        }
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, on: bool) {
        self.bits[y * self.width + x] = on;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Mirror an out-of-range index without repeating the border sample
/// (`-1 -> 1`, `n -> n - 2`).
fn reflect101(mut i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let last = n as isize - 1;
    while i < 0 || i > last {
        i = if i < 0 { -i } else { 2 * last - i };
    }
    i as usize
}

/// Separable Gaussian blur with reflected borders.
pub fn gaussian_blur(img: &GrayImage, sigma: f64) -> Vec<f64> {
    let (w, h) = (img.width(), img.height());
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as isize;
    let src: Vec<f64> = img.data().iter().map(|&v| v as f64).collect();

    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (k, weight) in kernel.iter().enumerate() {
                acc += weight * row[reflect101(x as isize + k as isize - radius, w)];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, weight) in kernel.iter().enumerate() {
                acc += weight * tmp[reflect101(y as isize + k as isize - radius, h) * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Relative size below which a gradient component is treated as zero.
const ROUNDING_RESIDUE: f64 = 1e-12;

/// Sobel derivatives normalised by 1/8, so a unit ramp has gradient 1.
/// Borders are reflected.
pub fn sobel(smoothed: &[f64], width: usize, height: usize) -> GradientField {
    let at = |x: isize, y: isize| smoothed[reflect101(y, height) * width + reflect101(x, width)];
    let n = width * height;
    let (mut gx, mut gy, mut magnitude) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for y in 0..height as isize {
        for x in 0..width as isize {
            let dx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            let dy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
            let i = y as usize * width + x as usize;
            let (mut cx, mut cy) = (dx / 8.0, dy / 8.0);
            // rounding residue from the blur, not a real component
            let floor = ROUNDING_RESIDUE * cx.abs().max(cy.abs());
            if cx.abs() < floor {
                cx = 0.0;
            }
            if cy.abs() < floor {
                cy = 0.0;
            }
            gx[i] = cx;
            gy[i] = cy;
            magnitude[i] = cx.hypot(cy);
        }
    }
    GradientField {
        width,
        height,
        gx,
        gy,
        magnitude,
    }
}

pub fn gradients(img: &GrayImage, sigma: f64) -> GradientField {
    sobel(&gaussian_blur(img, sigma), img.width(), img.height())
}

/// Thin ridges: a pixel survives when its magnitude is `>=` the neighbour
/// behind it and `>` the neighbour ahead of it along the quantised gradient
/// direction. The asymmetric comparison keeps exactly one pixel of a
/// symmetric plateau pair.
fn non_maximum_suppression(g: &GradientField) -> Vec<f64> {
    let (w, h) = (g.width as isize, g.height as isize);
    let mag = |x: isize, y: isize| {
        if x < 0 || y < 0 || x >= w || y >= h {
            0.0
        } else {
            g.magnitude[(y * w + x) as usize]
        }
    };
    let mut out = vec![0.0; g.magnitude.len()];
    for y in 0..h {
        for x in 0..w {
            let i = (y * w + x) as usize;
            let m = g.magnitude[i];
            if m < MIN_GRADIENT_MAGNITUDE {
                continue;
            }
            let deg = g.orientation(i, false).to_degrees();
            let (dx, dy) = if !(22.5..157.5).contains(&deg) {
                (1, 0)
            } else if deg < 67.5 {
                (1, 1)
            } else if deg < 112.5 {
                (0, 1)
            } else {
                (-1, 1)
            };
            if m >= mag(x - dx, y - dy) && m > mag(x + dx, y + dy) {
                out[i] = m;
            }
        }
    }
    out
}

/// Value below which a fraction `p` of `values` fall (nearest-rank).
fn quantile(mut values: Vec<f64>, p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let rank = ((p * values.len() as f64).ceil() as usize).clamp(1, values.len()) - 1;
    let (_, v, _) = values.select_nth_unstable_by(rank, f64::total_cmp);
    Some(*v)
}

/// Runs Canny and also returns the gradient field it was computed from.
pub fn canny_with_gradients(
    img: &GrayImage,
    cfg: &CannyConfig,
) -> Result<(EdgeMask, GradientField), EdgeError> {
    cfg.validate()?;
    if img.width() == 0 || img.height() == 0 {
        return Err(EdgeError::EmptyImage);
    }
    let g = gradients(img, cfg.gaussian_sigma);
    let (w, h) = (g.width, g.height);
    let mut mask = EdgeMask::new(w, h);

    let significant: Vec<f64> = g
        .magnitude
        .iter()
        .copied()
        .filter(|&m| m >= MIN_GRADIENT_MAGNITUDE)
        .collect();
    let Some(high) = quantile(significant, cfg.high_threshold_percentile) else {
        return Ok((mask, g));
    };
    let high = high.max(MIN_GRADIENT_MAGNITUDE);
    let low = (high * cfg.low_high_ratio).max(MIN_GRADIENT_MAGNITUDE);

    let thin = non_maximum_suppression(&g);
    let mut stack: Vec<usize> = Vec::new();
    for (i, &m) in thin.iter().enumerate() {
        if m >= high {
            mask.bits[i] = true;
            stack.push(i);
        }
    }
    while let Some(i) = stack.pop() {
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if !mask.bits[j] && thin[j] >= low {
                    mask.bits[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    Ok((mask, g))
}

pub fn canny(img: &GrayImage, cfg: &CannyConfig) -> Result<EdgeMask, EdgeError> {
    canny_with_gradients(img, cfg).map(|(mask, _)| mask)
}
