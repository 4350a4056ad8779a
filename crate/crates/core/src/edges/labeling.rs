//! 8-connected component labelling of an edge mask into an edge label map.

use std::fmt;
use std::str::FromStr;

use crate::geometry::Rect;

use super::{EdgeError, EdgeMask};

/// How pixels of a component are valued in the label map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum LabelMode {
    /// Component id in column-major discovery order (`searL`).
    #[default]
    SearchOrder,
    /// Largest gradient magnitude over the component (`maxE`).
    MaxGradient,
    /// Mean gradient magnitude over the component (`meanE`).
    MeanGradient,
}

impl FromStr for LabelMode {
    type Err = EdgeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "searl" => Ok(LabelMode::SearchOrder),
            "maxe" => Ok(LabelMode::MaxGradient),
            "meane" => Ok(LabelMode::MeanGradient),
            other => Err(EdgeError::InvalidConfig(format!("unknown label mode `{other}`"))),
        }
    }
}

impl fmt::Display for LabelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LabelMode::SearchOrder => "searl",
            LabelMode::MaxGradient => "maxe",
            LabelMode::MeanGradient => "meane",
        })
    }
}

/// One connected binary edge.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeComponent {
    pub id: u32,
    /// `(row, col)` pairs in flood-fill order.
    pub pixels: Vec<(u32, u32)>,
    pub bbox: Rect,
    pub mean_gradient: f64,
    pub max_gradient: f64,
}

/// Edge feature map: label values for pooling plus the component-id grid that
/// decides grouping.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeLabelMap {
    pub width: usize,
    pub height: usize,
    /// Row-major label values; 0 on non-edge pixels.
    pub labels: Vec<f64>,
    /// Row-major component ids; 0 on non-edge pixels.
    pub ids: Vec<u32>,
    pub components: Vec<EdgeComponent>,
    pub label_mode: LabelMode,
}

impl EdgeLabelMap {
    pub fn component(&self, id: u32) -> &EdgeComponent {
        &self.components[id as usize - 1]
    }

    pub fn edge_pixel_count(&self) -> usize {
        self.ids.iter().filter(|&&id| id != 0).count()
    }

    /// Build a map directly from an id grid (0 = background). Ids must be
    /// `1..=K`, each used at least once. Label values are the ids; intended for
    /// synthetic maps whose components are not necessarily 8-connected.
    pub fn from_id_grid(width: usize, height: usize, ids: Vec<u32>) -> Result<Self, EdgeError> {
        if ids.len() != width * height {
            return Err(EdgeError::DimensionMismatch);
        }
        let k = ids.iter().copied().max().unwrap_or(0) as usize;
        let mut pixels: Vec<Vec<(u32, u32)>> = vec![Vec::new(); k];
        for (i, &id) in ids.iter().enumerate() {
            if id != 0 {
                pixels[id as usize - 1].push(((i / width) as u32, (i % width) as u32));
            }
        }
        if let Some(missing) = pixels.iter().position(Vec::is_empty) {
            return Err(EdgeError::InvalidConfig(format!(
                "component id {} unused",
                missing + 1
            )));
        }
        let components = pixels
            .into_iter()
            .enumerate()
            .map(|(i, px)| make_component(i as u32 + 1, px, 0.0, 0.0))
            .collect();
        Ok(Self {
            width,
            height,
            labels: ids.iter().map(|&v| v as f64).collect(),
            ids,
            components,
            label_mode: LabelMode::SearchOrder,
        })
    }

    /// Same partition, different label values.
    pub fn relabeled(&self, mode: LabelMode) -> EdgeLabelMap {
        let mut out = self.clone();
        out.label_mode = mode;
        for (i, &id) in self.ids.iter().enumerate() {
            out.labels[i] = if id == 0 {
                0.0
            } else {
                label_value(self.component(id), mode)
            };
        }
        out
    }
}

fn make_component(id: u32, pixels: Vec<(u32, u32)>, sum: f64, max: f64) -> EdgeComponent {
    let (mut r0, mut c0, mut r1, mut c1) = (u32::MAX, u32::MAX, 0, 0);
    for &(r, c) in &pixels {
        r0 = r0.min(r);
        c0 = c0.min(c);
        r1 = r1.max(r);
        c1 = c1.max(c);
    }
    let mean = sum / pixels.len() as f64;
    EdgeComponent {
        id,
        bbox: Rect::from_pixel_span(c0 as usize, r0 as usize, c1 as usize, r1 as usize),
        pixels,
        mean_gradient: mean,
        max_gradient: max,
    }
}

fn label_value(c: &EdgeComponent, mode: LabelMode) -> f64 {
    match mode {
        LabelMode::SearchOrder => c.id as f64,
        LabelMode::MaxGradient => c.max_gradient,
        LabelMode::MeanGradient => c.mean_gradient,
    }
}

/// Labels 8-connected components. Ids are assigned in the order components
/// are first met scanning columns left to right, each column top to bottom.
pub fn label_components(mask: &EdgeMask, gradients: &[f64], mode: LabelMode) -> EdgeLabelMap {
    let (w, h) = (mask.width, mask.height);
    assert_eq!(gradients.len(), w * h, "gradient plane does not match mask");
    let mut ids = vec![0u32; w * h];
    let mut components = Vec::new();
    let mut stack = Vec::new();

    for x in 0..w {
        for y in 0..h {
            let seed = y * w + x;
            if !mask.bits[seed] || ids[seed] != 0 {
                continue;
            }
            let id = components.len() as u32 + 1;
            let mut pixels = Vec::new();
            let (mut sum, mut max) = (0.0f64, 0.0f64);
            ids[seed] = id;
            stack.push(seed);
            while let Some(i) = stack.pop() {
                let (px, py) = (i % w, i / w);
                pixels.push((py as u32, px as u32));
                sum += gradients[i];
                max = max.max(gradients[i]);
                for ny in py.saturating_sub(1)..=(py + 1).min(h - 1) {
                    for nx in px.saturating_sub(1)..=(px + 1).min(w - 1) {
                        let j = ny * w + nx;
                        if mask.bits[j] && ids[j] == 0 {
                            ids[j] = id;
                            stack.push(j);
                        }
                    }
                }
            }
            components.push(make_component(id, pixels, sum, max));
        }
    }

    let labels = ids
        .iter()
        .map(|&id| {
            if id == 0 {
                0.0
            } else {
                label_value(&components[id as usize - 1], mode)
            }
        })
        .collect();
    EdgeLabelMap {
        width: w,
        height: h,
        labels,
        ids,
        components,
        label_mode: mode,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask_from(rows: &[&str]) -> EdgeMask {
        let h = rows.len();
        let w = rows[0].len();
        EdgeMask::from_fn(w, h, |x, y| rows[y].as_bytes()[x] == b'#')
    }

    #[test]
    fn two_dots_in_column_order() {
        let mask = mask_from(&["...#", "#..."]);
        let map = label_components(&mask, &[1.0; 8], LabelMode::SearchOrder);
        assert_eq!(map.components.len(), 2);
        // the dot in column 0 is met first
        assert_eq!(map.ids[4], 1);
        assert_eq!(map.ids[3], 2);
        assert_eq!(map.labels[3], 2.0);
    }

    #[test]
    fn column_scan_beats_row_scan() {
        // Row-major order would meet the top-right dot first.
        let mask = mask_from(&["..#", "...", "#.."]);
        let map = label_components(&mask, &[0.0; 9], LabelMode::SearchOrder);
        assert_eq!(map.ids[6], 1);
        assert_eq!(map.ids[2], 2);
    }

    #[test]
    fn l_shape_and_diagonal_are_one_component() {
        let mask = mask_from(&["#...", "#...", "###.", "...#"]);
        let map = label_components(&mask, &[1.0; 16], LabelMode::SearchOrder);
        assert_eq!(map.components.len(), 1);
        assert_eq!(map.components[0].pixels.len(), 6);
        assert_eq!(map.components[0].bbox, Rect::new(0.0, 0.0, 4.0, 4.0));
    }

    #[test]
    fn mean_gradient_labels() {
        let mask = mask_from(&["##"]);
        let map = label_components(&mask, &[2.0, 4.0], LabelMode::MeanGradient);
        assert_eq!(map.labels, vec![3.0, 3.0]);
        let map = label_components(&mask, &[2.0, 4.0], LabelMode::MaxGradient);
        assert_eq!(map.labels, vec![4.0, 4.0]);
    }

    #[test]
    fn empty_mask_has_no_components() {
        let map = label_components(&EdgeMask::new(5, 5), &[0.0; 25], LabelMode::SearchOrder);
        assert!(map.components.is_empty());
        assert!(map.labels.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn id_grid_constructor() {
        let map = EdgeLabelMap::from_id_grid(5, 1, vec![1, 0, 2, 0, 1]).unwrap();
        assert_eq!(map.component(1).bbox, Rect::new(0.0, 0.0, 5.0, 1.0));
        assert!(EdgeLabelMap::from_id_grid(3, 1, vec![1, 0, 3]).is_err());
    }
}
