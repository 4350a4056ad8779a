//! Pooling-based edge grouping.
//!
//! The edge label map is repeatedly pooled with a sliding window. Every
//! window that sees two or more distinct components is a merge event; each
//! event emits a proposal for the co-occurring components themselves and,
//! when it joins groups, another for the whole transitive group. Pooling
//! stops once the map has no zero cells left, collapses to a single cell,
//! or stops changing.

mod union_find;

pub use union_find::GroupState;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::edges::EdgeLabelMap;
use crate::geometry::Rect;

#[derive(Debug, Error, PartialEq)]
pub enum GroupingError {
    #[error("invalid pooling configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum PoolMode {
    #[default]
    Max,
    Min,
}

impl FromStr for PoolMode {
    type Err = GroupingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "max" => Ok(PoolMode::Max),
            "min" => Ok(PoolMode::Min),
            other => Err(GroupingError::InvalidConfig(format!("unknown pool mode `{other}`"))),
        }
    }
}

impl fmt::Display for PoolMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PoolMode::Max => "max",
            PoolMode::Min => "min",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PoolingConfig {
    pub window_h: usize,
    pub window_w: usize,
    pub stride_v: usize,
    pub stride_h: usize,
    pub mode: PoolMode,
    pub max_iterations: usize,
}

impl Default for PoolingConfig {
    fn default() -> Self {
        Self {
            window_h: 1,
            window_w: 3,
            stride_v: 1,
            stride_h: 2,
            mode: PoolMode::Max,
            max_iterations: 64,
        }
    }
}

impl PoolingConfig {
    pub fn with_geometry(window_h: usize, window_w: usize, stride_v: usize, stride_h: usize) -> Self {
        Self {
            window_h,
            window_w,
            stride_v,
            stride_h,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), GroupingError> {
        if self.window_h == 0 || self.window_w == 0 || self.stride_v == 0 || self.stride_h == 0 {
            return Err(GroupingError::InvalidConfig(
                "window and stride sizes must be at least 1".into(),
            ));
        }
        if self.window_h == 1 && self.window_w == 1 {
            return Err(GroupingError::InvalidConfig(
                "a 1x1 pooling window never groups anything".into(),
            ));
        }
        if self.max_iterations == 0 {
            return Err(GroupingError::InvalidConfig("max_iterations must be positive".into()));
        }
        Ok(())
    }

    /// Upper bound on the pooling iterations for a `width × height` map: the
    /// steps until the grid dimensions stop shrinking, plus one step that may
    /// still drop skipped cells and one that confirms the fixed point.
    pub fn iteration_bound(&self, width: usize, height: usize) -> usize {
        let (mut w, mut h) = (width, height);
        let mut steps = 0;
        loop {
            let next = (
                pooled_len(w, self.window_w, self.stride_h),
                pooled_len(h, self.window_h, self.stride_v),
            );
            if next == (w, h) {
                return steps + 2;
            }
            (w, h) = next;
            steps += 1;
        }
    }
}

/// Output length of pooling `n` cells after right/bottom zero padding so
/// that the last window fits.
pub fn pooled_len(n: usize, window: usize, stride: usize) -> usize {
    if n <= window {
        1
    } else {
        (n - window).div_ceil(stride) + 1
    }
}

/// Working grid: pooled label values plus the component id of each value.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolGrid {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
    pub ids: Vec<u32>,
}

impl PoolGrid {
    pub fn from_label_map(map: &EdgeLabelMap) -> Self {
        Self {
            width: map.width,
            height: map.height,
            values: map.labels.clone(),
            ids: map.ids.clone(),
        }
    }

    pub fn has_zero(&self) -> bool {
        self.ids.contains(&0)
    }
}

/// A window in which two or more distinct components co-occur.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergeEvent {
    /// Sorted distinct component ids seen in the window.
    pub ids: Vec<u32>,
    pub out_row: usize,
    pub out_col: usize,
}

/// One pooling pass. Windows are visited row-major, so events come out in
/// row-major order of their output cell.
pub fn pool_step(grid: &PoolGrid, cfg: &PoolingConfig) -> (PoolGrid, Vec<MergeEvent>) {
    let out_w = pooled_len(grid.width, cfg.window_w, cfg.stride_h);
    let out_h = pooled_len(grid.height, cfg.window_h, cfg.stride_v);
    let mut values = vec![0.0; out_w * out_h];
    let mut ids = vec![0u32; out_w * out_h];
    let mut events = Vec::new();
    let mut seen: Vec<u32> = Vec::with_capacity(cfg.window_h * cfg.window_w);

    for oy in 0..out_h {
        let y0 = oy * cfg.stride_v;
        let y1 = (y0 + cfg.window_h).min(grid.height);
        for ox in 0..out_w {
            let x0 = ox * cfg.stride_h;
            let x1 = (x0 + cfg.window_w).min(grid.width);
            seen.clear();
            let mut best: Option<(f64, u32)> = None;
            for y in y0..y1 {
                let row = y * grid.width;
                for x in x0..x1 {
                    let id = grid.ids[row + x];
                    if id == 0 {
                        continue;
                    }
                    if !seen.contains(&id) {
                        seen.push(id);
                    }
                    let cand = (grid.values[row + x], id);
                    best = Some(match best {
                        None => cand,
                        Some(cur) => pick(cur, cand, cfg.mode),
                    });
                }
            }
            let o = oy * out_w + ox;
            if let Some((v, id)) = best {
                values[o] = v;
                ids[o] = id;
            }
            if seen.len() >= 2 {
                seen.sort_unstable();
                events.push(MergeEvent {
                    ids: seen.clone(),
                    out_row: oy,
                    out_col: ox,
                });
            }
        }
    }
    (
        PoolGrid {
            width: out_w,
            height: out_h,
            values,
            ids,
        },
        events,
    )
}

/// Max keeps the larger value, min the smaller; equal values fall back to
/// the id in the same direction.
fn pick(cur: (f64, u32), cand: (f64, u32), mode: PoolMode) -> (f64, u32) {
    let ord = cand.0.total_cmp(&cur.0).then(cand.1.cmp(&cur.1));
    let take = match mode {
        PoolMode::Max => ord.is_gt(),
        PoolMode::Min => ord.is_lt(),
    };
    if take {
        cand
    } else {
        cur
    }
}

/// A candidate text region.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    /// Sorted component ids.
    pub members: Vec<u32>,
    /// Tight box over the members' pixels, in image coordinates.
    pub bbox: Rect,
    pub score: Option<f64>,
    pub birth_iteration: usize,
}

/// Why the pooling loop stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// The map had no components; nothing was generated.
    DegenerateInput,
    NoZeroCells,
    SingleCell,
    FixedPoint,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    /// Unique-by-bbox proposals in emission order.
    pub proposals: Vec<Proposal>,
    /// Pooling passes performed.
    pub iterations: usize,
    pub termination: Termination,
    /// Final component partition, sorted.
    pub groups: Vec<Vec<u32>>,
}

pub fn generate_proposals(
    edge_map: &EdgeLabelMap,
    cfg: &PoolingConfig,
) -> Result<Generation, GroupingError> {
    generate_proposals_traced(edge_map, cfg, |_, _| {})
}

/// As [`generate_proposals`], calling `on_event(iteration, event)` for every
/// merge event in processing order.
pub fn generate_proposals_traced(
    edge_map: &EdgeLabelMap,
    cfg: &PoolingConfig,
    mut on_event: impl FnMut(usize, &MergeEvent),
) -> Result<Generation, GroupingError> {
    cfg.validate()?;
    if edge_map.components.is_empty() {
        return Ok(Generation {
            proposals: Vec::new(),
            iterations: 0,
            termination: Termination::DegenerateInput,
            groups: Vec::new(),
        });
    }

    let bboxes: Vec<Rect> = edge_map.components.iter().map(|c| c.bbox).collect();
    let mut state = GroupState::new(&bboxes);
    let mut emitter = Emitter::default();
    for c in &edge_map.components {
        emitter.emit(vec![c.id], c.bbox, 0);
    }

    let mut grid = PoolGrid::from_label_map(edge_map);
    let mut iterations = 0;
    let termination = loop {
        if !grid.has_zero() {
            break Termination::NoZeroCells;
        }
        if grid.width == 1 && grid.height == 1 {
            break Termination::SingleCell;
        }
        if iterations >= cfg.max_iterations {
            break Termination::MaxIterations;
        }
        let (next, events) = pool_step(&grid, cfg);
        iterations += 1;
        for event in &events {
            on_event(iterations, event);
            let raw_box = event
                .ids
                .iter()
                .map(|&id| bboxes[id as usize - 1])
                .reduce(|a, b| a.union(&b))
                .expect("events hold at least two ids");
            emitter.emit(event.ids.clone(), raw_box, iterations);

            let first = event.ids[0];
            let mut joined = false;
            for &other in &event.ids[1..] {
                joined |= state.union(first, other);
            }
            if joined {
                let mut members = state.members(first).to_vec();
                members.sort_unstable();
                let bbox = state.bbox(first);
                emitter.emit(members, bbox, iterations);
            }
        }
        if next == grid {
            break Termination::FixedPoint;
        }
        grid = next;
    };

    Ok(Generation {
        proposals: emitter.finish(),
        iterations,
        termination,
        groups: state.partition(),
    })
}

#[derive(Default)]
struct Emitter {
    seen_members: HashSet<Vec<u32>>,
    proposals: Vec<Proposal>,
}

impl Emitter {
    fn emit(&mut self, members: Vec<u32>, bbox: Rect, birth_iteration: usize) {
        if self.seen_members.contains(&members) {
            return;
        }
        self.seen_members.insert(members.clone());
        self.proposals.push(Proposal {
            members,
            bbox,
            score: None,
            birth_iteration,
        });
    }

    /// Drop later proposals whose bbox repeats an earlier one.
    fn finish(self) -> Vec<Proposal> {
        let mut seen_boxes = HashSet::new();
        self.proposals
            .into_iter()
            .filter(|p| {
                seen_boxes.insert([
                    p.bbox.x_min.to_bits(),
                    p.bbox.y_min.to_bits(),
                    p.bbox.x_max.to_bits(),
                    p.bbox.y_max.to_bits(),
                ])
            })
            .collect()
    }
}
