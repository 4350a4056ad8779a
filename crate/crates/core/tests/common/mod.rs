//! Shared test helpers: a straight-line pooling simulator used as an
//! independent oracle, and random label-map generators.
#![allow(dead_code)]

use std::collections::BTreeSet;

use poolprop::edges::{label_components, EdgeLabelMap, EdgeMask, LabelMode};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleProposal {
    pub members: Vec<u32>,
    /// `[x_min, y_min, x_max, y_max]` with exclusive max edges.
    pub bbox: [f64; 4],
    pub birth: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleRun {
    pub proposals: Vec<OracleProposal>,
    pub iterations: usize,
    /// `(iteration, sorted ids)` for every window holding two or more ids.
    pub events: Vec<(usize, Vec<u32>)>,
}

#[derive(Debug, Clone, Copy)]
pub struct Geometry {
    pub wh: usize,
    pub ww: usize,
    pub sv: usize,
    pub sh: usize,
    pub max_mode: bool,
    pub max_iterations: usize,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            wh: 1,
            ww: 3,
            sv: 1,
            sh: 2,
            max_mode: true,
            max_iterations: 64,
        }
    }
}

/// Length after zero padding until the last window lands exactly on the end.
fn padded_len(n: usize, window: usize, stride: usize) -> usize {
    let mut p = n.max(window);
    while (p - window) % stride != 0 {
        p += 1;
    }
    p
}

/// Simulates pooling on an id grid (label value = id) cell by cell.
pub fn simulate(width: usize, height: usize, ids: &[u32], g: Geometry) -> OracleRun {
    let k = ids.iter().copied().max().unwrap_or(0) as usize;
    let mut boxes = vec![[f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY]; k + 1];
    for r in 0..height {
        for c in 0..width {
            let id = ids[r * width + c] as usize;
            if id > 0 {
                let b = &mut boxes[id];
                b[0] = b[0].min(c as f64);
                b[1] = b[1].min(r as f64);
                b[2] = b[2].max(c as f64 + 1.0);
                b[3] = b[3].max(r as f64 + 1.0);
            }
        }
    }
    let box_of = |members: &[u32]| {
        let mut out = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        for &m in members {
            let b = boxes[m as usize];
            out = [out[0].min(b[0]), out[1].min(b[1]), out[2].max(b[2]), out[3].max(b[3])];
        }
        out
    };

    let mut emitted: Vec<OracleProposal> = Vec::new();
    let emit = |members: Vec<u32>, birth: usize, emitted: &mut Vec<OracleProposal>| {
        let bbox = box_of(&members);
        if !emitted.iter().any(|p| p.bbox == bbox) {
            emitted.push(OracleProposal { members, bbox, birth });
        }
    };
    if k == 0 {
        return OracleRun {
            proposals: Vec::new(),
            iterations: 0,
            events: Vec::new(),
        };
    }
    for id in 1..=k as u32 {
        emit(vec![id], 0, &mut emitted);
    }

    // group[id] = representative label of id's group
    let mut group: Vec<u32> = (0..=k as u32).collect();
    let mut events = Vec::new();
    let (mut w, mut h) = (width, height);
    let mut grid = ids.to_vec();
    let mut iterations = 0;
    loop {
        if !grid.contains(&0) || (w == 1 && h == 1) || iterations >= g.max_iterations {
            break;
        }
        let pw = padded_len(w, g.ww, g.sh);
        let ph = padded_len(h, g.wh, g.sv);
        let mut padded = vec![0u32; pw * ph];
        for r in 0..h {
            for c in 0..w {
                padded[r * pw + c] = grid[r * w + c];
            }
        }
        let out_w = (pw - g.ww) / g.sh + 1;
        let out_h = (ph - g.wh) / g.sv + 1;
        let mut next = vec![0u32; out_w * out_h];
        iterations += 1;
        for oy in 0..out_h {
            for ox in 0..out_w {
                let mut present = BTreeSet::new();
                for dy in 0..g.wh {
                    for dx in 0..g.ww {
                        let v = padded[(oy * g.sv + dy) * pw + ox * g.sh + dx];
                        if v != 0 {
                            present.insert(v);
                        }
                    }
                }
                let pick = if g.max_mode {
                    present.iter().next_back()
                } else {
                    present.iter().next()
                };
                next[oy * out_w + ox] = pick.copied().unwrap_or(0);
                if present.len() < 2 {
                    continue;
                }
                let raw: Vec<u32> = present.iter().copied().collect();
                events.push((iterations, raw.clone()));
                emit(raw.clone(), iterations, &mut emitted);
                let reps: BTreeSet<u32> = raw.iter().map(|&m| group[m as usize]).collect();
                if reps.len() > 1 {
                    let target = *reps.iter().next().unwrap();
                    for slot in group.iter_mut().skip(1) {
                        if reps.contains(slot) {
                            *slot = target;
                        }
                    }
                    let members: Vec<u32> = (1..=k as u32).filter(|&m| group[m as usize] == target).collect();
                    emit(members, iterations, &mut emitted);
                }
            }
        }
        let same = out_w == w && out_h == h && next == grid;
        w = out_w;
        h = out_h;
        grid = next;
        if same {
            break;
        }
    }
    OracleRun {
        proposals: emitted,
        iterations,
        events,
    }
}

/// Random mask labelled into 8-connected components, with at most
/// `max_components` components (extra components are erased).
pub fn random_connected_map(
    rng: &mut ChaCha8Rng,
    width: usize,
    height: usize,
    density: f64,
    max_components: usize,
) -> EdgeLabelMap {
    let bits: Vec<bool> = (0..width * height).map(|_| rng.gen_bool(density)).collect();
    let mut mask = EdgeMask::from_fn(width, height, |x, y| bits[y * width + x]);
    loop {
        let map = label_components(&mask, &vec![0.0; width * height], LabelMode::SearchOrder);
        if map.components.len() <= max_components {
            return map;
        }
        for &(r, c) in &map.components.last().unwrap().pixels {
            mask.set(c as usize, r as usize, false);
        }
    }
}

/// Random id grid where ids need not be connected or ordered by position.
pub fn random_id_map(rng: &mut ChaCha8Rng, width: usize, height: usize, density: f64, k: u32) -> EdgeLabelMap {
    loop {
        let ids: Vec<u32> = (0..width * height)
            .map(|_| if rng.gen_bool(density) { rng.gen_range(1..=k) } else { 0 })
            .collect();
        // compact the ids actually used to 1..=K'
        let used: BTreeSet<u32> = ids.iter().copied().filter(|&v| v != 0).collect();
        let remap = |v: u32| if v == 0 { 0 } else { used.iter().position(|&u| u == v).unwrap() as u32 + 1 };
        let ids: Vec<u32> = ids.into_iter().map(remap).collect();
        if let Ok(map) = EdgeLabelMap::from_id_grid(width, height, ids) {
            return map;
        }
    }
}

/// Random 1-row map with at most `max_runs` runs of edge cells.
pub fn random_row(rng: &mut ChaCha8Rng, width: usize, max_runs: usize) -> EdgeLabelMap {
    let density = rng.gen_range(0.1..0.6);
    random_connected_map(rng, width, 1, density, max_runs)
}

pub fn oracle_geometry_of(cfg: &poolprop::grouping::PoolingConfig) -> Geometry {
    Geometry {
        wh: cfg.window_h,
        ww: cfg.window_w,
        sv: cfg.stride_v,
        sh: cfg.stride_h,
        max_mode: cfg.mode == poolprop::grouping::PoolMode::Max,
        max_iterations: cfg.max_iterations,
    }
}

/// Compares the library's generation against the oracle on `map`;
/// `Err` describes the first mismatch.
pub fn check_against_oracle(map: &EdgeLabelMap, cfg: &poolprop::grouping::PoolingConfig) -> Result<(), String> {
    let mut events = Vec::new();
    let got = poolprop::grouping::generate_proposals_traced(map, cfg, |it, e| events.push((it, e.ids.clone())))
        .map_err(|e| e.to_string())?;
    let want = simulate(map.width, map.height, &map.ids, oracle_geometry_of(cfg));
    let got_props: Vec<OracleProposal> = got
        .proposals
        .iter()
        .map(|p| OracleProposal {
            members: p.members.clone(),
            bbox: [p.bbox.x_min, p.bbox.y_min, p.bbox.x_max, p.bbox.y_max],
            birth: p.birth_iteration,
        })
        .collect();
    if got_props != want.proposals {
        return Err(format!(
            "proposals differ on {}x{} {:?}:\n lib    {:?}\n oracle {:?}",
            map.width, map.height, map.ids, got_props, want.proposals
        ));
    }
    if events != want.events {
        return Err(format!("event traces differ: {events:?} vs {:?}", want.events));
    }
    if got.iterations != want.iterations {
        return Err(format!("iterations {} vs {}", got.iterations, want.iterations));
    }
    Ok(())
}
