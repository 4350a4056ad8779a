//! Recall evaluation: IoU, recall at a proposal budget, recall-vs-IoU and
//! recall-vs-budget reports, and the parameter sweeps.
//!
//! A ground-truth box counts as recalled when any of the top-`budget`
//! proposals overlaps it at the IoU threshold; one proposal may recall
//! several boxes. Difficult boxes are left out of both counts.

mod sweep;

pub use sweep::{
    generation_lattice, ranking_lattice, split_train_test, sweep_generation, sweep_ranking,
    write_generation_csv, write_ranking_csv, GenerationRow, RankingRow, SweepImage,
};

use std::io::{self, Write};
use std::path::PathBuf;
use std::time::Duration;

use thiserror::Error;

use crate::geometry::Rect;
use crate::ingest::GroundTruthBox;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("box {0} has zero area")]
    ZeroArea(Rect),
    #[error("{proposals} proposal lists for {gt} ground-truth lists")]
    LengthMismatch { proposals: usize, gt: usize },
    #[error("dataset has no images")]
    EmptyDataset,
    #[error("cannot write {0}: {1}")]
    Io(PathBuf, #[source] io::Error),
}

/// Thresholds averaged by the sweeps.
pub const SWEEP_THRESHOLDS: [f64; 3] = [0.5, 0.7, 0.8];
/// Fixed IoU of the recall-vs-budget curve.
pub const CURVE_IOU: f64 = 0.8;
pub const CURVE_BUDGETS: [usize; 14] = [1, 2, 5, 10, 20, 50, 100, 200, 300, 500, 700, 1000, 1500, 2000];

/// IoU thresholds 0.50, 0.55, ..., 1.00.
pub fn report_thresholds() -> Vec<f64> {
    (0..=10).map(|i| (50 + 5 * i) as f64 / 100.0).collect()
}

pub fn iou(a: &Rect, b: &Rect) -> Result<f64, EvalError> {
    for r in [a, b] {
        if r.is_degenerate() {
            return Err(EvalError::ZeroArea(*r));
        }
    }
    Ok(a.iou(b))
}

/// For every non-difficult ground-truth box, the rank of the first proposal
/// overlapping it at `iou_t`, if any.
pub fn first_hit_ranks(proposals: &[Rect], gt: &[GroundTruthBox], iou_t: f64) -> Vec<Option<usize>> {
    gt.iter()
        .filter(|g| !g.difficult)
        .map(|g| proposals.iter().position(|p| p.iou(&g.rect) >= iou_t))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RecallStats {
    pub matched: usize,
    pub total: usize,
}

impl RecallStats {
    /// Matched fraction; 0 when there is nothing to recall.
    pub fn recall(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.matched as f64 / self.total as f64
        }
    }

    pub fn zero_gt(&self) -> bool {
        self.total == 0
    }
}

fn check_lengths<A, B>(proposals: &[A], gt: &[B]) -> Result<(), EvalError> {
    if proposals.len() != gt.len() {
        return Err(EvalError::LengthMismatch {
            proposals: proposals.len(),
            gt: gt.len(),
        });
    }
    Ok(())
}

/// Recall over a dataset; `proposals[i]` and `gt[i]` belong to image `i`.
pub fn recall_at(
    proposals: &[Vec<Rect>],
    gt: &[Vec<GroundTruthBox>],
    iou_t: f64,
    budget: usize,
) -> Result<RecallStats, EvalError> {
    check_lengths(proposals, gt)?;
    let mut stats = RecallStats::default();
    for (p, g) in proposals.iter().zip(gt) {
        let top = &p[..budget.min(p.len())];
        for hit in first_hit_ranks(top, g, iou_t) {
            stats.total += 1;
            stats.matched += hit.is_some() as usize;
        }
    }
    Ok(stats)
}

/// Mean of [`recall_at`] over `thresholds`, with the zero-GT flag.
pub fn mean_recall(
    proposals: &[Vec<Rect>],
    gt: &[Vec<GroundTruthBox>],
    thresholds: &[f64],
    budget: usize,
) -> Result<(f64, bool), EvalError> {
    let mut sum = 0.0;
    let mut zero_gt = false;
    for &t in thresholds {
        let s = recall_at(proposals, gt, t, budget)?;
        sum += s.recall();
        zero_gt |= s.zero_gt();
    }
    Ok((sum / thresholds.len() as f64, zero_gt))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecallReport {
    /// `(iou threshold, recall)` at the full budget.
    pub recall: Vec<(f64, f64)>,
    /// Mean proposals per image.
    pub nppb: f64,
    /// `None` when timing was not recorded.
    pub mean_time_s: Option<f64>,
    pub curve_iou: f64,
    /// `(budget, recall at curve_iou)`.
    pub curve: Vec<(usize, f64)>,
    pub images: usize,
    pub gt_boxes: usize,
}

impl RecallReport {
    /// Builds the report from ranked proposal lists. `budget` bounds both the
    /// threshold table and the curve.
    pub fn compute(
        proposals: &[Vec<Rect>],
        gt: &[Vec<GroundTruthBox>],
        budget: usize,
        times: Option<&[Duration]>,
    ) -> Result<Self, EvalError> {
        check_lengths(proposals, gt)?;
        if proposals.is_empty() {
            return Err(EvalError::EmptyDataset);
        }
        let mut recall = Vec::new();
        let mut gt_boxes = 0;
        for t in report_thresholds() {
            let s = recall_at(proposals, gt, t, budget)?;
            gt_boxes = s.total;
            recall.push((t, s.recall()));
        }
        let ranks: Vec<Vec<Option<usize>>> = proposals
            .iter()
            .zip(gt)
            .map(|(p, g)| first_hit_ranks(p, g, CURVE_IOU))
            .collect();
        let curve = CURVE_BUDGETS
            .iter()
            .copied()
            .filter(|&b| b <= budget)
            .map(|b| {
                let stats = RecallStats {
                    matched: ranks.iter().flatten().filter(|r| r.is_some_and(|r| r < b)).count(),
                    total: gt_boxes,
                };
                (b, stats.recall())
            })
            .collect();
        let nppb = proposals.iter().map(|p| p.len().min(budget)).sum::<usize>() as f64 / proposals.len() as f64;
        let mean_time_s = times.map(|t| t.iter().map(Duration::as_secs_f64).sum::<f64>() / t.len().max(1) as f64);
        Ok(Self {
            recall,
            nppb,
            mean_time_s,
            curve_iou: CURVE_IOU,
            curve,
            images: proposals.len(),
            gt_boxes,
        })
    }

    pub fn recall_at_iou(&self, t: f64) -> Option<f64> {
        self.recall.iter().find(|(i, _)| (i - t).abs() < 1e-9).map(|&(_, r)| r)
    }

    /// `iou,recall,nppb,mean_time_s`, one row per threshold. Untimed reports
    /// leave the time column empty.
    pub fn write_summary<W: Write>(&self, mut w: W, header: &str) -> io::Result<()> {
        write_header(&mut w, header)?;
        writeln!(w, "iou,recall,nppb,mean_time_s")?;
        let time = self.mean_time_s.map(|t| format!("{t:.6}")).unwrap_or_default();
        for (t, r) in &self.recall {
            writeln!(w, "{t:.2},{r:.6},{:.3},{time}", self.nppb)?;
        }
        Ok(())
    }

    /// `budget,recall` at [`CURVE_IOU`].
    pub fn write_curve<W: Write>(&self, mut w: W, header: &str) -> io::Result<()> {
        write_header(&mut w, header)?;
        writeln!(w, "budget,recall")?;
        for (b, r) in &self.curve {
            writeln!(w, "{b},{r:.6}")?;
        }
        Ok(())
    }
}

/// Writes each line of `header` as a `# ` comment.
pub fn write_header<W: Write>(w: &mut W, header: &str) -> io::Result<()> {
    for line in header.lines() {
        writeln!(w, "# {line}")?;
    }
    Ok(())
}
