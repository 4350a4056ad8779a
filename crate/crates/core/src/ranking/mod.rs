//! Proposal scoring against text / non-text templates, ranking, capping and
//! score-based non-maximum suppression.

mod kmeans;
mod templates;

pub use kmeans::{kmeans, medoids, Clustering, KMeansParams};
pub use templates::{train_templates, TemplateMethod, TemplateSet, DEFAULT_TEMPLATE_COUNT};

use std::cmp::Ordering;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::Rect;
use crate::grouping::Proposal;
use crate::hoge::{EdgeIndex, HogeError, HogeVector};
use crate::ingest::GroundTruthBox;

pub const DEFAULT_PROPOSAL_CAP: usize = 2000;

/// Negatives must overlap every ground-truth box by less than this IoU.
pub const NEGATIVE_MAX_IOU: f64 = 0.2;
/// ...and no ground-truth box may cover this fraction of the negative.
pub const NEGATIVE_MAX_COVERAGE: f64 = 0.5;
pub const MIN_NEGATIVE_SIDE: usize = 8;

#[derive(Debug, Error)]
pub enum RankingError {
    #[error("need {needed} non-empty {class} samples, have {available}")]
    InsufficientSamples {
        class: &'static str,
        needed: usize,
        available: usize,
    },
    #[error("descriptor has {actual} bins, expected {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("template file line {line}: {message}")]
    TemplateFormat { line: usize, message: String },
    #[error("cannot access {0}: {1}")]
    Io(PathBuf, #[source] std::io::Error),
    #[error("image {0}x{1} is smaller than the minimum {MIN_NEGATIVE_SIDE}x{MIN_NEGATIVE_SIDE} box")]
    ImageTooSmall(usize, usize),
    #[error("no valid negative box after {0} rejected draws")]
    ExhaustedSampling(usize),
    #[error(transparent)]
    Hoge(#[from] HogeError),
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    kmeans::sq_dist(a, b).sqrt()
}

/// Summed Euclidean distances `(d_t, d_nt)` from `f` to each template class.
pub fn template_distances(f: &HogeVector, templates: &TemplateSet) -> Result<(f64, f64), RankingError> {
    if f.dim() != templates.dim {
        return Err(RankingError::DimensionMismatch {
            expected: templates.dim,
            actual: f.dim(),
        });
    }
    let d_t = templates.text.iter().map(|t| distance(&f.bins, t)).sum();
    let d_nt = templates.nontext.iter().map(|t| distance(&f.bins, t)).sum();
    Ok((d_t, d_nt))
}

/// Text probability `d_nt / (d_nt + d_t)`.
pub fn score_from_distances(d_t: f64, d_nt: f64) -> f64 {
    let total = d_t + d_nt;
    if total <= 0.0 {
        log::warn!("feature coincides with every template; scoring 0.5");
        return 0.5;
    }
    (d_nt / total).clamp(0.0, 1.0)
}

/// Score in `[0, 1]`; empty descriptors score 0.
pub fn score(f: &HogeVector, templates: &TemplateSet) -> Result<f64, RankingError> {
    let (d_t, d_nt) = template_distances(f, templates)?;
    if f.empty {
        return Ok(0.0);
    }
    Ok(score_from_distances(d_t, d_nt))
}

/// Sets `score` on every proposal from the HoGe of its box.
pub fn score_proposals(
    proposals: &mut [Proposal],
    index: &EdgeIndex,
    templates: &TemplateSet,
) -> Result<(), RankingError> {
    for p in proposals.iter_mut() {
        let f = index.hoge(&p.bbox, templates.dim)?;
        p.score = Some(score(&f, templates)?);
    }
    Ok(())
}

/// Ranking order: higher score, then earlier birth iteration, then smaller
/// area, then lexicographic box. Unscored proposals sort last.
pub fn rank_cmp(a: &Proposal, b: &Proposal) -> Ordering {
    let score = |p: &Proposal| p.score.unwrap_or(f64::NEG_INFINITY);
    score(b)
        .total_cmp(&score(a))
        .then(a.birth_iteration.cmp(&b.birth_iteration))
        .then(a.bbox.area().total_cmp(&b.bbox.area()))
        .then(a.bbox.lex_cmp(&b.bbox))
}

/// Sort by [`rank_cmp`] and keep the first `cap`.
pub fn rank_and_cap(mut proposals: Vec<Proposal>, cap: usize) -> Vec<Proposal> {
    proposals.sort_by(rank_cmp);
    proposals.truncate(cap);
    proposals
}

/// Indices kept by greedy suppression over boxes already in rank order.
pub fn nms_indices(boxes: &[Rect], iou_threshold: f64) -> Vec<usize> {
    let mut kept: Vec<usize> = Vec::new();
    for (i, b) in boxes.iter().enumerate() {
        if kept.iter().all(|&k| boxes[k].iou(b) < iou_threshold) {
            kept.push(i);
        }
    }
    kept
}

/// Keeps each proposal unless it overlaps an already kept, higher-ranked one
/// at IoU ≥ `iou_threshold`.
pub fn nms(proposals: &[Proposal], iou_threshold: f64) -> Vec<Proposal> {
    let boxes: Vec<Rect> = proposals.iter().map(|p| p.bbox).collect();
    nms_indices(&boxes, iou_threshold)
        .into_iter()
        .map(|i| proposals[i].clone())
        .collect()
}

fn acceptable_negative(candidate: &Rect, gt: &[GroundTruthBox]) -> bool {
    let area = candidate.area();
    gt.iter().all(|g| {
        candidate.iou(&g.rect) < NEGATIVE_MAX_IOU
            && candidate.intersection_area(&g.rect) / area < NEGATIVE_MAX_COVERAGE
    })
}

/// Uniformly random boxes (sides at least 8 px) that stay clear of the
/// ground truth. Fails after `1000 * count` rejected draws.
pub fn sample_nontext_boxes(
    image_dims: (usize, usize),
    gt: &[GroundTruthBox],
    count: usize,
    seed: u64,
) -> Result<Vec<Rect>, RankingError> {
    let (w, h) = image_dims;
    if w < MIN_NEGATIVE_SIDE || h < MIN_NEGATIVE_SIDE {
        return Err(RankingError::ImageTooSmall(w, h));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_rejections = 1000 * count;
    let mut rejected = 0;
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let bw = rng.gen_range(MIN_NEGATIVE_SIDE..=w);
        let bh = rng.gen_range(MIN_NEGATIVE_SIDE..=h);
        let x = rng.gen_range(0..=w - bw);
        let y = rng.gen_range(0..=h - bh);
        let candidate = Rect::new(x as f64, y as f64, (x + bw) as f64, (y + bh) as f64);
        if acceptable_negative(&candidate, gt) {
            out.push(candidate);
        } else {
            rejected += 1;
            if rejected >= max_rejections {
                return Err(RankingError::ExhaustedSampling(rejected));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(v: &[f64]) -> HogeVector {
        HogeVector::from_raw(v.to_vec())
    }

    fn set(text: &[&[f64]], nontext: &[&[f64]]) -> TemplateSet {
        TemplateSet {
            text: text.iter().map(|t| t.to_vec()).collect(),
            nontext: nontext.iter().map(|t| t.to_vec()).collect(),
            dim: text[0].len(),
        }
    }

    fn proposal(bbox: Rect, score: f64, birth: usize) -> Proposal {
        Proposal {
            members: vec![1],
            bbox,
            score: Some(score),
            birth_iteration: birth,
        }
    }

    #[test]
    fn equidistant_scores_half() {
        let t = set(&[&[0.0, 1.0]], &[&[0.0, -1.0]]);
        assert_eq!(score(&unit(&[1.0, 0.0]), &t).unwrap(), 0.5);
    }

    #[test]
    fn matching_text_template_scores_one() {
        let t = set(&[&[1.0, 0.0]], &[&[0.0, 1.0]]);
        assert_eq!(score(&unit(&[1.0, 0.0]), &t).unwrap(), 1.0);
    }

    #[test]
    fn hand_computed_score() {
        let t = set(&[&[0.0, 1.0]], &[&[-1.0, 0.0]]);
        let s = score(&unit(&[1.0, 0.0]), &t).unwrap();
        let expected = 2.0 / (2.0 + 2f64.sqrt());
        assert!((s - expected).abs() < 1e-12);
        assert!((s - 0.585_786_437_6).abs() < 1e-9);
    }

    #[test]
    fn empty_feature_scores_zero_and_dims_checked() {
        let t = set(&[&[0.0, 1.0]], &[&[-1.0, 0.0]]);
        assert_eq!(score(&unit(&[0.0, 0.0]), &t).unwrap(), 0.0);
        assert!(matches!(
            score(&unit(&[1.0, 0.0, 0.0]), &t),
            Err(RankingError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn degenerate_templates_score_half() {
        let t = set(&[&[1.0, 0.0]], &[&[1.0, 0.0]]);
        assert_eq!(score(&unit(&[1.0, 0.0]), &t).unwrap(), 0.5);
    }

    #[test]
    fn rank_orders_and_caps() {
        let r = Rect::new(0.0, 0.0, 1.0, 1.0);
        let ranked = rank_and_cap(
            vec![proposal(r, 0.2, 0), proposal(r, 0.9, 0), proposal(r, 0.5, 0)],
            2,
        );
        let scores: Vec<f64> = ranked.iter().map(|p| p.score.unwrap()).collect();
        assert_eq!(scores, vec![0.9, 0.5]);
    }

    #[test]
    fn ties_prefer_earlier_birth_then_smaller_area() {
        let small = Rect::new(0.0, 0.0, 2.0, 2.0);
        let big = Rect::new(0.0, 0.0, 5.0, 5.0);
        let ranked = rank_and_cap(
            vec![proposal(small, 0.5, 3), proposal(big, 0.5, 1), proposal(small, 0.5, 1)],
            10,
        );
        assert_eq!(ranked[0].bbox, small);
        assert_eq!(ranked[0].birth_iteration, 1);
        assert_eq!(ranked[1].bbox, big);
        assert_eq!(ranked[2].birth_iteration, 3);
    }

    #[test]
    fn nms_identical_and_disjoint() {
        let a = Rect::new(0.0, 0.0, 10.0, 10.0);
        let kept = nms(&[proposal(a, 0.9, 0), proposal(a, 0.8, 0)], 0.5);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].score, Some(0.9));
        let b = Rect::new(20.0, 0.0, 30.0, 10.0);
        assert_eq!(nms(&[proposal(a, 0.9, 0), proposal(b, 0.8, 0)], 0.5).len(), 2);
    }

    #[test]
    fn nms_chain_keeps_ends() {
        // IoU(A,B) = IoU(B,C) = 0.5, A and C only touch.
        let a = Rect::new(0.0, 0.0, 10.0, 10.0);
        let b = Rect::new(0.0, 0.0, 20.0, 10.0);
        let c = Rect::new(10.0, 0.0, 20.0, 10.0);
        let kept = nms(&[proposal(a, 0.9, 0), proposal(b, 0.8, 0), proposal(c, 0.7, 0)], 0.5);
        let boxes: Vec<Rect> = kept.iter().map(|p| p.bbox).collect();
        assert_eq!(boxes, vec![a, c]);
    }

    fn gt(rect: Rect) -> GroundTruthBox {
        GroundTruthBox {
            rect,
            transcription: None,
            difficult: false,
            oriented: None,
        }
    }

    #[test]
    fn negatives_without_gt_always_accepted() {
        let boxes = sample_nontext_boxes((64, 48), &[], 50, 9).unwrap();
        assert_eq!(boxes.len(), 50);
        assert!(boxes
            .iter()
            .all(|b| b.width() >= 8.0 && b.height() >= 8.0 && b.x_max <= 64.0 && b.y_max <= 48.0));
    }

    #[test]
    fn whole_image_gt_exhausts_sampling() {
        let err = sample_nontext_boxes((64, 48), &[gt(Rect::new(0.0, 0.0, 64.0, 48.0))], 3, 9).unwrap_err();
        assert!(matches!(err, RankingError::ExhaustedSampling(3000)));
    }

    #[test]
    fn negatives_are_seeded_and_clear_of_gt() {
        let g = [gt(Rect::new(10.0, 10.0, 40.0, 20.0))];
        let a = sample_nontext_boxes((100, 60), &g, 30, 5).unwrap();
        let b = sample_nontext_boxes((100, 60), &g, 30, 5).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|r| r.iou(&g[0].rect) < NEGATIVE_MAX_IOU));
        assert!(matches!(
            sample_nontext_boxes((7, 60), &g, 1, 0),
            Err(RankingError::ImageTooSmall(7, 60))
        ));
    }
}
