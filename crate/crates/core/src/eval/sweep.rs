//! Grid searches over the pooling geometry and over template count and
//! dimension.

use std::io::{self, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{mean_recall, write_header, SWEEP_THRESHOLDS};
use crate::edges::EdgeLabelMap;
use crate::geometry::Rect;
use crate::grouping::{generate_proposals, PoolMode, PoolingConfig, Proposal};
use crate::hoge::HogeVector;
use crate::ingest::GroundTruthBox;
use crate::pipeline::{AnnotatedImage, TrainingSet};
use crate::ranking::{rank_cmp, score, TemplateMethod};
use crate::Error;

/// Edge map and annotations of one image, as consumed by the generation sweep.
#[derive(Debug, Clone)]
pub struct SweepImage {
    pub label_map: EdgeLabelMap,
    pub gt: Vec<GroundTruthBox>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRow {
    pub window_h: usize,
    pub window_w: usize,
    pub stride_v: usize,
    pub stride_h: usize,
    /// Mean of the recalls at IoU 0.5, 0.7 and 0.8 over all proposals.
    pub mean_recall: f64,
    pub zero_gt: bool,
    /// Images whose generation failed and were left out.
    pub errors: usize,
}

/// Every window and stride combination in `sizes`, skipping the 1×1 window.
pub fn generation_lattice(sizes: std::ops::RangeInclusive<usize>, mode: PoolMode) -> Vec<PoolingConfig> {
    let mut out = Vec::new();
    for wh in sizes.clone() {
        for ww in sizes.clone() {
            if wh == 1 && ww == 1 {
                continue;
            }
            for sv in sizes.clone() {
                for sh in sizes.clone() {
                    out.push(PoolingConfig {
                        mode,
                        ..PoolingConfig::with_geometry(wh, ww, sv, sh)
                    });
                }
            }
        }
    }
    out
}

fn generation_row(images: &[SweepImage], cfg: &PoolingConfig) -> GenerationRow {
    let mut proposals = Vec::with_capacity(images.len());
    let mut gt = Vec::with_capacity(images.len());
    let mut errors = 0;
    for img in images {
        let cfg = PoolingConfig {
            max_iterations: cfg
                .max_iterations
                .max(cfg.iteration_bound(img.label_map.width, img.label_map.height)),
            ..*cfg
        };
        match generate_proposals(&img.label_map, &cfg) {
            Ok(g) => {
                proposals.push(g.proposals.iter().map(|p| p.bbox).collect::<Vec<Rect>>());
                gt.push(img.gt.clone());
            }
            Err(e) => {
                log::warn!("generation failed for {}x{} grid: {e}", cfg.window_h, cfg.window_w);
                errors += 1;
            }
        }
    }
    let (mean_recall, zero_gt) =
        mean_recall(&proposals, &gt, &SWEEP_THRESHOLDS, usize::MAX).expect("lists built in step");
    GenerationRow {
        window_h: cfg.window_h,
        window_w: cfg.window_w,
        stride_v: cfg.stride_v,
        stride_h: cfg.stride_h,
        mean_recall,
        zero_gt,
        errors,
    }
}

/// Uncapped generation recall for every setting, rows in `settings` order.
pub fn sweep_generation(images: &[SweepImage], settings: &[PoolingConfig]) -> Vec<GenerationRow> {
    settings.par_iter().map(|cfg| generation_row(images, cfg)).collect()
}

pub fn write_generation_csv<W: Write>(rows: &[GenerationRow], mut w: W, header: &str) -> io::Result<()> {
    write_header(&mut w, header)?;
    writeln!(w, "wh,ww,sv,sh,mean_recall")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{:.6}",
            r.window_h, r.window_w, r.stride_v, r.stride_h, r.mean_recall
        )?;
    }
    Ok(())
}

/// Template counts 5, 10, ..., 100 and dimensions 10, 20, ..., 180.
pub fn ranking_lattice() -> (Vec<usize>, Vec<usize>) {
    ((5..=100).step_by(5).collect(), (10..=180).step_by(10).collect())
}

/// Seeded shuffle of `0..count` split 80/20 into training and held-out
/// indices. Both parts are non-empty once `count >= 2`.
pub fn split_train_test(count: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..count).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut train_len = (count as f64 * 0.8).round() as usize;
    if count >= 2 {
        train_len = train_len.clamp(1, count - 1);
    }
    let test = order.split_off(train_len.min(count));
    let mut train = order;
    train.sort_unstable();
    let mut test = test;
    test.sort_unstable();
    (train, test)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankingRow {
    pub n: usize,
    pub dims: usize,
    /// Mean of the held-out recalls at IoU 0.5, 0.7 and 0.8 with the cap.
    pub mean_recall: f64,
    pub zero_gt: bool,
    /// Why the setting could not be evaluated, if it could not.
    pub error: Option<String>,
}

/// Scores, ranks and caps each image's proposals, returning the boxes.
pub fn ranked_boxes(
    proposals: &[Proposal],
    features: &[HogeVector],
    templates: &crate::ranking::TemplateSet,
    cap: usize,
) -> Result<Vec<Rect>, Error> {
    let mut scored: Vec<Proposal> = proposals.to_vec();
    for (p, f) in scored.iter_mut().zip(features) {
        p.score = Some(score(f, templates)?);
    }
    scored.sort_by(rank_cmp);
    Ok(scored.iter().take(cap).map(|p| p.bbox).collect())
}

/// Trains templates on an 80% split for every `(n, dims)` pair and reports
/// capped recall on the remaining 20%. Rows come out with `n` varying
/// slowest.
pub fn sweep_ranking(
    images: &[AnnotatedImage],
    ns: &[usize],
    dims: &[usize],
    cap: usize,
    seed: u64,
    signed: bool,
    method: TemplateMethod,
) -> Result<Vec<RankingRow>, Error> {
    if images.len() < 2 {
        return Err(super::EvalError::EmptyDataset.into());
    }
    let (train_idx, test_idx) = split_train_test(images.len(), seed);
    let train: Vec<&AnnotatedImage> = train_idx.iter().map(|&i| &images[i]).collect();
    let training = TrainingSet::collect(&train, signed, seed)?;
    let test: Vec<&AnnotatedImage> = test_idx.iter().map(|&i| &images[i]).collect();
    let test_indices = test
        .iter()
        .map(|img| img.index(signed))
        .collect::<Result<Vec<_>, _>>()?;
    let test_gt: Vec<Vec<GroundTruthBox>> = test.iter().map(|img| img.gt.clone()).collect();

    let per_dims: Vec<Vec<RankingRow>> = dims
        .par_iter()
        .map(|&d| -> Result<Vec<RankingRow>, Error> {
            let (text, nontext) = training.features(d)?;
            let test_features: Vec<Vec<HogeVector>> = test
                .iter()
                .zip(&test_indices)
                .map(|(img, index)| img.proposals.iter().map(|p| index.hoge(&p.bbox, d)).collect())
                .collect::<Result<_, _>>()?;
            let mut rows = Vec::with_capacity(ns.len());
            for &n in ns {
                let templates = match crate::ranking::train_templates(&text, &nontext, n, seed, method) {
                    Ok(t) => t,
                    Err(e) => {
                        log::warn!("n={n} dims={d}: {e}");
                        rows.push(RankingRow {
                            n,
                            dims: d,
                            mean_recall: 0.0,
                            zero_gt: false,
                            error: Some(e.to_string()),
                        });
                        continue;
                    }
                };
                let ranked: Vec<Vec<Rect>> = test
                    .iter()
                    .zip(&test_features)
                    .map(|(img, f)| ranked_boxes(&img.proposals, f, &templates, cap))
                    .collect::<Result<_, _>>()?;
                let (mean_recall, zero_gt) = mean_recall(&ranked, &test_gt, &SWEEP_THRESHOLDS, cap)?;
                rows.push(RankingRow {
                    n,
                    dims: d,
                    mean_recall,
                    zero_gt,
                    error: None,
                });
            }
            Ok(rows)
        })
        .collect::<Result<_, _>>()?;

    let mut rows = Vec::with_capacity(ns.len() * dims.len());
    for ni in 0..ns.len() {
        for block in &per_dims {
            rows.push(block[ni].clone());
        }
    }
    Ok(rows)
}

/// `n,dims,mean_recall`; settings that failed have an empty recall field.
pub fn write_ranking_csv<W: Write>(rows: &[RankingRow], mut w: W, header: &str) -> io::Result<()> {
    write_header(&mut w, header)?;
    writeln!(w, "n,dims,mean_recall")?;
    for r in rows {
        match r.error {
            None => writeln!(w, "{},{},{:.6}", r.n, r.dims, r.mean_recall)?,
            Some(_) => writeln!(w, "{},{},", r.n, r.dims)?,
        }
    }
    Ok(())
}
